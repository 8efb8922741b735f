#include "deid/pipeline.hpp"

#include "deid/serialize.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <set>
#include <thread>

namespace deid {

namespace fs = std::filesystem;

Resources Resources::load(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) {
    throw Error(ErrorCode::Io, "data directory " + data_dir.string() + " does not exist");
  }
  Resources r;
  r.lexicons.push_back(load_lexicon_file(data_dir / "lexicons" / "names.csv", EntityType::Name));
  r.lexicons.push_back(load_lexicon_file(data_dir / "lexicons" / "locations.txt", EntityType::Location));
  r.lexicons.push_back(load_lexicon_file(data_dir / "lexicons" / "professions.txt", EntityType::Profession));
  r.surrogates.surnames = load_lexicon_file(data_dir / "surrogates" / "surnames.txt", EntityType::Name);
  r.surrogates.full_names = load_lexicon_file(data_dir / "surrogates" / "full_names.txt", EntityType::Name);
  r.surrogates.locations = load_lexicon_file(data_dir / "surrogates" / "locations.txt", EntityType::Location);
  r.surrogates.professions = load_lexicon_file(data_dir / "surrogates" / "professions.txt", EntityType::Profession);
  r.stub_table = load_stub_table(read_file(data_dir / "stub_model.tsv"));
  return r;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("DEID_DATA_DIR"); env && *env) return env;
  return DEID_DEFAULT_DATA_DIR;
}

RuleSet PipelineOptions::rules() const { return compat ? RuleSet::fragmenting_compat() : RuleSet::defaults(); }

MergePolicy PipelineOptions::merge_policy() const {
  MergePolicy p;
  if (compat) p.overlap = OverlapRule::KeepAllCompat;
  return p;
}

Recognizer::Recognizer(const Resources& resources, const DeidSettings& settings, const PipelineOptions& options,
                       const std::map<EntityType, std::vector<std::string>>& manual)
    : rules_(options.rules()), policy_(options.merge_policy()) {
  settings.validate();
  // Bundled lists and custom dictionaries of the same type share one trie.
  std::map<EntityType, std::vector<std::string>> entries;
  for (const auto& lex : resources.lexicons) {
    auto& e = entries[lex.etype];
    e.insert(e.end(), lex.entries.begin(), lex.entries.end());
  }
  for (const auto& [etype, words] : settings.custom_dictionaries) {
    auto& e = entries[etype];
    e.insert(e.end(), words.begin(), words.end());
  }
  for (const auto& [etype, words] : entries) {
    if (!words.empty()) dictionary_.emplace_back(make_lexicon(etype, words));
  }
  for (const auto& [etype, words] : manual) {
    if (!words.empty()) manual_.emplace_back(make_lexicon(etype, words), true, SpanSource::Manual);
  }

  if (settings.model.kind == ModelSettings::Kind::Stub) {
    model_ = std::make_unique<StubModel>(resources.stub_table, RuleSet::defaults());
  } else {
    RemoteModelOptions ro;
    ro.base_url = settings.model.url;
    if (ro.base_url.empty()) ro.base_url = options.model_url;
    if (ro.base_url.empty()) {
      if (const char* env = std::getenv("DEID_MODEL_URL"); env) ro.base_url = env;
    }
    ro.model = settings.model.remote_name;
    ro.timeout = std::chrono::milliseconds(settings.model.timeout_ms);
    model_ = std::make_unique<RemoteModel>(std::move(ro));
  }
}

Recognizer::Parts Recognizer::recognize_parts(const Document& doc) const {
  Parts p;
  p.dictionary = scan(doc, dictionary_);
  p.manual = scan(doc, manual_);
  p.rules = scan_rules(doc, rules_);
  p.model = recognize_with_model(doc, *model_);
  return p;
}

std::vector<EntitySpan> Recognizer::recognize(const Document& doc) const {
  auto p = recognize_parts(doc);
  std::vector<SpanSet> sets{{doc.id(), std::move(p.dictionary)},
                            {doc.id(), std::move(p.rules)},
                            {doc.id(), std::move(p.model)},
                            {doc.id(), std::move(p.manual)}};
  return merge(sets, policy_);
}

Document parse_letter(const std::string& file_name, std::string_view bytes) {
  const fs::path path(file_name);
  const auto id = path.stem().string();
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "file name '" + file_name + "' has no stem");
  if (ext == ".xml") return load_letter_xml(bytes, id, path.filename().string());
  return load_letter_text(bytes, id, path.filename().string());
}

std::vector<Document> load_letters(const fs::path& dir, std::vector<FileError>& errors) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".txt" || ext == ".xml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) {
    try {
      docs.push_back(parse_letter(f.filename().string(), read_file(f)));
    } catch (const Error& e) {
      errors.push_back({f.filename().string(), e.what()});
    }
  }
  return docs;
}

BatchResult run_batch(std::vector<Document> docs, const DeidSettings& settings, const Resources& resources,
                      const PipelineOptions& options, const std::map<EntityType, std::vector<std::string>>& manual,
                      const SpanEdit& edit) {
  BatchResult result;
  std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id() < b.id(); });
  std::vector<Document> unique;
  for (auto& d : docs) {
    if (!unique.empty() && unique.back().id() == d.id()) {
      result.errors.push_back({d.file_name(), "duplicate document id '" + d.id() + "'"});
      continue;
    }
    unique.push_back(std::move(d));
  }

  const Recognizer recognizer(resources, settings, options, manual);
  std::vector<std::vector<EntitySpan>> spans(unique.size());
  std::vector<std::exception_ptr> failures(unique.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < unique.size(); i = next++) {
      try {
        auto s = recognizer.recognize(unique[i]);
        spans[i] = edit ? edit(unique[i], std::move(s)) : std::move(s);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const auto jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(unique.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  // Sequential masking in id order keeps replacement draws independent of
  // the job count.
  ReplacementContext ctx(settings.rng_seed, options.scope);
  for (const auto& s : spans) ctx.reserve(s, settings);
  const bool replacing = settings.any_replace();
  for (std::size_t i = 0; i < unique.size(); ++i) {
    // Compat merging may leave overlaps; text can only be masked once.
    const auto to_mask = options.compat ? merge(spans[i]) : spans[i];
    auto masked = replacing ? replace(unique[i], to_mask, settings, resources.surrogates, ctx)
                            : redact(unique[i], to_mask, settings);
    result.documents.push_back({std::move(unique[i]), std::move(spans[i]), std::move(masked)});
  }

  if (replacing) {
    std::vector<MaskedDocument> masked;
    for (const auto& d : result.documents) masked.push_back(d.masked);
    std::unique_ptr<Embedder> embedder;
    if (options.embed_url.empty()) {
      embedder = std::make_unique<HashingEmbedder>();
    } else {
      embedder = std::make_unique<RemoteEmbedder>(options.embed_url, std::chrono::milliseconds(settings.model.timeout_ms));
    }
    result.risk = assess_batch(masked, *embedder, settings.risk_threshold, settings.context_radius_words,
                               options.counting);
  }
  return result;
}

nlohmann::json document_result_json(const DocumentResult& r) {
  auto j = masked_to_json(r.masked);
  j.erase("masked_text");
  j["spans"] = spans_to_json(r.spans);
  return j;
}

}  // namespace deid
