// deid: batch de-identification, evaluation and risk scoring from the shell.
//
// Exit codes: 0 success, 1 configuration or input error, 2 partial success
// (some files failed; see stderr).

#include "deid/evaluation.hpp"
#include "deid/pipeline.hpp"
#include "deid/serialize.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DeidArgs {
  std::string settings;
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string embed_url;
  bool compat = false;
  bool pairs = false;
  unsigned jobs = 1;
};

struct EvalArgs {
  std::string pred;
  std::string gold;
  std::string mode = "exact";
  bool explain = false;
};

struct RiskArgs {
  std::string in;
  std::optional<double> threshold;
  int radius = 5;
  bool pairs = false;
};

int run_deid(const DeidArgs& a, const std::string& data_dir, bool as_json) {
  auto settings = deid::settings_from_json(json::parse(deid::read_file(a.settings)));
  if (a.seed) settings.rng_seed = *a.seed;
  const auto resources = deid::Resources::load(data_dir.empty() ? deid::default_data_dir() : fs::path(data_dir));

  std::vector<deid::FileError> errors;
  if (!fs::is_directory(a.in)) throw deid::Error(deid::ErrorCode::Io, "input directory " + a.in + " not found");
  auto docs = deid::load_letters(a.in, errors);
  if (docs.empty() && errors.empty()) {
    std::cerr << "deid: no inputs in " << a.in << "\n";
    return 1;
  }

  deid::PipelineOptions options;
  options.compat = a.compat;
  options.jobs = a.jobs;
  options.embed_url = a.embed_url;
  options.counting = a.pairs ? deid::CountingMode::Pairs : deid::CountingMode::Windows;
  auto result = deid::run_batch(std::move(docs), settings, resources, options);
  errors.insert(errors.end(), result.errors.begin(), result.errors.end());

  const fs::path out(a.out);
  for (const auto& d : result.documents) {
    deid::write_file(out / (d.document.id() + ".txt"), d.masked.masked_text);
    deid::write_file(out / (d.document.id() + ".spans.json"), deid::dump_pretty(deid::document_result_json(d)));
  }
  if (result.risk) deid::write_file(out / "risk.json", deid::dump_pretty(deid::risk_to_json(*result.risk)));

  for (const auto& e : errors) std::cerr << "deid: " << e.file_name << ": " << e.message << "\n";
  if (as_json) {
    json summary{{"documents", json::array()}, {"errors", json::array()}};
    for (const auto& d : result.documents) {
      summary["documents"].push_back({{"id", d.document.id()}, {"spans", d.spans.size()}});
    }
    for (const auto& e : errors) summary["errors"].push_back({{"file", e.file_name}, {"message", e.message}});
    if (result.risk) summary["risk"] = deid::risk_to_json(*result.risk);
    std::cout << deid::dump_pretty(summary);
  } else {
    std::cout << "processed " << result.documents.size() << " document(s), " << errors.size() << " failed\n";
    if (result.risk) {
      for (const auto& r : result.risk->documents) {
        std::cout << "  " << r.id << ": " << r.unique_count << "/" << result.risk->total_count << " unique ("
                  << deid::band_label(r.band) << ")\n";
      }
    }
  }
  return errors.empty() ? 0 : 2;
}

std::map<std::string, std::vector<deid::EntitySpan>> read_predictions(const fs::path& dir) {
  std::map<std::string, std::vector<deid::EntitySpan>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    const std::string suffix = ".spans.json";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const auto j = json::parse(deid::read_file(entry.path()));
    out[j.at("doc_id").get<std::string>()] = deid::spans_from_json(j.at("spans"));
  }
  return out;
}

int run_eval(const EvalArgs& a, bool as_json) {
  const auto mode = deid::parse_match_mode(a.mode);
  if (!mode) throw deid::Error(deid::ErrorCode::InvalidArgument, "unknown match mode '" + a.mode + "'");
  auto predictions = read_predictions(a.pred);

  std::map<std::string, std::pair<deid::Document, std::vector<deid::EntitySpan>>> gold;
  for (const auto& entry : fs::directory_iterator(a.gold)) {
    if (entry.path().extension() != ".xml") continue;
    const auto bytes = deid::read_file(entry.path());
    auto doc = deid::load_letter_xml(bytes, entry.path().stem().string(), entry.path().filename().string());
    auto ann = deid::load_gold_annotations(bytes, doc);
    const auto id = doc.id();
    gold.emplace(id, std::make_pair(std::move(doc), std::move(ann.spans)));
  }
  if (gold.empty()) throw deid::Error(deid::ErrorCode::InvalidArgument, "no gold .xml files in " + a.gold);

  // An empty prediction directory scores as "nothing predicted".
  if (!predictions.empty()) {
    std::set<std::string> pred_ids, gold_ids;
    for (const auto& [id, _] : predictions) pred_ids.insert(id);
    for (const auto& [id, _] : gold) gold_ids.insert(id);
    if (pred_ids != gold_ids) {
      std::cerr << "deid: prediction and gold document ids differ\n";
      return 1;
    }
  }

  deid::TypeCounts counts;
  std::vector<deid::FalsePositive> fps;
  for (const auto& [id, g] : gold) {
    const auto& pred = predictions.count(id) ? predictions.at(id) : std::vector<deid::EntitySpan>{};
    deid::validate_spans(g.first, pred);
    deid::accumulate(counts, deid::score(pred, g.second, *mode));
    if (a.explain) {
      auto part = deid::explain_false_positives(id, pred, g.second);
      fps.insert(fps.end(), part.begin(), part.end());
    }
  }
  for (auto t : deid::kAllEntityTypes) counts[t];  // zero rows keep the table shape stable
  // Drop types absent from both sides.
  for (auto it = counts.begin(); it != counts.end();) {
    it = (it->second == deid::Counts{}) ? counts.erase(it) : std::next(it);
  }

  deid::Counts total;
  for (const auto& [_, c] : counts) total += c;
  const auto rep = deid::report(counts);
  const auto overall = deid::metrics_from_counts(total);

  if (as_json) {
    json j = deid::report_to_json(rep);
    j["mode"] = a.mode;
    j["counts"] = {{"tp", total.tp}, {"fp", total.fp}, {"fn", total.fn}};
    j["overall"] = {{"precision", overall.precision}, {"recall", overall.recall}, {"f1", overall.f1}};
    if (a.explain) {
      json list = json::array();
      for (const auto& fp : fps) {
        list.push_back({{"doc_id", fp.doc_id}, {"span", deid::span_to_json(fp.span)}, {"cause", deid::cause_label(fp.cause)}});
      }
      j["false_positives"] = list;
    }
    std::cout << deid::dump_pretty(j);
  } else {
    std::cout << deid::format_report(rep) << "\n";
    char line[200];
    std::snprintf(line, sizeof line, "TP %zu  FP %zu  FN %zu  precision %.4f  recall %.4f  f1 %.4f\n", total.tp,
                  total.fp, total.fn, overall.precision, overall.recall, overall.f1);
    std::cout << line;
    if (a.explain) {
      std::map<std::string, std::size_t> by_cause;
      for (const auto& fp : fps) {
        ++by_cause[std::string(deid::cause_label(fp.cause))];
        std::cout << "  " << fp.doc_id << " [" << fp.span.start << "," << fp.span.end << ") "
                  << deid::type_label(fp.span.etype) << " '" << fp.span.surface << "': " << deid::cause_label(fp.cause)
                  << "\n";
      }
      for (const auto& [cause, n] : by_cause) std::cout << cause << ": " << n << "\n";
    }
  }
  return 0;
}

int run_risk(const RiskArgs& a, bool as_json) {
  std::vector<deid::MaskedDocument> docs;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.in)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 11 && name.compare(name.size() - 11, 11, ".spans.json") == 0) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "deid: no inputs in " << a.in << "\n";
    return 1;
  }
  for (const auto& f : files) {
    auto j = json::parse(deid::read_file(f));
    const auto id = j.at("doc_id").get<std::string>();
    j["masked_text"] = deid::read_file(fs::path(a.in) / (id + ".txt"));
    docs.push_back(deid::masked_from_json(j));
  }
  const deid::HashingEmbedder embedder;
  const auto report = deid::assess_batch(docs, embedder, a.threshold.value_or(0.5), a.radius,
                                         a.pairs ? deid::CountingMode::Pairs : deid::CountingMode::Windows);
  if (as_json) {
    std::cout << deid::dump_pretty(deid::risk_to_json(report));
  } else {
    for (const auto& r : report.documents) {
      char line[200];
      std::snprintf(line, sizeof line, "%-20s %6zu %8.2f%%  %s\n", r.id.c_str(), r.unique_count, r.risk_percent,
                    std::string(deid::band_label(r.band)).c_str());
      std::cout << line;
    }
    std::cout << "total contexts: " << report.total_count << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clinical letter de-identification"};
  app.require_subcommand(1);
  std::string format = "text";
  std::string data_dir;
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--data-dir", data_dir, "Lexicon and surrogate directory");

  DeidArgs deid_args;
  auto* deid_cmd = app.add_subcommand("deid", "Mask a directory of letters");
  deid_cmd->add_option("--settings", deid_args.settings, "Settings JSON")->required();
  deid_cmd->add_option("--in", deid_args.in, "Input directory")->required();
  deid_cmd->add_option("--out", deid_args.out, "Output directory")->required();
  deid_cmd->add_option("--seed", deid_args.seed, "Override the settings seed");
  deid_cmd->add_option("--jobs", deid_args.jobs, "Parallel recognition jobs")->check(CLI::PositiveNumber);
  deid_cmd->add_option("--embed-url", deid_args.embed_url, "Context embedding endpoint for risk")
      ->envname("DEID_EMBED_URL");
  deid_cmd->add_flag("--compat", deid_args.compat, "Month-name fragmenting rules and duplicate-only merge");
  deid_cmd->add_flag("--count-pairs", deid_args.pairs, "Count unique window pairs instead of windows");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted spans against gold annotations");
  eval_cmd->add_option("--pred", eval_args.pred, "Directory of <id>.spans.json")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--gold", eval_args.gold, "Directory of annotated .xml letters")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--mode", eval_args.mode, "exact, overlap or surface")
      ->check(CLI::IsMember({"exact", "overlap", "surface"}));
  eval_cmd->add_flag("--explain", eval_args.explain, "Classify false positives");

  RiskArgs risk_args;
  auto* risk_cmd = app.add_subcommand("risk", "Score re-identification risk of masked output");
  risk_cmd->add_option("--in", risk_args.in, "Output directory of a deid run")->required()->check(CLI::ExistingDirectory);
  risk_cmd->add_option("--threshold", risk_args.threshold, "Similarity threshold")->check(CLI::Range(0.0, 1.0));
  risk_cmd->add_option("--radius", risk_args.radius, "Context words per side")->check(CLI::PositiveNumber);
  risk_cmd->add_flag("--count-pairs", risk_args.pairs, "Count unique window pairs instead of windows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const bool as_json = format == "json";
  try {
    if (*deid_cmd) return run_deid(deid_args, data_dir, as_json);
    if (*eval_cmd) return run_eval(eval_args, as_json);
    return run_risk(risk_args, as_json);
  } catch (const deid::Error& e) {
    std::cerr << "deid: " << e.what() << "\n";
  } catch (const json::exception& e) {
    std::cerr << "deid: malformed JSON: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "deid: " << e.what() << "\n";
  }
  return 1;
}
