#include "deid/model.hpp"

#include "deid/dictionary.hpp"
#include "deid/unicode.hpp"

#include <httplib.h>

#include <algorithm>
#include <future>
#include <set>

namespace deid {

std::string_view tag_label(TokenTag t) {
  switch (t) {
    case TokenTag::O: return "O";
    case TokenTag::Id: return "ID";
    case TokenTag::Phi: return "PHI";
    case TokenTag::Name: return "NAME";
    case TokenTag::Contact: return "CONTACT";
    case TokenTag::Date: return "DATE";
    case TokenTag::Age: return "AGE";
    case TokenTag::Profession: return "PROFESSION";
    case TokenTag::Location: return "LOCATION";
    case TokenTag::Pad: return "PAD";
  }
  return "O";
}

std::optional<TokenTag> parse_tag(std::string_view s) {
  for (auto t : {TokenTag::O, TokenTag::Id, TokenTag::Phi, TokenTag::Name, TokenTag::Contact, TokenTag::Date,
                 TokenTag::Age, TokenTag::Profession, TokenTag::Location, TokenTag::Pad}) {
    if (s == tag_label(t)) return t;
  }
  return std::nullopt;
}

std::optional<EntityType> tag_entity_type(TokenTag t) {
  switch (t) {
    case TokenTag::Id: return EntityType::Id;
    case TokenTag::Phi: return EntityType::Phi;
    case TokenTag::Name: return EntityType::Name;
    case TokenTag::Contact: return EntityType::Contact;
    case TokenTag::Date: return EntityType::Date;
    case TokenTag::Age: return EntityType::Age;
    case TokenTag::Profession: return EntityType::Profession;
    case TokenTag::Location: return EntityType::Location;
    default: return std::nullopt;
  }
}

TokenTag entity_tag(EntityType t) {
  switch (t) {
    case EntityType::Name: return TokenTag::Name;
    case EntityType::Date: return TokenTag::Date;
    case EntityType::Age: return TokenTag::Age;
    case EntityType::Location: return TokenTag::Location;
    case EntityType::Profession: return TokenTag::Profession;
    case EntityType::Id: return TokenTag::Id;
    case EntityType::Contact: return TokenTag::Contact;
    case EntityType::Phi: return TokenTag::Phi;
  }
  return TokenTag::Phi;
}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool follows_title(const std::u32string& t, std::size_t period) {
  static const std::set<std::u32string> titles = {U"dr", U"mr", U"mrs", U"ms", U"prof", U"st"};
  std::size_t b = period;
  while (b > 0 && is_word_char(t[b - 1])) --b;
  if (b == period) return false;
  return titles.count(fold_case(std::u32string_view(t).substr(b, period - b))) > 0;
}

}  // namespace

std::vector<Sentence> split_sentences(const Document& doc) {
  const auto& t = doc.chars();
  const std::size_t n = t.size();
  std::vector<Sentence> out;

  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(t[b])) ++b;
    while (e > b && is_space(t[e - 1])) --e;
    if (b < e) out.push_back({doc.substr(b, e), b, e - b});
  };

  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] == U'\n') {
      emit(seg, i);
      seg = i + 1;
      continue;
    }
    if (!is_terminator(t[i])) continue;
    std::size_t j = i;
    while (j + 1 < n && is_terminator(t[j + 1])) ++j;
    std::size_t m = j + 1;
    while (m < n && is_space(t[m]) && t[m] != U'\n') ++m;
    const bool gap = m > j + 1;
    if (gap && m < n && (is_upper(t[m]) || is_digit(t[m])) && !(t[i] == U'.' && j == i && follows_title(t, i))) {
      emit(seg, j + 1);
      seg = j + 1;
      i = m - 1;
      continue;
    }
    i = j;
  }
  emit(seg, n);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> pretokenize(const std::u32string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
    } else if (is_word_char(text[i])) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      out.emplace_back(i, j);
      i = j;
    } else {
      out.emplace_back(i, i + 1);
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stub model

StubModel::StubModel(std::vector<std::pair<std::string, EntityType>> table, RuleSet rules, std::size_t max_len)
    : table_(std::move(table)), rules_(std::move(rules)), max_len_(max_len) {
  for (const auto& [surface, etype] : table_) {
    auto folded = fold_case(utf8_to_u32(surface));
    if (!folded.empty()) folded_.emplace_back(std::move(folded), etype);
  }
  std::stable_sort(folded_.begin(), folded_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

SentencePredictions StubModel::predict_one(const Sentence& s) const {
  const auto chars = utf8_to_u32(s.text);
  const auto tokens = pretokenize(chars);
  std::vector<TokenTag> tags(tokens.size(), TokenTag::O);
  std::set<std::size_t> token_ends;
  for (const auto& tok : tokens) token_ends.insert(tok.second);

  // Table lookup, longest entry first at each token start.
  for (std::size_t ti = 0; ti < tokens.size();) {
    const auto pos = tokens[ti].first;
    std::size_t hit_end = 0;
    TokenTag hit_tag = TokenTag::O;
    for (const auto& [entry, etype] : folded_) {
      const auto end = pos + entry.size();
      if (end > chars.size() || !token_ends.count(end)) continue;
      bool same = true;
      for (std::size_t k = 0; k < entry.size() && same; ++k) same = fold_case(chars[pos + k]) == entry[k];
      if (same) {
        hit_end = end;
        hit_tag = entity_tag(etype);
        break;
      }
    }
    if (hit_end == 0) {
      ++ti;
      continue;
    }
    while (ti < tokens.size() && tokens[ti].first < hit_end) tags[ti++] = hit_tag;
  }

  // Pattern layer fills tokens the table left untagged.
  const Document sentence_doc("", s.text);
  for (const auto& span : scan_rules(sentence_doc, rules_)) {
    for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
      if (tags[ti] == TokenTag::O && tokens[ti].first >= span.start && tokens[ti].second <= span.end) {
        tags[ti] = entity_tag(span.etype);
      }
    }
  }

  SentencePredictions out;
  for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
    const auto [b, e] = tokens[ti];
    auto piece = [&](std::size_t pb, std::size_t pe, bool cont) {
      auto text = u32_to_utf8(std::u32string_view(chars).substr(pb, pe - pb));
      out.push_back({cont ? "##" + text : text, pb, pe, tags[ti]});
    };
    if (e - b >= 7 && is_word_char(chars[b])) {
      // head of two characters, then two-character pieces, last piece 2 or 3
      piece(b, b + 2, false);
      std::size_t p = b + 2;
      while (e - p > 3) {
        piece(p, p + 2, true);
        p += 2;
      }
      piece(p, e, true);
    } else {
      piece(b, e, false);
    }
  }
  return out;
}

std::vector<SentencePredictions> StubModel::predict_batch(const std::vector<Sentence>& sentences) const {
  std::vector<SentencePredictions> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(predict_one(s));
  return out;
}

// ---------------------------------------------------------------------------
// Wire protocol

nlohmann::json predict_request_json(const std::vector<Sentence>& sentences) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sentences) arr.push_back({{"text", s.text}, {"offset", s.offset}});
  return {{"sentences", arr}};
}

nlohmann::json predictions_to_json(const std::vector<SentencePredictions>& predictions) {
  nlohmann::json outer = nlohmann::json::array();
  for (const auto& sentence : predictions) {
    nlohmann::json inner = nlohmann::json::array();
    for (const auto& p : sentence) {
      inner.push_back({{"token", p.token}, {"start", p.char_start}, {"end", p.char_end}, {"tag", tag_label(p.tag)}});
    }
    outer.push_back(std::move(inner));
  }
  return {{"predictions", outer}};
}

std::vector<SentencePredictions> parse_predict_response(const nlohmann::json& j,
                                                        const std::vector<Sentence>& sentences) {
  auto fail = [](const std::string& msg) -> void { throw Error(ErrorCode::MalformedResponse, msg); };
  if (!j.is_object() || !j.contains("predictions") || !j.at("predictions").is_array()) {
    fail("response lacks a 'predictions' array");
  }
  const auto& outer = j.at("predictions");
  if (outer.size() != sentences.size()) {
    fail("expected predictions for " + std::to_string(sentences.size()) + " sentences, got " +
         std::to_string(outer.size()));
  }
  std::vector<SentencePredictions> out(sentences.size());
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    if (!outer[si].is_array()) fail("predictions for sentence " + std::to_string(si) + " is not an array");
    std::size_t prev_end = 0;
    for (const auto& p : outer[si]) {
      try {
        const auto tag_text = p.at("tag").get<std::string>();
        auto tag = parse_tag(tag_text);
        if (!tag) fail("unknown tag '" + tag_text + "'");
        if (*tag == TokenTag::Pad) continue;
        TokenPrediction tp{p.at("token").get<std::string>(), p.at("start").get<std::size_t>(),
                           p.at("end").get<std::size_t>(), *tag};
        if (tp.char_start >= tp.char_end || tp.char_end > sentences[si].length) {
          fail("token '" + tp.token + "' has offsets outside sentence " + std::to_string(si));
        }
        if (tp.char_start < prev_end) fail("token '" + tp.token + "' overlaps the previous token");
        prev_end = tp.char_end;
        out[si].push_back(std::move(tp));
      } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed prediction: ") + e.what());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Remote model

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_begin = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_begin);
  if (slash == std::string::npos) return {url, ""};
  auto path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

}  // namespace

RemoteModel::RemoteModel(RemoteModelOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw Error(ErrorCode::InvalidSettings, "remote model requires a base URL");
  if (options_.batch_size == 0 || options_.max_in_flight == 0) {
    throw Error(ErrorCode::InvalidSettings, "remote model batch size and in-flight limit must be positive");
  }
}

std::string RemoteModel::name() const {
  return options_.model == RemoteModelName::ClinicalBert ? "clinicalbert" : "biobert";
}

std::vector<SentencePredictions> RemoteModel::request(const std::vector<Sentence>& batch, std::size_t sequence) const {
  const auto [host, prefix] = split_url(options_.base_url);
  httplib::Client client(host);
  const auto secs = options_.timeout.count() / 1000;
  const auto usecs = (options_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto body = predict_request_json(batch);
  body["model"] = name();
  body["sequence"] = sequence;
  httplib::Headers headers{{kProtocolHeader, kProtocolVersion}};
  auto res = client.Post(prefix + "/predict", headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EndpointUnreachable,
                "model endpoint " + options_.base_url + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status == 422) throw Error(ErrorCode::SequenceTooLong, "model endpoint rejected an oversize sentence");
  if (res->status != 200) {
    throw Error(ErrorCode::MalformedResponse, "model endpoint returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("sequence") && j.at("sequence") != sequence) {
    throw Error(ErrorCode::MalformedResponse, "response sequence id does not match request");
  }
  return parse_predict_response(j, batch);
}

std::vector<SentencePredictions> RemoteModel::predict_batch(const std::vector<Sentence>& sentences) const {
  std::vector<std::vector<Sentence>> batches;
  for (std::size_t i = 0; i < sentences.size(); i += options_.batch_size) {
    const auto end = std::min(sentences.size(), i + options_.batch_size);
    batches.emplace_back(sentences.begin() + static_cast<std::ptrdiff_t>(i),
                         sentences.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::vector<SentencePredictions> out;
  out.reserve(sentences.size());
  for (std::size_t first = 0; first < batches.size(); first += options_.max_in_flight) {
    const auto last = std::min(batches.size(), first + options_.max_in_flight);
    std::vector<std::future<std::vector<SentencePredictions>>> inflight;
    for (std::size_t b = first; b < last; ++b) {
      inflight.push_back(std::async(std::launch::async, [this, &batches, b] { return request(batches[b], b); }));
    }
    for (auto& f : inflight) {
      auto part = f.get();
      for (auto& p : part) out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chunked prediction and reconstruction

std::vector<SentencePredictions> predict(const std::vector<Sentence>& sentences, const ModelEndpoint& endpoint,
                                         const PredictOptions& options) {
  const auto limit = endpoint.max_sequence_length();
  struct Chunk {
    std::size_t sentence;
    std::size_t rel_start;
  };
  std::vector<Sentence> requests;
  std::vector<Chunk> origin;

  for (std::size_t si = 0; si < sentences.size(); ++si) {
    const auto& s = sentences[si];
    const auto chars = utf8_to_u32(s.text);
    const auto tokens = pretokenize(chars);
    if (tokens.size() <= limit) {
      requests.push_back(s);
      origin.push_back({si, 0});
      continue;
    }
    if (!options.chunking) {
      throw Error(ErrorCode::SequenceTooLong, "sentence at offset " + std::to_string(s.offset) + " has " +
                                                  std::to_string(tokens.size()) + " tokens (limit " +
                                                  std::to_string(limit) + ")");
    }
    // Whitespace-delimited words with their pre-token counts.
    struct Word {
      std::size_t begin, end, count;
    };
    std::vector<Word> words;
    std::size_t ti = 0;
    for (std::size_t i = 0; i < chars.size();) {
      if (is_space(chars[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < chars.size() && !is_space(chars[j])) ++j;
      std::size_t count = 0;
      while (ti < tokens.size() && tokens[ti].first < j) {
        ++count;
        ++ti;
      }
      words.push_back({i, j, count});
      i = j;
    }
    std::size_t w = 0;
    while (w < words.size()) {
      if (words[w].count > limit) {
        throw Error(ErrorCode::SequenceTooLong, "a single word exceeds the model's sequence limit");
      }
      std::size_t count = 0;
      std::size_t last = w;
      while (last < words.size() && count + words[last].count <= limit) count += words[last++].count;
      const auto b = words[w].begin;
      const auto e = words[last - 1].end;
      requests.push_back({u32_to_utf8(std::u32string_view(chars).substr(b, e - b)), s.offset + b, e - b});
      origin.push_back({si, b});
      w = last;
    }
  }

  auto raw = endpoint.predict_batch(requests);
  if (raw.size() != requests.size()) {
    throw Error(ErrorCode::MalformedResponse, "endpoint returned a different number of sentences than requested");
  }
  std::vector<SentencePredictions> out(sentences.size());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (auto& p : raw[r]) {
      if (p.tag == TokenTag::Pad) continue;
      p.char_start += origin[r].rel_start;
      p.char_end += origin[r].rel_start;
      out[origin[r].sentence].push_back(std::move(p));
    }
  }
  return out;
}

std::vector<EntitySpan> reconstruct_spans(const Document& doc, const std::vector<Sentence>& sentences,
                                          const std::vector<SentencePredictions>& predictions) {
  if (predictions.size() != sentences.size()) {
    throw Error(ErrorCode::OffsetMismatch, "prediction list does not match sentence list");
  }
  const auto& text = doc.chars();
  std::vector<EntitySpan> out;

  for (std::size_t si = 0; si < sentences.size(); ++si) {
    const auto& s = sentences[si];
    struct Unit {
      std::size_t start, end;
      TokenTag tag;
    };
    std::vector<Unit> units;
    for (const auto& p : predictions[si]) {
      if (p.tag == TokenTag::Pad) continue;
      const auto start = s.offset + p.char_start;
      const auto end = s.offset + p.char_end;
      if (p.char_start >= p.char_end || p.char_end > s.length || end > text.size()) {
        throw Error(ErrorCode::OffsetMismatch, "token '" + p.token + "' lies outside its sentence");
      }
      const std::string piece = p.is_continuation() ? p.token.substr(2) : p.token;
      if (piece != "[UNK]" && fold_case_utf8(piece) != fold_case_utf8(doc.substr(start, end))) {
        throw Error(ErrorCode::OffsetMismatch, "token '" + p.token + "' does not match document text '" +
                                                   doc.substr(start, end) + "' at " + std::to_string(start));
      }
      if (p.is_continuation() && !units.empty()) {
        units.back().end = std::max(units.back().end, end);
      } else {
        units.push_back({start, end, p.tag});
      }
    }

    std::optional<Unit> current;
    auto flush = [&] {
      if (current) {
        out.push_back(make_span(doc, current->start, current->end, *tag_entity_type(current->tag), SpanSource::Model));
      }
      current.reset();
    };
    for (const auto& u : units) {
      if (!tag_entity_type(u.tag)) {
        flush();
        continue;
      }
      if (current && current->tag == u.tag && u.start >= current->end &&
          std::all_of(text.begin() + static_cast<std::ptrdiff_t>(current->end),
                      text.begin() + static_cast<std::ptrdiff_t>(u.start), is_space)) {
        current->end = u.end;
        continue;
      }
      flush();
      current = u;
    }
    flush();
  }
  sort_spans(out);
  return out;
}

std::vector<EntitySpan> recognize_with_model(const Document& doc, const ModelEndpoint& endpoint) {
  const auto sentences = split_sentences(doc);
  return reconstruct_spans(doc, sentences, predict(sentences, endpoint));
}

std::vector<std::pair<std::string, EntityType>> load_stub_table(std::string_view tsv) {
  std::vector<std::pair<std::string, EntityType>> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < tsv.size()) {
    auto nl = tsv.find('\n', pos);
    if (nl == std::string_view::npos) nl = tsv.size();
    auto line = tsv.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "stub table line " + std::to_string(line_no) + " lacks a tab");
    }
    auto etype = parse_entity_type(line.substr(tab + 1));
    if (!etype) {
      throw Error(ErrorCode::UnknownCategory, "stub table line " + std::to_string(line_no) + ": unknown type");
    }
    out.emplace_back(std::string(line.substr(0, tab)), *etype);
  }
  return out;
}

}  // namespace deid
