#include "deid/risk.hpp"

#include "deid/model.hpp"
#include "deid/unicode.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace deid {

std::string ContextWindow::text() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> whitespace_words(const std::u32string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

std::vector<ContextWindow> extract_contexts(const std::vector<MaskedDocument>& docs, int radius_words) {
  const auto radius = static_cast<std::size_t>(std::max(radius_words, 0));
  std::vector<ContextWindow> out;
  for (const auto& doc : docs) {
    const auto text = utf8_to_u32(doc.masked_text);
    const auto words = whitespace_words(text);
    for (std::size_t si = 0; si < doc.span_map.size(); ++si) {
      const auto& ms = doc.span_map[si];
      if (ms.action != MaskAction::Replace) continue;
      ContextWindow w{doc.doc_id, si, {}};
      std::vector<std::string> left;
      for (auto it = words.rbegin(); it != words.rend() && left.size() < radius; ++it) {
        if (it->second <= ms.masked_start) left.push_back(u32_to_utf8(std::u32string_view(text).substr(it->first, it->second - it->first)));
      }
      w.words.assign(left.rbegin(), left.rend());
      std::size_t right = 0;
      for (const auto& [b, e] : words) {
        if (right == radius) break;
        if (b >= ms.masked_end) {
          w.words.push_back(u32_to_utf8(std::u32string_view(text).substr(b, e - b)));
          ++right;
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void normalize(Embedding& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    v.clear();
    return;
  }
  for (double& x : v) x /= norm;
}

}  // namespace

Embedding HashingEmbedder::embed_one(const ContextWindow& window) const {
  Embedding v(kDimension, 0.0);
  bool any = false;
  for (const auto& word : window.words) {
    auto folded = fold_case(utf8_to_u32(word));
    std::size_t b = 0, e = folded.size();
    while (b < e && !is_word_char(folded[b])) ++b;
    while (e > b && !is_word_char(folded[e - 1])) --e;
    if (b == e) continue;
    v[fnv1a(u32_to_utf8(folded.substr(b, e - b))) % kDimension] += 1.0;
    any = true;
  }
  if (!any) return {};
  normalize(v);
  return v;
}

std::vector<Embedding> HashingEmbedder::embed(const std::vector<ContextWindow>& windows) const {
  std::vector<Embedding> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(embed_one(w));
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::vector<Embedding> RemoteEmbedder::embed(const std::vector<ContextWindow>& windows) const {
  std::vector<Embedding> out(windows.size());
  nlohmann::json texts = nlohmann::json::array();
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].empty()) continue;
    texts.push_back(windows[i].text());
    index.push_back(i);
  }
  if (index.empty()) return out;

  const auto scheme = base_url_.find("://");
  const auto slash = base_url_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const auto host = slash == std::string::npos ? base_url_ : base_url_.substr(0, slash);
  auto prefix = slash == std::string::npos ? std::string() : base_url_.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(host);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  httplib::Headers headers{{kProtocolHeader, kProtocolVersion}};
  auto res = client.Post(prefix + "/embed", headers, nlohmann::json{{"texts", texts}}.dump(), "application/json");
  if (!res) throw Error(ErrorCode::EndpointUnreachable, "embedding endpoint " + base_url_ + " unreachable");
  if (res->status != 200) {
    throw Error(ErrorCode::MalformedResponse, "embedding endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& vectors = j.at("vectors");
    if (!vectors.is_array() || vectors.size() != index.size()) {
      throw Error(ErrorCode::MalformedResponse, "embedding response has the wrong number of vectors");
    }
    std::size_t dim = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
      auto v = vectors[k].get<Embedding>();
      if (k == 0) dim = v.size();
      if (v.empty() || v.size() != dim) throw Error(ErrorCode::MalformedResponse, "inconsistent embedding size");
      normalize(v);
      out[index[k]] = std::move(v);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("malformed embedding response: ") + e.what());
  }
  return out;
}

double cosine(const Embedding& u, const Embedding& v) {
  if (u.empty() || v.empty()) throw Error(ErrorCode::ZeroVector, "cosine of a zero-context window");
  if (u.size() != v.size()) throw Error(ErrorCode::InvalidArgument, "cosine of vectors with different sizes");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  // Inputs are normalized; the division only absorbs rounding.
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

std::string_view band_label(RiskBand b) {
  switch (b) {
    case RiskBand::Green: return "green";
    case RiskBand::Yellow: return "yellow";
    case RiskBand::Red: return "red";
  }
  return "green";
}

RiskBand band_for(std::size_t unique_count, std::size_t total_count) {
  if (total_count == 0 || unique_count * 100 < 25 * total_count) return RiskBand::Green;
  if (unique_count * 100 <= 50 * total_count) return RiskBand::Yellow;
  return RiskBand::Red;
}

RiskReport assess(const std::vector<std::string>& doc_ids, const std::vector<ContextWindow>& windows,
                  const std::vector<Embedding>& vectors, double threshold, CountingMode mode) {
  if (vectors.size() != windows.size()) {
    throw Error(ErrorCode::InvalidArgument, "one embedding per window is required");
  }
  RiskReport report;
  report.threshold = threshold;
  report.mode = mode;

  std::map<std::string, std::size_t> unique;
  for (const auto& id : doc_ids) unique[id] = 0;
  for (const auto& w : windows) unique.emplace(w.doc_id, 0);

  std::map<std::string, std::size_t> per_doc;
  for (const auto& w : windows) ++per_doc[w.doc_id];
  report.single_document = per_doc.size() < 2 && !windows.empty();

  // Sentinel pairs score 0 by convention.
  auto similarity = [&](std::size_t a, std::size_t b) {
    if (vectors[a].empty() || vectors[b].empty()) return 0.0;
    return cosine(vectors[a], vectors[b]);
  };

  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (mode == CountingMode::Windows) {
      report.total_count += 1;
      bool is_unique = true;
      if (!vectors[i].empty()) {
        for (std::size_t j = 0; j < windows.size() && is_unique; ++j) {
          if (windows[j].doc_id != windows[i].doc_id && similarity(i, j) >= threshold) is_unique = false;
        }
      }
      if (is_unique) ++unique[windows[i].doc_id];
    } else {
      std::size_t others = 0;
      for (std::size_t j = 0; j < windows.size(); ++j) {
        if (windows[j].doc_id == windows[i].doc_id) continue;
        ++others;
        if (vectors[i].empty() || similarity(i, j) < threshold) ++unique[windows[i].doc_id];
      }
      report.total_count += others;
    }
  }

  for (const auto& [id, count] : unique) {
    DocumentRisk d;
    d.id = id;
    d.unique_count = count;
    d.risk_percent = report.total_count > 0 ? 100.0 * static_cast<double>(count) / static_cast<double>(report.total_count) : 0.0;
    d.band = band_for(count, report.total_count);
    report.documents.push_back(std::move(d));
  }
  return report;
}

RiskReport assess_batch(const std::vector<MaskedDocument>& docs, const Embedder& embedder, double threshold,
                        int radius_words, CountingMode mode) {
  std::vector<std::string> ids;
  for (const auto& d : docs) ids.push_back(d.doc_id);
  const auto windows = extract_contexts(docs, radius_words);
  return assess(ids, windows, embedder.embed(windows), threshold, mode);
}

nlohmann::json risk_to_json(const RiskReport& report) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : report.documents) {
    docs.push_back({{"id", d.id}, {"unique_count", d.unique_count}, {"risk_percent", d.risk_percent},
                    {"band", band_label(d.band)}});
  }
  nlohmann::json j{{"documents", docs}, {"total_count", report.total_count}, {"threshold", report.threshold}};
  if (report.mode == CountingMode::Pairs) j["counting"] = "pairs";
  if (report.single_document) j["warning"] = "single document batch: no cross-document comparison possible";
  return j;
}

}  // namespace deid
