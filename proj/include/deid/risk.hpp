/**
 * @file risk.hpp
 * @brief Re-identification risk from the context of replaced entities.
 *
 * Every replaced span contributes one window: up to `radius` whitespace words
 * on each side in the masked text. A window is unique when no window of
 * another document is at least `threshold` similar to it. A document's risk
 * is its unique windows as a percentage of all windows in the batch.
 */
#pragma once

#include "deid/core.hpp"

#include <json.hpp>

#include <chrono>
#include <string>
#include <vector>

namespace deid {

struct ContextWindow {
  std::string doc_id;
  std::size_t span_index = 0;  // index into the document's span_map
  std::vector<std::string> words;

  bool empty() const noexcept { return words.empty(); }
  std::string text() const;
};

/// Whitespace-delimited words of `text` as code point intervals.
std::vector<std::pair<std::size_t, std::size_t>> whitespace_words(const std::u32string& text);

std::vector<ContextWindow> extract_contexts(const std::vector<MaskedDocument>& docs, int radius_words = 5);

/// An empty vector is the zero-context sentinel.
using Embedding = std::vector<double>;

class Embedder {
public:
  virtual ~Embedder() = default;
  virtual std::vector<Embedding> embed(const std::vector<ContextWindow>& windows) const = 0;
};

/// Bag of FNV-1a token hashes in 256 buckets, L2-normalized. Tokens are
/// case-folded with leading and trailing punctuation removed.
class HashingEmbedder final : public Embedder {
public:
  static constexpr std::size_t kDimension = 256;
  std::vector<Embedding> embed(const std::vector<ContextWindow>& windows) const override;
  Embedding embed_one(const ContextWindow& window) const;
};

/// POST {base}/embed {"texts":[...]} -> {"vectors":[[...]]}.
class RemoteEmbedder final : public Embedder {
public:
  RemoteEmbedder(std::string base_url, std::chrono::milliseconds timeout);
  std::vector<Embedding> embed(const std::vector<ContextWindow>& windows) const override;

private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Dot product of two normalized vectors. Throws Error{ZeroVector} for a
/// sentinel or zero-norm input.
double cosine(const Embedding& u, const Embedding& v);

enum class RiskBand { Green, Yellow, Red };
std::string_view band_label(RiskBand b);

/// Green below 25 %, Yellow from 25 % to 50 % inclusive, Red above.
/// Compared on the integer counts so the boundaries are exact.
RiskBand band_for(std::size_t unique_count, std::size_t total_count);

enum class CountingMode { Windows, Pairs };

struct DocumentRisk {
  std::string id;
  std::size_t unique_count = 0;
  double risk_percent = 0.0;
  RiskBand band = RiskBand::Green;
};

struct RiskReport {
  std::vector<DocumentRisk> documents;  // sorted by id
  std::size_t total_count = 0;
  double threshold = 0.5;
  CountingMode mode = CountingMode::Windows;
  /// Fewer than two documents contributed windows, so nothing could be
  /// compared and every window counts as unique.
  bool single_document = false;
};

/// `doc_ids` lists every document of the batch, including those without
/// windows. `vectors[i]` belongs to `windows[i]`.
RiskReport assess(const std::vector<std::string>& doc_ids, const std::vector<ContextWindow>& windows,
                  const std::vector<Embedding>& vectors, double threshold,
                  CountingMode mode = CountingMode::Windows);

/// extract_contexts + embed + assess.
RiskReport assess_batch(const std::vector<MaskedDocument>& docs, const Embedder& embedder, double threshold,
                        int radius_words = 5, CountingMode mode = CountingMode::Windows);

nlohmann::json risk_to_json(const RiskReport& report);

}  // namespace deid
