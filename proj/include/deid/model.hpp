/**
 * @file model.hpp
 * @brief Client side of the token-classification model.
 *
 * The model sees one sentence at a time and returns one prediction per
 * (sub)word token together with the token's character offsets inside the
 * sentence. Offsets are part of the wire contract, so the client never has to
 * re-align WordPiece output against the original text. Reconstruction fuses
 * "##" continuation pieces into their head token and then merges consecutive
 * same-tag tokens separated only by whitespace.
 */
#pragma once

#include "deid/core.hpp"
#include "deid/rules.hpp"

#include <json.hpp>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace deid {

enum class TokenTag { O, Id, Phi, Name, Contact, Date, Age, Profession, Location, Pad };

std::string_view tag_label(TokenTag t);
std::optional<TokenTag> parse_tag(std::string_view s);
std::optional<EntityType> tag_entity_type(TokenTag t);
TokenTag entity_tag(EntityType t);

struct TokenPrediction {
  std::string token;  // "##" marks a continuation piece
  std::size_t char_start = 0;  // sentence-relative, code points
  std::size_t char_end = 0;
  TokenTag tag = TokenTag::O;

  bool is_continuation() const { return token.rfind("##", 0) == 0; }
  friend bool operator==(const TokenPrediction&, const TokenPrediction&) = default;
};

struct Sentence {
  std::string text;         // UTF-8
  std::size_t offset = 0;   // document-absolute start, code points
  std::size_t length = 0;   // code points

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

using SentencePredictions = std::vector<TokenPrediction>;

/// Splits on line breaks and on [.!?] followed by whitespace and an
/// upper-case letter or digit, except after common honorifics. Sentences are
/// trimmed of surrounding whitespace; empty ones are dropped.
std::vector<Sentence> split_sentences(const Document& doc);

/// Word-level pre-tokenization shared by the stub and the chunker: maximal
/// runs of word characters, and single non-space punctuation characters.
std::vector<std::pair<std::size_t, std::size_t>> pretokenize(const std::u32string& text);

class ModelEndpoint {
public:
  virtual ~ModelEndpoint() = default;

  /// One prediction list per input sentence, offsets relative to that
  /// sentence. PAD predictions are never returned.
  virtual std::vector<SentencePredictions> predict_batch(const std::vector<Sentence>& sentences) const = 0;

  /// Maximum number of pre-tokens per request sentence.
  virtual std::size_t max_sequence_length() const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic table-lookup model: surfaces from a (surface -> type) table
/// at token boundaries, plus the AGE/DATE patterns of a RuleSet. Words of
/// seven or more characters are emitted as WordPiece-style pieces
/// ("Beverly" -> "Be", "##ve", "##rly").
class StubModel final : public ModelEndpoint {
public:
  StubModel(std::vector<std::pair<std::string, EntityType>> table, RuleSet rules, std::size_t max_len = 128);

  std::vector<SentencePredictions> predict_batch(const std::vector<Sentence>& sentences) const override;
  std::size_t max_sequence_length() const override { return max_len_; }
  std::string name() const override { return "stub"; }

  const std::vector<std::pair<std::string, EntityType>>& table() const { return table_; }

private:
  SentencePredictions predict_one(const Sentence& s) const;

  std::vector<std::pair<std::string, EntityType>> table_;
  std::vector<std::pair<std::u32string, EntityType>> folded_;  // longest first
  RuleSet rules_;
  std::size_t max_len_;
};

struct RemoteModelOptions {
  std::string base_url;  // e.g. http://127.0.0.1:8000
  RemoteModelName model = RemoteModelName::ClinicalBert;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 32;
  std::size_t max_len = 128;
};

inline constexpr const char* kProtocolHeader = "X-Deid-Protocol";
inline constexpr const char* kProtocolVersion = "1";

/// JSON-over-HTTP client: POST {base}/predict with
/// {"model":..., "sequence":n, "sentences":[{"text","offset"}]} and expects
/// {"predictions":[[{"token","start","end","tag"}]]}.
class RemoteModel final : public ModelEndpoint {
public:
  explicit RemoteModel(RemoteModelOptions options);

  std::vector<SentencePredictions> predict_batch(const std::vector<Sentence>& sentences) const override;
  std::size_t max_sequence_length() const override { return options_.max_len; }
  std::string name() const override;

private:
  std::vector<SentencePredictions> request(const std::vector<Sentence>& batch, std::size_t sequence) const;

  RemoteModelOptions options_;
};

nlohmann::json predict_request_json(const std::vector<Sentence>& sentences);
/// Throws Error{MalformedResponse}. PAD predictions are dropped; offsets are
/// checked against each sentence.
std::vector<SentencePredictions> parse_predict_response(const nlohmann::json& j,
                                                        const std::vector<Sentence>& sentences);
nlohmann::json predictions_to_json(const std::vector<SentencePredictions>& predictions);

struct PredictOptions {
  bool chunking = true;
};

/// Runs the endpoint, chunking sentences longer than its maximum at
/// whitespace. Predictions come back relative to the original sentences.
/// Throws Error{SequenceTooLong} when chunking is disabled (or a single word
/// exceeds the limit), and propagates endpoint errors.
std::vector<SentencePredictions> predict(const std::vector<Sentence>& sentences, const ModelEndpoint& endpoint,
                                         const PredictOptions& options = {});

/// Fuses subword pieces, merges whitespace-separated runs of the same tag and
/// maps them to document offsets. Throws Error{OffsetMismatch}.
std::vector<EntitySpan> reconstruct_spans(const Document& doc, const std::vector<Sentence>& sentences,
                                          const std::vector<SentencePredictions>& predictions);

/// split_sentences + predict + reconstruct_spans.
std::vector<EntitySpan> recognize_with_model(const Document& doc, const ModelEndpoint& endpoint);

std::vector<std::pair<std::string, EntityType>> load_stub_table(std::string_view tsv);

}  // namespace deid
