/**
 * @file pipeline.hpp
 * @brief recognize -> merge -> mask -> risk, shared by the CLI and the service.
 */
#pragma once

#include "deid/core.hpp"
#include "deid/dictionary.hpp"
#include "deid/ingestion.hpp"
#include "deid/masking.hpp"
#include "deid/merger.hpp"
#include "deid/model.hpp"
#include "deid/risk.hpp"
#include "deid/rules.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace deid {

/// Bundled word lists and the stub model table.
struct Resources {
  std::vector<Lexicon> lexicons;  // NAME, LOCATION, PROFESSION recognition lists
  SurrogateSources surrogates;
  std::vector<std::pair<std::string, EntityType>> stub_table;

  /// Layout: lexicons/{names.csv,locations.txt,professions.txt},
  /// surrogates/{surnames,full_names,locations,professions}.txt, stub_model.tsv
  static Resources load(const std::filesystem::path& data_dir);
};

/// $DEID_DATA_DIR, else the directory configured at build time.
std::filesystem::path default_data_dir();

struct PipelineOptions {
  /// Month-name fragmenting rules and duplicate-only merging.
  bool compat = false;
  ReplacementScope scope = ReplacementScope::PerBatch;
  CountingMode counting = CountingMode::Windows;
  unsigned jobs = 1;
  /// Used when the settings name a remote model without a URL; falls back to
  /// $DEID_MODEL_URL.
  std::string model_url;
  /// Contextual embedder for risk; empty selects the hashing embedder.
  std::string embed_url;

  RuleSet rules() const;
  MergePolicy merge_policy() const;
};

/// Recognizers configured for one settings value. Read-only after
/// construction and safe to share between threads.
class Recognizer {
public:
  /// `manual` entries are recognized with source Manual (user-marked text).
  Recognizer(const Resources& resources, const DeidSettings& settings, const PipelineOptions& options,
             const std::map<EntityType, std::vector<std::string>>& manual = {});

  struct Parts {
    std::vector<EntitySpan> dictionary;
    std::vector<EntitySpan> rules;
    std::vector<EntitySpan> model;
    std::vector<EntitySpan> manual;
  };
  Parts recognize_parts(const Document& doc) const;
  std::vector<EntitySpan> recognize(const Document& doc) const;

private:
  std::vector<CompiledLexicon> dictionary_;
  std::vector<CompiledLexicon> manual_;
  RuleSet rules_;
  MergePolicy policy_;
  std::unique_ptr<ModelEndpoint> model_;
};

/// Parses an uploaded letter by extension (.xml or text); id is the stem.
Document parse_letter(const std::string& file_name, std::string_view bytes);

struct FileError {
  std::string file_name;
  std::string message;
};

/// Reads every .txt/.xml file of a directory (sorted by name). Unparseable
/// files become FileErrors.
std::vector<Document> load_letters(const std::filesystem::path& dir, std::vector<FileError>& errors);

struct DocumentResult {
  Document document;
  /// After merge and post-merge edits. In compat mode these may overlap;
  /// masking then uses the longest-then-priority resolution of them.
  std::vector<EntitySpan> spans;
  MaskedDocument masked;
};

struct BatchResult {
  std::vector<DocumentResult> documents;  // sorted by id
  std::vector<FileError> errors;
  std::optional<RiskReport> risk;  // only when some type is replaced
};

/// Post-merge hook applied per document (suppression directives).
using SpanEdit = std::function<std::vector<EntitySpan>(const Document&, std::vector<EntitySpan>)>;

/// Runs the full pipeline. Documents are recognized in parallel (`jobs`);
/// replacement is assigned sequentially in id order so the output does not
/// depend on the job count. Duplicate ids become FileErrors.
BatchResult run_batch(std::vector<Document> docs, const DeidSettings& settings, const Resources& resources,
                      const PipelineOptions& options, const std::map<EntityType, std::vector<std::string>>& manual = {},
                      const SpanEdit& edit = {});

/// Sidecar JSON written next to each masked letter.
nlohmann::json document_result_json(const DocumentResult& r);

}  // namespace deid
