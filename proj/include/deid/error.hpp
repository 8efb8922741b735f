#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deid {

enum class ErrorCode {
  InvalidUtf8,
  OutOfBounds,
  SurfaceMismatch,
  XmlMalformed,
  MissingTextElement,
  MultipleTextElements,
  UnknownCategory,
  SpanMismatch,
  EmptyLexicon,
  EndpointUnreachable,
  MalformedResponse,
  SequenceTooLong,
  OffsetMismatch,
  CrossDocumentSpans,
  OverlappingSpans,
  MissingSurrogateSource,
  ZeroVector,
  InvalidSettings,
  InvalidArgument,
  Io,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the CLI and the HTTP layer can map it to an exit code or a status.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace deid
