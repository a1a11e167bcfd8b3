#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdgl {

enum class ErrorCode {
  Syntax,
  NearOperand,
  Io,
  Schema,
  NoLabels,
  Undefined,
  Degenerate,
  MissingSystem,
  OneClass,
  Params,
  SchemaMismatch,
  Version,
  Corrupt,
};

constexpr std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Syntax: return "E_SYNTAX";
    case ErrorCode::NearOperand: return "E_NEAR_OPERAND";
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Schema: return "E_SCHEMA";
    case ErrorCode::NoLabels: return "E_NO_LABELS";
    case ErrorCode::Undefined: return "E_UNDEFINED";
    case ErrorCode::Degenerate: return "E_DEGENERATE";
    case ErrorCode::MissingSystem: return "E_MISSING_SYSTEM";
    case ErrorCode::OneClass: return "E_ONE_CLASS";
    case ErrorCode::Params: return "E_PARAMS";
    case ErrorCode::SchemaMismatch: return "E_SCHEMA_MISMATCH";
    case ErrorCode::Version: return "E_VERSION";
    case ErrorCode::Corrupt: return "E_CORRUPT";
  }
  return "E_UNKNOWN";
}

/// Every failure raised by the library. `what()` is "E_CODE: message".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Query syntax error; `position` is a byte offset into the query text.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& message)
      : Error(ErrorCode::Syntax,
              "at offset " + std::to_string(position) + ": " + message),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace sdgl
