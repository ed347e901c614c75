#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blindbench {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// dataset

class SchemaError : public Error {
 public:
  explicit SchemaError(std::string column)
      : Error("missing column '" + column + "'"), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class RowError : public Error {
 public:
  RowError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  /// 1-based data row (the header is row 0).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

// transform

class DegenerateRangeError : public Error {
 public:
  using Error::Error;
};

class TokenizeError : public Error {
 public:
  TokenizeError(std::size_t position, const std::string& what)
      : Error("position " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class AlphabetExhaustedError : public Error {
 public:
  using Error::Error;
};

class CipherMissError : public Error {
 public:
  explicit CipherMissError(std::string token)
      : Error("no cipher entry for '" + token + "'"), token_(std::move(token)) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

// promptgen

class TemplateError : public Error {
 public:
  using Error::Error;
};

class TemplateMissingError : public TemplateError {
 public:
  using TemplateError::TemplateError;
};

class VocabularyLeakError : public Error {
 public:
  VocabularyLeakError(std::string term, std::string part)
      : Error("forbidden term '" + term + "' in " + part),
        term_(std::move(term)),
        part_(std::move(part)) {}
  const std::string& term() const noexcept { return term_; }
  const std::string& part() const noexcept { return part_; }

 private:
  std::string term_;
  std::string part_;
};

class LeakageError : public Error {
 public:
  using Error::Error;
};

// llmclient

class CredentialError : public Error {
 public:
  using Error::Error;
};

class TransientExhaustedError : public Error {
 public:
  TransientExhaustedError(int last_status, const std::string& what)
      : Error(what), last_status_(last_status) {}
  /// 0 when the last attempt failed at the transport level.
  int last_status() const noexcept { return last_status_; }

 private:
  int last_status_;
};

class RefusalError : public Error {
 public:
  explicit RefusalError(std::string body)
      : Error("provider refused the request"), body_(std::move(body)) {}
  const std::string& body() const noexcept { return body_; }

 private:
  std::string body_;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& what)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// parse

class ParseFailure : public Error {
 public:
  using Error::Error;
};

// metrics

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// runner / report

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace blindbench
