#pragma once

#include <stdexcept>
#include <string>

namespace vqaadv {

/// Base of every error the harness throws on purpose.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the file and the byte offset when known.
class ParseError : public Error {
  public:
    ParseError(std::string file, std::size_t offset, const std::string &what)
        : Error(file + ":" + std::to_string(offset) + ": " + what), file_(std::move(file)),
          offset_(offset) {}

    const std::string &file() const { return file_; }
    std::size_t offset() const { return offset_; }

  private:
    std::string file_;
    std::size_t offset_;
};

/// A request or response that does not conform to its endpoint schema.
class SchemaError : public Error {
  public:
    SchemaError(std::string endpoint, std::string field, const std::string &what)
        : Error("schema violation on " + endpoint + " field '" + field + "': " + what),
          endpoint_(std::move(endpoint)), field_(std::move(field)) {}

    const std::string &endpoint() const { return endpoint_; }
    const std::string &field() const { return field_; }

  private:
    std::string endpoint_;
    std::string field_;
};

/// Retries exhausted or transport failure.
class BackendUnavailable : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

} // namespace vqaadv
