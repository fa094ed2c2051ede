#pragma once

#include <stdexcept>
#include <string>

namespace msfda {

/// Base class for every error raised by the library. `module()` names the
/// subsystem that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("numerics", what) {}
};

class ValidationError : public Error {
 public:
  ValidationError(std::string module, const std::string& what)
      : Error(std::move(module), what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::string module, const std::string& what)
      : Error(std::move(module), what) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("data", what) {}
};

}  // namespace msfda
