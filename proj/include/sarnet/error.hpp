#pragma once

#include <stdexcept>
#include <string>

namespace sarnet {

// Every library failure carries a stable category string so the CLI can
// report machine-readable errors ("dimension", "schema", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string category, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what),
        category_(std::move(category)),
        module_(std::move(module)) {}

  const std::string& category() const noexcept { return category_; }
  const std::string& module() const noexcept { return module_; }

 private:
  std::string category_;
  std::string module_;
};

struct DimensionError : Error {
  DimensionError(const std::string& module, const std::string& what)
      : Error("dimension", module, what) {}
};

struct DegenerateError : Error {
  DegenerateError(const std::string& module, const std::string& what)
      : Error("degenerate", module, what) {}
};

struct ParameterError : Error {
  ParameterError(const std::string& module, const std::string& what)
      : Error("parameter", module, what) {}
};

struct SchemaError : Error {
  SchemaError(const std::string& module, const std::string& what)
      : Error("schema", module, what) {}
};

struct IoError : Error {
  IoError(const std::string& module, const std::string& what)
      : Error("io", module, what) {}
};

// A finite-difference probe produced a non-finite value.
struct ProbeError : Error {
  ProbeError(const std::string& module, const std::string& what)
      : Error("probe", module, what) {}
};

// A gradient-check fixture is unusable (ReLU kink or saturation); the caller
// should reseed.
struct FixtureRejected : Error {
  FixtureRejected(const std::string& module, const std::string& what)
      : Error("fixture", module, what) {}
};

}  // namespace sarnet
