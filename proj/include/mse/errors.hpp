#pragma once

#include <stdexcept>
#include <string>

namespace mse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mean height or mean of a density is not zero.
struct NeutralityError : Error {
  using Error::Error;
};

// Slope exceeded the configured Lipschitz margin.
struct GraphRegimeError : Error {
  using Error::Error;
};

struct FlatnessError : Error {
  using Error::Error;
};

struct AssemblyError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct TraceError : Error {
  using Error::Error;
};

struct StepError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(std::string field_name, const std::string& what)
      : Error(field_name + ": " + what), field(std::move(field_name)) {}
  std::string field;
};

}  // namespace mse
