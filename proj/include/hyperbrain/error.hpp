#pragma once

#include <stdexcept>
#include <string>

namespace hyperbrain {

// Usage errors map to exit code 1 in the CLI, everything else to 2.
enum class ErrorKind { Usage, Data };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::Data)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define HYPERBRAIN_ERROR(Name, Kind)                                       \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(#Name ": " + what, Kind) {} \
  };

HYPERBRAIN_ERROR(ParseError, ErrorKind::Data)
HYPERBRAIN_ERROR(DataError, ErrorKind::Data)
HYPERBRAIN_ERROR(ConfigError, ErrorKind::Usage)
HYPERBRAIN_ERROR(DegenerateSignal, ErrorKind::Data)
HYPERBRAIN_ERROR(IndexError, ErrorKind::Data)
HYPERBRAIN_ERROR(NoNeighbor, ErrorKind::Data)
HYPERBRAIN_ERROR(ContractError, ErrorKind::Data)
HYPERBRAIN_ERROR(ShapeError, ErrorKind::Data)
HYPERBRAIN_ERROR(NegativeExhausted, ErrorKind::Data)
HYPERBRAIN_ERROR(EvalError, ErrorKind::Data)

#undef HYPERBRAIN_ERROR

}  // namespace hyperbrain
