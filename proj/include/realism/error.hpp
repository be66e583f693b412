#pragma once

#include <stdexcept>
#include <string>

namespace realism {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define REALISM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

REALISM_DEFINE_ERROR(ParseError)
REALISM_DEFINE_ERROR(ValidationError)
REALISM_DEFINE_ERROR(InvalidArgument)
REALISM_DEFINE_ERROR(ShapeMismatch)
REALISM_DEFINE_ERROR(DimensionMismatch)
REALISM_DEFINE_ERROR(DegenerateData)
REALISM_DEFINE_ERROR(DataError)
REALISM_DEFINE_ERROR(EmptyBatch)
REALISM_DEFINE_ERROR(EmptyInput)
REALISM_DEFINE_ERROR(BackendUnavailable)
REALISM_DEFINE_ERROR(ZeroSignal)
REALISM_DEFINE_ERROR(DegenerateReconstruction)
REALISM_DEFINE_ERROR(IoError)

#undef REALISM_DEFINE_ERROR

/// ShapeError is the name used by the network code for misaligned tensors.
using ShapeError = ShapeMismatch;

/// Wraps an error with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("StageError", "[" + stage + "] " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace realism
