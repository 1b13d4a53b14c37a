// Error types shared by every pico module.
#pragma once

#include <stdexcept>
#include <string>

namespace pico {

enum class ErrorKind {
  kDimension,
  kEmptyInput,
  kState,
  kParse,
  kConfig,
  kFormat,
  kNumeric,
  kValidation,
  kDeterminism,
  kCompatibility,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PICO_DEFINE_ERROR(Name, Kind)                   \
  class Name : public Error {                           \
   public:                                              \
    explicit Name(const std::string& what)              \
        : Error(ErrorKind::Kind, what) {}               \
  };

PICO_DEFINE_ERROR(DimensionError, kDimension)
PICO_DEFINE_ERROR(EmptyInputError, kEmptyInput)
PICO_DEFINE_ERROR(StateError, kState)
PICO_DEFINE_ERROR(ParseError, kParse)
PICO_DEFINE_ERROR(ConfigError, kConfig)
PICO_DEFINE_ERROR(FormatError, kFormat)
PICO_DEFINE_ERROR(NumericError, kNumeric)
PICO_DEFINE_ERROR(ValidationError, kValidation)
PICO_DEFINE_ERROR(DeterminismError, kDeterminism)
PICO_DEFINE_ERROR(CompatibilityError, kCompatibility)
PICO_DEFINE_ERROR(IoError, kIo)

#undef PICO_DEFINE_ERROR

// Process exit code for an error: 1 usage/config, 2 data, 3 numeric/internal.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 1;
    case ErrorKind::kParse:
    case ErrorKind::kFormat:
    case ErrorKind::kValidation:
    case ErrorKind::kCompatibility:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kIo:
      return 2;
    default:
      return 3;
  }
}

}  // namespace pico
