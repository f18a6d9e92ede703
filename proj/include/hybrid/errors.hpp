#pragma once

#include <stdexcept>
#include <string>

namespace hybrid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class AlphabetError : public Error { using Error::Error; };
class CompositionError : public Error { using Error::Error; };
class MaskError : public Error { using Error::Error; };
class ConstructionError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class LowConfidenceError : public DecodeError { using DecodeError::DecodeError; };
class SpecError : public Error { using Error::Error; };
class UndefinedInputError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };

}  // namespace hybrid
