#pragma once

#include <stdexcept>
#include <string>

namespace atl {

enum class Errc {
  UnboundVariable,
  UnboundIndexVariable,
  UnboundSizeVariable,
  TypeMismatch,
  NonAffineIndex,
  ArityMismatch,
  SyntaxError,
  DuplicateBinding,
  IndexOutOfBounds,
  UnknownBlackBox,
  UnregisteredBlackBox,
  MissingRelationTable,
  NotLetLifted,
  InputNotSoA,
  NotPairEliminated,
  NotNormalized,
  NonLinearSeed,
  NonScalarOutput,
  DimensionTooLarge,
  ExactModeUnsupported,
  ArithmeticOverflow,
  InvalidValue,
  Internal,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

// Positioned diagnostic for the frontend.
struct SourcePos {
  int line = 0;
  int col = 0;
};

class SyntaxError : public Error {
 public:
  SyntaxError(SourcePos pos, std::string msg)
      : Error(Errc::SyntaxError,
              std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + msg),
        pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

}  // namespace atl
