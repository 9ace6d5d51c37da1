#include "atl/diagnostics.hpp"

namespace atl {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::UnboundVariable: return "unbound variable";
    case Errc::UnboundIndexVariable: return "unbound index variable";
    case Errc::UnboundSizeVariable: return "unbound size variable";
    case Errc::TypeMismatch: return "type mismatch";
    case Errc::NonAffineIndex: return "non-affine index";
    case Errc::ArityMismatch: return "arity mismatch";
    case Errc::SyntaxError: return "syntax error";
    case Errc::DuplicateBinding: return "duplicate binding";
    case Errc::IndexOutOfBounds: return "index out of bounds";
    case Errc::UnknownBlackBox: return "unknown black-box function";
    case Errc::UnregisteredBlackBox: return "unregistered black-box function";
    case Errc::MissingRelationTable: return "missing relation table";
    case Errc::NotLetLifted: return "not let-lifted";
    case Errc::InputNotSoA: return "input not struct-of-arrays";
    case Errc::NotPairEliminated: return "not pair-eliminated";
    case Errc::NotNormalized: return "not normalized";
    case Errc::NonLinearSeed: return "non-linear seed";
    case Errc::NonScalarOutput: return "non-scalar output";
    case Errc::DimensionTooLarge: return "dimension too large";
    case Errc::ExactModeUnsupported: return "exact mode unsupported";
    case Errc::ArithmeticOverflow: return "arithmetic overflow";
    case Errc::InvalidValue: return "invalid value";
    case Errc::Internal: return "internal error";
  }
  return "error";
}

}  // namespace atl
