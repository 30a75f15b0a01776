#include "rankshrink/errors.hpp"

namespace rankshrink {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DuplicateEntry: return "DuplicateEntry";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyObservations: return "EmptyObservations";
    case ErrorKind::NoEligibleRows: return "NoEligibleRows";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorKind::UncoveredLevels: return "UncoveredLevels";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::InfeasibleMask: return "InfeasibleMask";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rankshrink
