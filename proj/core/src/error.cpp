#include "ife/error.hpp"

namespace ife {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::RankArgumentOutOfRange: return "RankArgumentOutOfRange";
    case ErrorCode::BandwidthOutOfRange: return "BandwidthOutOfRange";
    case ErrorCode::RMaxTooLarge: return "RMaxTooLarge";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NoConvergedStart: return "NoConvergedStart";
    case ErrorCode::DegreesOfFreedomExhausted: return "DegreesOfFreedomExhausted";
    case ErrorCode::NearSingularW: return "NearSingularW";
    case ErrorCode::SingularFactorGram: return "SingularFactorGram";
    case ErrorCode::RankDeficientStructure: return "RankDeficientStructure";
    case ErrorCode::LapackFailure: return "LapackFailure";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSpec:
    case ErrorCode::MissingColumn:
    case ErrorCode::UnbalancedPanel:
    case ErrorCode::NonNumericCell:
    case ErrorCode::DuplicateCell:
    case ErrorCode::RankArgumentOutOfRange:
    case ErrorCode::BandwidthOutOfRange:
    case ErrorCode::RMaxTooLarge:
    case ErrorCode::UnsupportedOrder:
    case ErrorCode::Io:
      return true;
    default:
      return false;
  }
}

}  // namespace ife
