#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ife/error.hpp"
#include "ife/estimator.hpp"
#include "ife/inference.hpp"
#include "ife/panel.hpp"
#include "ife/selection.hpp"
#include "ife/simulation.hpp"

namespace ife {

std::string_view version_string() noexcept;

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

/// Embedded in every report.
struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  /// Resolved settings, echoed verbatim; the hash is taken over their
  /// canonical "key=value\n" rendering.
  std::map<std::string, std::string> settings;

  std::string config_hash() const;
};

struct EstimateEntry {
  Index r = 0;
  FactorFit fit;
  std::optional<InferenceReport> inference;
  /// Set when inference failed for this R.
  std::string inference_error;
};

std::string estimate_report_json(const Provenance& prov, const PanelDataset& data,
                                 const std::vector<EstimateEntry>& entries);

std::string selection_report_json(const Provenance& prov, const SelectionReport& report);

std::string mc_report_json(const Provenance& prov, const McResult& result);

/// Long table: one row per (statistic, coefficient), one column per R.
/// Statistics: bias, sd, rmse, bias_bc, sd_bc, size, sigma2_mean and the quantiles.
std::string mc_table_csv(const McResult& result);

/// {"error": {"code": ..., "category": "validation"|"numerical", "message": ...}}
std::string error_json(ErrorCode code, std::string_view message);

}  // namespace ife
