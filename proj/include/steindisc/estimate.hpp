#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace steindisc {

/// Why an estimate was discarded (not eligible).
enum class NeReason {
  None,
  NegativeParameter,
  OutOfDomain,
  SingularSystem,
  OptimizerFailure,
  RuntimeExceeded,
  OutlierTruncated,
};

std::string_view ne_reason_name(NeReason reason) noexcept;

/// Parameter estimate, or a non-eligible outcome with its reason.
struct EstimateResult {
  std::optional<std::vector<double>> value;
  NeReason ne_reason = NeReason::None;
  std::string detail;

  static EstimateResult ok(std::vector<double> theta) { return {std::move(theta), NeReason::None, {}}; }
  static EstimateResult non_eligible(NeReason reason, std::string detail = {}) {
    return {std::nullopt, reason, std::move(detail)};
  }

  bool eligible() const noexcept { return value.has_value(); }
};

}  // namespace steindisc
