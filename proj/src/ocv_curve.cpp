#include "sgdkf/ocv_curve.hpp"

#include <algorithm>
#include <cmath>

#include "sgdkf/error.hpp"

namespace sgdkf {

OcvCurve::OcvCurve(std::vector<double> breakpoints, std::vector<double> voltages)
    : breakpoints_(std::move(breakpoints)), voltages_(std::move(voltages)) {
  if (breakpoints_.size() != voltages_.size()) {
    throw Error(ErrorKind::InvalidParameter, "OCV curve: breakpoints and voltages differ in length");
  }
  if (breakpoints_.size() < 4) {
    throw Error(ErrorKind::InvalidParameter, "OCV curve: at least 4 breakpoints required");
  }
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const double x = breakpoints_[i];
    if (!std::isfinite(x) || x < 0.0 || x > 1.0 || !std::isfinite(voltages_[i])) {
      throw Error(ErrorKind::InvalidParameter, "OCV curve: breakpoints must lie in [0, 1] with finite voltages");
    }
    if (i > 0 && !(x > breakpoints_[i - 1])) {
      throw Error(ErrorKind::InvalidParameter, "OCV curve: breakpoints must be strictly increasing");
    }
  }
}

double OcvCurve::operator()(double stoichiometry) const {
  if (stoichiometry <= breakpoints_.front()) return voltages_.front();
  if (stoichiometry >= breakpoints_.back()) return voltages_.back();
  const auto upper = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), stoichiometry);
  const auto i = static_cast<std::size_t>(upper - breakpoints_.begin());
  const double x0 = breakpoints_[i - 1];
  const double x1 = breakpoints_[i];
  const double w = (stoichiometry - x0) / (x1 - x0);
  return voltages_[i - 1] + w * (voltages_[i] - voltages_[i - 1]);
}

}  // namespace sgdkf
