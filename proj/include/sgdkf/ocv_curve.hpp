#pragma once

#include <vector>

namespace sgdkf {

/// Piecewise-linear open-circuit potential over stoichiometry, flat outside
/// the first and last breakpoint.
class OcvCurve {
 public:
  OcvCurve() = default;
  OcvCurve(std::vector<double> breakpoints, std::vector<double> voltages);

  double operator()(double stoichiometry) const;

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& voltages() const { return voltages_; }

  friend bool operator==(const OcvCurve&, const OcvCurve&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> voltages_;
};

}  // namespace sgdkf
