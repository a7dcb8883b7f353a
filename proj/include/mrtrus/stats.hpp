#pragma once

#include <span>
#include <vector>

namespace mrtrus {

/// Population statistics (std divides by N).
struct SummaryStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;
};

SummaryStats summarize(std::span<const double> values);

struct ResidualStats : SummaryStats {
  std::vector<double> per_point;
};

ResidualStats residual_summary(std::vector<double> per_point);

}  // namespace mrtrus
