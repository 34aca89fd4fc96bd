#pragma once

#include <span>

#include "dempref/belief.hpp"

namespace dempref {

struct MetricResult {
  double m = 0.0;
  int excluded = 0;  // zero-norm samples left out of the average
};

// Expected cosine similarity between belief samples and w_true.
// Throws ZeroTrueVector if w_true is zero and EmptyBelief if no sample has a
// nonzero norm.
MetricResult convergence_metric(std::span<const Vector> samples, const Vector& w_true);

inline double metric_m(const Belief& belief, const Vector& w_true) {
  return convergence_metric(belief.samples, w_true).m;
}

}  // namespace dempref
