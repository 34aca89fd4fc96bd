#include "dempref/metric.hpp"

#include <algorithm>

#include "dempref/errors.hpp"

namespace dempref {

MetricResult convergence_metric(std::span<const Vector> samples, const Vector& w_true) {
  const double true_norm = w_true.norm();
  if (!(true_norm > 0.0)) throw ZeroTrueVector("w_true has zero norm");
  if (samples.empty()) throw EmptyBelief("belief has no samples");
  MetricResult out;
  double total = 0.0;
  int used = 0;
  for (const Vector& w : samples) {
    if (w.size() != w_true.size()) throw DimensionMismatch("sample and w_true dimensions differ");
    const double n = w.norm();
    if (n == 0.0) {
      ++out.excluded;
      continue;
    }
    total += std::clamp(w.dot(w_true) / (n * true_norm), -1.0, 1.0);
    ++used;
  }
  if (used == 0) throw EmptyBelief("every belief sample has zero norm");
  out.m = total / used;
  return out;
}

}  // namespace dempref
