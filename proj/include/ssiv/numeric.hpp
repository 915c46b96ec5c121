#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ssiv {

/// Correctly rounded floating-point sum (Shewchuk partials). The result does
/// not depend on the order of the inputs.
class ExactSum {
 public:
  void add(double x);
  double value() const;

 private:
  std::vector<double> partials_;
};

double exact_sum(std::span<const double> values);

/// SplitMix64 finalizer; used to derive independent per-replication seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ssiv
