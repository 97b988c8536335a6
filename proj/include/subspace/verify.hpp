#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace subspace {

struct VerifyResult {
  std::string name;
  double residual = 0.0;  // worst case over all instances
  double tolerance = 0.0;
  bool pass = false;
};

/// Algebraic identity checks on random instances: the A·G·B ↔ A*·B⋄ rewrite,
/// the semi-orthogonal factor construction, the row/column scaling
/// identities, and fresh-state and expansion identities of the combination
/// tuners.
std::vector<VerifyResult> run_verify(std::uint64_t seed = 0, int instances = 100);

}  // namespace subspace
