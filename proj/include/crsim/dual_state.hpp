#pragma once

#include <vector>

namespace crsim {

/// Lagrange multipliers of the relaxed problem.
///   eta, kappa : interference caps at the PUs (SU-TX side, relay side)
///   tau        : one relay subcarrier per SU subcarrier (column sums of q)
///   mu         : false-alarm caps
///   delta      : miss-detection caps
/// eta, kappa, mu, delta are kept >= 0; tau is an equality multiplier and is left free.
struct DualState {
  double eta = 0.0;
  double kappa = 0.0;
  std::vector<double> tau;
  std::vector<double> mu;
  std::vector<double> delta;
  int k = 1;
};

}  // namespace crsim
