#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clot::model {

struct GradCheckResult {
  std::string component;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central finite differences (step 1e-4) against the tape gradients, per
// component and end to end, on a tiny model. `inject_error` perturbs every
// analytic gradient and exists so tests can prove a broken backward is
// caught. rel err = |fd - an| / max(|fd|, |an|, 1e-6).
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, double tol = 1e-3,
                                                 double step = 1e-4, double inject_error = 0.0);

}  // namespace clot::model
