#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace jgs {

// Central finite-difference audit of the analytic gradients: a small scene is
// rendered through the full loss stack and every parameter class is probed at
// sampled coordinates. `worst` is the maximum relative error across classes.
struct GradCheckResult {
    std::map<std::string, double> max_rel_err;
    double worst = 0.0;
    bool passed(double tol = 1e-3) const { return worst < tol; }
};

GradCheckResult run_gradcheck(int image_size = 16, uint64_t seed = 7, int samples_per_group = 16,
                              std::ostream* out = nullptr);

}  // namespace jgs
