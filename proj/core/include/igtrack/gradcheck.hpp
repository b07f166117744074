#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace igtrack {

struct GradcheckConfig {
    std::uint64_t seed = 1;
    double tolerance = 1e-3;  // max relative error per group
    double step = 1e-3;       // central-difference step
    /// Gradient pairs whose magnitudes are both below this are not compared.
    double negligible = 1e-8;
    /// Coordinates per group; 0 checks every parameter.
    std::size_t max_per_group = 0;
};

struct GroupCheck {
    std::string group;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // finite differences that crossed a kink at every step size
    double max_rel_error = 0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GroupCheck> groups;
    double loss = 0;
    bool pass = false;
};

/// Compares analytic gradients of l_cls + l_reg + l_iou with central finite
/// differences on the reduced network in double precision. A difference whose
/// perturbed passes land on a different ReLU or selection branch is retried
/// at step/10 and step/100, then skipped.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

void write_gradcheck_report(std::ostream& os, const GradcheckReport& report);

}  // namespace igtrack
