#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qrd/tensor.hpp"

namespace qrd {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int coords_checked = 0;
    std::string worst_coord;  // "param_idx[flat]"
};

struct GradCheckOptions {
    double eps = 1e-5;
    int max_coords_per_param = 0;  // 0 = all coordinates
    std::uint64_t sample_seed = 0; // used when subsampling coordinates
};

// Central finite differences against reverse-mode gradients. The builder must
// rebuild the scalar objective from the current parameter values on every call
// (fixed noise inputs are the caller's responsibility).
GradCheckReport gradient_check(const std::function<Tensor()>& build,
                               const std::vector<Tensor>& params,
                               const GradCheckOptions& opts = {});

}  // namespace qrd
