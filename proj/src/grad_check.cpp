#include "qrd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qrd {

GradCheckReport gradient_check(const std::function<Tensor()>& build,
                               const std::vector<Tensor>& params,
                               const GradCheckOptions& opts) {
    if (opts.eps < 1e-6 || opts.eps > 1e-3)
        throw std::invalid_argument("gradient_check: eps outside [1e-6, 1e-3]");

    for (auto& p : params) {
        if (!p.requires_grad()) throw std::invalid_argument("gradient_check: param without grad");
        const_cast<Tensor&>(p).zero_grad();
    }
    Tensor loss = build();
    if (!std::isfinite(loss.value()))
        throw std::runtime_error("gradient_check: objective is not finite at the base point");
    backward(loss);

    std::vector<Array> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    std::mt19937_64 rng(opts.sample_seed);
    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        std::vector<Eigen::Index> coords(p.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords_per_param > 0 &&
            static_cast<int>(coords.size()) > opts.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords_per_param);
        }
        for (Eigen::Index ci : coords) {
            double orig = p.data()[ci];
            p.data()[ci] = orig + opts.eps;
            double f_plus = build().value();
            p.data()[ci] = orig - opts.eps;
            double f_minus = build().value();
            p.data()[ci] = orig;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw std::runtime_error("gradient_check: non-finite objective under perturbation");
            double fd = (f_plus - f_minus) / (2.0 * opts.eps);
            double ad = analytic[pi][ci];
            double rel = std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)});
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_coord =
                    "param" + std::to_string(pi) + "[" + std::to_string(ci) + "]";
            }
        }
    }
    return report;
}

}  // namespace qrd
