#pragma once

#include <cmath>
#include <random>

#include "qrd/tensor.hpp"

namespace qrd {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Box-Muller; avoids implementation-defined std::normal_distribution streams.
inline double gauss(std::mt19937_64& rng) {
    double u1 = uniform01(rng), u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Tensor randn_tensor(std::vector<int> shape, double stddev, std::mt19937_64& rng,
                           bool requires_grad = true) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = stddev * gauss(rng);
    return t;
}

inline double gumbel(std::mt19937_64& rng) {
    double u = uniform01(rng);
    if (u < 1e-300) u = 1e-300;
    return -std::log(-std::log(u));
}

}  // namespace qrd
