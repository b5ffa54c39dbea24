#include "qrd/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace qrd {

PathEncoder::PathEncoder(int dim) : dim_(dim) {
    if (dim_ <= kEncoderTailDims + 2)
        throw std::invalid_argument("encoder dimension too small: " + std::to_string(dim_));
}

std::vector<double> PathEncoder::encode(const ReasoningPath& path, int difficulty) const {
    if (path.tokens.empty()) throw std::invalid_argument("encode: empty path");
    const int bag = dim_ - kEncoderTailDims;
    std::vector<double> out(dim_, 0.0);
    for (size_t i = 0; i + 1 < path.tokens.size(); ++i) {
        std::string key = vocab().name(path.tokens[i]) + "|" + vocab().name(path.tokens[i + 1]);
        out[fnv1a(key) % static_cast<std::uint64_t>(bag)] += 1.0;
    }
    double norm = 0.0;
    for (int i = 0; i < bag; ++i) norm += out[i] * out[i];
    if (norm > 0) {
        norm = std::sqrt(norm);
        for (int i = 0; i < bag; ++i) out[i] /= norm;
    }
    out[bag + static_cast<int>(path.style)] = 1.0;
    out[dim_ - 2] = static_cast<double>(path.tokens.size()) / 256.0;
    out[dim_ - 1] = static_cast<double>(difficulty) / 5.0;
    return out;
}

Tensor PathEncoder::encode_batch(const Corpus& corpus) const {
    int total = 0;
    for (const auto& e : corpus) total += static_cast<int>(e.paths.size());
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(total) * dim_);
    for (const auto& e : corpus)
        for (const auto& p : e.paths) {
            auto v = encode(p, e.query.difficulty);
            flat.insert(flat.end(), v.begin(), v.end());
        }
    return Tensor::from_values({total, dim_}, flat);
}

}  // namespace qrd
