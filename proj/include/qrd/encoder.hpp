#pragma once

#include <vector>

#include "qrd/corpus.hpp"
#include "qrd/tensor.hpp"

namespace qrd {

// Fixed-vector path representation for the router. Layout for dimension d:
//   [0, d-8)   hashed token-bigram bag, L2-normalized
//   [d-8, d-2) one-hot style tag
//   d-2        token count / 256
//   d-1        difficulty / 5
constexpr int kEncoderDefaultDim = 64;
constexpr int kEncoderTailDims = 8;

class PathEncoder {
public:
    explicit PathEncoder(int dim = kEncoderDefaultDim);
    int dim() const { return dim_; }
    std::vector<double> encode(const ReasoningPath& path, int difficulty) const;
    // All paths of a corpus in file order, packed as a (paths x dim) tensor.
    Tensor encode_batch(const Corpus& corpus) const;

private:
    int dim_;
};

}  // namespace qrd
