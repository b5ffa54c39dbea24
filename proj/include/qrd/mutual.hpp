#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrd/tensor.hpp"

namespace qrd {

// Shared low-dimensional space for peer teaching: one affine projection and
// one competence read-out vector per student.
struct SharedSpace {
    int d_shared = 32;
    std::vector<Tensor> proj_w;  // d_model(s) x d_shared
    std::vector<Tensor> proj_b;  // d_shared
    std::vector<Tensor> comp_w;  // d_shared x 1

    static SharedSpace init(const std::vector<int>& student_widths, int d_shared,
                            std::uint64_t seed);
    int n_students() const { return static_cast<int>(proj_w.size()); }
    std::vector<Tensor> trainable() const;
};

// Affine map applied per token position: (T x d_model) -> (T x d_shared).
Tensor project(const Tensor& hidden, const SharedSpace& shared, int student);

// Softmax over students of w_s . mean_t(projected_s).
Tensor competence(const std::vector<Tensor>& projected, const SharedSpace& shared);

// Token-wise convex combination sum_s gamma[s] * projected[s].
Tensor ensemble(const std::vector<Tensor>& projected, const Tensor& gamma);

struct MutualBatch {
    std::vector<Tensor> per_pair_losses;  // one summed-squared-error per (student, path)
    long pairs = 0;
    long skipped_steps = 0;  // steps with no co-routed paths
};

// Mean over (student, path) pairs of ||z_tilde - z_ens||^2 summed over tokens
// and dims; raw_sum skips the averaging.
Tensor mutual_loss(const MutualBatch& batch, bool raw_sum = false);

void save_shared(const SharedSpace& shared, const std::string& path);
SharedSpace load_shared(const std::string& path);

}  // namespace qrd
