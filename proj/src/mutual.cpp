#include "qrd/mutual.hpp"

#include <cmath>
#include <stdexcept>

#include "qrd/checkpoint_io.hpp"
#include "qrd/random.hpp"

namespace qrd {

SharedSpace SharedSpace::init(const std::vector<int>& student_widths, int d_shared,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SharedSpace s;
    s.d_shared = d_shared;
    for (int w : student_widths) {
        s.proj_w.push_back(randn_tensor({w, d_shared}, 1.0 / std::sqrt(w), rng));
        s.proj_b.push_back(Tensor::zeros({d_shared}, true));
        s.comp_w.push_back(randn_tensor({d_shared, 1}, 1.0 / std::sqrt(d_shared), rng));
    }
    return s;
}

std::vector<Tensor> SharedSpace::trainable() const {
    std::vector<Tensor> out;
    for (int s = 0; s < n_students(); ++s) {
        out.push_back(proj_w[s]);
        out.push_back(proj_b[s]);
        out.push_back(comp_w[s]);
    }
    return out;
}

Tensor project(const Tensor& hidden, const SharedSpace& shared, int student) {
    if (student < 0 || student >= shared.n_students())
        throw std::out_of_range("project: student index " + std::to_string(student));
    if (hidden.cols() != shared.proj_w[student].rows())
        throw std::invalid_argument("project: hidden width " + std::to_string(hidden.cols()) +
                                    " vs projection input " +
                                    std::to_string(shared.proj_w[student].rows()));
    return add_row(matmul(hidden, shared.proj_w[student]), shared.proj_b[student]);
}

Tensor competence(const std::vector<Tensor>& projected, const SharedSpace& shared) {
    if (projected.empty()) throw std::invalid_argument("competence: no projected states");
    std::vector<Tensor> scores;
    scores.reserve(projected.size());
    for (size_t s = 0; s < projected.size(); ++s)
        scores.push_back(select(matmul(col_mean(projected[s]), shared.comp_w[s]), 0));
    return softmax_vec(stack_scalars(scores));
}

Tensor ensemble(const std::vector<Tensor>& projected, const Tensor& gamma) {
    if (projected.empty()) throw std::invalid_argument("ensemble: no projected states");
    if (static_cast<size_t>(gamma.size()) != projected.size())
        throw std::invalid_argument("ensemble: gamma size mismatch");
    Tensor acc;
    for (size_t s = 0; s < projected.size(); ++s) {
        Tensor term = scale_by(projected[s], select(gamma, static_cast<int>(s)));
        acc = s == 0 ? term : add(acc, term);
    }
    return acc;
}

Tensor mutual_loss(const MutualBatch& batch, bool raw_sum) {
    if (batch.per_pair_losses.empty()) return Tensor::scalar(0.0);
    Tensor acc = batch.per_pair_losses[0];
    for (size_t i = 1; i < batch.per_pair_losses.size(); ++i)
        acc = add(acc, batch.per_pair_losses[i]);
    if (raw_sum) return acc;
    return scale(acc, 1.0 / static_cast<double>(batch.per_pair_losses.size()));
}

void save_shared(const SharedSpace& shared, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write shared-space checkpoint: " + path);
    ckpt::write_magic(out, "QRDSHS1\n");
    ckpt::write_pod<std::int32_t>(out, shared.d_shared);
    ckpt::write_pod<std::int32_t>(out, shared.n_students());
    for (int s = 0; s < shared.n_students(); ++s) {
        ckpt::write_pod<std::int32_t>(out, shared.proj_w[s].rows());
        ckpt::write_tensor(out, shared.proj_w[s]);
        ckpt::write_tensor(out, shared.proj_b[s]);
        ckpt::write_tensor(out, shared.comp_w[s]);
    }
}

SharedSpace load_shared(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open shared-space checkpoint: " + path);
    ckpt::expect_magic(in, "QRDSHS1\n");
    int d_shared = ckpt::read_pod<std::int32_t>(in);
    int n = ckpt::read_pod<std::int32_t>(in);
    std::vector<int> widths;
    SharedSpace out;
    out.d_shared = d_shared;
    for (int s = 0; s < n; ++s) {
        int w = ckpt::read_pod<std::int32_t>(in);
        out.proj_w.push_back(Tensor::zeros({w, d_shared}, true));
        out.proj_b.push_back(Tensor::zeros({d_shared}, true));
        out.comp_w.push_back(Tensor::zeros({d_shared, 1}, true));
        ckpt::read_tensor_into(in, out.proj_w.back());
        ckpt::read_tensor_into(in, out.proj_b.back());
        ckpt::read_tensor_into(in, out.comp_w.back());
    }
    return out;
}

}  // namespace qrd
