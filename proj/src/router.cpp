#include "qrd/router.hpp"

#include <cmath>
#include <iostream>
#include <map>

#include "qrd/checkpoint_io.hpp"
#include "qrd/random.hpp"

namespace qrd {

RouterParams RouterParams::init(int input_dim, int hidden_dim, int n_students,
                                std::uint64_t seed) {
    if (n_students < 1) throw std::invalid_argument("router: need at least one student");
    std::mt19937_64 rng(seed);
    RouterParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.n_students = n_students;
    p.w1 = randn_tensor({input_dim, hidden_dim}, 1.0 / std::sqrt(input_dim), rng);
    p.b1 = Tensor::zeros({hidden_dim}, true);
    p.w2 = randn_tensor({hidden_dim, 2 * n_students}, 1.0 / std::sqrt(hidden_dim), rng);
    p.b2 = Tensor::zeros({2 * n_students}, true);
    return p;
}

Tensor gumbel_noise(int paths, int n_students, std::uint64_t noise_seed) {
    std::mt19937_64 rng(noise_seed);
    Tensor t = Tensor::zeros({paths, 2 * n_students});
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = gumbel(rng);
    return t;
}

Tensor zero_noise(int paths, int n_students) {
    return Tensor::zeros({paths, 2 * n_students});
}

RoutingDecision route(const Tensor& embeddings, const RouterParams& params, const Tensor& noise) {
    if (params.tau <= 0.0) throw std::invalid_argument("route: temperature must be positive");
    if (embeddings.cols() != params.input_dim)
        throw std::invalid_argument("route: embedding width " + std::to_string(embeddings.cols()) +
                                    " vs router input " + std::to_string(params.input_dim));
    const int paths = embeddings.rows(), S = params.n_students;
    if (noise.rows() != paths || noise.cols() != 2 * S)
        throw std::invalid_argument("route: noise shape mismatch");

    Tensor h1 = tanh_op(add_row(matmul(embeddings, params.w1), params.b1));
    Tensor logits = add_row(matmul(h1, params.w2), params.b2);
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (!std::isfinite(logits.data()[i]))
            throw std::runtime_error("route: non-finite logits for path " +
                                     std::to_string(i / (2 * S)));

    std::vector<int> evens(S), odds(S);
    for (int s = 0; s < S; ++s) {
        evens[s] = 2 * s;
        odds[s] = 2 * s + 1;
    }
    Tensor assign = gather_cols(logits, evens);
    Tensor skip = gather_cols(logits, odds);
    Tensor g_assign = gather_cols(noise, evens);
    Tensor g_skip = gather_cols(noise, odds);

    // Two-class Gumbel-Softmax at temperature tau reduces to a logistic.
    Tensor margin = sub(assign, skip);
    Tensor diff = scale(add(margin, sub(g_assign, g_skip)), 1.0 / params.tau);
    Tensor soft = sigmoid(diff);

    Array bits(soft.size());
    for (Eigen::Index i = 0; i < soft.size(); ++i) bits[i] = diff.data()[i] > 0.0 ? 1.0 : 0.0;
    // Straight-through: forward emits exact bits, backward treats hard as soft.
    Tensor offset = Tensor::from_array({paths, S}, bits - soft.data());
    Tensor hard = add(offset, soft);
    hard.data() = bits;

    RoutingDecision decision;
    decision.soft = soft;
    decision.hard = hard;
    decision.margin = margin;
    decision.alpha_soft = mean(soft);
    decision.alpha_hard = bits.mean();
    return decision;
}

Tensor entropy_loss(const RoutingDecision& decision) {
    return binary_entropy(decision.alpha_soft);
}

std::vector<SelectionRateRow> selection_rates(const Corpus& corpus,
                                              const RoutingDecision& decision, GroupBy group_by) {
    const int S = decision.hard.cols();
    struct Acc {
        std::vector<long> assigned;
        long total = 0;
    };
    std::map<std::string, Acc> groups;
    int row = 0;
    for (const auto& entry : corpus) {
        for (const auto& p : entry.paths) {
            std::string key = group_by == GroupBy::Style
                                  ? to_string(p.style)
                                  : "difficulty_" + std::to_string(entry.query.difficulty);
            auto& acc = groups[key];
            if (acc.assigned.empty()) acc.assigned.assign(S, 0);
            ++acc.total;
            for (int s = 0; s < S; ++s)
                if (decision.hard.at(row, s) > 0.5) ++acc.assigned[s];
            ++row;
        }
    }
    std::vector<SelectionRateRow> rows;
    for (const auto& [key, acc] : groups) {
        if (acc.total == 0) {
            std::cerr << "selection_rates: empty group " << key << " omitted\n";
            continue;
        }
        for (int s = 0; s < S; ++s)
            rows.push_back({key, s, static_cast<double>(acc.assigned[s]) / acc.total, acc.total});
    }
    return rows;
}

void write_selection_rates(const std::vector<SelectionRateRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write selection rates: " + path);
    out << "group_key,student_id,rate,count\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.rate);
        out << r.group_key << "," << r.student_id << "," << buf << "," << r.count << "\n";
    }
}

void save_router(const RouterParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write router checkpoint: " + path);
    ckpt::write_magic(out, "QRDRTR1\n");
    ckpt::write_pod<std::int32_t>(out, p.input_dim);
    ckpt::write_pod<std::int32_t>(out, p.hidden_dim);
    ckpt::write_pod<std::int32_t>(out, p.n_students);
    ckpt::write_pod<double>(out, p.tau);
    for (const Tensor& t : {p.w1, p.b1, p.w2, p.b2}) ckpt::write_tensor(out, t);
}

RouterParams load_router(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open router checkpoint: " + path);
    ckpt::expect_magic(in, "QRDRTR1\n");
    int input = ckpt::read_pod<std::int32_t>(in);
    int hidden = ckpt::read_pod<std::int32_t>(in);
    int S = ckpt::read_pod<std::int32_t>(in);
    RouterParams p = RouterParams::init(input, hidden, S, 0);
    p.tau = ckpt::read_pod<double>(in);
    for (Tensor t : {p.w1, p.b1, p.w2, p.b2}) ckpt::read_tensor_into(in, t);
    return p;
}

}  // namespace qrd
