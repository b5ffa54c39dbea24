#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrd/corpus.hpp"
#include "qrd/tensor.hpp"

namespace qrd {

// Two-layer tanh MLP producing, per student, an (assign, skip) logit pair.
struct RouterParams {
    int input_dim = 0;
    int hidden_dim = 32;
    int n_students = 2;
    double tau = 1.0;
    Tensor w1, b1, w2, b2;  // w2 has width 2 * n_students

    static RouterParams init(int input_dim, int hidden_dim, int n_students, std::uint64_t seed);
    std::vector<Tensor> trainable() const { return {w1, b1, w2, b2}; }
};

struct RoutingDecision {
    Tensor soft;        // paths x S, assign-class probabilities in (0,1)
    Tensor hard;        // paths x S, exact {0,1} forward, straight-through backward
    Tensor margin;      // paths x S, assign - skip logits before noise and
                        // temperature (carries gradient)
    Tensor alpha_soft;  // scalar, mean of soft (carries gradient)
    double alpha_hard = 0.0;  // mean of hard bits, for reporting

    bool assigned(int path, int student) const {
        return hard.at(path, student) > 0.5;
    }
};

// Per-(path, student) pair of Gumbel(0,1) variates, paths x 2S, column layout
// [g_assign_0, g_skip_0, g_assign_1, g_skip_1, ...].
Tensor gumbel_noise(int paths, int n_students, std::uint64_t noise_seed);
Tensor zero_noise(int paths, int n_students);

RoutingDecision route(const Tensor& embeddings, const RouterParams& params, const Tensor& noise);

// Binary entropy H(alpha-bar); the trainer adds lambda1 * (ln 2 - H).
Tensor entropy_loss(const RoutingDecision& decision);

struct SelectionRateRow {
    std::string group_key;
    int student_id = 0;
    double rate = 0.0;
    long count = 0;
};

enum class GroupBy { Style, Difficulty };

// Fraction of each group's paths routed to each student (hard assignments).
std::vector<SelectionRateRow> selection_rates(const Corpus& corpus,
                                              const RoutingDecision& decision, GroupBy group_by);
void write_selection_rates(const std::vector<SelectionRateRow>& rows, const std::string& path);

void save_router(const RouterParams& params, const std::string& path);
RouterParams load_router(const std::string& path);

}  // namespace qrd
