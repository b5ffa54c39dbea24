#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qrd/tensor.hpp"

namespace qrd {

struct StudentConfig {
    std::string name = "student";
    int n_layers = 1;
    int n_heads = 2;
    int d_model = 64;
    int d_ff = 128;
    int vocab_size = 512;
    int max_seq = 256;
    int archetype = 0;  // matches the corpus utility table
    std::uint64_t seed = 1;
};

// Default heterogeneous pair: a wide single-block model (archetype 0) and a
// narrow four-block one (archetype 1). The depth split is what lets planted
// copy patterns separate them: in-context copying needs attention
// composition across at least two blocks.
std::vector<StudentConfig> default_student_pair(std::uint64_t seed);

struct StudentForward {
    Tensor logits;       // T x V
    Tensor last_hidden;  // T x d_model, final block output before the LM head
};

class StudentModel {
public:
    StudentModel(StudentConfig config, std::uint64_t init_seed);

    const StudentConfig& config() const { return cfg_; }
    bool frozen() const { return frozen_; }
    void set_frozen(bool f) { frozen_ = f; }
    long step_count() const { return step_; }
    void bump_step() { ++step_; }

    const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
    std::vector<Tensor> trainable() const;
    void zero_grad();

    StudentForward forward(const std::vector<int>& tokens) const;

    // Next-token cross-entropy over the concatenated prompt+path sequence with
    // the prompt region masked out of the loss. Returns the loss and the
    // forward pass (whose hidden states feed the mutual-distillation pass).
    struct SftResult {
        Tensor loss;
        StudentForward fwd;
    };
    SftResult sft_loss(const std::vector<int>& prompt_tokens,
                       const std::vector<int>& path_tokens) const;

    std::vector<int> greedy_decode(const std::vector<int>& prompt_tokens, int max_new) const;

    std::uint64_t param_hash() const;
    void save(const std::string& path) const;
    static StudentModel load(const std::string& path);

private:
    Tensor param(const std::string& name) const;
    StudentConfig cfg_;
    bool frozen_ = false;
    long step_ = 0;
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace qrd
