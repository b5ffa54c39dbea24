#include "qrd/student.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "qrd/checkpoint_io.hpp"
#include "qrd/corpus.hpp"
#include "qrd/random.hpp"
#include "qrd/vocab.hpp"

namespace qrd {

std::vector<StudentConfig> default_student_pair(std::uint64_t seed) {
    StudentConfig a;
    a.name = "student_a";
    a.n_layers = 1;
    a.n_heads = 2;
    a.d_model = 64;
    a.d_ff = 128;
    a.archetype = 0;
    a.seed = mix_seed(seed, 101);
    StudentConfig b;
    b.name = "student_b";
    b.n_layers = 4;
    b.n_heads = 2;
    b.d_model = 48;
    b.d_ff = 96;
    b.archetype = 1;
    b.seed = mix_seed(seed, 202);
    return {a, b};
}

StudentModel::StudentModel(StudentConfig config, std::uint64_t init_seed) : cfg_(std::move(config)) {
    if (cfg_.d_model % cfg_.n_heads != 0)
        throw std::invalid_argument("student: d_model must be divisible by n_heads");
    std::mt19937_64 rng(init_seed);
    const int d = cfg_.d_model;
    auto w = [&](std::string name, std::vector<int> shape, double stddev) {
        params_.emplace_back(std::move(name), randn_tensor(std::move(shape), stddev, rng));
    };
    auto zeros = [&](std::string name, std::vector<int> shape) {
        params_.emplace_back(std::move(name), Tensor::zeros(std::move(shape), true));
    };
    auto ones = [&](std::string name, std::vector<int> shape) {
        params_.emplace_back(std::move(name), Tensor::full(std::move(shape), 1.0, true));
    };

    w("tok_emb", {cfg_.vocab_size, d}, 0.02);
    w("pos_emb", {cfg_.max_seq, d}, 0.02);
    double ws = 1.0 / std::sqrt(d);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        ones(p + "ln1_g", {d});
        zeros(p + "ln1_b", {d});
        for (const char* n : {"wq", "wk", "wv", "wo"}) w(p + n, {d, d}, ws);
        for (const char* n : {"bq", "bk", "bv", "bo"}) zeros(p + n, {d});
        ones(p + "ln2_g", {d});
        zeros(p + "ln2_b", {d});
        w(p + "wf1", {d, cfg_.d_ff}, ws);
        zeros(p + "bf1", {cfg_.d_ff});
        w(p + "wf2", {cfg_.d_ff, d}, 1.0 / std::sqrt(cfg_.d_ff));
        zeros(p + "bf2", {d});
    }
    ones("lnf_g", {d});
    zeros("lnf_b", {d});
    w("w_out", {d, cfg_.vocab_size}, 0.02);
    zeros("b_out", {cfg_.vocab_size});
}

Tensor StudentModel::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw std::logic_error("student: unknown parameter " + name);
}

std::vector<Tensor> StudentModel::trainable() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [n, t] : params_) out.push_back(t);
    return out;
}

void StudentModel::zero_grad() {
    for (auto& [n, t] : params_) t.zero_grad();
}

StudentForward StudentModel::forward(const std::vector<int>& tokens) const {
    const int T = static_cast<int>(tokens.size());
    if (T == 0) throw std::invalid_argument("student forward: empty token sequence");
    if (T > cfg_.max_seq)
        throw std::length_error("student forward: sequence length " + std::to_string(T) +
                                " exceeds max " + std::to_string(cfg_.max_seq));
    const int d = cfg_.d_model, H = cfg_.n_heads, dh = d / H;

    std::vector<int> positions(T);
    for (int i = 0; i < T; ++i) positions[i] = i;
    Tensor x = add(embedding_rows(param("tok_emb"), tokens),
                   embedding_rows(param("pos_emb"), positions));

    Tensor mask = Tensor::zeros({T, T});
    for (int i = 0; i < T; ++i)
        for (int j = i + 1; j < T; ++j) mask.data()[i * T + j] = -1e9;

    for (int l = 0; l < cfg_.n_layers; ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        Tensor a = layer_norm_rows(x, param(p + "ln1_g"), param(p + "ln1_b"));
        Tensor q = add_row(matmul(a, param(p + "wq")), param(p + "bq"));
        Tensor k = add_row(matmul(a, param(p + "wk")), param(p + "bk"));
        Tensor v = add_row(matmul(a, param(p + "wv")), param(p + "bv"));
        Tensor heads;
        for (int h = 0; h < H; ++h) {
            Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
            Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
            Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
            Tensor scores = add(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dh)), mask);
            Tensor oh = matmul(softmax_rows(scores), vh);
            heads = h == 0 ? oh : concat_cols(heads, oh);
        }
        x = add(x, add_row(matmul(heads, param(p + "wo")), param(p + "bo")));
        Tensor b = layer_norm_rows(x, param(p + "ln2_g"), param(p + "ln2_b"));
        Tensor ff = add_row(
            matmul(tanh_op(add_row(matmul(b, param(p + "wf1")), param(p + "bf1"))),
                   param(p + "wf2")),
            param(p + "bf2"));
        x = add(x, ff);
    }
    Tensor hidden = layer_norm_rows(x, param("lnf_g"), param("lnf_b"));
    Tensor logits = add_row(matmul(hidden, param("w_out")), param("b_out"));
    return {logits, hidden};
}

StudentModel::SftResult StudentModel::sft_loss(const std::vector<int>& prompt_tokens,
                                               const std::vector<int>& path_tokens) const {
    std::vector<int> full{Vocabulary::kBos};
    full.insert(full.end(), prompt_tokens.begin(), prompt_tokens.end());
    if (path_tokens.empty()) {
        std::cerr << "sft_loss: empty path skipped\n";
        StudentForward fwd = forward(full);
        return {Tensor::scalar(0.0), std::move(fwd)};
    }
    full.insert(full.end(), path_tokens.begin(), path_tokens.end());
    const int T = static_cast<int>(full.size());
    StudentForward fwd = forward(full);

    // logits row i predicts full[i+1]; prompt-region targets are masked.
    std::vector<int> targets(T, -1);
    const int first_path_target = static_cast<int>(prompt_tokens.size()) + 1;
    for (int i = 0; i + 1 < T; ++i)
        if (i + 1 >= first_path_target) targets[i] = full[i + 1];
    Tensor loss = cross_entropy(fwd.logits, targets);
    return {loss, std::move(fwd)};
}

std::vector<int> StudentModel::greedy_decode(const std::vector<int>& prompt_tokens,
                                             int max_new) const {
    std::vector<int> seq{Vocabulary::kBos};
    seq.insert(seq.end(), prompt_tokens.begin(), prompt_tokens.end());
    std::vector<int> out;
    for (int i = 0; i < max_new; ++i) {
        if (static_cast<int>(seq.size()) >= cfg_.max_seq) break;
        StudentForward fwd = forward(seq);
        int last = fwd.logits.rows() - 1;
        int best = 0;
        double best_v = fwd.logits.at(last, 0);
        for (int vtok = 1; vtok < cfg_.vocab_size; ++vtok) {
            double lv = fwd.logits.at(last, vtok);
            if (lv > best_v) {
                best_v = lv;
                best = vtok;
            }
        }
        out.push_back(best);
        seq.push_back(best);
        if (best == Vocabulary::kEos) break;
    }
    return out;
}

std::uint64_t StudentModel::param_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [n, t] : params_) {
        h = fnv1a(n.data(), n.size(), h);
        h = fnv1a(t.data().data(), static_cast<std::size_t>(t.size()) * sizeof(double), h);
    }
    return h;
}

void StudentModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write student checkpoint: " + path);
    ckpt::write_magic(out, "QRDSTU1\n");
    ckpt::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.name.size()));
    out.write(cfg_.name.data(), static_cast<std::streamsize>(cfg_.name.size()));
    for (int f : {cfg_.n_layers, cfg_.n_heads, cfg_.d_model, cfg_.d_ff, cfg_.vocab_size,
                  cfg_.max_seq, cfg_.archetype})
        ckpt::write_pod<std::int32_t>(out, f);
    ckpt::write_pod<std::uint64_t>(out, cfg_.seed);
    ckpt::write_pod<std::int64_t>(out, step_);
    ckpt::write_pod<std::uint8_t>(out, frozen_ ? 1 : 0);
    ckpt::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [n, t] : params_) {
        ckpt::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
        out.write(n.data(), static_cast<std::streamsize>(n.size()));
        ckpt::write_tensor(out, t);
    }
}

StudentModel StudentModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open student checkpoint: " + path);
    ckpt::expect_magic(in, "QRDSTU1\n");
    StudentConfig cfg;
    auto name_len = ckpt::read_pod<std::uint32_t>(in);
    cfg.name.resize(name_len);
    in.read(cfg.name.data(), name_len);
    cfg.n_layers = ckpt::read_pod<std::int32_t>(in);
    cfg.n_heads = ckpt::read_pod<std::int32_t>(in);
    cfg.d_model = ckpt::read_pod<std::int32_t>(in);
    cfg.d_ff = ckpt::read_pod<std::int32_t>(in);
    cfg.vocab_size = ckpt::read_pod<std::int32_t>(in);
    cfg.max_seq = ckpt::read_pod<std::int32_t>(in);
    cfg.archetype = ckpt::read_pod<std::int32_t>(in);
    cfg.seed = ckpt::read_pod<std::uint64_t>(in);
    auto step = ckpt::read_pod<std::int64_t>(in);
    auto frozen = ckpt::read_pod<std::uint8_t>(in);
    StudentModel model(cfg, cfg.seed);
    model.step_ = step;
    model.frozen_ = frozen != 0;
    auto n_params = ckpt::read_pod<std::uint32_t>(in);
    if (n_params != model.params_.size())
        throw std::runtime_error("student checkpoint parameter count mismatch");
    for (auto& [n, t] : model.params_) {
        auto len = ckpt::read_pod<std::uint32_t>(in);
        std::string stored(len, '\0');
        in.read(stored.data(), len);
        if (stored != n)
            throw std::runtime_error("student checkpoint parameter order mismatch at " + n);
        ckpt::read_tensor_into(in, t);
    }
    return model;
}

}  // namespace qrd
