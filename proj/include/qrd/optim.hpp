#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qrd/tensor.hpp"

namespace qrd {

// Adaptive moments with decoupled weight decay.
class AdamW {
public:
    explicit AdamW(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                   double weight_decay = 0.01)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(const std::vector<Tensor>& params) {
        if (slots_.empty()) {
            for (const auto& p : params) slots_.push_back({Array::Zero(p.size()), Array::Zero(p.size())});
        } else if (slots_.size() != params.size()) {
            throw std::logic_error("AdamW: parameter group changed size");
        }
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor p = params[i];
            if (!p.has_grad()) continue;
            Array& m = slots_[i].m;
            Array& v = slots_[i].v;
            m = beta1_ * m + (1.0 - beta1_) * p.grad();
            v = beta2_ * v + (1.0 - beta2_) * p.grad().square();
            Array m_hat = m / bc1;
            Array v_hat = v / bc2;
            p.data() -= lr_ * (m_hat / (v_hat.sqrt() + eps_) + wd_ * p.data());
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_, wd_;
    struct Slot {
        Array m, v;
    };
    std::vector<Slot> slots_;
    long t_ = 0;
};

}  // namespace qrd
