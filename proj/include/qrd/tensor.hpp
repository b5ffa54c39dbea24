#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qrd {

// Flat row-major storage; shapes are rank 1 (vector) or rank 2 (matrix).
// Scalars are rank-1 tensors of size 1.
using Array = Eigen::ArrayXd;
using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    std::vector<int> shape;
    Array data;
    Array grad;  // sized lazily during backward
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(TensorNode&)> backward_fn;
    std::uint64_t seq = 0;

    Eigen::Index size() const { return data.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, const std::vector<double>& values,
                              bool requires_grad = false);
    static Tensor from_array(std::vector<int> shape, Array values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool valid() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rows() const { return node_->rows(); }
    int cols() const { return node_->cols(); }
    Eigen::Index size() const { return node_->size(); }
    bool requires_grad() const { return node_->requires_grad; }

    Array& data() { return node_->data; }
    const Array& data() const { return node_->data; }
    Array& grad() { return node_->grad; }
    const Array& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->data.size(); }

    double value() const;              // scalar tensors only
    double at(int r, int c) const { return node_->data[r * node_->cols() + c]; }

    void zero_grad();
    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

// Runs reverse-mode accumulation from a scalar loss. Leaf tensors with
// requires_grad end up with fully populated grad buffers.
void backward(const Tensor& loss);

// --- elementwise / structural ops ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_row(const Tensor& m, const Tensor& row);        // matrix + broadcast row vector
Tensor scale_by(const Tensor& m, const Tensor& s);         // matrix * scalar tensor

// --- reductions ---
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor col_mean(const Tensor& a);                          // R x C -> 1 x C (mean over rows)
Tensor mse(const Tensor& a, const Tensor& b);              // summed squared difference

// --- shape surgery ---
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor gather_cols(const Tensor& a, std::vector<int> idx);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor stack_scalars(const std::vector<Tensor>& xs);       // n scalars -> vector[n]
Tensor select(const Tensor& a, int flat_index);            // one element -> scalar
Tensor detach(const Tensor& a);

// --- nonlinear blocks ---
Tensor softmax_rows(const Tensor& a);
Tensor softmax_vec(const Tensor& a);                       // rank-1 softmax
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
// Mean over positions of -log softmax(logits)[target]; targets equal to
// ignore_index contribute nothing.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     int ignore_index = -1);
// Binary entropy H(p) with p clamped to [1e-12, 1-1e-12] before the logs.
Tensor binary_entropy(const Tensor& p);

std::string shape_str(const std::vector<int>& shape);

}  // namespace qrd
