#include "qrd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace qrd {

namespace {

std::atomic<std::uint64_t> g_seq{0};

Eigen::Index shape_numel(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

NodePtr make_node(std::vector<int> shape, Array data, std::vector<NodePtr> inputs = {},
                  std::function<void(TensorNode&)> backward = nullptr) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    for (auto& in : inputs)
        if (in->requires_grad) n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward);
    n->seq = ++g_seq;
    return n;
}

void accumulate(TensorNode& input, const Array& g) {
    if (!input.requires_grad) return;
    if (input.grad.size() != input.data.size()) input.grad = Array::Zero(input.data.size());
    input.grad += g;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Array d = Array::Zero(shape_numel(shape));
    auto n = make_node(std::move(shape), std::move(d));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Array d = Array::Constant(shape_numel(shape), value);
    auto n = make_node(std::move(shape), std::move(d));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_values(std::vector<int> shape, const std::vector<double>& values,
                           bool requires_grad) {
    if (shape_numel(shape) != static_cast<Eigen::Index>(values.size()))
        throw std::invalid_argument("from_values: " + shape_str(shape) + " does not hold " +
                                    std::to_string(values.size()) + " values");
    Array d = Eigen::Map<const Array>(values.data(), values.size());
    auto n = make_node(std::move(shape), std::move(d));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_array(std::vector<int> shape, Array values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("from_array: shape/size mismatch " + shape_str(shape));
    auto n = make_node(std::move(shape), std::move(values));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

double Tensor::value() const {
    if (size() != 1) throw std::logic_error("value() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() { node_->grad = Array::Zero(node_->data.size()); }

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::logic_error("backward: loss must be scalar");
    // Collect the reachable graph, then run in reverse creation order
    // (creation order is a topological order under define-by-run).
    std::vector<NodePtr> nodes;
    std::unordered_set<TensorNode*> seen;
    std::vector<NodePtr> stack{loss.node()};
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        if (!seen.insert(n.get()).second) continue;
        nodes.push_back(n);
        for (auto& in : n->inputs) stack.push_back(in);
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->seq > b->seq; });
    for (auto& n : nodes)
        if (n->requires_grad && n->grad.size() != n->data.size())
            n->grad = Array::Zero(n->data.size());
    if (loss.node()->requires_grad) loss.node()->grad[0] += 1.0;
    for (auto& n : nodes)
        if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
}

// --- elementwise ---

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto an = a.node(), bn = b.node();
    return Tensor(make_node(a.shape(), a.data() + b.data(), {an, bn}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad);
        accumulate(*out.inputs[1], out.grad);
    }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    return Tensor(make_node(a.shape(), a.data() - b.data(), {a.node(), b.node()},
                            [](TensorNode& out) {
                                accumulate(*out.inputs[0], out.grad);
                                accumulate(*out.inputs[1], -out.grad);
                            }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    return Tensor(make_node(a.shape(), a.data() * b.data(), {a.node(), b.node()},
                            [](TensorNode& out) {
                                accumulate(*out.inputs[0], out.grad * out.inputs[1]->data);
                                accumulate(*out.inputs[1], out.grad * out.inputs[0]->data);
                            }));
}

Tensor scale(const Tensor& a, double c) {
    return Tensor(make_node(a.shape(), a.data() * c, {a.node()}, [c](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad * c);
    }));
}

Tensor add_scalar(const Tensor& a, double c) {
    return Tensor(make_node(a.shape(), a.data() + c, {a.node()}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad);
    }));
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh_op(const Tensor& a) {
    Array y = a.data().tanh();
    return Tensor(make_node(a.shape(), y, {a.node()}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad * (1.0 - out.data.square()));
    }));
}

Tensor sigmoid(const Tensor& a) {
    Array y = 0.5 * (0.5 * a.data()).tanh() + 0.5;  // stable logistic
    return Tensor(make_node(a.shape(), y, {a.node()}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad * out.data * (1.0 - out.data));
    }));
}

Tensor exp_op(const Tensor& a) {
    Array y = a.data().exp();
    return Tensor(make_node(a.shape(), y, {a.node()}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad * out.data);
    }));
}

Tensor log_op(const Tensor& a) {
    Array y = a.data().log();
    return Tensor(make_node(a.shape(), y, {a.node()}, [](TensorNode& out) {
        accumulate(*out.inputs[0], out.grad / out.inputs[0]->data);
    }));
}

// --- linear algebra ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    int m = a.rows(), k = a.cols(), n = b.cols();
    Array out(static_cast<Eigen::Index>(m) * n);
    ConstMatMap A(a.data().data(), m, k), B(b.data().data(), k, n);
    MatMap(out.data(), m, n) = A * B;
    return Tensor(make_node({m, n}, std::move(out), {a.node(), b.node()},
                            [m, k, n](TensorNode& out_node) {
                                ConstMatMap G(out_node.grad.data(), m, n);
                                TensorNode& an = *out_node.inputs[0];
                                TensorNode& bn = *out_node.inputs[1];
                                ConstMatMap A(an.data.data(), m, k), B(bn.data.data(), k, n);
                                if (an.requires_grad) {
                                    if (an.grad.size() != an.data.size())
                                        an.grad = Array::Zero(an.data.size());
                                    MatMap(an.grad.data(), m, k) += G * B.transpose();
                                }
                                if (bn.requires_grad) {
                                    if (bn.grad.size() != bn.data.size())
                                        bn.grad = Array::Zero(bn.data.size());
                                    MatMap(bn.grad.data(), k, n) += A.transpose() * G;
                                }
                            }));
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: rank-2 only");
    int m = a.rows(), n = a.cols();
    Array out(a.size());
    MatMap(out.data(), n, m) = ConstMatMap(a.data().data(), m, n).transpose();
    return Tensor(make_node({n, m}, std::move(out), {a.node()}, [m, n](TensorNode& out_node) {
        TensorNode& an = *out_node.inputs[0];
        if (an.grad.size() != an.data.size()) an.grad = Array::Zero(an.data.size());
        MatMap(an.grad.data(), m, n) += ConstMatMap(out_node.grad.data(), n, m).transpose();
    }));
}

Tensor add_row(const Tensor& m, const Tensor& row) {
    if (m.cols() != static_cast<int>(row.size()))
        throw std::invalid_argument("add_row: width mismatch " + shape_str(m.shape()) + " vs " +
                                    shape_str(row.shape()));
    int r = m.rows(), c = m.cols();
    Array out(m.size());
    ConstMatMap M(m.data().data(), r, c);
    Eigen::Map<const Eigen::RowVectorXd> B(row.data().data(), c);
    MatMap(out.data(), r, c) = M.rowwise() + B;
    return Tensor(make_node({r, c}, std::move(out), {m.node(), row.node()},
                            [r, c](TensorNode& out_node) {
                                ConstMatMap G(out_node.grad.data(), r, c);
                                TensorNode& mn = *out_node.inputs[0];
                                TensorNode& bn = *out_node.inputs[1];
                                if (mn.requires_grad) accumulate(mn, out_node.grad);
                                if (bn.requires_grad) {
                                    if (bn.grad.size() != bn.data.size())
                                        bn.grad = Array::Zero(bn.data.size());
                                    Eigen::Map<Eigen::RowVectorXd>(bn.grad.data(), c) +=
                                        G.colwise().sum();
                                }
                            }));
}

Tensor scale_by(const Tensor& m, const Tensor& s) {
    if (s.size() != 1) throw std::invalid_argument("scale_by: scalar tensor required");
    double sv = s.data()[0];
    return Tensor(make_node(m.shape(), m.data() * sv, {m.node(), s.node()},
                            [](TensorNode& out) {
                                TensorNode& mn = *out.inputs[0];
                                TensorNode& sn = *out.inputs[1];
                                if (mn.requires_grad) accumulate(mn, out.grad * sn.data[0]);
                                if (sn.requires_grad)
                                    accumulate(sn, Array::Constant(1, (out.grad * mn.data).sum()));
                            }));
}

// --- reductions ---

Tensor sum(const Tensor& a) {
    return Tensor(make_node({1}, Array::Constant(1, a.data().sum()), {a.node()},
                            [](TensorNode& out) {
                                TensorNode& an = *out.inputs[0];
                                accumulate(an, Array::Constant(an.data.size(), out.grad[0]));
                            }));
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor col_mean(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("col_mean: rank-2 only");
    int r = a.rows(), c = a.cols();
    Array out(c);
    Eigen::Map<Eigen::RowVectorXd>(out.data(), c) =
        ConstMatMap(a.data().data(), r, c).colwise().mean();
    return Tensor(make_node({1, c}, std::move(out), {a.node()}, [r, c](TensorNode& out_node) {
        TensorNode& an = *out_node.inputs[0];
        if (an.grad.size() != an.data.size()) an.grad = Array::Zero(an.data.size());
        MatMap(an.grad.data(), r, c).rowwise() +=
            Eigen::Map<const Eigen::RowVectorXd>(out_node.grad.data(), c) / double(r);
    }));
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    Array diff = a.data() - b.data();
    return Tensor(make_node({1}, Array::Constant(1, diff.square().sum()),
                            {a.node(), b.node()}, [](TensorNode& out) {
                                Array d = out.inputs[0]->data - out.inputs[1]->data;
                                accumulate(*out.inputs[0], 2.0 * out.grad[0] * d);
                                accumulate(*out.inputs[1], -2.0 * out.grad[0] * d);
                            }));
}

// --- shape surgery ---

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (a.shape().size() != 2 || c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range");
    int r = a.rows(), c = a.cols(), w = c1 - c0;
    Array out(static_cast<Eigen::Index>(r) * w);
    MatMap(out.data(), r, w) = ConstMatMap(a.data().data(), r, c).middleCols(c0, w);
    return Tensor(make_node({r, w}, std::move(out), {a.node()},
                            [r, c, c0, w](TensorNode& out_node) {
                                TensorNode& an = *out_node.inputs[0];
                                if (an.grad.size() != an.data.size())
                                    an.grad = Array::Zero(an.data.size());
                                MatMap(an.grad.data(), r, c).middleCols(c0, w) +=
                                    ConstMatMap(out_node.grad.data(), r, w);
                            }));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.rows() != b.rows())
        throw std::invalid_argument("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    int r = a.rows(), ca = a.cols(), cb = b.cols();
    Array out(static_cast<Eigen::Index>(r) * (ca + cb));
    MatMap O(out.data(), r, ca + cb);
    O.leftCols(ca) = ConstMatMap(a.data().data(), r, ca);
    O.rightCols(cb) = ConstMatMap(b.data().data(), r, cb);
    return Tensor(make_node({r, ca + cb}, std::move(out), {a.node(), b.node()},
                            [r, ca, cb](TensorNode& out_node) {
                                ConstMatMap G(out_node.grad.data(), r, ca + cb);
                                TensorNode& an = *out_node.inputs[0];
                                TensorNode& bn = *out_node.inputs[1];
                                if (an.requires_grad) {
                                    if (an.grad.size() != an.data.size())
                                        an.grad = Array::Zero(an.data.size());
                                    MatMap(an.grad.data(), r, ca) += G.leftCols(ca);
                                }
                                if (bn.requires_grad) {
                                    if (bn.grad.size() != bn.data.size())
                                        bn.grad = Array::Zero(bn.data.size());
                                    MatMap(bn.grad.data(), r, cb) += G.rightCols(cb);
                                }
                            }));
}

Tensor gather_cols(const Tensor& a, std::vector<int> idx) {
    if (a.shape().size() != 2) throw std::invalid_argument("gather_cols: rank-2 only");
    int r = a.rows(), c = a.cols(), w = static_cast<int>(idx.size());
    for (int j : idx)
        if (j < 0 || j >= c) throw std::invalid_argument("gather_cols: column index out of range");
    Array out(static_cast<Eigen::Index>(r) * w);
    ConstMatMap A(a.data().data(), r, c);
    MatMap O(out.data(), r, w);
    for (int j = 0; j < w; ++j) O.col(j) = A.col(idx[j]);
    return Tensor(make_node({r, w}, std::move(out), {a.node()},
                            [r, c, idx = std::move(idx)](TensorNode& out_node) {
                                TensorNode& an = *out_node.inputs[0];
                                if (an.grad.size() != an.data.size())
                                    an.grad = Array::Zero(an.data.size());
                                MatMap AG(an.grad.data(), r, c);
                                ConstMatMap G(out_node.grad.data(), r,
                                              static_cast<int>(idx.size()));
                                for (size_t j = 0; j < idx.size(); ++j)
                                    AG.col(idx[j]) += G.col(static_cast<int>(j));
                            }));
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2) throw std::invalid_argument("embedding_rows: rank-2 table");
    int v = table.rows(), d = table.cols(), t = static_cast<int>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= v)
            throw std::out_of_range("embedding_rows: id " + std::to_string(id) +
                                    " outside table of " + std::to_string(v));
    Array out(static_cast<Eigen::Index>(t) * d);
    ConstMatMap T(table.data().data(), v, d);
    MatMap O(out.data(), t, d);
    for (int i = 0; i < t; ++i) O.row(i) = T.row(ids[i]);
    return Tensor(make_node({t, d}, std::move(out), {table.node()},
                            [v, d, ids](TensorNode& out_node) {
                                TensorNode& tn = *out_node.inputs[0];
                                if (tn.grad.size() != tn.data.size())
                                    tn.grad = Array::Zero(tn.data.size());
                                MatMap TG(tn.grad.data(), v, d);
                                ConstMatMap G(out_node.grad.data(),
                                              static_cast<int>(ids.size()), d);
                                for (size_t i = 0; i < ids.size(); ++i)
                                    TG.row(ids[i]) += G.row(static_cast<int>(i));
                            }));
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
    Array out(xs.size());
    std::vector<NodePtr> inputs;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != 1) throw std::invalid_argument("stack_scalars: non-scalar element");
        out[static_cast<Eigen::Index>(i)] = xs[i].data()[0];
        inputs.push_back(xs[i].node());
    }
    return Tensor(make_node({static_cast<int>(xs.size())}, std::move(out), std::move(inputs),
                            [](TensorNode& out_node) {
                                for (size_t i = 0; i < out_node.inputs.size(); ++i)
                                    accumulate(*out_node.inputs[i],
                                               Array::Constant(1, out_node.grad[static_cast<Eigen::Index>(i)]));
                            }));
}

Tensor select(const Tensor& a, int flat_index) {
    if (flat_index < 0 || flat_index >= a.size())
        throw std::out_of_range("select: index " + std::to_string(flat_index) + " outside " +
                                shape_str(a.shape()));
    return Tensor(make_node({1}, Array::Constant(1, a.data()[flat_index]), {a.node()},
                            [flat_index](TensorNode& out) {
                                TensorNode& an = *out.inputs[0];
                                if (an.grad.size() != an.data.size())
                                    an.grad = Array::Zero(an.data.size());
                                an.grad[flat_index] += out.grad[0];
                            }));
}

Tensor detach(const Tensor& a) {
    auto n = make_node(a.shape(), a.data());
    return Tensor(n);
}

// --- nonlinear blocks ---

Tensor softmax_rows(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("softmax_rows: rank-2 only");
    int r = a.rows(), c = a.cols();
    Array out(a.size());
    ConstMatMap A(a.data().data(), r, c);
    MatMap O(out.data(), r, c);
    for (int i = 0; i < r; ++i) {
        Eigen::ArrayXd row = A.row(i).array();
        row -= row.maxCoeff();
        row = row.exp();
        O.row(i) = (row / row.sum()).matrix();
    }
    return Tensor(make_node({r, c}, std::move(out), {a.node()}, [r, c](TensorNode& out_node) {
        TensorNode& an = *out_node.inputs[0];
        if (an.grad.size() != an.data.size()) an.grad = Array::Zero(an.data.size());
        ConstMatMap Y(out_node.data.data(), r, c), G(out_node.grad.data(), r, c);
        MatMap AG(an.grad.data(), r, c);
        for (int i = 0; i < r; ++i) {
            double dot = Y.row(i).dot(G.row(i));
            AG.row(i) += (Y.row(i).array() * (G.row(i).array() - dot)).matrix();
        }
    }));
}

Tensor softmax_vec(const Tensor& a) {
    if (a.shape().size() != 1) throw std::invalid_argument("softmax_vec: rank-1 only");
    int n = static_cast<int>(a.size());
    Array x = a.data();
    x -= x.maxCoeff();
    x = x.exp();
    x /= x.sum();
    return Tensor(make_node({n}, std::move(x), {a.node()}, [](TensorNode& out) {
        double dot = (out.data * out.grad).sum();
        accumulate(*out.inputs[0], out.data * (out.grad - dot));
    }));
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    if (a.shape().size() != 2) throw std::invalid_argument("layer_norm_rows: rank-2 only");
    int r = a.rows(), c = a.cols();
    if (static_cast<int>(gain.size()) != c || static_cast<int>(bias.size()) != c)
        throw std::invalid_argument("layer_norm_rows: gain/bias width mismatch");
    Array norm(a.size()), out(a.size()), inv_std(r);
    ConstMatMap A(a.data().data(), r, c);
    MatMap N(norm.data(), r, c), O(out.data(), r, c);
    for (int i = 0; i < r; ++i) {
        double mu = A.row(i).mean();
        Eigen::ArrayXd cen = A.row(i).array() - mu;
        double var = cen.square().mean();
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        N.row(i) = (cen * inv_std[i]).matrix();
        O.row(i) = (N.row(i).array() * gain.data().transpose() + bias.data().transpose()).matrix();
    }
    return Tensor(make_node(
        {r, c}, std::move(out), {a.node(), gain.node(), bias.node()},
        [r, c, norm = std::move(norm), inv_std = std::move(inv_std)](TensorNode& out_node) {
            TensorNode& an = *out_node.inputs[0];
            TensorNode& gn = *out_node.inputs[1];
            TensorNode& bn = *out_node.inputs[2];
            ConstMatMap G(out_node.grad.data(), r, c), N(norm.data(), r, c);
            if (gn.requires_grad) {
                if (gn.grad.size() != gn.data.size()) gn.grad = Array::Zero(gn.data.size());
                for (int i = 0; i < r; ++i)
                    gn.grad += (G.row(i).array() * N.row(i).array()).transpose();
            }
            if (bn.requires_grad) {
                if (bn.grad.size() != bn.data.size()) bn.grad = Array::Zero(bn.data.size());
                for (int i = 0; i < r; ++i) bn.grad += G.row(i).array().transpose();
            }
            if (an.requires_grad) {
                if (an.grad.size() != an.data.size()) an.grad = Array::Zero(an.data.size());
                MatMap AG(an.grad.data(), r, c);
                for (int i = 0; i < r; ++i) {
                    Eigen::ArrayXd gy = G.row(i).array().transpose() * gn.data;  // dL/dnorm
                    Eigen::ArrayXd nr = N.row(i).array().transpose();
                    double m1 = gy.mean();
                    double m2 = (gy * nr).mean();
                    AG.row(i) += ((gy - m1 - nr * m2) * inv_std[i]).matrix().transpose();
                }
            }
        }));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index) {
    if (logits.shape().size() != 2) throw std::invalid_argument("cross_entropy: rank-2 logits");
    int t = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != t)
        throw std::invalid_argument("cross_entropy: target count " +
                                    std::to_string(targets.size()) + " vs rows " +
                                    std::to_string(t));
    int active = 0;
    double loss = 0.0;
    ConstMatMap L(logits.data().data(), t, v);
    for (int i = 0; i < t; ++i) {
        int tgt = targets[i];
        if (tgt == ignore_index) continue;
        if (tgt < 0 || tgt >= v)
            throw std::out_of_range("cross_entropy: target id " + std::to_string(tgt) +
                                    " outside vocab " + std::to_string(v));
        Eigen::ArrayXd row = L.row(i).array();
        double mx = row.maxCoeff();
        double lse = mx + std::log((row - mx).exp().sum());
        loss += lse - row[tgt];
        ++active;
    }
    if (active == 0)
        return Tensor(make_node({1}, Array::Zero(1), {logits.node()}, [](TensorNode&) {}));
    loss /= active;
    return Tensor(make_node(
        {1}, Array::Constant(1, loss), {logits.node()},
        [t, v, targets, ignore_index, active](TensorNode& out) {
            TensorNode& ln = *out.inputs[0];
            if (ln.grad.size() != ln.data.size()) ln.grad = Array::Zero(ln.data.size());
            ConstMatMap L(ln.data.data(), t, v);
            MatMap G(ln.grad.data(), t, v);
            double g = out.grad[0] / active;
            for (int i = 0; i < t; ++i) {
                if (targets[i] == ignore_index) continue;
                Eigen::ArrayXd row = L.row(i).array();
                row -= row.maxCoeff();
                row = row.exp();
                row /= row.sum();
                row[targets[i]] -= 1.0;
                G.row(i) += (g * row).matrix().transpose();
            }
        }));
}

Tensor binary_entropy(const Tensor& p) {
    if (p.size() != 1) throw std::invalid_argument("binary_entropy: scalar input");
    constexpr double kLo = 1e-12, kHi = 1.0 - 1e-12;
    double raw = p.data()[0];
    double q = std::min(kHi, std::max(kLo, raw));
    double h = -(q * std::log(q) + (1.0 - q) * std::log(1.0 - q));
    bool clamped = (raw < kLo) || (raw > kHi);
    return Tensor(make_node({1}, Array::Constant(1, h), {p.node()},
                            [q, clamped](TensorNode& out) {
                                double d = clamped ? 0.0 : std::log((1.0 - q) / q);
                                accumulate(*out.inputs[0], Array::Constant(1, out.grad[0] * d));
                            }));
}

}  // namespace qrd
