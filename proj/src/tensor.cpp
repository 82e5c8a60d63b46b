#include "probcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "probcast/errors.hpp"

namespace probcast::ad {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

namespace {

thread_local bool g_grad_enabled = true;

NodePtr make_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + " on an empty tensor");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad,
                           std::string name) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("tensor " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    auto n = make_node(std::move(shape), std::move(values));
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad, std::string name) {
    std::size_t n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<double>(n, 0.0), requires_grad,
                       std::move(name));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<double>(n, fill), requires_grad);
}

Tensor Tensor::scalar(double v) { return from_values({1}, {v}); }

const Shape& Tensor::shape() const {
    check_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::numel() const {
    check_defined(*this, "numel");
    return node_->numel();
}

std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_str(shape()));
    return shape()[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_str(shape()));
    return shape()[1];
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

const std::vector<double>& Tensor::values() const {
    check_defined(*this, "values");
    return node_->value;
}

std::vector<double>& Tensor::values_mut() {
    check_defined(*this, "values_mut");
    return node_->value;
}

const std::vector<double>& Tensor::grad() const {
    check_defined(*this, "grad");
    node_->ensure_grad();
    return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::zero_grad() {
    check_defined(*this, "zero_grad");
    node_->grad.assign(node_->value.size(), 0.0);
}

const std::string& Tensor::name() const {
    check_defined(*this, "name");
    return node_->name;
}

void Tensor::backward() const {
    check_defined(*this, "backward");
    Node* root = node_.get();
    if (root->numel() != 1) throw ContractError("backward from non-scalar " + shape_str(root->shape));
    if (!root->requires_grad) throw ContractError("backward on a tensor outside the graph");

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* node;
        std::size_t next;
    };
    std::vector<Frame> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            Node* p = f.node->parents[f.next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        n->ensure_grad();
        if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), 0.0);  // interior
    }
    root->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// broadcast plumbing

namespace {

enum class BroadcastKind { Same, ScalarA, ScalarB, General };

struct BroadcastPlan {
    BroadcastKind kind;
    Shape out_shape;
    // general case: per-output-element source indices
    std::vector<std::size_t> a_index;
    std::vector<std::size_t> b_index;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
    BroadcastPlan plan;
    if (a == b) {
        plan.kind = BroadcastKind::Same;
        plan.out_shape = a;
        return plan;
    }
    if (shape_numel(a) == 1 && b.size() >= a.size()) {
        plan.kind = BroadcastKind::ScalarA;
        plan.out_shape = b;
        return plan;
    }
    if (shape_numel(b) == 1 && a.size() >= b.size()) {
        plan.kind = BroadcastKind::ScalarB;
        plan.out_shape = a;
        return plan;
    }

    plan.kind = BroadcastKind::General;
    std::size_t rank = std::max(a.size(), b.size());
    Shape ash(rank, 1), bsh(rank, 1), out(rank, 1);
    std::copy(a.begin(), a.end(), ash.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), bsh.begin() + (rank - b.size()));
    for (std::size_t i = 0; i < rank; ++i) {
        if (ash[i] == bsh[i]) {
            out[i] = ash[i];
        } else if (ash[i] == 1) {
            out[i] = bsh[i];
        } else if (bsh[i] == 1) {
            out[i] = ash[i];
        } else {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
    }
    plan.out_shape = out;

    std::vector<std::size_t> astr(rank), bstr(rank);
    std::size_t sa = 1, sb = 1;
    for (std::size_t i = rank; i-- > 0;) {
        astr[i] = (ash[i] == 1) ? 0 : sa;
        bstr[i] = (bsh[i] == 1) ? 0 : sb;
        sa *= ash[i];
        sb *= bsh[i];
    }
    std::size_t total = shape_numel(out);
    plan.a_index.resize(total);
    plan.b_index.resize(total);
    std::vector<std::size_t> coord(rank, 0);
    for (std::size_t o = 0; o < total; ++o) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t i = 0; i < rank; ++i) {
            ia += coord[i] * astr[i];
            ib += coord[i] * bstr[i];
        }
        plan.a_index[o] = ia;
        plan.b_index[o] = ib;
        for (std::size_t i = rank; i-- > 0;) {
            if (++coord[i] < out[i]) break;
            coord[i] = 0;
        }
    }
    return plan;
}

using BinFn = double (*)(double, double);

Tensor binary_op(const Tensor& a, const Tensor& b, const char* op, BinFn fwd, BinFn dfa,
                 BinFn dfb) {
    check_defined(a, op);
    check_defined(b, op);
    auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape()));
    const auto& av = a.values();
    const auto& bv = b.values();
    std::size_t total = shape_numel(plan->out_shape);
    std::vector<double> out(total);
    switch (plan->kind) {
        case BroadcastKind::Same:
            for (std::size_t i = 0; i < total; ++i) out[i] = fwd(av[i], bv[i]);
            break;
        case BroadcastKind::ScalarA:
            for (std::size_t i = 0; i < total; ++i) out[i] = fwd(av[0], bv[i]);
            break;
        case BroadcastKind::ScalarB:
            for (std::size_t i = 0; i < total; ++i) out[i] = fwd(av[i], bv[0]);
            break;
        case BroadcastKind::General:
            for (std::size_t i = 0; i < total; ++i)
                out[i] = fwd(av[plan->a_index[i]], bv[plan->b_index[i]]);
            break;
    }
    auto node = make_node(plan->out_shape, std::move(out));
    if (recording({&a, &b})) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        NodePtr an = a.node(), bn = b.node();
        node->backward_fn = [an, bn, plan, dfa, dfb](Node& self) {
            const bool wa = an->requires_grad;
            const bool wb = bn->requires_grad;
            if (wa) an->ensure_grad();
            if (wb) bn->ensure_grad();
            std::size_t total = self.numel();
            for (std::size_t i = 0; i < total; ++i) {
                std::size_t ia = 0, ib = 0;
                switch (plan->kind) {
                    case BroadcastKind::Same: ia = i; ib = i; break;
                    case BroadcastKind::ScalarA: ia = 0; ib = i; break;
                    case BroadcastKind::ScalarB: ia = i; ib = 0; break;
                    case BroadcastKind::General:
                        ia = plan->a_index[i];
                        ib = plan->b_index[i];
                        break;
                }
                double g = self.grad[i];
                if (g == 0.0) continue;
                double x = an->value[ia];
                double y = bn->value[ib];
                if (wa) an->grad[ia] += g * dfa(x, y);
                if (wb) bn->grad[ib] += g * dfb(x, y);
            }
        };
    }
    return Tensor(std::move(node));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

using UnFn = double (*)(double);
using UnGradFn = double (*)(double x, double y);  // x input, y output

Tensor unary_op(const Tensor& a, const char* op, UnFn fwd, UnGradFn dfdx) {
    check_defined(a, op);
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    auto node = make_node(a.shape(), std::move(out));
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an, dfdx](Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.numel(); ++i)
                an->grad[i] += self.grad[i] * dfdx(an->value[i], self.value[i]);
        };
    }
    return Tensor(std::move(node));
}

// C[M,N] += A[M,K] * B[K,N]
void mm_nn(const double* A, const double* B, double* C, std::size_t M, std::size_t K,
           std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        double* crow = C + m * N;
        for (std::size_t k = 0; k < K; ++k) {
            double a = arow[k];
            if (a == 0.0) continue;
            const double* brow = B + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
void mm_nt(const double* A, const double* B, double* C, std::size_t M, std::size_t K,
           std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        double* crow = C + m * N;
        for (std::size_t n = 0; n < N; ++n) {
            const double* brow = B + n * K;
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += arow[k] * brow[k];
            crow[n] += s;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
void mm_tn(const double* A, const double* B, double* C, std::size_t M, std::size_t K,
           std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        const double* brow = B + m * N;
        for (std::size_t k = 0; k < K; ++k) {
            double a = arow[k];
            if (a == 0.0) continue;
            double* crow = C + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// binary / unary elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }

Tensor mul_scalar(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }

Tensor neg(const Tensor& a) {
    return unary_op(
        a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    check_defined(a, "log");
    for (double v : a.values())
        if (!(v > 0.0)) throw DomainError("log of non-positive value");
    return unary_op(
        a, "log", [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, "sigmoid", [](double x) { return stable_sigmoid(x); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        a, "softplus", [](double x) { return stable_softplus(x); },
        [](double x, double) { return stable_sigmoid(x); });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& a) {
    check_defined(a, "sqrt");
    for (double v : a.values())
        if (v < 0.0) throw DomainError("sqrt of negative value");
    return unary_op(
        a, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
    return unary_op(
        a, "square", [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
    return unary_op(
        a, "abs", [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// ---------------------------------------------------------------------------
// structure ops

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::size_t M = a.rows(), K = a.cols(), N = b.cols();
    std::vector<double> out(M * N, 0.0);
    mm_nn(a.values().data(), b.values().data(), out.data(), M, K, N);
    auto node = make_node({M, N}, std::move(out));
    if (recording({&a, &b})) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        NodePtr an = a.node(), bn = b.node();
        node->backward_fn = [an, bn, M, K, N](Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                mm_nt(self.grad.data(), bn->value.data(), an->grad.data(), M, N, K);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                mm_tn(an->value.data(), self.grad.data(), bn->grad.data(), M, K, N);
            }
        };
    }
    return Tensor(std::move(node));
}

Tensor transpose(const Tensor& a) {
    check_defined(a, "transpose");
    if (a.rank() != 2) throw ShapeError("transpose on tensor of shape " + shape_str(a.shape()));
    std::size_t R = a.rows(), C = a.cols();
    std::vector<double> out(R * C);
    const auto& av = a.values();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out[c * R + r] = av[r * C + c];
    auto node = make_node({C, R}, std::move(out));
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an, R, C](Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) an->grad[r * C + c] += self.grad[c * R + r];
        };
    }
    return Tensor(std::move(node));
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_defined(a, "reshape");
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto node = make_node(std::move(shape), a.values());
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an](Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.numel(); ++i) an->grad[i] += self.grad[i];
        };
    }
    return Tensor(std::move(node));
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    check_defined(a, "slice_cols");
    if (a.rank() != 2 || c0 >= c1 || c1 > a.cols())
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") of " + shape_str(a.shape()));
    std::size_t R = a.rows(), C = a.cols(), W = c1 - c0;
    std::vector<double> out(R * W);
    const auto& av = a.values();
    for (std::size_t r = 0; r < R; ++r)
        std::copy(av.begin() + r * C + c0, av.begin() + r * C + c1, out.begin() + r * W);
    auto node = make_node({R, W}, std::move(out));
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an, R, C, W, c0](Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t w = 0; w < W; ++w)
                    an->grad[r * C + c0 + w] += self.grad[r * W + w];
        };
    }
    return Tensor(std::move(node));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_defined(a, "concat_cols");
    check_defined(b, "concat_cols");
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
        throw ShapeError("concat_cols " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
    std::size_t R = a.rows(), Ca = a.cols(), Cb = b.cols(), C = Ca + Cb;
    std::vector<double> out(R * C);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t r = 0; r < R; ++r) {
        std::copy(av.begin() + r * Ca, av.begin() + (r + 1) * Ca, out.begin() + r * C);
        std::copy(bv.begin() + r * Cb, bv.begin() + (r + 1) * Cb, out.begin() + r * C + Ca);
    }
    auto node = make_node({R, C}, std::move(out));
    if (recording({&a, &b})) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        NodePtr an = a.node(), bn = b.node();
        node->backward_fn = [an, bn, R, Ca, Cb, C](Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < Ca; ++c)
                        an->grad[r * Ca + c] += self.grad[r * C + c];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < Cb; ++c)
                        bn->grad[r * Cb + c] += self.grad[r * C + Ca + c];
            }
        };
    }
    return Tensor(std::move(node));
}

Tensor row_softmax(const Tensor& a) {
    check_defined(a, "row_softmax");
    if (a.rank() != 2) throw ShapeError("row_softmax on tensor of shape " + shape_str(a.shape()));
    std::size_t R = a.rows(), C = a.cols();
    const auto& av = a.values();
    std::vector<double> out(R * C);
    for (std::size_t r = 0; r < R; ++r) {
        const double* row = av.data() + r * C;
        double mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            double e = std::exp(row[c] - mx);
            out[r * C + c] = e;
            total += e;
        }
        for (std::size_t c = 0; c < C; ++c) out[r * C + c] /= total;
    }
    auto node = make_node({R, C}, std::move(out));
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an, R, C](Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < R; ++r) {
                const double* s = self.value.data() + r * C;
                const double* g = self.grad.data() + r * C;
                double dot = 0.0;
                for (std::size_t c = 0; c < C; ++c) dot += g[c] * s[c];
                for (std::size_t c = 0; c < C; ++c) an->grad[r * C + c] += s[c] * (g[c] - dot);
            }
        };
    }
    return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
    check_defined(a, "sum");
    double total = 0.0;
    for (double v : a.values()) total += v;
    auto node = make_node({1}, {total});
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an](Node& self) {
            an->ensure_grad();
            double g = self.grad[0];
            for (double& d : an->grad) d += g;
        };
    }
    return Tensor(std::move(node));
}

Tensor mean(const Tensor& a) {
    check_defined(a, "mean");
    if (a.numel() == 0) throw ContractError("mean of empty tensor");
    double total = 0.0;
    for (double v : a.values()) total += v;
    double inv = 1.0 / static_cast<double>(a.numel());
    auto node = make_node({1}, {total * inv});
    if (recording({&a})) {
        node->requires_grad = true;
        node->parents = {a.node()};
        NodePtr an = a.node();
        node->backward_fn = [an, inv](Node& self) {
            an->ensure_grad();
            double g = self.grad[0] * inv;
            for (double& d : an->grad) d += g;
        };
    }
    return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// fused losses

Tensor gaussian_nll(const Tensor& mu, const Tensor& var, const Tensor& target,
                    Reduction reduction) {
    check_defined(mu, "gaussian_nll");
    check_defined(var, "gaussian_nll");
    check_defined(target, "gaussian_nll");
    if (mu.shape() != var.shape() || mu.shape() != target.shape())
        throw ShapeError("gaussian_nll shapes " + shape_str(mu.shape()) + ", " +
                         shape_str(var.shape()) + ", " + shape_str(target.shape()));
    const auto& m = mu.values();
    const auto& v = var.values();
    const auto& y = target.values();
    std::size_t n = m.size();
    constexpr double log_2pi = 1.8378770664093454836;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(v[i] > 0.0)) throw NumericError("gaussian_nll got non-positive variance");
        double d = y[i] - m[i];
        total += 0.5 * (log_2pi + std::log(v[i])) + d * d / (2.0 * v[i]);
    }
    double w = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
    auto node = make_node({1}, {total * w});
    if (recording({&mu, &var, &target})) {
        node->requires_grad = true;
        node->parents = {mu.node(), var.node(), target.node()};
        NodePtr mn = mu.node(), vn = var.node(), yn = target.node();
        node->backward_fn = [mn, vn, yn, w, n](Node& self) {
            double g = self.grad[0] * w;
            bool wm = mn->requires_grad, wv = vn->requires_grad, wy = yn->requires_grad;
            if (wm) mn->ensure_grad();
            if (wv) vn->ensure_grad();
            if (wy) yn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double d = mn->value[i] - yn->value[i];
                double vi = vn->value[i];
                if (wm) mn->grad[i] += g * d / vi;
                if (wv) vn->grad[i] += g * (0.5 / vi - d * d / (2.0 * vi * vi));
                if (wy) yn->grad[i] += g * (-d / vi);
            }
        };
    }
    return Tensor(std::move(node));
}

Tensor binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& target,
                                        Reduction reduction) {
    check_defined(logits, "binary_cross_entropy_with_logits");
    check_defined(target, "binary_cross_entropy_with_logits");
    if (logits.shape() != target.shape())
        throw ShapeError("binary_cross_entropy_with_logits shapes " + shape_str(logits.shape()) +
                         ", " + shape_str(target.shape()));
    const auto& z = logits.values();
    const auto& y = target.values();
    std::size_t n = z.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
    }
    double w = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
    auto node = make_node({1}, {total * w});
    if (recording({&logits, &target})) {
        node->requires_grad = true;
        node->parents = {logits.node(), target.node()};
        NodePtr zn = logits.node(), yn = target.node();
        node->backward_fn = [zn, yn, w, n](Node& self) {
            double g = self.grad[0] * w;
            bool wz = zn->requires_grad, wy = yn->requires_grad;
            if (wz) zn->ensure_grad();
            if (wy) yn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (wz) zn->grad[i] += g * (stable_sigmoid(zn->value[i]) - yn->value[i]);
                if (wy) yn->grad[i] += g * (-zn->value[i]);
            }
        };
    }
    return Tensor(std::move(node));
}

}  // namespace probcast::ad
