#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace probcast::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Node {
public:
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, accumulates
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // pushes this->grad into parents
    std::string name;

    std::size_t numel() const { return value.size(); }
    void ensure_grad();
};

using NodePtr = std::shared_ptr<Node>;

bool grad_enabled();
void set_grad_enabled(bool on);

// Scoped switch that disables graph recording (inference, oracle loops).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false,
                              std::string name = "");
    static Tensor zeros(Shape shape, bool requires_grad = false, std::string name = "");
    static Tensor full(Shape shape, double fill, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rank() const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only
    double item() const;       // single-element only

    const std::vector<double>& values() const;
    std::vector<double>& values_mut();  // in-place edits (optimizer steps on leaves)
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    void zero_grad();

    // Reverse pass from a scalar. Leaf gradients accumulate across calls;
    // interior gradients are reset each time.
    void backward() const;

    const NodePtr& node() const { return node_; }
    const std::string& name() const;

private:
    NodePtr node_;
};

// elementwise binary, broadcasting trailing dims (NumPy rules)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

// elementwise unary
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError on non-positive input
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);

// structure
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K]x[K,N]
Tensor transpose(const Tensor& a);                // rank-2
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);  // rank-2, [c0,c1)
Tensor concat_cols(const Tensor& a, const Tensor& b);                // rank-2
Tensor row_softmax(const Tensor& a);                                 // rank-2

// reductions to a scalar
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

enum class Reduction { Sum, Mean };

// Heteroscedastic gaussian negative log likelihood, fused forward/backward.
// var must already be strictly positive (softplus + floor upstream).
Tensor gaussian_nll(const Tensor& mu, const Tensor& var, const Tensor& target, Reduction reduction);

// Stable binary cross entropy taking raw logits.
Tensor binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& target,
                                        Reduction reduction);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace probcast::ad
