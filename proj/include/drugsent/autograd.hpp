#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "drugsent/tensor.hpp"

namespace drugsent::nn {

// Thread-local switch; ops built while disabled record no backward graph.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

struct Node {
    Tensor value;
    Tensor grad; // allocated on first use, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    Tensor& ensure_grad();
};

// Handle to a node in the dynamically built computation graph.
class Var {
  public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    // Gradient access is const: copies of a Var share the same node.
    Tensor& grad() const { return node_->ensure_grad(); }
    bool has_grad() const { return node_->grad.numel() > 0; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad();

    // Same values as a fresh leaf; gradients stop here.
    Var detach() const;

    std::shared_ptr<Node> node() const { return node_; }

  private:
    std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar root.
void backward(const Var& root);

Var add(const Var& a, const Var& b); // numpy-style broadcasting
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b); // elementwise, broadcasting
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b); // (...,m,k) x (...,k,n), leading broadcast
Var relu(const Var& a);
Var gelu(const Var& a); // erf form
Var softmax_lastdim(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);

// table (V,D); ids flattened with logical shape id_shape; out id_shape + {D}
Var embedding_rows(const Var& table, const std::vector<int>& ids,
                   const Shape& id_shape);

// x (B,T,D), w (F,K,D), bias (F) -> (B, T-K+1, F), valid windows only
Var conv1d_valid(const Var& x, const Var& w, const Var& bias);

// x (B,T,C) -> (B,C), max over positions; mask (B*T, 1 = keep) optional.
// A row whose mask is all zero falls back to max over every position.
Var max_over_time(const Var& x, const std::vector<std::uint8_t>* mask);

Var concat_lastdim(const std::vector<Var>& parts);
Var reshape(const Var& a, Shape shape);
Var permute(const Var& a, const std::vector<std::size_t>& axes);
Var dropout(const Var& a, double p, std::mt19937_64& rng);

// logits (B,C), labels in [0,C); mean cross-entropy as a scalar
Var cross_entropy_mean(const Var& logits, const std::vector<int>& labels);

Tensor uniform_init(const Shape& shape, double lo, double hi,
                    std::mt19937_64& rng);
Tensor normal_init(const Shape& shape, double stddev, std::mt19937_64& rng);

// Process-global generator for sources without an explicit seed.
std::mt19937_64& global_rng();

} // namespace drugsent::nn
