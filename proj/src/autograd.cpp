#include "drugsent/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace drugsent::nn {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backprop) {
    Var out(std::move(value));
    bool rg = false;
    for (const Var& p : parents) rg = rg || p.requires_grad();
    if (g_grad_enabled && rg) {
        out.node()->requires_grad = true;
        for (const Var& p : parents) out.node()->parents.push_back(p.node());
        out.node()->backprop = std::move(backprop);
    }
    return out;
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor& Node::ensure_grad() {
    if (grad.numel() == 0) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
    if (node_ && node_->grad.numel() > 0) node_->grad.fill(0.0);
}

Var Var::detach() const {
    return Var(node_->value, false);
}

void backward(const Var& root) {
    if (!root.defined() || root.value().numel() != 1) {
        throw std::logic_error("backward requires a defined scalar root");
    }
    // Iterative topological order over the parent DAG.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backprop && node->grad.numel() > 0) {
            node->backprop(*node);
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise / broadcasting ops
// ---------------------------------------------------------------------------

namespace {

template <typename Fwd>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, Fwd&& f) {
    Shape out_shape = Tensor::broadcast(a.shape(), b.shape());
    Tensor out(out_shape);
    const std::size_t rank = out_shape.size();
    const auto sa = broadcast_strides(a.shape(), rank, out_shape);
    const auto sb = broadcast_strides(b.shape(), rank, out_shape);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < out.numel(); ++flat) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            ia += idx[d] * sa[d];
            ib += idx[d] * sb[d];
        }
        out[flat] = f(a[ia], b[ib]);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

// dL/da for `out = f(a,b)` where per-element da = w(a_val,b_val) * dout.
template <typename W>
void broadcast_backprop(Node& out, const Var& a, const Var& b, W&& weight_a) {
    if (!a.requires_grad()) return;
    const Tensor& g = out.grad;
    const Shape& out_shape = out.value.shape();
    const std::size_t rank = out_shape.size();
    const auto sa = broadcast_strides(a.value().shape(), rank, out_shape);
    const auto sb = broadcast_strides(b.value().shape(), rank, out_shape);
    Tensor& ga = a.grad();
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < g.numel(); ++flat) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            ia += idx[d] * sa[d];
            ib += idx[d] * sb[d];
        }
        ga[ia] += weight_a(a.value()[ia], b.value()[ib]) * g[flat];
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
}

} // namespace

Var add(const Var& a, const Var& b) {
    Tensor out = broadcast_apply(a.value(), b.value(),
                                 [](double x, double y) { return x + y; });
    return make_result(std::move(out), {a, b}, [a, b](Node& n) {
        broadcast_backprop(n, a, b, [](double, double) { return 1.0; });
        broadcast_backprop(n, b, a, [](double, double) { return 1.0; });
    });
}

Var sub(const Var& a, const Var& b) {
    Tensor out = broadcast_apply(a.value(), b.value(),
                                 [](double x, double y) { return x - y; });
    return make_result(std::move(out), {a, b}, [a, b](Node& n) {
        broadcast_backprop(n, a, b, [](double, double) { return 1.0; });
        broadcast_backprop(n, b, a, [](double, double) { return -1.0; });
    });
}

Var mul(const Var& a, const Var& b) {
    Tensor out = broadcast_apply(a.value(), b.value(),
                                 [](double x, double y) { return x * y; });
    return make_result(std::move(out), {a, b}, [a, b](Node& n) {
        broadcast_backprop(n, a, b, [](double, double y) { return y; });
        broadcast_backprop(n, b, a, [](double, double y) { return y; });
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return make_result(std::move(out), {a}, [a, s](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            ga[i] += s * n.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Matrix multiplication with broadcast leading dimensions
// ---------------------------------------------------------------------------

namespace {

struct MatmulDims {
    std::size_t m, k, n;
    Shape lead_out;
    std::vector<std::size_t> lead_sa, lead_sb; // strides in batches
    std::size_t batches;
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw std::invalid_argument("matmul operands must have rank >= 2");
    }
    MatmulDims d;
    d.m = a.dim(a.rank() - 2);
    d.k = a.dim(a.rank() - 1);
    d.n = b.dim(b.rank() - 1);
    if (b.dim(b.rank() - 2) != d.k) {
        throw std::invalid_argument("matmul inner dimension mismatch: " +
                                    shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    Shape la(a.shape().begin(), a.shape().end() - 2);
    Shape lb(b.shape().begin(), b.shape().end() - 2);
    d.lead_out = Tensor::broadcast(la, lb);
    d.batches = shape_numel(d.lead_out);
    d.lead_sa = broadcast_strides(la, d.lead_out.size(), d.lead_out);
    d.lead_sb = broadcast_strides(lb, d.lead_out.size(), d.lead_out);
    return d;
}

void batch_offsets(const MatmulDims& d, std::size_t batch, std::size_t& oa,
                   std::size_t& ob) {
    oa = ob = 0;
    std::size_t rem = batch;
    for (std::size_t ax = d.lead_out.size(); ax-- > 0;) {
        std::size_t coord = rem % d.lead_out[ax];
        rem /= d.lead_out[ax];
        oa += coord * d.lead_sa[ax];
        ob += coord * d.lead_sb[ax];
    }
}

} // namespace

Var matmul(const Var& a, const Var& b) {
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    MatmulDims d = matmul_dims(ta, tb);
    Shape out_shape = d.lead_out;
    out_shape.push_back(d.m);
    out_shape.push_back(d.n);
    Tensor out(out_shape, 0.0);

    const std::size_t a_mat = d.m * d.k;
    const std::size_t b_mat = d.k * d.n;
    const std::size_t o_mat = d.m * d.n;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (d.batches * o_mat > 4096)
#endif
    for (long long batch = 0; batch < static_cast<long long>(d.batches);
         ++batch) {
        std::size_t oa, ob;
        batch_offsets(d, static_cast<std::size_t>(batch), oa, ob);
        const double* pa = ta.data() + oa * a_mat;
        const double* pb = tb.data() + ob * b_mat;
        double* po = out.data() + static_cast<std::size_t>(batch) * o_mat;
        for (std::size_t i = 0; i < d.m; ++i) {
            for (std::size_t kk = 0; kk < d.k; ++kk) {
                const double av = pa[i * d.k + kk];
                if (av == 0.0) continue;
                const double* pbk = pb + kk * d.n;
                double* poi = po + i * d.n;
                for (std::size_t j = 0; j < d.n; ++j) {
                    poi[j] += av * pbk[j];
                }
            }
        }
    }

    return make_result(std::move(out), {a, b}, [a, b, d](Node& node) {
        const Tensor& g = node.grad;
        const std::size_t a_mat = d.m * d.k;
        const std::size_t b_mat = d.k * d.n;
        const std::size_t o_mat = d.m * d.n;
        const Tensor& ta = a.value();
        const Tensor& tb = b.value();
        if (a.requires_grad()) {
            Tensor& ga = a.grad();
            for (std::size_t batch = 0; batch < d.batches; ++batch) {
                std::size_t oa, ob;
                batch_offsets(d, batch, oa, ob);
                const double* pg = g.data() + batch * o_mat;
                const double* pb = tb.data() + ob * b_mat;
                double* pga = ga.data() + oa * a_mat;
                // dA = dC * B^T
                for (std::size_t i = 0; i < d.m; ++i) {
                    for (std::size_t j = 0; j < d.n; ++j) {
                        const double gv = pg[i * d.n + j];
                        if (gv == 0.0) continue;
                        for (std::size_t kk = 0; kk < d.k; ++kk) {
                            pga[i * d.k + kk] += gv * pb[kk * d.n + j];
                        }
                    }
                }
            }
        }
        if (b.requires_grad()) {
            Tensor& gb = b.grad();
            for (std::size_t batch = 0; batch < d.batches; ++batch) {
                std::size_t oa, ob;
                batch_offsets(d, batch, oa, ob);
                const double* pg = g.data() + batch * o_mat;
                const double* pa = ta.data() + oa * a_mat;
                double* pgb = gb.data() + ob * b_mat;
                // dB = A^T * dC
                for (std::size_t kk = 0; kk < d.k; ++kk) {
                    for (std::size_t i = 0; i < d.m; ++i) {
                        const double av = pa[i * d.k + kk];
                        if (av == 0.0) continue;
                        const double* pgi = pg + i * d.n;
                        double* pgbk = pgb + kk * d.n;
                        for (std::size_t j = 0; j < d.n; ++j) {
                            pgbk[j] += av * pgi[j];
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Var relu(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (out[i] < 0.0) out[i] = 0.0;
    }
    return make_result(std::move(out), {a}, [a](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        const Tensor& x = a.value();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (x[i] > 0.0) ga[i] += n.grad[i];
        }
    });
}

Var gelu(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = 0.5 * out[i] * (1.0 + std::erf(out[i] * kInvSqrt2));
    }
    return make_result(std::move(out), {a}, [a](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        const Tensor& x = a.value();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            const double xi = x[i];
            const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
            ga[i] += (cdf + xi * pdf) * n.grad[i];
        }
    });
}

Var softmax_lastdim(const Var& a) {
    const Tensor& x = a.value();
    if (x.rank() == 0) throw std::invalid_argument("softmax needs rank >= 1");
    const std::size_t cols = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / cols;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* px = x.data() + r * cols;
        double* po = out.data() + r * cols;
        double mx = px[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, px[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            po[c] = std::exp(px[c] - mx);
            sum += po[c];
        }
        for (std::size_t c = 0; c < cols; ++c) po[c] /= sum;
    }
    return make_result(std::move(out), {a}, [a, rows, cols](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = n.value.data() + r * cols;
            const double* gy = n.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
            double* pga = ga.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                pga[c] += y[c] * (gy[c] - dot);
            }
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Tensor& t = x.value();
    const std::size_t cols = t.dim(t.rank() - 1);
    const std::size_t rows = t.numel() / cols;
    if (gamma.value().numel() != cols || beta.value().numel() != cols) {
        throw std::invalid_argument("layer_norm parameter size mismatch");
    }
    Tensor out(t.shape());
    Tensor xhat(t.shape());
    Tensor inv_std({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* px = t.data() + r * cols;
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += px[c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = px[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        double* ph = xhat.data() + r * cols;
        double* po = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            ph[c] = (px[c] - mean) * is;
            po[c] = ph[c] * gamma.value()[c] + beta.value()[c];
        }
    }
    return make_result(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, rows, cols](Node& n) {
            const Tensor& g = n.grad;
            if (gamma.requires_grad()) {
                Tensor& gg = gamma.grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        gg[c] += g[r * cols + c] * xhat[r * cols + c];
                    }
                }
            }
            if (beta.requires_grad()) {
                Tensor& gb = beta.grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        gb[c] += g[r * cols + c];
                    }
                }
            }
            if (x.requires_grad()) {
                Tensor& gx = x.grad();
                const double inv_cols = 1.0 / static_cast<double>(cols);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * cols;
                    const double* hr = xhat.data() + r * cols;
                    double mean_dxhat = 0.0, mean_dxhat_h = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double dxhat = gr[c] * gamma.value()[c];
                        mean_dxhat += dxhat;
                        mean_dxhat_h += dxhat * hr[c];
                    }
                    mean_dxhat *= inv_cols;
                    mean_dxhat_h *= inv_cols;
                    double* pgx = gx.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double dxhat = gr[c] * gamma.value()[c];
                        pgx[c] += inv_std[r] *
                                  (dxhat - mean_dxhat - hr[c] * mean_dxhat_h);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

Var embedding_rows(const Var& table, const std::vector<int>& ids,
                   const Shape& id_shape) {
    const Tensor& t = table.value();
    if (t.rank() != 2) {
        throw std::invalid_argument("embedding table must be 2-D");
    }
    if (ids.size() != shape_numel(id_shape)) {
        throw std::invalid_argument("id count does not match id shape");
    }
    const std::size_t vocab = t.dim(0);
    const std::size_t dim = t.dim(1);
    Shape out_shape = id_shape;
    out_shape.push_back(dim);
    Tensor out(out_shape);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            throw std::out_of_range("token id " + std::to_string(id) +
                                    " outside vocabulary of size " +
                                    std::to_string(vocab));
        }
        const double* src = t.data() + static_cast<std::size_t>(id) * dim;
        std::copy(src, src + dim, out.data() + i * dim);
    }
    return make_result(std::move(out), {table}, [table, ids, dim](Node& n) {
        if (!table.requires_grad()) return;
        Tensor& gt = table.grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            double* dst = gt.data() + static_cast<std::size_t>(ids[i]) * dim;
            const double* src = n.grad.data() + i * dim;
            for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
        }
    });
}

Var conv1d_valid(const Var& x, const Var& w, const Var& bias) {
    const Tensor& tx = x.value();
    const Tensor& tw = w.value();
    if (tx.rank() != 3 || tw.rank() != 3) {
        throw std::invalid_argument("conv1d expects x (B,T,D) and w (F,K,D)");
    }
    const std::size_t B = tx.dim(0), T = tx.dim(1), D = tx.dim(2);
    const std::size_t F = tw.dim(0), K = tw.dim(1);
    if (tw.dim(2) != D) {
        throw std::invalid_argument("conv1d channel mismatch");
    }
    if (K > T) {
        throw std::invalid_argument("conv1d filter width " +
                                    std::to_string(K) +
                                    " exceeds sequence length " +
                                    std::to_string(T));
    }
    if (bias.value().numel() != F) {
        throw std::invalid_argument("conv1d bias size mismatch");
    }
    const std::size_t TO = T - K + 1;
    Tensor out({B, TO, F});
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (B * TO * F > 4096)
#endif
    for (long long b = 0; b < static_cast<long long>(B); ++b) {
        for (std::size_t t = 0; t < TO; ++t) {
            const double* window = tx.data() + (b * T + t) * D;
            double* po = out.data() + (b * TO + t) * F;
            for (std::size_t f = 0; f < F; ++f) {
                const double* pw = tw.data() + f * K * D;
                double acc = bias.value()[f];
                for (std::size_t i = 0; i < K * D; ++i) {
                    acc += window[i] * pw[i];
                }
                po[f] = acc;
            }
        }
    }
    return make_result(
        std::move(out), {x, w, bias}, [x, w, bias, B, T, D, F, K, TO](Node& n) {
            const Tensor& g = n.grad;
            if (x.requires_grad()) {
                Tensor& gx = x.grad();
                for (std::size_t b = 0; b < B; ++b) {
                    for (std::size_t t = 0; t < TO; ++t) {
                        const double* pg = g.data() + (b * TO + t) * F;
                        double* window = gx.data() + (b * T + t) * D;
                        for (std::size_t f = 0; f < F; ++f) {
                            const double gv = pg[f];
                            if (gv == 0.0) continue;
                            const double* pw = w.value().data() + f * K * D;
                            for (std::size_t i = 0; i < K * D; ++i) {
                                window[i] += gv * pw[i];
                            }
                        }
                    }
                }
            }
            if (w.requires_grad()) {
                Tensor& gw = w.grad();
                for (std::size_t b = 0; b < B; ++b) {
                    for (std::size_t t = 0; t < TO; ++t) {
                        const double* pg = g.data() + (b * TO + t) * F;
                        const double* window = x.value().data() + (b * T + t) * D;
                        for (std::size_t f = 0; f < F; ++f) {
                            const double gv = pg[f];
                            if (gv == 0.0) continue;
                            double* pgw = gw.data() + f * K * D;
                            for (std::size_t i = 0; i < K * D; ++i) {
                                pgw[i] += gv * window[i];
                            }
                        }
                    }
                }
            }
            if (bias.requires_grad()) {
                Tensor& gb = bias.grad();
                for (std::size_t b = 0; b < B; ++b) {
                    for (std::size_t t = 0; t < TO; ++t) {
                        const double* pg = g.data() + (b * TO + t) * F;
                        for (std::size_t f = 0; f < F; ++f) gb[f] += pg[f];
                    }
                }
            }
        });
}

Var max_over_time(const Var& x, const std::vector<std::uint8_t>* mask) {
    const Tensor& t = x.value();
    if (t.rank() != 3) {
        throw std::invalid_argument("max_over_time expects (B,T,C)");
    }
    const std::size_t B = t.dim(0), T = t.dim(1), C = t.dim(2);
    if (mask && mask->size() != B * T) {
        throw std::invalid_argument("mask size mismatch in max_over_time");
    }
    Tensor out({B, C});
    std::vector<std::size_t> argmax(B * C);
    for (std::size_t b = 0; b < B; ++b) {
        bool any_valid = false;
        if (mask) {
            for (std::size_t tt = 0; tt < T; ++tt) {
                if ((*mask)[b * T + tt]) { any_valid = true; break; }
            }
        }
        const bool use_mask = mask != nullptr && any_valid;
        for (std::size_t c = 0; c < C; ++c) {
            double best = 0.0;
            std::size_t best_t = T; // sentinel: none yet
            for (std::size_t tt = 0; tt < T; ++tt) {
                if (use_mask && !(*mask)[b * T + tt]) continue;
                const double v = t[(b * T + tt) * C + c];
                if (best_t == T || v > best) {
                    best = v;
                    best_t = tt;
                }
            }
            out[b * C + c] = best;
            argmax[b * C + c] = best_t;
        }
    }
    return make_result(std::move(out), {x},
                       [x, argmax, B, T, C](Node& n) {
                           if (!x.requires_grad()) return;
                           Tensor& gx = x.grad();
                           for (std::size_t b = 0; b < B; ++b) {
                               for (std::size_t c = 0; c < C; ++c) {
                                   const std::size_t tt = argmax[b * C + c];
                                   gx[(b * T + tt) * C + c] +=
                                       n.grad[b * C + c];
                               }
                           }
                       });
}

Var concat_lastdim(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_lastdim of nothing");
    }
    const Shape& first = parts[0].value().shape();
    Shape lead(first.begin(), first.end() - 1);
    std::size_t total_last = 0;
    for (const Var& p : parts) {
        const Shape& s = p.value().shape();
        if (Shape(s.begin(), s.end() - 1) != lead) {
            throw std::invalid_argument("concat_lastdim leading-dim mismatch");
        }
        total_last += s.back();
    }
    const std::size_t rows = shape_numel(lead);
    Shape out_shape = lead;
    out_shape.push_back(total_last);
    Tensor out(out_shape);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const std::size_t w = p.value().shape().back();
        offsets.push_back(off);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = p.value().data() + r * w;
            std::copy(src, src + w, out.data() + r * total_last + off);
        }
        off += w;
    }
    return make_result(std::move(out), parts,
                       [parts, offsets, rows, total_last](Node& n) {
                           for (std::size_t pi = 0; pi < parts.size(); ++pi) {
                               const Var& p = parts[pi];
                               if (!p.requires_grad()) continue;
                               const std::size_t w = p.value().shape().back();
                               Tensor& gp = p.grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                   const double* src = n.grad.data() +
                                                       r * total_last +
                                                       offsets[pi];
                                   double* dst = gp.data() + r * w;
                                   for (std::size_t c = 0; c < w; ++c) {
                                       dst[c] += src[c];
                                   }
                               }
                           }
                       });
}

Var reshape(const Var& a, Shape shape) {
    if (shape_numel(shape) != a.value().numel()) {
        throw std::invalid_argument("reshape element count mismatch");
    }
    Tensor out(std::move(shape), a.value().vec());
    return make_result(std::move(out), {a}, [a](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            ga[i] += n.grad[i];
        }
    });
}

namespace {

Tensor permute_tensor(const Tensor& t, const std::vector<std::size_t>& axes) {
    const std::size_t rank = t.rank();
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) out_shape[i] = t.dim(axes[i]);
    Tensor out(out_shape);
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t i = rank - 1; i-- > 0;) {
        in_strides[i] = in_strides[i + 1] * t.dim(i + 1);
    }
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < out.numel(); ++flat) {
        std::size_t src = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            src += idx[d] * in_strides[axes[d]];
        }
        out[flat] = t[src];
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

} // namespace

Var permute(const Var& a, const std::vector<std::size_t>& axes) {
    const std::size_t rank = a.value().rank();
    if (axes.size() != rank) {
        throw std::invalid_argument("permute axes rank mismatch");
    }
    Tensor out = permute_tensor(a.value(), axes);
    return make_result(std::move(out), {a}, [a, axes, rank](Node& n) {
        if (!a.requires_grad()) return;
        std::vector<std::size_t> inverse(rank);
        for (std::size_t i = 0; i < rank; ++i) inverse[axes[i]] = i;
        Tensor back = permute_tensor(n.grad, inverse);
        Tensor& ga = a.grad();
        for (std::size_t i = 0; i < back.numel(); ++i) ga[i] += back[i];
    });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
    std::bernoulli_distribution keep(1.0 - p);
    const double inv_keep = 1.0 / (1.0 - p);
    std::vector<std::uint8_t> kept(a.value().numel());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        kept[i] = keep(rng) ? 1 : 0;
        out[i] = kept[i] ? out[i] * inv_keep : 0.0;
    }
    return make_result(std::move(out), {a}, [a, kept, inv_keep](Node& n) {
        if (!a.requires_grad()) return;
        Tensor& ga = a.grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) {
            if (kept[i]) ga[i] += n.grad[i] * inv_keep;
        }
    });
}

Var cross_entropy_mean(const Var& logits, const std::vector<int>& labels) {
    const Tensor& t = logits.value();
    if (t.rank() != 2) {
        throw std::invalid_argument("cross entropy expects logits (B,C)");
    }
    const std::size_t B = t.dim(0), C = t.dim(1);
    if (labels.size() != B) {
        throw std::invalid_argument("label count does not match batch size");
    }
    Tensor probs({B, C});
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= C) {
            throw std::out_of_range("label out of range: " +
                                    std::to_string(label));
        }
        const double* row = t.data() + b * C;
        double mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            probs[b * C + c] = std::exp(row[c] - mx);
            sum += probs[b * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) probs[b * C + c] /= sum;
        loss += std::log(sum) + mx - row[label];
    }
    loss /= static_cast<double>(B);
    return make_result(
        Tensor::scalar(loss), {logits}, [logits, probs, labels, B, C](Node& n) {
            if (!logits.requires_grad()) return;
            const double g = n.grad[0] / static_cast<double>(B);
            Tensor& gl = logits.grad();
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t c = 0; c < C; ++c) {
                    const double onehot =
                        static_cast<std::size_t>(labels[b]) == c ? 1.0 : 0.0;
                    gl[b * C + c] += g * (probs[b * C + c] - onehot);
                }
            }
        });
}

Tensor uniform_init(const Shape& shape, double lo, double hi,
                    std::mt19937_64& rng) {
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

Tensor normal_init(const Shape& shape, double stddev, std::mt19937_64& rng) {
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

std::mt19937_64& global_rng() {
    static std::mt19937_64 rng(0x5eedULL);
    return rng;
}

} // namespace drugsent::nn
