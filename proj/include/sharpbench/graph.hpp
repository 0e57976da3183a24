#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sharpbench/error.hpp"
#include "sharpbench/tensor.hpp"

namespace sharpbench {

// Reverse-mode tape built define-by-run. Nodes are appended in forward order;
// backward() replays them once in reverse and then marks the tape consumed.
// Leaves (tensors created outside any op) are never nodes; their gradients
// accumulate on the tensors themselves.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise("add", a, b); }
    Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise("sub", a, b); }
    Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise("mul", a, b); }

    Tensor scalar_mul(const Tensor& a, double c) {
        std::vector<double> out(a.numel());
        const auto& x = a.values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
        Tensor r(a.shape(), std::move(out), a.requires_grad());
        detail::check_all_finite("scalar_mul", r.values());
        return record("scalar_mul", r, {a}, [a, r, c]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = c * g[i];
            a.accumulate_grad(ga);
        });
    }

    Tensor matmul(const Tensor& a, const Tensor& b) {
        if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
            throw ShapeError("matmul: shapes " + detail::shape_to_string(a.shape()) + " and " +
                             detail::shape_to_string(b.shape()) + " do not conform");
        }
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        std::vector<double> out(m * n, 0.0);
        const auto& av = a.values();
        const auto& bv = b.values();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = av[i * k + p];
                for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
            }
        }
        Tensor r({m, n}, std::move(out), a.requires_grad() || b.requires_grad());
        detail::check_all_finite("matmul", r.values());
        return record("matmul", r, {a, b}, [a, b, r, m, k, n]() mutable {
            const auto& g = r.grad();
            const auto& av = a.values();
            const auto& bv = b.values();
            if (a.requires_grad()) {  // dA = g * B^T
                std::vector<double> ga(m * k, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gij = g[i * n + j];
                        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[p * n + j];
                    }
                a.accumulate_grad(ga);
            }
            if (b.requires_grad()) {  // dB = A^T * g
                std::vector<double> gb(k * n, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                    }
                b.accumulate_grad(gb);
            }
        });
    }

    Tensor relu(const Tensor& a) {
        std::vector<double> out(a.numel());
        const auto& x = a.values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
        Tensor r(a.shape(), std::move(out), a.requires_grad());
        return record("relu", r, {a}, [a, r]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            const auto& x = a.values();
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = x[i] > 0.0 ? g[i] : 0.0;
            a.accumulate_grad(ga);
        });
    }

    Tensor log(const Tensor& a) { return unary("log", a, [](double x) { return std::log(x); },
                                               [](double x, double) { return 1.0 / x; }); }

    Tensor exp(const Tensor& a) { return unary("exp", a, [](double x) { return std::exp(x); },
                                               [](double, double y) { return y; }); }

    Tensor tanh(const Tensor& a) { return unary("tanh", a, [](double x) { return std::tanh(x); },
                                                [](double, double y) { return 1.0 - y * y; }); }

    Tensor sum(const Tensor& a) { return reduce_all("sum", a, 1.0); }

    Tensor mean(const Tensor& a) {
        if (a.numel() == 0) throw ShapeError("mean: empty tensor");
        return reduce_all("mean", a, 1.0 / static_cast<double>(a.numel()));
    }

    // Row/column max with the reduced axis kept as size 1. Among tied maxima
    // the gradient flows to the lowest index.
    Tensor max_axis(const Tensor& a, int axis) {
        const auto [rows, cols, out_shape] = axis_layout("max_axis", a, axis);
        const auto& x = a.values();
        const std::size_t groups = (axis == 1) ? rows : cols;
        const std::size_t extent = (axis == 1) ? cols : rows;
        std::vector<double> out(groups);
        std::vector<std::size_t> arg(groups);
        for (std::size_t gidx = 0; gidx < groups; ++gidx) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (std::size_t e = 0; e < extent; ++e) {
                const double v = (axis == 1) ? x[gidx * cols + e] : x[e * cols + gidx];
                if (v > best) {
                    best = v;
                    best_i = e;
                }
            }
            out[gidx] = best;
            arg[gidx] = best_i;
        }
        Tensor r(out_shape, std::move(out), a.requires_grad());
        detail::check_all_finite("max_axis", r.values());
        return record("max_axis", r, {a},
                      [a, r, arg = std::move(arg), axis, rows, cols]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            std::vector<double> ga(a.numel(), 0.0);
            for (std::size_t gidx = 0; gidx < arg.size(); ++gidx) {
                if (axis == 1)
                    ga[gidx * cols + arg[gidx]] = g[gidx];
                else
                    ga[arg[gidx] * cols + gidx] = g[gidx];
            }
            a.accumulate_grad(ga);
        });
    }

    // Stable log-sum-exp along an axis (max-shifted), reduced axis kept as
    // size 1. Backward distributes the upstream gradient by softmax weights.
    Tensor logsumexp_axis(const Tensor& a, int axis) {
        const auto [rows, cols, out_shape] = axis_layout("logsumexp_axis", a, axis);
        const auto& x = a.values();
        const std::size_t groups = (axis == 1) ? rows : cols;
        const std::size_t extent = (axis == 1) ? cols : rows;
        std::vector<double> out(groups);
        for (std::size_t gidx = 0; gidx < groups; ++gidx) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < extent; ++e) {
                const double v = (axis == 1) ? x[gidx * cols + e] : x[e * cols + gidx];
                m = std::max(m, v);
            }
            double s = 0.0;
            for (std::size_t e = 0; e < extent; ++e) {
                const double v = (axis == 1) ? x[gidx * cols + e] : x[e * cols + gidx];
                s += std::exp(v - m);
            }
            out[gidx] = m + std::log(s);
        }
        Tensor r(out_shape, std::move(out), a.requires_grad());
        detail::check_all_finite("logsumexp_axis", r.values());
        return record("logsumexp_axis", r, {a}, [a, r, axis, rows, cols]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            const auto& x = a.values();
            const auto& lse = r.values();
            std::vector<double> ga(a.numel());
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) {
                    const std::size_t gidx = (axis == 1) ? i : j;
                    ga[i * cols + j] = g[gidx] * std::exp(x[i * cols + j] - lse[gidx]);
                }
            a.accumulate_grad(ga);
        });
    }

    // Picks entry (i, labels[i]) of each row into an n-by-1 column.
    Tensor index_select(const Tensor& a, const std::vector<int>& labels) {
        if (a.rank() != 2) {
            throw ShapeError("index_select: requires a matrix, got shape " +
                             detail::shape_to_string(a.shape()));
        }
        const std::size_t n = a.rows(), k = a.cols();
        if (labels.size() != n) {
            throw ShapeError("index_select: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(n) + " rows");
        }
        const auto& x = a.values();
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int y = labels[i];
            if (y < 0 || static_cast<std::size_t>(y) >= k) {
                throw Error("index_select: label " + std::to_string(y) + " out of range [0," +
                            std::to_string(k) + ") at row " + std::to_string(i));
            }
            out[i] = x[i * k + static_cast<std::size_t>(y)];
        }
        Tensor r({n, 1}, std::move(out), a.requires_grad());
        return record("index_select", r, {a}, [a, r, labels, k]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            std::vector<double> ga(a.numel(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i * k + static_cast<std::size_t>(labels[i])] = g[i];
            a.accumulate_grad(ga);
        });
    }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse insertion
    // order, once. The tape is consumed afterwards; a second call throws.
    void backward(const Tensor& loss) {
        if (consumed_) throw Error("backward: graph already consumed by a previous backward");
        if (loss.numel() != 1) {
            throw ShapeError("backward: loss must be scalar, got shape " +
                             detail::shape_to_string(loss.shape()));
        }
        const bool produced_here =
            std::any_of(nodes_.rbegin(), nodes_.rend(),
                        [&](const Node& n) { return n.out.same_storage(loss); });
        if (!produced_here) throw Error("backward: loss tensor was not produced by this graph");

        consumed_ = true;
        const double one = 1.0;
        loss.accumulate_grad(std::span<const double>(&one, 1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (!it->out.has_grad()) continue;  // dead branch, nothing flowed here
            it->back();
        }
        for (const Node& n : nodes_) {
            for (const Tensor& in : n.ins) {
                if (in.has_grad()) {
                    try {
                        detail::check_all_finite(n.op, in.grad());
                    } catch (const NumericError&) {
                        throw NumericError(std::string("non-finite gradient produced by op '") +
                                           n.op + "'");
                    }
                }
            }
        }
    }

private:
    struct Node {
        const char* op;
        Tensor out;
        std::vector<Tensor> ins;
        std::function<void()> back;
    };

    Tensor record(const char* op, Tensor out, std::vector<Tensor> ins, std::function<void()> back) {
        if (out.requires_grad()) {
            nodes_.push_back(Node{op, out, std::move(ins), std::move(back)});
        }
        return out;
    }

    Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b) {
        if (a.shape() != b.shape()) {
            throw ShapeError(std::string(op) + ": shapes " + detail::shape_to_string(a.shape()) +
                             " and " + detail::shape_to_string(b.shape()) + " differ");
        }
        const auto& x = a.values();
        const auto& y = b.values();
        std::vector<double> out(x.size());
        const char kind = op[0];  // 'a', 's', 'm'
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = kind == 'a' ? x[i] + y[i] : kind == 's' ? x[i] - y[i] : x[i] * y[i];
        }
        Tensor r(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
        detail::check_all_finite(op, r.values());
        return record(op, r, {a, b}, [a, b, r, kind]() mutable {
            const auto& g = r.grad();
            if (a.requires_grad()) {
                if (kind == 'm') {
                    const auto& y = b.values();
                    std::vector<double> ga(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i];
                    a.accumulate_grad(ga);
                } else {
                    a.accumulate_grad(g);
                }
            }
            if (b.requires_grad()) {
                if (kind == 'm') {
                    const auto& x = a.values();
                    std::vector<double> gb(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * x[i];
                    b.accumulate_grad(gb);
                } else if (kind == 's') {
                    std::vector<double> gb(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                    b.accumulate_grad(gb);
                } else {
                    b.accumulate_grad(g);
                }
            }
        });
    }

    template <class Fwd, class Bwd>
    Tensor unary(const char* op, const Tensor& a, Fwd fwd, Bwd dydx) {
        const auto& x = a.values();
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
        Tensor r(a.shape(), std::move(out), a.requires_grad());
        detail::check_all_finite(op, r.values());
        return record(op, r, {a}, [a, r, dydx]() mutable {
            if (!a.requires_grad()) return;
            const auto& g = r.grad();
            const auto& x = a.values();
            const auto& y = r.values();
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * dydx(x[i], y[i]);
            a.accumulate_grad(ga);
        });
    }

    Tensor reduce_all(const char* op, const Tensor& a, double scale) {
        if (a.numel() == 0) throw ShapeError(std::string(op) + ": empty tensor");
        double acc = 0.0;
        for (const double v : a.values()) acc += v;
        Tensor r = Tensor::scalar(acc * scale, a.requires_grad());
        detail::check_all_finite(op, r.values());
        return record(op, r, {a}, [a, r, scale]() mutable {
            if (!a.requires_grad()) return;
            const double g = r.grad()[0] * scale;
            std::vector<double> ga(a.numel(), g);
            a.accumulate_grad(ga);
        });
    }

    struct AxisLayout {
        std::size_t rows, cols;
        std::vector<std::size_t> out_shape;
    };

    AxisLayout axis_layout(const char* op, const Tensor& a, int axis) const {
        if (a.rank() != 2) {
            throw ShapeError(std::string(op) + ": requires a matrix, got shape " +
                             detail::shape_to_string(a.shape()));
        }
        if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
        if (a.numel() == 0) throw ShapeError(std::string(op) + ": empty tensor");
        const std::size_t rows = a.rows(), cols = a.cols();
        std::vector<std::size_t> out_shape =
            (axis == 1) ? std::vector<std::size_t>{rows, 1} : std::vector<std::size_t>{1, cols};
        return {rows, cols, std::move(out_shape)};
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace sharpbench
