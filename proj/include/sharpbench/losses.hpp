#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sharpbench/error.hpp"
#include "sharpbench/graph.hpp"
#include "sharpbench/tensor.hpp"

namespace sharpbench {

// Shift constant gamma = log(e - 1) that makes the shifted-log bound pass
// through the origin: phi(0) = -log(1 + e^gamma) + 1 = 0.
inline double phi_shift_constant() { return std::log(std::exp(1.0) - 1.0); }

enum class SurrogateKind { Tanh, ShiftedLog };

// Which lower bound of the step function I{x > 0} the maximizing player uses,
// plus its constants.
//   Tanh:       phi(x) = tanh(alpha * x)
//   ShiftedLog: phi(x) = -log(1 + e^(gamma - x)) + 1,  gamma = log(e - 1)
struct SurrogateSpec {
    SurrogateKind kind = SurrogateKind::ShiftedLog;
    double alpha = 0.1;  // tanh slope
    double mu = 1.0;     // log-sum-exp temperature
    double phi_shift = 0.0;

    static SurrogateSpec tanh_default() {
        SurrogateSpec s;
        s.kind = SurrogateKind::Tanh;
        s.alpha = 0.1;
        s.mu = 10.0;
        return s;
    }

    static SurrogateSpec shifted_log_default() {
        SurrogateSpec s;
        s.kind = SurrogateKind::ShiftedLog;
        s.mu = 1.0;
        s.phi_shift = phi_shift_constant();
        return s;
    }

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("surrogate.alpha must be positive");
        if (!(mu > 0.0)) throw ConfigError("surrogate.mu must be positive");
        if (kind == SurrogateKind::ShiftedLog &&
            std::abs(phi_shift - phi_shift_constant()) > 1e-15) {
            throw ConfigError("surrogate.phi_shift must equal log(e-1) for the shifted-log bound");
        }
    }

    const char* name() const { return kind == SurrogateKind::Tanh ? "tanh" : "log"; }
};

namespace detail {

// Lowest index wins ties.
inline std::size_t argmax_row(const std::vector<double>& data, std::size_t row, std::size_t k) {
    std::size_t best = 0;
    double best_v = data[row * k];
    for (std::size_t j = 1; j < k; ++j) {
        const double v = data[row * k + j];
        if (v > best_v) {
            best_v = v;
            best = j;
        }
    }
    return best;
}

inline void check_labels(const std::vector<int>& labels, std::size_t n, std::size_t k,
                         const char* who) {
    if (labels.size() != n) {
        throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw Error(std::string(who) + ": label " + std::to_string(labels[i]) +
                        " out of range [0," + std::to_string(k) + ") at row " + std::to_string(i));
        }
    }
}

inline double stable_softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

}  // namespace detail

// Fraction of rows whose argmax (ties broken toward the lowest index) differs
// from the label. A tie with the true class counts as correct only when the
// true class is the lowest tied index.
inline double zero_one_loss(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), k = logits.cols();
    if (k < 2) throw Error("zero_one_loss: needs at least 2 classes, got " + std::to_string(k));
    detail::check_labels(labels, n, k, "zero_one_loss");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (detail::argmax_row(logits.values(), i, k) != static_cast<std::size_t>(labels[i]))
            ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(n);
}

// Mean over the batch of -sum_j q_j log softmax(logits)_j with the smoothed
// target q = (1-smoothing) * onehot + smoothing / K. Written as
// lse(logits_i) - sum_j q_ij logits_ij, which the stable logsumexp keeps
// overflow-free.
inline Tensor cross_entropy_smoothed(Graph& g, const Tensor& logits,
                                     const std::vector<int>& labels, double smoothing) {
    const std::size_t n = logits.rows(), k = logits.cols();
    detail::check_labels(labels, n, k, "cross_entropy_smoothed");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) {
        throw ConfigError("cross_entropy_smoothed: smoothing must lie in [0,1), got " +
                          std::to_string(smoothing));
    }
    detail::check_all_finite("cross_entropy_smoothed input", logits.values());

    std::vector<double> target(n * k, smoothing / static_cast<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        target[i * k + static_cast<std::size_t>(labels[i])] += 1.0 - smoothing;
    }
    Tensor lse = g.logsumexp_axis(logits, 1);                                // n x 1
    Tensor dots = g.matmul(g.mul(logits, Tensor({n, k}, std::move(target))),  // n x 1
                           Tensor::full({k, 1}, 1.0));
    return g.mean(g.sub(lse, dots));
}

// Scalar lower bound of the step function I{x > 0}.
inline double phi(const SurrogateSpec& spec, double x) {
    if (spec.kind == SurrogateKind::Tanh) return std::tanh(spec.alpha * x);
    return 1.0 - detail::stable_softplus(spec.phi_shift - x);
}

// Differentiable phi applied elementwise on the tape. The shifted-log kind is
// composed as 1 - (relu(t) + log(1 + e^-|t|)) with t = gamma - x, the
// softplus form that cannot overflow for large |t|.
inline Tensor phi_on_graph(Graph& g, const SurrogateSpec& spec, const Tensor& x) {
    if (spec.kind == SurrogateKind::Tanh) return g.tanh(g.scalar_mul(x, spec.alpha));
    Tensor t = g.sub(Tensor::full(x.shape(), spec.phi_shift), x);
    Tensor pos = g.relu(t);
    Tensor abs = g.add(pos, g.relu(g.scalar_mul(t, -1.0)));
    Tensor soft = g.add(pos, g.log(g.add(Tensor::full(x.shape(), 1.0),
                                         g.exp(g.scalar_mul(abs, -1.0)))));
    return g.sub(Tensor::full(x.shape(), 1.0), soft);
}

// Per-class logit gaps F_ij = logits_ij - logits_{i, y_i}; column y_i is
// exactly zero. Differentiable pass-through.
inline Tensor margin_matrix(Graph& g, const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), k = logits.cols();
    detail::check_labels(labels, n, k, "margin_matrix");
    Tensor picked = g.index_select(logits, labels);                // n x 1
    Tensor tiled = g.matmul(picked, Tensor::full({1, k}, 1.0));    // n x K
    return g.sub(logits, tiled);
}

// Perturbation objective: mean_i (1/mu) log sum_j exp(mu * phi(F_ij)).
inline Tensor q_loss(Graph& g, const Tensor& logits, const std::vector<int>& labels,
                     const SurrogateSpec& spec) {
    spec.validate();
    if (logits.rows() == 0) throw ShapeError("q_loss: empty batch");
    detail::check_all_finite("q_loss input", logits.values());
    Tensor margins = margin_matrix(g, logits, labels);
    Tensor scaled = g.scalar_mul(phi_on_graph(g, spec, margins), spec.mu);
    Tensor lse = g.logsumexp_axis(scaled, 1);  // n x 1
    return g.mean(g.scalar_mul(lse, 1.0 / spec.mu));
}

// Per-row values of the same objective, computed without a tape. Used for
// data selection gains, where no gradient is needed.
inline std::vector<double> q_loss_per_sample(const Tensor& logits, const std::vector<int>& labels,
                                             const SurrogateSpec& spec) {
    spec.validate();
    const std::size_t n = logits.rows(), k = logits.cols();
    detail::check_labels(labels, n, k, "q_loss_per_sample");
    const auto& x = logits.values();
    std::vector<double> out(n);
    std::vector<double> scaled(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double pivot = x[i * k + static_cast<std::size_t>(labels[i])];
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            scaled[j] = spec.mu * phi(spec, x[i * k + j] - pivot);
            m = std::max(m, scaled[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(scaled[j] - m);
        out[i] = (m + std::log(s)) / spec.mu;
    }
    return out;
}

// Evaluation of the two-option adversary comparison. The option vectors are
// read as probabilities for cross-entropy (-log p_true) and as raw logits for
// the tanh margin bound; the margin is taken over the wrong classes only.
struct CounterexampleReport {
    double ce_a = 0.0;
    double ce_b = 0.0;
    double phi_a = 0.0;
    double phi_b = 0.0;
    char ce_prefers = '?';
    char phi_prefers = '?';
};

inline CounterexampleReport counterexample_eval(int k, double delta) {
    if (k < 3) throw ConfigError("counterexample: K must be at least 3, got " + std::to_string(k));
    const double limit = std::min(0.5, 1.0 / static_cast<double>(k));
    if (!(delta > 0.0 && delta < limit)) {
        throw ConfigError("counterexample: delta must lie in (0, " + std::to_string(limit) +
                          "), got " + std::to_string(delta));
    }
    const std::size_t kk = static_cast<std::size_t>(k);
    std::vector<double> option_a(kk, 1.0 / k);
    option_a[0] += delta;
    option_a[1] -= delta;
    std::vector<double> option_b(kk, 0.0);
    option_b[0] = 0.5 - delta;
    option_b[1] = 0.5 + delta;

    CounterexampleReport r;
    r.ce_a = -std::log(option_a[0]);
    r.ce_b = -std::log(option_b[0]);
    auto best_wrong_margin = [](const std::vector<double>& z) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 1; j < z.size(); ++j) best = std::max(best, z[j] - z[0]);
        return best;
    };
    r.phi_a = std::tanh(best_wrong_margin(option_a));
    r.phi_b = std::tanh(best_wrong_margin(option_b));
    r.ce_prefers = r.ce_a > r.ce_b ? 'A' : 'B';
    r.phi_prefers = r.phi_b > r.phi_a ? 'B' : 'A';
    return r;
}

}  // namespace sharpbench
