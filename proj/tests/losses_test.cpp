#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sharpbench/losses.hpp"
#include "sharpbench/rng.hpp"
#include "support/finite_diff.hpp"

using namespace sharpbench;

namespace {

Tensor random_logits(Rng& rng, std::size_t n, std::size_t k, double scale = 3.0) {
    std::vector<double> v(n * k);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return Tensor({n, k}, std::move(v));
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int k) {
    std::vector<int> y(n);
    for (int& l : y) l = rng.uniform_int(0, k - 1);
    return y;
}

// From-scratch softmax cross-entropy used as the oracle for the smoothing=0
// reduction; shares no code with the tape path.
double ce_direct(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), k = logits.cols();
    const auto& x = logits.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = x[i * k];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, x[i * k + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(x[i * k + j] - m);
        acc += -(x[i * k + static_cast<std::size_t>(labels[i])] - m - std::log(s));
    }
    return acc / static_cast<double>(n);
}

TEST(ZeroOneLoss, AllCorrect) {
    Tensor logits({2, 2}, {2, 1, 0, 3});
    EXPECT_DOUBLE_EQ(zero_one_loss(logits, {0, 1}), 0.0);
}

TEST(ZeroOneLoss, SingleMisclassification) {
    EXPECT_DOUBLE_EQ(zero_one_loss(Tensor({1, 2}, {1, 2}), {0}), 1.0);
}

TEST(ZeroOneLoss, TieGoesToLowestIndex) {
    Tensor tied({1, 3}, {5.0, 5.0, 1.0});
    EXPECT_DOUBLE_EQ(zero_one_loss(tied, {0}), 0.0);
    EXPECT_DOUBLE_EQ(zero_one_loss(tied, {1}), 1.0);
}

TEST(ZeroOneLoss, RandomVsShuffledLabelsNearOneMinusInvK) {
    Rng rng(2024);
    const std::size_t n = 1000;
    const int k = 10;
    Tensor logits = random_logits(rng, n, k);
    const double loss = zero_one_loss(logits, random_labels(rng, n, k));
    EXPECT_NEAR(loss, 0.9, 0.04);  // Monte-Carlo expectation 1 - 1/K
}

TEST(ZeroOneLoss, RejectsFewerThanTwoClasses) {
    EXPECT_THROW(zero_one_loss(Tensor({2, 1}, {1, 2}), {0, 0}), Error);
}

TEST(CrossEntropy, UniformLogitsGiveLogTwo) {
    Graph g;
    Tensor loss = cross_entropy_smoothed(g, Tensor({1, 2}, {0.0, 0.0}), {0}, 0.0);
    EXPECT_NEAR(loss.value(), std::log(2.0), 1e-12);
}

TEST(CrossEntropy, ZeroSmoothingReducesToStandardCrossEntropy) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(6);
        const int k = 2 + rng.uniform_int(0, 6);
        Tensor logits = random_logits(rng, n, static_cast<std::size_t>(k));
        std::vector<int> labels = random_labels(rng, n, k);
        Graph g;
        const double got = cross_entropy_smoothed(g, logits, labels, 0.0).value();
        EXPECT_NEAR(got, ce_direct(logits, labels), 1e-11);
    }
}

TEST(CrossEntropy, ClosedFormTwoClassValue) {
    // softmax of these logits is exactly (0.11, 0.89).
    Graph g;
    Tensor logits({1, 2}, {std::log(0.11), std::log(0.89)});
    const double loss = cross_entropy_smoothed(g, logits, {0}, 0.0).value();
    EXPECT_NEAR(loss, -std::log(0.11), 1e-12);
    EXPECT_NEAR(loss, 2.2073, 1e-4);
}

TEST(CrossEntropy, SmoothedTargetMixesUniform) {
    // With uniform logits the loss stays log K for any smoothing factor.
    Graph g;
    const double loss = cross_entropy_smoothed(g, Tensor({1, 4}, {0, 0, 0, 0}), {2}, 0.3).value();
    EXPECT_NEAR(loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, RejectsBadSmoothingAndNonFiniteLogits) {
    Graph g;
    EXPECT_THROW(cross_entropy_smoothed(g, Tensor({1, 2}, {0, 0}), {0}, 1.0), ConfigError);
    EXPECT_THROW(cross_entropy_smoothed(g, Tensor({1, 2}, {0, 0}), {0}, -0.1), ConfigError);
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_THROW(cross_entropy_smoothed(g, Tensor({1, 2}, {inf, 0}), {0}, 0.0), NumericError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3;
        const std::size_t k = 5;
        Tensor base = random_logits(rng, n, k);
        std::vector<int> labels = random_labels(rng, n, static_cast<int>(k));
        const double smoothing = trial % 2 ? 0.1 : 0.0;

        Graph g;
        Tensor logits(base.shape(), base.values(), true);
        g.backward(cross_entropy_smoothed(g, logits, labels, smoothing));

        auto f = [&](const std::vector<double>& v) {
            Graph gg;
            return cross_entropy_smoothed(gg, Tensor({n, k}, v), labels, smoothing).value();
        };
        EXPECT_LT(sbtest::grad_rel_err(logits.grad(),
                                       sbtest::central_diff(f, base.values(), 1e-5)),
                  1e-4);
    }
}

TEST(Phi, ShiftedLogIsZeroAtZero) {
    EXPECT_DOUBLE_EQ(phi(SurrogateSpec::shifted_log_default(), 0.0), 0.0);
}

TEST(Phi, TanhReferenceValue) {
    const double v = phi(SurrogateSpec::tanh_default(), 2.0);
    EXPECT_NEAR(v, 0.197375, 1e-6);
    EXPECT_NEAR(v, 0.19737532022490401, 1e-15);  // high-precision tanh(0.2)
}

TEST(Phi, LowerBoundsStepFunctionOnGrid) {
    const SurrogateSpec kinds[] = {SurrogateSpec::tanh_default(),
                                   SurrogateSpec::shifted_log_default()};
    for (const auto& spec : kinds) {
        double prev = -std::numeric_limits<double>::infinity();
        for (double x = -20.0; x <= 20.0 + 1e-9; x += 1e-3) {
            const double v = phi(spec, x);
            const double step = x > 0.0 ? 1.0 : 0.0;
            ASSERT_LE(v, step) << spec.name() << " at x=" << x;
            ASSERT_GE(v, prev - 1e-15) << spec.name() << " not monotone at x=" << x;
            prev = v;
        }
    }
}

TEST(Phi, GraphPathAgreesWithScalarPath) {
    Rng rng(77);
    const SurrogateSpec kinds[] = {SurrogateSpec::tanh_default(),
                                   SurrogateSpec::shifted_log_default()};
    for (const auto& spec : kinds) {
        std::vector<double> xs(64);
        for (double& x : xs) x = rng.uniform(-40.0, 40.0);
        Graph g;
        Tensor out = phi_on_graph(g, spec, Tensor({8, 8}, xs));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            EXPECT_NEAR(out.values()[i], phi(spec, xs[i]), 1e-12);
        }
    }
}

TEST(MarginMatrix, HandExample) {
    Graph g;
    Tensor m = margin_matrix(g, Tensor({1, 3}, {3, 1, 2}), {0});
    EXPECT_DOUBLE_EQ(m.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(m.at(0, 1), -2.0);
    EXPECT_DOUBLE_EQ(m.at(0, 2), -1.0);
}

TEST(MarginMatrix, EqualLogitsGiveZeroRow) {
    Graph g;
    Tensor m = margin_matrix(g, Tensor({1, 4}, {7, 7, 7, 7}), {2});
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(m.at(0, j), 0.0);
}

TEST(MarginMatrix, RandomCaseMatchesDirectSubtractionAndTrueColumnIsExactlyZero) {
    Rng rng(8);
    Tensor logits = random_logits(rng, 5, 4);
    std::vector<int> labels = random_labels(rng, 5, 4);
    Graph g;
    Tensor m = margin_matrix(g, logits, labels);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_DOUBLE_EQ(m.at(i, j),
                             logits.at(i, j) - logits.at(i, static_cast<std::size_t>(labels[i])));
        }
        EXPECT_EQ(m.at(i, static_cast<std::size_t>(labels[i])), 0.0);
    }
}

TEST(QLoss, EqualLogitsTwoClassesShiftedLogGivesLogTwo) {
    Graph g;
    SurrogateSpec spec = SurrogateSpec::shifted_log_default();  // mu = 1
    Tensor q = q_loss(g, Tensor({1, 2}, {1.5, 1.5}), {0}, spec);
    EXPECT_NEAR(q.value(), std::log(2.0), 1e-12);
}

TEST(QLoss, PerSampleAgreesWithBatchMean) {
    Rng rng(9);
    const SurrogateSpec kinds[] = {SurrogateSpec::tanh_default(),
                                   SurrogateSpec::shifted_log_default()};
    for (const auto& spec : kinds) {
        Tensor logits = random_logits(rng, 6, 5);
        std::vector<int> labels = random_labels(rng, 6, 5);
        Graph g;
        const double batch = q_loss(g, logits, labels, spec).value();
        const std::vector<double> rows = q_loss_per_sample(logits, labels, spec);
        double mean = 0.0;
        for (double r : rows) mean += r;
        mean /= static_cast<double>(rows.size());
        EXPECT_NEAR(batch, mean, 1e-12);
    }
}

// Brute-force inequality oracle: 0-1 loss >= Q - log(K)/mu, the chain through
// mean_i max_j phi(F_ij), and the per-row log-sum-exp sandwich.
TEST(QLoss, LowerBoundChainOnRandomSuite) {
    Rng rng(10);
    const SurrogateSpec kinds[] = {SurrogateSpec::tanh_default(),
                                   SurrogateSpec::shifted_log_default()};
    const double mus[] = {0.1, 1.0, 10.0};
    for (const auto& base : kinds) {
        for (const double mu : mus) {
            SurrogateSpec spec = base;
            spec.mu = mu;
            for (int trial = 0; trial < 300; ++trial) {
                const int k = 2 + static_cast<int>(rng.below(19));
                const std::size_t n = 1 + rng.below(4);
                Tensor logits = random_logits(rng, n, static_cast<std::size_t>(k), 6.0);
                std::vector<int> labels = random_labels(rng, n, k);

                const double l01 = zero_one_loss(logits, labels);
                Graph g;
                const double q = q_loss(g, logits, labels, spec).value();
                EXPECT_GE(l01 - (q - std::log(static_cast<double>(k)) / mu), -1e-10);

                const std::vector<double> rows = q_loss_per_sample(logits, labels, spec);
                double chain = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (int j = 0; j < k; ++j) {
                        best = std::max(
                            best, phi(spec, logits.at(i, static_cast<std::size_t>(j)) -
                                                logits.at(i, static_cast<std::size_t>(labels[i]))));
                    }
                    chain += best;
                    // Per-row sandwich: max phi <= row Q <= max phi + log(K)/mu.
                    EXPECT_GE(rows[i] - best, -1e-10);
                    EXPECT_LE(rows[i] - best - std::log(static_cast<double>(k)) / mu, 1e-10);
                }
                chain /= static_cast<double>(n);
                EXPECT_GE(l01 - chain, -1e-10);
            }
        }
    }
}

// Literal upper-bound role of cross-entropy: each row's unsmoothed loss is at
// least log(2) whenever the row is misclassified under the convention that a
// tied argmax counts as an error.
TEST(QLoss, RowCrossEntropyDominatesLogTwoOnMisclassifiedRows) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(9));
        Tensor logits = random_logits(rng, 1, static_cast<std::size_t>(k));
        std::vector<int> labels = random_labels(rng, 1, k);
        bool wrong_or_tied = false;
        for (int j = 0; j < k; ++j) {
            if (j != labels[0] && logits.at(0, static_cast<std::size_t>(j)) >=
                                      logits.at(0, static_cast<std::size_t>(labels[0]))) {
                wrong_or_tied = true;
            }
        }
        const double row_ce = ce_direct(logits, labels);
        EXPECT_GE(row_ce - std::log(2.0) * (wrong_or_tied ? 1.0 : 0.0), -1e-12);
    }
}

TEST(QLoss, GradientMatchesFiniteDifferences) {
    Rng rng(13);
    const SurrogateSpec kinds[] = {SurrogateSpec::tanh_default(),
                                   SurrogateSpec::shifted_log_default()};
    for (const auto& spec : kinds) {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t n = 3;
            const std::size_t k = 4;
            Tensor base = random_logits(rng, n, k);
            std::vector<int> labels = random_labels(rng, n, static_cast<int>(k));

            Graph g;
            Tensor logits(base.shape(), base.values(), true);
            g.backward(q_loss(g, logits, labels, spec));

            auto f = [&](const std::vector<double>& v) {
                Graph gg;
                return q_loss(gg, Tensor({n, k}, v), labels, spec).value();
            };
            EXPECT_LT(sbtest::grad_rel_err(logits.grad(),
                                           sbtest::central_diff(f, base.values(), 1e-5)),
                      1e-4)
                << spec.name();
        }
    }
}

TEST(Counterexample, ReferenceValuesAtKTenDeltaHundredth) {
    const CounterexampleReport r = counterexample_eval(10, 0.01);
    EXPECT_NEAR(r.ce_a, 2.2073, 1e-4);
    EXPECT_NEAR(r.ce_b, 0.7133, 1e-4);
    EXPECT_NEAR(r.phi_a, -0.0100, 1e-4);
    EXPECT_NEAR(r.phi_b, 0.0200, 1e-4);
    EXPECT_EQ(r.ce_prefers, 'A');
    EXPECT_EQ(r.phi_prefers, 'B');
}

TEST(Counterexample, TanhValueVanishesInSmallDeltaLimit) {
    const CounterexampleReport r = counterexample_eval(10, 1e-9);
    EXPECT_NEAR(r.phi_a, 0.0, 2e-9);
}

TEST(Counterexample, SweepAlwaysPrefersAAndB) {
    for (int k = 3; k <= 1000; ++k) {
        for (const double delta : {1e-4, 1e-3, 1e-2}) {
            if (!(delta < std::min(0.5, 1.0 / k))) continue;
            const CounterexampleReport r = counterexample_eval(k, delta);
            ASSERT_EQ(r.ce_prefers, 'A') << "K=" << k << " delta=" << delta;
            ASSERT_EQ(r.phi_prefers, 'B') << "K=" << k << " delta=" << delta;
        }
    }
}

TEST(Counterexample, BoundaryStillValid) {
    const CounterexampleReport r = counterexample_eval(3, 0.3);
    EXPECT_EQ(r.ce_prefers, 'A');
    EXPECT_EQ(r.phi_prefers, 'B');
}

TEST(Counterexample, RangeViolations) {
    EXPECT_THROW(counterexample_eval(2, 0.01), ConfigError);
    EXPECT_THROW(counterexample_eval(3, 0.5), ConfigError);
    EXPECT_THROW(counterexample_eval(3, 0.0), ConfigError);
    EXPECT_THROW(counterexample_eval(10, 0.2), ConfigError);  // >= 1/K
}

}  // namespace
