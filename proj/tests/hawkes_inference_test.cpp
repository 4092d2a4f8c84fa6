#include "pointproc/hawkes/adm4.hpp"
#include "pointproc/hawkes/em.hpp"
#include "pointproc/hawkes/fit.hpp"
#include "pointproc/hawkes/model_io.hpp"
#include "pointproc/hawkes/simulation.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

using namespace pointproc;

namespace {

HawkesExpParams univariate(double mu, double alpha, double beta) {
    return with_shared_decay(Vector::Constant(1, mu), Matrix::Constant(1, 1, alpha), beta);
}

EventRealization simulate(const HawkesExpParams& p, double horizon, std::uint64_t seed) {
    RngStream rng(seed);
    return simulate_hawkes_exp(p, horizon, rng).realization;
}

Vector random_feasible(const HawkesExpObjective& obj, RngStream& rng) {
    Vector w(static_cast<Eigen::Index>(obj.n_params()));
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        w[k] = k < static_cast<Eigen::Index>(obj.dim()) ? 0.2 + rng.uniform() : 0.05 + 0.3 * rng.uniform();
    }
    return w;
}

SolverConfig tight_agd() {
    SolverConfig cfg;
    cfg.kind = SolverKind::agd;
    cfg.max_iter = 3000;
    cfg.tol = 1e-13;
    return cfg;
}

} // namespace

TEST(HawkesLoglik, EmptyRealizationIsCompensatorOnly) {
    const auto obj = HawkesExpObjective::shared_decay({EventRealization::empty(2, 7.0)}, 1.5, true);
    Vector w(6);
    w << 0.3, 0.4, 0.1, 0.2, 0.3, 0.4;
    EXPECT_DOUBLE_EQ(hawkes_loglik(obj, w), (0.3 + 0.4) * 7.0);
    const Vector g = hawkes_loglik_grad(obj, w);
    EXPECT_DOUBLE_EQ(g[0], 7.0);
    EXPECT_DOUBLE_EQ(g[1], 7.0);
    EXPECT_TRUE(g.tail(4).isZero(0.0));
    EXPECT_DOUBLE_EQ(obj.lsq_value(w), (0.09 + 0.16) * 7.0);
}

TEST(HawkesLoglik, SingleEventClosedForm) {
    const double mu = 0.8, alpha = 0.6, beta = 1.7, t1 = 2.5, horizon = 6.0;
    const EventRealization r(horizon, {{t1}});
    const auto obj = HawkesExpObjective::shared_decay({r}, beta);
    const Vector w = (Vector(2) << mu, alpha).finished();
    const double closed = -std::log(mu) + mu * horizon + alpha * (1.0 - std::exp(-beta * (horizon - t1)));
    EXPECT_NEAR(hawkes_loglik(obj, w), closed, 1e-14);

    const auto params = to_sum_exp(univariate(mu, alpha, beta));
    const auto lam = [&](double t) { return oracle::naive_intensity(params, r, 0, t); };
    const double integral = oracle::adaptive_simpson(lam, 0.0, t1) + oracle::adaptive_simpson(lam, t1, horizon);
    EXPECT_NEAR(closed, -std::log(mu) + integral, 1e-10);
}

TEST(HawkesLoglik, InfeasiblePoint) {
    const auto obj = HawkesExpObjective::shared_decay({EventRealization(5.0, {{1.0}})}, 1.0);
    const Vector w = Vector::Zero(2);
    EXPECT_TRUE(std::isinf(obj.loglik_value(w)));
    EXPECT_THROW(hawkes_loglik(obj, w), numerical_error);
    EXPECT_THROW(hawkes_loglik_grad(obj, w), numerical_error);
    EXPECT_THROW(obj.loglik_value(Vector::Zero(3)), config_error);
}

TEST(HawkesLoglik, MatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t d = 1 + seed % 3;
        const std::size_t layers = 1 + seed % 2;
        const auto truth = oracle::random_hawkes_params(d, layers, seed);
        std::vector<EventRealization> rs{oracle::random_realization(d, 30.0, 12, seed),
                                         oracle::random_realization(d, 20.0, 8, seed + 100)};
        const HawkesExpObjective obj(rs, truth.decays, true);
        const Vector w = obj.pack(truth);
        const double n = static_cast<double>(obj.total_events());
        const double naive = (oracle::naive_neg_loglik(truth, rs[0]) + oracle::naive_neg_loglik(truth, rs[1])) / n;
        EXPECT_NEAR(hawkes_loglik(obj, w), naive, 1e-9 * std::abs(naive));
        const double naive_lsq = (oracle::naive_lsq(truth, rs[0]) + oracle::naive_lsq(truth, rs[1])) / n;
        EXPECT_NEAR(obj.lsq_value(w), naive_lsq, 1e-9 * std::abs(naive_lsq));
    }
}

TEST(HawkesLoglik, GradientFiniteDifferences) {
    RngStream rng(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t d = 1 + seed % 3;
        const auto truth = oracle::random_hawkes_params(d, 1 + seed % 2, seed);
        const HawkesExpObjective obj({oracle::random_realization(d, 25.0, 10, seed)}, truth.decays, true);
        const Vector w = random_feasible(obj, rng);
        const auto f = [&](const Vector& x) { return obj.loglik_value(x); };
        const auto q = [&](const Vector& x) { return obj.lsq_value(x); };
        EXPECT_LT(oracle::relative_error(obj.loglik_grad(w), oracle::finite_difference_gradient(f, w, 1e-6)), 1e-5);
        EXPECT_LT(oracle::relative_error(obj.lsq_grad(w), oracle::finite_difference_gradient(q, w, 1e-6)), 1e-5);
    }
}

TEST(HawkesLoglik, PoissonScoreVanishesAtRate) {
    const auto r = oracle::random_realization(2, 40.0, 30, 3);
    const auto obj = HawkesExpObjective::shared_decay({r}, 2.0);
    Vector w = Vector::Zero(6);
    w[0] = 30.0 / 40.0;
    w[1] = 30.0 / 40.0;
    const Vector g = obj.loglik_grad(w);
    EXPECT_NEAR(g[0], 0.0, 1e-14);
    EXPECT_NEAR(g[1], 0.0, 1e-14);
    w[0] = 1.0;
    EXPECT_GT(obj.loglik_grad(w)[0], 0.0);
}

TEST(HawkesLsq, SingleEventQuadrature) {
    const double mu = 0.5, alpha = 0.7, beta = 2.5, t1 = 1.0, horizon = 5.0;
    const EventRealization r(horizon, {{t1}});
    const auto obj = HawkesExpObjective::shared_decay({r}, beta, true);
    const auto params = to_sum_exp(univariate(mu, alpha, beta));
    const auto lam2 = [&](double t) {
        const double l = oracle::naive_intensity(params, r, 0, t);
        return l * l;
    };
    const double integral = oracle::adaptive_simpson(lam2, 0.0, t1, 1e-14) + oracle::adaptive_simpson(lam2, t1, horizon, 1e-14);
    const double expected = integral - 2.0 * mu;
    EXPECT_NEAR(obj.lsq_value((Vector(2) << mu, alpha).finished()), expected, 1e-8);
}

TEST(HawkesLsq, LipschitzIsExactCurvature) {
    const auto truth = oracle::random_hawkes_params(2, 1, 8);
    const HawkesExpObjective obj({oracle::random_realization(2, 30.0, 15, 8)}, truth.decays, true);
    const HawkesLsqObjective lsq(std::make_shared<const HawkesExpObjective>(obj));
    const double l = lsq.smoothness().lipschitz_full;
    // Quadratic: Hessian columns from exact gradient differences.
    const auto n = static_cast<Eigen::Index>(obj.n_params());
    Matrix h(n, n);
    const Vector zero = Vector::Zero(n);
    const Vector g0 = obj.lsq_grad(zero);
    for (Eigen::Index k = 0; k < n; ++k) {
        h.col(k) = obj.lsq_grad(Vector::Unit(n, k)) - g0;
    }
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (h + h.transpose())).eigenvalues().maxCoeff();
    EXPECT_NEAR(l, top, 1e-9 * top);
}

TEST(HawkesObjective, PackUnpackLayout) {
    const auto truth = oracle::random_hawkes_params(3, 2, 1);
    const HawkesExpObjective obj({oracle::random_realization(3, 10.0, 4, 1)}, truth.decays);
    const Vector w = obj.pack(truth);
    EXPECT_EQ(w.size(), 3 + 2 * 9);
    EXPECT_EQ(w[obj.alpha_index(1, 2, 1)], truth.adjacency[1](1, 2));
    EXPECT_EQ(w[3 + 1 * 3 * 2 + 2 * 2 + 1], truth.adjacency[1](1, 2));
    const auto back = obj.unpack(w);
    EXPECT_EQ(back.baseline, truth.baseline);
    EXPECT_EQ(back.adjacency[0], truth.adjacency[0]);
    EXPECT_EQ(back.adjacency[1], truth.adjacency[1]);
}

TEST(HawkesObjective, RejectsBadInputs) {
    EXPECT_THROW(HawkesExpObjective({}, {Matrix::Ones(1, 1)}), config_error);
    EXPECT_THROW(HawkesExpObjective({EventRealization::empty(2, 1.0)}, {Matrix::Ones(1, 1)}), config_error);
    EXPECT_THROW(HawkesExpObjective({EventRealization::empty(1, 1.0), EventRealization::empty(2, 1.0)},
                                    {Matrix::Ones(1, 1)}),
                 data_error);
    const auto obj = HawkesExpObjective::shared_decay({EventRealization::empty(1, 1.0)}, 1.0);
    EXPECT_THROW(obj.lsq_value(Vector::Zero(2)), config_error);
}

TEST(HawkesFit, RecoversUnivariate) {
    const auto r = simulate(univariate(1.0, 0.5, 2.0), 6000.0, 31);
    const auto fit = fit_hawkes_exp({r}, {Matrix::Constant(1, 1, 2.0)}, PenaltySpec{}, tight_agd());
    EXPECT_NEAR(fit.params.baseline[0], 1.0, 0.15);
    EXPECT_NEAR(fit.params.adjacency[0](0, 0), 0.5, 0.1);
    EXPECT_NE(fit.solver.stop_reason, StopReason::diverged);

    const auto lsq = fit_hawkes_exp({r}, {Matrix::Constant(1, 1, 2.0)}, PenaltySpec{}, tight_agd(),
                                    HawkesGoodness::least_squares);
    EXPECT_NEAR(lsq.params.baseline[0], 1.0, 0.15);
    EXPECT_NEAR(lsq.params.adjacency[0](0, 0), 0.5, 0.1);
}

TEST(HawkesFit, OptimalityAndDeterminism) {
    const Matrix adj = (Matrix(2, 2) << 0.3, 0.0, 0.2, 0.1).finished();
    const auto truth = with_shared_decay(Vector::Constant(2, 0.5), adj, 1.0);
    const auto r = simulate(truth, 3000.0, 32);
    auto obj = std::make_shared<const HawkesExpObjective>(std::vector{r}, std::vector<Matrix>{truth.decays});
    const auto a = fit_hawkes_exp(obj, PenaltySpec{}, tight_agd());
    const auto b = fit_hawkes_exp(obj, PenaltySpec{}, tight_agd());
    EXPECT_EQ(a.solver.minimizer, b.solver.minimizer);
    // Projected-gradient residual of the nonnegativity-constrained problem.
    const Vector w = a.solver.minimizer;
    const Vector step = (w - obj->loglik_grad(w)).cwiseMax(0.0) - w;
    EXPECT_LT(step.norm(), 1e-6);
    EXPECT_GE(w.minCoeff(), 0.0);
}

TEST(HawkesFit, NoExcitationGivesSmallAdjacency) {
    RngStream rng(33);
    const auto r = simulate_poisson(Vector::Constant(1, 1.0), 5000.0, rng);
    const auto fit = fit_hawkes_exp({r}, {Matrix::Constant(1, 1, 2.0)}, PenaltySpec{}, tight_agd());
    EXPECT_LT(fit.params.adjacency[0](0, 0), 0.05);
}

TEST(HawkesFit, PenaltiesAndSumOfExponentials) {
    const auto truth = with_shared_decay(Vector::Constant(2, 0.5), (Matrix(2, 2) << 0.4, 0.0, 0.0, 0.3).finished(), 1.0);
    const auto r = simulate(truth, 2000.0, 34);
    const PenaltySpec l1{.kind = PenaltyKind::l1, .strength = 0.01};
    const auto fit = fit_hawkes_exp({r}, {truth.decays}, l1, tight_agd());
    EXPECT_GE(fit.params.adjacency[0].minCoeff(), 0.0);
    EXPECT_LT(fit.params.adjacency[0](0, 1), 0.05);

    const auto sum = fit_hawkes_exp({r}, {Matrix::Constant(2, 2, 0.5), Matrix::Constant(2, 2, 5.0)}, PenaltySpec{},
                                    tight_agd());
    const Matrix norms = kernel_norms(sum.params);
    EXPECT_NEAR(norms(0, 0), 0.4, 0.1);
    EXPECT_NEAR(norms(1, 1), 0.3, 0.1);

    PenaltySpec ranged{.kind = PenaltyKind::l1, .strength = 0.1, .range = IndexRange{0, 2}};
    EXPECT_THROW(fit_hawkes_exp({r}, {truth.decays}, ranged, tight_agd()), config_error);
    SolverConfig saga;
    saga.kind = SolverKind::saga;
    EXPECT_THROW(fit_hawkes_exp({r}, {truth.decays}, PenaltySpec{}, saga), config_error);
}

TEST(Em, HandComputedStep) {
    // Events 0.5, 1.0, 2.2 on [0, 3); support 1 with two bins of width 0.5.
    const EmEstimator em({EventRealization(3.0, {{0.5, 1.0, 2.2}})}, 1.0, 2);
    const auto init = em.initial();
    EXPECT_DOUBLE_EQ(init.baseline[0], 0.5);
    EXPECT_DOUBLE_EQ(init.value(0, 0, 0), 0.5);
    // Only 1.0 has a candidate parent (0.5, lag 0.5 -> bin 1): intensity 0.5 + 0.5 = 1.
    const auto b = em.e_step(init, true);
    EXPECT_DOUBLE_EQ(b.background[0], 2.5);
    EXPECT_DOUBLE_EQ(b.offspring[0], 0.0);
    EXPECT_DOUBLE_EQ(b.offspring[1], 0.5);
    const auto next = em.m_step(b);
    // exposures: bin 0 = 0.5 + 0.5 + 0.5, bin 1 = 0.5 + 0.5 + 0.3
    EXPECT_DOUBLE_EQ(next.baseline[0], 2.5 / 3.0);
    EXPECT_DOUBLE_EQ(next.value(0, 0, 0), 0.0);
    EXPECT_NEAR(next.value(0, 0, 1), 0.5 / 1.3, 1e-15);
    const double ll = std::log(0.5) + std::log(1.0) + std::log(0.5) - 0.5 * 3.0 - 0.5 * 1.5 - 0.5 * 1.3;
    EXPECT_NEAR(em.log_likelihood(init), ll, 1e-14);
}

TEST(Em, NormalizationAndMonotonicity) {
    const Matrix adj = (Matrix(2, 2) << 0.3, 0.2, 0.1, 0.4).finished();
    const auto r = simulate(with_shared_decay(Vector::Constant(2, 0.6), adj, 2.0), 800.0, 40);
    const EmEstimator em({r}, 2.5, 10);
    auto e = em.initial();
    double ll = em.log_likelihood(e);
    for (int it = 0; it < 40; ++it) {
        const auto b = em.e_step(e, true);
        for (double total : b.event_total) {
            ASSERT_NEAR(total, 1.0, 1e-12);
        }
        e = em.m_step(b);
        const double next = em.log_likelihood(e);
        ASSERT_GE(next, ll - 1e-10 * std::abs(ll));
        ll = next;
    }
    const auto res = fit_em({r}, EmConfig{.support = 2.5, .grid_size = 10, .max_iter = 300, .tol = 1e-10});
    for (std::size_t k = 1; k < res.loglik.size(); ++k) {
        EXPECT_GE(res.loglik[k], res.loglik[k - 1] - 1e-10 * std::abs(res.loglik[k - 1]));
    }
    for (double v : res.estimate.values) {
        EXPECT_GE(v, 0.0);
    }
}

TEST(Em, PoissonNull) {
    // The nonnegative bins absorb some noise, a bias of order sqrt(M / N).
    RngStream rng(41);
    const auto r = simulate_poisson(Vector::Constant(1, 2.0), 8000.0, rng);
    const auto res = fit_em({r}, EmConfig{.support = 2.5, .grid_size = 20, .max_iter = 2000, .tol = 1e-10});
    EXPECT_LE(kernel_norms(res.estimate)(0, 0), 0.05);
    const double n = static_cast<double>(r.total_events());
    EXPECT_LT(std::abs(res.estimate.baseline[0] - 2.0), 3.0 * std::sqrt(n) / 8000.0 + 0.05 * 2.0);
}

TEST(Em, RecoversExponentialKernelNorm) {
    const auto r = simulate(univariate(1.0, 0.5, 2.0), 8000.0, 42);
    const auto res = fit_em({r}, EmConfig{.support = 2.5, .grid_size = 20, .max_iter = 500, .tol = 1e-10});
    EXPECT_NEAR(kernel_norms(res.estimate)(0, 0), 0.5, 0.1);
}

TEST(Em, TinySupportWarns) {
    const auto res = fit_em({EventRealization(10.0, {{1.0, 3.0, 7.0}})}, EmConfig{.support = 0.5, .grid_size = 4});
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_TRUE(kernel_norms(res.estimate).isZero(0.0));
    EXPECT_NEAR(res.estimate.baseline[0], 0.3, 1e-15);
    EXPECT_THROW(fit_em({EventRealization(10.0, {{1.0}})}, EmConfig{.support = 1.0, .grid_size = 0}), config_error);
}

TEST(Em, IntegratedSquaredErrorClosedForm) {
    EmKernelEstimate e{1, {0.0, 0.5, 1.0, 1.5}, {0.7, 0.3, 0.1}, Vector::Constant(1, 1.0)};
    const double alpha = 0.5, beta = 2.0;
    const auto diff2 = [&](double t) {
        const double d = e.kernel_at(0, 0, t) - alpha * beta * std::exp(-beta * t);
        return d * d;
    };
    double numeric = 0.0;
    for (int m = 0; m < 3; ++m) {
        numeric += oracle::adaptive_simpson(diff2, 0.5 * m, 0.5 * (m + 1), 1e-14);
    }
    numeric += oracle::adaptive_simpson(diff2, 1.5, 30.0, 1e-14);
    EXPECT_NEAR(em_integrated_squared_error(e, 0, 0, alpha, beta), numeric, 1e-10);
}

TEST(Em, ResidualsMatchDirectIntegration) {
    EmKernelEstimate e{2, {0.0, 0.4, 0.8, 1.2}, {}, (Vector(2) << 0.5, 0.8).finished()};
    e.values = {0.3, 0.2, 0.1, 0.0, 0.5, 0.2, 0.4, 0.4, 0.4, 0.1, 0.0, 0.6};
    const auto r = oracle::random_realization(2, 20.0, 12, 43);
    const auto res = em_time_change_residuals(e, r);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto lam = [&](double t) {
            double l = e.baseline[static_cast<Eigen::Index>(i)];
            for (std::size_t j = 0; j < 2; ++j) {
                for (double s : r.node(j)) {
                    if (s < t) {
                        l += e.kernel_at(i, j, t - s);
                    }
                }
            }
            return l;
        };
        // Integrate piecewise between all breakpoints so Simpson sees smooth pieces.
        std::vector<double> cuts{0.0};
        for (std::size_t j = 0; j < 2; ++j) {
            for (double s : r.node(j)) {
                for (double g : e.grid) {
                    if (s + g < 20.0) {
                        cuts.push_back(s + g);
                    }
                }
            }
        }
        std::sort(cuts.begin(), cuts.end());
        double prev_t = 0.0;
        for (std::size_t k = 0; k < r.count(i); ++k) {
            const double t = r.node(i)[k];
            double integral = 0.0;
            double left = prev_t;
            for (double c : cuts) {
                if (c > left && c < t) {
                    integral += oracle::adaptive_simpson(lam, left, c, 1e-13);
                    left = c;
                }
            }
            integral += oracle::adaptive_simpson(lam, left, t, 1e-13);
            EXPECT_NEAR(res[i][k], integral, 1e-9);
            prev_t = t;
        }
    }
}

TEST(Adm4, SingularValueThresholdAgainstGrid) {
    RngStream rng(50);
    for (int rep = 0; rep < 5; ++rep) {
        Matrix x(3, 3);
        for (Eigen::Index k = 0; k < 9; ++k) {
            x(k) = rng.normal();
        }
        const double thr = 0.4 + 0.3 * rng.uniform();
        const Matrix z = singular_value_threshold(x, thr);
        const auto objective = [&](const Matrix& m) {
            return 0.5 * (m - x).squaredNorm() + thr * Eigen::JacobiSVD<Matrix>(m).singularValues().sum();
        };
        // Grid over singular values in the input's singular basis.
        Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector sigma = svd.singularValues();
        double best = std::numeric_limits<double>::infinity();
        Vector best_s(3);
        const int steps = 120;
        for (int a = 0; a <= steps; ++a) {
            for (int b = 0; b <= steps; ++b) {
                for (int c = 0; c <= steps; ++c) {
                    const Vector s = (Vector(3) << sigma[0] * a / steps, sigma[1] * b / steps, sigma[2] * c / steps).finished();
                    const double v = 0.5 * (s - sigma).squaredNorm() + thr * s.sum();
                    if (v < best) {
                        best = v;
                        best_s = s;
                    }
                }
            }
        }
        const Matrix grid_z = svd.matrixU() * best_s.asDiagonal() * svd.matrixV().transpose();
        EXPECT_LT((z - grid_z).norm(), 2.0 * sigma[0] / steps);
        EXPECT_LE(objective(z), best + 1e-12);
        // Convexity: no random perturbation improves on z.
        for (int k = 0; k < 50; ++k) {
            Matrix dz(3, 3);
            for (Eigen::Index q = 0; q < 9; ++q) {
                dz(q) = 1e-3 * rng.normal();
            }
            EXPECT_GE(objective(z + dz), objective(z) - 1e-12);
        }
    }
}

TEST(Adm4, UnpenalizedMatchesMle) {
    const Matrix adj = (Matrix(3, 3) << 0.3, 0.1, 0.0, 0.0, 0.2, 0.2, 0.1, 0.0, 0.3).finished();
    const auto truth = with_shared_decay(Vector::Constant(3, 0.4), adj, 1.5);
    const auto r = simulate(truth, 1500.0, 51);
    const auto adm4 = fit_adm4({r}, Adm4Config{.decay = 1.5, .max_outer = 3000, .tol = 1e-9});
    const auto mle = fit_hawkes_exp({r}, {truth.decays}, PenaltySpec{}, tight_agd());
    EXPECT_TRUE(adm4.converged);
    EXPECT_LT((adm4.params.adjacency - mle.params.adjacency[0]).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((adm4.params.baseline - mle.params.baseline).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Adm4, ResidualsAndNonnegativity) {
    const Matrix adj = (Matrix(3, 3) << 0.3, 0.1, 0.0, 0.0, 0.2, 0.2, 0.1, 0.0, 0.3).finished();
    const auto r = simulate(with_shared_decay(Vector::Constant(3, 0.4), adj, 1.5), 1500.0, 52);
    const auto res = fit_adm4({r}, Adm4Config{.decay = 1.5, .lam_l1 = 1e-3, .lam_nuclear = 1e-3, .max_outer = 400, .tol = 1e-9});
    EXPECT_GE(res.params.adjacency.minCoeff(), 0.0);
    for (std::size_t k = 6; k < res.primal_residual.size(); ++k) {
        EXPECT_LE(res.primal_residual[k], res.primal_residual[k - 1] * (1.0 + 1e-9) + 1e-15) << k;
        EXPECT_LE(res.dual_residual[k], res.dual_residual[k - 1] * (1.0 + 1e-9) + 1e-15) << k;
    }
    EXPECT_THROW(fit_adm4({r}, Adm4Config{.decay = -1.0}), config_error);
}

TEST(ModelIo, RoundTrips) {
    const auto dir = oracle::temp_dir("model_io");
    const auto p = oracle::random_hawkes_params(2, 1, 3);
    save_model(model_to_json(p), dir / "m.json");
    const auto back = std::get<HawkesSumExpParams>(load_model(dir / "m.json"));
    EXPECT_EQ(back.baseline, p.baseline);
    EXPECT_EQ(back.adjacency[0], p.adjacency[0]);
    EXPECT_EQ(back.decays[0], p.decays[0]);

    const auto p2 = oracle::random_hawkes_params(2, 3, 4);
    save_model(model_to_json(p2), dir / "s.json");
    const auto back2 = std::get<HawkesSumExpParams>(load_model(dir / "s.json"));
    EXPECT_EQ(back2.adjacency[2], p2.adjacency[2]);

    EmKernelEstimate e{2, {0.0, 0.5, 1.0}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}, (Vector(2) << 0.1, 0.2).finished()};
    save_model(model_to_json(e), dir / "e.json");
    const auto back3 = std::get<EmKernelEstimate>(load_model(dir / "e.json"));
    EXPECT_EQ(back3.values, e.values);
    EXPECT_EQ(back3.grid, e.grid);

    io::write_file_atomic(dir / "p.json", R"({"baseline":[1,2],"adjacency":[[0.1,0],[0,0.2]],"decays":3})");
    const auto params = load_hawkes_params(dir / "p.json");
    EXPECT_TRUE(params.decays.isApprox(Matrix::Constant(2, 2, 3.0)));
    io::write_file_atomic(dir / "bad.json", R"({"baseline":[1,2],"adjacency":[[0.1,0]],"decays":3})");
    EXPECT_THROW(load_hawkes_params(dir / "bad.json"), data_error);
    io::write_file_atomic(dir / "neg.json", R"({"baseline":[1],"adjacency":[[-0.1]],"decays":3})");
    EXPECT_THROW(load_hawkes_params(dir / "neg.json"), data_error);
}
