#pragma once

#include "pointproc/hawkes/objective.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pointproc {

struct Adm4Config {
    double decay{1.0};
    double lam_l1{0.0};
    double lam_nuclear{0.0};
    double admm_rho{0.1};
    int max_outer{500};
    double tol{1e-7};
    int mm_iters{10};        // majorization-minimization sweeps per likelihood block
    int rho_adapt_iters{5};  // residual balancing only during the first outer iterations
};

struct Adm4Result {
    HawkesExpParams params;
    bool converged{false};
    int iterations{0};
    double objective{0.0};
    std::vector<double> primal_residual{};
    std::vector<double> dual_residual{};
};

/// prox of thr * nuclear norm: soft-threshold the singular values.
inline Matrix singular_value_threshold(const Matrix& x, double thr) {
    Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = (svd.singularValues().array() - thr).max(0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline double nuclear_norm(const Matrix& x) { return Eigen::JacobiSVD<Matrix>(x).singularValues().sum(); }

namespace detail {

inline Vector adm4_pack(const Vector& mu, const Matrix& a) {
    const auto d = mu.size();
    Vector w(d + d * d);
    w.head(d) = mu;
    for (Eigen::Index i = 0; i < d; ++i) {
        w.segment(d + i * d, d) = a.row(i).transpose();
    }
    return w;
}

} // namespace detail

/// min over (mu, A >= 0) of  -loglik / N_T + lam_l1 |A|_1 + lam_nuclear |A|_*.
/// ADMM with two copies of A: Z1 carries l1 + nonnegativity, Z2 the nuclear
/// norm. The likelihood block minimizes loglik/N_T + rho |A - C|^2, with C the
/// mean of the shifted copies, using the branching-ratio majorization: each
/// sweep reduces to independent scalar quadratics with closed-form roots.
inline Adm4Result fit_adm4(std::vector<EventRealization> realizations, const Adm4Config& cfg) {
    if (!(cfg.decay > 0.0) || !(cfg.lam_l1 >= 0.0) || !(cfg.lam_nuclear >= 0.0) || !(cfg.admm_rho > 0.0) ||
        cfg.max_outer <= 0 || !(cfg.tol >= 0.0) || cfg.mm_iters <= 0) {
        throw config_error("invalid ADM4 configuration");
    }
    const HawkesExpObjective obj = HawkesExpObjective::shared_decay(std::move(realizations), cfg.decay);
    const auto d = static_cast<Eigen::Index>(obj.dim());
    const double n_scale = std::max<double>(1.0, static_cast<double>(obj.total_events()));
    const double horizon = obj.total_time();

    Vector mu(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double n_i = static_cast<double>(obj.features(static_cast<std::size_t>(i)).rows());
        mu[i] = std::max(n_i, 1.0) / horizon;
    }
    Matrix a = Matrix::Constant(d, d, 0.1 / static_cast<double>(d));
    Matrix z1 = a;
    Matrix z2 = a;
    Matrix u1 = Matrix::Zero(d, d);
    Matrix u2 = Matrix::Zero(d, d);
    double rho = cfg.admm_rho;

    const auto objective = [&](const Vector& m, const Matrix& adj) {
        return obj.loglik_value(detail::adm4_pack(m, adj)) + cfg.lam_l1 * adj.cwiseAbs().sum() +
               (cfg.lam_nuclear > 0.0 ? cfg.lam_nuclear * nuclear_norm(adj) : 0.0);
    };

    Adm4Result out;
    double best = std::numeric_limits<double>::infinity();
    Vector mu_best = mu;
    Matrix adj_best = z1.cwiseMax(0.0);

    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        const Matrix c = 0.5 * ((z1 - u1) + (z2 - u2));
        for (int sweep = 0; sweep < cfg.mm_iters; ++sweep) {
            for (Eigen::Index i = 0; i < d; ++i) {
                const auto& g = obj.features(static_cast<std::size_t>(i));
                const Vector& big_g = obj.compensator_features(static_cast<std::size_t>(i));
                const Vector row = a.row(i).transpose();
                double background = 0.0;
                Vector parents = Vector::Zero(d);
                if (g.rows() > 0) {
                    const Vector inv = ((g * row).array() + mu[i]).cwiseInverse();
                    background = mu[i] * inv.sum();
                    parents = row.cwiseProduct(g.transpose() * inv);
                }
                mu[i] = background / horizon;
                for (Eigen::Index j = 0; j < d; ++j) {
                    // 2 rho x^2 + (G/N - 2 rho c) x - P/N = 0, positive root
                    const double b = big_g[j] / n_scale - 2.0 * rho * c(i, j);
                    const double p = parents[j] / n_scale;
                    a(i, j) = (-b + std::sqrt(b * b + 8.0 * rho * p)) / (4.0 * rho);
                    if (p == 0.0) {
                        a(i, j) = std::max(0.0, -b / (2.0 * rho));
                    }
                }
            }
        }

        const Matrix z1_old = z1;
        const Matrix z2_old = z2;
        const double t1 = cfg.lam_l1 / rho;
        z1 = ((a + u1).array() - t1).max(0.0).matrix();
        z2 = cfg.lam_nuclear > 0.0 ? singular_value_threshold(a + u2, cfg.lam_nuclear / rho) : Matrix(a + u2);
        u1 += a - z1;
        u2 += a - z2;

        const double primal = std::sqrt((a - z1).squaredNorm() + (a - z2).squaredNorm());
        const double dual = rho * std::sqrt((z1 - z1_old).squaredNorm() + (z2 - z2_old).squaredNorm());
        out.primal_residual.push_back(primal);
        out.dual_residual.push_back(dual);
        out.iterations = outer;

        const double f = objective(mu, z1);
        if (f < best) {
            best = f;
            mu_best = mu;
            adj_best = z1;
        }
        if (primal <= cfg.tol && dual <= cfg.tol) {
            out.converged = true;
            mu_best = mu;
            adj_best = z1;
            best = f;
            break;
        }
        if (outer <= cfg.rho_adapt_iters) {
            if (primal > 10.0 * dual) {
                rho *= 2.0;
                u1 /= 2.0;
                u2 /= 2.0;
            } else if (dual > 10.0 * primal) {
                rho /= 2.0;
                u1 *= 2.0;
                u2 *= 2.0;
            }
        }
    }
    out.params = with_shared_decay(mu_best, adj_best, cfg.decay);
    out.objective = best;
    return out;
}

} // namespace pointproc
