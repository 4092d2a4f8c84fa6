#pragma once

#include "pointproc/error.hpp"
#include "pointproc/events.hpp"
#include "pointproc/glm.hpp"
#include "pointproc/hawkes/diagnostics.hpp"
#include "pointproc/hawkes/params.hpp"
#include "pointproc/prox.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pointproc {

/// Goodness-of-fit functionals for (sum-of-)exponential Hawkes models with
/// fixed decays. Parameters are packed as
///   w = [mu_0 .. mu_{D-1}, alpha(i, j, u) at D + i*D*U + j*U + u].
///
/// Everything that depends on the event times is precomputed here, so a
/// loglik or lsq evaluation costs O(n * D * U):
///   g_k     kernel features at each event of node i, g_k[j*U+u] = sum_{t_l^j < t_k} beta e^{-beta (t_k - t_l)}
///   G_i     their integrals over [0, T]
///   s_i     sum_k g_k            (least squares only)
///   C_i     integral of g g^T    (least squares only)
class HawkesExpObjective {
public:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    HawkesExpObjective(std::vector<EventRealization> realizations, std::vector<Matrix> decays,
                       bool with_least_squares = false)
        : realizations_(std::move(realizations)), decays_(std::move(decays)), with_lsq_(with_least_squares) {
        if (realizations_.empty()) {
            throw config_error("hawkes objective needs at least one realization");
        }
        dim_ = realizations_.front().dim();
        if (dim_ == 0) {
            throw data_error("hawkes objective needs at least one node");
        }
        for (const auto& r : realizations_) {
            if (r.dim() != dim_) {
                throw data_error("all realizations must have the same dimension");
            }
            total_time_ += r.end_time();
            total_events_ += r.total_events();
        }
        if (decays_.empty()) {
            throw config_error("at least one decay layer is required");
        }
        const auto d = static_cast<Eigen::Index>(dim_);
        for (const auto& b : decays_) {
            if (b.rows() != d || b.cols() != d || !b.allFinite() || !(b.minCoeff() > 0.0)) {
                throw config_error("decays must be " + std::to_string(dim_) + "x" + std::to_string(dim_) +
                                   " positive matrices");
            }
        }
        n_layers_ = decays_.size();
        nodes_.resize(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            build_node(i);
        }
    }

    static HawkesExpObjective shared_decay(std::vector<EventRealization> realizations, double decay,
                                           bool with_least_squares = false) {
        const auto d = static_cast<Eigen::Index>(realizations.empty() ? 0 : realizations.front().dim());
        return HawkesExpObjective(std::move(realizations), {Matrix::Constant(d, d, decay)}, with_least_squares);
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_layers() const noexcept { return n_layers_; }
    std::size_t n_params() const noexcept { return dim_ + dim_ * dim_ * n_layers_; }
    std::size_t total_events() const noexcept { return total_events_; }
    double total_time() const noexcept { return total_time_; }
    const std::vector<EventRealization>& realizations() const noexcept { return realizations_; }
    const std::vector<Matrix>& decays() const noexcept { return decays_; }
    bool has_least_squares() const noexcept { return with_lsq_; }

    // Per-node precomputed pieces, exposed for estimators built on the same features (ADM4).
    const RowMatrix& features(std::size_t i) const { return nodes_.at(i).g; }
    const Vector& compensator_features(std::size_t i) const { return nodes_.at(i).G; }

    Vector pack(const HawkesSumExpParams& p) const {
        check_params(p);
        Vector w(static_cast<Eigen::Index>(n_params()));
        w.head(static_cast<Eigen::Index>(dim_)) = p.baseline;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                for (std::size_t u = 0; u < n_layers_; ++u) {
                    w[alpha_index(i, j, u)] = p.adjacency[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
        }
        return w;
    }

    HawkesSumExpParams unpack(const Vector& w) const {
        check_size(w);
        const auto d = static_cast<Eigen::Index>(dim_);
        HawkesSumExpParams p{w.head(d), std::vector<Matrix>(n_layers_, Matrix::Zero(d, d)), decays_};
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                for (std::size_t u = 0; u < n_layers_; ++u) {
                    p.adjacency[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[alpha_index(i, j, u)];
                }
            }
        }
        return p;
    }

    Eigen::Index alpha_index(std::size_t i, std::size_t j, std::size_t u) const noexcept {
        return static_cast<Eigen::Index>(dim_ + (i * dim_ + j) * n_layers_ + u);
    }
    IndexRange baseline_range() const noexcept { return {0, dim_}; }
    IndexRange adjacency_range() const noexcept { return {dim_, n_params()}; }

    /// Negative averaged log-likelihood; +inf when some intensity at an event is <= 0.
    double loglik_value(const Vector& w) const {
        check_size(w);
        double total = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double mu = w[static_cast<Eigen::Index>(i)];
            const auto a = alpha_row(w, i);
            const NodeData& nd = nodes_[i];
            double log_sum = 0.0;
            if (nd.g.rows() > 0) {
                const Vector lam = (nd.g * a).array() + mu;
                if (!(lam.minCoeff() > 0.0)) {
                    return std::numeric_limits<double>::infinity();
                }
                log_sum = lam.array().log().sum();
            }
            total += mu * total_time_ + a.dot(nd.G) - log_sum;
        }
        return total / scale();
    }

    Vector loglik_grad(const Vector& w) const {
        check_size(w);
        Vector grad(static_cast<Eigen::Index>(n_params()));
        const auto width = static_cast<Eigen::Index>(dim_ * n_layers_);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double mu = w[static_cast<Eigen::Index>(i)];
            const auto a = alpha_row(w, i);
            const NodeData& nd = nodes_[i];
            double d_mu = total_time_;
            Vector d_a = nd.G;
            if (nd.g.rows() > 0) {
                const Vector lam = (nd.g * a).array() + mu;
                if (!(lam.minCoeff() > 0.0)) {
                    throw numerical_error("hawkes loglik gradient: zero intensity at an event (infeasible point)");
                }
                const Vector inv = lam.cwiseInverse();
                d_mu -= inv.sum();
                d_a.noalias() -= nd.g.transpose() * inv;
            }
            grad[static_cast<Eigen::Index>(i)] = d_mu / scale();
            grad.segment(alpha_index(i, 0, 0), width) = d_a / scale();
        }
        return grad;
    }

    /// Least-squares contrast sum_i [ int lambda_i^2 - 2 sum_k lambda_i(t_k) ] / N_T.
    double lsq_value(const Vector& w) const {
        check_size(w);
        require_lsq();
        double total = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double mu = w[static_cast<Eigen::Index>(i)];
            const auto a = alpha_row(w, i);
            const NodeData& nd = nodes_[i];
            const double n_i = static_cast<double>(nd.g.rows());
            total += mu * mu * total_time_ + 2.0 * mu * a.dot(nd.G) + a.dot(gram(i) * a) - 2.0 * (n_i * mu + a.dot(nd.s));
        }
        return total / scale();
    }

    Vector lsq_grad(const Vector& w) const {
        check_size(w);
        require_lsq();
        Vector grad(static_cast<Eigen::Index>(n_params()));
        const auto width = static_cast<Eigen::Index>(dim_ * n_layers_);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double mu = w[static_cast<Eigen::Index>(i)];
            const auto a = alpha_row(w, i);
            const NodeData& nd = nodes_[i];
            const double n_i = static_cast<double>(nd.g.rows());
            grad[static_cast<Eigen::Index>(i)] = 2.0 * (mu * total_time_ + a.dot(nd.G) - n_i) / scale();
            grad.segment(alpha_index(i, 0, 0), width) = 2.0 * (mu * nd.G + gram(i) * a - nd.s) / scale();
        }
        return grad;
    }

    /// The contrast is quadratic: exact Lipschitz constant of its gradient.
    double lsq_lipschitz() const {
        require_lsq();
        double best = 0.0;
        const auto width = static_cast<Eigen::Index>(dim_ * n_layers_);
        for (std::size_t i = 0; i < dim_; ++i) {
            Matrix h(width + 1, width + 1);
            h(0, 0) = total_time_;
            h.block(1, 0, width, 1) = nodes_[i].G;
            h.block(0, 1, 1, width) = nodes_[i].G.transpose();
            h.block(1, 1, width, width) = gram(i);
            const double top = Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
            best = std::max(best, 2.0 * top / scale());
        }
        return best;
    }

    /// The log-likelihood has no global Lipschitz gradient. This is the
    /// curvature at the Poisson reference point mu_i = N_i / T, alpha = 0;
    /// the solvers' backtracking corrects it when it is too optimistic.
    double loglik_lipschitz_estimate() const {
        double best = 0.0;
        const auto width = static_cast<Eigen::Index>(dim_ * n_layers_);
        for (std::size_t i = 0; i < dim_; ++i) {
            const NodeData& nd = nodes_[i];
            const auto n_i = nd.g.rows();
            if (n_i == 0) {
                continue;
            }
            const double mu_ref = static_cast<double>(n_i) / total_time_;
            Matrix h(width + 1, width + 1);
            h(0, 0) = static_cast<double>(n_i);
            h.block(1, 0, width, 1) = nd.g.colwise().sum().transpose();
            h.block(0, 1, 1, width) = h.block(1, 0, width, 1).transpose();
            h.block(1, 1, width, width).noalias() = nd.g.transpose() * nd.g;
            const double top = Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
            best = std::max(best, top / (mu_ref * mu_ref * scale()));
        }
        return best > 0.0 ? best : 1.0;
    }

private:
    struct NodeData {
        RowMatrix g;
        Vector G;
        Vector s;
        std::size_t gram_slot{0};
    };

    double scale() const noexcept { return total_events_ > 0 ? static_cast<double>(total_events_) : 1.0; }

    void check_size(const Vector& w) const {
        if (static_cast<std::size_t>(w.size()) != n_params()) {
            throw config_error("hawkes parameter vector has length " + std::to_string(w.size()) + ", expected " +
                               std::to_string(n_params()));
        }
    }

    void check_params(const HawkesSumExpParams& p) const {
        if (p.dim() != dim_ || p.n_layers() != n_layers_) {
            throw data_error("hawkes parameters do not match the objective's dimension or layer count");
        }
    }

    void require_lsq() const {
        if (!with_lsq_) {
            throw config_error("least-squares terms were not precomputed for this objective");
        }
    }

    Eigen::VectorBlock<const Vector> alpha_row(const Vector& w, std::size_t i) const {
        return w.segment(alpha_index(i, 0, 0), static_cast<Eigen::Index>(dim_ * n_layers_));
    }

    const Matrix& gram(std::size_t i) const { return grams_[nodes_[i].gram_slot]; }

    double beta(std::size_t i, std::size_t j, std::size_t u) const {
        return decays_[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    void build_node(std::size_t i) {
        NodeData& nd = nodes_[i];
        std::size_t n_i = 0;
        for (const auto& r : realizations_) {
            n_i += r.count(i);
        }
        const std::size_t width = dim_ * n_layers_;
        nd.g = RowMatrix::Zero(static_cast<Eigen::Index>(n_i), static_cast<Eigen::Index>(width));
        nd.G = Vector::Zero(static_cast<Eigen::Index>(width));

        Eigen::Index row0 = 0;
        for (const auto& r : realizations_) {
            const auto targets = r.node(i);
            for (std::size_t j = 0; j < dim_; ++j) {
                const auto sources = r.node(j);
                for (std::size_t u = 0; u < n_layers_; ++u) {
                    const double b = beta(i, j, u);
                    const auto col = static_cast<Eigen::Index>(j * n_layers_ + u);
                    // state = sum over absorbed sources of b e^{-b (last - t_l)}
                    double state = 0.0;
                    double last = 0.0;
                    std::size_t l = 0;
                    for (std::size_t k = 0; k < targets.size(); ++k) {
                        const double t = targets[k];
                        while (l < sources.size() && sources[l] < t) {
                            state = state * std::exp(-b * (sources[l] - last)) + b;
                            last = sources[l];
                            ++l;
                        }
                        nd.g(row0 + static_cast<Eigen::Index>(k), col) = state * std::exp(-b * (t - last));
                    }
                    double integral = 0.0;
                    for (double t : sources) {
                        integral += -std::expm1(-b * (r.end_time() - t));
                    }
                    nd.G[col] += integral;
                }
            }
            row0 += static_cast<Eigen::Index>(targets.size());
        }

        if (!with_lsq_) {
            return;
        }
        nd.s = nd.g.colwise().sum().transpose();
        // Targets sharing a decay row share the same integral of g g^T.
        for (std::size_t other = 0; other < i; ++other) {
            bool same = true;
            for (std::size_t u = 0; u < n_layers_ && same; ++u) {
                same = decays_[u].row(static_cast<Eigen::Index>(i)) == decays_[u].row(static_cast<Eigen::Index>(other));
            }
            if (same) {
                nd.gram_slot = nodes_[other].gram_slot;
                return;
            }
        }
        nd.gram_slot = grams_.size();
        grams_.push_back(build_gram(i));
    }

    // Integral over [0, T] of g(t) g(t)^T for target i, walking the merged event stream:
    // between events each coordinate decays as e^{-b dt}, so the cross term of
    // coordinates m, n over a gap dt is g_m g_n (1 - e^{-(b_m + b_n) dt}) / (b_m + b_n).
    Matrix build_gram(std::size_t i) const {
        const auto width = static_cast<Eigen::Index>(dim_ * n_layers_);
        Vector b(width);
        for (std::size_t j = 0; j < dim_; ++j) {
            for (std::size_t u = 0; u < n_layers_; ++u) {
                b[static_cast<Eigen::Index>(j * n_layers_ + u)] = beta(i, j, u);
            }
        }
        Matrix sum_b(width, width);
        for (Eigen::Index m = 0; m < width; ++m) {
            for (Eigen::Index n = 0; n < width; ++n) {
                sum_b(m, n) = b[m] + b[n];
            }
        }
        Matrix c = Matrix::Zero(width, width);
        Vector state = Vector::Zero(width);
        Matrix weights(width, width);
        for (const auto& r : realizations_) {
            state.setZero();
            double now = 0.0;
            const auto add_interval = [&](double to) {
                const double dt = to - now;
                if (dt <= 0.0) {
                    return;
                }
                for (Eigen::Index m = 0; m < width; ++m) {
                    for (Eigen::Index n = 0; n <= m; ++n) {
                        weights(m, n) = -std::expm1(-sum_b(m, n) * dt) / sum_b(m, n);
                    }
                }
                for (Eigen::Index m = 0; m < width; ++m) {
                    if (state[m] == 0.0) {
                        continue;
                    }
                    for (Eigen::Index n = 0; n <= m; ++n) {
                        c(m, n) += state[m] * state[n] * weights(m, n);
                    }
                }
                state.array() *= (-b.array() * dt).exp();
                now = to;
            };
            for (const auto& e : merged_events(r)) {
                add_interval(e.time);
                for (std::size_t u = 0; u < n_layers_; ++u) {
                    const auto col = static_cast<Eigen::Index>(e.node * n_layers_ + u);
                    state[col] += b[col];
                }
            }
            add_interval(r.end_time());
        }
        return c.selfadjointView<Eigen::Lower>();
    }

    std::vector<EventRealization> realizations_;
    std::vector<Matrix> decays_;
    bool with_lsq_;
    std::size_t dim_{0};
    std::size_t n_layers_{0};
    std::size_t total_events_{0};
    double total_time_{0.0};
    std::vector<NodeData> nodes_;
    std::vector<Matrix> grams_;
};

/// Throwing front end: a zero intensity at an event is an error here, while
/// the solver-facing adapters below report it as +inf.
inline double hawkes_loglik(const HawkesExpObjective& obj, const Vector& w) {
    const double v = obj.loglik_value(w);
    if (std::isinf(v)) {
        throw numerical_error("hawkes loglik: zero intensity at an event (infeasible point)");
    }
    return v;
}

inline Vector hawkes_loglik_grad(const HawkesExpObjective& obj, const Vector& w) { return obj.loglik_grad(w); }

inline std::pair<double, Vector> hawkes_lsq(const HawkesExpObjective& obj, const Vector& w) {
    return {obj.lsq_value(w), obj.lsq_grad(w)};
}

/// Solver adapters (DifferentiableObjective).
class HawkesLoglikObjective {
public:
    explicit HawkesLoglikObjective(std::shared_ptr<const HawkesExpObjective> obj) : obj_(std::move(obj)) {}
    std::size_t n_params() const { return obj_->n_params(); }
    bool decomposable() const { return false; }
    double loss(const Vector& w) const { return obj_->loglik_value(w); }
    Vector grad(const Vector& w) const { return obj_->loglik_grad(w); }
    SmoothnessInfo smoothness() const {
        const double l = obj_->loglik_lipschitz_estimate();
        return {l, l};
    }
    const HawkesExpObjective& base() const { return *obj_; }

private:
    std::shared_ptr<const HawkesExpObjective> obj_;
};

class HawkesLsqObjective {
public:
    explicit HawkesLsqObjective(std::shared_ptr<const HawkesExpObjective> obj) : obj_(std::move(obj)) {
        if (!obj_->has_least_squares()) {
            throw config_error("least-squares objective needs an objective built with least-squares terms");
        }
        lipschitz_ = obj_->lsq_lipschitz();
    }
    std::size_t n_params() const { return obj_->n_params(); }
    bool decomposable() const { return false; }
    double loss(const Vector& w) const { return obj_->lsq_value(w); }
    Vector grad(const Vector& w) const { return obj_->lsq_grad(w); }
    SmoothnessInfo smoothness() const { return {lipschitz_, lipschitz_}; }
    const HawkesExpObjective& base() const { return *obj_; }

private:
    std::shared_ptr<const HawkesExpObjective> obj_;
    double lipschitz_{0.0};
};

} // namespace pointproc
