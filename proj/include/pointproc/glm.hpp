#pragma once

#include "pointproc/dataset.hpp"
#include "pointproc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace pointproc {

enum class GlmKind { least_squares, logistic, poisson, huber, cox_partial };

struct SmoothnessInfo {
    double lipschitz_full{0.0};
    double lipschitz_per_sample{0.0};
};

struct GlmOptions {
    double huber_delta{1.0};
    // Radius R of the ball on which the Poisson curvature bound
    // max_i ||x_i||^2 exp(||x_i|| R) is taken.
    double poisson_radius{1.0};
    // Scores are clamped to +-poisson_clamp before exponentiation.
    double poisson_clamp{50.0};
};

inline const char* to_string(GlmKind kind) {
    switch (kind) {
    case GlmKind::least_squares: return "least_squares";
    case GlmKind::logistic: return "logistic";
    case GlmKind::poisson: return "poisson";
    case GlmKind::huber: return "huber";
    case GlmKind::cox_partial: return "cox_partial";
    }
    return "?";
}

namespace detail {

// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Largest eigenvalue of X^T X by power iteration from a fixed start.
inline double gram_spectral_norm(const LabeledDataset& data, int max_iter = 500, double tol = 1e-12) {
    const auto p = static_cast<Eigen::Index>(data.n_features());
    Vector v = Vector::Ones(p) / std::sqrt(static_cast<double>(p));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector u = data.transpose_times(data.scores(v));
        const double norm = u.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        v = u / norm;
        if (std::abs(norm - lambda) <= tol * norm) {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    return lambda;
}

} // namespace detail

/// Averaged empirical loss f(w) = (1/n) sum_i l_i(x_i . w) over a dataset.
///
/// least_squares  l_i = (s - y)^2 / 2
/// logistic       l_i = log(1 + exp(-y s)),  y in {-1, +1}
/// poisson        l_i = exp(s) - y s         (log link, log(y!) dropped)
/// huber          l_i = r^2 / 2 if |r| <= delta, else delta (|r| - delta / 2), r = s - y
/// cox_partial    negative Breslow partial log-likelihood averaged over observed failures
///
/// Cox uses the labels as durations and the censoring flags as failure
/// indicators; it is not decomposable into per-sample losses.
class GlmObjective {
public:
    GlmObjective(GlmKind kind, std::shared_ptr<const LabeledDataset> data, GlmOptions options = {})
        : kind_(kind), data_(std::move(data)), options_(options) {
        if (!data_) {
            throw config_error("GlmObjective needs a dataset");
        }
        check_labels();
        if (kind_ == GlmKind::cox_partial) {
            prepare_cox();
        }
    }

    GlmKind kind() const noexcept { return kind_; }
    const LabeledDataset& data() const noexcept { return *data_; }
    const GlmOptions& options() const noexcept { return options_; }
    std::size_t n_samples() const { return data_->n_samples(); }
    std::size_t n_params() const { return data_->n_features(); }
    bool decomposable() const noexcept { return kind_ != GlmKind::cox_partial; }

    double loss(const Vector& w) const {
        check_dim(w);
        const Vector s = data_->scores(w);
        if (kind_ == GlmKind::cox_partial) {
            return cox_loss(s);
        }
        double acc = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            acc += sample_loss(static_cast<std::size_t>(i), s[i]);
        }
        return acc / static_cast<double>(n_samples());
    }

    Vector grad(const Vector& w) const {
        check_dim(w);
        const Vector s = data_->scores(w);
        if (kind_ == GlmKind::cox_partial) {
            return cox_grad(s);
        }
        Vector d(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            d[i] = sample_derivative(static_cast<std::size_t>(i), s[i]);
        }
        return data_->transpose_times(d) / static_cast<double>(n_samples());
    }

    Vector grad_sample(const Vector& w, std::size_t i) const {
        check_dim(w);
        require_decomposable("grad_sample");
        if (i >= n_samples()) {
            throw config_error("sample index out of range");
        }
        Vector g = Vector::Zero(w.size());
        data_->row_axpy(i, sample_derivative(i, data_->row_dot(i, w)), g);
        return g;
    }

    // l_i evaluated at score s.
    double sample_loss(std::size_t i, double s) const {
        const double y = data_->labels()[static_cast<Eigen::Index>(i)];
        switch (kind_) {
        case GlmKind::least_squares:
            return 0.5 * (s - y) * (s - y);
        case GlmKind::logistic:
            return detail::log1pexp(-y * s);
        case GlmKind::poisson: {
            const double c = options_.poisson_clamp;
            const double clamped = std::clamp(s, -c, c);
            const double value = std::exp(clamped) - y * clamped;
            if (clamped != s) {
                const double raw = std::exp(s) - y * s;
                if (!(std::abs(raw - value) <= 1e-8)) {
                    throw numerical_error("poisson score " + std::to_string(s) +
                                          " beyond the exponent guard");
                }
            }
            return value;
        }
        case GlmKind::huber: {
            const double r = s - y;
            const double delta = options_.huber_delta;
            return std::abs(r) <= delta ? 0.5 * r * r : delta * (std::abs(r) - 0.5 * delta);
        }
        case GlmKind::cox_partial:
            break;
        }
        throw config_error("sample_loss: cox_partial has no per-sample loss");
    }

    // d l_i / d s at score s.
    double sample_derivative(std::size_t i, double s) const {
        const double y = data_->labels()[static_cast<Eigen::Index>(i)];
        switch (kind_) {
        case GlmKind::least_squares:
            return s - y;
        case GlmKind::logistic:
            return -y * detail::sigmoid(-y * s);
        case GlmKind::poisson: {
            const double c = options_.poisson_clamp;
            return std::exp(std::clamp(s, -c, c)) - y;
        }
        case GlmKind::huber:
            return std::clamp(s - y, -options_.huber_delta, options_.huber_delta);
        case GlmKind::cox_partial:
            break;
        }
        throw config_error("sample_derivative: cox_partial is not decomposable");
    }

    SmoothnessInfo smoothness() const {
        double max_sq = 0.0;
        for (std::size_t i = 0; i < n_samples(); ++i) {
            max_sq = std::max(max_sq, data_->row_squared_norm(i));
        }
        const double n = static_cast<double>(n_samples());
        switch (kind_) {
        case GlmKind::least_squares:
        case GlmKind::huber: {
            const double full = detail::gram_spectral_norm(*data_) / n;
            return {std::min(full, max_sq), max_sq};
        }
        case GlmKind::logistic: {
            const double full = detail::gram_spectral_norm(*data_) / (4.0 * n);
            return {std::min(full, max_sq / 4.0), max_sq / 4.0};
        }
        case GlmKind::poisson: {
            const double growth = std::exp(std::sqrt(max_sq) * options_.poisson_radius);
            const double full = detail::gram_spectral_norm(*data_) / n * growth;
            return {std::min(full, max_sq * growth), max_sq * growth};
        }
        case GlmKind::cox_partial:
            // Each risk-set term is a log-sum-exp whose Hessian is a weighted
            // covariance of the rows, bounded by max ||x_i||^2.
            return {max_sq, max_sq};
        }
        return {};
    }

    /// New value of dual variable i after an exact coordinate maximization of
    /// the SDCA dual, given the current margin x_i . w and
    /// bound = ||x_i||^2 / (lambda n).
    double sdca_dual_step(std::size_t i, double current_dual, double margin, double bound) const {
        const double y = data_->labels()[static_cast<Eigen::Index>(i)];
        switch (kind_) {
        case GlmKind::least_squares:
            return (y - margin + bound * current_dual) / (1.0 + bound);
        case GlmKind::logistic: {
            // Maximize over b = a y in [0, 1]:
            //   H(b) - y (b - b0) margin - bound / 2 (b - b0)^2, H the binary entropy.
            // In logit coordinates u the optimality condition
            //   G(u) = u + y margin + bound (sigmoid(u) - b0) = 0
            // is increasing with G' in [1, 1 + bound / 4]: safeguarded Newton.
            const double b0 = std::clamp(current_dual * y, 0.0, 1.0);
            double lo = -y * margin - bound * (1.0 - b0);
            double hi = -y * margin + bound * b0;
            double u = std::clamp(-y * margin, lo, hi);
            for (int it = 0; it < 100; ++it) {
                const double sig = detail::sigmoid(u);
                const double g = u + y * margin + bound * (sig - b0);
                if (g > 0.0) {
                    hi = u;
                } else if (g < 0.0) {
                    lo = u;
                } else {
                    break;
                }
                double next = u - g / (1.0 + bound * sig * (1.0 - sig));
                if (!(next > lo && next < hi)) {
                    next = 0.5 * (lo + hi);
                }
                if (std::abs(next - u) <= 1e-15 * std::max(1.0, std::abs(u))) {
                    u = next;
                    break;
                }
                u = next;
            }
            return y * detail::sigmoid(u);
        }
        default:
            break;
        }
        throw config_error(std::string("sdca_dual_step: no conjugate for ") + to_string(kind_));
    }

    /// -l_i^*(-a): the per-sample term of the SDCA dual objective, -inf when
    /// a is outside the dual domain.
    double dual_loss(std::size_t i, double a) const {
        const double y = data_->labels()[static_cast<Eigen::Index>(i)];
        switch (kind_) {
        case GlmKind::least_squares:
            return -0.5 * a * a + a * y;
        case GlmKind::logistic: {
            const double b = a * y;
            if (b < 0.0 || b > 1.0) {
                return -std::numeric_limits<double>::infinity();
            }
            const auto xlogx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
            return -xlogx(b) - xlogx(1.0 - b);
        }
        default:
            break;
        }
        throw config_error(std::string("dual_loss: no conjugate for ") + to_string(kind_));
    }

private:
    void check_dim(const Vector& w) const {
        if (static_cast<std::size_t>(w.size()) != n_params()) {
            throw config_error("dimension mismatch: expected " + std::to_string(n_params()) +
                               " parameters, got " + std::to_string(w.size()));
        }
    }

    void require_decomposable(const char* what) const {
        if (!decomposable()) {
            throw config_error(std::string(what) + ": unsupported for cox_partial (not decomposable)");
        }
    }

    void check_labels() const {
        const Vector& y = data_->labels();
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            switch (kind_) {
            case GlmKind::logistic:
                if (y[i] != 1.0 && y[i] != -1.0) {
                    throw data_error("logistic labels must be -1 or +1");
                }
                break;
            case GlmKind::poisson:
                if (y[i] < 0.0 || y[i] != std::floor(y[i])) {
                    throw data_error("poisson labels must be nonnegative integers");
                }
                break;
            case GlmKind::cox_partial:
                if (y[i] < 0.0) {
                    throw data_error("survival durations must be nonnegative");
                }
                break;
            default:
                break;
            }
        }
        if (kind_ == GlmKind::huber && !(options_.huber_delta > 0.0)) {
            throw config_error("huber delta must be positive");
        }
        if (kind_ == GlmKind::cox_partial && !data_->censoring()) {
            throw data_error("cox model needs an 'observed' column in the labels file");
        }
    }

    // Sorts by decreasing duration and groups ties so that each risk set
    // {j : T_j >= T_i} is a prefix of the order.
    void prepare_cox() {
        const std::size_t n = n_samples();
        const Vector& t = data_->labels();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            return t[static_cast<Eigen::Index>(a)] > t[static_cast<Eigen::Index>(b)];
        });
        tie_end_.clear();
        for (std::size_t k = 0; k < n; ++k) {
            if (k + 1 == n || t[static_cast<Eigen::Index>(order_[k + 1])] != t[static_cast<Eigen::Index>(order_[k])]) {
                tie_end_.push_back(k + 1);
            }
        }
        const auto& observed = *data_->censoring();
        n_failures_ = static_cast<std::size_t>(std::count(observed.begin(), observed.end(), true));
        if (n_failures_ == 0) {
            throw data_error("cox model needs at least one observed failure");
        }
    }

    double cox_loss(const Vector& s) const {
        const auto& observed = *data_->censoring();
        const double shift = s.maxCoeff();
        double risk = 0.0;
        double acc = 0.0;
        std::size_t k = 0;
        for (const std::size_t end : tie_end_) {
            const std::size_t begin = k;
            for (; k < end; ++k) {
                risk += std::exp(s[static_cast<Eigen::Index>(order_[k])] - shift);
            }
            const double log_risk = std::log(risk) + shift;
            for (std::size_t m = begin; m < end; ++m) {
                if (observed[order_[m]]) {
                    acc += s[static_cast<Eigen::Index>(order_[m])] - log_risk;
                }
            }
        }
        return -acc / static_cast<double>(n_failures_);
    }

    Vector cox_grad(const Vector& s) const {
        const auto& observed = *data_->censoring();
        const double shift = s.maxCoeff();
        const auto p = static_cast<Eigen::Index>(n_params());
        Vector weighted = Vector::Zero(p);
        Vector g = Vector::Zero(p);
        double risk = 0.0;
        std::size_t k = 0;
        for (const std::size_t end : tie_end_) {
            const std::size_t begin = k;
            for (; k < end; ++k) {
                const double e = std::exp(s[static_cast<Eigen::Index>(order_[k])] - shift);
                risk += e;
                data_->row_axpy(order_[k], e, weighted);
            }
            double failures = 0.0;
            for (std::size_t m = begin; m < end; ++m) {
                if (observed[order_[m]]) {
                    data_->row_axpy(order_[m], -1.0, g);
                    failures += 1.0;
                }
            }
            if (failures > 0.0) {
                g += (failures / risk) * weighted;
            }
        }
        return g / static_cast<double>(n_failures_);
    }

    GlmKind kind_;
    std::shared_ptr<const LabeledDataset> data_;
    GlmOptions options_;
    std::vector<std::size_t> order_{};
    std::vector<std::size_t> tie_end_{};
    std::size_t n_failures_{0};
};

} // namespace pointproc
