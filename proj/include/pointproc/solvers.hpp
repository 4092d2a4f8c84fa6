#pragma once

#include "pointproc/dataset.hpp"
#include "pointproc/error.hpp"
#include "pointproc/glm.hpp"
#include "pointproc/history.hpp"
#include "pointproc/prox.hpp"
#include "pointproc/rng.hpp"

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace pointproc {

/// Anything the batch solvers can minimize.
template <class T>
concept DifferentiableObjective = requires(const T& obj, const Vector& w) {
    { obj.n_params() } -> std::convertible_to<std::size_t>;
    { obj.loss(w) } -> std::convertible_to<double>;
    { obj.grad(w) } -> std::convertible_to<Vector>;
    { obj.smoothness() } -> std::convertible_to<SmoothnessInfo>;
    { obj.decomposable() } -> std::convertible_to<bool>;
};

enum class SolverKind { gd, agd, sgd, svrg, saga, sdca };

enum class StopReason { tolerance, max_iter, gap, diverged };

inline const char* to_string(SolverKind kind) {
    switch (kind) {
    case SolverKind::gd: return "gd";
    case SolverKind::agd: return "agd";
    case SolverKind::sgd: return "sgd";
    case SolverKind::svrg: return "svrg";
    case SolverKind::saga: return "saga";
    case SolverKind::sdca: return "sdca";
    }
    return "?";
}

inline const char* to_string(StopReason reason) {
    switch (reason) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_iter: return "max_iter";
    case StopReason::gap: return "gap";
    case StopReason::diverged: return "diverged";
    }
    return "?";
}

struct SolverConfig {
    SolverKind kind{SolverKind::agd};
    std::optional<double> step{};
    int max_iter{100}; // epochs for the stochastic kinds
    double tol{1e-10};
    std::uint64_t seed{0};
    int record_every{1};
    std::optional<double> sgd_decay{}; // t0, defaults to n
    int max_backtrack{10};
};

struct SolverResult {
    Vector minimizer;
    double objective{std::numeric_limits<double>::infinity()};
    std::vector<ConvergenceRecord> history;
    bool converged{false};
    StopReason stop_reason{StopReason::max_iter};
    std::optional<Vector> dual{}; // sdca only
};

template <DifferentiableObjective Objective>
double objective_value(const Objective& obj, const CompositePenalty& pen, const Vector& w) {
    return obj.loss(w) + pen.value(w);
}

/// Primal minus dual objective for l2sq-regularized least squares or
/// logistic regression, with dual variables `dual` (one per sample).
inline double duality_gap(const GlmObjective& obj, const PenaltySpec& pen, const Vector& primal_w,
                          const Vector& dual_vars) {
    if (obj.kind() != GlmKind::least_squares && obj.kind() != GlmKind::logistic) {
        throw config_error("duality_gap: needs least_squares or logistic");
    }
    if (pen.kind != PenaltyKind::l2sq || pen.range || pen.positive || !(pen.strength > 0.0)) {
        throw config_error("duality_gap: needs a full-range l2sq penalty with strength > 0");
    }
    const double n = static_cast<double>(obj.n_samples());
    const double lam = pen.strength;
    const double primal = obj.loss(primal_w) + 0.5 * lam * primal_w.squaredNorm();
    double dual = 0.0;
    for (std::size_t i = 0; i < obj.n_samples(); ++i) {
        dual += obj.dual_loss(i, dual_vars[static_cast<Eigen::Index>(i)]);
    }
    const Vector w_dual = obj.data().transpose_times(dual_vars) / (lam * n);
    dual = dual / n - 0.5 * lam * w_dual.squaredNorm();
    return primal - dual;
}

namespace detail {

// Wall clock that can be paused around objective evaluations.
class PausableTimer {
public:
    PausableTimer() : start_(clock::now()) {}
    void pause() { paused_at_ = clock::now(); }
    void resume() { excluded_ += clock::now() - paused_at_; }
    double elapsed() const {
        return std::chrono::duration<double>(clock::now() - start_ - excluded_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
    clock::time_point paused_at_{};
    clock::duration excluded_{};
};

template <class Objective>
double safe_loss(const Objective& obj, const Vector& w) {
    try {
        const double v = obj.loss(w);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    } catch (const numerical_error&) {
        return std::numeric_limits<double>::infinity();
    }
}

template <class Objective>
class Recorder {
public:
    Recorder(const Objective& obj, const CompositePenalty& pen, const SolverConfig& cfg, SolverResult& result)
        : obj_(obj), pen_(pen), cfg_(cfg), result_(result) {}

    // Evaluates F(w) outside the timed section and appends a history row.
    // Returns true when the solver should stop.
    bool record(int iteration, const Vector& w, bool allow_tolerance_stop = true,
                std::optional<double> gap = std::nullopt) {
        timer_.pause();
        const double f = safe_loss(obj_, w) + pen_.value(w);
        timer_.resume();
        if (!std::isfinite(f)) {
            result_.stop_reason = StopReason::diverged;
            result_.converged = false;
            return true;
        }
        result_.history.push_back({iteration, timer_.elapsed(), f, gap});
        if (f < result_.objective) {
            result_.objective = f;
            result_.minimizer = w;
        }
        bool stop = false;
        if (gap) {
            if (*gap <= cfg_.tol) {
                result_.stop_reason = StopReason::gap;
                result_.converged = true;
                stop = true;
            }
        } else if (previous_ && allow_tolerance_stop &&
                   std::abs(*previous_ - f) <= cfg_.tol * std::max(std::abs(*previous_), 1e-300)) {
            result_.stop_reason = StopReason::tolerance;
            result_.converged = true;
            stop = true;
        }
        previous_ = f;
        return stop;
    }

    bool due(int iteration) const { return iteration % cfg_.record_every == 0 || iteration == cfg_.max_iter; }

private:
    const Objective& obj_;
    const CompositePenalty& pen_;
    const SolverConfig& cfg_;
    SolverResult& result_;
    PausableTimer timer_{};
    std::optional<double> previous_{};
};

// One proximal gradient step from y with backtracking on the descent lemma.
// `step` shrinks in place when the lemma fails. Returns the new point and its
// smooth loss.
template <class Objective>
std::pair<Vector, double> prox_grad_step(const Objective& obj, const CompositePenalty& pen, const Vector& y,
                                         double loss_y, double& step, int max_backtrack) {
    const Vector g = obj.grad(y);
    Vector z;
    double loss_z = 0.0;
    for (int bt = 0; bt <= max_backtrack; ++bt) {
        z = pen.prox(y - step * g, step);
        loss_z = safe_loss(obj, z);
        const Vector d = z - y;
        const double model = loss_y + g.dot(d) + d.squaredNorm() / (2.0 * step);
        if (loss_z <= model + 1e-12 * std::abs(loss_y)) {
            break;
        }
        if (bt < max_backtrack) {
            step *= 0.5;
        }
    }
    return {std::move(z), loss_z};
}

template <class Objective>
void check_common(const Objective& obj, const CompositePenalty& pen, const SolverConfig& cfg, const Vector& w0) {
    if (static_cast<std::size_t>(w0.size()) != obj.n_params()) {
        throw config_error("dimension mismatch between w0 and the objective");
    }
    pen.validate(obj.n_params());
    if (cfg.max_iter <= 0 || cfg.record_every <= 0 || !(cfg.tol >= 0.0)) {
        throw config_error("solver needs max_iter > 0, record_every > 0 and tol >= 0");
    }
    if (cfg.step && !(*cfg.step > 0.0)) {
        throw config_error("solver step must be positive");
    }
}

template <class Objective>
SolverResult run_gd(const Objective& obj, const CompositePenalty& pen, const SolverConfig& cfg, const Vector& w0) {
    SolverResult result;
    result.minimizer = w0;
    Recorder<Objective> rec(obj, pen, cfg, result);
    double step = cfg.step.value_or(1.0 / std::max(obj.smoothness().lipschitz_full, 1e-300));
    Vector w = w0;
    double loss_w = safe_loss(obj, w);
    double fw = loss_w + pen.value(w);
    if (rec.record(0, w)) {
        return result;
    }
    for (int it = 1; it <= cfg.max_iter; ++it) {
        auto [z, loss_z] = prox_grad_step(obj, pen, w, loss_w, step, cfg.max_backtrack);
        const double fz = loss_z + pen.value(z);
        // At machine precision a step can only add rounding noise: stay put.
        if (fz <= fw) {
            w = std::move(z);
            loss_w = loss_z;
            fw = fz;
        }
        if (rec.due(it) && rec.record(it, w)) {
            return result;
        }
    }
    return result;
}

// FISTA with a monotone safeguard: a step that would increase F is rejected
// and the momentum restarts from the last accepted point.
template <class Objective>
SolverResult run_agd(const Objective& obj, const CompositePenalty& pen, const SolverConfig& cfg, const Vector& w0) {
    SolverResult result;
    result.minimizer = w0;
    Recorder<Objective> rec(obj, pen, cfg, result);
    double step = cfg.step.value_or(1.0 / std::max(obj.smoothness().lipschitz_full, 1e-300));
    Vector x = w0;
    Vector y = w0;
    double fx = safe_loss(obj, x) + pen.value(x);
    double loss_y = safe_loss(obj, y);
    double t = 1.0;
    if (rec.record(0, x)) {
        return result;
    }
    bool restarted_since_record = false;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        auto [z, loss_z] = prox_grad_step(obj, pen, y, loss_y, step, cfg.max_backtrack);
        const double fz = loss_z + pen.value(z);
        if (fz <= fx) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = z + ((t - 1.0) / t_next) * (z - x);
            x = std::move(z);
            fx = fz;
            t = t_next;
            loss_y = safe_loss(obj, y);
            // The extrapolated point can leave the domain (e.g. a Hawkes intensity hitting zero).
            if (!std::isfinite(loss_y)) {
                t = 1.0;
                y = x;
                loss_y = safe_loss(obj, y);
            }
        } else {
            t = 1.0;
            y = x;
            loss_y = safe_loss(obj, y);
            restarted_since_record = true;
        }
        if (rec.due(it)) {
            if (rec.record(it, x, !restarted_since_record)) {
                return result;
            }
            restarted_since_record = false;
        }
    }
    return result;
}

template <class Objective>
void require_stochastic_ready(const Objective& obj, SolverKind kind) {
    if constexpr (!std::is_same_v<Objective, GlmObjective>) {
        throw config_error(std::string(to_string(kind)) +
                           " needs a per-sample decomposable objective");
    } else if (!obj.decomposable()) {
        throw config_error(std::string(to_string(kind)) + " refuses cox_partial (not decomposable)");
    }
}

inline SolverResult run_sgd(const GlmObjective& obj, const CompositePenalty& pen, const SolverConfig& cfg,
                            const Vector& w0) {
    SolverResult result;
    result.minimizer = w0;
    Recorder<GlmObjective> rec(obj, pen, cfg, result);
    const std::size_t n = obj.n_samples();
    const double t0 = cfg.sgd_decay.value_or(static_cast<double>(n));
    const double scale = cfg.step.value_or(t0 / obj.smoothness().lipschitz_per_sample);
    const LabeledDataset& data = obj.data();
    RngStream rng(cfg.seed, 0);
    Vector w = w0;
    if (rec.record(0, w)) {
        return result;
    }
    double t = 0.0;
    for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
        for (std::size_t k = 0; k < n; ++k, t += 1.0) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            const double step = scale / (t + t0);
            const double d = obj.sample_derivative(i, data.row_dot(i, w));
            data.row_axpy(i, -step * d, w);
            w = pen.prox(w, step);
        }
        if (rec.due(epoch) && rec.record(epoch, w)) {
            return result;
        }
    }
    return result;
}

// Prox-SVRG, anchor = last inner iterate, epoch length n.
inline SolverResult run_svrg(const GlmObjective& obj, const CompositePenalty& pen, const SolverConfig& cfg,
                             const Vector& w0) {
    SolverResult result;
    result.minimizer = w0;
    Recorder<GlmObjective> rec(obj, pen, cfg, result);
    const std::size_t n = obj.n_samples();
    const double step = cfg.step.value_or(1.0 / (3.0 * obj.smoothness().lipschitz_per_sample));
    const LabeledDataset& data = obj.data();
    RngStream rng(cfg.seed, 0);
    Vector w = w0;
    std::vector<double> anchor_d(n);
    if (rec.record(0, w)) {
        return result;
    }
    for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
        const Vector anchor_scores = data.scores(w);
        for (std::size_t i = 0; i < n; ++i) {
            anchor_d[i] = obj.sample_derivative(i, anchor_scores[static_cast<Eigen::Index>(i)]);
        }
        const Vector full = data.transpose_times(Eigen::Map<const Vector>(anchor_d.data(), static_cast<Eigen::Index>(n))) /
                            static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            const double d = obj.sample_derivative(i, data.row_dot(i, w));
            Vector v = full;
            data.row_axpy(i, d - anchor_d[i], v);
            w = pen.prox(w - step * v, step);
        }
        if (!w.allFinite()) {
            result.stop_reason = StopReason::diverged;
            return result;
        }
        if (rec.due(epoch) && rec.record(epoch, w)) {
            return result;
        }
    }
    return result;
}

inline SolverResult run_saga(const GlmObjective& obj, const CompositePenalty& pen, const SolverConfig& cfg,
                             const Vector& w0) {
    SolverResult result;
    result.minimizer = w0;
    Recorder<GlmObjective> rec(obj, pen, cfg, result);
    const std::size_t n = obj.n_samples();
    const double step = cfg.step.value_or(1.0 / (3.0 * obj.smoothness().lipschitz_per_sample));
    const LabeledDataset& data = obj.data();
    RngStream rng(cfg.seed, 0);
    Vector w = w0;
    const Vector scores = data.scores(w);
    std::vector<double> memory(n);
    for (std::size_t i = 0; i < n; ++i) {
        memory[i] = obj.sample_derivative(i, scores[static_cast<Eigen::Index>(i)]);
    }
    Vector mean_grad = data.transpose_times(Eigen::Map<const Vector>(memory.data(), static_cast<Eigen::Index>(n))) /
                       static_cast<double>(n);
    if (rec.record(0, w)) {
        return result;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            const double d = obj.sample_derivative(i, data.row_dot(i, w));
            const double delta = d - memory[i];
            Vector v = mean_grad;
            data.row_axpy(i, delta, v);
            data.row_axpy(i, delta * inv_n, mean_grad);
            memory[i] = d;
            w = pen.prox(w - step * v, step);
        }
        if (!w.allFinite()) {
            result.stop_reason = StopReason::diverged;
            return result;
        }
        if (rec.due(epoch) && rec.record(epoch, w)) {
            return result;
        }
    }
    return result;
}

// Dual coordinate ascent; the primal iterate is w = X^T alpha / (lambda n).
// The starting point is the zero dual, so w0 only fixes the dimension.
inline SolverResult run_sdca(const GlmObjective& obj, const CompositePenalty& pen, const SolverConfig& cfg) {
    if (obj.kind() != GlmKind::least_squares && obj.kind() != GlmKind::logistic) {
        throw config_error("sdca supports least_squares and logistic only");
    }
    if (pen.parts().size() != 1) {
        throw config_error("sdca needs exactly one l2sq penalty");
    }
    const PenaltySpec& l2 = pen.parts().front();
    if (l2.kind != PenaltyKind::l2sq || l2.range || l2.positive || !(l2.strength > 0.0)) {
        throw config_error("sdca needs a full-range l2sq penalty with strength > 0");
    }
    SolverResult result;
    Recorder<GlmObjective> rec(obj, pen, cfg, result);
    const std::size_t n = obj.n_samples();
    const double lam_n = l2.strength * static_cast<double>(n);
    const LabeledDataset& data = obj.data();
    RngStream rng(cfg.seed, 0);
    std::vector<double> bound(n);
    for (std::size_t i = 0; i < n; ++i) {
        bound[i] = data.row_squared_norm(i) / lam_n;
    }
    Vector alpha = Vector::Zero(static_cast<Eigen::Index>(n));
    Vector w = Vector::Zero(static_cast<Eigen::Index>(obj.n_params()));
    result.minimizer = w;
    if (rec.record(0, w, true, duality_gap(obj, l2, w, alpha))) {
        result.dual = alpha;
        return result;
    }
    for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            const auto ii = static_cast<Eigen::Index>(i);
            const double updated = obj.sdca_dual_step(i, alpha[ii], data.row_dot(i, w), bound[i]);
            const double delta = updated - alpha[ii];
            if (delta != 0.0) {
                alpha[ii] = updated;
                data.row_axpy(i, delta / lam_n, w);
            }
        }
        // Resynchronize against accumulated rounding.
        w = data.transpose_times(alpha) / lam_n;
        if (rec.due(epoch)) {
            const double gap = duality_gap(obj, l2, w, alpha);
            if (rec.record(epoch, w, true, gap)) {
                break;
            }
        }
    }
    result.minimizer = w;
    result.objective = obj.loss(w) + pen.value(w);
    result.dual = alpha;
    return result;
}

} // namespace detail

/// Minimizes F(w) = f(w) + g(w) with the solver selected by `cfg.kind`.
///
/// Returns the best recorded iterate. Stochastic kinds (sgd, svrg, saga,
/// sdca) only accept per-sample decomposable GLM objectives; sdca further
/// needs least squares or logistic loss with a full-range l2sq penalty and
/// stops on the duality gap.
template <DifferentiableObjective Objective>
SolverResult minimize(const Objective& obj, const CompositePenalty& pen, const SolverConfig& cfg, const Vector& w0) {
    detail::check_common(obj, pen, cfg, w0);
    switch (cfg.kind) {
    case SolverKind::gd:
        return detail::run_gd(obj, pen, cfg, w0);
    case SolverKind::agd:
        return detail::run_agd(obj, pen, cfg, w0);
    case SolverKind::sgd:
    case SolverKind::svrg:
    case SolverKind::saga:
    case SolverKind::sdca:
        detail::require_stochastic_ready(obj, cfg.kind);
        if constexpr (std::is_same_v<Objective, GlmObjective>) {
            switch (cfg.kind) {
            case SolverKind::sgd: return detail::run_sgd(obj, pen, cfg, w0);
            case SolverKind::svrg: return detail::run_svrg(obj, pen, cfg, w0);
            case SolverKind::saga: return detail::run_saga(obj, pen, cfg, w0);
            default: return detail::run_sdca(obj, pen, cfg);
            }
        }
        break;
    }
    throw config_error("unknown solver kind");
}

} // namespace pointproc
