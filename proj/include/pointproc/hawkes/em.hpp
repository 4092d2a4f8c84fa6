#pragma once

#include "pointproc/error.hpp"
#include "pointproc/events.hpp"
#include "pointproc/hawkes/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pointproc {

/// Piecewise-constant kernels on a uniform grid 0 = s_0 < ... < s_M = support.
struct EmKernelEstimate {
    std::size_t dim{0};
    std::vector<double> grid{};
    std::vector<double> values{}; // height of phi_ij on bin m at (i*dim + j)*M + m
    Vector baseline{};

    std::size_t grid_size() const noexcept { return grid.empty() ? 0 : grid.size() - 1; }
    double support() const noexcept { return grid.empty() ? 0.0 : grid.back(); }
    double bin_width() const noexcept { return support() / static_cast<double>(grid_size()); }

    double& value(std::size_t i, std::size_t j, std::size_t m) { return values[(i * dim + j) * grid_size() + m]; }
    double value(std::size_t i, std::size_t j, std::size_t m) const { return values[(i * dim + j) * grid_size() + m]; }

    /// phi_ij(t); zero outside (0, support).
    double kernel_at(std::size_t i, std::size_t j, double t) const {
        if (!(t > 0.0) || t >= support()) {
            return 0.0;
        }
        const auto m = std::min(static_cast<std::size_t>(t / bin_width()), grid_size() - 1);
        return value(i, j, m);
    }
};

inline Matrix kernel_norms(const EmKernelEstimate& e) {
    const auto d = static_cast<Eigen::Index>(e.dim);
    Matrix out = Matrix::Zero(d, d);
    const double width = e.bin_width();
    for (std::size_t i = 0; i < e.dim; ++i) {
        for (std::size_t j = 0; j < e.dim; ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m < e.grid_size(); ++m) {
                acc += e.value(i, j, m) * width;
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
        }
    }
    return out;
}

/// Integral over (0, inf) of (phi_hat_ij - alpha beta e^{-beta t})^2, in closed form.
inline double em_integrated_squared_error(const EmKernelEstimate& e, std::size_t i, std::size_t j, double alpha,
                                          double beta) {
    const double width = e.bin_width();
    double total = 0.0;
    for (std::size_t m = 0; m < e.grid_size(); ++m) {
        const double a = e.grid[m];
        const double b = a + width;
        const double h = e.value(i, j, m);
        const double int_phi = alpha * (std::exp(-beta * a) - std::exp(-beta * b));
        const double int_phi2 = 0.5 * alpha * alpha * beta * (std::exp(-2.0 * beta * a) - std::exp(-2.0 * beta * b));
        total += h * h * width - 2.0 * h * int_phi + int_phi2;
    }
    total += 0.5 * alpha * alpha * beta * std::exp(-2.0 * beta * e.support());
    return total;
}

/// Compensator increments between consecutive events of each node under a
/// piecewise-constant model, the first one measured from time 0.
inline std::vector<std::vector<double>> em_time_change_residuals(const EmKernelEstimate& e,
                                                                 const EventRealization& r) {
    if (e.dim != r.dim()) {
        throw data_error("dimension mismatch between EM model and events");
    }
    const std::size_t m_count = e.grid_size();
    const double width = e.bin_width();
    // cumulative[(i*D + j)*(M+1) + m] = integral of phi_ij over [0, m*width]
    std::vector<double> cumulative(e.dim * e.dim * (m_count + 1), 0.0);
    for (std::size_t ij = 0; ij < e.dim * e.dim; ++ij) {
        for (std::size_t m = 0; m < m_count; ++m) {
            cumulative[ij * (m_count + 1) + m + 1] = cumulative[ij * (m_count + 1) + m] + e.values[ij * m_count + m] * width;
        }
    }
    const auto kernel_integral = [&](std::size_t ij, double x) {
        if (x <= 0.0) {
            return 0.0;
        }
        if (x >= e.support()) {
            return cumulative[ij * (m_count + 1) + m_count];
        }
        const auto m = std::min(static_cast<std::size_t>(x / width), m_count - 1);
        return cumulative[ij * (m_count + 1) + m] + e.values[ij * m_count + m] * (x - static_cast<double>(m) * width);
    };
    // Lambda_i(t) = mu_i t + sum_j sum_{t_l < t} Phi_ij(t - t_l)
    const auto compensator = [&](std::size_t i, double t) {
        double total = e.baseline[static_cast<Eigen::Index>(i)] * t;
        for (std::size_t j = 0; j < e.dim; ++j) {
            const std::size_t ij = i * e.dim + j;
            const auto src = r.node(j);
            const auto old_end = std::upper_bound(src.begin(), src.end(), t - e.support());
            const auto stop = std::lower_bound(src.begin(), src.end(), t);
            total += static_cast<double>(std::distance(src.begin(), old_end)) * kernel_integral(ij, e.support());
            for (auto it = old_end; it < stop; ++it) {
                total += kernel_integral(ij, t - *it);
            }
        }
        return total;
    };
    std::vector<std::vector<double>> out(e.dim);
    for (std::size_t i = 0; i < e.dim; ++i) {
        double previous = 0.0;
        for (double t : r.node(i)) {
            const double now = compensator(i, t);
            out[i].push_back(now - previous);
            previous = now;
        }
    }
    return out;
}

struct EmConfig {
    double support{0.0}; // <= 0 selects the default 5 / beta_rough
    std::size_t grid_size{20};
    int max_iter{200};
    double tol{1e-8};
};

/// Rough decay scale for the default support: the mean per-node event rate.
inline double em_default_support(const std::vector<EventRealization>& rs) {
    double time = 0.0;
    double events = 0.0;
    std::size_t d = 0;
    for (const auto& r : rs) {
        time += r.end_time();
        events += static_cast<double>(r.total_events());
        d = r.dim();
    }
    if (events == 0.0 || d == 0) {
        return time > 0.0 ? time : 1.0;
    }
    const double beta_rough = events / (static_cast<double>(d) * time);
    return 5.0 / beta_rough;
}

/// Expected branching structure produced by one E-step.
struct EmBranching {
    Vector background;                  // expected number of immigrant events per node
    std::vector<double> offspring;      // expected children of j landing in bin m of i, same layout as values
    std::vector<double> event_total{};  // per event: background + parent probabilities (filled on request)
};

class EmEstimator {
public:
    EmEstimator(std::vector<EventRealization> realizations, double support, std::size_t grid_size)
        : realizations_(std::move(realizations)), support_(support), m_(grid_size) {
        if (realizations_.empty()) {
            throw config_error("EM needs at least one realization");
        }
        if (!(support_ > 0.0) || !std::isfinite(support_)) {
            throw config_error("EM kernel support must be positive");
        }
        if (m_ == 0) {
            throw config_error("EM grid size must be at least 1");
        }
        dim_ = realizations_.front().dim();
        for (const auto& r : realizations_) {
            if (r.dim() != dim_) {
                throw data_error("all realizations must have the same dimension");
            }
            total_time_ += r.end_time();
        }
        width_ = support_ / static_cast<double>(m_);
        counts_.assign(dim_, 0);
        exposure_.assign(dim_ * m_, 0.0);
        offsets_.push_back(0);
        for (std::size_t i = 0; i < dim_; ++i) {
            for (const auto& r : realizations_) {
                collect_parents(r, i);
            }
        }
        for (const auto& r : realizations_) {
            for (std::size_t j = 0; j < dim_; ++j) {
                for (double t : r.node(j)) {
                    for (std::size_t m = 0; m < m_; ++m) {
                        const double left = r.end_time() - t - static_cast<double>(m) * width_;
                        exposure_[j * m_ + m] += std::clamp(left, 0.0, width_);
                    }
                }
            }
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t grid_size() const noexcept { return m_; }
    std::size_t n_events() const noexcept { return target_node_.size(); }
    bool has_parent_pairs() const noexcept { return !entries_.empty(); }

    EmKernelEstimate initial() const {
        EmKernelEstimate e = empty_estimate();
        for (std::size_t i = 0; i < dim_; ++i) {
            e.baseline[static_cast<Eigen::Index>(i)] = 0.5 * static_cast<double>(counts_[i]) / total_time_;
        }
        std::fill(e.values.begin(), e.values.end(), 0.5 / (static_cast<double>(dim_) * support_));
        return e;
    }

    double log_likelihood(const EmKernelEstimate& e) const {
        double ll = 0.0;
        for (std::size_t k = 0; k < n_events(); ++k) {
            ll += std::log(event_intensity(e, k));
        }
        for (std::size_t i = 0; i < dim_; ++i) {
            ll -= e.baseline[static_cast<Eigen::Index>(i)] * total_time_;
            for (std::size_t j = 0; j < dim_; ++j) {
                for (std::size_t m = 0; m < m_; ++m) {
                    ll -= e.value(i, j, m) * exposure_[j * m_ + m];
                }
            }
        }
        return ll;
    }

    EmBranching e_step(const EmKernelEstimate& e, bool keep_event_totals = false) const {
        EmBranching b{Vector::Zero(static_cast<Eigen::Index>(dim_)), std::vector<double>(dim_ * dim_ * m_, 0.0), {}};
        if (keep_event_totals) {
            b.event_total.resize(n_events());
        }
        for (std::size_t k = 0; k < n_events(); ++k) {
            const std::size_t i = target_node_[k];
            const double z = event_intensity(e, k);
            const double p0 = e.baseline[static_cast<Eigen::Index>(i)] / z;
            b.background[static_cast<Eigen::Index>(i)] += p0;
            double total = p0;
            for (std::size_t q = offsets_[k]; q < offsets_[k + 1]; ++q) {
                const auto [jm, count] = entries_[q];
                const double p = e.values[i * dim_ * m_ + jm] / z;
                total += static_cast<double>(count) * p;
                b.offspring[i * dim_ * m_ + jm] += static_cast<double>(count) * p;
            }
            if (keep_event_totals) {
                b.event_total[k] = total;
            }
        }
        return b;
    }

    EmKernelEstimate m_step(const EmBranching& b) const {
        EmKernelEstimate e = empty_estimate();
        e.baseline = b.background / total_time_;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                for (std::size_t m = 0; m < m_; ++m) {
                    const double exposure = exposure_[j * m_ + m];
                    const std::size_t idx = (i * dim_ + j) * m_ + m;
                    e.values[idx] = exposure > 0.0 ? b.offspring[idx] / exposure : 0.0;
                }
            }
        }
        return e;
    }

private:
    EmKernelEstimate empty_estimate() const {
        EmKernelEstimate e;
        e.dim = dim_;
        e.grid.resize(m_ + 1);
        for (std::size_t m = 0; m <= m_; ++m) {
            e.grid[m] = m == m_ ? support_ : static_cast<double>(m) * width_;
        }
        e.values.assign(dim_ * dim_ * m_, 0.0);
        e.baseline = Vector::Zero(static_cast<Eigen::Index>(dim_));
        return e;
    }

    double event_intensity(const EmKernelEstimate& e, std::size_t k) const {
        const std::size_t i = target_node_[k];
        double z = e.baseline[static_cast<Eigen::Index>(i)];
        for (std::size_t q = offsets_[k]; q < offsets_[k + 1]; ++q) {
            const auto [jm, count] = entries_[q];
            z += static_cast<double>(count) * e.values[i * dim_ * m_ + jm];
        }
        if (!(z > 0.0)) {
            throw numerical_error("EM: zero intensity at an event");
        }
        return z;
    }

    // Candidate parents of each event of node i, aggregated by (source node, bin):
    // parents in the same bin always share the same branching probability.
    void collect_parents(const EventRealization& r, std::size_t i) {
        for (double t : r.node(i)) {
            ++counts_[i];
            target_node_.push_back(i);
            for (std::size_t j = 0; j < dim_; ++j) {
                const auto src = r.node(j);
                auto it = std::upper_bound(src.begin(), src.end(), t - support_);
                const std::size_t first_entry = entries_.size();
                for (; it != src.end() && *it < t; ++it) {
                    const double lag = t - *it;
                    if (lag >= support_) {
                        continue;
                    }
                    const auto m = std::min(static_cast<std::size_t>(lag / width_), m_ - 1);
                    const auto jm = static_cast<std::uint32_t>(j * m_ + m);
                    if (entries_.size() > first_entry && entries_.back().first == jm) {
                        ++entries_.back().second;
                    } else {
                        entries_.emplace_back(jm, 1U);
                    }
                }
            }
            offsets_.push_back(entries_.size());
        }
    }

    std::vector<EventRealization> realizations_;
    double support_;
    std::size_t m_;
    std::size_t dim_{0};
    double width_{0.0};
    double total_time_{0.0};
    std::vector<std::size_t> counts_;
    std::vector<double> exposure_; // j*M + m
    std::vector<std::size_t> target_node_;
    std::vector<std::size_t> offsets_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries_;
};

struct EmResult {
    EmKernelEstimate estimate;
    std::vector<double> loglik; // one value per iterate, starting point included
    int iterations{0};
    bool converged{false};
    std::vector<std::string> warnings{};
};

inline EmResult fit_em(std::vector<EventRealization> realizations, const EmConfig& cfg) {
    if (cfg.max_iter <= 0 || !(cfg.tol >= 0.0)) {
        throw config_error("EM needs max_iter > 0 and tol >= 0");
    }
    const double support = cfg.support > 0.0 ? cfg.support : em_default_support(realizations);
    const EmEstimator em(std::move(realizations), support, cfg.grid_size);
    EmResult out;
    out.estimate = em.initial();
    if (!em.has_parent_pairs()) {
        out.warnings.push_back("kernel support is shorter than every inter-event gap: all kernels are zero");
        EmBranching b = em.e_step(out.estimate);
        out.estimate = em.m_step(b);
        out.loglik.push_back(em.log_likelihood(out.estimate));
        out.iterations = 1;
        out.converged = true;
        return out;
    }
    double ll = em.log_likelihood(out.estimate);
    out.loglik.push_back(ll);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        out.estimate = em.m_step(em.e_step(out.estimate));
        const double next = em.log_likelihood(out.estimate);
        out.loglik.push_back(next);
        out.iterations = it;
        const bool small = std::abs(next - ll) <= cfg.tol * std::max(1.0, std::abs(ll));
        ll = next;
        if (small) {
            out.converged = true;
            break;
        }
    }
    return out;
}

} // namespace pointproc
