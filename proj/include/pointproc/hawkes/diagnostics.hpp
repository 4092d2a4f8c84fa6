#pragma once

#include "pointproc/events.hpp"
#include "pointproc/hawkes/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace pointproc {

struct TimedEvent {
    double time;
    std::size_t node;
};

// All events in time order. Simultaneous events keep node order.
inline std::vector<TimedEvent> merged_events(const EventRealization& r) {
    std::vector<TimedEvent> out;
    out.reserve(r.total_events());
    for (std::size_t i = 0; i < r.dim(); ++i) {
        for (double t : r.node(i)) {
            out.push_back({t, i});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const TimedEvent& a, const TimedEvent& b) { return a.time < b.time; });
    return out;
}

inline void check_dims(const HawkesSumExpParams& p, const EventRealization& r) {
    if (p.dim() != r.dim()) {
        throw data_error("dimension mismatch: model has " + std::to_string(p.dim()) + " nodes, events have " +
                         std::to_string(r.dim()));
    }
}

/// lambda_i(t), counting only events strictly before t.
inline double intensity_at(const HawkesSumExpParams& p, const EventRealization& r, std::size_t i, double t) {
    check_dims(p, r);
    if (i >= p.dim()) {
        throw config_error("node index out of range");
    }
    if (!(t >= 0.0 && t <= r.end_time())) {
        throw config_error("intensity_at: t outside [0, end_time]");
    }
    const auto ii = static_cast<Eigen::Index>(i);
    double value = p.baseline[ii];
    for (std::size_t j = 0; j < r.dim(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const auto ts = r.node(j);
        const auto stop = std::lower_bound(ts.begin(), ts.end(), t);
        for (std::size_t u = 0; u < p.n_layers(); ++u) {
            const double a = p.adjacency[u](ii, jj);
            const double b = p.decays[u](ii, jj);
            if (a == 0.0) {
                continue;
            }
            double acc = 0.0;
            for (auto it = ts.begin(); it != stop; ++it) {
                acc += std::exp(-b * (t - *it));
            }
            value += a * b * acc;
        }
    }
    return value;
}

inline double intensity_at(const HawkesExpParams& p, const EventRealization& r, std::size_t i, double t) {
    return intensity_at(to_sum_exp(p), r, i, t);
}

/// Compensator increments between consecutive events of each node, the first
/// one measured from time 0. Under the true model these are iid Exp(1).
inline std::vector<std::vector<double>> time_change_residuals(const HawkesSumExpParams& p,
                                                              const EventRealization& r) {
    check_dims(p, r);
    validate(p);
    const std::size_t d = p.dim();
    const std::size_t n_layers = p.n_layers();
    // excitation[(i*d + j)*U + u] is sum over prior events of j of beta*exp(-beta*(now - t_l))
    std::vector<double> excitation(d * d * n_layers, 0.0);
    std::vector<double> pending(d, 0.0);
    std::vector<std::vector<double>> out(d);
    double now = 0.0;

    const auto advance = [&](double to) {
        const double dt = to - now;
        if (dt <= 0.0) {
            return;
        }
        for (std::size_t i = 0; i < d; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            double inc = p.baseline[ii] * dt;
            for (std::size_t j = 0; j < d; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                for (std::size_t u = 0; u < n_layers; ++u) {
                    double& g = excitation[(i * d + j) * n_layers + u];
                    if (g == 0.0) {
                        continue;
                    }
                    const double b = p.decays[u](ii, jj);
                    const double decay = std::exp(-b * dt);
                    inc += p.adjacency[u](ii, jj) * g * (1.0 - decay) / b;
                    g *= decay;
                }
            }
            pending[i] += inc;
        }
        now = to;
    };

    const auto events = merged_events(r);
    std::size_t k = 0;
    while (k < events.size()) {
        const double t = events[k].time;
        advance(t);
        std::size_t end = k;
        while (end < events.size() && events[end].time == t) {
            const std::size_t i = events[end].node;
            out[i].push_back(pending[i]);
            pending[i] = 0.0;
            ++end;
        }
        for (std::size_t e = k; e < end; ++e) {
            const std::size_t j = events[e].node;
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t u = 0; u < n_layers; ++u) {
                    excitation[(i * d + j) * n_layers + u] +=
                        p.decays[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
        }
        k = end;
    }
    return out;
}

inline std::vector<std::vector<double>> time_change_residuals(const HawkesExpParams& p, const EventRealization& r) {
    return time_change_residuals(to_sum_exp(p), r);
}

/// One-sample Kolmogorov-Smirnov statistic against the Exp(1) law.
inline double ks_statistic_exp1(std::vector<double> sample) {
    if (sample.empty()) {
        return 0.0;
    }
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double cdf = -std::expm1(-std::max(sample[k], 0.0));
        d = std::max({d, static_cast<double>(k + 1) / n - cdf, cdf - static_cast<double>(k) / n});
    }
    return d;
}

/// Approximate 1% critical value of the KS statistic (Stephens' finite-n form).
inline double ks_critical_1pct(std::size_t n) {
    if (n == 0) {
        return 1.0;
    }
    const double s = std::sqrt(static_cast<double>(n));
    return 1.628 / (s + 0.12 + 0.11 / s);
}

} // namespace pointproc
