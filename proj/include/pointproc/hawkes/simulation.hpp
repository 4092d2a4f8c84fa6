#pragma once

#include "pointproc/events.hpp"
#include "pointproc/hawkes/params.hpp"
#include "pointproc/parallel.hpp"
#include "pointproc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pointproc {

struct SimulationResult {
    EventRealization realization;
    bool truncated{false};
    std::vector<std::string> warnings{};
    // Number of candidates where the recomputed total intensity exceeded the
    // thinning bound. Always 0 unless the decay recursion is broken.
    std::size_t bound_violations{0};
};

inline EventRealization simulate_poisson(const Vector& rates, double end_time, RngStream& rng) {
    if (!(end_time > 0.0)) {
        throw config_error("end_time must be positive");
    }
    if (rates.size() == 0 || !rates.allFinite() || rates.minCoeff() < 0.0) {
        throw config_error("poisson rates must be finite and nonnegative");
    }
    std::vector<std::vector<double>> ts(static_cast<std::size_t>(rates.size()));
    for (Eigen::Index i = 0; i < rates.size(); ++i) {
        if (rates[i] == 0.0) {
            continue;
        }
        double t = rng.exponential(rates[i]);
        while (t < end_time) {
            ts[static_cast<std::size_t>(i)].push_back(t);
            t += rng.exponential(rates[i]);
        }
    }
    return EventRealization(end_time, std::move(ts));
}

/// Ogata thinning for (sum-of-)exponential Hawkes kernels.
///
/// Between events the total intensity only decays, so its value right after
/// the latest event or candidate bounds it until the next candidate. Each
/// candidate uses one exponential and one uniform draw, in that order; the
/// uniform both accepts and attributes the node.
inline SimulationResult simulate_hawkes_exp(const HawkesSumExpParams& params, double end_time, RngStream& rng,
                                            std::size_t max_events = 10'000'000) {
    validate(params);
    if (!(end_time > 0.0) || !std::isfinite(end_time)) {
        throw config_error("end_time must be positive and finite");
    }
    if (max_events == 0) {
        throw config_error("max_events must be positive");
    }
    std::vector<std::string> warnings;
    const double rho = spectral_radius(kernel_norms(params));
    if (rho >= 1.0) {
        warnings.push_back("spectral radius " + std::to_string(rho) +
                           " >= 1: process is not stationary, max_events caps the run");
    }

    const std::size_t d = params.dim();
    const std::size_t n_layers = params.n_layers();
    const std::size_t n_acc = d * d * n_layers;

    // Distinct decay values share one exp() per candidate.
    std::vector<double> unique_decays;
    std::vector<std::size_t> decay_slot(n_acc);
    std::vector<double> jump(n_acc);
    for (std::size_t u = 0; u < n_layers; ++u) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double beta = params.decays[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                auto it = std::find(unique_decays.begin(), unique_decays.end(), beta);
                if (it == unique_decays.end()) {
                    unique_decays.push_back(beta);
                    it = unique_decays.end() - 1;
                }
                // Accumulators grouped by source node j so a firing of j touches a contiguous block.
                const std::size_t a = (j * d + i) * n_layers + u;
                decay_slot[a] = static_cast<std::size_t>(it - unique_decays.begin());
                jump[a] = params.adjacency[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * beta;
            }
        }
    }
    std::vector<double> factors(unique_decays.size());
    std::vector<double> excitation(n_acc, 0.0);
    std::vector<double> intensity(d);

    const auto refresh_intensity = [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            intensity[i] = params.baseline[static_cast<Eigen::Index>(i)];
        }
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < d; ++i) {
                const std::size_t base = (j * d + i) * n_layers;
                for (std::size_t u = 0; u < n_layers; ++u) {
                    intensity[i] += excitation[base + u];
                }
            }
        }
        for (double v : intensity) {
            total += v;
        }
        return total;
    };

    std::vector<std::vector<double>> ts(d);
    std::size_t n_events = 0;
    std::size_t violations = 0;
    bool truncated = false;
    double t = 0.0;
    double bound = refresh_intensity();
    while (bound > 0.0) {
        const double candidate = t + rng.exponential(bound);
        const double u = rng.uniform();
        if (candidate >= end_time) {
            break;
        }
        for (std::size_t k = 0; k < unique_decays.size(); ++k) {
            factors[k] = std::exp(-unique_decays[k] * (candidate - t));
        }
        for (std::size_t a = 0; a < n_acc; ++a) {
            excitation[a] *= factors[decay_slot[a]];
        }
        t = candidate;
        const double total = refresh_intensity();
        if (total > bound * (1.0 + 1e-12)) {
            ++violations;
        }
        double target = u * bound;
        if (target < total) {
            std::size_t node = d - 1;
            for (std::size_t i = 0; i < d; ++i) {
                if (target < intensity[i]) {
                    node = i;
                    break;
                }
                target -= intensity[i];
            }
            ts[node].push_back(t);
            const std::size_t base = node * d * n_layers;
            for (std::size_t a = base; a < base + d * n_layers; ++a) {
                excitation[a] += jump[a];
            }
            if (++n_events >= max_events) {
                truncated = true;
                warnings.push_back("max_events reached at t=" + std::to_string(t) + ": realization truncated");
                break;
            }
            bound = refresh_intensity();
        } else {
            bound = total;
        }
    }
    return SimulationResult{EventRealization(end_time, std::move(ts)), truncated, std::move(warnings), violations};
}

inline SimulationResult simulate_hawkes_exp(const HawkesExpParams& params, double end_time, RngStream& rng,
                                            std::size_t max_events = 10'000'000) {
    return simulate_hawkes_exp(to_sum_exp(params), end_time, rng, max_events);
}

/// R independent replicates, replicate r drawn from RngStream(seed, r).
/// Results do not depend on the number of worker threads.
inline std::vector<SimulationResult> simulate_replicates(const HawkesSumExpParams& params, double end_time,
                                                         std::uint64_t seed, std::size_t replicates,
                                                         std::size_t threads = 1,
                                                         std::size_t max_events = 10'000'000) {
    std::vector<std::optional<SimulationResult>> slots(replicates);
    parallel_for_each_index(replicates, threads, [&](std::size_t r) {
        RngStream rng(seed, r);
        slots[r].emplace(simulate_hawkes_exp(params, end_time, rng, max_events));
    });
    std::vector<SimulationResult> out;
    out.reserve(replicates);
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

} // namespace pointproc
