#pragma once

#include "pointproc/hawkes/objective.hpp"
#include "pointproc/solvers.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace pointproc {

enum class HawkesGoodness { likelihood, least_squares };

struct HawkesFitResult {
    HawkesSumExpParams params;
    SolverResult solver;
};

/// Poisson start: mu_i = N_i / T, no excitation.
inline Vector hawkes_start_point(const HawkesExpObjective& obj) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(obj.n_params()));
    for (std::size_t i = 0; i < obj.dim(); ++i) {
        std::size_t n_i = 0;
        for (const auto& r : obj.realizations()) {
            n_i += r.count(i);
        }
        w[static_cast<Eigen::Index>(i)] = static_cast<double>(n_i) / obj.total_time();
    }
    return w;
}

/// The user penalty acts on the adjacency block and is always combined with
/// nonnegativity; baselines are only constrained to be nonnegative.
inline CompositePenalty hawkes_penalty(const HawkesExpObjective& obj, PenaltySpec pen) {
    if (pen.range) {
        throw config_error("hawkes penalties apply to the adjacency block; do not set a range");
    }
    pen.range = obj.adjacency_range();
    if (pen.kind == PenaltyKind::none) {
        pen.kind = PenaltyKind::nonneg;
    }
    pen.positive = true;
    PenaltySpec base{.kind = PenaltyKind::nonneg, .range = obj.baseline_range()};
    return CompositePenalty(std::vector<PenaltySpec>{base, std::move(pen)});
}

inline HawkesFitResult fit_hawkes_exp(std::shared_ptr<const HawkesExpObjective> obj, const PenaltySpec& pen,
                                      const SolverConfig& cfg,
                                      HawkesGoodness goodness = HawkesGoodness::likelihood,
                                      std::optional<Vector> w0 = std::nullopt) {
    const CompositePenalty composite = hawkes_penalty(*obj, pen);
    const Vector start = w0 ? *w0 : hawkes_start_point(*obj);
    SolverResult res = goodness == HawkesGoodness::likelihood
                           ? minimize(HawkesLoglikObjective(obj), composite, cfg, start)
                           : minimize(HawkesLsqObjective(obj), composite, cfg, start);
    HawkesSumExpParams params = obj->unpack(res.minimizer);
    return HawkesFitResult{std::move(params), std::move(res)};
}

inline HawkesFitResult fit_hawkes_exp(std::vector<EventRealization> realizations, std::vector<Matrix> decays,
                                      const PenaltySpec& pen, const SolverConfig& cfg,
                                      HawkesGoodness goodness = HawkesGoodness::likelihood) {
    auto obj = std::make_shared<const HawkesExpObjective>(std::move(realizations), std::move(decays),
                                                          goodness == HawkesGoodness::least_squares);
    return fit_hawkes_exp(std::move(obj), pen, cfg, goodness);
}

} // namespace pointproc
