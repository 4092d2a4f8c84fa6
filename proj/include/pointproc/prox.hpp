#pragma once

#include "pointproc/dataset.hpp"
#include "pointproc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace pointproc {

enum class PenaltyKind { none, l1, l2sq, elasticnet, tv1d, group_l1, slope, nonneg, l1_nonneg };

struct IndexRange {
    std::size_t start{0};
    std::size_t end{0};
    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// A proximable penalty g applied to the slice `range` of the weights.
///
/// Conventions, with s the slice and lam the strength:
///   l1          lam * sum |s_i|
///   l2sq        lam / 2 * sum s_i^2
///   elasticnet  lam * (ratio * sum |s_i| + (1 - ratio) / 2 * sum s_i^2)
///   tv1d        lam * sum |s_{i+1} - s_i|
///   group_l1    lam * sum_g ||s_g||_2  (times sqrt(|g|) when group_size_scaling)
///   slope       lam * sum_i weights_i * |s|_(i), |s|_(1) >= |s|_(2) >= ...
///   nonneg      indicator of s >= 0
///   l1_nonneg   lam * sum s_i on s >= 0
/// `positive` adds the indicator of s >= 0 to any kind. Coordinates outside
/// `range` are left untouched and are not penalized.
struct PenaltySpec {
    PenaltyKind kind{PenaltyKind::none};
    double strength{0.0};
    double ratio{0.5};
    std::vector<double> weights{};
    std::vector<IndexRange> groups{};
    std::optional<IndexRange> range{};
    bool group_size_scaling{false};
    bool positive{false};

    IndexRange slice(std::size_t n) const { return range.value_or(IndexRange{0, n}); }
};

inline const char* to_string(PenaltyKind kind) {
    switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::l2sq: return "l2sq";
    case PenaltyKind::elasticnet: return "elasticnet";
    case PenaltyKind::tv1d: return "tv1d";
    case PenaltyKind::group_l1: return "group_l1";
    case PenaltyKind::slope: return "slope";
    case PenaltyKind::nonneg: return "nonneg";
    case PenaltyKind::l1_nonneg: return "l1_nonneg";
    }
    return "?";
}

// Throws config_error unless `p` is usable on vectors of length n.
inline void validate_penalty(const PenaltySpec& p, std::size_t n) {
    if (!(p.strength >= 0.0) || !std::isfinite(p.strength)) {
        throw config_error("penalty strength must be finite and >= 0");
    }
    const IndexRange s = p.slice(n);
    if (s.start > s.end || s.end > n) {
        throw config_error("penalty range [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                           ") does not fit a vector of length " + std::to_string(n));
    }
    if (p.kind == PenaltyKind::elasticnet && !(p.ratio >= 0.0 && p.ratio <= 1.0)) {
        throw config_error("elasticnet ratio must lie in [0, 1]");
    }
    if (p.kind == PenaltyKind::slope) {
        if (p.weights.size() != s.size()) {
            throw config_error("slope weight-length mismatch: " + std::to_string(p.weights.size()) +
                               " weights for a slice of " + std::to_string(s.size()));
        }
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            if (!(p.weights[i] > 0.0) || (i > 0 && p.weights[i] > p.weights[i - 1])) {
                throw config_error("slope weights must be positive and nonincreasing");
            }
        }
    }
    if (p.kind == PenaltyKind::group_l1) {
        std::size_t expected = s.start;
        for (const auto& g : p.groups) {
            if (g.start != expected || g.end <= g.start) {
                throw config_error("groups must partition the penalized slice contiguously");
            }
            expected = g.end;
        }
        if (expected != s.end) {
            throw config_error("groups do not cover the penalized slice");
        }
    }
}

inline double penalty_value(const PenaltySpec& p, const Vector& x) {
    const auto n = static_cast<std::size_t>(x.size());
    validate_penalty(p, n);
    const IndexRange s = p.slice(n);
    const auto seg = x.segment(static_cast<Eigen::Index>(s.start), static_cast<Eigen::Index>(s.size()));
    const double lam = p.strength;
    constexpr double inf = std::numeric_limits<double>::infinity();

    if ((p.positive || p.kind == PenaltyKind::nonneg || p.kind == PenaltyKind::l1_nonneg) &&
        seg.size() > 0 && seg.minCoeff() < 0.0) {
        return inf;
    }
    switch (p.kind) {
    case PenaltyKind::none:
    case PenaltyKind::nonneg:
        return 0.0;
    case PenaltyKind::l1:
        return lam * seg.lpNorm<1>();
    case PenaltyKind::l1_nonneg:
        return lam * seg.sum();
    case PenaltyKind::l2sq:
        return 0.5 * lam * seg.squaredNorm();
    case PenaltyKind::elasticnet:
        return lam * (p.ratio * seg.lpNorm<1>() + 0.5 * (1.0 - p.ratio) * seg.squaredNorm());
    case PenaltyKind::tv1d: {
        double tv = 0.0;
        for (Eigen::Index i = 0; i + 1 < seg.size(); ++i) {
            tv += std::abs(seg[i + 1] - seg[i]);
        }
        return lam * tv;
    }
    case PenaltyKind::group_l1: {
        double acc = 0.0;
        for (const auto& g : p.groups) {
            const double scale = p.group_size_scaling ? std::sqrt(static_cast<double>(g.size())) : 1.0;
            acc += scale * x.segment(static_cast<Eigen::Index>(g.start), static_cast<Eigen::Index>(g.size())).norm();
        }
        return lam * acc;
    }
    case PenaltyKind::slope: {
        std::vector<double> mags(seg.size());
        for (Eigen::Index i = 0; i < seg.size(); ++i) {
            mags[static_cast<std::size_t>(i)] = std::abs(seg[i]);
        }
        std::sort(mags.begin(), mags.end(), std::greater<>());
        return lam * std::inner_product(mags.begin(), mags.end(), p.weights.begin(), 0.0);
    }
    }
    return 0.0;
}

/// Exact prox of thr * sum |z_{i+1} - z_i| (Condat's direct algorithm).
///
/// Linear in practice; no iterations or tolerances involved.
inline std::vector<double> prox_tv1d(const std::vector<double>& input, double thr) {
    if (input.empty()) {
        throw config_error("prox_tv1d: empty input");
    }
    if (!(thr >= 0.0)) {
        throw config_error("prox_tv1d: threshold must be >= 0");
    }
    const std::size_t width = input.size();
    std::vector<double> output(width);
    if (thr == 0.0 || width == 1) {
        return input;
    }
    const double lambda = thr;
    const double twolambda = 2.0 * lambda;
    const double minlambda = -lambda;
    std::size_t k = 0;
    std::size_t k0 = 0;
    std::size_t kplus = 0;
    std::size_t kminus = 0;
    double umin = lambda;
    double umax = -lambda;
    double vmin = input[0] - lambda;
    double vmax = input[0] + lambda;
    for (;;) {
        while (k == width - 1) {
            if (umin < 0.0) {
                do {
                    output[k0++] = vmin;
                } while (k0 <= kminus);
                k = kminus = k0;
                vmin = input[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if (umax > 0.0) {
                do {
                    output[k0++] = vmax;
                } while (k0 <= kplus);
                k = kplus = k0;
                vmax = input[k];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / static_cast<double>(k - k0 + 1);
                do {
                    output[k0++] = vmin;
                } while (k0 <= k);
                return output;
            }
        }
        if ((umin += input[k + 1] - vmin) < minlambda) {
            do {
                output[k0++] = vmin;
            } while (k0 <= kminus);
            k = kplus = kminus = k0;
            vmin = input[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
        } else if ((umax += input[k + 1] - vmax) > lambda) {
            do {
                output[k0++] = vmax;
            } while (k0 <= kplus);
            k = kplus = kminus = k0;
            vmax = input[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            ++k;
            if (umin >= lambda) {
                kminus = k;
                vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
                umin = lambda;
            }
            if (umax <= minlambda) {
                kplus = k;
                vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
                umax = minlambda;
            }
        }
    }
}

/// Prox of step * sum_i weights_i * |x|_(i) (sorted-l1 / SLOPE).
///
/// Sorts |x| descending, subtracts step * weights, projects onto the
/// nonincreasing cone by pool-adjacent-violators, clips at 0, then restores
/// order and signs.
inline std::vector<double> prox_slope(const std::vector<double>& x, const std::vector<double>& weights,
                                      double step) {
    if (weights.size() != x.size()) {
        throw config_error("prox_slope: weight-length mismatch");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || (i > 0 && weights[i] > weights[i - 1])) {
            throw config_error("prox_slope: weight-order violation");
        }
    }
    if (!(step > 0.0)) {
        throw config_error("prox_slope: step must be positive");
    }
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });

    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    blocks.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        blocks.push_back({std::abs(x[order[k]]) - step * weights[k], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() <= blocks.back().mean()) {
            const Block top = blocks.back();
            blocks.pop_back();
            blocks.back().sum += top.sum;
            blocks.back().count += top.count;
        }
    }
    std::vector<double> out(n, 0.0);
    std::size_t k = 0;
    for (const auto& b : blocks) {
        const double v = std::max(b.mean(), 0.0);
        for (std::size_t c = 0; c < b.count; ++c, ++k) {
            const std::size_t idx = order[k];
            out[idx] = std::copysign(v, x[idx]);
            if (v == 0.0) {
                out[idx] = 0.0;
            }
        }
    }
    return out;
}

namespace detail {

inline double soft_threshold(double v, double thr) {
    if (v > thr) {
        return v - thr;
    }
    if (v < -thr) {
        return v + thr;
    }
    return 0.0;
}

inline std::vector<double> to_std(const Vector& v, IndexRange s) {
    return std::vector<double>(v.data() + s.start, v.data() + s.end);
}

} // namespace detail

/// argmin_z 1/2 ||z - x||^2 + step * g(z), exact for every kind.
inline Vector prox_apply(const PenaltySpec& p, const Vector& x, double step) {
    if (!(step > 0.0)) {
        throw config_error("prox step must be positive");
    }
    const auto n = static_cast<std::size_t>(x.size());
    validate_penalty(p, n);
    const IndexRange s = p.slice(n);
    const double thr = step * p.strength;
    Vector z = x;
    auto seg = z.segment(static_cast<Eigen::Index>(s.start), static_cast<Eigen::Index>(s.size()));

    // For the sign-symmetric kinds the prox of g + indicator(z >= 0) is the
    // prox of g evaluated at max(x, 0).
    const bool clip_first = p.positive && p.kind != PenaltyKind::tv1d;
    if (clip_first) {
        seg = seg.cwiseMax(0.0);
    }

    switch (p.kind) {
    case PenaltyKind::none:
        break;
    case PenaltyKind::l1:
        for (Eigen::Index i = 0; i < seg.size(); ++i) {
            seg[i] = detail::soft_threshold(seg[i], thr);
        }
        break;
    case PenaltyKind::l2sq:
        seg /= (1.0 + thr);
        break;
    case PenaltyKind::elasticnet:
        for (Eigen::Index i = 0; i < seg.size(); ++i) {
            seg[i] = detail::soft_threshold(seg[i], thr * p.ratio) / (1.0 + thr * (1.0 - p.ratio));
        }
        break;
    case PenaltyKind::tv1d:
        if (seg.size() > 0) {
            const auto out = prox_tv1d(detail::to_std(z, s), thr);
            for (Eigen::Index i = 0; i < seg.size(); ++i) {
                // TV on a chain commutes with the nonnegativity projection.
                seg[i] = p.positive ? std::max(out[static_cast<std::size_t>(i)], 0.0)
                                    : out[static_cast<std::size_t>(i)];
            }
        }
        break;
    case PenaltyKind::group_l1:
        for (const auto& g : p.groups) {
            auto block = z.segment(static_cast<Eigen::Index>(g.start), static_cast<Eigen::Index>(g.size()));
            const double scale = p.group_size_scaling ? std::sqrt(static_cast<double>(g.size())) : 1.0;
            const double norm = block.norm();
            if (norm <= thr * scale) {
                block.setZero();
            } else {
                block *= 1.0 - thr * scale / norm;
            }
        }
        break;
    case PenaltyKind::slope:
        if (seg.size() > 0 && thr > 0.0) {
            const auto out = prox_slope(detail::to_std(z, s), p.weights, thr);
            for (Eigen::Index i = 0; i < seg.size(); ++i) {
                seg[i] = out[static_cast<std::size_t>(i)];
            }
        }
        break;
    case PenaltyKind::nonneg:
        seg = seg.cwiseMax(0.0);
        break;
    case PenaltyKind::l1_nonneg:
        seg = (seg.array() - thr).cwiseMax(0.0).matrix();
        break;
    }
    return z;
}

/// Sum of penalties acting on disjoint slices, e.g. positivity on Hawkes
/// baselines next to an l1 penalty on the adjacency block.
class CompositePenalty {
public:
    CompositePenalty() = default;
    CompositePenalty(PenaltySpec p) : parts_{std::move(p)} {} // NOLINT: implicit by intent
    explicit CompositePenalty(std::vector<PenaltySpec> parts) : parts_(std::move(parts)) {}

    const std::vector<PenaltySpec>& parts() const noexcept { return parts_; }

    void validate(std::size_t n) const {
        std::vector<IndexRange> used;
        for (const auto& p : parts_) {
            validate_penalty(p, n);
            used.push_back(p.slice(n));
        }
        std::sort(used.begin(), used.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
        for (std::size_t i = 1; i < used.size(); ++i) {
            if (used[i].start < used[i - 1].end) {
                throw config_error("composite penalty slices overlap");
            }
        }
    }

    double value(const Vector& x) const {
        double acc = 0.0;
        for (const auto& p : parts_) {
            acc += penalty_value(p, x);
        }
        return acc;
    }

    Vector prox(const Vector& x, double step) const {
        Vector z = x;
        for (const auto& p : parts_) {
            z = prox_apply(p, z, step);
        }
        return z;
    }

private:
    std::vector<PenaltySpec> parts_;
};

} // namespace pointproc
