#pragma once

#include "pointproc/dataset.hpp"
#include "pointproc/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace pointproc {

using Matrix = Eigen::MatrixXd;

/// Multivariate Hawkes process with kernels
/// phi_ij(t) = adjacency_ij * decays_ij * exp(-decays_ij * t), t > 0,
/// so that adjacency_ij is the kernel norm (integral of phi_ij).
struct HawkesExpParams {
    Vector baseline;
    Matrix adjacency;
    Matrix decays;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(baseline.size()); }
};

/// Sum of U exponential layers per pair:
/// phi_ij(t) = sum_u adjacency[u]_ij * decays[u]_ij * exp(-decays[u]_ij * t).
struct HawkesSumExpParams {
    Vector baseline;
    std::vector<Matrix> adjacency;
    std::vector<Matrix> decays;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(baseline.size()); }
    std::size_t n_layers() const noexcept { return adjacency.size(); }
};

inline void validate(const HawkesSumExpParams& p) {
    const auto d = static_cast<Eigen::Index>(p.dim());
    if (d == 0) {
        throw data_error("hawkes parameters need at least one node");
    }
    if (p.adjacency.empty() || p.adjacency.size() != p.decays.size()) {
        throw data_error("hawkes parameters need matching adjacency and decay layers");
    }
    if (!p.baseline.allFinite() || p.baseline.minCoeff() < 0.0) {
        throw data_error("baseline must be finite and nonnegative");
    }
    for (std::size_t u = 0; u < p.adjacency.size(); ++u) {
        const Matrix& a = p.adjacency[u];
        const Matrix& b = p.decays[u];
        if (a.rows() != d || a.cols() != d || b.rows() != d || b.cols() != d) {
            throw data_error("adjacency and decays must be " + std::to_string(d) + "x" + std::to_string(d));
        }
        if (!a.allFinite() || a.minCoeff() < 0.0) {
            throw data_error("adjacency must be finite and nonnegative");
        }
        if (!b.allFinite() || !(b.minCoeff() > 0.0)) {
            throw data_error("decays must be finite and positive");
        }
    }
}

inline HawkesSumExpParams to_sum_exp(const HawkesExpParams& p) {
    return HawkesSumExpParams{p.baseline, {p.adjacency}, {p.decays}};
}

inline void validate(const HawkesExpParams& p) { validate(to_sum_exp(p)); }

inline HawkesExpParams with_shared_decay(Vector baseline, Matrix adjacency, double decay) {
    const auto d = baseline.size();
    return HawkesExpParams{std::move(baseline), std::move(adjacency), Matrix::Constant(d, d, decay)};
}

inline double spectral_radius(const Matrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    return Eigen::EigenSolver<Matrix>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

// Kernel-norm matrix: sum of the layer adjacencies.
inline Matrix kernel_norms(const HawkesSumExpParams& p) {
    Matrix total = Matrix::Zero(static_cast<Eigen::Index>(p.dim()), static_cast<Eigen::Index>(p.dim()));
    for (const auto& a : p.adjacency) {
        total += a;
    }
    return total;
}

inline Matrix kernel_norms(const HawkesExpParams& p) { return p.adjacency; }

/// Stationary mean intensity, the solution of (I - norms) Lambda = baseline.
inline Vector mean_intensity(const HawkesSumExpParams& p) {
    validate(p);
    const Matrix norms = kernel_norms(p);
    if (spectral_radius(norms) >= 1.0) {
        throw numerical_error("mean_intensity: spectral radius of the kernel norms is >= 1 (non-stationary)");
    }
    const auto d = static_cast<Eigen::Index>(p.dim());
    return (Matrix::Identity(d, d) - norms).partialPivLu().solve(p.baseline);
}

inline Vector mean_intensity(const HawkesExpParams& p) { return mean_intensity(to_sum_exp(p)); }

} // namespace pointproc
