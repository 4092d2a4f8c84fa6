#pragma once

#include "pointproc/error.hpp"
#include "pointproc/io_util.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pointproc {

using Vector = Eigen::VectorXd;
using DenseFeatures = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseFeatures = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class LabelDomain { any, binary, count, duration };

/// Design matrix (dense or row-sparse) with labels and optional censoring.
///
/// censoring[i] is true when sample i is an observed failure; only survival
/// tasks use it.
class LabeledDataset {
public:
    LabeledDataset(DenseFeatures features, Vector labels,
                   std::optional<std::vector<bool>> censoring = std::nullopt,
                   LabelDomain domain = LabelDomain::any)
        : features_(std::move(features)), labels_(std::move(labels)), censoring_(std::move(censoring)) {
        validate(domain);
    }

    LabeledDataset(SparseFeatures features, Vector labels,
                   std::optional<std::vector<bool>> censoring = std::nullopt,
                   LabelDomain domain = LabelDomain::any)
        : features_(std::move(features)), labels_(std::move(labels)), censoring_(std::move(censoring)) {
        std::get<SparseFeatures>(features_).makeCompressed();
        validate(domain);
    }

    std::size_t n_samples() const {
        return std::visit([](const auto& m) { return static_cast<std::size_t>(m.rows()); }, features_);
    }
    std::size_t n_features() const {
        return std::visit([](const auto& m) { return static_cast<std::size_t>(m.cols()); }, features_);
    }
    bool is_sparse() const noexcept { return std::holds_alternative<SparseFeatures>(features_); }

    const Vector& labels() const noexcept { return labels_; }
    const std::optional<std::vector<bool>>& censoring() const noexcept { return censoring_; }

    // Calls f(matrix) with the concrete Eigen matrix type.
    template <class F>
    decltype(auto) visit(F&& f) const {
        return std::visit(std::forward<F>(f), features_);
    }

    double row_dot(std::size_t i, const Vector& w) const {
        if (const auto* d = std::get_if<DenseFeatures>(&features_)) {
            return d->row(static_cast<Eigen::Index>(i)).dot(w);
        }
        const auto& s = std::get<SparseFeatures>(features_);
        double acc = 0.0;
        for (SparseFeatures::InnerIterator it(s, static_cast<Eigen::Index>(i)); it; ++it) {
            acc += it.value() * w[it.col()];
        }
        return acc;
    }

    // out += a * x_i
    void row_axpy(std::size_t i, double a, Vector& out) const {
        if (const auto* d = std::get_if<DenseFeatures>(&features_)) {
            out.noalias() += a * d->row(static_cast<Eigen::Index>(i)).transpose();
            return;
        }
        const auto& s = std::get<SparseFeatures>(features_);
        for (SparseFeatures::InnerIterator it(s, static_cast<Eigen::Index>(i)); it; ++it) {
            out[it.col()] += a * it.value();
        }
    }

    double row_squared_norm(std::size_t i) const {
        if (const auto* d = std::get_if<DenseFeatures>(&features_)) {
            return d->row(static_cast<Eigen::Index>(i)).squaredNorm();
        }
        const auto& s = std::get<SparseFeatures>(features_);
        return s.row(static_cast<Eigen::Index>(i)).squaredNorm();
    }

    Vector scores(const Vector& w) const {
        return visit([&](const auto& m) -> Vector { return m * w; });
    }

    // X^T d
    Vector transpose_times(const Vector& d) const {
        return visit([&](const auto& m) -> Vector { return m.transpose() * d; });
    }

    DenseFeatures dense() const {
        if (const auto* d = std::get_if<DenseFeatures>(&features_)) {
            return *d;
        }
        return DenseFeatures(std::get<SparseFeatures>(features_));
    }

private:
    void validate(LabelDomain domain) const {
        const std::size_t n = n_samples();
        if (n == 0 || n_features() == 0) {
            throw data_error("dataset needs n > 0 samples and p > 0 features");
        }
        if (static_cast<std::size_t>(labels_.size()) != n) {
            throw data_error("row-count mismatch: " + std::to_string(n) + " feature rows but " +
                             std::to_string(labels_.size()) + " labels");
        }
        if (censoring_ && censoring_->size() != n) {
            throw data_error("censoring length differs from sample count");
        }
        const bool finite = visit([](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DenseFeatures>) {
                return m.allFinite();
            } else {
                for (Eigen::Index k = 0; k < m.nonZeros(); ++k) {
                    if (!std::isfinite(m.valuePtr()[k])) {
                        return false;
                    }
                }
                return true;
            }
        });
        if (!finite || !labels_.allFinite()) {
            throw data_error("dataset contains non-finite values");
        }
        for (Eigen::Index i = 0; i < labels_.size(); ++i) {
            const double y = labels_[i];
            switch (domain) {
            case LabelDomain::any:
                break;
            case LabelDomain::binary:
                if (y != 1.0 && y != -1.0) {
                    throw data_error("binary labels must be -1 or +1");
                }
                break;
            case LabelDomain::count:
                if (y < 0.0 || y != std::floor(y)) {
                    throw data_error("count labels must be nonnegative integers");
                }
                break;
            case LabelDomain::duration:
                if (y < 0.0) {
                    throw data_error("durations must be nonnegative");
                }
                break;
            }
        }
    }

    std::variant<DenseFeatures, SparseFeatures> features_;
    Vector labels_;
    std::optional<std::vector<bool>> censoring_;
};

enum class FeatureFormat { dense, triplet };

namespace detail {

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

inline std::vector<double> split_numbers(const std::string& line) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(io::parse_double(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

inline std::size_t as_index(double v, const char* what) {
    if (v < 0.0 || v != std::floor(v)) {
        throw data_error(std::string(what) + " must be a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

} // namespace detail

/// Reads features (dense CSV, or triplet CSV with an "n,p" first line) and
/// labels (one per line; "duration,observed" for survival data).
inline LabeledDataset load_dataset(const std::filesystem::path& features_path,
                                   const std::filesystem::path& labels_path,
                                   FeatureFormat format = FeatureFormat::dense,
                                   LabelDomain domain = LabelDomain::any) {
    const auto feature_lines = detail::split_lines(io::read_file(features_path));
    const auto label_lines = detail::split_lines(io::read_file(labels_path));

    Vector labels(static_cast<Eigen::Index>(label_lines.size()));
    std::optional<std::vector<bool>> censoring;
    for (std::size_t i = 0; i < label_lines.size(); ++i) {
        const auto cells = detail::split_numbers(label_lines[i]);
        if (cells.size() == 2) {
            if (!censoring) {
                if (i != 0) {
                    throw data_error("labels file mixes one- and two-column rows");
                }
                censoring.emplace();
            }
            if (cells[1] != 0.0 && cells[1] != 1.0) {
                throw data_error("observed flag must be 0 or 1");
            }
            censoring->push_back(cells[1] == 1.0);
        } else if (cells.size() != 1 || censoring) {
            throw data_error("labels file row " + std::to_string(i) + " has wrong column count");
        }
        labels[static_cast<Eigen::Index>(i)] = cells[0];
    }

    if (format == FeatureFormat::dense) {
        if (feature_lines.empty()) {
            throw data_error("empty feature file");
        }
        const auto first = detail::split_numbers(feature_lines.front());
        DenseFeatures x(static_cast<Eigen::Index>(feature_lines.size()),
                        static_cast<Eigen::Index>(first.size()));
        for (std::size_t i = 0; i < feature_lines.size(); ++i) {
            const auto row = detail::split_numbers(feature_lines[i]);
            if (row.size() != first.size()) {
                throw data_error("feature row " + std::to_string(i) + " has " +
                                 std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(first.size()));
            }
            for (std::size_t j = 0; j < row.size(); ++j) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
            }
        }
        return LabeledDataset(std::move(x), std::move(labels), std::move(censoring), domain);
    }

    if (feature_lines.empty()) {
        throw data_error("triplet file needs an 'n,p' header line");
    }
    const auto header = detail::split_numbers(feature_lines.front());
    if (header.size() != 2) {
        throw data_error("triplet header must be 'n,p'");
    }
    const auto n = detail::as_index(header[0], "n");
    const auto p = detail::as_index(header[1], "p");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(feature_lines.size() - 1);
    for (std::size_t k = 1; k < feature_lines.size(); ++k) {
        const auto cells = detail::split_numbers(feature_lines[k]);
        if (cells.size() != 3) {
            throw data_error("triplet row " + std::to_string(k) + " must be 'row,col,value'");
        }
        const auto r = detail::as_index(cells[0], "row");
        const auto c = detail::as_index(cells[1], "col");
        if (r >= n || c >= p) {
            throw data_error("triplet index out of range at line " + std::to_string(k));
        }
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), cells[2]);
    }
    SparseFeatures x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    x.setFromTriplets(triplets.begin(), triplets.end());
    return LabeledDataset(std::move(x), std::move(labels), std::move(censoring), domain);
}

} // namespace pointproc
