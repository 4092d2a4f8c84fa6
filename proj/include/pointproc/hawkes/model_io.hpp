#pragma once

#include "pointproc/error.hpp"
#include "pointproc/hawkes/em.hpp"
#include "pointproc/hawkes/params.hpp"
#include "pointproc/io_util.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace pointproc {

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index d, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != d) {
        throw data_error(std::string(what) + " must be a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    }
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) {
            throw data_error(std::string(what) + " must be a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
        }
        for (Eigen::Index k = 0; k < d; ++k) {
            m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

inline Vector vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) {
        throw data_error(std::string(what) + " must be an array");
    }
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace detail

/// Parameter file: {"baseline": [...], "adjacency": [[...]], "decays": [[...]] or a scalar}.
inline HawkesExpParams hawkes_params_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object() || !j.contains("baseline") || !j.contains("adjacency") || !j.contains("decays")) {
            throw data_error("hawkes parameters need baseline, adjacency and decays");
        }
        HawkesExpParams p;
        p.baseline = detail::vector_from_json(j.at("baseline"), "baseline");
        const auto d = p.baseline.size();
        p.adjacency = detail::matrix_from_json(j.at("adjacency"), d, "adjacency");
        p.decays = j.at("decays").is_number() ? Matrix::Constant(d, d, j.at("decays").get<double>())
                                               : detail::matrix_from_json(j.at("decays"), d, "decays");
        validate(p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("invalid hawkes parameters: ") + e.what());
    }
}

inline HawkesExpParams load_hawkes_params(const std::filesystem::path& path) {
    return hawkes_params_from_json(detail::parse_json_file(path));
}

inline nlohmann::json model_to_json(const HawkesSumExpParams& p) {
    nlohmann::json j;
    if (p.n_layers() == 1) {
        j["model"] = "hawkes_exp";
        j["baseline"] = detail::vector_to_json(p.baseline);
        j["adjacency"] = detail::matrix_to_json(p.adjacency[0]);
        j["decays"] = detail::matrix_to_json(p.decays[0]);
        return j;
    }
    j["model"] = "hawkes_sumexp";
    j["baseline"] = detail::vector_to_json(p.baseline);
    j["adjacency"] = nlohmann::json::array();
    j["decays"] = nlohmann::json::array();
    for (std::size_t u = 0; u < p.n_layers(); ++u) {
        j["adjacency"].push_back(detail::matrix_to_json(p.adjacency[u]));
        j["decays"].push_back(detail::matrix_to_json(p.decays[u]));
    }
    return j;
}

inline nlohmann::json model_to_json(const EmKernelEstimate& e) {
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t i = 0; i < e.dim; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < e.dim; ++j) {
            std::vector<double> heights(e.grid_size());
            for (std::size_t m = 0; m < e.grid_size(); ++m) {
                heights[m] = e.value(i, j, m);
            }
            row.push_back(heights);
        }
        values.push_back(std::move(row));
    }
    nlohmann::json j;
    j["model"] = "hawkes_em";
    j["grid"] = e.grid;
    j["values"] = std::move(values);
    j["baseline"] = detail::vector_to_json(e.baseline);
    return j;
}

using HawkesModel = std::variant<HawkesSumExpParams, EmKernelEstimate>;

inline HawkesModel model_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("model").get<std::string>();
        if (kind == "hawkes_exp") {
            return to_sum_exp(hawkes_params_from_json(j));
        }
        if (kind == "hawkes_sumexp") {
            HawkesSumExpParams p;
            p.baseline = detail::vector_from_json(j.at("baseline"), "baseline");
            const auto d = p.baseline.size();
            for (const auto& layer : j.at("adjacency")) {
                p.adjacency.push_back(detail::matrix_from_json(layer, d, "adjacency"));
            }
            for (const auto& layer : j.at("decays")) {
                p.decays.push_back(detail::matrix_from_json(layer, d, "decays"));
            }
            validate(p);
            return p;
        }
        if (kind == "hawkes_em") {
            EmKernelEstimate e;
            e.baseline = detail::vector_from_json(j.at("baseline"), "baseline");
            e.dim = static_cast<std::size_t>(e.baseline.size());
            e.grid = j.at("grid").get<std::vector<double>>();
            if (e.grid.size() < 2 || e.grid.front() != 0.0) {
                throw data_error("EM grid must start at 0 and have at least two points");
            }
            for (std::size_t m = 1; m < e.grid.size(); ++m) {
                if (!(e.grid[m] > e.grid[m - 1])) {
                    throw data_error("EM grid must be strictly increasing");
                }
                if (std::abs(e.grid[m] - static_cast<double>(m) * e.bin_width()) > 1e-9 * e.support()) {
                    throw data_error("EM grid must be uniform");
                }
            }
            const auto& values = j.at("values");
            if (values.size() != e.dim) {
                throw data_error("EM values must be dim x dim x M");
            }
            e.values.assign(e.dim * e.dim * e.grid_size(), 0.0);
            for (std::size_t i = 0; i < e.dim; ++i) {
                if (values[i].size() != e.dim) {
                    throw data_error("EM values must be dim x dim x M");
                }
                for (std::size_t k = 0; k < e.dim; ++k) {
                    const auto heights = values[i][k].get<std::vector<double>>();
                    if (heights.size() != e.grid_size()) {
                        throw data_error("EM values must be dim x dim x M");
                    }
                    for (std::size_t m = 0; m < heights.size(); ++m) {
                        e.value(i, k, m) = heights[m];
                    }
                }
            }
            return e;
        }
        throw data_error("unknown model kind: " + kind);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("invalid model file: ") + e.what());
    }
}

inline HawkesModel load_model(const std::filesystem::path& path) {
    return model_from_json(detail::parse_json_file(path));
}

inline void save_model(const nlohmann::json& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, model.dump() + "\n");
}

} // namespace pointproc
