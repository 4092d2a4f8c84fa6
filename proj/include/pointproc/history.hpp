#pragma once

#include "pointproc/io_util.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pointproc {

struct ConvergenceRecord {
    int iteration{0};
    double elapsed{0.0};
    double objective{0.0};
    std::optional<double> gap{};
};

inline std::string history_to_csv(const std::vector<ConvergenceRecord>& history) {
    std::string out = "iteration,elapsed_s,objective,gap\n";
    for (const auto& rec : history) {
        out += std::to_string(rec.iteration);
        out += ',';
        out += io::format_double(rec.elapsed);
        out += ',';
        out += io::format_double(rec.objective);
        out += ',';
        if (rec.gap) {
            out += io::format_double(*rec.gap);
        }
        out += '\n';
    }
    return out;
}

inline void save_history(const std::vector<ConvergenceRecord>& history,
                         const std::filesystem::path& path) {
    io::write_file_atomic(path, history_to_csv(history));
}

} // namespace pointproc
