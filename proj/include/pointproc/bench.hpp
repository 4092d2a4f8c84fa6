#pragma once

#include "pointproc/error.hpp"
#include "pointproc/hawkes/fit.hpp"
#include "pointproc/hawkes/simulation.hpp"
#include "pointproc/io_util.hpp"
#include "pointproc/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace pointproc {

enum class BenchTask { simulate, fit };
enum class BenchTier { small, medium, large };

inline const char* to_string(BenchTask t) { return t == BenchTask::simulate ? "simulate" : "fit"; }

inline const char* to_string(BenchTier t) {
    switch (t) {
    case BenchTier::small: return "small";
    case BenchTier::medium: return "medium";
    case BenchTier::large: return "large";
    }
    return "?";
}

inline std::size_t tier_events(BenchTier t) {
    switch (t) {
    case BenchTier::small: return 50'000;
    case BenchTier::medium: return 200'000;
    case BenchTier::large: return 1'000'000;
    }
    return 0;
}

struct BenchSpec {
    BenchTask task{BenchTask::simulate};
    std::size_t dim{16};
    BenchTier tier{BenchTier::small};
    std::size_t threads{1};
    std::size_t repetitions{3};
    std::uint64_t seed{0};
    double decay{1.0};
    double spectral_radius{0.8};
    int fit_iterations{20};
};

struct BenchRow {
    std::string task;
    std::size_t dim{0};
    std::string tier;
    std::size_t threads{1};
    std::size_t rep{0};
    std::size_t events{0};
    double wall_seconds{0.0};
};

struct BenchResult {
    BenchSpec spec;
    std::vector<BenchRow> rows;
    double median_seconds{0.0};
    double median_events{0.0};
    double total_wall_seconds{0.0}; // the whole replicate batch, all workers included
    double end_time{0.0};
};

/// Benchmark process: baselines uniform in [0.5, 1.5], adjacency with iid
/// uniform entries rescaled to the requested spectral radius, shared decay.
inline HawkesExpParams bench_params(const BenchSpec& spec) {
    if (spec.dim == 0 || !(spec.decay > 0.0) || !(spec.spectral_radius >= 0.0 && spec.spectral_radius < 1.0)) {
        throw config_error("bench needs dim > 0, decay > 0 and spectral radius in [0, 1)");
    }
    RngStream rng(spec.seed, 0);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    Vector mu(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        mu[i] = 0.5 + rng.uniform();
    }
    Matrix adj(d, d);
    for (Eigen::Index k = 0; k < adj.size(); ++k) {
        adj(k) = rng.uniform();
    }
    const double rho = spectral_radius(adj);
    if (rho > 0.0) {
        adj *= spec.spectral_radius / rho;
    }
    return with_shared_decay(mu, adj, spec.decay);
}

/// Horizon whose expected stationary event count equals the tier target.
inline double bench_end_time(const HawkesExpParams& params, std::size_t target_events) {
    return static_cast<double>(target_events) / mean_intensity(params).sum();
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline BenchResult run_bench(const BenchSpec& spec) {
    if (spec.threads == 0 || spec.repetitions == 0 || spec.fit_iterations <= 0) {
        throw config_error("bench needs threads > 0, repetitions > 0 and fit_iterations > 0");
    }
    using clock = std::chrono::steady_clock;
    const HawkesExpParams params = bench_params(spec);
    const double end_time = bench_end_time(params, tier_events(spec.tier));
    std::vector<BenchRow> rows(spec.repetitions);

    const auto one_rep = [&](std::size_t rep) {
        RngStream rng(spec.seed, 1 + rep);
        BenchRow& row = rows[rep];
        row = BenchRow{to_string(spec.task), spec.dim, to_string(spec.tier), spec.threads, rep, 0, 0.0};
        if (spec.task == BenchTask::simulate) {
            const auto start = clock::now();
            const auto sim = simulate_hawkes_exp(params, end_time, rng);
            row.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
            row.events = sim.realization.total_events();
            return;
        }
        auto realization = simulate_hawkes_exp(params, end_time, rng).realization;
        row.events = realization.total_events();
        SolverConfig cfg;
        cfg.kind = SolverKind::agd;
        cfg.max_iter = spec.fit_iterations;
        cfg.tol = 0.0;
        cfg.record_every = spec.fit_iterations;
        const auto start = clock::now();
        auto obj = std::make_shared<const HawkesExpObjective>(std::vector{std::move(realization)},
                                                              std::vector<Matrix>{params.decays});
        const auto fit = fit_hawkes_exp(obj, PenaltySpec{}, cfg);
        row.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
        if (fit.solver.stop_reason == StopReason::diverged) {
            throw numerical_error("bench fit diverged");
        }
    };

    const auto start = clock::now();
    parallel_for_each_index(spec.repetitions, spec.threads, one_rep);
    BenchResult out{spec, std::move(rows), 0.0, 0.0, std::chrono::duration<double>(clock::now() - start).count(), end_time};

    std::vector<double> secs;
    std::vector<double> events;
    for (const auto& r : out.rows) {
        secs.push_back(r.wall_seconds);
        events.push_back(static_cast<double>(r.events));
    }
    out.median_seconds = median_of(secs);
    out.median_events = median_of(events);
    return out;
}

inline constexpr const char* bench_csv_header = "task,dim,tier,threads,rep,events,wall_seconds";

inline std::string bench_csv_rows(const std::vector<BenchRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.task + "," + std::to_string(r.dim) + "," + r.tier + "," + std::to_string(r.threads) + "," +
               std::to_string(r.rep) + "," + std::to_string(r.events) + "," + io::format_double(r.wall_seconds) + "\n";
    }
    return out;
}

/// Appends to an existing results file (header kept) or creates it.
inline void append_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    std::string content;
    if (std::filesystem::exists(path)) {
        content = io::read_file(path);
        if (!content.empty() && content.back() != '\n') {
            content += '\n';
        }
    }
    if (content.empty()) {
        content = std::string(bench_csv_header) + "\n";
    }
    content += bench_csv_rows(rows);
    io::write_file_atomic(path, content);
}

struct BenchGroup {
    std::string task;
    std::size_t dim{0};
    std::size_t threads{1};
    std::string tier;
    std::size_t n_rows{0};
    double median_seconds{0.0};
    double median_events{0.0};
};

struct BenchScaling {
    std::string task;
    std::size_t dim{0};
    std::size_t threads{1};
    std::optional<double> exponent; // slope of log time against log events; needs two tiers
};

struct BenchSummary {
    std::vector<BenchGroup> groups;
    std::vector<BenchScaling> scaling;
    std::vector<std::string> warnings;
};

/// Least-squares slope of y against x.
inline std::optional<double> fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) {
        return std::nullopt;
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k] / n;
        my += y[k] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) {
        return std::nullopt;
    }
    return sxy / sxx;
}

inline BenchSummary bench_summarize(const std::vector<BenchRow>& rows) {
    BenchSummary out;
    using Key = std::tuple<std::string, std::size_t, std::size_t, std::string>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> grouped;
    for (const auto& r : rows) {
        auto& [secs, evs] = grouped[{r.task, r.dim, r.threads, r.tier}];
        secs.push_back(r.wall_seconds);
        evs.push_back(static_cast<double>(r.events));
    }
    using ScaleKey = std::tuple<std::string, std::size_t, std::size_t>;
    std::map<ScaleKey, std::pair<std::vector<double>, std::vector<double>>> curves;
    for (const auto& [key, data] : grouped) {
        const auto& [task, dim, threads, tier] = key;
        BenchGroup g{task, dim, threads, tier, data.first.size(), median_of(data.first), median_of(data.second)};
        out.groups.push_back(g);
        if (g.median_seconds > 0.0 && g.median_events > 0.0) {
            auto& [lx, ly] = curves[{task, dim, threads}];
            lx.push_back(std::log(g.median_events));
            ly.push_back(std::log(g.median_seconds));
        }
    }
    std::sort(out.groups.begin(), out.groups.end(), [](const BenchGroup& a, const BenchGroup& b) {
        return std::tie(a.task, a.dim, a.threads, a.median_events) < std::tie(b.task, b.dim, b.threads, b.median_events);
    });
    for (const auto& [key, xy] : curves) {
        const auto& [task, dim, threads] = key;
        out.scaling.push_back({task, dim, threads, fitted_slope(xy.first, xy.second)});
    }
    return out;
}

/// Reads a results CSV; malformed rows are skipped with a warning.
inline BenchSummary bench_report(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<BenchRow> rows;
    std::vector<std::string> warnings;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line == bench_csv_header) {
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        try {
            if (cells.size() != 7) {
                throw data_error("expected 7 cells");
            }
            BenchRow r;
            r.task = cells[0];
            r.dim = static_cast<std::size_t>(std::stoull(cells[1]));
            r.tier = cells[2];
            r.threads = static_cast<std::size_t>(std::stoull(cells[3]));
            r.rep = static_cast<std::size_t>(std::stoull(cells[4]));
            r.events = static_cast<std::size_t>(std::stoull(cells[5]));
            r.wall_seconds = io::parse_double(cells[6]);
            if (!(r.wall_seconds >= 0.0)) {
                throw data_error("negative time");
            }
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            warnings.push_back("line " + std::to_string(line_no) + " skipped: " + e.what());
        }
    }
    BenchSummary out = bench_summarize(rows);
    out.warnings = std::move(warnings);
    return out;
}

inline std::string format_bench_summary(const BenchSummary& s) {
    std::string out = "task,dim,threads,tier,rows,median_events,median_seconds\n";
    for (const auto& g : s.groups) {
        out += g.task + "," + std::to_string(g.dim) + "," + std::to_string(g.threads) + "," + g.tier + "," +
               std::to_string(g.n_rows) + "," + io::format_double(g.median_events) + "," +
               io::format_double(g.median_seconds) + "\n";
    }
    out += "task,dim,threads,scaling_exponent\n";
    for (const auto& c : s.scaling) {
        out += c.task + "," + std::to_string(c.dim) + "," + std::to_string(c.threads) + "," +
               (c.exponent ? io::format_double(*c.exponent) : std::string("undefined")) + "\n";
    }
    return out;
}

} // namespace pointproc
