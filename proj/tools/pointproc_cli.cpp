// pointproc: simulate / fit / bench / eval front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or file
// error, 3 numerical failure. Every successful run prints a one-line JSON
// summary on stdout; outputs are written with temp-file + rename.

#include "pointproc/bench.hpp"
#include "pointproc/dataset.hpp"
#include "pointproc/error.hpp"
#include "pointproc/events.hpp"
#include "pointproc/glm.hpp"
#include "pointproc/hawkes/adm4.hpp"
#include "pointproc/hawkes/diagnostics.hpp"
#include "pointproc/hawkes/em.hpp"
#include "pointproc/hawkes/fit.hpp"
#include "pointproc/hawkes/model_io.hpp"
#include "pointproc/hawkes/simulation.hpp"
#include "pointproc/history.hpp"
#include "pointproc/io_util.hpp"
#include "pointproc/prox.hpp"
#include "pointproc/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pointproc;

namespace {

struct Globals {
    std::uint64_t seed{0};
    std::size_t threads{1};
    bool quiet{false};
};

void warn(const Globals& g, const std::string& msg) {
    if (!g.quiet) {
        std::cerr << "warning: " << msg << '\n';
    }
}

void emit(const json& summary) { std::cout << summary.dump() << '\n'; }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(vector_json(m.row(i).transpose()));
    }
    return rows;
}

std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out += (j ? "," : "") + io::format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

// ---- penalties ----

struct PenaltyArgs {
    std::string name{"none"};
    double lam{0.0};
    double ratio{0.5};
    std::string groups;
    std::string slope_weights;
};

void add_penalty_options(CLI::App* cmd, PenaltyArgs& p) {
    cmd->add_option("--penalty", p.name, "none, l1, l2, en, tv, gl1, slope, nonneg, l1nn")
        ->check(CLI::IsMember({"none", "l1", "l2", "en", "tv", "gl1", "slope", "nonneg", "l1nn"}));
    cmd->add_option("--lam", p.lam, "penalty strength")->check(CLI::NonNegativeNumber);
    cmd->add_option("--ratio", p.ratio, "elastic-net l1 share")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--groups", p.groups, "group_l1 blocks, e.g. \"0:3,3:7\"");
    cmd->add_option("--slope-weights", p.slope_weights, "file of nonincreasing SLOPE weights");
}

std::vector<IndexRange> parse_groups(const std::string& text, std::size_t offset) {
    std::vector<IndexRange> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw config_error("group \"" + item + "\" is not start:end");
        }
        try {
            const auto a = std::stoull(item.substr(0, colon));
            const auto b = std::stoull(item.substr(colon + 1));
            out.push_back({offset + a, offset + b});
        } catch (const std::logic_error&) {
            throw config_error("group \"" + item + "\" is not start:end");
        }
        pos = comma + 1;
    }
    return out;
}

std::vector<double> read_number_list(const fs::path& path) {
    std::string text = io::read_file(path);
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r' || c == '\t') {
            c = ' ';
        }
    }
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t next = std::min(text.find(' ', pos), text.size());
        if (next > pos) {
            out.push_back(io::parse_double(std::string_view(text).substr(pos, next - pos)));
        }
        pos = next + 1;
    }
    return out;
}

// Group indices are relative to the penalized block; `offset` maps them to the parameter vector.
PenaltySpec make_penalty(const PenaltyArgs& a, std::size_t offset = 0) {
    static const std::map<std::string, PenaltyKind> kinds{
        {"none", PenaltyKind::none},     {"l1", PenaltyKind::l1},         {"l2", PenaltyKind::l2sq},
        {"en", PenaltyKind::elasticnet}, {"tv", PenaltyKind::tv1d},       {"gl1", PenaltyKind::group_l1},
        {"slope", PenaltyKind::slope},   {"nonneg", PenaltyKind::nonneg}, {"l1nn", PenaltyKind::l1_nonneg}};
    PenaltySpec p;
    p.kind = kinds.at(a.name);
    p.strength = a.lam;
    p.ratio = a.ratio;
    if (p.kind == PenaltyKind::group_l1) {
        if (a.groups.empty()) {
            throw config_error("--penalty gl1 needs --groups");
        }
        p.groups = parse_groups(a.groups, offset);
    }
    if (p.kind == PenaltyKind::slope) {
        if (a.slope_weights.empty()) {
            throw config_error("--penalty slope needs --slope-weights");
        }
        p.weights = read_number_list(a.slope_weights);
    }
    return p;
}

// ---- solvers ----

struct SolverArgs {
    std::string kind{"agd"};
    std::optional<double> step;
    int max_iter{100};
    double tol{1e-10};
    int record_every{1};
    std::string history;
};

void add_solver_options(CLI::App* cmd, SolverArgs& s, bool batch_only) {
    auto* opt = cmd->add_option("--solver", s.kind, "gd, agd, sgd, svrg, saga, sdca");
    if (batch_only) {
        opt->check(CLI::IsMember({"gd", "agd"}));
    } else {
        opt->check(CLI::IsMember({"gd", "agd", "sgd", "svrg", "saga", "sdca"}));
    }
    cmd->add_option("--step", s.step, "step size (default from smoothness)")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", s.max_iter, "iterations, or epochs for stochastic solvers")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", s.tol, "stopping tolerance")->check(CLI::NonNegativeNumber);
    cmd->add_option("--record-every", s.record_every, "history stride")->check(CLI::PositiveNumber);
    cmd->add_option("--history", s.history, "convergence history CSV");
}

SolverConfig make_solver(const SolverArgs& s, const Globals& g) {
    static const std::map<std::string, SolverKind> kinds{{"gd", SolverKind::gd},     {"agd", SolverKind::agd},
                                                         {"sgd", SolverKind::sgd},   {"svrg", SolverKind::svrg},
                                                         {"saga", SolverKind::saga}, {"sdca", SolverKind::sdca}};
    SolverConfig cfg;
    cfg.kind = kinds.at(s.kind);
    cfg.step = s.step;
    cfg.max_iter = s.max_iter;
    cfg.tol = s.tol;
    cfg.seed = g.seed;
    cfg.record_every = s.record_every;
    return cfg;
}

json solver_summary(const SolverResult& r) {
    return json{{"objective", r.objective},
                {"converged", r.converged},
                {"stop_reason", to_string(r.stop_reason)},
                {"iterations", r.history.empty() ? 0 : r.history.back().iteration}};
}

void require_not_diverged(const SolverResult& r) {
    if (r.stop_reason == StopReason::diverged) {
        throw numerical_error("solver diverged (non-finite objective); best finite objective " +
                              io::format_double(r.objective));
    }
}

// ---- event files ----

std::vector<EventRealization> load_all_events(const std::vector<std::string>& paths) {
    std::vector<EventRealization> out;
    for (const auto& p : paths) {
        out.push_back(load_events(p));
    }
    for (const auto& r : out) {
        if (r.dim() != out.front().dim()) {
            throw data_error("event files have different dimensions");
        }
    }
    return out;
}

std::size_t count_events(const std::vector<EventRealization>& rs) {
    std::size_t n = 0;
    for (const auto& r : rs) {
        n += r.total_events();
    }
    return n;
}

// Writes one realization to `out`, or several as out/replicate_NNNN.json.
std::vector<std::string> write_realizations(const std::vector<EventRealization>& rs, const fs::path& out) {
    std::vector<std::string> written;
    if (rs.size() == 1 && !fs::is_directory(out) && !out.string().ends_with('/')) {
        save_events(rs.front(), out);
        written.push_back(out.string());
        return written;
    }
    fs::create_directories(out);
    for (std::size_t r = 0; r < rs.size(); ++r) {
        std::string name = std::to_string(r);
        name = "replicate_" + std::string(name.size() < 4 ? 4 - name.size() : 0, '0') + name + ".json";
        save_events(rs[r], out / name);
        written.push_back((out / name).string());
    }
    return written;
}

// Kernel curves for plotting: target,source,lag,value.
std::string kernel_curves_csv(const HawkesSumExpParams& p, std::size_t points) {
    double min_decay = p.decays.front().minCoeff();
    for (const auto& b : p.decays) {
        min_decay = std::min(min_decay, b.minCoeff());
    }
    const double horizon = 5.0 / min_decay;
    std::string out = "target,source,lag,value\n";
    for (std::size_t i = 0; i < p.dim(); ++i) {
        for (std::size_t j = 0; j < p.dim(); ++j) {
            for (std::size_t k = 0; k < points; ++k) {
                const double t = horizon * static_cast<double>(k) / static_cast<double>(points - 1);
                double v = 0.0;
                for (std::size_t u = 0; u < p.n_layers(); ++u) {
                    const double a = p.adjacency[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    const double b = p.decays[u](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    v += a * b * std::exp(-b * t);
                }
                out += std::to_string(i) + "," + std::to_string(j) + "," + io::format_double(t) + "," +
                       io::format_double(v) + "\n";
            }
        }
    }
    return out;
}

std::string kernel_curves_csv(const EmKernelEstimate& e) {
    std::string out = "target,source,lag,value\n";
    for (std::size_t i = 0; i < e.dim; ++i) {
        for (std::size_t j = 0; j < e.dim; ++j) {
            for (std::size_t m = 0; m < e.grid_size(); ++m) {
                const double mid = 0.5 * (e.grid[m] + e.grid[m + 1]);
                out += std::to_string(i) + "," + std::to_string(j) + "," + io::format_double(mid) + "," +
                       io::format_double(e.value(i, j, m)) + "\n";
            }
        }
    }
    return out;
}

struct PlotArgs {
    std::string norms_csv;
    std::string kernels_csv;
};

void add_plot_options(CLI::App* cmd, PlotArgs& p) {
    cmd->add_option("--norms-csv", p.norms_csv, "kernel-norm matrix as CSV");
    cmd->add_option("--kernels-csv", p.kernels_csv, "estimated kernel curves as CSV");
}

// ---- eval ----

json eval_model(const HawkesModel& model, const std::vector<EventRealization>& rs) {
    json out;
    std::vector<std::vector<double>> residuals;
    const std::size_t model_dim =
        std::visit([](const auto& m) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, EmKernelEstimate>) {
                return m.dim;
            } else {
                return m.dim();
            }
        }, model);
    if (model_dim != rs.front().dim()) {
        throw data_error("dimension mismatch: model has " + std::to_string(model_dim) + " nodes, events have " +
                         std::to_string(rs.front().dim()));
    }
    residuals.resize(model_dim);
    const auto collect = [&](const std::vector<std::vector<double>>& per_node) {
        for (std::size_t i = 0; i < per_node.size(); ++i) {
            residuals[i].insert(residuals[i].end(), per_node[i].begin(), per_node[i].end());
        }
    };
    if (const auto* p = std::get_if<HawkesSumExpParams>(&model)) {
        const HawkesExpObjective obj(rs, p->decays);
        out["neg_loglik"] = hawkes_loglik(obj, obj.pack(*p));
        out["kernel_norms"] = matrix_json(kernel_norms(*p));
        for (const auto& r : rs) {
            collect(time_change_residuals(*p, r));
        }
    } else {
        const auto& e = std::get<EmKernelEstimate>(model);
        const EmEstimator em(rs, e.support(), e.grid_size());
        const double n = static_cast<double>(count_events(rs));
        out["neg_loglik"] = -em.log_likelihood(e) / (n > 0.0 ? n : 1.0);
        out["kernel_norms"] = matrix_json(kernel_norms(e));
        for (const auto& r : rs) {
            collect(em_time_change_residuals(e, r));
        }
    }
    json ks = json::array();
    json crit = json::array();
    json pass = json::array();
    for (const auto& res : residuals) {
        const double stat = ks_statistic_exp1(res);
        const double c = ks_critical_1pct(res.size());
        ks.push_back(stat);
        crit.push_back(c);
        pass.push_back(stat < c);
    }
    out["ks"] = ks;
    out["ks_critical_1pct"] = crit;
    out["ks_pass"] = pass;
    out["events"] = count_events(rs);
    return out;
}

std::size_t threads_from_env() {
    const char* env = std::getenv("POINTPROC_THREADS");
    if (env == nullptr || *env == '\0') {
        return 1;
    }
    try {
        const long v = std::stol(env);
        if (v > 0) {
            return static_cast<std::size_t>(v);
        }
    } catch (const std::logic_error&) {
    }
    throw config_error("POINTPROC_THREADS must be a positive integer");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pointproc: point-process simulation, inference and composite optimization"};
    app.require_subcommand(1);
    Globals g;
    try {
        g.threads = threads_from_env();
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--threads", g.threads, "worker threads (default $POINTPROC_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "suppress warnings on stderr");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "simulate event data")->require_subcommand(1)->fallthrough();
    std::string params_path;
    std::vector<double> rates;
    double end_time = 0.0;
    std::size_t replicates = 1;
    std::size_t max_events = 10'000'000;
    std::string sim_out;
    auto* sim_hawkes = simulate->add_subcommand("hawkes", "exponential-kernel Hawkes process")->fallthrough();
    sim_hawkes->add_option("--params", params_path, "parameter JSON")->required();
    auto* sim_poisson = simulate->add_subcommand("poisson", "independent homogeneous Poisson streams")->fallthrough();
    sim_poisson->add_option("--rates", rates, "per-node rates")->required()->delimiter(',');
    for (auto* cmd : {sim_hawkes, sim_poisson}) {
        cmd->add_option("--end-time", end_time, "horizon T")->required()->check(CLI::PositiveNumber);
        cmd->add_option("--replicates", replicates, "independent realizations")->check(CLI::PositiveNumber);
        cmd->add_option("--out", sim_out, "output file, or directory when replicates > 1")->required();
    }
    sim_hawkes->add_option("--max-events", max_events, "truncate each realization")->check(CLI::PositiveNumber);

    // fit
    auto* fit = app.add_subcommand("fit", "fit a model")->require_subcommand(1)->fallthrough();
    auto* fit_glm = fit->add_subcommand("glm", "generalized linear model")->fallthrough();
    std::string glm_model = "linreg";
    std::string features_path;
    std::string labels_path;
    std::string feature_format = "dense";
    double huber_delta = 1.0;
    PenaltyArgs glm_pen;
    SolverArgs glm_solver;
    std::string fit_out;
    fit_glm->add_option("--model", glm_model, "linreg, logreg, poisreg, huber, cox")
        ->check(CLI::IsMember({"linreg", "logreg", "poisreg", "huber", "cox"}));
    fit_glm->add_option("--features", features_path, "feature CSV")->required();
    fit_glm->add_option("--labels", labels_path, "label CSV")->required();
    fit_glm->add_option("--format", feature_format, "dense or triplet")->check(CLI::IsMember({"dense", "triplet"}));
    fit_glm->add_option("--huber-delta", huber_delta, "Huber threshold")->check(CLI::PositiveNumber);
    add_penalty_options(fit_glm, glm_pen);
    add_solver_options(fit_glm, glm_solver, false);
    fit_glm->add_option("--out", fit_out, "model JSON");

    std::vector<std::string> event_paths;
    std::vector<double> decays;
    PenaltyArgs hawkes_pen;
    SolverArgs hawkes_solver;
    PlotArgs plot;
    auto* fit_exp = fit->add_subcommand("hawkes-exp", "Hawkes MLE with fixed exponential decays")->fallthrough();
    auto* fit_lsq = fit->add_subcommand("hawkes-lsq", "Hawkes least-squares contrast")->fallthrough();
    for (auto* cmd : {fit_exp, fit_lsq}) {
        cmd->add_option("--decay", decays, "decay; repeat for a sum of exponentials")->required()->check(CLI::PositiveNumber);
        add_penalty_options(cmd, hawkes_pen);
        add_solver_options(cmd, hawkes_solver, true);
    }
    EmConfig em_cfg;
    auto* fit_em_cmd = fit->add_subcommand("hawkes-em", "nonparametric EM on a uniform kernel grid")->fallthrough();
    fit_em_cmd->add_option("--support", em_cfg.support, "kernel support (default 5 / rough decay)")
        ->check(CLI::PositiveNumber);
    fit_em_cmd->add_option("--grid-size", em_cfg.grid_size, "number of bins")->check(CLI::PositiveNumber);
    fit_em_cmd->add_option("--max-iter", em_cfg.max_iter, "EM iterations")->check(CLI::PositiveNumber);
    fit_em_cmd->add_option("--tol", em_cfg.tol, "relative log-likelihood change")->check(CLI::NonNegativeNumber);
    Adm4Config adm4_cfg;
    auto* fit_adm4_cmd = fit->add_subcommand("hawkes-adm4", "sparse low-rank Hawkes adjacency by ADMM")->fallthrough();
    fit_adm4_cmd->add_option("--decay", adm4_cfg.decay, "shared decay")->required()->check(CLI::PositiveNumber);
    fit_adm4_cmd->add_option("--lam-l1", adm4_cfg.lam_l1, "l1 strength")->check(CLI::NonNegativeNumber);
    fit_adm4_cmd->add_option("--lam-nuclear", adm4_cfg.lam_nuclear, "nuclear-norm strength")->check(CLI::NonNegativeNumber);
    fit_adm4_cmd->add_option("--rho", adm4_cfg.admm_rho, "initial ADMM penalty")->check(CLI::PositiveNumber);
    fit_adm4_cmd->add_option("--max-outer", adm4_cfg.max_outer, "ADMM iterations")->check(CLI::PositiveNumber);
    fit_adm4_cmd->add_option("--tol", adm4_cfg.tol, "residual tolerance")->check(CLI::NonNegativeNumber);
    for (auto* cmd : {fit_exp, fit_lsq, fit_em_cmd, fit_adm4_cmd}) {
        cmd->add_option("--events", event_paths, "event JSON; repeat for several realizations")->required();
        cmd->add_option("--out", fit_out, "model JSON");
        add_plot_options(cmd, plot);
    }

    // bench
    auto* bench = app.add_subcommand("bench", "timing harness")->fallthrough();
    std::string bench_task = "simulate";
    std::string bench_tier = "small";
    BenchSpec bench_spec;
    std::string bench_out;
    bench->add_option("--task", bench_task, "simulate or fit")->check(CLI::IsMember({"simulate", "fit"}));
    bench->add_option("--dim", bench_spec.dim, "dimension")->check(CLI::PositiveNumber);
    bench->add_option("--tier", bench_tier, "small, medium or large")->check(CLI::IsMember({"small", "medium", "large"}));
    bench->add_option("--reps", bench_spec.repetitions, "repetitions")->check(CLI::PositiveNumber);
    bench->add_option("--decay", bench_spec.decay, "shared decay")->check(CLI::PositiveNumber);
    bench->add_option("--fit-iters", bench_spec.fit_iterations, "solver iterations timed by the fit task")
        ->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_out, "results CSV (rows are appended)");
    auto* bench_report_cmd = bench->add_subcommand("report", "summarize a results CSV")->fallthrough();
    std::string report_path;
    bench_report_cmd->add_option("--results", report_path, "results CSV")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a fitted model")->require_subcommand(1)->fallthrough();
    auto* eval_hawkes = eval->add_subcommand("hawkes", "log-likelihood, kernel norms, residual KS")->fallthrough();
    std::string model_path;
    std::vector<std::string> eval_events;
    eval_hawkes->add_option("--model", model_path, "model JSON")->required();
    eval_hawkes->add_option("--events", eval_events, "event JSON; repeat for several realizations")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (sim_hawkes->parsed() || sim_poisson->parsed()) {
            std::vector<EventRealization> rs;
            bool truncated = false;
            json out{{"command", sim_hawkes->parsed() ? "simulate hawkes" : "simulate poisson"},
                     {"seed", g.seed},
                     {"end_time", end_time},
                     {"replicates", replicates}};
            if (sim_hawkes->parsed()) {
                const auto params = load_hawkes_params(params_path);
                auto results = simulate_replicates(to_sum_exp(params), end_time, g.seed, replicates, g.threads, max_events);
                for (auto& res : results) {
                    truncated = truncated || res.truncated;
                    for (const auto& w : res.warnings) {
                        warn(g, w);
                    }
                    rs.push_back(std::move(res.realization));
                }
                out["truncated"] = truncated;
            } else {
                const Vector rate_vec = Eigen::Map<const Vector>(rates.data(), static_cast<Eigen::Index>(rates.size()));
                for (std::size_t r = 0; r < replicates; ++r) {
                    RngStream rng(g.seed, r);
                    rs.push_back(simulate_poisson(rate_vec, end_time, rng));
                }
            }
            json counts = json::array();
            for (const auto& r : rs) {
                counts.push_back(r.total_events());
            }
            out["events"] = counts;
            out["outputs"] = write_realizations(rs, sim_out);
            emit(out);
            return 0;
        }

        if (fit_glm->parsed()) {
            static const std::map<std::string, std::pair<GlmKind, LabelDomain>> models{
                {"linreg", {GlmKind::least_squares, LabelDomain::any}},
                {"logreg", {GlmKind::logistic, LabelDomain::binary}},
                {"poisreg", {GlmKind::poisson, LabelDomain::count}},
                {"huber", {GlmKind::huber, LabelDomain::any}},
                {"cox", {GlmKind::cox_partial, LabelDomain::duration}}};
            const auto [kind, domain] = models.at(glm_model);
            auto data = std::make_shared<const LabeledDataset>(load_dataset(
                features_path, labels_path, feature_format == "dense" ? FeatureFormat::dense : FeatureFormat::triplet,
                domain));
            GlmOptions options;
            options.huber_delta = huber_delta;
            const GlmObjective obj(kind, data, options);
            const PenaltySpec pen = make_penalty(glm_pen);
            const SolverConfig cfg = make_solver(glm_solver, g);
            const auto res = minimize(obj, CompositePenalty(pen), cfg, Vector::Zero(static_cast<Eigen::Index>(obj.n_params())));
            require_not_diverged(res);
            json summary = solver_summary(res);
            summary["command"] = "fit glm";
            summary["model"] = glm_model;
            summary["solver"] = glm_solver.kind;
            if (!glm_solver.history.empty()) {
                save_history(res.history, glm_solver.history);
            }
            if (!fit_out.empty()) {
                json model = summary;
                model.erase("command");
                model["model"] = "glm";
                model["loss"] = glm_model;
                model["weights"] = vector_json(res.minimizer);
                save_model(model, fit_out);
            }
            emit(summary);
            return 0;
        }

        if (fit_exp->parsed() || fit_lsq->parsed()) {
            const bool lsq = fit_lsq->parsed();
            auto rs = load_all_events(event_paths);
            const auto d = static_cast<Eigen::Index>(rs.front().dim());
            std::vector<Matrix> layers;
            for (double b : decays) {
                layers.push_back(Matrix::Constant(d, d, b));
            }
            auto obj = std::make_shared<const HawkesExpObjective>(std::move(rs), std::move(layers), lsq);
            const PenaltySpec pen = make_penalty(hawkes_pen, obj->dim());
            const auto res = fit_hawkes_exp(obj, pen, make_solver(hawkes_solver, g),
                                            lsq ? HawkesGoodness::least_squares : HawkesGoodness::likelihood);
            require_not_diverged(res.solver);
            json summary = solver_summary(res.solver);
            summary["command"] = lsq ? "fit hawkes-lsq" : "fit hawkes-exp";
            summary["events"] = obj->total_events();
            summary["spectral_radius"] = spectral_radius(kernel_norms(res.params));
            if (!hawkes_solver.history.empty()) {
                save_history(res.solver.history, hawkes_solver.history);
            }
            if (!plot.norms_csv.empty()) {
                io::write_file_atomic(plot.norms_csv, matrix_csv(kernel_norms(res.params)));
            }
            if (!plot.kernels_csv.empty()) {
                io::write_file_atomic(plot.kernels_csv, kernel_curves_csv(res.params, 101));
            }
            if (!fit_out.empty()) {
                save_model(model_to_json(res.params), fit_out);
            }
            emit(summary);
            return 0;
        }

        if (fit_em_cmd->parsed()) {
            auto rs = load_all_events(event_paths);
            const std::size_t n = count_events(rs);
            const auto res = fit_em(std::move(rs), em_cfg);
            for (const auto& w : res.warnings) {
                warn(g, w);
            }
            const json summary{{"command", "fit hawkes-em"},
                               {"events", n},
                               {"support", res.estimate.support()},
                               {"grid_size", res.estimate.grid_size()},
                               {"iterations", res.iterations},
                               {"converged", res.converged},
                               {"loglik", res.loglik.back()}};
            if (!plot.norms_csv.empty()) {
                io::write_file_atomic(plot.norms_csv, matrix_csv(kernel_norms(res.estimate)));
            }
            if (!plot.kernels_csv.empty()) {
                io::write_file_atomic(plot.kernels_csv, kernel_curves_csv(res.estimate));
            }
            if (!fit_out.empty()) {
                save_model(model_to_json(res.estimate), fit_out);
            }
            emit(summary);
            return 0;
        }

        if (fit_adm4_cmd->parsed()) {
            auto rs = load_all_events(event_paths);
            const std::size_t n = count_events(rs);
            const auto res = fit_adm4(std::move(rs), adm4_cfg);
            if (!res.converged) {
                warn(g, "ADM4 did not reach tolerance in " + std::to_string(res.iterations) +
                            " iterations; returning the best iterate");
            }
            const json summary{{"command", "fit hawkes-adm4"},
                               {"events", n},
                               {"objective", res.objective},
                               {"iterations", res.iterations},
                               {"converged", res.converged}};
            const auto params = to_sum_exp(res.params);
            if (!plot.norms_csv.empty()) {
                io::write_file_atomic(plot.norms_csv, matrix_csv(res.params.adjacency));
            }
            if (!plot.kernels_csv.empty()) {
                io::write_file_atomic(plot.kernels_csv, kernel_curves_csv(params, 101));
            }
            if (!fit_out.empty()) {
                save_model(model_to_json(params), fit_out);
            }
            emit(summary);
            return 0;
        }

        if (bench_report_cmd->parsed()) {
            const auto summary = bench_report(report_path);
            for (const auto& w : summary.warnings) {
                warn(g, w);
            }
            std::cout << format_bench_summary(summary);
            json scaling = json::array();
            for (const auto& s : summary.scaling) {
                scaling.push_back(json{{"task", s.task},
                                       {"dim", s.dim},
                                       {"threads", s.threads},
                                       {"exponent", s.exponent ? json(*s.exponent) : json(nullptr)}});
            }
            emit(json{{"command", "bench report"},
                      {"groups", summary.groups.size()},
                      {"scaling", scaling},
                      {"skipped_rows", summary.warnings.size()}});
            return 0;
        }

        if (bench->parsed()) {
            bench_spec.task = bench_task == "simulate" ? BenchTask::simulate : BenchTask::fit;
            bench_spec.tier = bench_tier == "small" ? BenchTier::small
                              : bench_tier == "medium" ? BenchTier::medium
                                                       : BenchTier::large;
            bench_spec.threads = g.threads;
            bench_spec.seed = g.seed;
            const auto res = run_bench(bench_spec);
            const double target = static_cast<double>(tier_events(bench_spec.tier));
            for (const auto& row : res.rows) {
                if (std::abs(static_cast<double>(row.events) - target) > 0.2 * target) {
                    warn(g, "rep " + std::to_string(row.rep) + " produced " + std::to_string(row.events) +
                                " events, more than 20% away from the tier target");
                }
            }
            if (!bench_out.empty()) {
                append_bench_csv(res.rows, bench_out);
            }
            emit(json{{"command", "bench"},
                      {"task", bench_task},
                      {"dim", bench_spec.dim},
                      {"tier", bench_tier},
                      {"threads", bench_spec.threads},
                      {"reps", bench_spec.repetitions},
                      {"end_time", res.end_time},
                      {"median_events", res.median_events},
                      {"median_seconds", res.median_seconds},
                      {"total_wall_seconds", res.total_wall_seconds}});
            return 0;
        }

        if (eval_hawkes->parsed()) {
            const auto model = load_model(model_path);
            const auto rs = load_all_events(eval_events);
            json out = eval_model(model, rs);
            out["command"] = "eval hawkes";
            emit(out);
            return 0;
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 3;
    }
    std::cerr << "error: no command given\n";
    return 1;
}
