// Acceptance runner: `acceptance N` checks criterion N, no argument checks all.
// Prints one line per criterion; exit status is nonzero if any fails.

#include "pointproc/bench.hpp"
#include "pointproc/glm.hpp"
#include "pointproc/hawkes/adm4.hpp"
#include "pointproc/hawkes/diagnostics.hpp"
#include "pointproc/hawkes/em.hpp"
#include "pointproc/hawkes/fit.hpp"
#include "pointproc/hawkes/simulation.hpp"
#include "pointproc/prox.hpp"
#include "pointproc/solvers.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace pointproc;
using oracle::SyntheticTask;

namespace {

struct Outcome {
    bool pass{true};
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
        }
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += what + (ok ? "" : " [FAIL]");
    }
};

std::string num(double v, int digits = 3) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

SolverConfig solver(SolverKind kind, int max_iter, double tol, std::uint64_t seed = 1) {
    SolverConfig cfg;
    cfg.kind = kind;
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    cfg.seed = seed;
    return cfg;
}

// Same generator as the unit suite: random strength/ratio, slope weights
// decreasing, groups of length 1..3 covering the vector.
PenaltySpec random_penalty(PenaltyKind kind, RngStream& rng, std::size_t n) {
    PenaltySpec p;
    p.kind = kind;
    p.strength = 0.05 + 2.0 * rng.uniform();
    p.ratio = rng.uniform();
    if (kind == PenaltyKind::slope) {
        double w = 1.0 + rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            p.weights.push_back(w);
            w *= 0.5 + 0.5 * rng.uniform();
        }
    }
    if (kind == PenaltyKind::group_l1) {
        std::size_t g = 0;
        while (g < n) {
            const std::size_t len = std::min<std::size_t>(1 + rng.uniform_index(3), n - g);
            p.groups.push_back({g, g + len});
            g += len;
        }
        p.group_size_scaling = rng.uniform() < 0.5;
    }
    return p;
}

Outcome prox_oracles() {
    Outcome out;
    RngStream rng(1001);
    for (PenaltyKind kind : {PenaltyKind::none, PenaltyKind::l1, PenaltyKind::l2sq, PenaltyKind::elasticnet,
                             PenaltyKind::tv1d, PenaltyKind::group_l1, PenaltyKind::slope, PenaltyKind::nonneg,
                             PenaltyKind::l1_nonneg}) {
        double worst_residual = 0.0;
        double worst_golden = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto n = 1 + rng.uniform_index(8);
            const Vector x = oracle::random_vector(rng, static_cast<Eigen::Index>(n), 2.0);
            const double step = 0.05 + 2.0 * rng.uniform();
            const auto p = random_penalty(kind, rng, n);
            const Vector z = prox_apply(p, x, step);
            worst_residual = std::max(worst_residual, oracle::subgradient_residual(p, x, z, step));
            if (oracle::is_separable(kind)) {
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    worst_golden =
                        std::max(worst_golden, std::abs(z[i] - oracle::golden_prox_coordinate(p, x[i], step)));
                }
            }
        }
        std::string what = std::string(to_string(kind)) + " res " + num(worst_residual);
        if (oracle::is_separable(kind)) {
            what += " golden " + num(worst_golden);
        }
        out.check(worst_residual <= 1e-8 && worst_golden <= 1e-6, what);
    }
    return out;
}

std::shared_ptr<const LabeledDataset> data_for(GlmKind kind, int n, int p, std::uint64_t seed) {
    switch (kind) {
    case GlmKind::logistic: return oracle::synthetic_dataset(SyntheticTask::binary, n, p, seed);
    case GlmKind::poisson: return oracle::synthetic_dataset(SyntheticTask::counts, n, p, seed, 0.5);
    case GlmKind::cox_partial: return oracle::synthetic_dataset(SyntheticTask::survival, n, p, seed);
    default: return oracle::synthetic_dataset(SyntheticTask::regression, n, p, seed);
    }
}

Outcome gradients() {
    Outcome out;
    RngStream rng(2002);
    for (GlmKind kind : {GlmKind::least_squares, GlmKind::logistic, GlmKind::poisson, GlmKind::huber,
                         GlmKind::cox_partial}) {
        const GlmObjective obj(kind, data_for(kind, 60, 6, 2100 + static_cast<std::uint64_t>(kind)));
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const Vector w = oracle::random_vector(rng, 6, 0.5);
            const Vector fd = oracle::finite_difference_gradient([&](const Vector& v) { return obj.loss(v); }, w);
            worst = std::max(worst, oracle::relative_error(obj.grad(w), fd));
        }
        out.check(worst < 1e-5, std::string(to_string(kind)) + " " + num(worst));
    }

    const auto truth = oracle::random_hawkes_params(3, 2, 2200);
    RngStream sim_rng(2201);
    const auto r = simulate_hawkes_exp(truth, 200.0, sim_rng).realization;
    const HawkesExpObjective obj({r}, truth.decays, true);
    double worst_ll = 0.0;
    double worst_lsq = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Vector w(static_cast<Eigen::Index>(obj.n_params()));
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            w[k] = k < static_cast<Eigen::Index>(obj.dim()) ? 0.2 + rng.uniform() : 0.02 + 0.2 * rng.uniform();
        }
        const Vector fd_ll = oracle::finite_difference_gradient([&](const Vector& v) { return obj.loglik_value(v); }, w);
        const Vector fd_lsq = oracle::finite_difference_gradient([&](const Vector& v) { return obj.lsq_value(v); }, w);
        worst_ll = std::max(worst_ll, oracle::relative_error(obj.loglik_grad(w), fd_ll));
        worst_lsq = std::max(worst_lsq, oracle::relative_error(obj.lsq_grad(w), fd_lsq));
    }
    out.check(worst_ll < 1e-5, "hawkes loglik " + num(worst_ll));
    out.check(worst_lsq < 1e-5, "hawkes lsq " + num(worst_lsq));
    return out;
}

Outcome solver_agreement() {
    Outcome out;
    const int n = 2000;
    const int p = 50;
    const GlmObjective f(GlmKind::logistic, oracle::synthetic_dataset(SyntheticTask::binary, n, p, 3003));
    PenaltySpec ridge;
    ridge.kind = PenaltyKind::l2sq;
    ridge.strength = 1.0 / n;

    struct Run {
        SolverKind kind;
        int iters;
        double tol;
    };
    const std::vector<Run> runs{{SolverKind::gd, 20000, 1e-15},
                                {SolverKind::agd, 5000, 1e-15},
                                {SolverKind::svrg, 300, 1e-15},
                                {SolverKind::saga, 300, 1e-15},
                                {SolverKind::sdca, 300, 1e-10}};
    std::vector<double> finals;
    std::optional<double> gap;
    for (const auto& run : runs) {
        const auto res = minimize(f, ridge, solver(run.kind, run.iters, run.tol), Vector::Zero(p));
        finals.push_back(objective_value(f, ridge, res.minimizer));
        if (run.kind == SolverKind::sdca && res.dual) {
            gap = duality_gap(f, ridge, res.minimizer, *res.dual);
        }
    }
    const double best = *std::min_element(finals.begin(), finals.end());
    for (std::size_t k = 0; k < runs.size(); ++k) {
        out.check(finals[k] - best <= 1e-6, std::string(to_string(runs[k].kind)) + " +" + num(finals[k] - best));
    }
    out.check(gap && *gap <= 1e-8, "sdca gap " + (gap ? num(*gap) : std::string("missing")));

    PenaltySpec lasso;
    lasso.kind = PenaltyKind::l1;
    lasso.strength = 0.01;
    const auto agd = minimize(f, lasso, solver(SolverKind::agd, 5000, 1e-15), Vector::Zero(p));
    const auto saga = minimize(f, lasso, solver(SolverKind::saga, 300, 1e-15), Vector::Zero(p));
    const double diff = std::abs(objective_value(f, lasso, agd.minimizer) - objective_value(f, lasso, saga.minimizer));
    out.check(diff <= 1e-6, "l1 agd vs saga " + num(diff));
    return out;
}

Outcome simulation_law() {
    Outcome out;
    const auto params = with_shared_decay(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.5), 2.0);
    const double horizon = 2000.0;
    const auto sims = simulate_replicates(to_sum_exp(params), horizon, 4004, 100, 1);
    std::vector<double> rates;
    std::vector<double> residuals;
    for (const auto& s : sims) {
        rates.push_back(static_cast<double>(s.realization.total_events()) / horizon);
        const auto res = time_change_residuals(params, s.realization);
        residuals.insert(residuals.end(), res[0].begin(), res[0].end());
    }
    double mean = 0.0;
    for (double v : rates) {
        mean += v;
    }
    mean /= static_cast<double>(rates.size());
    double var = 0.0;
    for (double v : rates) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(rates.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(rates.size()));
    out.check(std::abs(mean - 2.0) <= 3.0 * se, "mean rate " + num(mean, 6) + " (3 se " + num(3.0 * se) + ")");
    const double ks = ks_statistic_exp1(residuals);
    const double crit = ks_critical_1pct(residuals.size());
    out.check(ks < crit, "ks " + num(ks) + " < " + num(crit) + " over " + std::to_string(residuals.size()));
    return out;
}

Outcome recovery() {
    Outcome out;
    const Vector mu = (Vector(2) << 0.5, 0.8).finished();
    const Matrix adj = (Matrix(2, 2) << 0.4, 0.2, 0.15, 0.3).finished();
    const auto truth = with_shared_decay(mu, adj, 2.0);
    const double horizon = 120'000.0 / mean_intensity(truth).sum();
    RngStream rng(5005);
    const auto r = simulate_hawkes_exp(truth, horizon, rng).realization;
    out.check(r.total_events() >= 100'000, std::to_string(r.total_events()) + " events");
    const auto fit = fit_hawkes_exp({r}, {truth.decays}, PenaltySpec{}, solver(SolverKind::agd, 3000, 1e-13));
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(fit.params.baseline[i] / mu[i] - 1.0));
        for (Eigen::Index j = 0; j < 2; ++j) {
            worst = std::max(worst, std::abs(fit.params.adjacency[0](i, j) / adj(i, j) - 1.0));
        }
    }
    out.check(worst <= 0.1, "max relative error " + num(worst));
    return out;
}

EventRealization prefix(const EventRealization& r, double horizon) {
    std::vector<std::vector<double>> ts;
    for (std::size_t i = 0; i < r.dim(); ++i) {
        const auto node = r.node(i);
        ts.emplace_back(node.begin(), std::lower_bound(node.begin(), node.end(), horizon));
    }
    return EventRealization(horizon, std::move(ts));
}

Outcome em_consistency() {
    Outcome out;
    const double alpha = 0.5;
    const double beta = 2.0;
    const auto params = with_shared_decay(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, alpha), beta);
    RngStream rng(6006);
    const auto full = simulate_hawkes_exp(params, 8000.0, rng).realization;
    const EmConfig cfg{.support = 2.5, .grid_size = 20, .max_iter = 2000, .tol = 1e-10};
    std::vector<double> ise;
    std::string what = "ise";
    for (double horizon : {500.0, 2000.0, 8000.0}) {
        const auto res = fit_em({prefix(full, horizon)}, cfg);
        ise.push_back(em_integrated_squared_error(res.estimate, 0, 0, alpha, beta));
        what += " " + num(ise.back());
    }
    out.check(ise[1] < ise[0] && ise[2] < ise[1], what);

    RngStream poisson_rng(6007);
    const auto poisson = simulate_poisson(Vector::Constant(1, 2.0), 8000.0, poisson_rng);
    const auto res = fit_em({poisson}, cfg);
    const double norm = kernel_norms(res.estimate)(0, 0);
    out.check(norm <= 0.05, "poisson kernel norm " + num(norm));
    return out;
}

Outcome adm4_recovery() {
    Outcome out;
    const Eigen::Index d = 10;
    // Rank-1 block on nodes 0..3 plus a sparse set of single links.
    Matrix adj = Matrix::Zero(d, d);
    adj.topLeftCorner(4, 4).setConstant(0.12);
    for (Eigen::Index i = 4; i < d; ++i) {
        adj(i, i) = 0.25;
    }
    adj(5, 7) = 0.2;
    adj(8, 4) = 0.2;
    adj(2, 9) = 0.15;
    adj(6, 1) = 0.15;
    const double decay = 1.0;
    const auto truth = with_shared_decay(Vector::Constant(d, 0.2), adj, decay);
    RngStream rng(7007);
    const auto r = simulate_hawkes_exp(truth, 20000.0, rng).realization;

    const auto sparse = fit_adm4({r}, Adm4Config{.decay = decay, .lam_l1 = 5e-3, .lam_nuclear = 5e-3,
                                                 .max_outer = 1000, .tol = 1e-7});
    const double threshold = 0.02;
    int tp = 0, fp = 0, fn = 0;
    for (Eigen::Index k = 0; k < adj.size(); ++k) {
        const bool est = sparse.params.adjacency(k) > threshold;
        const bool real = adj(k) > 0.0;
        tp += est && real;
        fp += est && !real;
        fn += !est && real;
    }
    const double f1 = 2.0 * tp / std::max(1.0, 2.0 * tp + fp + fn);
    out.check(f1 >= 0.8, "F1 " + num(f1) + " (tp " + std::to_string(tp) + " fp " + std::to_string(fp) + " fn " +
                             std::to_string(fn) + ", " + std::to_string(r.total_events()) + " events)");

    const auto plain = fit_adm4({r}, Adm4Config{.decay = decay, .max_outer = 5000, .tol = 1e-10});
    const auto mle = fit_hawkes_exp({r}, {truth.decays}, PenaltySpec{}, solver(SolverKind::agd, 5000, 1e-14));
    const double gap = std::max((plain.params.adjacency - mle.params.adjacency[0]).cwiseAbs().maxCoeff(),
                                (plain.params.baseline - mle.params.baseline).cwiseAbs().maxCoeff());
    out.check(gap <= 1e-3, "unpenalized vs mle max abs " + num(gap) + " after " + std::to_string(plain.iterations) +
                               " iterations");
    return out;
}

Outcome scaling() {
    Outcome out;
    for (BenchTask task : {BenchTask::fit, BenchTask::simulate}) {
        std::vector<double> log_events;
        std::vector<double> log_seconds;
        std::string what = std::string(to_string(task)) + " exponent";
        std::string points;
        for (BenchTier tier : {BenchTier::small, BenchTier::medium, BenchTier::large}) {
            BenchSpec spec;
            spec.task = task;
            spec.dim = 16;
            spec.tier = tier;
            spec.repetitions = 3;
            spec.seed = 8008;
            const auto res = run_bench(spec);
            log_events.push_back(std::log(res.median_events));
            log_seconds.push_back(std::log(res.median_seconds));
            points += " " + num(res.median_seconds) + "s";
        }
        const auto slope = fitted_slope(log_events, log_seconds);
        out.check(slope && *slope >= 0.8 && *slope <= 1.3,
                  what + " " + (slope ? num(*slope) : std::string("n/a")) + " (" + points.substr(1) + ")");
    }

    BenchSpec spec;
    spec.task = BenchTask::simulate;
    spec.dim = 16;
    spec.tier = BenchTier::small;
    spec.repetitions = 8;
    spec.seed = 8009;
    spec.threads = 1;
    const double serial = run_bench(spec).total_wall_seconds;
    spec.threads = 4;
    const double parallel = run_bench(spec).total_wall_seconds;
    const double speedup = serial / parallel;
    out.check(speedup >= 2.0, "4-thread speedup " + num(speedup) + " (" +
                                  std::to_string(std::thread::hardware_concurrency()) + " hardware threads)");
    return out;
}

Outcome brute_force() {
    Outcome out;
    double worst = 0.0;
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        const std::size_t dim = 1 + inst % 3;
        const std::size_t layers = 1 + (inst / 3) % 2;
        const auto params = oracle::random_hawkes_params(dim, layers, 9000 + inst);
        RngStream rng(9100 + inst);
        const auto r = simulate_hawkes_exp(params, 40.0, rng).realization;
        const HawkesExpObjective obj({r}, params.decays);
        // Objective is averaged by the total event count unless there are none.
        const double n = std::max<double>(1.0, static_cast<double>(r.total_events()));
        const double fast = obj.loglik_value(obj.pack(params)) * n;
        const double naive = oracle::naive_neg_loglik(params, r);
        worst = std::max(worst, std::abs(fast - naive) / std::max(std::abs(naive), 1e-300));
    }
    out.check(worst <= 1e-9, "max relative difference " + num(worst));
    return out;
}

struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"prox oracle suite", 10.0, prox_oracles},
        {"gradient suite", 30.0, gradients},
        {"solver agreement", 120.0, solver_agreement},
        {"simulation law", 120.0, simulation_law},
        {"parameter recovery", 300.0, recovery},
        {"EM consistency", 300.0, em_consistency},
        {"ADM4 recovery", 300.0, adm4_recovery},
        {"scaling", 900.0, scaling},
        {"brute-force equivalence", 60.0, brute_force},
    };
    std::vector<int> selected;
    if (argc > 1) {
        const int k = std::atoi(argv[1]);
        if (k < 1 || k > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "usage: acceptance [1-%zu]\n", criteria.size());
            return 1;
        }
        selected.push_back(k);
    } else {
        for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) {
            selected.push_back(k);
        }
    }

    bool all = true;
    for (int k : selected) {
        const auto& c = criteria[static_cast<std::size_t>(k - 1)];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        o.check(secs < c.limit_seconds, "runtime " + num(secs) + "s < " + num(c.limit_seconds) + "s");
        std::printf("criterion %d %s: %s | %s\n", k, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
