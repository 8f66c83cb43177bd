#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fairshare/analytic_solvers.hpp"
#include "fairshare/errors.hpp"
#include "fairshare/fairshare_sim.hpp"
#include "fairshare/planning_monitor.hpp"
#include "fairshare/scenario_report.hpp"
#include "fairshare/share_model.hpp"

namespace fs = fairshare;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kAlert = 2;

// Carries the file name into diagnostics.
struct FileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string stem(const std::string& path) {
    auto slash = path.find_last_of('/');
    auto base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

fs::Scenario load_scenario(const std::string& path) {
    try {
        return fs::parse_scenario(read_file(path), stem(path));
    } catch (const fs::ParseError& e) {
        throw FileError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " +
                        e.what());
    }
}

struct SimOptions {
    std::string mode = "fairshare-flat";
    double quantum = 0.01;
    double half_life = 5.0;
    double duration = 300.0;
    double warmup = 0.0;
    double window = 1.0;
    std::uint64_t seed = 1;
    bool jitter = false;

    void add_to(CLI::App* app, bool with_mode) {
        if (with_mode)
            app->add_option("--mode", mode, "scheduler: fairshare-flat, fairshare-hierarchical, ts-roundrobin, ts-ps-reference")
                ->capture_default_str();
        app->add_option("--quantum", quantum, "dispatch quantum, seconds")->capture_default_str();
        app->add_option("--half-life", half_life, "usage decay half-life, seconds")->capture_default_str();
        app->add_option("--duration", duration, "simulated seconds")->capture_default_str();
        app->add_option("--warmup", warmup, "seconds excluded from estimates")->capture_default_str();
        app->add_option("--window", window, "utilization sampling window, seconds")->capture_default_str();
        app->add_option("--seed", seed, "random seed")->capture_default_str();
        app->add_flag("--jitter", jitter, "exponential think times (default: fixed)");
    }

    fs::SimConfig config() const {
        fs::SimConfig c;
        auto m = fs::parse_sim_mode(mode);
        if (!m) throw fs::ValidationError("unknown --mode '" + mode + "'");
        c.mode = *m;
        c.quantum = quantum;
        c.usage_half_life = half_life;
        c.duration = duration;
        c.warmup = warmup;
        c.window = window;
        c.seed = seed;
        c.jitter_think = jitter;
        return c;
    }
};

fs::EntitlementMode entitlement_mode(const std::string& text) {
    auto m = fs::parse_entitlement_mode(text);
    if (!m) throw fs::ValidationError("unknown --mode '" + text + "' (flat or hierarchical)");
    return *m;
}

void print_entitlements(const fs::ShareHierarchy& h, const fs::EntitlementTable& t, const std::string& title) {
    std::cout << title << " (" << fs::to_string(t.mode) << ", " << t.active_user_shares
              << " active user shares of " << h.total_allocated_shares() << ")\n\n";
    std::cout << "Group User Shares Active Entitlement\n";
    for (const auto& g : h.groups()) {
        std::cout << g.name << " - " << g.shares << ' ' << (g.any_active() ? "yes" : "no") << ' '
                  << fs::fixed2(100.0 * t.group_fraction(g.name)) << '\n';
        for (const auto& u : g.users)
            std::cout << g.name << ' ' << u.name << ' ' << u.shares << ' ' << (u.active ? "yes" : "no") << ' '
                      << fs::fixed2(100.0 * t.of(u.name)) << '\n';
    }
}

std::vector<fs::CapacityReport> run_all(const std::vector<std::string>& paths, const std::string& solver,
                                        const std::string& mode, const SimOptions& sim) {
    std::vector<fs::Scenario> scenarios;
    for (const auto& p : paths) {
        auto s = load_scenario(p);
        if (!solver.empty()) {
            auto sv = fs::parse_srm_solver(solver);
            if (!sv) throw fs::ValidationError("unknown --solver '" + solver + "'");
            s.solver = *sv;
        }
        s.mode = entitlement_mode(mode);
        s.sim = sim.config();
        scenarios.push_back(std::move(s));
    }
    std::vector<std::future<fs::CapacityReport>> jobs;
    for (const auto& s : scenarios) jobs.push_back(std::async(std::launch::async, [&s] { return fs::run_scenario(s); }));
    std::vector<fs::CapacityReport> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair-share CPU capacity planning toolkit"};
    app.require_subcommand(1);

    // entitle
    auto* entitle = app.add_subcommand("entitle", "print the entitlement table of a scenario");
    std::string entitle_path;
    std::string entitle_mode = "flat";
    bool entitle_lub = false;
    entitle->add_option("scenario", entitle_path, "scenario file")->required();
    entitle->add_option("--mode", entitle_mode, "entitlement mode: flat or hierarchical")->capture_default_str();
    entitle->add_flag("--lub", entitle_lub, "also print least upper bounds (every user active)");

    // report
    auto* report = app.add_subcommand("report", "run scenarios and print capacity reports");
    std::vector<std::string> report_paths;
    std::string report_solver;
    std::string report_mode = "flat";
    SimOptions report_sim;
    report_sim.duration = 600.0;
    report_sim.warmup = 60.0;
    report->add_option("scenarios", report_paths, "scenario files")->required();
    report->add_option("--solver", report_solver, "SRM model: partition, conserving or simulate (default: from file, else partition)");
    report->add_option("--mode", report_mode, "entitlement mode: flat or hierarchical")->capture_default_str();
    report_sim.add_to(report, false);

    // compare
    auto* compare = app.add_subcommand("compare", "response-time ratio tables across scenarios");
    std::vector<std::string> compare_paths;
    std::string compare_solver;
    std::string compare_mode = "flat";
    SimOptions compare_sim;
    compare_sim.duration = 600.0;
    compare_sim.warmup = 60.0;
    compare->add_option("scenarios", compare_paths, "two or more scenario files")->required()->expected(2, -1);
    compare->add_option("--solver", compare_solver, "SRM model: partition, conserving or simulate (default: from file, else partition)");
    compare->add_option("--mode", compare_mode, "entitlement mode: flat or hierarchical")->capture_default_str();
    compare_sim.add_to(compare, false);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the scheduler simulator on a scenario");
    std::string sim_path;
    SimOptions sim_opts;
    double sim_epsilon = 0.05;
    std::string sim_trace;
    std::string sim_pslog;
    double sim_ps_interval = 10.0;
    simulate->add_option("scenario", sim_path, "scenario file")->required();
    sim_opts.add_to(simulate, true);
    simulate->add_option("--epsilon", sim_epsilon, "convergence tolerance on window fractions")->capture_default_str();
    simulate->add_option("--trace", sim_trace, "write per-window fractions (time,user,fraction) to this path");
    simulate->add_option("--ps-log", sim_pslog, "write a synthetic ps aux log of the run to this path");
    simulate->add_option("--ps-interval", sim_ps_interval, "snapshot interval of --ps-log, seconds")->capture_default_str();

    // advise
    auto* advise = app.add_subcommand("advise", "top-down share plan from SLO targets");
    std::string advise_path;
    long advise_total = 100;
    advise->add_option("slo_file", advise_path, "SLO file")->required();
    advise->add_option("--total-shares", advise_total, "shares to distribute (a total_shares line in the file wins)")
        ->capture_default_str();

    // monitor
    auto* monitor = app.add_subcommand("monitor", "compare a ps aux log against entitlements");
    std::string monitor_log;
    std::string monitor_scenario;
    std::string monitor_mode = "flat";
    double monitor_window = 60.0;
    double monitor_threshold = 0.05;
    monitor->add_option("ps_log", monitor_log, "timestamped ps aux log")->required();
    monitor->add_option("scenario", monitor_scenario, "scenario file with the share allocation")->required();
    monitor->add_option("--mode", monitor_mode, "entitlement mode: flat or hierarchical")->capture_default_str();
    monitor->add_option("--window", monitor_window, "analysis window, seconds")->capture_default_str();
    monitor->add_option("--threshold", monitor_threshold, "flag |deviation| above this fraction")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (entitle->parsed()) {
            auto s = load_scenario(entitle_path);
            print_entitlements(s.hierarchy, fs::compute_entitlements(s.hierarchy, entitlement_mode(entitle_mode)),
                               "Entitlements");
            if (entitle_lub) {
                std::cout << '\n';
                print_entitlements(s.hierarchy, fs::least_upper_bounds(s.hierarchy), "Least upper bounds");
            }
        } else if (report->parsed()) {
            const auto reports = run_all(report_paths, report_solver, report_mode, report_sim);
            for (std::size_t i = 0; i < reports.size(); ++i) {
                if (i > 0) std::cout << '\n';
                std::cout << fs::render_report(reports[i]);
            }
        } else if (compare->parsed()) {
            std::cout << fs::cross_compare(run_all(compare_paths, compare_solver, compare_mode, compare_sim));
        } else if (simulate->parsed()) {
            auto s = load_scenario(sim_path);
            const auto cfg = sim_opts.config();
            const auto trace = fs::run_sim(s.hierarchy, s.workload, s.timeline, cfg);
            const auto final_h = fs::final_hierarchy(s.hierarchy, s.timeline);
            const auto ent = fs::compute_entitlements(final_h, cfg.mode == fs::SimMode::FairshareHierarchical
                                                                   ? fs::EntitlementMode::Hierarchical
                                                                   : fs::EntitlementMode::FlatPool);
            const auto conv = fs::convergence_time(trace, ent, sim_epsilon);
            const auto achieved = trace.mean_fractions(std::max(conv.value_or(trace.last_event_time), cfg.warmup));

            std::printf("Simulation (%s): %s, quantum %g s, half-life %g s, duration %g s, warmup %g s, seed %llu\n\n",
                        s.label.c_str(), std::string(fs::to_string(cfg.mode)).c_str(), cfg.quantum,
                        cfg.usage_half_life, cfg.duration, cfg.warmup, static_cast<unsigned long long>(cfg.seed));
            std::cout << "User Entitled Achieved Thru RTime %Ucpu\n";
            for (const auto& row : trace.perf.rows) {
                const auto idx = trace.index_of(row.user);
                std::cout << row.user << ' ' << fs::fixed2(100.0 * ent.of(row.user)) << ' '
                          << fs::fixed2(100.0 * achieved[*idx]) << ' ' << fs::fixed2(row.throughput) << ' '
                          << (row.valid ? fs::fixed2(row.response) : "N/A") << ' '
                          << fs::fixed2(100.0 * row.utilization) << '\n';
            }
            if (conv)
                std::printf("\nConverged within %g: %.2f s after the last event at %.2f s\n", sim_epsilon,
                            *conv - trace.last_event_time, trace.last_event_time);
            else
                std::printf("\nNot converged within %g\n", sim_epsilon);
            for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';

            if (!sim_trace.empty()) {
                std::ofstream out(sim_trace);
                if (!out) throw FileError(sim_trace + ": cannot write");
                fs::write_trace(trace, out);
            }
            if (!sim_pslog.empty()) {
                std::ofstream out(sim_pslog);
                if (!out) throw FileError(sim_pslog + ": cannot write");
                out << fs::ps_log_from_trace(trace, sim_ps_interval);
            }
        } else if (advise->parsed()) {
            fs::SLOFile f;
            try {
                f = fs::parse_slo_file(read_file(advise_path));
            } catch (const fs::ParseError& e) {
                throw FileError(advise_path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) +
                                ": " + e.what());
            }
            std::cout << fs::render_plan(fs::allocate_topdown(f.targets, f.total_shares.value_or(advise_total)));
        } else if (monitor->parsed()) {
            auto s = load_scenario(monitor_scenario);
            std::ifstream in(monitor_log);
            if (!in) throw FileError(monitor_log + ": cannot open");
            fs::PsLog log;
            try {
                log = fs::parse_ps_log(in);
            } catch (const fs::Error& e) {
                throw FileError(monitor_log + ": " + e.what());
            }
            const auto ent = fs::compute_entitlements(s.hierarchy, entitlement_mode(monitor_mode));
            const auto rep = fs::goal_deviation(log.samples, ent, monitor_window, monitor_threshold);
            std::cout << fs::render_deviation(rep);
            if (log.skipped > 0) std::cerr << monitor_log << ": skipped " << log.skipped << " malformed lines\n";
            if (rep.any_flagged()) return kAlert;
        }
    } catch (const fs::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kAlert;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kOk;
}
