#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairshare/fairshare_sim.hpp"
#include "fairshare/share_model.hpp"

namespace fairshare {

struct SLOTarget {
    std::string name;
    double u_max = 0.0;                // measured peak utilization under TS
    std::optional<double> r_slo;       // response-time target, seconds
    double demand = 1.0;               // CPU seconds per job

    void validate() const;
    // max(U_max, D / R_slo)
    double required_entitlement() const;
};

struct SharePlan {
    struct Item {
        std::string name;
        double required = 0.0;
        long shares = 0;
    };
    std::vector<Item> items;
    long total_shares = 0;
    long residual = 0;
    bool feasible = true;
    std::vector<std::string> commands;  // one `limadm set cpu.shares=<n> <name>` per item
};

// Throws InfeasibleError when the requirements cannot fit on one server.
SharePlan allocate_topdown(const std::vector<SLOTarget>& targets, long total_shares);

std::string render_plan(const SharePlan& plan);

struct SLOFile {
    std::vector<SLOTarget> targets;
    std::optional<long> total_shares;
};

// `total_shares <int>` and `workload <name> umax=<f> [rslo=<f>] [demand=<f>]` lines.
SLOFile parse_slo_file(std::string_view text);

struct UsageSample {
    double timestamp = 0.0;
    std::string user;
    long pid = 0;
    double pcpu = 0.0;
    double cputime = 0.0;  // seconds
};

struct PsLog {
    std::vector<UsageSample> samples;
    long skipped = 0;
};

// `mm:ss`, `hh:mm:ss` or `d-hh:mm:ss`, seconds may carry a fraction.
std::optional<double> parse_cputime(std::string_view text);

// Timestamped `/usr/ucb/ps aux` records: a `T <epoch-seconds>` line starts
// each snapshot. Malformed lines are skipped and counted.
PsLog parse_ps_log(std::istream& in);

inline constexpr std::string_view kUnallocated = "unallocated";

struct DeviationRow {
    double window_start = 0.0;
    double window_end = 0.0;
    std::string user;
    double busy = 0.0;
    double achieved = 0.0;
    double entitled = 0.0;
    double deviation = 0.0;
    bool flagged = false;
};

struct DeviationReport {
    std::vector<DeviationRow> rows;
    double threshold = 0.0;
    bool any_flagged() const;
};

DeviationReport goal_deviation(const std::vector<UsageSample>& samples, const EntitlementTable& e, double window,
                               double threshold = 0.05);

std::string render_deviation(const DeviationReport& r);

// ps-aux style log of a simulation: one pid per user, a snapshot every
// `interval` seconds of simulated time starting at `epoch`.
std::string ps_log_from_trace(const SimTrace& tr, double interval, double epoch = 0.0);

}  // namespace fairshare
