#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairshare/errors.hpp"
#include "fairshare/share_model.hpp"

namespace fairshare {

struct WorkloadEntry {
    std::string user;
    int procs = 1;        // N
    double think = 0.0;   // Z, seconds
    double demand = 1.0;  // D, CPU seconds per cycle
};

struct WorkloadSpec {
    std::vector<WorkloadEntry> entries;

    const WorkloadEntry* find(std::string_view user) const;
    // Checks N >= 1, Z >= 0, D > 0, unique users and, when given, that
    // every user exists in the hierarchy.
    void validate(const ShareHierarchy* h = nullptr) const;
};

struct PerfEntry {
    std::string user;
    int procs = 1;
    double think = 0.0;
    double demand = 1.0;
    double throughput = 0.0;   // X, cycles per second
    double response = 0.0;     // R, seconds (excludes think)
    double utilization = 0.0;  // U, fraction of the physical CPU
    double speed = 1.0;        // virtual processor speed seen by the user
    bool valid = true;         // false when an estimate had no data behind it
};

struct PerfTable {
    std::string solver;
    std::optional<EntitlementTable> entitlements;
    std::vector<PerfEntry> rows;

    const PerfEntry* find(std::string_view user) const;
};

// Violations of Little's law X(R+Z)=N, U=XD and sum(U)<=1 at relative
// tolerance `rel_tol`. Invalid rows are skipped. Empty means consistent.
std::vector<std::string> consistency_violations(const PerfTable& t, double rel_tol);

struct RepairmanResult {
    double throughput;
    double response;
};

// Exact single-class MVA for N customers, one PS center, one delay center.
RepairmanResult solve_repairman(int customers, double demand, double think);

// Upper bound on the number of population vectors solve_ts will visit.
inline constexpr double kMaxPopulationVectors = 1e7;

// Exact multiclass MVA: one processor-sharing CPU plus per-class think.
PerfTable solve_ts(const WorkloadSpec& w);

// Each user owns a dedicated processor of speed E_u.
PerfTable solve_srm_partition(const WorkloadSpec& w, const EntitlementTable& e);

class ConvergenceError : public SolverError {
public:
    ConvergenceError(const std::string& msg, PerfTable last)
        : SolverError(msg), last_(std::move(last)) {}
    const PerfTable& last_iterate() const noexcept { return last_; }

private:
    PerfTable last_;
};

struct ConservingOptions {
    double tolerance = 1e-6;
    int max_iterations = 1000;
};

// Partition model with unused capacity handed back to the users that can
// consume it (work-conserving fair share).
PerfTable solve_srm_conserving(const WorkloadSpec& w, const EntitlementTable& e,
                               ConservingOptions opts = {});

struct RatioEntry {
    std::string user;
    std::optional<double> numerator;    // a.R
    std::optional<double> denominator;  // b.R
    std::optional<double> ratio;        // nullopt renders as N/A
};

struct RatioTable {
    std::vector<RatioEntry> rows;  // users of `a` first, then users only in `b`
    const RatioEntry* find(std::string_view user) const;
};

// Per-user response-time ratio a.R / b.R.
RatioTable compare_tables(const PerfTable& a, const PerfTable& b);

}  // namespace fairshare
