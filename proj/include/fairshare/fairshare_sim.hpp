#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairshare/analytic_solvers.hpp"
#include "fairshare/share_model.hpp"

namespace fairshare {

enum class SimMode {
    FairshareFlat,          // min decayed-usage-per-share user wins the quantum
    FairshareHierarchical,  // group first, then user within the group
    TsRoundRobin,           // equal quanta per runnable process
    TsPsReference,          // fluid processor sharing, the MVA reference
};

std::string_view to_string(SimMode mode);
std::optional<SimMode> parse_sim_mode(std::string_view text);

struct SimConfig {
    double quantum = 0.01;
    double usage_half_life = 5.0;
    double duration = 300.0;
    double warmup = 0.0;
    double window = 1.0;
    std::uint64_t seed = 1;
    SimMode mode = SimMode::FairshareFlat;
    // Draw think times from an exponential with mean Z instead of using Z.
    bool jitter_think = false;

    void validate() const;
};

struct TimelineEvent {
    double time = 0.0;
    bool activate = true;
    std::string user;
};

struct Timeline {
    std::vector<TimelineEvent> events;

    void validate(const ShareHierarchy& h) const;
    double last_event_time() const { return events.empty() ? 0.0 : events.back().time; }
};

// Hierarchy with every timeline event applied in order.
ShareHierarchy final_hierarchy(const ShareHierarchy& h, const Timeline& t);

struct SimWindow {
    double start = 0.0;
    std::vector<double> fractions;  // per trace user, share of the window spent running
    double runnable_time = 0.0;     // time with at least one runnable process
};

struct SimTrace {
    SimConfig config;
    WorkloadSpec workload;
    std::vector<std::string> users;  // hierarchy order
    std::vector<SimWindow> windows;  // full windows only
    double last_event_time = 0.0;

    // Post-warmup statistics, indexed like `users`.
    std::vector<std::vector<double>> responses;
    std::vector<double> busy;         // B_u
    std::vector<double> work_cycles;  // completions corrected for in-flight progress
    std::vector<long> completions;
    double elapsed = 0.0;             // T = duration - warmup
    std::vector<std::string> warnings;

    PerfTable perf;  // filled by run_sim via trace_perf

    std::optional<std::size_t> index_of(std::string_view user) const;
    // B_u / window-time summed over full windows starting at or after `from`.
    std::vector<double> mean_fractions(double from) const;
};

SimTrace run_sim(const ShareHierarchy& h, const WorkloadSpec& w, const Timeline& t, const SimConfig& c);

// Earliest time after the last timeline event from which every window stays
// within `epsilon` of the entitlements; nullopt if the last window misses.
std::optional<double> convergence_time(const SimTrace& tr, const EntitlementTable& e, double epsilon);

// X, R, U estimated from post-warmup data. Users without completions are
// returned with valid = false.
PerfTable trace_perf(const SimTrace& tr);

// `time<delim>user<delim>fraction` lines with a header row.
void write_trace(const SimTrace& tr, std::ostream& os, char delim = ',');

}  // namespace fairshare
