#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairshare/analytic_solvers.hpp"
#include "fairshare/fairshare_sim.hpp"
#include "fairshare/share_model.hpp"

namespace fairshare {

enum class SrmSolver { Partition, Conserving, Simulate };

std::string_view to_string(SrmSolver s);
std::optional<SrmSolver> parse_srm_solver(std::string_view text);

struct Scenario {
    std::string label;
    ShareHierarchy hierarchy;
    WorkloadSpec workload;  // one entry per declared user, active or not
    Timeline timeline;
    SrmSolver solver = SrmSolver::Partition;

    // Not part of the file grammar; set by callers.
    EntitlementMode mode = EntitlementMode::FlatPool;
    SimConfig sim{.duration = 600.0, .warmup = 60.0};

    // Workload restricted to users that are active in `hierarchy`.
    WorkloadSpec active_workload() const;
};

// Throws ParseError with the 1-based line and column of the offending token.
Scenario parse_scenario(std::string_view text, std::string label = "scenario");

// Inverse of parse_scenario (comments are not preserved).
std::string format_scenario(const Scenario& s);

struct CapacityReport {
    std::string label;
    ShareHierarchy hierarchy;
    EntitlementTable entitlements;
    WorkloadSpec workload;  // active users only
    PerfTable srm;
    PerfTable ts;
    SrmSolver solver = SrmSolver::Partition;
};

CapacityReport run_scenario(const Scenario& s);

std::string render_report(const CapacityReport& r);

// Header line plus body of one report section, e.g. "Group Entitlements".
// Empty when the section is absent.
std::string extract_section(std::string_view report_text, std::string_view header);

// Rsm, Rts and Rsm/Rts per report, plus Rs_k/Rs_{k-1} from the second on.
std::string cross_compare(const std::vector<CapacityReport>& reports);

// Fixed two-decimal rendering used by every table.
std::string fixed2(double v);

}  // namespace fairshare
