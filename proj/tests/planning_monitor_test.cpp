#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fairshare/errors.hpp"
#include "fairshare/planning_monitor.hpp"
#include "fairshare/scenario_report.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace fairshare;

namespace {

ShareHierarchy pair_hierarchy(long a, long b) {
    return ShareHierarchy(a + b, {{"G", a + b, {{"a", a, true}, {"b", b, true}}}});
}

std::vector<UsageSample> two_snapshots(double t0, double t1, std::vector<std::pair<std::string, double>> busy) {
    std::vector<UsageSample> out;
    long pid = 100;
    for (auto& [user, b] : busy) {
        out.push_back({t0, user, pid, 0.0, 0.0});
        out.push_back({t1, user, pid, 0.0, b});
        ++pid;
    }
    return out;
}

const DeviationRow* row_of(const DeviationReport& r, const std::string& user) {
    for (auto& row : r.rows)
        if (row.user == user) return &row;
    return nullptr;
}

}  // namespace

TEST(AllocateTopdown, TwoTargetsLeaveResidual) {
    auto plan = allocate_topdown({{"A", 0.5}, {"B", 0.3}}, 100);
    ASSERT_EQ(plan.items.size(), 2u);
    EXPECT_EQ(plan.items[0].shares, 50);
    EXPECT_EQ(plan.items[1].shares, 30);
    EXPECT_EQ(plan.residual, 20);
    EXPECT_TRUE(plan.feasible);
    EXPECT_EQ(plan.commands[0], "limadm set cpu.shares=50 A");
    EXPECT_EQ(plan.commands[1], "limadm set cpu.shares=30 B");
}

TEST(AllocateTopdown, SingleTarget) {
    auto plan = allocate_topdown({{"A", 0.9}}, 10);
    EXPECT_EQ(plan.items[0].shares, 9);
    EXPECT_EQ(plan.residual, 1);
}

TEST(AllocateTopdown, InfeasibleRecommendsSplit) {
    try {
        allocate_topdown({{"A", 0.6}, {"B", 0.6}}, 100);
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("use domains, or split groups across separate servers"), std::string::npos);
    }
}

TEST(AllocateTopdown, ResponseTargetRaisesRequirement) {
    SLOTarget t{"FIN", 0.5, 2.5, 2.0};
    EXPECT_DOUBLE_EQ(t.required_entitlement(), 0.8);
    SLOTarget loose{"FIN", 0.5, 10.0, 1.0};
    EXPECT_DOUBLE_EQ(loose.required_entitlement(), 0.5);
}

TEST(AllocateTopdown, Errors) {
    EXPECT_THROW(allocate_topdown({}, 100), ValidationError);
    EXPECT_THROW(allocate_topdown({{"A", 0.1}, {"B", 0.1}}, 1), ValidationError);
    EXPECT_THROW(allocate_topdown({{"A", 0.0}}, 10), ValidationError);
    EXPECT_THROW(allocate_topdown({{"A", 1.5}}, 10), ValidationError);
    EXPECT_THROW(allocate_topdown({{"A", 0.5, 0.5, 1.0}}, 10), ValidationError);
    EXPECT_THROW(allocate_topdown({{"A", 0.1}, {"A", 0.2}}, 10), ValidationError);
}

TEST(AllocateTopdown, RandomPlansDominateAndConserve) {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 6);
        const long total = n + static_cast<long>(rng() % 1000);
        std::vector<SLOTarget> ts;
        std::vector<double> req;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            std::uniform_real_distribution<double> u(0.001, 1.0 / n);
            SLOTarget t{"w" + std::to_string(i), u(rng)};
            if (rng() % 2) {
                t.demand = 0.1 + u(rng);
                t.r_slo = t.demand / std::uniform_real_distribution<double>(0.001, 1.0 / n)(rng);
            }
            ts.push_back(t);
            req.push_back(t.required_entitlement());
            sum += req.back();
        }
        if (sum > 1.0) {
            EXPECT_THROW(allocate_topdown(ts, total), InfeasibleError);
            continue;
        }
        auto plan = allocate_topdown(ts, total);
        long assigned = 0;
        std::vector<long> shares;
        for (auto& it : plan.items) {
            assigned += it.shares;
            shares.push_back(it.shares);
            EXPECT_GE(it.shares, 1);
        }
        EXPECT_EQ(assigned + plan.residual, total);
        EXPECT_GE(plan.residual, 0);
        std::vector<double> quotas;
        for (double r : req) quotas.push_back(r * total);
        EXPECT_LE(oracle::max_shortfall(quotas, shares), 1.0 + 1e-9);
        EXPECT_EQ(plan.commands.size(), ts.size());
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(RenderPlan, ListsCommands) {
    auto text = render_plan(allocate_topdown({{"A", 0.5}, {"B", 0.3}}, 100));
    EXPECT_NE(text.find("limadm set cpu.shares=50 A\n"), std::string::npos);
    EXPECT_NE(text.find("limadm set cpu.shares=30 B\n"), std::string::npos);
    EXPECT_NE(text.find("20"), std::string::npos);
}

TEST(ParseSloFile, ShippedExample) {
    auto f = parse_slo_file(testing_paths::slurp(testing_paths::source("scenarios/slo_example.slo")));
    ASSERT_EQ(f.targets.size(), 3u);
    EXPECT_EQ(f.total_shares, 100);
    EXPECT_EQ(f.targets[0].name, "FIN");
    EXPECT_DOUBLE_EQ(*f.targets[0].r_slo, 2.5);
    EXPECT_FALSE(f.targets[1].r_slo);
    EXPECT_THROW(parse_slo_file("workload A umax=zero\n"), ParseError);
    EXPECT_THROW(parse_slo_file("nonsense\n"), ParseError);
    EXPECT_THROW(parse_slo_file("workload A\n"), ParseError);
}

TEST(ParseCputime, Formats) {
    EXPECT_DOUBLE_EQ(*parse_cputime("2:05"), 125.0);
    EXPECT_DOUBLE_EQ(*parse_cputime("1:02:03"), 3723.0);
    EXPECT_DOUBLE_EQ(*parse_cputime("1-00:00:01"), 86401.0);
    EXPECT_DOUBLE_EQ(*parse_cputime("0:01.50"), 1.5);
    EXPECT_FALSE(parse_cputime("abc"));
    EXPECT_FALSE(parse_cputime("1:60"));
    EXPECT_FALSE(parse_cputime(""));
}

TEST(ParsePsLog, AliceLine) {
    std::istringstream in("T 1000\nalice 4242 55.5 1.0 100 200 pts/1 R 10:00 2:05 crunch\n");
    auto log = parse_ps_log(in);
    ASSERT_EQ(log.samples.size(), 1u);
    const auto& s = log.samples[0];
    EXPECT_DOUBLE_EQ(s.timestamp, 1000.0);
    EXPECT_EQ(s.user, "alice");
    EXPECT_EQ(s.pid, 4242);
    EXPECT_DOUBLE_EQ(s.pcpu, 55.5);
    EXPECT_DOUBLE_EQ(s.cputime, 125.0);
    EXPECT_EQ(log.skipped, 0);
}

TEST(ParsePsLog, HeaderSkipsAndErrors) {
    std::istringstream in(
        "T 5\n"
        "USER PID %CPU %MEM SZ RSS TT S START TIME COMMAND\n"
        "bob 1 1.0 1.0 1 1 ? S 10:00 1:02:03 sh\n"
        "garbage line\n"
        "carol x 1.0 1.0 1 1 ? S 10:00 0:01 sh\n"
        "dave 2 1.0 1.0 1 1 ? S Oct 15 0:07 sh\n");
    auto log = parse_ps_log(in);
    ASSERT_EQ(log.samples.size(), 2u);
    EXPECT_DOUBLE_EQ(log.samples[0].cputime, 3723.0);
    EXPECT_DOUBLE_EQ(log.samples[1].cputime, 7.0);
    EXPECT_EQ(log.skipped, 2);

    std::istringstream empty("");
    try {
        parse_ps_log(empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("zero parseable samples"), std::string::npos);
    }
}

TEST(GoalDeviation, TwoUsersEqualEntitlement) {
    auto e = compute_entitlements(pair_hierarchy(1, 1));
    auto r = goal_deviation(two_snapshots(0, 100, {{"a", 60}, {"b", 40}}), e, 100);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_NEAR(row_of(r, "a")->achieved, 0.6, 1e-12);
    EXPECT_NEAR(row_of(r, "a")->deviation, 0.10, 1e-12);
    EXPECT_NEAR(row_of(r, "b")->deviation, -0.10, 1e-12);
    EXPECT_TRUE(r.any_flagged());
}

TEST(GoalDeviation, SingleObservedUserRenormalizes) {
    auto e = compute_entitlements(pair_hierarchy(1, 3));
    auto r = goal_deviation(two_snapshots(0, 50, {{"a", 30}}), e, 50);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(r.rows[0].achieved, 1.0);
    EXPECT_NEAR(r.rows[0].deviation, 0.0, 1e-12);
    EXPECT_FALSE(r.any_flagged());
}

TEST(GoalDeviation, UnknownUsersAreUnallocated) {
    auto e = compute_entitlements(pair_hierarchy(1, 1));
    auto r = goal_deviation(two_snapshots(0, 10, {{"a", 4}, {"b", 4}, {"root", 2}}), e, 10);
    ASSERT_NE(row_of(r, std::string(kUnallocated)), nullptr);
    EXPECT_NEAR(row_of(r, std::string(kUnallocated))->achieved, 0.2, 1e-12);
}

TEST(GoalDeviation, Errors) {
    auto e = compute_entitlements(pair_hierarchy(1, 1));
    std::vector<UsageSample> one{{0, "a", 1, 0, 0}};
    EXPECT_THROW(goal_deviation(one, e, 10), Error);
    EXPECT_THROW(goal_deviation(two_snapshots(0, 10, {{"a", 1}}), e, 20), Error);
}

TEST(GoalDeviation, ScaleInvariant) {
    std::mt19937_64 rng(11);
    auto e = compute_entitlements(pair_hierarchy(2, 5));
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_real_distribution<double> u(0.1, 100.0);
        const double a = u(rng), b = u(rng), k = u(rng);
        auto r1 = goal_deviation(two_snapshots(0, 100, {{"a", a}, {"b", b}}), e, 100);
        auto r2 = goal_deviation(two_snapshots(0, 100, {{"a", a * k}, {"b", b * k}}), e, 100);
        for (size_t i = 0; i < r1.rows.size(); ++i)
            EXPECT_NEAR(r1.rows[i].achieved, r2.rows[i].achieved, 1e-12);
    }
}

TEST(GoalDeviation, EntitlementProportionalLogIsOnGoal) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const long a = 1 + static_cast<long>(rng() % 50), b = 1 + static_cast<long>(rng() % 50);
        auto e = compute_entitlements(pair_hierarchy(a, b));
        // TIME is printed in whole seconds, so round busy times as the log would.
        const double span = 600.0;
        auto r = goal_deviation(
            two_snapshots(0, span, {{"a", std::round(span * e.of("a"))}, {"b", std::round(span * e.of("b"))}}), e,
            span);
        for (auto& row : r.rows) EXPECT_LE(std::abs(row.deviation), 1.0 / span + 1e-12);
    }
}

TEST(GoalDeviation, WindowsPartitionTheLog) {
    auto e = compute_entitlements(pair_hierarchy(1, 1));
    std::vector<UsageSample> s;
    for (int k = 0; k <= 6; ++k) {
        s.push_back({10.0 * k, "a", 1, 0, 5.0 * k});
        s.push_back({10.0 * k, "b", 2, 0, 5.0 * k});
    }
    auto r = goal_deviation(s, e, 20);
    ASSERT_EQ(r.rows.size(), 6u);
    EXPECT_DOUBLE_EQ(r.rows.front().window_start, 0.0);
    EXPECT_DOUBLE_EQ(r.rows.back().window_end, 60.0);
    EXPECT_FALSE(r.any_flagged());
}

TEST(MonitorRoundTrip, SimulatedReportFourStaysOnGoal) {
    auto sc = parse_scenario(testing_paths::slurp(testing_paths::source("scenarios/report4.fsp")), "report4");
    SimConfig c;
    c.duration = 600;
    auto tr = run_sim(sc.hierarchy, sc.workload, sc.timeline, c);
    auto e = compute_entitlements(sc.hierarchy);
    auto t0 = convergence_time(tr, e, 0.05);
    ASSERT_TRUE(t0);
    std::istringstream in(ps_log_from_trace(tr, 10.0, 1000.0));
    auto log = parse_ps_log(in);
    std::vector<UsageSample> after;
    for (auto& s : log.samples)
        if (s.timestamp >= 1000.0 + std::ceil(*t0 / 10.0) * 10.0) after.push_back(s);
    auto r = goal_deviation(after, e, 120.0);
    ASSERT_FALSE(r.rows.empty());
    for (auto& row : r.rows) EXPECT_LE(std::abs(row.deviation), 0.02) << row.user << " @" << row.window_start;
}
