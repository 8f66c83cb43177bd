#include "fairshare/analytic_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fairshare {

const WorkloadEntry* WorkloadSpec::find(std::string_view user) const {
    for (const auto& e : entries)
        if (e.user == user) return &e;
    return nullptr;
}

void WorkloadSpec::validate(const ShareHierarchy* h) const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.user).second) throw ValidationError("duplicate workload user '" + e.user + "'");
        if (e.procs < 1) throw ValidationError("user " + e.user + ": procs must be >= 1");
        if (!(e.think >= 0.0) || !std::isfinite(e.think))
            throw ValidationError("user " + e.user + ": think must be >= 0");
        if (!(e.demand > 0.0) || !std::isfinite(e.demand))
            throw ValidationError("user " + e.user + ": demand must be > 0");
        if (h != nullptr && h->find_user(e.user) == nullptr) throw UnknownUserError(e.user);
    }
}

const PerfEntry* PerfTable::find(std::string_view user) const {
    for (const auto& r : rows)
        if (r.user == user) return &r;
    return nullptr;
}

const RatioEntry* RatioTable::find(std::string_view user) const {
    for (const auto& r : rows)
        if (r.user == user) return &r;
    return nullptr;
}

std::vector<std::string> consistency_violations(const PerfTable& t, double rel_tol) {
    std::vector<std::string> out;
    double total_u = 0.0;
    for (const auto& r : t.rows) {
        if (!r.valid) continue;
        total_u += r.utilization;
        const double little = r.throughput * (r.response + r.think);
        if (std::abs(little - r.procs) > rel_tol * r.procs) {
            std::ostringstream os;
            os << r.user << ": X(R+Z) = " << little << " != N = " << r.procs;
            out.push_back(os.str());
        }
        const double xd = r.throughput * r.demand;
        if (std::abs(r.utilization - xd) > rel_tol * std::max(xd, 1e-300)) {
            std::ostringstream os;
            os << r.user << ": U = " << r.utilization << " != XD = " << xd;
            out.push_back(os.str());
        }
    }
    if (total_u > 1.0 + rel_tol) {
        std::ostringstream os;
        os << "sum of utilizations " << total_u << " exceeds 1";
        out.push_back(os.str());
    }
    return out;
}

RepairmanResult solve_repairman(int customers, double demand, double think) {
    double queue = 0.0;
    RepairmanResult res{0.0, 0.0};
    for (int n = 1; n <= customers; ++n) {
        res.response = demand * (1.0 + queue);
        res.throughput = n / (res.response + think);
        queue = res.throughput * res.response;
    }
    return res;
}

namespace {

PerfEntry entry_from(const WorkloadEntry& w) {
    PerfEntry p;
    p.user = w.user;
    p.procs = w.procs;
    p.think = w.think;
    p.demand = w.demand;
    return p;
}

void require_nonempty(const WorkloadSpec& w) {
    if (w.entries.empty()) throw ValidationError("empty workload");
    w.validate();
}

double require_entitlement(const EntitlementTable& e, const std::string& user) {
    const double ent = e.of(user);
    if (!(ent > 0.0)) throw SolverError("user " + user + " has zero entitlement but a nonzero workload");
    return ent;
}

// Physical utilization a user generates on a processor of the given speed.
double demanded_utilization(const WorkloadEntry& w, double speed) {
    return solve_repairman(w.procs, w.demand / speed, w.think).throughput * w.demand;
}

PerfTable table_from_speeds(const WorkloadSpec& w, const EntitlementTable& e,
                            const std::vector<double>& speeds, std::string solver) {
    PerfTable t;
    t.solver = std::move(solver);
    t.entitlements = e;
    for (std::size_t i = 0; i < w.entries.size(); ++i) {
        const auto& we = w.entries[i];
        const auto r = solve_repairman(we.procs, we.demand / speeds[i], we.think);
        PerfEntry p = entry_from(we);
        p.throughput = r.throughput;
        p.response = r.response;
        p.utilization = r.throughput * we.demand;
        p.speed = speeds[i];
        t.rows.push_back(std::move(p));
    }
    return t;
}

}  // namespace

PerfTable solve_ts(const WorkloadSpec& w) {
    require_nonempty(w);
    const std::size_t k = w.entries.size();

    std::vector<std::size_t> stride(k);
    double vectors = 1.0;
    for (std::size_t c = 0; c < k; ++c) {
        stride[c] = static_cast<std::size_t>(vectors);
        vectors *= w.entries[c].procs + 1;
        if (vectors > kMaxPopulationVectors)
            throw SolverError("population too large for exact MVA; use the simulator");
    }

    const auto total = static_cast<std::size_t>(vectors);
    std::vector<double> queue(total, 0.0);
    std::vector<int> pop(k, 0);
    std::vector<double> resp(k, 0.0);
    std::vector<double> thru(k, 0.0);

    for (std::size_t idx = 1; idx < total; ++idx) {
        // Mixed-radix increment of the population vector.
        for (std::size_t c = 0; c < k; ++c) {
            if (++pop[c] <= w.entries[c].procs) break;
            pop[c] = 0;
        }
        double q = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (pop[c] == 0) {
                resp[c] = thru[c] = 0.0;
                continue;
            }
            const auto& we = w.entries[c];
            resp[c] = we.demand * (1.0 + queue[idx - stride[c]]);
            thru[c] = pop[c] / (resp[c] + we.think);
            q += thru[c] * resp[c];
        }
        queue[idx] = q;
    }

    PerfTable t;
    t.solver = "ts-mva";
    for (std::size_t c = 0; c < k; ++c) {
        PerfEntry p = entry_from(w.entries[c]);
        p.throughput = thru[c];
        p.response = resp[c];
        p.utilization = thru[c] * w.entries[c].demand;
        t.rows.push_back(std::move(p));
    }
    return t;
}

PerfTable solve_srm_partition(const WorkloadSpec& w, const EntitlementTable& e) {
    require_nonempty(w);
    std::vector<double> speeds;
    for (const auto& we : w.entries) speeds.push_back(require_entitlement(e, we.user));
    return table_from_speeds(w, e, speeds, "partition");
}

PerfTable solve_srm_conserving(const WorkloadSpec& w, const EntitlementTable& e, ConservingOptions opts) {
    require_nonempty(w);
    const std::size_t k = w.entries.size();
    std::vector<double> weight(k);
    for (std::size_t i = 0; i < k; ++i) weight[i] = require_entitlement(e, w.entries[i].user);

    std::vector<double> speed = weight;
    std::vector<double> used(k);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        for (std::size_t i = 0; i < k; ++i) used[i] = demanded_utilization(w.entries[i], speed[i]);

        // Water-fill: a user is light when, running ahead of the constrained
        // users, it would still consume less than its proportional allotment.
        std::vector<bool> light(k, false);
        double light_use = 0.0;
        double heavy_weight = 0.0;
        for (;;) {
            light_use = 0.0;
            heavy_weight = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                if (light[i])
                    light_use += used[i];
                else
                    heavy_weight += weight[i];
            }
            const double capacity = std::max(0.0, 1.0 - light_use);
            bool changed = false;
            for (std::size_t i = 0; i < k && !changed; ++i) {
                if (light[i]) continue;
                const double allotment = capacity * weight[i] / heavy_weight;
                const double priority_speed = std::max(capacity, weight[i]);
                if (demanded_utilization(w.entries[i], priority_speed) < allotment * (1.0 - 1e-12)) {
                    light[i] = true;
                    changed = true;
                }
            }
            if (!changed) break;
        }

        const double capacity = std::max(0.0, 1.0 - light_use);
        double delta = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            double next;
            if (light[i])
                next = std::max(weight[i], 1.0 - (light_use - used[i]));
            else
                next = capacity * weight[i] / heavy_weight;
            next = std::clamp(next, 1e-12, 1.0);
            delta = std::max(delta, std::abs(next - speed[i]));
            speed[i] = next;
        }
        if (delta < opts.tolerance) {
            // Hand the heavy users exactly what the light users leave over.
            double left = 1.0;
            for (std::size_t i = 0; i < k; ++i)
                if (light[i]) left -= demanded_utilization(w.entries[i], speed[i]);
            left = std::max(0.0, left);
            for (std::size_t i = 0; i < k; ++i)
                if (!light[i]) speed[i] = std::clamp(left * weight[i] / heavy_weight, 1e-12, 1.0);
            return table_from_speeds(w, e, speed, "conserving");
        }
    }
    throw ConvergenceError("conserving solver did not converge after " + std::to_string(opts.max_iterations) +
                               " iterations",
                           table_from_speeds(w, e, speed, "conserving"));
}

RatioTable compare_tables(const PerfTable& a, const PerfTable& b) {
    RatioTable t;
    bool overlap = false;
    for (const auto& ra : a.rows) {
        RatioEntry r;
        r.user = ra.user;
        if (ra.valid) r.numerator = ra.response;
        if (const auto* rb = b.find(ra.user)) {
            overlap = true;
            if (rb->valid) r.denominator = rb->response;
        }
        if (r.numerator && r.denominator && *r.denominator > 0.0) r.ratio = *r.numerator / *r.denominator;
        t.rows.push_back(std::move(r));
    }
    for (const auto& rb : b.rows) {
        if (a.find(rb.user) != nullptr) continue;
        RatioEntry r;
        r.user = rb.user;
        if (rb.valid) r.denominator = rb.response;
        t.rows.push_back(std::move(r));
    }
    if (!overlap) throw ValidationError("tables share no users");
    return t;
}

}  // namespace fairshare
