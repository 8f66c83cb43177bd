#include "fairshare/fairshare_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace fairshare {

std::string_view to_string(SimMode mode) {
    switch (mode) {
        case SimMode::FairshareFlat: return "fairshare-flat";
        case SimMode::FairshareHierarchical: return "fairshare-hierarchical";
        case SimMode::TsRoundRobin: return "ts-roundrobin";
        case SimMode::TsPsReference: return "ts-ps-reference";
    }
    return "?";
}

std::optional<SimMode> parse_sim_mode(std::string_view text) {
    for (auto m : {SimMode::FairshareFlat, SimMode::FairshareHierarchical, SimMode::TsRoundRobin,
                   SimMode::TsPsReference})
        if (to_string(m) == text) return m;
    return std::nullopt;
}

void SimConfig::validate() const {
    if (!(quantum > 0.0) || !std::isfinite(quantum)) throw ValidationError("quantum must be > 0");
    if (!(window >= quantum) || !std::isfinite(window)) throw ValidationError("window must be >= quantum");
    if (!(usage_half_life >= 0.0)) throw ValidationError("usage_half_life must be >= 0");
    if (!(warmup >= 0.0)) throw ValidationError("warmup must be >= 0");
    if (!(duration > warmup) || !std::isfinite(duration)) throw ValidationError("duration must exceed warmup");
}

void Timeline::validate(const ShareHierarchy& h) const {
    double prev = 0.0;
    for (const auto& ev : events) {
        if (!(ev.time >= prev)) throw ValidationError("timeline event times must be non-decreasing and >= 0");
        if (h.find_user(ev.user) == nullptr) throw UnknownUserError(ev.user);
        prev = ev.time;
    }
}

ShareHierarchy final_hierarchy(const ShareHierarchy& h, const Timeline& t) {
    ShareHierarchy out = h;
    for (const auto& ev : t.events) out = set_active(out, ev.user, ev.activate);
    return out;
}

std::optional<std::size_t> SimTrace::index_of(std::string_view user) const {
    for (std::size_t i = 0; i < users.size(); ++i)
        if (users[i] == user) return i;
    return std::nullopt;
}

std::vector<double> SimTrace::mean_fractions(double from) const {
    std::vector<double> sum(users.size(), 0.0);
    std::size_t n = 0;
    for (const auto& w : windows) {
        if (w.start < from - 1e-9) continue;
        for (std::size_t u = 0; u < users.size(); ++u) sum[u] += w.fractions[u];
        ++n;
    }
    if (n > 0)
        for (auto& s : sum) s /= static_cast<double>(n);
    return sum;
}

namespace {

constexpr double kTimeEps = 1e-12;

enum class Phase { Ready, Thinking, Suspended };

struct Proc {
    std::size_t id = 0;
    std::size_t user = 0;
    Phase phase = Phase::Suspended;
    double remaining = 0.0;
    double ready_since = 0.0;
    double wake = 0.0;
    std::uint64_t last_run = 0;
};

struct UserState {
    std::string name;
    std::size_t group = 0;
    double shares = 1.0;
    bool active = false;
    double usage = 0.0;
    std::uint64_t last_run = 0;
    std::optional<WorkloadEntry> work;
    long total_completions = 0;
};

struct GroupState {
    std::string name;
    double shares = 1.0;
    std::vector<std::size_t> members;
    std::uint64_t last_run = 0;
};

class Engine {
public:
    Engine(const ShareHierarchy& h, const WorkloadSpec& w, const Timeline& tl, const SimConfig& c)
        : cfg_(c), events_(tl.events), rng_(c.seed) {
        for (const auto& g : h.groups()) {
            GroupState gs{g.name, static_cast<double>(g.shares), {}, 0};
            for (const auto& u : g.users) {
                UserState us;
                us.name = u.name;
                us.group = groups_.size();
                us.shares = static_cast<double>(u.shares);
                us.active = u.active;
                if (const auto* we = w.find(u.name)) us.work = *we;
                gs.members.push_back(users_.size());
                users_.push_back(std::move(us));
            }
            groups_.push_back(std::move(gs));
        }
        for (std::size_t u = 0; u < users_.size(); ++u) {
            if (!users_[u].work) continue;
            for (int i = 0; i < users_[u].work->procs; ++i) {
                Proc p;
                p.id = procs_.size();
                p.user = u;
                if (users_[u].active) start_cycle(p, 0.0);
                procs_.push_back(p);
            }
        }

        const auto nusers = users_.size();
        const auto nwin = static_cast<std::size_t>(std::floor(cfg_.duration / cfg_.window + 1e-9));
        window_busy_.assign(nwin, std::vector<double>(nusers, 0.0));
        window_runnable_.assign(nwin, 0.0);
        busy_post_.assign(nusers, 0.0);
        completions_post_.assign(nusers, 0);
        responses_.assign(nusers, {});
        progress_warmup_.assign(nusers, 0.0);
    }

    SimTrace run() {
        after_advance();
        if (cfg_.mode == SimMode::TsPsReference)
            run_ps();
        else
            run_quantum();
        return finish();
    }

private:
    void start_cycle(Proc& p, double at) const {
        p.phase = Phase::Ready;
        p.remaining = users_[p.user].work->demand;
        p.ready_since = at;
    }

    double draw_think(double mean) {
        if (mean <= 0.0 || !cfg_.jitter_think) return mean;
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return -mean * std::log1p(-u);
    }

    double next_boundary() const {
        double b = cfg_.duration;
        if (next_event_ < events_.size()) b = std::min(b, events_[next_event_].time);
        if (!warmup_taken_) b = std::min(b, cfg_.warmup);
        return b;
    }

    double next_wake() const {
        double w = std::numeric_limits<double>::infinity();
        for (const auto& p : procs_)
            if (p.phase == Phase::Thinking) w = std::min(w, p.wake);
        return w;
    }

    void spread(double t0, double t1, const std::function<void(std::size_t, double)>& add) const {
        if (window_busy_.empty() || t1 <= t0) return;
        auto w = static_cast<std::size_t>(std::max(0.0, std::floor(t0 / cfg_.window)));
        for (; w < window_busy_.size(); ++w) {
            const double ws = static_cast<double>(w) * cfg_.window;
            if (ws >= t1) break;
            const double overlap = std::min(t1, ws + cfg_.window) - std::max(t0, ws);
            if (overlap > 0.0) add(w, overlap);
        }
    }

    void record_busy(std::size_t u, double t0, double t1, double rate) {
        if (t1 > cfg_.warmup) busy_post_[u] += rate * (t1 - std::max(t0, cfg_.warmup));
        spread(t0, t1, [&](std::size_t w, double dt) { window_busy_[w][u] += rate * dt; });
    }

    void record_runnable(double t0, double t1) {
        spread(t0, t1, [&](std::size_t w, double dt) { window_runnable_[w] += dt; });
    }

    void decay(double dt) {
        if (dt <= 0.0 || std::isinf(cfg_.usage_half_life)) return;
        const double f = cfg_.usage_half_life > 0.0 ? std::exp2(-dt / cfg_.usage_half_life) : 0.0;
        for (auto& u : users_) u.usage *= f;
    }

    double progress(std::size_t u) const {
        double p = static_cast<double>(users_[u].total_completions);
        for (const auto& pr : procs_)
            if (pr.user == u && pr.phase == Phase::Ready)
                p += (users_[u].work->demand - pr.remaining) / users_[u].work->demand;
        return p;
    }

    void complete(Proc& p) {
        auto& u = users_[p.user];
        ++u.total_completions;
        if (t_ >= cfg_.warmup - kTimeEps) {
            ++completions_post_[p.user];
            responses_[p.user].push_back(t_ - p.ready_since);
        }
        const double z = draw_think(u.work->think);
        if (z > 0.0) {
            p.phase = Phase::Thinking;
            p.wake = t_ + z;
        } else {
            start_cycle(p, t_);
        }
    }

    void apply_event(const TimelineEvent& ev) {
        for (std::size_t u = 0; u < users_.size(); ++u) {
            if (users_[u].name != ev.user || users_[u].active == ev.activate) continue;
            users_[u].active = ev.activate;
            for (auto& p : procs_) {
                if (p.user != u) continue;
                if (ev.activate)
                    start_cycle(p, ev.time);
                else
                    p.phase = Phase::Suspended;
            }
        }
    }

    void after_advance() {
        for (auto& p : procs_)
            if (p.phase == Phase::Thinking && p.wake <= t_ + kTimeEps) start_cycle(p, p.wake);
        while (next_event_ < events_.size() && events_[next_event_].time <= t_ + kTimeEps)
            apply_event(events_[next_event_++]);
        if (!warmup_taken_ && t_ >= cfg_.warmup - kTimeEps) {
            warmup_taken_ = true;
            for (std::size_t u = 0; u < users_.size(); ++u)
                if (users_[u].work) progress_warmup_[u] = progress(u);
        }
    }

    bool user_before(std::size_t a, std::size_t b) const {
        const double ka = users_[a].usage / users_[a].shares;
        const double kb = users_[b].usage / users_[b].shares;
        if (ka != kb) return ka < kb;
        if (users_[a].last_run != users_[b].last_run) return users_[a].last_run < users_[b].last_run;
        return users_[a].name < users_[b].name;
    }

    bool group_before(std::size_t a, std::size_t b) const {
        auto key = [&](std::size_t g) {
            double usage = 0.0;
            for (auto m : groups_[g].members) usage += users_[m].usage;
            return usage / groups_[g].shares;
        };
        const double ka = key(a);
        const double kb = key(b);
        if (ka != kb) return ka < kb;
        if (groups_[a].last_run != groups_[b].last_run) return groups_[a].last_run < groups_[b].last_run;
        return groups_[a].name < groups_[b].name;
    }

    static bool proc_before(const Proc& a, const Proc& b) {
        if (a.last_run != b.last_run) return a.last_run < b.last_run;
        return a.id < b.id;
    }

    Proc* pick() {
        std::vector<bool> ready_user(users_.size(), false);
        Proc* rr = nullptr;
        for (auto& p : procs_) {
            if (p.phase != Phase::Ready) continue;
            ready_user[p.user] = true;
            if (rr == nullptr || proc_before(p, *rr)) rr = &p;
        }
        if (rr == nullptr || cfg_.mode == SimMode::TsRoundRobin) return rr;

        std::optional<std::size_t> chosen;
        if (cfg_.mode == SimMode::FairshareHierarchical) {
            std::optional<std::size_t> group;
            for (std::size_t g = 0; g < groups_.size(); ++g) {
                const bool ready = std::any_of(groups_[g].members.begin(), groups_[g].members.end(),
                                               [&](std::size_t m) { return ready_user[m]; });
                if (ready && (!group || group_before(g, *group))) group = g;
            }
            for (auto m : groups_[*group].members)
                if (ready_user[m] && (!chosen || user_before(m, *chosen))) chosen = m;
        } else {
            for (std::size_t u = 0; u < users_.size(); ++u)
                if (ready_user[u] && (!chosen || user_before(u, *chosen))) chosen = u;
        }

        Proc* best = nullptr;
        for (auto& p : procs_)
            if (p.phase == Phase::Ready && p.user == *chosen && (best == nullptr || proc_before(p, *best)))
                best = &p;
        return best;
    }

    void run_quantum() {
        while (t_ < cfg_.duration - kTimeEps) {
            const double boundary = next_boundary();
            Proc* p = pick();
            if (p == nullptr) {
                const double next = std::min(boundary, next_wake());
                decay(next - t_);
                t_ = next;
                after_advance();
                continue;
            }
            const double slice = std::min({cfg_.quantum, p->remaining, boundary - t_});
            record_busy(p->user, t_, t_ + slice, 1.0);
            record_runnable(t_, t_ + slice);
            p->remaining -= slice;
            auto& u = users_[p->user];
            u.usage += slice;
            decay(slice);
            t_ += slice;

            p->last_run = u.last_run = groups_[u.group].last_run = ++seq_;
            if (p->remaining <= kTimeEps * u.work->demand) complete(*p);
            after_advance();
        }
    }

    void run_ps() {
        std::vector<std::size_t> count(users_.size());
        while (t_ < cfg_.duration - kTimeEps) {
            std::fill(count.begin(), count.end(), 0);
            std::size_t n = 0;
            double min_remaining = std::numeric_limits<double>::infinity();
            for (const auto& p : procs_) {
                if (p.phase != Phase::Ready) continue;
                ++count[p.user];
                ++n;
                min_remaining = std::min(min_remaining, p.remaining);
            }
            double next = std::min(next_boundary(), next_wake());
            if (n > 0) next = std::min(next, t_ + min_remaining * static_cast<double>(n));
            const double dt = next - t_;
            if (n > 0 && dt > 0.0) {
                const double share = dt / static_cast<double>(n);
                for (auto& p : procs_)
                    if (p.phase == Phase::Ready) p.remaining -= share;
                for (std::size_t u = 0; u < users_.size(); ++u)
                    if (count[u] > 0)
                        record_busy(u, t_, next, static_cast<double>(count[u]) / static_cast<double>(n));
                record_runnable(t_, next);
            }
            t_ = next;
            for (auto& p : procs_)
                if (p.phase == Phase::Ready && p.remaining <= 1e-9 * users_[p.user].work->demand) complete(p);
            after_advance();
        }
    }

    SimTrace finish() {
        SimTrace tr;
        tr.config = cfg_;
        tr.last_event_time = events_.empty() ? 0.0 : events_.back().time;
        tr.elapsed = cfg_.duration - cfg_.warmup;
        for (const auto& u : users_) {
            tr.users.push_back(u.name);
            if (u.work) tr.workload.entries.push_back(*u.work);
        }
        for (std::size_t w = 0; w < window_busy_.size(); ++w) {
            SimWindow win;
            win.start = static_cast<double>(w) * cfg_.window;
            win.runnable_time = window_runnable_[w];
            for (double b : window_busy_[w]) win.fractions.push_back(b / cfg_.window);
            tr.windows.push_back(std::move(win));
        }
        tr.busy = busy_post_;
        tr.completions = completions_post_;
        tr.responses = std::move(responses_);
        tr.work_cycles.assign(users_.size(), 0.0);
        for (std::size_t u = 0; u < users_.size(); ++u)
            if (users_[u].work) tr.work_cycles[u] = progress(u) - progress_warmup_[u];
        if (std::accumulate(busy_post_.begin(), busy_post_.end(), 0.0) <= 0.0)
            tr.warnings.emplace_back("empty trace: no runnable processes for the entire duration");
        tr.perf = trace_perf(tr);
        return tr;
    }

    SimConfig cfg_;
    std::vector<TimelineEvent> events_;
    std::size_t next_event_ = 0;
    std::mt19937_64 rng_;
    std::vector<UserState> users_;
    std::vector<GroupState> groups_;
    std::vector<Proc> procs_;
    double t_ = 0.0;
    std::uint64_t seq_ = 0;
    bool warmup_taken_ = false;

    std::vector<std::vector<double>> window_busy_;
    std::vector<double> window_runnable_;
    std::vector<double> busy_post_;
    std::vector<long> completions_post_;
    std::vector<std::vector<double>> responses_;
    std::vector<double> progress_warmup_;
};

}  // namespace

SimTrace run_sim(const ShareHierarchy& h, const WorkloadSpec& w, const Timeline& t, const SimConfig& c) {
    c.validate();
    w.validate(&h);
    t.validate(h);
    return Engine(h, w, t, c).run();
}

std::optional<double> convergence_time(const SimTrace& tr, const EntitlementTable& e, double epsilon) {
    std::vector<double> ent;
    for (const auto& u : tr.users) ent.push_back(e.of(u));

    const double from = tr.last_event_time;
    std::optional<double> converged = from;
    bool any = false;
    for (const auto& w : tr.windows) {
        if (w.start < from - 1e-9) continue;
        any = true;
        double worst = 0.0;
        for (std::size_t u = 0; u < ent.size(); ++u) worst = std::max(worst, std::abs(w.fractions[u] - ent[u]));
        if (worst > epsilon) converged.reset();
        else if (!converged) converged = w.start;
    }
    if (!any) return std::nullopt;
    return converged;
}

PerfTable trace_perf(const SimTrace& tr) {
    PerfTable t;
    t.solver = "simulated (" + std::string(to_string(tr.config.mode)) + ")";
    for (const auto& we : tr.workload.entries) {
        const auto idx = tr.index_of(we.user);
        if (!idx) continue;
        PerfEntry p;
        p.user = we.user;
        p.procs = we.procs;
        p.think = we.think;
        p.demand = we.demand;
        p.throughput = tr.work_cycles[*idx] / tr.elapsed;
        p.utilization = tr.busy[*idx] / tr.elapsed;
        const auto& rs = tr.responses[*idx];
        if (rs.empty()) {
            p.valid = false;
            p.response = std::numeric_limits<double>::quiet_NaN();
        } else {
            p.response = std::accumulate(rs.begin(), rs.end(), 0.0) / static_cast<double>(rs.size());
        }
        t.rows.push_back(std::move(p));
    }
    return t;
}

void write_trace(const SimTrace& tr, std::ostream& os, char delim) {
    os << "time" << delim << "user" << delim << "fraction\n";
    char start[32];
    char frac[32];
    for (const auto& w : tr.windows) {
        std::snprintf(start, sizeof start, "%.3f", w.start);
        for (std::size_t u = 0; u < tr.users.size(); ++u) {
            std::snprintf(frac, sizeof frac, "%.6f", w.fractions[u]);
            os << start << delim << tr.users[u] << delim << frac << '\n';
        }
    }
}

}  // namespace fairshare
