#include "fairshare/planning_monitor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fairshare/errors.hpp"

namespace fairshare {

void SLOTarget::validate() const {
    if (!(u_max > 0.0 && u_max <= 1.0)) throw ValidationError("workload " + name + ": umax must be in (0, 1]");
    if (!(demand > 0.0)) throw ValidationError("workload " + name + ": demand must be > 0");
    if (r_slo && !(*r_slo >= demand))
        throw ValidationError("workload " + name + ": rslo must be >= demand");
}

double SLOTarget::required_entitlement() const {
    double req = u_max;
    if (r_slo) req = std::max(req, demand / *r_slo);
    return req;
}

SharePlan allocate_topdown(const std::vector<SLOTarget>& targets, long total_shares) {
    if (targets.empty()) throw ValidationError("no workloads to allocate");
    if (total_shares < static_cast<long>(targets.size()))
        throw ValidationError("total_shares " + std::to_string(total_shares) + " is less than the number of workloads");
    std::set<std::string> names;
    for (const auto& t : targets) {
        t.validate();
        if (!names.insert(t.name).second) throw ValidationError("duplicate workload '" + t.name + "'");
    }

    SharePlan plan;
    plan.total_shares = total_shares;
    double required_sum = 0.0;
    for (const auto& t : targets) {
        plan.items.push_back({t.name, t.required_entitlement(), 0});
        required_sum += plan.items.back().required;
    }
    if (required_sum > 1.0 + 1e-12) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", required_sum);
        throw InfeasibleError(std::string("required entitlements sum to ") + buf +
                              " > 1; these allocations cannot be met on one server: "
                              "use domains, or split groups across separate servers");
    }

    const auto total = static_cast<double>(total_shares);
    std::vector<double> remainder(plan.items.size(), -1.0);
    long assigned = 0;
    double quota_sum = 0.0;
    for (std::size_t i = 0; i < plan.items.size(); ++i) {
        const double quota = plan.items[i].required * total;
        quota_sum += quota;
        const auto whole = static_cast<long>(std::floor(quota + 1e-9));
        if (whole >= 1) {
            plan.items[i].shares = whole;
            remainder[i] = std::max(0.0, quota - static_cast<double>(whole));
        } else {
            plan.items[i].shares = 1;
        }
        assigned += plan.items[i].shares;
    }
    if (assigned > total_shares)
        throw InfeasibleError("one-share minimums exceed " + std::to_string(total_shares) +
                              " shares; raise total_shares, use domains, or split groups across separate servers");

    const long target = std::max(assigned, std::min(total_shares, std::lround(quota_sum)));
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < plan.items.size(); ++i)
        if (remainder[i] >= 0.0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        return plan.items[a].name < plan.items[b].name;
    });
    for (std::size_t k = 0; assigned < target && !order.empty(); ++k) {
        ++plan.items[order[k % order.size()]].shares;
        ++assigned;
    }

    plan.residual = total_shares - assigned;
    for (const auto& item : plan.items)
        plan.commands.push_back("limadm set cpu.shares=" + std::to_string(item.shares) + " " + item.name);
    return plan;
}

std::string render_plan(const SharePlan& plan) {
    std::ostringstream os;
    char line[256];
    os << "Share plan: " << plan.total_shares - plan.residual << " of " << plan.total_shares
       << " shares allocated, " << plan.residual << " residual (" << (plan.feasible ? "feasible" : "infeasible")
       << ")\n\n";
    std::snprintf(line, sizeof line, "%-16s %9s %7s %12s\n", "Workload", "Required", "Shares", "Entitlement");
    os << line;
    for (const auto& item : plan.items) {
        std::snprintf(line, sizeof line, "%-16s %8.2f%% %7ld %11.2f%%\n", item.name.c_str(), 100.0 * item.required,
                      item.shares, 100.0 * static_cast<double>(item.shares) / static_cast<double>(plan.total_shares));
        os << line;
    }
    os << '\n';
    for (const auto& c : plan.commands) os << c << '\n';
    return os.str();
}

namespace {

template <typename T>
std::optional<T> to_number(std::string_view s) {
    T v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const auto start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace

SLOFile parse_slo_file(std::string_view text) {
    SLOFile f;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tk = split_ws(line);
        if (tk.empty()) continue;
        if (tk[0] == "total_shares") {
            auto v = tk.size() == 2 ? to_number<long>(tk[1]) : std::nullopt;
            if (!v) throw ParseError(line_no, 1, "usage: total_shares <int>");
            f.total_shares = *v;
        } else if (tk[0] == "workload") {
            if (tk.size() < 2) throw ParseError(line_no, 1, "usage: workload <name> umax=<f> [rslo=<f>] [demand=<f>]");
            SLOTarget t;
            t.name = std::string(tk[1]);
            bool have_umax = false;
            for (std::size_t i = 2; i < tk.size(); ++i) {
                const auto eq = tk[i].find('=');
                const auto key = tk[i].substr(0, eq);
                const auto val = eq == std::string_view::npos ? std::optional<double>{} : to_number<double>(tk[i].substr(eq + 1));
                const int col = static_cast<int>(tk[i].data() - line.data()) + 1;
                if (!val) throw ParseError(line_no, col, "expected key=<number>, got '" + std::string(tk[i]) + "'");
                if (key == "umax") {
                    t.u_max = *val;
                    have_umax = true;
                } else if (key == "rslo") {
                    t.r_slo = *val;
                } else if (key == "demand") {
                    t.demand = *val;
                } else {
                    throw ParseError(line_no, col, "unknown key '" + std::string(key) + "'");
                }
            }
            if (!have_umax) throw ParseError(line_no, 1, "workload " + t.name + " missing umax=");
            f.targets.push_back(std::move(t));
        } else {
            throw ParseError(line_no, 1, "unknown directive '" + std::string(tk[0]) + "'");
        }
    }
    return f;
}

std::optional<double> parse_cputime(std::string_view text) {
    double days = 0.0;
    if (auto dash = text.find('-'); dash != std::string_view::npos) {
        auto d = to_number<long>(text.substr(0, dash));
        if (!d || *d < 0) return std::nullopt;
        days = static_cast<double>(*d);
        text = text.substr(dash + 1);
    }
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    for (;;) {
        auto colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon - pos));
        if (colon == std::string_view::npos) break;
        pos = colon + 1;
    }
    if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        auto v = to_number<long>(parts[i]);
        if (!v || *v < 0) return std::nullopt;
        total = total * 60.0 + static_cast<double>(*v);
    }
    auto secs = to_number<double>(parts.back());
    if (!secs || *secs < 0.0 || *secs >= 60.0) return std::nullopt;
    return days * 86400.0 + total * 60.0 + *secs;
}

PsLog parse_ps_log(std::istream& in) {
    if (!in) throw Error("ps log stream unreadable");
    PsLog log;
    std::optional<double> stamp;
    std::string raw;
    while (std::getline(in, raw)) {
        const auto tk = split_ws(raw);
        if (tk.empty()) continue;
        if (tk[0] == "T") {
            auto t = tk.size() == 2 ? to_number<double>(tk[1]) : std::nullopt;
            if (t)
                stamp = *t;
            else
                ++log.skipped;
            continue;
        }
        if (tk[0] == "USER") continue;  // column header
        // USER PID %CPU %MEM SZ RSS TT S START TIME COMMAND
        if (!stamp || tk.size() < 11) {
            ++log.skipped;
            continue;
        }
        auto pid = to_number<long>(tk[1]);
        auto pcpu = to_number<double>(tk[2]);
        auto cpu = parse_cputime(tk[9]);
        if (!cpu && tk.size() > 11) cpu = parse_cputime(tk[10]);  // START with a space, e.g. "Jan 05"
        if (!pid || !pcpu || !cpu || *pcpu < 0.0) {
            ++log.skipped;
            continue;
        }
        log.samples.push_back({*stamp, std::string(tk[0]), *pid, *pcpu, *cpu});
    }
    if (in.bad()) throw Error("ps log stream unreadable");
    if (log.samples.empty()) throw Error("zero parseable samples");
    return log;
}

bool DeviationReport::any_flagged() const {
    return std::any_of(rows.begin(), rows.end(), [](const DeviationRow& r) { return r.flagged; });
}

DeviationReport goal_deviation(const std::vector<UsageSample>& samples, const EntitlementTable& e, double window,
                               double threshold) {
    if (!(window > 0.0)) throw ValidationError("window must be > 0");
    // timestamp -> pid -> sample
    std::map<double, std::map<long, const UsageSample*>> snaps;
    for (const auto& s : samples) snaps[s.timestamp][s.pid] = &s;
    if (snaps.size() < 2) throw ValidationError("need at least two timestamps");
    const double span = snaps.rbegin()->first - snaps.begin()->first;
    if (window > span + 1e-9) throw ValidationError("window larger than log span");

    std::set<std::string> known;
    for (const auto& u : e.users) known.insert(u.user);

    DeviationReport rep;
    rep.threshold = threshold;
    auto start = snaps.begin();
    while (true) {
        auto end = std::next(start);
        while (end != snaps.end() && end->first < start->first + window - 1e-9) ++end;
        if (end == snaps.end()) break;

        std::map<std::string, double> busy;
        for (const auto& [pid, s] : end->second) {
            double delta = s->cputime;
            if (auto it = start->second.find(pid); it != start->second.end() && it->second->user == s->user &&
                                                    it->second->cputime <= s->cputime)
                delta = s->cputime - it->second->cputime;
            const std::string user = known.count(s->user) ? s->user : std::string(kUnallocated);
            busy[user] += delta;
        }
        double total = 0.0;
        double observed_ent = 0.0;
        for (const auto& [user, b] : busy) {
            total += b;
            if (b > 0.0 && user != kUnallocated) observed_ent += e.of(user);
        }
        if (total > 0.0) {
            for (const auto& [user, b] : busy) {
                if (b <= 0.0) continue;
                DeviationRow row;
                row.window_start = start->first;
                row.window_end = end->first;
                row.user = user;
                row.busy = b;
                row.achieved = b / total;
                row.entitled = user != kUnallocated && observed_ent > 0.0 ? e.of(user) / observed_ent : 0.0;
                row.deviation = row.achieved - row.entitled;
                row.flagged = std::abs(row.deviation) > threshold;
                rep.rows.push_back(std::move(row));
            }
        }
        start = end;
    }
    return rep;
}

std::string render_deviation(const DeviationReport& r) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%12s %12s %-16s %10s %9s %9s %10s %s\n", "Start", "End", "User", "Busy(s)",
                  "Achieved", "Entitled", "Deviation", "Flag");
    os << line;
    for (const auto& row : r.rows) {
        std::snprintf(line, sizeof line, "%12.1f %12.1f %-16s %10.2f %9.4f %9.4f %+10.4f %s\n", row.window_start,
                      row.window_end, row.user.c_str(), row.busy, row.achieved, row.entitled, row.deviation,
                      row.flagged ? "EXCEEDS" : "ok");
        os << line;
    }
    std::snprintf(line, sizeof line, "threshold %.4f: %s\n", r.threshold,
                  r.any_flagged() ? "deviation exceeded" : "all within threshold");
    os << line;
    return os.str();
}

std::string ps_log_from_trace(const SimTrace& tr, double interval, double epoch) {
    if (!(interval >= tr.config.window)) throw ValidationError("interval must be >= the trace window");
    const auto per = static_cast<std::size_t>(std::llround(interval / tr.config.window));
    std::vector<double> cumulative(tr.users.size(), 0.0);
    std::ostringstream os;
    char line[256];
    auto snapshot = [&](double t, std::size_t from_window) {
        os << "T " << static_cast<long long>(std::llround(epoch + t)) << '\n';
        os << "USER PID %CPU %MEM SZ RSS TT S START TIME COMMAND\n";
        for (std::size_t u = 0; u < tr.users.size(); ++u) {
            if (!tr.workload.find(tr.users[u])) continue;
            double recent = 0.0;
            for (std::size_t w = from_window; w < std::min(from_window + per, tr.windows.size()); ++w)
                recent += tr.windows[w].fractions[u];
            const auto secs = static_cast<long>(std::floor(cumulative[u] + 1e-9));
            std::snprintf(line, sizeof line, "%s %ld %.1f 0.1 1024 512 ? R 00:00 %ld:%02ld sim\n",
                          tr.users[u].c_str(), 1000 + static_cast<long>(u),
                          per > 0 ? 100.0 * recent / static_cast<double>(per) : 0.0, secs / 60, secs % 60);
            os << line;
        }
    };
    snapshot(0.0, tr.windows.size());  // no history yet: %CPU 0
    for (std::size_t w = 0; w < tr.windows.size(); ++w) {
        for (std::size_t u = 0; u < tr.users.size(); ++u) cumulative[u] += tr.windows[w].fractions[u] * tr.config.window;
        if ((w + 1) % per == 0) snapshot(static_cast<double>(w + 1) * tr.config.window, w + 1 - per);
    }
    return os.str();
}

}  // namespace fairshare
