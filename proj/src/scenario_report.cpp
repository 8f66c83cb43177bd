#include "fairshare/scenario_report.hpp"

#include <charconv>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace fairshare {

std::string_view to_string(SrmSolver s) {
    switch (s) {
        case SrmSolver::Partition: return "partition";
        case SrmSolver::Conserving: return "conserving";
        case SrmSolver::Simulate: return "simulate";
    }
    return "?";
}

std::optional<SrmSolver> parse_srm_solver(std::string_view text) {
    for (auto s : {SrmSolver::Partition, SrmSolver::Conserving, SrmSolver::Simulate})
        if (to_string(s) == text) return s;
    return std::nullopt;
}

WorkloadSpec Scenario::active_workload() const {
    WorkloadSpec w;
    for (const auto& e : workload.entries) {
        const auto* u = hierarchy.find_user(e.user);
        if (u != nullptr && u->active) w.entries.push_back(e);
    }
    return w;
}

std::string fixed2(double v) {
    if (std::isnan(v)) return "N/A";
    // Half away from zero on the decimal value, so 2.025 prints as 2.03.
    const double scaled = v * 100.0;
    double r = std::round(scaled + std::copysign(1e-9 * std::max(1.0, std::abs(scaled)), scaled));
    if (r == 0.0) r = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", r / 100.0);
    return buf;
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

struct Token {
    std::string_view text;
    int column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

class LineParser {
public:
    LineParser(int line, std::vector<Token> tokens) : line_(line), tokens_(std::move(tokens)) {}

    [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(line_, t.column, msg); }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, 1, msg); }

    const std::vector<Token>& tokens() const { return tokens_; }

    template <typename T>
    T number(const Token& t, std::string_view text) const {
        T v{};
        const auto* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc() || ptr != end) fail(t, "invalid number '" + std::string(text) + "'");
        return v;
    }

    // key=value pairs after the first `skip` tokens.
    std::map<std::string, Token> options(std::size_t skip, std::initializer_list<std::string_view> allowed) const {
        std::map<std::string, Token> out;
        for (std::size_t i = skip; i < tokens_.size(); ++i) {
            const auto& t = tokens_[i];
            const auto eq = t.text.find('=');
            if (eq == std::string_view::npos || eq == 0) fail(t, "expected key=value, got '" + std::string(t.text) + "'");
            std::string key(t.text.substr(0, eq));
            bool ok = false;
            for (auto a : allowed) ok = ok || a == key;
            if (!ok) fail(t, "unknown key '" + key + "'");
            if (out.count(key)) fail(t, "duplicate key '" + key + "'");
            out.emplace(key, Token{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1});
        }
        return out;
    }

private:
    int line_;
    std::vector<Token> tokens_;
};

struct PendingGroup {
    GroupAlloc alloc;
    int line;
    int column;
};

struct PendingEvent {
    TimelineEvent event;
    int line;
    int column;
};

}  // namespace

Scenario parse_scenario(std::string_view text, std::string label) {
    Scenario s;
    s.label = std::move(label);
    std::optional<long> total;
    std::vector<PendingGroup> groups;
    std::map<std::string, std::size_t> group_index;
    std::map<std::string, std::pair<int, int>> user_pos;
    std::vector<PendingEvent> events;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        LineParser lp(line_no, tokenize(raw));
        const auto& tk = lp.tokens();
        if (tk.empty()) continue;
        const auto kw = tk[0].text;

        if (kw == "total_shares") {
            if (tk.size() != 2) lp.fail(tk[0], "usage: total_shares <int>");
            if (total) lp.fail(tk[0], "total_shares defined twice");
            total = lp.number<long>(tk[1], tk[1].text);
        } else if (kw == "group") {
            if (tk.size() < 2) lp.fail(tk[0], "usage: group <name> shares=<int>");
            auto opts = lp.options(2, {"shares"});
            if (!opts.count("shares")) lp.fail(tk[1], "group missing shares=");
            std::string name(tk[1].text);
            if (group_index.count(name)) lp.fail(tk[1], "duplicate group '" + name + "'");
            const auto& st = opts.at("shares");
            PendingGroup g{{name, lp.number<long>(st, st.text), {}}, line_no, tk[1].column};
            if (g.alloc.shares <= 0) lp.fail(st, "group " + name + " shares must be positive");
            group_index[name] = groups.size();
            groups.push_back(std::move(g));
        } else if (kw == "user") {
            if (tk.size() < 2) lp.fail(tk[0], "usage: user <name> group=<name> shares=<int> ...");
            auto opts = lp.options(2, {"group", "shares", "procs", "think", "demand", "active"});
            std::string name(tk[1].text);
            if (user_pos.count(name)) lp.fail(tk[1], "duplicate user '" + name + "'");
            if (!opts.count("group")) lp.fail(tk[1], "user missing group=");
            if (!opts.count("shares")) lp.fail(tk[1], "user missing shares=");
            const auto& gt = opts.at("group");
            auto git = group_index.find(std::string(gt.text));
            if (git == group_index.end()) lp.fail(gt, "unknown group '" + std::string(gt.text) + "'");

            UserAlloc u;
            u.name = name;
            u.shares = lp.number<long>(opts.at("shares"), opts.at("shares").text);
            if (u.shares <= 0) lp.fail(opts.at("shares"), "user " + name + " shares must be positive");
            if (opts.count("active")) {
                const auto& at = opts.at("active");
                if (at.text == "yes")
                    u.active = true;
                else if (at.text == "no")
                    u.active = false;
                else
                    lp.fail(at, "active must be yes or no");
            }
            WorkloadEntry w;
            w.user = name;
            if (opts.count("procs")) w.procs = lp.number<int>(opts.at("procs"), opts.at("procs").text);
            if (opts.count("think")) w.think = lp.number<double>(opts.at("think"), opts.at("think").text);
            if (opts.count("demand")) w.demand = lp.number<double>(opts.at("demand"), opts.at("demand").text);
            if (w.procs < 1) lp.fail(opts.at("procs"), "procs must be >= 1");
            if (!(w.think >= 0.0)) lp.fail(opts.at("think"), "think must be >= 0");
            if (!(w.demand > 0.0)) lp.fail(opts.at("demand"), "demand must be > 0");

            groups[git->second].alloc.users.push_back(std::move(u));
            s.workload.entries.push_back(std::move(w));
            user_pos[name] = {line_no, tk[1].column};
        } else if (kw == "event") {
            auto opts = lp.options(1, {"t", "activate", "deactivate"});
            if (!opts.count("t")) lp.fail(tk[0], "event missing t=");
            const bool act = opts.count("activate") > 0;
            const bool deact = opts.count("deactivate") > 0;
            if (act == deact) lp.fail(tk[0], "event needs exactly one of activate=<user> or deactivate=<user>");
            const auto& ut = opts.at(act ? "activate" : "deactivate");
            PendingEvent ev{{lp.number<double>(opts.at("t"), opts.at("t").text), act, std::string(ut.text)},
                            line_no, ut.column};
            if (!(ev.event.time >= 0.0)) lp.fail(opts.at("t"), "event time must be >= 0");
            if (!events.empty() && ev.event.time < events.back().event.time)
                lp.fail(opts.at("t"), "event times must be non-decreasing");
            events.push_back(std::move(ev));
        } else if (kw == "solver") {
            if (tk.size() != 2) lp.fail(tk[0], "usage: solver <partition|conserving|simulate>");
            auto solver = parse_srm_solver(tk[1].text);
            if (!solver) lp.fail(tk[1], "unknown solver '" + std::string(tk[1].text) + "'");
            s.solver = *solver;
        } else {
            lp.fail(tk[0], "unknown directive '" + std::string(kw) + "'");
        }
    }

    if (groups.empty()) throw ParseError(1, 1, "no groups defined");
    if (!total) throw ParseError(1, 1, "total_shares not defined");

    long group_sum = 0;
    std::vector<GroupAlloc> allocs;
    for (auto& g : groups) {
        if (g.alloc.users.empty()) throw ParseError(g.line, g.column, "group " + g.alloc.name + " has no users");
        long user_sum = 0;
        for (const auto& u : g.alloc.users) user_sum += u.shares;
        if (user_sum != g.alloc.shares)
            throw ParseError(g.line, g.column,
                             "group " + g.alloc.name + ": user shares sum to " + std::to_string(user_sum) +
                                 " but group shares=" + std::to_string(g.alloc.shares));
        group_sum += g.alloc.shares;
        allocs.push_back(std::move(g.alloc));
    }
    if (group_sum != *total)
        throw ParseError(1, 1,
                         "group shares sum to " + std::to_string(group_sum) + " but total_shares is " +
                             std::to_string(*total));
    for (const auto& ev : events) {
        if (!user_pos.count(ev.event.user))
            throw ParseError(ev.line, ev.column, "unknown user '" + ev.event.user + "'");
        s.timeline.events.push_back(ev.event);
    }

    try {
        s.hierarchy = ShareHierarchy(*total, std::move(allocs));
    } catch (const ValidationError& e) {
        throw ParseError(1, 1, e.what());
    }
    return s;
}

std::string format_scenario(const Scenario& s) {
    std::ostringstream os;
    os << "total_shares " << s.hierarchy.total_allocated_shares() << '\n';
    for (const auto& g : s.hierarchy.groups()) os << "group " << g.name << " shares=" << g.shares << '\n';
    for (const auto& g : s.hierarchy.groups()) {
        for (const auto& u : g.users) {
            WorkloadEntry w;
            if (const auto* we = s.workload.find(u.name)) w = *we;
            os << "user " << u.name << " group=" << g.name << " shares=" << u.shares << " procs=" << w.procs
               << " think=" << w.think << " demand=" << w.demand << " active=" << (u.active ? "yes" : "no")
               << '\n';
        }
    }
    for (const auto& ev : s.timeline.events)
        os << "event t=" << ev.time << ' ' << (ev.activate ? "activate=" : "deactivate=") << ev.user << '\n';
    os << "solver " << to_string(s.solver) << '\n';
    return os.str();
}

CapacityReport run_scenario(const Scenario& s) {
    CapacityReport r;
    r.label = s.label;
    r.hierarchy = s.hierarchy;
    r.solver = s.solver;
    r.entitlements = compute_entitlements(s.hierarchy, s.mode);
    r.workload = s.active_workload();

    if (r.workload.entries.empty()) {
        r.srm.solver = to_string(s.solver);
        r.ts.solver = "ts-mva";
        return r;
    }

    switch (s.solver) {
        case SrmSolver::Partition: r.srm = solve_srm_partition(r.workload, r.entitlements); break;
        case SrmSolver::Conserving: r.srm = solve_srm_conserving(r.workload, r.entitlements); break;
        case SrmSolver::Simulate: {
            SimConfig cfg = s.sim;
            if (cfg.mode != SimMode::FairshareFlat && cfg.mode != SimMode::FairshareHierarchical)
                cfg.mode = SimMode::FairshareFlat;
            if (s.mode == EntitlementMode::Hierarchical) cfg.mode = SimMode::FairshareHierarchical;
            const auto trace = run_sim(s.hierarchy, s.workload, s.timeline, cfg);
            r.srm = trace.perf;
            r.srm.entitlements = r.entitlements;
            // Keep only users that appear in the analytic workload.
            std::erase_if(r.srm.rows, [&](const PerfEntry& p) { return r.workload.find(p.user) == nullptr; });
            break;
        }
    }
    r.ts = solve_ts(r.workload);
    return r;
}

namespace {

void perf_section(std::ostringstream& os, const std::string& title, const PerfTable& t,
                  const std::optional<std::string>& footer) {
    os << title << "\n\nUser Thru RTime %Ucpu\n";
    for (const auto& row : t.rows) {
        os << row.user << ' ' << fixed2(row.throughput) << ' ' << (row.valid ? fixed2(row.response) : "N/A")
           << ' ' << fixed2(100.0 * row.utilization) << '\n';
    }
    if (footer) os << *footer << '\n';
}

}  // namespace

std::string render_report(const CapacityReport& r) {
    std::ostringstream os;
    const auto& h = r.hierarchy;
    const long active_users = h.active_user_shares();
    const long active_groups =
        r.entitlements.mode == EntitlementMode::FlatPool ? active_users : h.active_group_shares();

    os << "Capacity Report (" << r.label << ")\n\n";

    os << "Allocations\n\n";
    os << active_groups << " ACTIVE group cpu.shares out of " << h.total_allocated_shares() << " Allocated.\n";
    os << active_users << " ACTIVE user cpu.shares out of " << active_groups << " Active group shares.\n";
    for (const auto& g : h.groups()) os << g.name << " Group cpu.shares: " << g.shares << (g.any_active() ? "" : " (offline)") << '\n';
    for (const auto& g : h.groups()) {
        if (g.users.size() < 2) continue;
        for (std::size_t i = 0; i < g.users.size(); ++i) {
            const auto& u = g.users[i];
            os << ' ' << g.name << " cpu.shares owned by usr" << static_cast<char>('A' + i) << ": " << u.shares
               << (u.active ? "" : " (offline)") << '\n';
        }
    }

    const std::size_t columns = h.max_users_per_group();
    os << "\nGroup Entitlements\n\nGroup %Active";
    for (std::size_t i = 0; i < columns; ++i) os << " %User" << static_cast<char>('A' + i);
    os << '\n';
    for (const auto& g : h.groups()) {
        os << g.name << ' ' << fixed2(100.0 * r.entitlements.group_fraction(g.name));
        for (std::size_t i = 0; i < columns; ++i)
            os << ' ' << fixed2(i < g.users.size() ? 100.0 * r.entitlements.of(g.users[i].name) : 0.0);
        os << '\n';
    }

    os << "\nUser Workload Parameters\n\nUser Procs Think Dcpu\n";
    for (const auto& w : r.workload.entries)
        os << w.user << ' ' << fixed2(w.procs) << ' ' << fixed2(w.think) << ' ' << fixed(w.demand, 4) << '\n';

    os << '\n';
    perf_section(os, "Estimated SRM Performance", r.srm, "Model: " + std::string(to_string(r.solver)));
    os << '\n';
    perf_section(os, "Comparative TS Performance", r.ts, std::nullopt);
    return os.str();
}

std::string extract_section(std::string_view text, std::string_view header) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        if (text.substr(pos, nl - pos) == header) break;
        pos = nl + 1;
    }
    if (pos >= text.size()) return {};
    // header, blank line, body up to the next blank line
    auto body = text.find("\n\n", pos);
    if (body == std::string_view::npos) return std::string(text.substr(pos));
    auto end = text.find("\n\n", body + 2);
    if (end == std::string_view::npos) end = text.size();
    else end += 1;
    return std::string(text.substr(pos, end - pos));
}

std::string cross_compare(const std::vector<CapacityReport>& reports) {
    if (reports.size() < 2) throw ValidationError("cross comparison needs at least two reports");
    std::ostringstream os;
    auto ratio = [](const RatioTable& t, const std::string& user) {
        const auto* e = t.find(user);
        return e != nullptr && e->ratio ? fixed2(*e->ratio) : std::string("N/A");
    };
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        if (k > 0) os << '\n';
        os << "Response Time Comparisons (" << r.label << ")\n\nUser Rsm Rts Rsm/Rts";
        if (k > 0) os << " Rs" << k + 1 << "/Rs" << k;
        os << '\n';
        if (r.srm.rows.empty()) continue;
        const auto within = compare_tables(r.srm, r.ts);
        std::optional<RatioTable> across;
        if (k > 0 && !reports[k - 1].srm.rows.empty()) {
            try {
                across = compare_tables(r.srm, reports[k - 1].srm);
            } catch (const ValidationError&) {
                // disjoint users: every cross cell is N/A
            }
        }
        for (const auto& row : r.srm.rows) {
            const auto* ts = r.ts.find(row.user);
            os << row.user << ' ' << (row.valid ? fixed2(row.response) : "N/A") << ' '
               << (ts != nullptr ? fixed2(ts->response) : "N/A") << ' ' << ratio(within, row.user);
            if (k > 0) os << ' ' << (across ? ratio(*across, row.user) : std::string("N/A"));
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace fairshare
