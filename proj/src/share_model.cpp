#include "fairshare/share_model.hpp"

#include <algorithm>
#include <set>

#include "fairshare/errors.hpp"

namespace fairshare {

bool GroupAlloc::any_active() const {
    return std::any_of(users.begin(), users.end(), [](const UserAlloc& u) { return u.active; });
}

ShareHierarchy::ShareHierarchy(long total_allocated_shares, std::vector<GroupAlloc> groups)
    : total_(total_allocated_shares), groups_(std::move(groups)) {
    if (total_ <= 0)
        throw ValidationError("total_shares must be a positive integer, got " + std::to_string(total_));
    if (groups_.empty())
        throw ValidationError("no groups defined");

    std::set<std::string> group_names;
    std::set<std::string> user_names;
    long group_sum = 0;
    for (const auto& g : groups_) {
        if (!group_names.insert(g.name).second)
            throw ValidationError("duplicate group '" + g.name + "'");
        if (g.shares <= 0)
            throw ValidationError("group " + g.name + " shares must be positive, got " +
                                  std::to_string(g.shares));
        if (g.users.empty())
            throw ValidationError("group " + g.name + " has no users");
        long user_sum = 0;
        for (const auto& u : g.users) {
            if (!user_names.insert(u.name).second)
                throw ValidationError("duplicate user '" + u.name + "'");
            if (u.shares <= 0)
                throw ValidationError("user " + u.name + " shares must be positive, got " +
                                      std::to_string(u.shares));
            user_sum += u.shares;
        }
        if (user_sum != g.shares)
            throw ValidationError("group " + g.name + ": user shares sum to " + std::to_string(user_sum) +
                                  " but group holds " + std::to_string(g.shares));
        group_sum += g.shares;
    }
    if (group_sum != total_)
        throw ValidationError("group shares sum to " + std::to_string(group_sum) + " but total_shares is " +
                              std::to_string(total_));
}

const UserAlloc* ShareHierarchy::find_user(std::string_view name) const {
    for (const auto& g : groups_)
        for (const auto& u : g.users)
            if (u.name == name) return &u;
    return nullptr;
}

const GroupAlloc* ShareHierarchy::group_of(std::string_view user) const {
    for (const auto& g : groups_)
        for (const auto& u : g.users)
            if (u.name == user) return &g;
    return nullptr;
}

std::vector<std::string> ShareHierarchy::user_names() const {
    std::vector<std::string> out;
    for (const auto& g : groups_)
        for (const auto& u : g.users) out.push_back(u.name);
    return out;
}

std::size_t ShareHierarchy::max_users_per_group() const {
    std::size_t m = 0;
    for (const auto& g : groups_) m = std::max(m, g.users.size());
    return m;
}

long ShareHierarchy::active_user_shares() const {
    long s = 0;
    for (const auto& g : groups_)
        for (const auto& u : g.users)
            if (u.active) s += u.shares;
    return s;
}

long ShareHierarchy::active_group_shares() const {
    long s = 0;
    for (const auto& g : groups_)
        if (g.any_active()) s += g.shares;
    return s;
}

std::string_view to_string(EntitlementMode mode) {
    return mode == EntitlementMode::FlatPool ? "flat" : "hierarchical";
}

std::optional<EntitlementMode> parse_entitlement_mode(std::string_view text) {
    if (text == "flat" || text == "flat-pool") return EntitlementMode::FlatPool;
    if (text == "hierarchical") return EntitlementMode::Hierarchical;
    return std::nullopt;
}

double EntitlementTable::of(std::string_view user) const {
    for (const auto& e : users)
        if (e.user == user) return e.entitlement;
    return 0.0;
}

double EntitlementTable::group_fraction(std::string_view group) const {
    for (const auto& g : groups)
        if (g.group == group) return g.active_fraction;
    return 0.0;
}

EntitlementTable compute_entitlements(const ShareHierarchy& h, EntitlementMode mode) {
    const long pool = h.active_user_shares();
    if (pool <= 0) throw EmptyPoolError();

    EntitlementTable t;
    t.mode = mode;
    t.active_user_shares = pool;

    const double group_pool = static_cast<double>(h.active_group_shares());
    for (const auto& g : h.groups()) {
        long group_active = 0;
        for (const auto& u : g.users)
            if (u.active) group_active += u.shares;

        double fraction = 0.0;
        if (group_active > 0) {
            fraction = mode == EntitlementMode::FlatPool
                           ? static_cast<double>(group_active) / static_cast<double>(pool)
                           : static_cast<double>(g.shares) / group_pool;
        }
        t.groups.push_back({g.name, fraction});

        for (const auto& u : g.users) {
            double e = 0.0;
            if (u.active) {
                e = mode == EntitlementMode::FlatPool
                        ? static_cast<double>(u.shares) / static_cast<double>(pool)
                        : fraction * static_cast<double>(u.shares) / static_cast<double>(group_active);
            }
            t.users.push_back({u.name, g.name, e});
        }
    }
    return t;
}

EntitlementTable least_upper_bounds(const ShareHierarchy& h) {
    auto groups = h.groups();
    for (auto& g : groups)
        for (auto& u : g.users) u.active = true;
    return compute_entitlements(ShareHierarchy(h.total_allocated_shares(), std::move(groups)));
}

ShareHierarchy set_active(const ShareHierarchy& h, std::string_view user, bool active) {
    auto groups = h.groups();
    bool found = false;
    for (auto& g : groups)
        for (auto& u : g.users)
            if (u.name == user) {
                u.active = active;
                found = true;
            }
    if (!found) throw UnknownUserError(std::string(user));
    return ShareHierarchy(h.total_allocated_shares(), std::move(groups));
}

}  // namespace fairshare
