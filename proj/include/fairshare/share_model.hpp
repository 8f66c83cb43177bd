#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairshare {

struct UserAlloc {
    std::string name;
    long shares = 0;
    bool active = true;
};

struct GroupAlloc {
    std::string name;
    long shares = 0;
    std::vector<UserAlloc> users;

    bool any_active() const;
};

// Two-level share allocation: groups own shares, users subdivide their
// group's shares. Immutable in practice; activation changes go through
// set_active() and return a new value.
class ShareHierarchy {
public:
    ShareHierarchy() = default;

    // Throws ValidationError if any invariant is violated.
    ShareHierarchy(long total_allocated_shares, std::vector<GroupAlloc> groups);

    long total_allocated_shares() const { return total_; }
    const std::vector<GroupAlloc>& groups() const { return groups_; }

    const UserAlloc* find_user(std::string_view name) const;
    // Group owning `user`, or nullptr.
    const GroupAlloc* group_of(std::string_view user) const;
    std::vector<std::string> user_names() const;
    std::size_t max_users_per_group() const;

    long active_user_shares() const;
    // Sum of shares of groups with at least one active user.
    long active_group_shares() const;

private:
    long total_ = 0;
    std::vector<GroupAlloc> groups_;
};

enum class EntitlementMode { FlatPool, Hierarchical };

std::string_view to_string(EntitlementMode mode);
std::optional<EntitlementMode> parse_entitlement_mode(std::string_view text);

struct UserEntitlement {
    std::string user;
    std::string group;
    double entitlement = 0.0;
};

struct GroupEntitlement {
    std::string group;
    double active_fraction = 0.0;
};

struct EntitlementTable {
    EntitlementMode mode = EntitlementMode::FlatPool;
    long active_user_shares = 0;
    std::vector<UserEntitlement> users;    // hierarchy order
    std::vector<GroupEntitlement> groups;  // hierarchy order

    // 0 for unknown users.
    double of(std::string_view user) const;
    double group_fraction(std::string_view group) const;
};

EntitlementTable compute_entitlements(const ShareHierarchy& h,
                                      EntitlementMode mode = EntitlementMode::FlatPool);

// Entitlements with every user forced active: the guaranteed minimum.
EntitlementTable least_upper_bounds(const ShareHierarchy& h);

ShareHierarchy set_active(const ShareHierarchy& h, std::string_view user, bool active);

}  // namespace fairshare
