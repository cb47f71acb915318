#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace obtree::profiling {

using Nanos = std::chrono::nanoseconds;

/// Stable small integer naming a scope. Obtained once per call site.
using ScopeId = std::uint32_t;

/// Interns `name`, returning the same id for the same name process-wide.
ScopeId scope_id(std::string_view name);
const std::string& scope_name(ScopeId id);

struct ScopeStats {
    std::string name;
    std::uint64_t call_count = 0;
    Nanos total_time{0};
    std::vector<ScopeStats> children;
};

struct ReportRow {
    std::string name;
    int depth = 0;
    std::uint64_t call_count = 0;
    Nanos time{0};
    double pct_total = 0.0;
    bool residual = false;  // the synthesized "Other" row
};

struct ProfileReport {
    std::vector<ScopeStats> roots;
    Nanos grand_total{0};
    std::vector<ReportRow> rows;
    bool merged = false;  // combined from several workers; times may overlap

    bool empty() const { return rows.empty(); }
    Nanos other() const;
};

inline constexpr std::string_view kOtherRow = "Other";

/// Flattens `roots` depth-first (siblings by total time, descending),
/// computes percentages against `grand_total` and appends the residual
/// "Other" row. An empty tree with a zero total yields an empty report.
ProfileReport build_report(std::vector<ScopeStats> roots, Nanos grand_total, bool merged = false);

enum class ReportFormat { Table, Tsv };

/// Columns: function, call_count, time_s, pct_total.
std::string render(const ProfileReport& report, ReportFormat format);

/// Baseline vs optimized join by scope path. Columns: function, call_count,
/// baseline_time_s, baseline_pct_total, optimized_time_s,
/// optimized_pct_total, speedup; closes with a "Total" row.
std::string render_comparison(const ProfileReport& baseline, const ProfileReport& optimized, ReportFormat format);

/// Per-thread call-tree accumulator. Enter/exit read a monotonic clock and
/// add into preallocated nodes; nothing is allocated on a repeat visit.
class Profiler {
public:
    explicit Profiler(bool enabled = true);

    bool enabled() const { return enabled_; }

    void enter(ScopeId id);
    /// Closing a scope other than the innermost open one marks the
    /// profile invalid.
    void exit(ScopeId id);

    /// Brackets the session whose wall time is the report's grand total.
    /// Without a session the grand total is the sum of top-level scopes.
    void start_session();
    void stop_session();

    /// Adds another profiler's tree under the currently open scope,
    /// matching nodes by name. The result is flagged as merged.
    void merge(const Profiler& other);

    bool valid() const { return valid_; }
    std::vector<std::string> open_scopes() const;

    /// Throws std::logic_error if scopes are still open or nesting was
    /// mismatched.
    ProfileReport report() const;

private:
    struct Node {
        ScopeId id = 0;
        std::uint64_t count = 0;
        std::int64_t total_ns = 0;
        std::int64_t entered_ns = 0;
        std::vector<std::uint32_t> children;
    };

    std::uint32_t child_of(std::uint32_t parent, ScopeId id);
    void merge_node(std::uint32_t into, const Profiler& other, std::uint32_t from);
    ScopeStats stats_of(std::uint32_t node) const;

    bool enabled_;
    bool valid_ = true;
    bool merged_ = false;
    std::vector<Node> nodes_;            // nodes_[0] is the synthetic root
    std::vector<std::uint32_t> stack_;   // open scopes, root at the bottom
    std::int64_t session_start_ns_ = -1;
    std::int64_t session_stop_ns_ = -1;
};

std::int64_t now_ns();

/// The profiler scopes on this thread record into, or nullptr.
Profiler* active();

/// Binds a profiler to the current thread for its lifetime.
class Binding {
public:
    explicit Binding(Profiler* profiler);
    ~Binding();
    Binding(const Binding&) = delete;
    Binding& operator=(const Binding&) = delete;

private:
    Profiler* previous_;
};

class ScopedTimer {
public:
    explicit ScopedTimer(ScopeId id) : id_(id), profiler_(active()) {
        if (profiler_ && profiler_->enabled()) profiler_->enter(id_);
        else profiler_ = nullptr;
    }
    ~ScopedTimer() {
        if (profiler_) profiler_->exit(id_);
    }
    ScopedTimer(const ScopedTimer&) = delete;
    ScopedTimer& operator=(const ScopedTimer&) = delete;

private:
    ScopeId id_;
    Profiler* profiler_;
};

/// Runs `body` inside a named scope and returns its result.
template <typename Body>
decltype(auto) scope(std::string_view name, Body&& body) {
    ScopedTimer timer(scope_id(name));
    return std::forward<Body>(body)();
}

}  // namespace obtree::profiling

#define OBTREE_PROFILE_CONCAT2(a, b) a##b
#define OBTREE_PROFILE_CONCAT(a, b) OBTREE_PROFILE_CONCAT2(a, b)

/// Times the enclosing block under `name`. The id lookup happens once per
/// call site.
#define OBTREE_PROFILE_SCOPE(name)                                                                   \
    static const ::obtree::profiling::ScopeId OBTREE_PROFILE_CONCAT(obtree_scope_id_, __LINE__) =    \
        ::obtree::profiling::scope_id(name);                                                         \
    ::obtree::profiling::ScopedTimer OBTREE_PROFILE_CONCAT(obtree_scope_timer_, __LINE__)(            \
        OBTREE_PROFILE_CONCAT(obtree_scope_id_, __LINE__))
