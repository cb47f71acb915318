#include "obtree/profiler.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace obtree::profiling {

namespace {

struct Registry {
    std::mutex mutex;
    std::deque<std::string> names;
    std::unordered_map<std::string, ScopeId> ids;
};

Registry& registry() {
    static Registry r;
    return r;
}

thread_local Profiler* t_active = nullptr;

double seconds(Nanos t) { return std::chrono::duration<double>(t).count(); }

std::string fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

void sort_tree(std::vector<ScopeStats>& nodes) {
    std::stable_sort(nodes.begin(), nodes.end(),
                     [](const ScopeStats& a, const ScopeStats& b) { return a.total_time > b.total_time; });
    for (auto& n : nodes) sort_tree(n.children);
}

void flatten(const std::vector<ScopeStats>& nodes, int depth, Nanos grand_total, std::vector<ReportRow>& out) {
    for (const auto& n : nodes) {
        const double pct = grand_total.count() > 0 ? 100.0 * static_cast<double>(n.total_time.count()) /
                                                         static_cast<double>(grand_total.count())
                                                   : 0.0;
        out.push_back({n.name, depth, n.call_count, n.total_time, pct, false});
        flatten(n.children, depth + 1, grand_total, out);
    }
}

// Rows keyed by their name path from the top level, e.g. "A/B".
std::vector<std::pair<std::string, const ReportRow*>> keyed_rows(const ProfileReport& report) {
    std::vector<std::pair<std::string, const ReportRow*>> out;
    std::vector<std::string> path;
    for (const auto& row : report.rows) {
        if (row.residual) {
            out.emplace_back(std::string(kOtherRow), &row);
            continue;
        }
        path.resize(static_cast<std::size_t>(row.depth));
        path.push_back(row.name);
        std::string key;
        for (const auto& p : path) key += (key.empty() ? "" : "/") + p;
        out.emplace_back(std::move(key), &row);
    }
    return out;
}

class Grid {
public:
    explicit Grid(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string render(ReportFormat format) const {
        std::string out;
        if (format == ReportFormat::Tsv) {
            for (const auto& row : rows_) {
                for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "\t" : "") + row[c];
                out += '\n';
            }
            return out;
        }
        std::vector<std::size_t> width(rows_.front().size(), 0);
        for (const auto& row : rows_)
            for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        for (const auto& row : rows_) {
            std::string line;
            for (std::size_t c = 0; c < row.size(); ++c) {
                const std::string pad(width[c] - row[c].size(), ' ');
                if (c == 0) line += row[c] + pad;
                else line += "  " + pad + row[c];
            }
            out += line + '\n';
        }
        return out;
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

std::string label(const ReportRow& row, ReportFormat format) {
    if (format == ReportFormat::Tsv || row.residual) return row.name;
    return std::string(static_cast<std::size_t>(row.depth) * 2, ' ') + row.name;
}

}  // namespace

ScopeId scope_id(std::string_view name) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto [it, inserted] = r.ids.try_emplace(std::string(name), static_cast<ScopeId>(r.names.size()));
    if (inserted) r.names.emplace_back(name);
    return it->second;
}

const std::string& scope_name(ScopeId id) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    return r.names.at(id);
}

std::int64_t now_ns() {
    return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

Nanos ProfileReport::other() const {
    for (const auto& row : rows)
        if (row.residual) return row.time;
    return Nanos{0};
}

ProfileReport build_report(std::vector<ScopeStats> roots, Nanos grand_total, bool merged) {
    ProfileReport report;
    sort_tree(roots);
    report.roots = std::move(roots);
    report.grand_total = grand_total;
    report.merged = merged;
    if (report.roots.empty() && grand_total.count() == 0) return report;

    flatten(report.roots, 0, grand_total, report.rows);
    Nanos scoped{0};
    for (const auto& r : report.roots) scoped += r.total_time;
    const Nanos residual = grand_total - scoped;
    const double pct = grand_total.count() > 0
                           ? 100.0 * static_cast<double>(residual.count()) / static_cast<double>(grand_total.count())
                           : 0.0;
    report.rows.push_back({std::string(kOtherRow), 0, 0, residual, pct, true});
    return report;
}

std::string render(const ProfileReport& report, ReportFormat format) {
    Grid grid({"function", "call_count", "time_s", "pct_total"});
    for (const auto& row : report.rows) {
        grid.add({label(row, format), row.residual ? "" : std::to_string(row.call_count), fixed(seconds(row.time), 6),
                  fixed(row.pct_total, 2)});
    }
    grid.add({"Total", "", fixed(seconds(report.grand_total), 6), report.grand_total.count() > 0 ? "100.00" : "0.00"});
    return grid.render(format);
}

std::string render_comparison(const ProfileReport& baseline, const ProfileReport& optimized, ReportFormat format) {
    Grid grid({"function", "call_count", "baseline_time_s", "baseline_pct_total", "optimized_time_s",
               "optimized_pct_total", "speedup"});

    auto speedup = [](Nanos b, Nanos o) {
        return o.count() > 0 ? fixed(static_cast<double>(b.count()) / static_cast<double>(o.count()), 2)
                             : std::string("-");
    };

    const auto base_rows = keyed_rows(baseline);
    const auto opt_rows = keyed_rows(optimized);
    std::map<std::string, const ReportRow*> opt_by_key;
    for (const auto& [key, row] : opt_rows) opt_by_key.emplace(key, row);

    auto emit = [&](const ReportRow* b, const ReportRow* o) {
        const ReportRow& any = b ? *b : *o;
        std::vector<std::string> cells{label(any, format), any.residual ? "" : std::to_string(any.call_count)};
        for (const ReportRow* r : {b, o}) {
            cells.push_back(r ? fixed(seconds(r->time), 6) : "");
            cells.push_back(r ? fixed(r->pct_total, 2) : "");
        }
        cells.push_back(b && o && !any.residual ? speedup(b->time, o->time) : "-");
        grid.add(std::move(cells));
    };

    std::map<std::string, bool> used;
    const ReportRow* base_other = nullptr;
    for (const auto& [key, row] : base_rows) {
        if (row->residual) {
            base_other = row;
            continue;
        }
        auto it = opt_by_key.find(key);
        emit(row, it == opt_by_key.end() ? nullptr : it->second);
        used[key] = true;
    }
    for (const auto& [key, row] : opt_rows)
        if (!row->residual && !used.count(key)) emit(nullptr, row);

    auto opt_other = opt_by_key.find(std::string(kOtherRow));
    if (base_other || opt_other != opt_by_key.end())
        emit(base_other, opt_other == opt_by_key.end() ? nullptr : opt_other->second);

    grid.add({"Total", "", fixed(seconds(baseline.grand_total), 6), "", fixed(seconds(optimized.grand_total), 6), "",
              speedup(baseline.grand_total, optimized.grand_total)});
    return grid.render(format);
}

Profiler::Profiler(bool enabled) : enabled_(enabled) {
    nodes_.emplace_back();
    nodes_.reserve(64);
    stack_.reserve(16);
    stack_.push_back(0);
}

std::uint32_t Profiler::child_of(std::uint32_t parent, ScopeId id) {
    for (std::uint32_t c : nodes_[parent].children)
        if (nodes_[c].id == id) return c;
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{id, 0, 0, 0, {}});
    nodes_[parent].children.push_back(index);
    return index;
}

void Profiler::enter(ScopeId id) {
    const std::uint32_t node = child_of(stack_.back(), id);
    stack_.push_back(node);
    nodes_[node].entered_ns = now_ns();
}

void Profiler::exit(ScopeId id) {
    const std::int64_t t = now_ns();
    if (stack_.size() <= 1) {
        valid_ = false;
        return;
    }
    Node& node = nodes_[stack_.back()];
    if (node.id != id) valid_ = false;
    node.total_ns += t - node.entered_ns;
    ++node.count;
    stack_.pop_back();
}

void Profiler::start_session() {
    session_start_ns_ = now_ns();
    session_stop_ns_ = -1;
}

void Profiler::stop_session() { session_stop_ns_ = now_ns(); }

void Profiler::merge_node(std::uint32_t into, const Profiler& other, std::uint32_t from) {
    const Node& src = other.nodes_[from];
    const std::uint32_t dst = child_of(into, src.id);
    nodes_[dst].count += src.count;
    nodes_[dst].total_ns += src.total_ns;
    for (std::uint32_t c : src.children) merge_node(dst, other, c);
}

void Profiler::merge(const Profiler& other) {
    if (!enabled_) return;
    for (std::uint32_t c : other.nodes_[0].children) merge_node(stack_.back(), other, c);
    valid_ = valid_ && other.valid_;
    merged_ = true;
}

std::vector<std::string> Profiler::open_scopes() const {
    std::vector<std::string> names;
    for (std::size_t i = 1; i < stack_.size(); ++i) names.push_back(scope_name(nodes_[stack_[i]].id));
    return names;
}

ScopeStats Profiler::stats_of(std::uint32_t index) const {
    const Node& n = nodes_[index];
    ScopeStats s{scope_name(n.id), n.count, Nanos(n.total_ns), {}};
    for (std::uint32_t c : n.children) s.children.push_back(stats_of(c));
    return s;
}

ProfileReport Profiler::report() const {
    if (!enabled_) return {};
    if (stack_.size() > 1) {
        std::string msg = "profile has open scopes:";
        for (const auto& name : open_scopes()) msg += " " + name;
        throw std::logic_error(msg);
    }
    if (!valid_) throw std::logic_error("profile invalid: mismatched scope nesting");

    std::vector<ScopeStats> roots;
    for (std::uint32_t c : nodes_[0].children) roots.push_back(stats_of(c));

    Nanos total{0};
    if (session_start_ns_ >= 0) {
        const std::int64_t stop = session_stop_ns_ >= 0 ? session_stop_ns_ : now_ns();
        total = Nanos(stop - session_start_ns_);
    } else {
        for (const auto& r : roots) total += r.total_time;
    }
    return build_report(std::move(roots), total, merged_);
}

Profiler* active() { return t_active; }

Binding::Binding(Profiler* profiler) : previous_(t_active) { t_active = profiler; }

Binding::~Binding() { t_active = previous_; }

}  // namespace obtree::profiling
