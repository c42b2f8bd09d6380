#include "adatm/nearness.hpp"

#include <algorithm>
#include <cmath>

#include "adatm/error.hpp"

namespace adatm::nearness {

namespace {

// Entries spanning more cells than this live in a side list that every
// spatial query scans.
constexpr std::uint64_t kMaxCellsPerEntry = 4096;
constexpr std::uint64_t kMaxCellsPerQuery = 1u << 16;
constexpr double kMaxCellCoordinate = 1e15;

bool finite(double v) { return std::isfinite(v); }

} // namespace

bool TimeInterval::contains(double t) const noexcept {
    if (degenerate()) return t == start;
    return start <= t && t < end;
}

bool TimeInterval::intersects(const TimeInterval& other) const noexcept {
    if (degenerate()) return other.contains(start);
    if (other.degenerate()) return contains(other.start);
    return std::max(start, other.start) < std::min(end, other.end);
}

double TimeInterval::gap(const TimeInterval& other) const noexcept {
    return std::max({0.0, other.start - end, start - other.end});
}

void TimeInterval::validate() const {
    if (!finite(start) || !finite(end)) throw ValidationError("time interval bounds must be finite");
    if (start > end) throw ValidationError("time interval start exceeds end");
}

bool PlanarBox::intersects(const PlanarBox& other) const noexcept {
    return x_range().intersects(other.x_range()) && y_range().intersects(other.y_range());
}

double PlanarBox::gap(const PlanarBox& other) const noexcept {
    return std::hypot(x_range().gap(other.x_range()), y_range().gap(other.y_range()));
}

void PlanarBox::validate() const {
    if (!finite(x0) || !finite(y0) || !finite(x1) || !finite(y1))
        throw ValidationError("box coordinates must be finite");
    if (x0 > x1 || y0 > y1) throw ValidationError("box has inverted bounds");
}

ConceptPath::ConceptPath(std::vector<std::string> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ValidationError("concept path needs at least one segment");
    for (const auto& s : segments_) {
        if (s.empty()) throw ValidationError("concept path segment is empty");
        if (s.find('/') != std::string::npos) throw ValidationError("concept path segment contains '/'");
    }
}

ConceptPath ConceptPath::parse(std::string_view text) {
    std::vector<std::string> parts;
    std::size_t begin = 0;
    while (true) {
        auto pos = text.find('/', begin);
        parts.emplace_back(text.substr(begin, pos == std::string_view::npos ? pos : pos - begin));
        if (pos == std::string_view::npos) break;
        begin = pos + 1;
    }
    return ConceptPath(std::move(parts));
}

bool ConceptPath::is_prefix_of(const ConceptPath& other) const noexcept {
    return segments_.size() <= other.segments_.size() &&
           std::equal(segments_.begin(), segments_.end(), other.segments_.begin());
}

std::size_t ConceptPath::common_prefix(const ConceptPath& other) const noexcept {
    auto [a, b] = std::mismatch(segments_.begin(), segments_.end(), other.segments_.begin(),
                                other.segments_.end());
    return static_cast<std::size_t>(a - segments_.begin());
}

ConceptPath ConceptPath::prefix(std::size_t length) const {
    return ConceptPath({segments_.begin(), segments_.begin() + static_cast<std::ptrdiff_t>(
                                                                   std::min(length, segments_.size()))});
}

std::string ConceptPath::str() const {
    std::string out;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (i) out += '/';
        out += segments_[i];
    }
    return out;
}

std::size_t concept_distance(const ConceptPath& a, const ConceptPath& b) {
    if (a.empty() || b.empty() || a.root() != b.root())
        throw DomainError("concept paths have different roots: " + a.str() + " vs " + b.str());
    return a.depth() + b.depth() - 2 * a.common_prefix(b);
}

void NearnessKey::validate() const {
    time.validate();
    space.validate();
    if (concept_path.empty()) throw ValidationError("nearness key needs a concept path");
}

bool keys_overlap(const NearnessKey& a, const NearnessKey& b) noexcept {
    return a.time.intersects(b.time) && a.space.intersects(b.space) && a.concept_path == b.concept_path;
}

NearnessKey cover(std::span<const NearnessKey> keys) {
    if (keys.empty()) throw PreconditionError("cannot cover an empty key set");
    NearnessKey out = keys.front();
    for (const auto& k : keys.subspan(1)) {
        if (k.concept_path.root() != out.concept_path.root())
            throw DomainError("cannot cover keys with different concept roots");
        out.time.start = std::min(out.time.start, k.time.start);
        out.time.end = std::max(out.time.end, k.time.end);
        out.space.x0 = std::min(out.space.x0, k.space.x0);
        out.space.y0 = std::min(out.space.y0, k.space.y0);
        out.space.x1 = std::max(out.space.x1, k.space.x1);
        out.space.y1 = std::max(out.space.y1, k.space.y1);
        out.concept_path = out.concept_path.prefix(out.concept_path.common_prefix(k.concept_path));
    }
    return out;
}

QuerySpec QuerySpec::neighborhood(NearnessKey center, Radii radii) {
    QuerySpec q;
    q.mode = QueryMode::Neighborhood;
    q.center = std::move(center);
    q.radii = radii;
    return q;
}

QuerySpec QuerySpec::focused(std::optional<TimeInterval> time, std::optional<PlanarBox> space,
                             std::optional<ConceptPath> concept_prefix) {
    QuerySpec q;
    q.mode = QueryMode::Focused;
    q.time = time;
    q.space = space;
    q.concept_prefix = std::move(concept_prefix);
    return q;
}

void QuerySpec::validate() const {
    if (mode == QueryMode::Neighborhood) {
        center.validate();
        if (std::isnan(radii.time) || radii.time < 0) throw ValidationError("time radius must be >= 0");
        if (std::isnan(radii.space) || radii.space < 0) throw ValidationError("space radius must be >= 0");
        return;
    }
    if (!time && !space && !concept_prefix)
        throw ValidationError("focused query needs at least one constraint");
    if (time) time->validate();
    if (space) space->validate();
    if (concept_prefix && concept_prefix->empty()) throw ValidationError("concept prefix is empty");
}

namespace {

bool within(double gap, bool intersects, double radius) {
    return intersects || (radius > 0 && gap <= radius);
}

} // namespace

bool matches(const QuerySpec& q, const NearnessKey& key) {
    if (q.mode == QueryMode::Focused) {
        if (q.time && !key.time.intersects(*q.time)) return false;
        if (q.space && !key.space.intersects(*q.space)) return false;
        if (q.concept_prefix && !q.concept_prefix->is_prefix_of(key.concept_path)) return false;
        return true;
    }
    const auto& c = q.center;
    if (!within(key.time.gap(c.time), key.time.intersects(c.time), q.radii.time)) return false;
    if (!within(key.space.gap(c.space), key.space.intersects(c.space), q.radii.space)) return false;
    if (q.radii.concept_edges == kInfiniteEdges) return true;
    if (key.concept_path.root() != c.concept_path.root()) return false;
    return concept_distance(key.concept_path, c.concept_path) <= q.radii.concept_edges;
}

// --- NearnessIndex --------------------------------------------------------

struct NearnessIndex::TrieNode {
    std::map<std::string, std::unique_ptr<TrieNode>> children;
    std::set<std::string> ids;
};

std::size_t NearnessIndex::CellHash::operator()(const Cell& c) const noexcept {
    auto h = static_cast<std::uint64_t>(c.cx) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(c.cy) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
}

std::uint64_t NearnessIndex::CellRange::count() const noexcept {
    return static_cast<std::uint64_t>(cx1 - cx0 + 1) * static_cast<std::uint64_t>(cy1 - cy0 + 1);
}

NearnessIndex::NearnessIndex(double cell_size) : cell_size_(cell_size), trie_(std::make_unique<TrieNode>()) {
    if (!(cell_size > 0) || !finite(cell_size)) throw ValidationError("index cell size must be positive");
}

NearnessIndex::~NearnessIndex() = default;
NearnessIndex::NearnessIndex(NearnessIndex&&) noexcept = default;
NearnessIndex& NearnessIndex::operator=(NearnessIndex&&) noexcept = default;

std::optional<NearnessIndex::CellRange> NearnessIndex::cells_covering(double x0, double y0, double x1,
                                                                       double y1) const {
    const double fx0 = std::floor(x0 / cell_size_), fy0 = std::floor(y0 / cell_size_);
    const double fx1 = std::floor(x1 / cell_size_), fy1 = std::floor(y1 / cell_size_);
    for (double f : {fx0, fy0, fx1, fy1})
        if (!finite(f) || std::abs(f) > kMaxCellCoordinate) return std::nullopt;
    return CellRange{static_cast<std::int64_t>(fx0), static_cast<std::int64_t>(fy0),
                     static_cast<std::int64_t>(fx1), static_cast<std::int64_t>(fy1)};
}

void NearnessIndex::insert(const std::string& id, const NearnessKey& key) {
    key.validate();
    if (keys_.contains(id)) throw ConflictError("id already indexed: " + id);
    keys_.emplace(id, key);

    auto range = cells_covering(key.space.x0, key.space.y0, key.space.x1, key.space.y1);
    if (!range || range->count() > kMaxCellsPerEntry) {
        wide_.insert(id);
    } else {
        for (auto cx = range->cx0; cx <= range->cx1; ++cx) {
            for (auto cy = range->cy0; cy <= range->cy1; ++cy) {
                auto& slots = grid_[Cell{cx, cy}];
                Slot slot{key.time.start, key.time.end, id};
                auto pos = std::lower_bound(slots.begin(), slots.end(), slot, [](const Slot& a, const Slot& b) {
                    return a.start != b.start ? a.start < b.start : a.id < b.id;
                });
                slots.insert(pos, std::move(slot));
            }
        }
    }

    TrieNode* node = trie_.get();
    for (const auto& seg : key.concept_path.segments()) {
        auto& child = node->children[seg];
        if (!child) child = std::make_unique<TrieNode>();
        node = child.get();
    }
    node->ids.insert(id);
}

void NearnessIndex::remove(const std::string& id) {
    auto it = keys_.find(id);
    if (it == keys_.end()) throw NotFoundError("id not indexed: " + id);
    const NearnessKey key = it->second;
    keys_.erase(it);

    if (!wide_.erase(id)) {
        auto range = cells_covering(key.space.x0, key.space.y0, key.space.x1, key.space.y1);
        for (auto cx = range->cx0; cx <= range->cx1; ++cx) {
            for (auto cy = range->cy0; cy <= range->cy1; ++cy) {
                auto cell = grid_.find(Cell{cx, cy});
                auto& slots = cell->second;
                std::erase_if(slots, [&](const Slot& s) { return s.id == id; });
                if (slots.empty()) grid_.erase(cell);
            }
        }
    }

    // Walk down remembering the path so empty nodes can be pruned.
    std::vector<std::pair<TrieNode*, const std::string*>> path;
    TrieNode* node = trie_.get();
    for (const auto& seg : key.concept_path.segments()) {
        path.emplace_back(node, &seg);
        node = node->children.at(seg).get();
    }
    node->ids.erase(id);
    for (auto rit = path.rbegin(); rit != path.rend(); ++rit) {
        auto& child = rit->first->children.at(*rit->second);
        if (!child->ids.empty() || !child->children.empty()) break;
        rit->first->children.erase(*rit->second);
    }
}

bool NearnessIndex::contains(const std::string& id) const { return keys_.contains(id); }

const NearnessKey& NearnessIndex::key_of(const std::string& id) const {
    auto it = keys_.find(id);
    if (it == keys_.end()) throw NotFoundError("id not indexed: " + id);
    return it->second;
}

void NearnessIndex::collect_cells(const CellRange& range, const std::optional<TimeInterval>& window,
                                  std::set<std::string>& out) const {
    for (auto cx = range.cx0; cx <= range.cx1; ++cx) {
        for (auto cy = range.cy0; cy <= range.cy1; ++cy) {
            auto it = grid_.find(Cell{cx, cy});
            if (it == grid_.end()) continue;
            for (const auto& slot : it->second) {
                if (window) {
                    if (slot.start > window->end) break;
                    if (slot.end < window->start) continue;
                }
                out.insert(slot.id);
            }
        }
    }
    out.insert(wide_.begin(), wide_.end());
}

void NearnessIndex::collect_trie(const ConceptPath& prefix, std::set<std::string>& out) const {
    const TrieNode* node = trie_.get();
    for (const auto& seg : prefix.segments()) {
        auto it = node->children.find(seg);
        if (it == node->children.end()) return;
        node = it->second.get();
    }
    std::vector<const TrieNode*> stack{node};
    while (!stack.empty()) {
        const TrieNode* n = stack.back();
        stack.pop_back();
        out.insert(n->ids.begin(), n->ids.end());
        for (const auto& [_, child] : n->children) stack.push_back(child.get());
    }
}

std::vector<std::string> NearnessIndex::query(const QuerySpec& q) const {
    q.validate();

    std::set<std::string> candidates;
    bool scan_all = true;

    if (q.mode == QueryMode::Neighborhood) {
        if (finite(q.radii.space)) {
            const auto& b = q.center.space;
            const double r = q.radii.space;
            auto range = cells_covering(b.x0 - r, b.y0 - r, b.x1 + r, b.y1 + r);
            if (range && range->count() <= kMaxCellsPerQuery) {
                std::optional<TimeInterval> window;
                if (finite(q.radii.time))
                    window = TimeInterval{q.center.time.start - q.radii.time, q.center.time.end + q.radii.time};
                collect_cells(*range, window, candidates);
                scan_all = false;
            }
        }
    } else if (q.space) {
        auto range = cells_covering(q.space->x0, q.space->y0, q.space->x1, q.space->y1);
        if (range && range->count() <= kMaxCellsPerQuery) {
            collect_cells(*range, q.time, candidates);
            scan_all = false;
        }
    } else if (q.concept_prefix) {
        collect_trie(*q.concept_prefix, candidates);
        scan_all = false;
    }

    if (scan_all)
        for (const auto& [id, _] : keys_) candidates.insert(id);

    std::vector<std::string> out;
    for (const auto& id : candidates)
        if (matches(q, keys_.at(id))) out.push_back(id);
    return out;
}

} // namespace adatm::nearness
