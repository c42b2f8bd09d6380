#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace adatm::nearness {

/// Reserved radius meaning "no bound" in a neighborhood query.
inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();
/// Reserved concept radius meaning "any concept with the same root".
inline constexpr std::size_t kInfiniteEdges = std::numeric_limits<std::size_t>::max();

/// Half-open time interval [start, end). A zero-width interval denotes the
/// single instant `start`.
struct TimeInterval {
    double start = 0.0;
    double end = 0.0;

    bool degenerate() const noexcept { return start == end; }
    bool contains(double t) const noexcept;
    bool intersects(const TimeInterval& other) const noexcept;
    /// Distance between the closures; 0 when overlapping or touching.
    double gap(const TimeInterval& other) const noexcept;
    void validate() const;

    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

/// Half-open axis-aligned box [x0, x1) x [y0, y1). Zero-width axes denote
/// points or lines.
struct PlanarBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    TimeInterval x_range() const noexcept { return {x0, x1}; }
    TimeInterval y_range() const noexcept { return {y0, y1}; }
    bool intersects(const PlanarBox& other) const noexcept;
    /// Euclidean distance between the box closures; 0 when touching.
    double gap(const PlanarBox& other) const noexcept;
    void validate() const;

    friend bool operator==(const PlanarBox&, const PlanarBox&) = default;
};

/// Path from the ontology root, e.g. root/military/operations.
class ConceptPath {
public:
    ConceptPath() = default;
    explicit ConceptPath(std::vector<std::string> segments);

    /// Parses a `/`-separated path.
    static ConceptPath parse(std::string_view text);

    const std::vector<std::string>& segments() const noexcept { return segments_; }
    std::size_t depth() const noexcept { return segments_.size(); }
    const std::string& root() const { return segments_.front(); }
    bool empty() const noexcept { return segments_.empty(); }
    bool is_prefix_of(const ConceptPath& other) const noexcept;
    std::size_t common_prefix(const ConceptPath& other) const noexcept;
    ConceptPath prefix(std::size_t length) const;
    std::string str() const;

    friend bool operator==(const ConceptPath&, const ConceptPath&) = default;
    friend auto operator<=>(const ConceptPath&, const ConceptPath&) = default;

private:
    std::vector<std::string> segments_;
};

/// Edge distance in the label tree. Throws DomainError on different roots.
std::size_t concept_distance(const ConceptPath& a, const ConceptPath& b);

struct NearnessKey {
    TimeInterval time;
    PlanarBox space;
    ConceptPath concept_path;

    void validate() const;

    friend bool operator==(const NearnessKey&, const NearnessKey&) = default;
};

/// True iff the keys intersect in every dimension (time and space intersect,
/// concept paths equal).
bool keys_overlap(const NearnessKey& a, const NearnessKey& b) noexcept;

/// Smallest key covering every input. Concepts collapse to their longest
/// common prefix; throws PreconditionError on an empty span and DomainError
/// when roots differ.
NearnessKey cover(std::span<const NearnessKey> keys);

enum class QueryMode { Neighborhood, Focused };

struct Radii {
    double time = 0.0;
    double space = 0.0;
    std::size_t concept_edges = 0;

    friend bool operator==(const Radii&, const Radii&) = default;
};

struct QuerySpec {
    QueryMode mode = QueryMode::Focused;

    // Neighborhood
    NearnessKey center;
    Radii radii;

    // Focused
    std::optional<TimeInterval> time;
    std::optional<PlanarBox> space;
    std::optional<ConceptPath> concept_prefix;

    static QuerySpec neighborhood(NearnessKey center, Radii radii);
    static QuerySpec focused(std::optional<TimeInterval> time, std::optional<PlanarBox> space,
                             std::optional<ConceptPath> concept_prefix);

    /// Throws ValidationError when the spec is malformed.
    void validate() const;

    friend bool operator==(const QuerySpec&, const QuerySpec&) = default;
};

/// The predicate a query applies to a single key. A zero radius means
/// "intersects"; a positive radius admits any gap up to and including it.
bool matches(const QuerySpec& q, const NearnessKey& key);

/// Uniform grid over space, a start-sorted interval list per cell and a
/// concept-prefix trie. Single writer, many readers.
class NearnessIndex {
public:
    explicit NearnessIndex(double cell_size = 1.0);
    ~NearnessIndex();
    NearnessIndex(NearnessIndex&&) noexcept;
    NearnessIndex& operator=(NearnessIndex&&) noexcept;
    NearnessIndex(const NearnessIndex&) = delete;
    NearnessIndex& operator=(const NearnessIndex&) = delete;

    void insert(const std::string& id, const NearnessKey& key);
    void remove(const std::string& id);
    bool contains(const std::string& id) const;
    const NearnessKey& key_of(const std::string& id) const;
    std::size_t size() const noexcept { return keys_.size(); }
    double cell_size() const noexcept { return cell_size_; }

    /// Matching ids in ascending order.
    std::vector<std::string> query(const QuerySpec& q) const;

private:
    struct Cell {
        std::int64_t cx;
        std::int64_t cy;
        friend bool operator==(const Cell&, const Cell&) = default;
    };
    struct CellHash {
        std::size_t operator()(const Cell& c) const noexcept;
    };
    struct Slot {
        double start;
        double end;
        std::string id;
    };
    struct TrieNode;

    struct CellRange {
        std::int64_t cx0, cy0, cx1, cy1;
        std::uint64_t count() const noexcept;
    };

    std::optional<CellRange> cells_covering(double x0, double y0, double x1, double y1) const;
    void collect_cells(const CellRange& range, const std::optional<TimeInterval>& time_window,
                       std::set<std::string>& out) const;
    void collect_trie(const ConceptPath& prefix, std::set<std::string>& out) const;

    double cell_size_;
    std::unordered_map<std::string, NearnessKey> keys_;
    std::unordered_map<Cell, std::vector<Slot>, CellHash> grid_;
    std::set<std::string> wide_;
    std::unique_ptr<TrieNode> trie_;
};

} // namespace adatm::nearness
