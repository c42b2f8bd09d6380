#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adatm/nearness.hpp"

namespace adatm::kernel {

enum class NotionKind { Assumption, Goal, Hypothesis, Event, Aggregate };
enum class StorageTier { Hot, Warm, Cold, Archived, Deleted };

std::string_view to_string(NotionKind kind);
std::string_view to_string(StorageTier tier);
NotionKind parse_notion_kind(std::string_view text);

/// Named fields with a deterministic canonical text form: fields sorted by
/// name, `name=value` pairs joined by `;`. `\`, `=` and `;` inside names or
/// values are backslash-escaped.
class Payload {
public:
    Payload() = default;
    Payload(std::initializer_list<std::pair<const std::string, std::string>> fields);
    explicit Payload(std::map<std::string, std::string> fields);

    static Payload text(std::string value) { return Payload{{"text", std::move(value)}}; }
    static Payload from_canonical(std::string_view canonical);

    const std::map<std::string, std::string>& fields() const noexcept { return fields_; }
    std::optional<std::string> get(const std::string& name) const;
    bool has(const std::string& name) const { return fields_.contains(name); }
    void set(std::string name, std::string value);
    std::string canonical() const;
    bool empty() const noexcept { return fields_.empty(); }

    friend bool operator==(const Payload&, const Payload&) = default;

private:
    std::map<std::string, std::string> fields_;
};

struct Metadata {
    std::string source_id;
    double observed_at = 0.0;
    std::size_t size_hint = 0;
    std::string schema_tag;

    void validate() const;

    friend bool operator==(const Metadata&, const Metadata&) = default;
};

struct Hyperdata {
    double truth = 1.0;
    double confidence = 0.0;
    double detail = 0.5;
    double exposure = 0.0;
    StorageTier tier = StorageTier::Hot;
    std::vector<std::string> complementary;
    std::vector<std::string> refuting;
    std::vector<std::string> missing;
    double created_at = 0.0;
    double updated_at = 0.0;

    /// Throws RangeError if any axis leaves its range or the evidence lists
    /// intersect.
    void check_invariants() const;

    friend bool operator==(const Hyperdata&, const Hyperdata&) = default;
};

struct ActiveDatum {
    std::string id;
    NotionKind kind = NotionKind::Event;
    Payload payload;
    nearness::NearnessKey key;
    Metadata metadata;
    Hyperdata hyperdata;

    bool deleted() const noexcept { return hyperdata.tier == StorageTier::Deleted; }

    friend bool operator==(const ActiveDatum&, const ActiveDatum&) = default;
};

enum class Polarity { Complementary, Refuting };

struct Evidence {
    Polarity polarity = Polarity::Complementary;
    double strength = 0.0;
    std::string source_datum;
};

/// A premise pattern maps field names to literal values or `?variable`
/// bindings. The conclusion template may use only variables bound by some
/// premise.
struct HypothesisRule {
    std::string id;
    std::vector<std::map<std::string, std::string>> premises;
    std::map<std::string, std::string> conclusion;
    NotionKind conclusion_kind = NotionKind::Hypothesis;

    void validate() const;

    friend bool operator==(const HypothesisRule&, const HypothesisRule&) = default;
};

struct TierPolicy {
    double min_hot_confidence = 0.25;
    double hot_age = 3600.0;
    double warm_age = 14400.0;
    double cold_age = 86400.0;
    double delete_truth_at_or_below = -0.9;
    double delete_confidence_at_or_above = 0.9;
};

/// Noisy-OR combination of two confidences.
double noisy_or(double a, double b) noexcept;

ActiveDatum encapsulate(std::string id, Payload payload, NotionKind kind, Metadata metadata,
                        double source_confidence, nearness::NearnessKey key);

bool is_duplicate(const ActiveDatum& a, const ActiveDatum& b);

/// Merges two duplicates into the datum carrying the smaller id.
ActiveDatum resolve(const ActiveDatum& a, const ActiveDatum& b);

ActiveDatum apply_evidence(const ActiveDatum& d, const Evidence& e, double arrival_time);

/// Counts distinct datum ids per value of `group_field`.
ActiveDatum aggregate(std::span<const ActiveDatum> data, const std::string& group_field);

std::optional<ActiveDatum> infer(const HypothesisRule& rule, std::span<const ActiveDatum> candidates);

struct PartialMatch {
    std::vector<std::string> bound_ids;
    std::vector<std::string> gaps;
};

/// Largest consistent partial premise match. `gaps` describes the unmatched
/// patterns and is empty when nothing or everything matched.
PartialMatch partial_match(const HypothesisRule& rule, std::span<const ActiveDatum> candidates);

StorageTier tier_decision(const ActiveDatum& d, double now, const TierPolicy& policy = {});

} // namespace adatm::kernel
