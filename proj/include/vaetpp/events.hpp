#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vaetpp {

/// Gap substituted for zero inter-event times so log-normal densities stay finite.
inline constexpr double kMinInterEventTime = 1e-8;

struct Event {
    double t = 0.0;
    int type = 0;
    std::optional<int> mark;
};

/// A marked event sequence on the horizon [0, horizon].
///
/// Construction validates and sorts; the object is immutable afterwards.
class EventSequence {
public:
    EventSequence() = default;
    EventSequence(std::string seq_id, int num_types, double horizon, std::vector<Event> events);

    const std::string& id() const noexcept { return id_; }
    int num_types() const noexcept { return num_types_; }
    double horizon() const noexcept { return horizon_; }
    const std::vector<Event>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    /// Copy restricted to events whose type is in `keep` (horizon and U unchanged).
    EventSequence filter_types(const std::vector<int>& keep) const;
    /// Copy with every event strictly before `t`.
    EventSequence prefix_before(double t) const;

private:
    std::string id_;
    int num_types_ = 0;
    double horizon_ = 0.0;
    std::vector<Event> events_;
};

/// K equal-width intervals covering [0, T]. Intervals are half-open except the last.
class SubIntervalPartition {
public:
    SubIntervalPartition(double horizon, int num_intervals);

    int size() const noexcept { return static_cast<int>(boundaries_.size()) - 1; }
    const std::vector<double>& boundaries() const noexcept { return boundaries_; }
    double width() const noexcept { return width_; }
    double lower(int k) const { return boundaries_.at(k); }
    double upper(int k) const { return boundaries_.at(k + 1); }

    /// 0-based interval containing t; t == T maps to the last interval.
    int interval_of(double t) const;

private:
    std::vector<double> boundaries_;
    double width_;
};

/// Partition plus per-interval event index sets s^k (indices into seq.events()).
struct PartitionedSequence {
    SubIntervalPartition partition;
    std::vector<std::vector<std::size_t>> members;
};

PartitionedSequence partition(const EventSequence& seq, int num_intervals);

/// Per-type timestamps and inter-event times. The first gap of each type is
/// measured from t = 0; zero gaps are replaced by kMinInterEventTime.
struct TypeView {
    std::vector<std::vector<double>> times;
    std::vector<std::vector<double>> gaps;

    std::size_t count(int type) const { return times.at(type).size(); }
    std::size_t total() const;
};

TypeView type_view(const EventSequence& seq);

/// Per-event gap to the previous event of the same type, aligned with seq.events().
std::vector<double> per_event_gaps(const EventSequence& seq);

enum class Split : std::uint8_t { train, val, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct Dataset {
    std::vector<EventSequence> sequences;
    std::vector<Split> splits;  // empty until split_dataset runs

    int num_types() const;
    std::vector<const EventSequence*> select(Split s) const;
    std::vector<EventSequence> copy_split(Split s) const;
};

/// Sequence-level split, deterministic in `seed`. Sizes are round(f * n) for
/// train and val, the remainder goes to test.
Dataset split_dataset(Dataset ds, SplitFractions fractions, std::uint64_t seed);

} // namespace vaetpp
