#include "vaetpp/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vaetpp/errors.hpp"

namespace vaetpp {

EventSequence::EventSequence(std::string seq_id, int num_types, double horizon, std::vector<Event> events)
    : id_(std::move(seq_id)), num_types_(num_types), horizon_(horizon), events_(std::move(events)) {
    if (num_types_ <= 0) {
        throw ValidationError("sequence '" + id_ + "': number of types must be positive");
    }
    if (!std::isfinite(horizon_) || horizon_ < 0.0) {
        throw ValidationError("sequence '" + id_ + "': horizon must be finite and non-negative");
    }
    for (const auto& e : events_) {
        if (!std::isfinite(e.t) || e.t < 0.0) {
            throw ValidationError("sequence '" + id_ + "': negative or non-finite timestamp");
        }
        if (e.t > horizon_) {
            throw ValidationError("sequence '" + id_ + "': event beyond horizon");
        }
        if (e.type < 0 || e.type >= num_types_) {
            throw ValidationError("sequence '" + id_ + "': type id " + std::to_string(e.type) +
                                  " outside [0, " + std::to_string(num_types_) + ")");
        }
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventSequence EventSequence::filter_types(const std::vector<int>& keep) const {
    std::vector<Event> out;
    for (const auto& e : events_) {
        if (std::find(keep.begin(), keep.end(), e.type) != keep.end()) {
            out.push_back(e);
        }
    }
    return EventSequence(id_, num_types_, horizon_, std::move(out));
}

EventSequence EventSequence::prefix_before(double t) const {
    std::vector<Event> out;
    for (const auto& e : events_) {
        if (e.t < t) {
            out.push_back(e);
        }
    }
    return EventSequence(id_, num_types_, horizon_, std::move(out));
}

SubIntervalPartition::SubIntervalPartition(double horizon, int num_intervals) {
    if (num_intervals <= 0) {
        throw ValidationError("number of sub-intervals must be positive");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ValidationError("partition requires a positive finite horizon");
    }
    width_ = horizon / num_intervals;
    boundaries_.resize(num_intervals + 1);
    for (int k = 0; k < num_intervals; ++k) {
        boundaries_[k] = horizon * static_cast<double>(k) / num_intervals;
    }
    boundaries_[num_intervals] = horizon;
}

int SubIntervalPartition::interval_of(double t) const {
    const int last = size() - 1;
    if (t < 0.0 || t > boundaries_.back()) {
        throw ValidationError("time " + std::to_string(t) + " outside the partition horizon");
    }
    int k = std::clamp(static_cast<int>(std::floor(t / width_)), 0, last);
    // floor() can land one off near a boundary; settle against the stored edges.
    while (k < last && t >= boundaries_[k + 1]) {
        ++k;
    }
    while (k > 0 && t < boundaries_[k]) {
        --k;
    }
    return k;
}

PartitionedSequence partition(const EventSequence& seq, int num_intervals) {
    PartitionedSequence out{SubIntervalPartition(seq.horizon(), num_intervals), {}};
    out.members.resize(num_intervals);
    const auto& events = seq.events();
    for (std::size_t i = 0; i < events.size(); ++i) {
        out.members[out.partition.interval_of(events[i].t)].push_back(i);
    }
    return out;
}

std::size_t TypeView::total() const {
    std::size_t n = 0;
    for (const auto& ts : times) {
        n += ts.size();
    }
    return n;
}

TypeView type_view(const EventSequence& seq) {
    TypeView view;
    view.times.resize(seq.num_types());
    view.gaps.resize(seq.num_types());
    for (const auto& e : seq.events()) {
        auto& ts = view.times[e.type];
        const double prev = ts.empty() ? 0.0 : ts.back();
        view.gaps[e.type].push_back(std::max(e.t - prev, kMinInterEventTime));
        ts.push_back(e.t);
    }
    return view;
}

std::vector<double> per_event_gaps(const EventSequence& seq) {
    std::vector<double> last(seq.num_types(), 0.0);
    std::vector<double> gaps;
    gaps.reserve(seq.size());
    for (const auto& e : seq.events()) {
        gaps.push_back(std::max(e.t - last[e.type], kMinInterEventTime));
        last[e.type] = e.t;
    }
    return gaps;
}

const char* to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val" || s == "validation") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + s + "' (expected train, val or test)");
}

int Dataset::num_types() const {
    int u = 0;
    for (const auto& s : sequences) {
        u = std::max(u, s.num_types());
    }
    return u;
}

std::vector<const EventSequence*> Dataset::select(Split s) const {
    if (splits.size() != sequences.size()) {
        throw ValidationError("dataset has not been split");
    }
    std::vector<const EventSequence*> out;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        if (splits[i] == s) {
            out.push_back(&sequences[i]);
        }
    }
    return out;
}

std::vector<EventSequence> Dataset::copy_split(Split s) const {
    std::vector<EventSequence> out;
    for (const auto* p : select(s)) {
        out.push_back(*p);
    }
    return out;
}

Dataset split_dataset(Dataset ds, SplitFractions f, std::uint64_t seed) {
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
        throw ValidationError("split fractions must be non-negative and sum to 1");
    }
    const std::size_t n = ds.sequences.size();
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
    const auto n_val = static_cast<std::size_t>(std::llround(f.val * n));
    if (n_train + n_val > n) {
        throw ValidationError("not enough sequences for the requested split");
    }
    const std::size_t n_test = n - n_train - n_val;
    if ((f.train > 0 && n_train == 0) || (f.val > 0 && n_val == 0) || (f.test > 0 && n_test == 0)) {
        throw ValidationError("too few sequences (" + std::to_string(n) + ") for the requested split");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    ds.splits.assign(n, Split::test);
    for (std::size_t r = 0; r < n; ++r) {
        ds.splits[order[r]] = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
    }
    return ds;
}

} // namespace vaetpp
