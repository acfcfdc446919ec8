#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedvln/rng.hpp"

namespace fedvln {

using ParamVector = std::vector<double>;

// Canonical segment names used by the navigation agent partition.
inline constexpr const char* kLangEncoderSegment = "lang_encoder";
inline constexpr const char* kTrajEncoderSegment = "traj_encoder";
inline constexpr const char* kDecisionHeadSegment = "decision_head";

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const Segment&, const Segment&) = default;
};

// Named, contiguous, non-overlapping tiling of a flat parameter vector.
class PartitionSpec {
public:
    PartitionSpec() = default;
    // Segments must tile [0, total) exactly in ascending offset order with
    // unique non-empty names; throws ValidationError/DimensionError otherwise.
    explicit PartitionSpec(std::vector<Segment> segments);

    const std::vector<Segment>& segments() const { return segments_; }
    std::size_t total_length() const { return total_; }
    bool has_segment(std::string_view name) const;
    const Segment& segment(std::string_view name) const;

    friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
};

// One client's contribution to a server round.
struct WeightedUpdate {
    int client_id = 0;
    ParamVector delta;               // local minus broadcast, possibly masked
    std::uint64_t sample_count = 0;  // local training-set size, must be > 0
};

// Weighted federated averaging step:
//   out = base + eta * sum_i (n_i / sum_j n_j) * delta_i.
// Updates are summed in ascending client_id order so the result is invariant
// to the order the caller collected them in. Duplicate client ids are a
// ProtocolError; length mismatches a DimensionError; non-finite inputs or an
// empty update set a ValidationError.
ParamVector aggregate(const ParamVector& base, std::vector<WeightedUpdate> updates, double eta);

// Copy of delta with every coordinate outside the named segments zeroed.
// Unknown segment names throw ValidationError.
ParamVector mask_to_segments(const ParamVector& delta, const PartitionSpec& spec,
                             const std::vector<std::string>& shared);

// Uniform draw without replacement of round(rate * N) clients, at least one
// whenever rate > 0 and the pool is non-empty. Returned ids are sorted. The
// draw depends only on the id set and the rng state, not on input order.
std::vector<int> sample_participants(const std::vector<int>& client_ids, double rate,
                                     SeededRng& rng);

// Fraction of coordinates covered by the named segments, in [0, 1].
double shared_fraction(const PartitionSpec& spec, const std::vector<std::string>& shared);

} // namespace fedvln
