#include "fedvln/param_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedvln/errors.hpp"

namespace fedvln {

PartitionSpec::PartitionSpec(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ValidationError("partition: no segments");
    std::size_t expect = 0;
    std::set<std::string, std::less<>> names;
    for (const auto& s : segments_) {
        if (s.name.empty()) throw ValidationError("partition: empty segment name");
        if (!names.insert(s.name).second)
            throw ValidationError("partition: duplicate segment name '" + s.name + "'");
        if (s.offset != expect)
            throw DimensionError("partition: segment '" + s.name + "' leaves a gap or overlaps");
        if (s.length == 0) throw DimensionError("partition: segment '" + s.name + "' is empty");
        expect += s.length;
    }
    total_ = expect;
}

bool PartitionSpec::has_segment(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return true;
    return false;
}

const Segment& PartitionSpec::segment(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return s;
    throw ValidationError("partition: unknown segment '" + std::string(name) + "'");
}

namespace {

void require_finite(const ParamVector& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite value");
}

} // namespace

ParamVector aggregate(const ParamVector& base, std::vector<WeightedUpdate> updates, double eta) {
    if (updates.empty()) throw ValidationError("aggregate: no updates");
    if (!std::isfinite(eta)) throw ValidationError("aggregate: non-finite eta");
    require_finite(base, "aggregate base");

    std::sort(updates.begin(), updates.end(),
              [](const WeightedUpdate& a, const WeightedUpdate& b) { return a.client_id < b.client_id; });

    std::uint64_t total = 0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const auto& u = updates[i];
        if (i > 0 && u.client_id == updates[i - 1].client_id)
            throw ProtocolError("aggregate: duplicate update from client " +
                                std::to_string(u.client_id));
        if (u.sample_count == 0)
            throw ValidationError("aggregate: client " + std::to_string(u.client_id) +
                                  " has zero samples");
        if (u.delta.size() != base.size())
            throw DimensionError("aggregate: delta length " + std::to_string(u.delta.size()) +
                                 " != base length " + std::to_string(base.size()));
        require_finite(u.delta, "aggregate delta");
        total += u.sample_count;
    }

    ParamVector acc(base.size(), 0.0);
    for (const auto& u : updates) {
        const double w = static_cast<double>(u.sample_count) / static_cast<double>(total);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * u.delta[k];
    }

    ParamVector out(base.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = base[k] + eta * acc[k];
    require_finite(out, "aggregate result");
    return out;
}

ParamVector mask_to_segments(const ParamVector& delta, const PartitionSpec& spec,
                             const std::vector<std::string>& shared) {
    if (delta.size() != spec.total_length())
        throw DimensionError("mask_to_segments: delta length " + std::to_string(delta.size()) +
                             " != partition length " + std::to_string(spec.total_length()));
    ParamVector out(delta.size(), 0.0);
    for (const auto& name : shared) {
        const Segment& s = spec.segment(name); // throws on unknown names
        std::copy(delta.begin() + static_cast<std::ptrdiff_t>(s.offset),
                  delta.begin() + static_cast<std::ptrdiff_t>(s.offset + s.length),
                  out.begin() + static_cast<std::ptrdiff_t>(s.offset));
    }
    return out;
}

std::vector<int> sample_participants(const std::vector<int>& client_ids, double rate,
                                     SeededRng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0))
        throw ValidationError("sample_participants: rate must lie in [0, 1]");
    std::vector<int> pool(client_ids);
    std::sort(pool.begin(), pool.end());
    if (std::adjacent_find(pool.begin(), pool.end()) != pool.end())
        throw ProtocolError("sample_participants: duplicate client id");
    if (rate == 0.0) return {};
    if (pool.empty()) throw ProtocolError("sample_participants: empty pool with rate > 0");

    const auto n = pool.size();
    auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
    k = std::max<std::size_t>(1, std::min(k, n));

    // Partial Fisher-Yates over the sorted pool: first k slots become the draw.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

double shared_fraction(const PartitionSpec& spec, const std::vector<std::string>& shared) {
    std::set<std::string_view> seen;
    std::size_t covered = 0;
    for (const auto& name : shared) {
        const Segment& s = spec.segment(name);
        if (seen.insert(s.name).second) covered += s.length;
    }
    return static_cast<double>(covered) / static_cast<double>(spec.total_length());
}

} // namespace fedvln
