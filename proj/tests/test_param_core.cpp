#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fedvln/errors.hpp"
#include "fedvln/param_core.hpp"
#include "fedvln/rng.hpp"

using namespace fedvln;

namespace {

// Independent weighted-sum oracle, accumulating in input order.
ParamVector slow_aggregate(const ParamVector& base, const std::vector<WeightedUpdate>& updates,
                           double eta) {
    double total = 0.0;
    for (const auto& u : updates) total += static_cast<double>(u.sample_count);
    ParamVector out = base;
    for (const auto& u : updates)
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] += eta * (static_cast<double>(u.sample_count) / total) * u.delta[k];
    return out;
}

bool same_bits(const ParamVector& a, const ParamVector& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

PartitionSpec abc_spec() {
    return PartitionSpec{{{"a", 0, 2}, {"b", 2, 3}, {"c", 5, 1}}};
}

} // namespace

TEST_CASE("aggregate matches hand-computed weighted sums") {
    CHECK(aggregate({0, 0}, {{0, {1, 1}, 1}}, 1.0) == ParamVector{1, 1});
    // weights 0.25 and 0.75: 0.25*1 + 0.75*5 = 4 on both coordinates
    CHECK(aggregate({0, 0}, {{0, {1, 1}, 1}, {1, {5, 5}, 3}}, 1.0) == ParamVector{4, 4});
    const ParamVector base{3.25, -1.5};
    CHECK(same_bits(aggregate(base, {{0, {7, 9}, 2}, {1, {-4, 2}, 5}}, 0.0), base));
}

TEST_CASE("aggregate agrees with a brute-force oracle on fuzzed cases") {
    SeededRng rng(2024);
    for (int it = 0; it < 200; ++it) {
        const std::size_t len = 1 + rng.next_below(16);
        const int clients = 1 + static_cast<int>(rng.next_below(6));
        ParamVector base(len);
        for (auto& v : base) v = rng.next_double() * 4 - 2;
        std::vector<WeightedUpdate> ups;
        for (int c = 0; c < clients; ++c) {
            ParamVector d(len);
            for (auto& v : d) v = rng.next_double() * 2 - 1;
            ups.push_back({c, std::move(d), 1 + rng.next_below(9)});
        }
        const double eta = rng.next_double() * 2;
        const ParamVector got = aggregate(base, ups, eta);
        const ParamVector want = slow_aggregate(base, ups, eta);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < len; ++k)
            CHECK(near(got[k], want[k], 1e-12));
    }
}

TEST_CASE("aggregate is linear in eta") {
    const ParamVector base{1, 2, 3};
    const std::vector<WeightedUpdate> ups{{0, {0.5, -1, 2}, 2}, {1, {3, 0, -0.25}, 1}};
    const ParamVector at1 = aggregate(base, ups, 1.0);
    for (double eta : {0.0, 0.5, 1.0, 2.0}) {
        const ParamVector got = aggregate(base, ups, eta);
        for (std::size_t k = 0; k < base.size(); ++k)
            CHECK(near(got[k], base[k] + eta * (at1[k] - base[k]), 1e-12));
    }
}

TEST_CASE("identical deltas aggregate to base + eta * delta for any weights") {
    const ParamVector base{0, 10};
    const ParamVector delta{2, -3};
    const ParamVector got =
        aggregate(base, {{0, delta, 1}, {1, delta, 7}, {2, delta, 100}}, 0.5);
    CHECK(near(got[0], 1.0, 1e-12));
    CHECK(near(got[1], 8.5, 1e-12));
}

TEST_CASE("aggregate output is invariant to update order, bit for bit") {
    SeededRng rng(11);
    ParamVector base(9);
    for (auto& v : base) v = rng.next_double();
    std::vector<WeightedUpdate> ups;
    for (int c = 0; c < 5; ++c) {
        ParamVector d(9);
        for (auto& v : d) v = rng.next_double() - 0.5;
        ups.push_back({c, std::move(d), 1 + rng.next_below(4)});
    }
    const ParamVector forward = aggregate(base, ups, 0.7);
    std::reverse(ups.begin(), ups.end());
    CHECK(same_bits(forward, aggregate(base, ups, 0.7)));
    std::swap(ups[0], ups[3]);
    CHECK(same_bits(forward, aggregate(base, ups, 0.7)));
}

TEST_CASE("aggregate rejects malformed update sets") {
    const ParamVector base{0, 0};
    CHECK_THROWS_AS(aggregate(base, {}, 1.0), ValidationError);
    CHECK_THROWS_AS(aggregate(base, {{0, {1, 1}, 1}, {0, {2, 2}, 1}}, 1.0), ProtocolError);
    CHECK_THROWS_AS(aggregate(base, {{0, {1, 1}, 0}}, 1.0), ValidationError);
    CHECK_THROWS_AS(aggregate(base, {{0, {1, 2, 3}, 1}}, 1.0), DimensionError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(aggregate(base, {{0, {nan, 0}, 1}}, 1.0), ValidationError);
    CHECK_THROWS_AS(aggregate({nan, 0}, {{0, {1, 1}, 1}}, 1.0), ValidationError);
}

TEST_CASE("partition specs must tile the vector exactly") {
    CHECK(abc_spec().total_length() == 6);
    CHECK(abc_spec().segment("b").offset == 2);
    CHECK(abc_spec().has_segment("c"));
    CHECK_FALSE(abc_spec().has_segment("d"));
    CHECK_THROWS_AS((PartitionSpec{{{"a", 0, 2}, {"b", 3, 1}}}), DimensionError);  // gap
    CHECK_THROWS_AS((PartitionSpec{{{"a", 0, 2}, {"b", 1, 2}}}), DimensionError);  // overlap
    CHECK_THROWS_AS((PartitionSpec{{{"a", 0, 0}}}), DimensionError);               // empty
    CHECK_THROWS_AS((PartitionSpec{{{"a", 0, 2}, {"a", 2, 2}}}), ValidationError); // dup name
    CHECK_THROWS_AS(abc_spec().segment("nope"), ValidationError);
}

TEST_CASE("mask_to_segments keeps shared coordinates and zeroes the rest") {
    const PartitionSpec ab{{{"a", 0, 2}, {"b", 2, 2}}};
    const ParamVector delta{1, 2, 3, 4};
    CHECK(mask_to_segments(delta, ab, {"a"}) == ParamVector{1, 2, 0, 0});
    CHECK(mask_to_segments(delta, ab, {"a", "b"}) == delta);
    CHECK(mask_to_segments(delta, ab, {}) == ParamVector{0, 0, 0, 0});
    CHECK_THROWS_AS(mask_to_segments(delta, ab, {"z"}), ValidationError);
    // idempotence
    const ParamVector once = mask_to_segments(delta, ab, {"b"});
    CHECK(mask_to_segments(once, ab, {"b"}) == once);
}

TEST_CASE("sample_participants draws k = max(1, round(rate * n)) sorted distinct ids") {
    std::vector<int> ids(10);
    for (int i = 0; i < 10; ++i) ids[i] = i + 1;

    SeededRng rng(3);
    const std::vector<int> two = sample_participants(ids, 0.2, rng);
    CHECK(two.size() == 2);
    CHECK(std::is_sorted(two.begin(), two.end()));
    for (int id : two) CHECK((id >= 1 && id <= 10));

    SeededRng r1(3);
    CHECK(sample_participants(ids, 1.0, r1) == ids);
    SeededRng r0(3);
    CHECK(sample_participants(ids, 0.0, r0).empty());

    // tiny positive rate still selects one participant
    SeededRng r2(3);
    CHECK(sample_participants(ids, 0.01, r2).size() == 1);

    SeededRng r3(3);
    CHECK_THROWS_AS(sample_participants({}, 0.5, r3), ProtocolError);
    SeededRng r4(3);
    CHECK_THROWS_AS(sample_participants({1, 1}, 0.5, r4), ProtocolError);
    SeededRng r5(3);
    CHECK_THROWS_AS(sample_participants(ids, 1.5, r5), ValidationError);
}

TEST_CASE("sample_participants ignores input order and is unbiased") {
    std::vector<int> ids{4, 9, 1, 7, 3};
    std::vector<int> sorted_ids{1, 3, 4, 7, 9};
    SeededRng a(21), b(21);
    CHECK(sample_participants(ids, 0.6, a) == sample_participants(sorted_ids, 0.6, b));

    std::vector<int> count(10, 0);
    std::vector<int> pool(10);
    for (int i = 0; i < 10; ++i) pool[i] = i;
    SeededRng rng(77);
    const int trials = 10000;
    for (int t = 0; t < trials; ++t)
        for (int id : sample_participants(pool, 0.5, rng)) ++count[id];
    for (int id = 0; id < 10; ++id) {
        const double freq = static_cast<double>(count[id]) / trials;
        CHECK(near(freq, 0.5, 0.03));
    }
}

TEST_CASE("shared_fraction is the covered length share") {
    const PartitionSpec ab{{{"a", 0, 3}, {"b", 3, 1}}};
    CHECK(shared_fraction(ab, {"a"}) == doctest::Approx(0.75));
    CHECK(shared_fraction(ab, {"a", "b"}) == 1.0);
    CHECK(shared_fraction(ab, {}) == 0.0);
    CHECK(shared_fraction(ab, {"a", "a"}) == doctest::Approx(0.75)); // names deduplicated
    CHECK_THROWS_AS(shared_fraction(ab, {"z"}), ValidationError);
}
