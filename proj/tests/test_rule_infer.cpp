#include <doctest.h>

#include <cmath>

#include "ecalab/rule_infer.hpp"
#include "ecalab/rng.hpp"

using namespace ecalab;

namespace {

RuleTable random_rule(SplitMix64& rng, uint32_t radius) {
    return RuleTable(radius, rng.next_bits(static_cast<uint32_t>(RuleTable::table_size(radius))));
}

}  // namespace

TEST_CASE("observe on the all-zero orbit sees exactly one neighborhood") {
    Orbit o = orbit(decode_rule(0, 2), BitVec(8), 2);
    PartialRule partial = observe(o, 2);
    CHECK(partial.observed_count() == 1);
    CHECK(partial.observed(0));
    CHECK(partial.output(0) == false);
    CHECK(partial.observation_count(0) == 8);  // one transition, eight wrapped cells
    CHECK_THROWS_AS(partial.output(1), std::out_of_range);
}

TEST_CASE("observe enumerates the wrapped neighborhoods of 00100") {
    Orbit o = orbit(decode_rule(110, 1), BitVec::from_string("00100"), 2);
    PartialRule partial = observe(o, 1);
    CHECK(partial.observed_count() == 4);
    CHECK(partial.output(0) == false);
    CHECK(partial.output(1) == true);
    CHECK(partial.output(2) == true);
    CHECK(partial.output(4) == false);
    CHECK_FALSE(partial.observed(3));
    CHECK(partial.observation_count(0) == 2);  // cells 0 and 4 both see 000
}

TEST_CASE("a flipped output bit where a neighborhood recurs is inconsistent") {
    Orbit o = orbit(decode_rule(110, 1), BitVec::from_string("00100"), 2);
    // neighborhood 000 occurs at cells 0 and 4; flipping one of the two
    // outputs makes them contradict
    o.states[1].set(4, !o.states[1].get(4));
    CHECK_THROWS_AS(observe(o, 1), InconsistentOrbitError);
}

TEST_CASE("observe validates its inputs") {
    Orbit o = orbit(decode_rule(110, 1), BitVec::from_string("00100"), 1);
    CHECK_THROWS_AS(observe(o, 1), std::invalid_argument);  // needs two states
    Orbit narrow = orbit(decode_rule(110, 1), BitVec::from_string("010"), 3);
    CHECK_THROWS_AS(observe(narrow, 2), std::invalid_argument);  // width < 2r+1
}

TEST_CASE("coverage report arithmetic") {
    PartialRule one(2);
    one.record(0, false);
    CoverageReport r1 = coverage(one);
    CHECK(r1.observed_count == 1);
    CHECK(r1.total == 32);
    CHECK(r1.coverage_fraction == doctest::Approx(1.0 / 32));
    CHECK(r1.consistent_rule_count_log2 == 31);
    CHECK_FALSE(r1.fully_determined);

    PartialRule full(2);
    for (uint64_t n = 0; n < 32; ++n) full.record(n, n % 2 == 0);
    CoverageReport r2 = coverage(full);
    CHECK(r2.fully_determined);
    CHECK(r2.consistent_rule_count_log2 == 0);

    PartialRule half(1);
    for (uint64_t n = 0; n < 4; ++n) half.record(n, true);
    CoverageReport r3 = coverage(half);
    CHECK(r3.coverage_fraction == doctest::Approx(0.5));
    CHECK(r3.consistent_rule_count_log2 == 4);
}

TEST_CASE("complete_rule recovers rule 110 from a covering orbit") {
    // search a few deterministic initial conditions for one whose orbit
    // covers all eight neighborhoods
    bool found = false;
    for (uint64_t s = 0; s < 50 && !found; ++s) {
        SplitMix64 rng(s);
        Orbit o = orbit(decode_rule(110, 1), rng.next_bits(16), 12);
        PartialRule partial = observe(o, 1);
        if (!coverage(partial).fully_determined) continue;
        found = true;
        auto rule = complete_rule(partial);
        REQUIRE(rule.has_value());
        CHECK(*rule == decode_rule(110, 1));
        CHECK(encode_rule(*rule) == 110);
    }
    CHECK(found);
}

TEST_CASE("complete_rule is absent while entries are missing") {
    PartialRule one(2);
    one.record(0, false);
    CHECK_FALSE(complete_rule(one).has_value());
    CHECK_FALSE(complete_rule(PartialRule(1)).has_value());
}

TEST_CASE("soundness: a recovered rule equals the generator") {
    SplitMix64 rng(515);
    int determined = 0;
    for (int i = 0; i < 100; ++i) {
        const uint32_t radius = 1 + static_cast<uint32_t>(rng.next_below(2));
        const uint32_t W = RuleTable::arity(radius) + static_cast<uint32_t>(rng.next_below(24));
        const uint32_t T = 2 + static_cast<uint32_t>(rng.next_below(14));
        RuleTable rule = random_rule(rng, radius);
        Orbit o = orbit(rule, rng.next_bits(W), T);
        auto recovered = complete_rule(observe(o, radius));
        if (recovered) {
            ++determined;
            CHECK(*recovered == rule);
        }
    }
    CHECK(determined > 0);
}

TEST_CASE("prefix coverage never exceeds full-orbit coverage") {
    SplitMix64 rng(77);
    for (int i = 0; i < 20; ++i) {
        RuleTable rule = random_rule(rng, 2);
        Orbit full = orbit(rule, rng.next_bits(20), 12);
        uint64_t prev = 0;
        for (size_t t = 2; t <= full.steps(); ++t) {
            Orbit prefix{std::vector<LatticeState>(full.states.begin(), full.states.begin() + t)};
            const uint64_t seen = observe(prefix, 2).observed_count();
            CHECK(seen >= prev);
            prev = seen;
        }
    }
}

TEST_CASE("conflict detection fires on any contradictory record") {
    SplitMix64 rng(13);
    Orbit o = orbit(random_rule(rng, 1), rng.next_bits(12), 6);
    PartialRule partial = observe(o, 1);
    for (uint64_t n = 0; n < partial.table_size(); ++n)
        if (partial.observed(n)) {
            PartialRule copy = partial;
            CHECK_THROWS_AS(copy.record(n, !partial.output(n)), InconsistentOrbitError);
        }
}

TEST_CASE("tmin_estimate evaluates the coupon-collector formula") {
    CHECK(std::abs(tmin_estimate(2, 20) - 6.47) < 0.01);
    CHECK(tmin_estimate(1, 8) == doctest::Approx(2.657).epsilon(1e-3));
    CHECK(tmin_estimate(2, 32) == doctest::Approx(4.043).epsilon(1e-3));
    CHECK_THROWS_AS(tmin_estimate(2, 4), std::invalid_argument);
}

TEST_CASE("consistent_rule_count_log2 counts rules exactly at radius 1") {
    SplitMix64 rng(2024);
    for (int i = 0; i < 10; ++i) {
        const uint32_t W = 3 + static_cast<uint32_t>(rng.next_below(10));
        const uint32_t T = 2 + static_cast<uint32_t>(rng.next_below(6));
        RuleTable rule = random_rule(rng, 1);
        LatticeState init = rng.next_bits(W);
        Orbit o = orbit(rule, init, T);
        CoverageReport rep = coverage(observe(o, 1));

        uint64_t consistent = 0;
        for (uint64_t num = 0; num < 256; ++num) {
            Orbit candidate = orbit(decode_rule(num, 1), init, T);
            bool same = true;
            for (uint32_t t = 0; t < T && same; ++t) same = candidate.states[t] == o.states[t];
            if (same) ++consistent;
        }
        CHECK(consistent == uint64_t{1} << rep.consistent_rule_count_log2);
    }
}

TEST_CASE("coverage_curve is deterministic and bounded") {
    auto curve = coverage_curve(2, 20, 10, 200, 42);
    auto again = coverage_curve(2, 20, 10, 200, 42);
    REQUIRE(curve.size() == 9);
    for (size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].t == again[i].t);
        CHECK(curve[i].mean_coverage == again[i].mean_coverage);
        CHECK(curve[i].frac_determined == again[i].frac_determined);
        if (i > 0) {
            CHECK(curve[i].mean_coverage >= curve[i - 1].mean_coverage);
            CHECK(curve[i].frac_determined >= curve[i - 1].frac_determined);
        }
    }
    // one transition yields at most W distinct neighborhoods
    CHECK(curve[0].mean_coverage <= std::min(1.0, 20.0 / 32.0));
    CHECK_THROWS_AS(coverage_curve(2, 20, 1, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(coverage_curve(2, 20, 10, 0, 0), std::invalid_argument);
}
