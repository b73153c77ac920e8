#include <doctest.h>

#include <vector>

#include "ecalab/eca.hpp"
#include "ecalab/rng.hpp"

using namespace ecalab;

namespace {

RuleTable random_rule(SplitMix64& rng, uint32_t radius) {
    return RuleTable(radius, rng.next_bits(static_cast<uint32_t>(RuleTable::table_size(radius))));
}

bool binomial_odd(uint32_t n, uint32_t k) {
    return (k & (n - k)) == 0;  // Kummer: no borrow in base-2 subtraction
}

}  // namespace

TEST_CASE("decode_rule matches binary expansion") {
    RuleTable r110 = decode_rule(110, 1);
    const std::vector<int> expected = {0, 1, 1, 1, 0, 1, 1, 0};
    for (uint64_t n = 0; n < 8; ++n) CHECK(r110.output(n) == (expected[n] == 1));

    RuleTable zero = decode_rule(0, 2);
    RuleTable ones = decode_rule((uint64_t{1} << 32) - 1, 2);
    for (uint64_t n = 0; n < 32; ++n) {
        CHECK_FALSE(zero.output(n));
        CHECK(ones.output(n));
    }
}

TEST_CASE("decode_rule rejects out-of-range rule numbers") {
    CHECK_THROWS_AS(decode_rule(256, 1), std::out_of_range);
    CHECK_THROWS_AS(decode_rule(uint64_t{1} << 32, 2), std::out_of_range);
    CHECK_NOTHROW(decode_rule(255, 1));
    CHECK_NOTHROW(decode_rule((uint64_t{1} << 32) - 1, 2));
}

TEST_CASE("encode_rule inverts decode_rule") {
    CHECK(encode_rule(decode_rule(110, 1)) == 110);
    CHECK(encode_rule(decode_rule(0, 2)) == 0);

    SplitMix64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const uint32_t r = 1 + i % 2;
        const uint64_t bound = r == 1 ? 256 : (uint64_t{1} << 32);
        const uint64_t number = rng.next_below(bound);
        CHECK(encode_rule(decode_rule(number, r)) == number);
        CHECK(decode_rule(encode_rule(random_rule(rng, r)), r).outputs().size() ==
              RuleTable::table_size(r));
    }
}

TEST_CASE("local_step looks up the big-endian neighborhood index") {
    RuleTable r110 = decode_rule(110, 1);
    const uint8_t n110[] = {1, 1, 0};
    const uint8_t n111[] = {1, 1, 1};
    CHECK(local_step(r110, n110) == true);   // index 6
    CHECK(local_step(r110, n111) == false);  // index 7

    // rule 90 is XOR of the outer neighbors
    RuleTable r90 = decode_rule(90, 1);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const uint8_t nb[] = {static_cast<uint8_t>(a), static_cast<uint8_t>(b),
                                      static_cast<uint8_t>(c)};
                CHECK(local_step(r90, nb) == ((a ^ c) == 1));
            }

    const uint8_t too_short[] = {1, 0};
    CHECK_THROWS_AS(local_step(r110, too_short), std::invalid_argument);
}

TEST_CASE("global_step fixtures") {
    RuleTable r110 = decode_rule(110, 1);
    CHECK(global_step(r110, BitVec::from_string("00100")).to_string() == "01100");

    // quiescent state: outputs[0] = 0 keeps the zero lattice fixed
    CHECK(global_step(r110, BitVec(9)).to_string() == "000000000");

    RuleTable r90 = decode_rule(90, 1);
    CHECK(global_step(r90, BitVec::from_string("0001000")).to_string() == "0010100");

    CHECK_THROWS_AS(global_step(decode_rule(0, 2), BitVec(4)), std::invalid_argument);
}

TEST_CASE("orbit basics") {
    RuleTable r110 = decode_rule(110, 1);
    LatticeState init = BitVec::from_string("01011");
    Orbit one = orbit(r110, init, 1);
    REQUIRE(one.steps() == 1);
    CHECK(one.states[0] == init);
    CHECK_THROWS_AS(orbit(r110, init, 0), std::out_of_range);

    SplitMix64 rng(3);
    Orbit dead = orbit(decode_rule(0, 2), rng.next_bits(16), 20);
    for (size_t t = 1; t < 20; ++t) CHECK(dead.states[t].count() == 0);
}

TEST_CASE("rule 90 single seed reproduces binomial parity") {
    const uint32_t W = 33, center = 16, T = 8;
    LatticeState seed(W);
    seed.set(center, true);
    Orbit o = orbit(decode_rule(90, 1), seed, T);
    for (uint32_t t = 0; t < T; ++t) {
        for (int j = -static_cast<int>(center); j <= static_cast<int>(center); ++j) {
            bool expect = false;
            if (std::abs(j) <= static_cast<int>(t) && (static_cast<int>(t) + j) % 2 == 0)
                expect = binomial_odd(t, static_cast<uint32_t>((static_cast<int>(t) + j) / 2));
            CHECK(o.states[t].get(static_cast<uint32_t>(center + j)) == expect);
        }
    }
}

TEST_CASE("packed step matches the naive reference") {
    SplitMix64 rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const uint32_t radius = 1 + static_cast<uint32_t>(rng.next_below(2));
        const uint32_t min_w = RuleTable::arity(radius);
        const uint32_t W = min_w + static_cast<uint32_t>(rng.next_below(65 - min_w));
        RuleTable rule = random_rule(rng, radius);
        LatticeState x = rng.next_bits(W);
        CHECK(global_step(rule, x) == global_step_reference(rule, x));
    }
    // multi-word lattices exercise the general rotate path
    for (int i = 0; i < 50; ++i) {
        const uint32_t radius = 1 + static_cast<uint32_t>(rng.next_below(3));
        const uint32_t W = 65 + static_cast<uint32_t>(rng.next_below(150));
        RuleTable rule = random_rule(rng, radius);
        LatticeState x = rng.next_bits(W);
        CHECK(global_step(rule, x) == global_step_reference(rule, x));
    }
}

TEST_CASE("global_step is shift equivariant") {
    SplitMix64 rng(99);
    for (int i = 0; i < 20; ++i) {
        const uint32_t radius = 1 + static_cast<uint32_t>(rng.next_below(2));
        const uint32_t W = 8 + static_cast<uint32_t>(rng.next_below(40));
        RuleTable rule = random_rule(rng, radius);
        LatticeState x = rng.next_bits(W);
        LatticeState stepped = global_step(rule, x);
        for (uint32_t s = 0; s < W; ++s)
            CHECK(global_step(rule, x.rotated(s)) == stepped.rotated(s));
    }
}

TEST_CASE("complement-conjugate rule mirrors the dynamics") {
    SplitMix64 rng(7);
    for (int i = 0; i < 30; ++i) {
        const uint32_t radius = 1 + static_cast<uint32_t>(rng.next_below(2));
        const uint64_t size = RuleTable::table_size(radius);
        RuleTable rule = random_rule(rng, radius);

        BitVec conj(static_cast<uint32_t>(size));
        for (uint64_t n = 0; n < size; ++n)
            conj.set(static_cast<uint32_t>(n), !rule.output(size - 1 - n));
        RuleTable mirrored(radius, conj);

        const uint32_t W = RuleTable::arity(radius) + static_cast<uint32_t>(rng.next_below(30));
        LatticeState x = rng.next_bits(W);
        BitVec not_x(W);
        for (uint32_t w = 0; w < W; ++w) not_x.set(w, !x.get(w));

        LatticeState lhs = global_step(mirrored, not_x);
        LatticeState rhs = global_step(rule, x);
        for (uint32_t w = 0; w < W; ++w) CHECK(lhs.get(w) == !rhs.get(w));
    }
}

TEST_CASE("render and parse_orbit round trip") {
    SplitMix64 rng(21);
    Orbit o = orbit(random_rule(rng, 2), rng.next_bits(20), 6);
    Orbit back = parse_orbit(render(o));
    REQUIRE(back.steps() == o.steps());
    for (size_t t = 0; t < o.steps(); ++t) CHECK(back.states[t] == o.states[t]);

    CHECK_THROWS_AS(parse_orbit("0101\n011"), std::invalid_argument);
    CHECK_THROWS_AS(parse_orbit("01x1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_orbit("\n\n"), std::invalid_argument);
}

TEST_CASE("BitVec rotation fast and general paths agree") {
    SplitMix64 rng(31);
    for (uint32_t W : {5u, 31u, 64u, 65u, 100u, 129u}) {
        BitVec v = rng.next_bits(W);
        for (int64_t s : {0l, 1l, -1l, 7l, static_cast<long>(W - 1), static_cast<long>(W), 200l}) {
            BitVec rot = v.rotated(s);
            for (uint32_t i = 0; i < W; ++i) {
                const uint32_t src = static_cast<uint32_t>(((i + s) % W + W) % W);
                CHECK(rot.get(i) == v.get(src));
            }
        }
    }
}
