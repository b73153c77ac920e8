#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecalab/bitvec.hpp"

namespace ecalab {

// Truth table of a local rule: entry n is the output for the neighborhood
// whose 2r+1 bits, read left to right, form the big-endian integer n.
class RuleTable {
public:
    RuleTable(uint32_t radius, BitVec outputs);

    static uint32_t arity(uint32_t radius) { return 2 * radius + 1; }
    static uint64_t table_size(uint32_t radius);  // 2^(2r+1)

    uint32_t radius() const { return radius_; }
    uint64_t size() const { return outputs_.size(); }
    bool output(uint64_t n) const { return outputs_.get(static_cast<uint32_t>(n)); }
    const BitVec& outputs() const { return outputs_; }

    bool operator==(const RuleTable&) const = default;

private:
    uint32_t radius_;
    BitVec outputs_;
};

// A lattice configuration is just its W bits; cell w is bit w.
using LatticeState = BitVec;

struct Orbit {
    std::vector<LatticeState> states;

    size_t steps() const { return states.size(); }
    uint32_t width() const { return states.empty() ? 0 : states.front().size(); }
};

// Wolfram-style numbering generalized to any radius: output(n) = bit n of the
// rule number. Only rule numbers representable in 64 bits are supported, which
// covers every radius-1 (8-bit) and radius-2 (32-bit) rule.
RuleTable decode_rule(uint64_t rule_number, uint32_t radius);
uint64_t encode_rule(const RuleTable& rule);

// Output of the rule for one neighborhood (cells left to right).
bool local_step(const RuleTable& rule, std::span<const uint8_t> neighborhood);

// One synchronous update of the whole lattice, periodic boundary.
// global_step is the packed word-parallel path; global_step_reference is the
// independently written per-cell path kept for oracle-equivalence testing.
LatticeState global_step(const RuleTable& rule, const LatticeState& state);
LatticeState global_step_reference(const RuleTable& rule, const LatticeState& state);

// T consecutive states starting from `initial` (so T-1 rule applications).
Orbit orbit(const RuleTable& rule, const LatticeState& initial, uint32_t T);

// Debug text rendering: one state per line, '0'/'1' characters, cell 0 first.
std::string render(const Orbit& o);
Orbit parse_orbit(std::string_view text);

}  // namespace ecalab
