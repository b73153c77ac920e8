#include "ecalab/eca.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

namespace ecalab {

RuleTable::RuleTable(uint32_t radius, BitVec outputs) : radius_(radius), outputs_(std::move(outputs)) {
    if (radius_ < 1 || radius_ > 12)
        throw std::invalid_argument("RuleTable: radius must be in [1, 12], got " +
                                    std::to_string(radius_));
    if (outputs_.size() != table_size(radius_))
        throw std::invalid_argument("RuleTable: expected " + std::to_string(table_size(radius_)) +
                                    " outputs for radius " + std::to_string(radius_) + ", got " +
                                    std::to_string(outputs_.size()));
}

uint64_t RuleTable::table_size(uint32_t radius) {
    return uint64_t{1} << arity(radius);
}

RuleTable decode_rule(uint64_t rule_number, uint32_t radius) {
    const uint64_t bits = RuleTable::table_size(radius);
    if (bits < 64 && rule_number >= (uint64_t{1} << bits))
        throw std::out_of_range("decode_rule: rule number " + std::to_string(rule_number) +
                                " out of range for radius " + std::to_string(radius));
    BitVec outputs(static_cast<uint32_t>(bits));
    outputs.set_word(0, rule_number);
    return RuleTable(radius, outputs);
}

uint64_t encode_rule(const RuleTable& rule) {
    const BitVec& o = rule.outputs();
    for (size_t j = 1; j < o.word_count(); ++j)
        if (o.word(j) != 0)
            throw std::out_of_range("encode_rule: rule table does not fit a 64-bit rule number");
    return o.word(0);
}

bool local_step(const RuleTable& rule, std::span<const uint8_t> neighborhood) {
    if (neighborhood.size() != RuleTable::arity(rule.radius()))
        throw std::invalid_argument("local_step: expected " +
                                    std::to_string(RuleTable::arity(rule.radius())) +
                                    " cells, got " + std::to_string(neighborhood.size()));
    uint64_t n = 0;
    for (uint8_t cell : neighborhood) {
        if (cell > 1) throw std::invalid_argument("local_step: neighborhood cells must be 0 or 1");
        n = (n << 1) | cell;
    }
    return rule.output(n);
}

namespace {

void check_width(const RuleTable& rule, const LatticeState& state) {
    if (state.size() < RuleTable::arity(rule.radius()))
        throw std::invalid_argument("global_step: lattice width " + std::to_string(state.size()) +
                                    " below neighborhood size " +
                                    std::to_string(RuleTable::arity(rule.radius())));
}

// Word-parallel evaluation of an arbitrary arity-(2r+1) Boolean function.
// The rule table is Shannon-expanded selector by selector, leftmost neighbor
// first (the big-endian MSB of the table index), as a bitwise mux tree over
// rotated copies of the state, so every cell of a 64-cell word steps at once.
class PackedStepper {
public:
    explicit PackedStepper(const RuleTable& rule) : rule_(rule), leaves_(rule.size()) {
        for (uint64_t n = 0; n < rule.size(); ++n)
            leaves_[n] = rule.output(n) ? ~uint64_t{0} : uint64_t{0};
    }

    LatticeState step(const LatticeState& state) const {
        check_width(rule_, state);
        const int r = static_cast<int>(rule_.radius());
        const uint32_t a = RuleTable::arity(rule_.radius());

        std::vector<LatticeState> rot;
        rot.reserve(a);
        for (int d = -r; d <= r; ++d) rot.push_back(state.rotated(d));

        LatticeState out(state.size());
        std::vector<uint64_t> buf(leaves_.size());
        for (size_t j = 0; j < state.word_count(); ++j) {
            buf = leaves_;
            size_t half = buf.size() >> 1;
            for (uint32_t k = 0; k < a; ++k, half >>= 1) {
                const uint64_t sel = rot[k].word(j);
                for (size_t i = 0; i < half; ++i)
                    buf[i] = (sel & buf[i + half]) | (~sel & buf[i]);
            }
            out.set_word(j, buf[0]);
        }
        return out;
    }

private:
    const RuleTable& rule_;
    std::vector<uint64_t> leaves_;
};

}  // namespace

LatticeState global_step(const RuleTable& rule, const LatticeState& state) {
    return PackedStepper(rule).step(state);
}

LatticeState global_step_reference(const RuleTable& rule, const LatticeState& state) {
    check_width(rule, state);
    const int W = static_cast<int>(state.size());
    const int r = static_cast<int>(rule.radius());
    std::vector<uint8_t> cells(W);
    for (int w = 0; w < W; ++w) cells[w] = state.get(w) ? 1 : 0;
    LatticeState out(state.size());
    for (int w = 0; w < W; ++w) {
        uint64_t n = 0;
        for (int d = -r; d <= r; ++d) {
            int idx = (w + d) % W;
            if (idx < 0) idx += W;
            n = (n << 1) | cells[idx];
        }
        out.set(w, rule.output(n));
    }
    return out;
}

Orbit orbit(const RuleTable& rule, const LatticeState& initial, uint32_t T) {
    if (T < 1) throw std::out_of_range("orbit: T must be >= 1");
    check_width(rule, initial);
    PackedStepper stepper(rule);
    Orbit o;
    o.states.reserve(T);
    o.states.push_back(initial);
    for (uint32_t t = 1; t < T; ++t) o.states.push_back(stepper.step(o.states.back()));
    return o;
}

std::string render(const Orbit& o) {
    std::string out;
    out.reserve(o.states.size() * (o.width() + 1));
    for (const LatticeState& s : o.states) {
        out += s.to_string();
        out += '\n';
    }
    return out;
}

Orbit parse_orbit(std::string_view text) {
    Orbit o;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            LatticeState s = BitVec::from_string(line);
            if (!o.states.empty() && s.size() != o.width())
                throw std::invalid_argument("parse_orbit: rows have differing widths");
            o.states.push_back(std::move(s));
        }
        pos = nl + 1;
    }
    if (o.states.empty()) throw std::invalid_argument("parse_orbit: no rows");
    return o;
}

}  // namespace ecalab
