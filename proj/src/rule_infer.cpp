#include "ecalab/rule_infer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ecalab/rng.hpp"

namespace ecalab {

PartialRule::PartialRule(uint32_t radius)
    : radius_(radius),
      outputs_(RuleTable::table_size(radius), -1),
      counts_(RuleTable::table_size(radius), 0) {}

bool PartialRule::output(uint64_t n) const {
    if (outputs_[n] < 0)
        throw std::out_of_range("PartialRule: neighborhood " + std::to_string(n) +
                                " has not been observed");
    return outputs_[n] != 0;
}

void PartialRule::record(uint64_t n, bool out_bit) {
    if (counts_[n] == 0) {
        outputs_[n] = out_bit ? 1 : 0;
        ++observed_total_;
    } else if ((outputs_[n] != 0) != out_bit) {
        throw InconsistentOrbitError(
            "orbit is not generated by any radius-" + std::to_string(radius_) +
            " rule under periodic boundary: neighborhood " + std::to_string(n) +
            " maps to both 0 and 1");
    }
    ++counts_[n];
}

namespace {

// Records all W cell transitions of one consecutive state pair.
void observe_transition(PartialRule& partial, const LatticeState& cur, const LatticeState& nxt) {
    const int W = static_cast<int>(cur.size());
    const int r = static_cast<int>(partial.radius());
    const uint64_t mask = partial.table_size() - 1;
    // Rolling window over the wrapped row, leftmost neighbor as MSB.
    uint64_t n = 0;
    for (int d = -r; d < r; ++d) n = (n << 1) | cur.get(static_cast<uint32_t>((d + W) % W));
    for (int w = 0; w < W; ++w) {
        n = ((n << 1) | cur.get(static_cast<uint32_t>((w + r) % W))) & mask;
        partial.record(n, nxt.get(static_cast<uint32_t>(w)));
    }
}

}  // namespace

PartialRule observe(const Orbit& o, uint32_t radius) {
    if (o.states.size() < 2) throw std::invalid_argument("observe: orbit needs at least 2 states");
    if (o.width() < RuleTable::arity(radius))
        throw std::invalid_argument("observe: lattice width below neighborhood size");

    PartialRule partial(radius);
    for (size_t t = 0; t + 1 < o.states.size(); ++t)
        observe_transition(partial, o.states[t], o.states[t + 1]);
    return partial;
}

CoverageReport coverage(const PartialRule& partial) {
    CoverageReport rep;
    rep.observed_count = partial.observed_count();
    rep.total = partial.table_size();
    rep.coverage_fraction = static_cast<double>(rep.observed_count) / static_cast<double>(rep.total);
    rep.consistent_rule_count_log2 = rep.total - rep.observed_count;
    rep.fully_determined = rep.observed_count == rep.total;
    return rep;
}

std::optional<RuleTable> complete_rule(const PartialRule& partial) {
    if (partial.observed_count() != partial.table_size()) return std::nullopt;
    BitVec outputs(static_cast<uint32_t>(partial.table_size()));
    for (uint64_t n = 0; n < partial.table_size(); ++n)
        outputs.set(static_cast<uint32_t>(n), partial.output(n));
    return RuleTable(partial.radius(), std::move(outputs));
}

double tmin_estimate(uint32_t radius, uint32_t width) {
    if (width < RuleTable::arity(radius))
        throw std::invalid_argument("tmin_estimate: lattice width below neighborhood size");
    constexpr double kEulerMascheroni = 0.5772156649;
    const double patterns = static_cast<double>(RuleTable::table_size(radius));
    return patterns * (std::log(patterns) + kEulerMascheroni) / static_cast<double>(width);
}

std::vector<CoveragePoint> coverage_curve(uint32_t radius, uint32_t width, uint32_t max_T,
                                          uint32_t num_samples, uint64_t seed) {
    if (num_samples < 1) throw std::invalid_argument("coverage_curve: num_samples must be >= 1");
    if (max_T < 2) throw std::invalid_argument("coverage_curve: max_T must be >= 2");

    std::vector<CoveragePoint> points(max_T - 1);
    for (uint32_t t = 2; t <= max_T; ++t) points[t - 2].t = t;

    const uint32_t table_bits = static_cast<uint32_t>(RuleTable::table_size(radius));
    for (uint32_t i = 0; i < num_samples; ++i) {
        SplitMix64 rng(derive_seed(seed, kCoverageCurveTag, i));
        RuleTable rule(radius, rng.next_bits(table_bits));
        LatticeState prev = rng.next_bits(width);

        PartialRule partial(radius);
        for (uint32_t t = 2; t <= max_T; ++t) {
            LatticeState next = global_step(rule, prev);
            observe_transition(partial, prev, next);
            CoverageReport rep = coverage(partial);
            points[t - 2].mean_coverage += rep.coverage_fraction;
            points[t - 2].frac_determined += rep.fully_determined ? 1.0 : 0.0;
            prev = std::move(next);
        }
    }
    for (CoveragePoint& p : points) {
        p.mean_coverage /= num_samples;
        p.frac_determined /= num_samples;
    }
    return points;
}

}  // namespace ecalab
