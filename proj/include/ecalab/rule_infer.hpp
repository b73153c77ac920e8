#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ecalab/eca.hpp"
#include "ecalab/errors.hpp"

namespace ecalab {

// The (neighborhood -> output) entries recovered from an orbit so far.
// An index with observation count > 0 always has a known output bit.
class PartialRule {
public:
    explicit PartialRule(uint32_t radius);

    uint32_t radius() const { return radius_; }
    uint64_t table_size() const { return counts_.size(); }

    bool observed(uint64_t n) const { return counts_[n] > 0; }
    bool output(uint64_t n) const;  // throws if unobserved
    uint64_t observation_count(uint64_t n) const { return counts_[n]; }
    uint64_t observed_count() const { return observed_total_; }

    // Records one neighborhood -> output observation; throws
    // InconsistentOrbitError when it contradicts an earlier one.
    void record(uint64_t n, bool out_bit);

private:
    uint32_t radius_;
    std::vector<int8_t> outputs_;  // -1 unknown
    std::vector<uint64_t> counts_;
    uint64_t observed_total_ = 0;
};

struct CoverageReport {
    uint64_t observed_count = 0;
    uint64_t total = 0;
    double coverage_fraction = 0.0;
    // log2 of the number of rules consistent with the observations
    // (= number of still-unseen table entries).
    uint64_t consistent_rule_count_log2 = 0;
    bool fully_determined = false;
};

// Records every cell transition of every consecutive state pair.
PartialRule observe(const Orbit& o, uint32_t radius);

CoverageReport coverage(const PartialRule& partial);

// The unique rule when every table entry has been observed, otherwise empty.
std::optional<RuleTable> complete_rule(const PartialRule& partial);

// Coupon-collector estimate of the observation horizon needed to see every
// neighborhood pattern: 2^(2r+1) * (ln 2^(2r+1) + gamma) / W.
double tmin_estimate(uint32_t radius, uint32_t width);

struct CoveragePoint {
    uint32_t t = 0;             // orbit prefix length
    double mean_coverage = 0.0;
    double frac_determined = 0.0;
};

// Monte Carlo over uniformly random (rule, initial state): coverage statistics
// of observe() on each orbit prefix t in [2, max_T]. Deterministic given seed;
// sample i uses the sub-stream derive_seed(seed, kCoverageCurveTag, i).
std::vector<CoveragePoint> coverage_curve(uint32_t radius, uint32_t width, uint32_t max_T,
                                          uint32_t num_samples, uint64_t seed);

inline constexpr uint64_t kCoverageCurveTag = 3;

}  // namespace ecalab
