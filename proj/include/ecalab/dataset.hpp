#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ecalab/eca.hpp"
#include "ecalab/errors.hpp"
#include "ecalab/rng.hpp"

namespace ecalab {

struct Sample {
    RuleTable rule;
    Orbit orbit;
};

// On-disk layout (all integers little-endian):
//   magic "ECAD" | u32 format_version | u32 radius | u32 width | u32 steps
//   | u64 sample_count | u64 master_seed
// then sample_count records, each:
//   rule table, ceil(2^(2r+1)/8) bytes | steps rows, ceil(width/8) bytes each
// Bits are packed LSB-first within a byte (bit i of a row byte is cell 8j+i).
// format_version 1 also freezes the PRNG: SplitMix64 streams seeded with
// derive_seed(master_seed, tag, index), rule words drawn before state words.
struct DatasetHeader {
    static constexpr std::array<char, 4> kMagic{'E', 'C', 'A', 'D'};
    static constexpr uint32_t kFormatVersion = 1;

    uint32_t format_version = kFormatVersion;
    uint32_t radius = 2;
    uint32_t width = 20;
    uint32_t steps = 20;
    uint64_t sample_count = 0;
    uint64_t master_seed = 0;

    size_t rule_bytes() const { return (RuleTable::table_size(radius) + 7) / 8; }
    size_t row_bytes() const { return (width + 7) / 8; }
    size_t sample_bytes() const { return rule_bytes() + size_t{steps} * row_bytes(); }
};

inline constexpr uint64_t kTrainStreamTag = 1;
inline constexpr uint64_t kTestStreamTag = 2;

struct SplitSpec {
    uint64_t train_count = 950'000;
    uint64_t test_count = 100'000;
    uint64_t master_seed = 0;
    uint32_t radius = 2;
    uint32_t width = 20;
    uint32_t steps = 20;

    // Smaller profile for a single desktop CPU; same lattice as the full one.
    static SplitSpec desk(uint64_t seed) {
        SplitSpec s;
        s.train_count = 100'000;
        s.test_count = 10'000;
        s.master_seed = seed;
        return s;
    }
    static SplitSpec full(uint64_t seed) {
        SplitSpec s;
        s.master_seed = seed;
        return s;
    }
};

// Uniformly random rule table and initial state, fully determined by sub_seed.
Sample generate_sample(uint32_t radius, uint32_t width, uint32_t steps, uint64_t sub_seed);

// Draws from an already-positioned stream; used by generate_split so a train
// sample whose rule collides with the test set can be redrawn from the same
// sub-stream.
Sample generate_sample_from(SplitMix64& rng, uint32_t radius, uint32_t width, uint32_t steps);

// Writes the test file first (its rules form the reject set), then the train
// file with colliding samples redrawn. The two files' rule sets are disjoint.
void generate_split(const SplitSpec& spec, const std::string& train_path,
                    const std::string& test_path);

class DatasetWriter {
public:
    DatasetWriter(const std::string& path, const DatasetHeader& header);
    void write(const Sample& sample);
    void finish();  // validates the sample count and flushes
    ~DatasetWriter();

private:
    std::string path_;
    DatasetHeader header_;
    std::ofstream out_;
    uint64_t written_ = 0;
    bool finished_ = false;
};

// Streaming reader: constant memory in the sample count. The file size is
// validated against the header before the first sample is returned.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path);
    const DatasetHeader& header() const { return header_; }
    bool next(Sample& out);  // false once sample_count samples were read

private:
    std::string path_;
    DatasetHeader header_;
    std::ifstream in_;
    uint64_t read_ = 0;
    std::vector<uint8_t> buf_;
};

std::vector<Sample> read_all(const std::string& path);
DatasetHeader read_header(const std::string& path);
std::string describe(const DatasetHeader& header);

}  // namespace ecalab
