#include "ecalab/dataset.hpp"

#include <filesystem>
#include <sstream>
#include <unordered_set>

namespace ecalab {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataFormatError(path + ": truncated header");
    return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
}

uint64_t get_u64(std::istream& in, const std::string& path) {
    uint64_t lo = get_u32(in, path);
    uint64_t hi = get_u32(in, path);
    return lo | hi << 32;
}

// Identity of a rule table across any radius, for the reject set.
struct RuleKey {
    std::vector<uint64_t> words;
    bool operator==(const RuleKey&) const = default;
};

struct RuleKeyHash {
    size_t operator()(const RuleKey& k) const {
        uint64_t h = 0x243F6A8885A308D3ull;
        for (uint64_t w : k.words) h = mix64(h ^ w);
        return static_cast<size_t>(h);
    }
};

RuleKey rule_key(const RuleTable& rule) {
    RuleKey k;
    k.words.reserve(rule.outputs().word_count());
    for (size_t j = 0; j < rule.outputs().word_count(); ++j) k.words.push_back(rule.outputs().word(j));
    return k;
}

}  // namespace

Sample generate_sample_from(SplitMix64& rng, uint32_t radius, uint32_t width, uint32_t steps) {
    if (width < RuleTable::arity(radius))
        throw std::out_of_range("generate_sample: lattice width below neighborhood size");
    if (steps < 2) throw std::out_of_range("generate_sample: steps must be >= 2");
    RuleTable rule(radius, rng.next_bits(static_cast<uint32_t>(RuleTable::table_size(radius))));
    LatticeState initial = rng.next_bits(width);
    Orbit o = orbit(rule, initial, steps);
    return Sample{std::move(rule), std::move(o)};
}

Sample generate_sample(uint32_t radius, uint32_t width, uint32_t steps, uint64_t sub_seed) {
    SplitMix64 rng(sub_seed);
    return generate_sample_from(rng, radius, width, steps);
}

void generate_split(const SplitSpec& spec, const std::string& train_path,
                    const std::string& test_path) {
    DatasetHeader test_header;
    test_header.radius = spec.radius;
    test_header.width = spec.width;
    test_header.steps = spec.steps;
    test_header.sample_count = spec.test_count;
    test_header.master_seed = spec.master_seed;

    std::unordered_set<RuleKey, RuleKeyHash> reject;
    reject.reserve(static_cast<size_t>(spec.test_count * 2));

    {
        DatasetWriter writer(test_path, test_header);
        for (uint64_t i = 0; i < spec.test_count; ++i) {
            SplitMix64 rng(derive_seed(spec.master_seed, kTestStreamTag, i));
            Sample s = generate_sample_from(rng, spec.radius, spec.width, spec.steps);
            reject.insert(rule_key(s.rule));
            writer.write(s);
        }
        writer.finish();
    }

    DatasetHeader train_header = test_header;
    train_header.sample_count = spec.train_count;
    {
        DatasetWriter writer(train_path, train_header);
        constexpr int kResampleBudget = 1000;
        for (uint64_t i = 0; i < spec.train_count; ++i) {
            SplitMix64 rng(derive_seed(spec.master_seed, kTrainStreamTag, i));
            int attempts = 0;
            for (;;) {
                Sample s = generate_sample_from(rng, spec.radius, spec.width, spec.steps);
                if (!reject.contains(rule_key(s.rule))) {
                    writer.write(s);
                    break;
                }
                if (++attempts >= kResampleBudget)
                    throw std::runtime_error(
                        "generate_split: resampling budget exceeded; test set covers too much of "
                        "the rule space for this radius");
            }
        }
        writer.finish();
    }
}

DatasetWriter::DatasetWriter(const std::string& path, const DatasetHeader& header)
    : path_(path), header_(header), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataFormatError(path + ": cannot open for writing");
    out_.write(DatasetHeader::kMagic.data(), 4);
    put_u32(out_, header_.format_version);
    put_u32(out_, header_.radius);
    put_u32(out_, header_.width);
    put_u32(out_, header_.steps);
    put_u64(out_, header_.sample_count);
    put_u64(out_, header_.master_seed);
}

void DatasetWriter::write(const Sample& sample) {
    if (sample.rule.radius() != header_.radius || sample.orbit.width() != header_.width ||
        sample.orbit.steps() != header_.steps)
        throw std::invalid_argument(path_ + ": sample shape disagrees with dataset header");
    if (written_ >= header_.sample_count)
        throw std::invalid_argument(path_ + ": more samples than the header announces");

    std::vector<uint8_t> buf(header_.rule_bytes());
    sample.rule.outputs().to_bytes(buf.data(), buf.size());
    out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));

    buf.assign(header_.row_bytes(), 0);
    for (const LatticeState& row : sample.orbit.states) {
        row.to_bytes(buf.data(), buf.size());
        out_.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size()));
    }
    ++written_;
}

void DatasetWriter::finish() {
    if (finished_) return;
    if (written_ != header_.sample_count)
        throw std::invalid_argument(path_ + ": wrote " + std::to_string(written_) +
                                    " samples, header announces " +
                                    std::to_string(header_.sample_count));
    out_.flush();
    if (!out_) throw DataFormatError(path_ + ": write failed");
    finished_ = true;
}

DatasetWriter::~DatasetWriter() = default;

DatasetReader::DatasetReader(const std::string& path)
    : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataFormatError(path + ": cannot open");

    char magic[4];
    if (!in_.read(magic, 4)) throw DataFormatError(path + ": truncated header");
    if (!std::equal(magic, magic + 4, DatasetHeader::kMagic.begin()))
        throw DataFormatError(path + ": bad magic, not a dataset file");

    header_.format_version = get_u32(in_, path_);
    if (header_.format_version != DatasetHeader::kFormatVersion)
        throw DataFormatError(path + ": unsupported format version " +
                              std::to_string(header_.format_version));
    header_.radius = get_u32(in_, path_);
    header_.width = get_u32(in_, path_);
    header_.steps = get_u32(in_, path_);
    header_.sample_count = get_u64(in_, path_);
    header_.master_seed = get_u64(in_, path_);
    if (header_.radius < 1 || header_.radius > 12 ||
        header_.width < RuleTable::arity(header_.radius) || header_.steps < 2)
        throw DataFormatError(path + ": header fields violate dataset invariants");

    constexpr uintmax_t kHeaderBytes = 36;
    const uintmax_t expected = kHeaderBytes + header_.sample_bytes() * header_.sample_count;
    std::error_code ec;
    const uintmax_t actual = std::filesystem::file_size(path, ec);
    if (ec) throw DataFormatError(path + ": cannot stat file");
    if (actual < expected) throw DataFormatError(path + ": truncated file (payload ends mid-sample)");
    if (actual > expected)
        throw DataFormatError(path + ": file larger than header announces (inconsistent payload)");

    buf_.resize(header_.sample_bytes());
}

bool DatasetReader::next(Sample& out) {
    if (read_ >= header_.sample_count) return false;
    if (!in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size())))
        throw DataFormatError(path_ + ": truncated file (payload ends mid-sample)");

    const uint8_t* p = buf_.data();
    BitVec rule_bits =
        BitVec::from_bytes(p, static_cast<uint32_t>(RuleTable::table_size(header_.radius)));
    p += header_.rule_bytes();

    Orbit o;
    o.states.reserve(header_.steps);
    for (uint32_t t = 0; t < header_.steps; ++t) {
        o.states.push_back(BitVec::from_bytes(p, header_.width));
        p += header_.row_bytes();
    }
    out = Sample{RuleTable(header_.radius, std::move(rule_bits)), std::move(o)};
    ++read_;
    return true;
}

std::vector<Sample> read_all(const std::string& path) {
    DatasetReader reader(path);
    std::vector<Sample> samples;
    samples.reserve(reader.header().sample_count);
    Sample s{decode_rule(0, 1), Orbit{}};
    while (reader.next(s)) samples.push_back(s);
    return samples;
}

DatasetHeader read_header(const std::string& path) {
    return DatasetReader(path).header();
}

std::string describe(const DatasetHeader& h) {
    std::ostringstream os;
    os << "format_version " << h.format_version << "\n"
       << "radius " << h.radius << "\n"
       << "width " << h.width << "\n"
       << "steps " << h.steps << "\n"
       << "sample_count " << h.sample_count << "\n"
       << "master_seed " << h.master_seed << "\n";
    return os.str();
}

}  // namespace ecalab
