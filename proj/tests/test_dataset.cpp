#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "ecalab/dataset.hpp"

using namespace ecalab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "ecalab_dataset_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool same_sample(const Sample& a, const Sample& b) {
    if (!(a.rule == b.rule) || a.orbit.steps() != b.orbit.steps()) return false;
    for (size_t t = 0; t < a.orbit.steps(); ++t)
        if (!(a.orbit.states[t] == b.orbit.states[t])) return false;
    return true;
}

}  // namespace

TEST_CASE("generate_sample is a pure function of its sub-seed") {
    Sample a = generate_sample(2, 20, 20, 987654321);
    Sample b = generate_sample(2, 20, 20, 987654321);
    CHECK(same_sample(a, b));
    Sample c = generate_sample(2, 20, 20, 987654322);
    CHECK_FALSE(same_sample(a, c));
    CHECK_THROWS_AS(generate_sample(2, 4, 20, 0), std::out_of_range);
    CHECK_THROWS_AS(generate_sample(2, 20, 1, 0), std::out_of_range);
}

TEST_CASE("generated orbits re-simulate from their first row") {
    for (uint64_t s = 0; s < 20; ++s) {
        Sample sample = generate_sample(2, 20, 20, derive_seed(5, 1, s));
        Orbit redo = orbit(sample.rule, sample.orbit.states[0], 20);
        for (size_t t = 0; t < 20; ++t) CHECK(redo.states[t] == sample.orbit.states[t]);
    }
}

TEST_CASE("initial-state bits are unbiased") {
    uint64_t ones = 0;
    const uint64_t n_samples = 2000, W = 20;
    for (uint64_t s = 0; s < n_samples; ++s)
        ones += generate_sample(2, W, 2, derive_seed(17, 9, s)).orbit.states[0].count();
    const double mean = static_cast<double>(ones) / (n_samples * W);
    const double sigma = 0.5 / std::sqrt(static_cast<double>(n_samples * W));
    CHECK(std::abs(mean - 0.5) < 3 * sigma);
}

TEST_CASE("dataset files round trip bit-exactly") {
    const fs::path path = temp_dir() / "roundtrip.ecad";
    DatasetHeader header;
    header.radius = 2;
    header.width = 20;
    header.steps = 20;
    header.sample_count = 100;
    header.master_seed = 99;

    std::vector<Sample> written;
    {
        DatasetWriter writer(path.string(), header);
        for (uint64_t i = 0; i < header.sample_count; ++i) {
            written.push_back(generate_sample(2, 20, 20, derive_seed(99, 1, i)));
            writer.write(written.back());
        }
        writer.finish();
    }

    DatasetReader reader(path.string());
    CHECK(reader.header().radius == 2);
    CHECK(reader.header().sample_count == 100);
    Sample s{decode_rule(0, 1), Orbit{}};
    size_t i = 0;
    while (reader.next(s)) {
        REQUIRE(i < written.size());
        CHECK(same_sample(s, written[i]));
        ++i;
    }
    CHECK(i == 100);
}

TEST_CASE("reader rejects malformed files with distinct errors") {
    const fs::path good = temp_dir() / "good.ecad";
    DatasetHeader header;
    header.radius = 1;
    header.width = 8;
    header.steps = 4;
    header.sample_count = 3;
    {
        DatasetWriter writer(good.string(), header);
        for (uint64_t i = 0; i < 3; ++i) writer.write(generate_sample(1, 8, 4, i));
        writer.finish();
    }
    const std::string bytes = slurp(good);

    auto write_variant = [&](const std::string& name, const std::string& content) {
        const fs::path p = temp_dir() / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << content;
        return p;
    };

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        const fs::path p = write_variant("bad_magic.ecad", bad);
        CHECK_THROWS_WITH_AS(DatasetReader(p.string()), doctest::Contains("bad magic"),
                             DataFormatError);
    }
    SUBCASE("unsupported version") {
        std::string bad = bytes;
        bad[4] = 42;
        const fs::path p = write_variant("bad_version.ecad", bad);
        CHECK_THROWS_WITH_AS(DatasetReader(p.string()), doctest::Contains("version"),
                             DataFormatError);
    }
    SUBCASE("truncation mid-sample") {
        const fs::path p = write_variant("truncated.ecad", bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_WITH_AS(DatasetReader(p.string()), doctest::Contains("truncated"),
                             DataFormatError);
    }
    SUBCASE("trailing garbage") {
        const fs::path p = write_variant("garbage.ecad", bytes + "zz");
        CHECK_THROWS_WITH_AS(DatasetReader(p.string()), doctest::Contains("larger"),
                             DataFormatError);
    }
}

TEST_CASE("empty dataset files are valid") {
    const fs::path path = temp_dir() / "empty.ecad";
    DatasetHeader header;
    header.radius = 2;
    header.width = 20;
    header.steps = 20;
    header.sample_count = 0;
    {
        DatasetWriter writer(path.string(), header);
        writer.finish();
    }
    DatasetReader reader(path.string());
    Sample s{decode_rule(0, 1), Orbit{}};
    CHECK_FALSE(reader.next(s));
}

TEST_CASE("writer enforces the announced sample count") {
    const fs::path path = temp_dir() / "short.ecad";
    DatasetHeader header;
    header.radius = 1;
    header.width = 8;
    header.steps = 4;
    header.sample_count = 2;
    DatasetWriter writer(path.string(), header);
    writer.write(generate_sample(1, 8, 4, 0));
    CHECK_THROWS_AS(writer.finish(), std::invalid_argument);
    writer.write(generate_sample(1, 8, 4, 1));
    CHECK_THROWS_AS(writer.write(generate_sample(1, 8, 4, 2)), std::invalid_argument);
    writer.finish();
}

TEST_CASE("generate_split yields disjoint, reproducible files") {
    SplitSpec spec;
    spec.train_count = 300;
    spec.test_count = 120;
    spec.master_seed = 7;

    const fs::path train1 = temp_dir() / "train1.ecad";
    const fs::path test1 = temp_dir() / "test1.ecad";
    const fs::path train2 = temp_dir() / "train2.ecad";
    const fs::path test2 = temp_dir() / "test2.ecad";
    generate_split(spec, train1.string(), test1.string());
    generate_split(spec, train2.string(), test2.string());

    CHECK(slurp(train1) == slurp(train2));
    CHECK(slurp(test1) == slurp(test2));

    std::set<uint64_t> train_rules, test_rules;
    for (const Sample& s : read_all(train1.string())) train_rules.insert(encode_rule(s.rule));
    for (const Sample& s : read_all(test1.string())) test_rules.insert(encode_rule(s.rule));
    CHECK(read_all(train1.string()).size() == 300);
    for (uint64_t r : train_rules) CHECK(test_rules.count(r) == 0);
}

TEST_CASE("split profiles carry the documented defaults") {
    SplitSpec paper = SplitSpec::full(1);
    CHECK(paper.train_count == 950'000);
    CHECK(paper.test_count == 100'000);
    CHECK(paper.radius == 2);
    CHECK(paper.width == 20);
    CHECK(paper.steps == 20);
    SplitSpec desk = SplitSpec::desk(1);
    CHECK(desk.train_count == 100'000);
    CHECK(desk.test_count == 10'000);
    CHECK(desk.width == 20);
}
