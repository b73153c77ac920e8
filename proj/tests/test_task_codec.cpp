#include <doctest.h>

#include "ecalab/task_codec.hpp"

using namespace ecalab;

namespace {

TaskConfig os_config() {
    TaskConfig c;
    c.task = TaskKind::OS;
    return c;  // defaults: prefix 10, W 20, r 2, k 0
}

Sample sample_for(const TaskConfig& c, uint64_t seed) {
    return generate_sample(c.radius, c.width, c.required_steps() + 2, seed);
}

}  // namespace

TEST_CASE("layout lengths match the closed-form formulas") {
    TaskConfig os = os_config();
    CHECK(os.input_length() == 230);
    CHECK(os.mask_count() == 20);

    TaskConfig oo = os;
    oo.task = TaskKind::OO;
    oo.horizon = 4;
    CHECK(oo.input_length() == 294);
    CHECK(oo.mask_count() == 80);

    TaskConfig osr = os;
    osr.task = TaskKind::OSR;
    CHECK(osr.input_length() == 230 + 1 + 32);
    CHECK(osr.mask_count() == 52);

    TaskConfig ros = os;
    ros.task = TaskKind::ROS;
    CHECK(ros.input_length() == 32 + 1 + 230);
    CHECK(ros.mask_count() == 20);

    for (const TaskConfig& c : {os, oo, osr, ros}) {
        TaskInstance inst = encode(sample_for(c, 5), c);
        CHECK(inst.input.size() == c.input_length());
        CHECK(inst.mask_positions.size() == c.mask_count());
        CHECK(inst.target_bits.size() == c.mask_count());
    }
}

TEST_CASE("OS masks sit at the tail and targets are the next state") {
    TaskConfig c = os_config();
    Sample s = generate_sample(c.radius, c.width, 16, 903);  // room for lookahead 3
    TaskInstance inst = encode(s, c);
    for (uint32_t i = 0; i < 20; ++i) CHECK(inst.mask_positions[i] == 210 + i);
    for (uint32_t w = 0; w < 20; ++w)
        CHECK(inst.target_bits[w] == (s.orbit.states[10].get(w) ? 1 : 0));

    c.lookahead = 3;
    TaskInstance look = encode(s, c);
    for (uint32_t w = 0; w < 20; ++w)
        CHECK(look.target_bits[w] == (s.orbit.states[13].get(w) ? 1 : 0));
}

TEST_CASE("OSR targets pack state bits then rule outputs in index order") {
    TaskConfig c = os_config();
    c.task = TaskKind::OSR;
    Sample s = sample_for(c, 42);
    TaskInstance inst = encode(s, c);
    REQUIRE(inst.target_bits.size() == 52);
    for (uint32_t w = 0; w < 20; ++w)
        CHECK(inst.target_bits[w] == (s.orbit.states[10].get(w) ? 1 : 0));
    for (uint32_t n = 0; n < 32; ++n)
        CHECK(inst.target_bits[20 + n] == (s.rule.output(n) ? 1 : 0));
}

TEST_CASE("mask positions index MASK tokens exactly") {
    for (TaskKind kind : {TaskKind::OS, TaskKind::OO, TaskKind::OSR, TaskKind::ROS}) {
        TaskConfig c = os_config();
        c.task = kind;
        if (kind == TaskKind::OO) c.horizon = 4;
        Sample s = sample_for(c, 7);
        TaskInstance inst = encode(s, c);
        std::vector<bool> is_mask(inst.input.size(), false);
        for (size_t i = 0; i < inst.mask_positions.size(); ++i) {
            if (i > 0) CHECK(inst.mask_positions[i] > inst.mask_positions[i - 1]);
            is_mask[inst.mask_positions[i]] = true;
        }
        for (size_t p = 0; p < inst.input.size(); ++p)
            CHECK((inst.input[p] == Token::Mask) == is_mask[p]);
    }
}

TEST_CASE("information hygiene: nothing past the prefix leaks unmasked") {
    TaskConfig c = os_config();
    for (TaskKind kind : {TaskKind::OS, TaskKind::OO, TaskKind::OSR}) {
        c.task = kind;
        c.horizon = kind == TaskKind::OO ? 4 : 1;
        Sample s = sample_for(c, 1001);
        TaskInstance inst = encode(s, c);
        const uint32_t prefix_end = c.prefix_len * (c.width + 1);
        // prefix region replays states 0..prefix_len-1 verbatim
        for (uint32_t t = 0; t < c.prefix_len; ++t)
            for (uint32_t w = 0; w < c.width; ++w) {
                const Token tok = inst.input[t * (c.width + 1) + w];
                CHECK(tok == (s.orbit.states[t].get(w) ? Token::One : Token::Zero));
            }
        // beyond it, only MASK and SEP ever appear
        for (size_t p = prefix_end; p < inst.input.size(); ++p)
            CHECK((inst.input[p] == Token::Mask || inst.input[p] == Token::Sep));
    }
}

TEST_CASE("ROS places the rule, then the orbit prefix") {
    TaskConfig ros = os_config();
    ros.task = TaskKind::ROS;
    TaskConfig osr = os_config();
    osr.task = TaskKind::OSR;

    Sample s = sample_for(ros, 4242);
    TaskInstance ros_inst = encode(s, ros);
    TaskInstance osr_inst = encode(s, osr);

    // the rule bits OSR holds as targets appear verbatim in the ROS input
    for (uint32_t n = 0; n < 32; ++n) {
        const Token tok = ros_inst.input[n];
        CHECK((tok == Token::Zero || tok == Token::One));
        CHECK((tok == Token::One ? 1 : 0) == osr_inst.target_bits[20 + n]);
    }
    CHECK(ros_inst.input[32] == Token::Sep);
    // no rule bit hides anywhere else: the remainder replays the prefix layout
    for (uint32_t t = 0; t < ros.prefix_len; ++t)
        for (uint32_t w = 0; w < ros.width; ++w) {
            const Token tok = ros_inst.input[33 + t * (ros.width + 1) + w];
            CHECK(tok == (s.orbit.states[t].get(w) ? Token::One : Token::Zero));
        }
}

TEST_CASE("decode-encode identity holds across tasks") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        for (TaskKind kind : {TaskKind::OS, TaskKind::OO, TaskKind::OSR, TaskKind::ROS}) {
            TaskConfig c = os_config();
            c.task = kind;
            if (kind == TaskKind::OO) c.horizon = 4;
            CHECK(round_trip_check(sample_for(c, seed), c));
        }
    }
}

TEST_CASE("OO with horizon 1 targets the same bits as OS with k 0") {
    TaskConfig os = os_config();
    TaskConfig oo = os_config();
    oo.task = TaskKind::OO;
    oo.horizon = 1;
    Sample s = sample_for(os, 31);
    CHECK(encode(s, os).target_bits == encode(s, oo).target_bits);
    CHECK(encode(s, oo).input.size() == encode(s, os).input.size() + 1);  // trailing SEP
}

TEST_CASE("decode_state rejects non-bit predictions and wrong counts") {
    TaskConfig c = os_config();
    std::vector<Token> preds(20, Token::One);
    preds[3] = Token::Zero;
    DecodedPrediction dec = decode_state(preds, c);
    REQUIRE(dec.states.size() == 1);
    CHECK(dec.states[0].get(3) == false);
    CHECK(dec.states[0].get(4) == true);
    CHECK_FALSE(dec.rule.has_value());

    preds[5] = Token::Sep;
    CHECK_THROWS_AS(decode_state(preds, c), std::invalid_argument);
    preds[5] = Token::Mask;
    CHECK_THROWS_AS(decode_state(preds, c), std::invalid_argument);
    CHECK_THROWS_AS(decode_state(std::vector<Token>(19, Token::One), c), std::invalid_argument);
}

TEST_CASE("encode validates the orbit length and task invariants") {
    TaskConfig c = os_config();
    c.lookahead = 10;  // needs T >= 21
    Sample s = generate_sample(2, 20, 20, 8);
    CHECK_THROWS_AS(encode(s, c), std::out_of_range);

    TaskConfig bad = os_config();
    bad.task = TaskKind::OO;
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.horizon = 2;
    bad.lookahead = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    TaskConfig h = os_config();
    h.horizon = 2;  // horizon > 1 outside OO
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
    TaskConfig p = os_config();
    p.prefix_len = 1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("task names parse both ways") {
    for (TaskKind kind : {TaskKind::OS, TaskKind::OO, TaskKind::OSR, TaskKind::ROS})
        CHECK(parse_task(task_name(kind)) == kind);
    CHECK_THROWS_AS(parse_task("sr"), std::invalid_argument);
}
