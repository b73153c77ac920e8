#include "ecalab/task_codec.hpp"

#include <stdexcept>

namespace ecalab {

char token_char(Token t) {
    switch (t) {
        case Token::Zero: return '0';
        case Token::One: return '1';
        case Token::Sep: return '|';
        case Token::Mask: return '_';
    }
    return '?';
}

const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::OS: return "os";
        case TaskKind::OO: return "oo";
        case TaskKind::OSR: return "osr";
        case TaskKind::ROS: return "ros";
    }
    return "?";
}

TaskKind parse_task(const std::string& s) {
    if (s == "os") return TaskKind::OS;
    if (s == "oo") return TaskKind::OO;
    if (s == "osr") return TaskKind::OSR;
    if (s == "ros") return TaskKind::ROS;
    throw std::invalid_argument("unknown task '" + s + "' (expected os, oo, osr, ros)");
}

void TaskConfig::validate() const {
    if (prefix_len < 2) throw std::invalid_argument("TaskConfig: prefix_len must be >= 2");
    if (width < RuleTable::arity(radius))
        throw std::invalid_argument("TaskConfig: width below neighborhood size");
    if (task == TaskKind::OO) {
        if (horizon < 1) throw std::invalid_argument("TaskConfig: OO requires horizon >= 1");
        if (lookahead != 0) throw std::invalid_argument("TaskConfig: OO requires lookahead = 0");
    } else {
        if (horizon != 1)
            throw std::invalid_argument("TaskConfig: only OO predicts more than one state");
    }
}

uint32_t TaskConfig::input_length() const {
    const uint32_t prefix = prefix_len * (width + 1);
    switch (task) {
        case TaskKind::OS: return prefix + width;
        case TaskKind::OO: return prefix + horizon * (width + 1);
        case TaskKind::OSR: return prefix + width + 1 + static_cast<uint32_t>(rule_bits());
        case TaskKind::ROS: return static_cast<uint32_t>(rule_bits()) + 1 + prefix + width;
    }
    return 0;
}

uint32_t TaskConfig::mask_count() const {
    switch (task) {
        case TaskKind::OS: return width;
        case TaskKind::OO: return horizon * width;
        case TaskKind::OSR: return width + static_cast<uint32_t>(rule_bits());
        case TaskKind::ROS: return width;
    }
    return 0;
}

uint32_t TaskConfig::required_steps() const {
    return task == TaskKind::OO ? prefix_len + horizon : prefix_len + lookahead + 1;
}

namespace {

void push_state_bits(std::vector<Token>& out, const LatticeState& s) {
    for (uint32_t w = 0; w < s.size(); ++w)
        out.push_back(s.get(w) ? Token::One : Token::Zero);
}

void push_masks(TaskInstance& inst, uint32_t count) {
    for (uint32_t i = 0; i < count; ++i) {
        inst.mask_positions.push_back(static_cast<uint32_t>(inst.input.size()));
        inst.input.push_back(Token::Mask);
    }
}

void push_target_state(TaskInstance& inst, const LatticeState& s) {
    for (uint32_t w = 0; w < s.size(); ++w) inst.target_bits.push_back(s.get(w) ? 1 : 0);
}

}  // namespace

TaskInstance encode(const Sample& sample, const TaskConfig& config) {
    config.validate();
    if (sample.orbit.width() != config.width)
        throw std::invalid_argument("encode: sample width disagrees with task config");
    if (sample.rule.radius() != config.radius)
        throw std::invalid_argument("encode: sample radius disagrees with task config");
    if (sample.orbit.steps() < config.required_steps())
        throw std::out_of_range("encode: orbit has " + std::to_string(sample.orbit.steps()) +
                                " states, task needs " + std::to_string(config.required_steps()));

    TaskInstance inst;
    inst.input.reserve(config.input_length());
    inst.target_bits.reserve(config.mask_count());
    inst.mask_positions.reserve(config.mask_count());

    const uint32_t P = config.prefix_len;
    const uint32_t W = config.width;

    if (config.task == TaskKind::ROS) {
        for (uint64_t n = 0; n < config.rule_bits(); ++n)
            inst.input.push_back(sample.rule.output(n) ? Token::One : Token::Zero);
        inst.input.push_back(Token::Sep);
    }

    for (uint32_t t = 0; t < P; ++t) {
        push_state_bits(inst.input, sample.orbit.states[t]);
        inst.input.push_back(Token::Sep);
    }

    switch (config.task) {
        case TaskKind::OS:
        case TaskKind::ROS:
            push_masks(inst, W);
            push_target_state(inst, sample.orbit.states[P + config.lookahead]);
            break;
        case TaskKind::OO:
            for (uint32_t h = 0; h < config.horizon; ++h) {
                push_masks(inst, W);
                inst.input.push_back(Token::Sep);
                push_target_state(inst, sample.orbit.states[P + h]);
            }
            break;
        case TaskKind::OSR:
            push_masks(inst, W);
            inst.input.push_back(Token::Sep);
            push_masks(inst, static_cast<uint32_t>(config.rule_bits()));
            push_target_state(inst, sample.orbit.states[P + config.lookahead]);
            for (uint64_t n = 0; n < config.rule_bits(); ++n)
                inst.target_bits.push_back(sample.rule.output(n) ? 1 : 0);
            break;
    }

    return inst;
}

DecodedPrediction decode_state(std::span<const Token> predicted_at_masks,
                               const TaskConfig& config) {
    config.validate();
    if (predicted_at_masks.size() != config.mask_count())
        throw std::invalid_argument("decode_state: expected " + std::to_string(config.mask_count()) +
                                    " predictions, got " +
                                    std::to_string(predicted_at_masks.size()));
    for (Token t : predicted_at_masks)
        if (t != Token::Zero && t != Token::One)
            throw std::invalid_argument(
                "decode_state: prediction contains a non-bit token (SEP or MASK)");

    const uint32_t W = config.width;
    const uint32_t n_states = config.task == TaskKind::OO ? config.horizon : 1;

    DecodedPrediction dec;
    size_t pos = 0;
    for (uint32_t s = 0; s < n_states; ++s) {
        LatticeState state(W);
        for (uint32_t w = 0; w < W; ++w, ++pos)
            state.set(w, predicted_at_masks[pos] == Token::One);
        dec.states.push_back(std::move(state));
    }
    if (config.task == TaskKind::OSR) {
        BitVec outputs(static_cast<uint32_t>(config.rule_bits()));
        for (uint32_t n = 0; n < outputs.size(); ++n, ++pos)
            outputs.set(n, predicted_at_masks[pos] == Token::One);
        dec.rule = RuleTable(config.radius, std::move(outputs));
    }
    return dec;
}

bool round_trip_check(const Sample& sample, const TaskConfig& config) {
    TaskInstance inst = encode(sample, config);
    std::vector<Token> truth(inst.target_bits.size());
    for (size_t i = 0; i < truth.size(); ++i)
        truth[i] = inst.target_bits[i] ? Token::One : Token::Zero;
    DecodedPrediction dec = decode_state(truth, config);

    const uint32_t P = config.prefix_len;
    const uint32_t n_states = config.task == TaskKind::OO ? config.horizon : 1;
    const uint32_t first = config.task == TaskKind::OO ? P : P + config.lookahead;
    for (uint32_t s = 0; s < n_states; ++s)
        if (dec.states[s] != sample.orbit.states[first + s]) return false;
    if (config.task == TaskKind::OSR && (!dec.rule || !(*dec.rule == sample.rule))) return false;
    return true;
}

std::string dump(const TaskInstance& inst) {
    std::string s;
    s.reserve(inst.input.size());
    for (Token t : inst.input) s += token_char(t);
    return s;
}

}  // namespace ecalab
