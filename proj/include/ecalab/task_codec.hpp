#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecalab/dataset.hpp"
#include "ecalab/eca.hpp"

namespace ecalab {

// Frozen vocabulary: integer ids are part of the format contract.
enum class Token : uint8_t { Zero = 0, One = 1, Sep = 2, Mask = 3 };
inline constexpr uint32_t kVocabSize = 4;

char token_char(Token t);  // '0' '1' '|' '_'

enum class TaskKind : uint8_t { OS, OO, OSR, ROS };

const char* task_name(TaskKind t);          // "os" "oo" "osr" "ros"
TaskKind parse_task(const std::string& s);  // accepts the names above

// Input layouts (every shown state block is followed by one SEP):
//   OS : prefix states | W masks
//   OO : prefix states | horizon x (W masks + SEP)
//   OSR: prefix states | W masks | SEP | 2^(2r+1) masks
//   ROS: rule bits + SEP | prefix states | W masks
// where "prefix states" = prefix_len x (W bits + SEP).
struct TaskConfig {
    TaskKind task = TaskKind::OS;
    uint32_t prefix_len = 10;
    uint32_t lookahead = 0;  // k: target is x^(prefix_len + k); OS/OSR/ROS only
    uint32_t horizon = 1;    // future states predicted in parallel; >1 for OO only
    uint32_t width = 20;
    uint32_t radius = 2;

    void validate() const;
    uint64_t rule_bits() const { return RuleTable::table_size(radius); }
    uint32_t input_length() const;
    uint32_t mask_count() const;
    uint32_t required_steps() const;  // minimum orbit length T
};

struct TaskInstance {
    std::vector<Token> input;
    std::vector<uint8_t> target_bits;
    std::vector<uint32_t> mask_positions;  // strictly increasing, |.| == |target_bits|
};

TaskInstance encode(const Sample& sample, const TaskConfig& config);

struct DecodedPrediction {
    std::vector<LatticeState> states;
    std::optional<RuleTable> rule;  // OSR only
};

// Inverse of the target packing: splits the per-mask predictions back into
// states (and the rule for OSR). SEP/MASK among the predictions is an error.
DecodedPrediction decode_state(std::span<const Token> predicted_at_masks,
                               const TaskConfig& config);

// encode, then decode with the ground-truth targets; true when the original
// states (and rule, for OSR) are reproduced exactly.
bool round_trip_check(const Sample& sample, const TaskConfig& config);

std::string dump(const TaskInstance& instance);  // single-line text form

}  // namespace ecalab
