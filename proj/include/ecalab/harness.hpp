#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecalab/dataset.hpp"
#include "ecalab/nn.hpp"
#include "ecalab/rule_infer.hpp"
#include "ecalab/task_codec.hpp"

namespace ecalab::harness {

struct ExperimentSpec {
    TaskConfig task;
    nn::ModelConfig model;
    std::string train_path;
    std::string test_path;
    uint64_t train_steps = 10'000;
    uint32_t batch_size = 64;
    uint32_t eval_every = 500;      // 0 disables periodic eval
    uint32_t eval_samples = 1'000;  // held-out slice used during training
    nn::AdamConfig adam;
    uint64_t seed = 0;

    void validate_against(const DatasetHeader& header) const;
};

struct MetricsRecord {
    double accuracy = 0.0;
    uint64_t correct_bits = 0;
    uint64_t total_bits = 0;
    uint64_t sample_count = 0;
    // per-state-block accuracy: OO eval fills one entry per predicted state,
    // rollouts one entry per rollout step.
    std::vector<double> per_step;
};

struct CurvePoint {
    uint64_t step = 0;
    double train_loss = 0.0;
    std::optional<double> eval_accuracy;
};

struct TrainResult {
    nn::ModelConfig model;
    nn::Parameters<float> params;      // best eval checkpoint (last params if no eval ran)
    nn::Parameters<float> last_params;
    std::vector<CurvePoint> curve;
    double best_eval = 0.0;
    uint64_t best_step = 0;
};

// Assembles one uniform-layout batch; all instances must share the layout.
nn::Batch make_batch(std::span<const TaskInstance> instances);

// Batches `count` samples starting at `begin` from pre-encoded instances.
class BatchAssembler {
public:
    BatchAssembler(const std::vector<Sample>& samples, const TaskConfig& task);
    nn::Batch gather(std::span<const uint32_t> indices) const;
    size_t size() const { return instances_.size(); }

private:
    std::vector<TaskInstance> instances_;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

// Shuffled-batch training with periodic held-out evaluation; returns the
// best-eval checkpoint plus the full curve. Deterministic given spec.seed.
TrainResult train_model(const ExperimentSpec& spec, const ProgressFn& progress = nullptr);

// Micro-averaged per-bit accuracy over all masked positions. A SEP or MASK
// argmax at a masked position counts as incorrect.
MetricsRecord eval_accuracy(const nn::ModelConfig& cfg, const nn::Parameters<float>& params,
                            const std::vector<Sample>& samples, const TaskConfig& task,
                            uint32_t batch_size = 32);

// Metric self-check fixtures that bypass the model: the oracle predictor
// replays the ground-truth bits (accuracy is 1 by construction), the constant
// predictor answers one bit everywhere.
MetricsRecord eval_oracle(const std::vector<Sample>& samples, const TaskConfig& task);
MetricsRecord eval_constant(const std::vector<Sample>& samples, const TaskConfig& task, bool bit);

// Rollout from each sample's prefix: predict the next state, append the
// hard-decoded bits, slide the window, repeat. Per-step accuracy is measured
// against the true orbit. teacher_forcing feeds ground-truth states instead
// of predictions (per-step accuracies then equal independent one-step evals).
MetricsRecord autoregressive_rollout(const nn::ModelConfig& cfg,
                                     const nn::Parameters<float>& params,
                                     const std::vector<Sample>& samples, const TaskConfig& task,
                                     uint32_t steps, bool teacher_forcing = false,
                                     uint32_t batch_size = 32);

struct ArVsLaRow {
    uint32_t horizon = 0;  // states beyond the prefix: AR rollout of `horizon` steps
    double ar_accuracy = 0.0;
    double la_accuracy = 0.0;  // direct prediction with lookahead = horizon - 1
};

struct LaCheckpoint {
    uint32_t lookahead = 0;
    nn::ModelConfig cfg;
    nn::Parameters<float> params;
};

std::vector<ArVsLaRow> ar_vs_la(const nn::ModelConfig& ar_cfg,
                                const nn::Parameters<float>& ar_params,
                                const std::vector<LaCheckpoint>& la_models,
                                const std::vector<Sample>& samples, const TaskConfig& os_task);

struct DepthSweepRow {
    uint32_t depth = 0;
    uint32_t step = 0;  // 1-based future state index
    double accuracy = 0.0;
    uint64_t n_bits = 0;
};

// Trains one OO model per depth under the same budget and reports accuracy
// per predicted future state.
std::vector<DepthSweepRow> depth_sweep(const std::vector<uint32_t>& layer_counts,
                                       const ExperimentSpec& base_spec,
                                       const ProgressFn& progress = nullptr);

// CSV row in the shared metrics schema.
struct MetricsCsvRow {
    std::string experiment_id;
    std::string task;
    uint32_t lookahead = 0;
    uint32_t depth = 0;
    uint32_t step = 0;
    double accuracy = 0.0;
    uint64_t n_bits = 0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsCsvRow>& rows);
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);
void write_coverage_csv(const std::string& path, const std::vector<ecalab::CoveragePoint>& curve);

}  // namespace ecalab::harness
