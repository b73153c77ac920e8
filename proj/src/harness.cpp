#include "ecalab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ecalab::harness {

namespace {

constexpr uint64_t kShuffleTag = 5;
constexpr uint64_t kDropoutTag = 6;

void check_layout(const TaskInstance& ref, const TaskInstance& inst) {
    if (inst.input.size() != ref.input.size() || inst.mask_positions != ref.mask_positions)
        throw std::invalid_argument("make_batch: instances do not share one task layout");
}

std::vector<Sample> load_samples(const std::string& path) {
    return read_all(path);
}

}  // namespace

void ExperimentSpec::validate_against(const DatasetHeader& header) const {
    task.validate();
    model.validate();
    if (header.width != task.width || header.radius != task.radius)
        throw std::invalid_argument("dataset lattice (W=" + std::to_string(header.width) +
                                    ", r=" + std::to_string(header.radius) +
                                    ") disagrees with task config");
    if (header.steps < task.required_steps())
        throw std::invalid_argument("dataset orbits too short for the task");
    if (model.max_seq_len < task.input_length())
        throw std::invalid_argument("model max_seq_len below task input length " +
                                    std::to_string(task.input_length()));
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

nn::Batch make_batch(std::span<const TaskInstance> instances) {
    if (instances.empty()) throw std::invalid_argument("make_batch: no instances");
    const TaskInstance& ref = instances.front();

    nn::Batch batch;
    batch.batch_size = static_cast<uint32_t>(instances.size());
    batch.seq_len = static_cast<uint32_t>(ref.input.size());
    batch.mask_positions = ref.mask_positions;
    batch.tokens.reserve(static_cast<size_t>(batch.batch_size) * batch.seq_len);
    batch.target_bits.reserve(batch.batch_size * ref.target_bits.size());
    for (const TaskInstance& inst : instances) {
        check_layout(ref, inst);
        for (Token t : inst.input) batch.tokens.push_back(static_cast<uint8_t>(t));
        batch.target_bits.insert(batch.target_bits.end(), inst.target_bits.begin(),
                                 inst.target_bits.end());
    }
    return batch;
}

BatchAssembler::BatchAssembler(const std::vector<Sample>& samples, const TaskConfig& task) {
    instances_.reserve(samples.size());
    for (const Sample& s : samples) instances_.push_back(encode(s, task));
}

nn::Batch BatchAssembler::gather(std::span<const uint32_t> indices) const {
    std::vector<TaskInstance> picked;
    picked.reserve(indices.size());
    for (uint32_t i : indices) picked.push_back(instances_[i]);
    return make_batch(picked);
}

namespace {

// Counts correct argmax predictions at masked positions; `block` groups mask
// indices (one group per predicted state) for per-step reporting.
void tally_batch(const nn::Tensor<float>& logits, const nn::Batch& batch, uint32_t block_size,
                 std::vector<uint64_t>& correct, std::vector<uint64_t>& total) {
    const uint32_t V = logits.cols;
    const size_t n_mask = batch.mask_positions.size();
    for (uint32_t b = 0; b < batch.batch_size; ++b) {
        for (size_t i = 0; i < n_mask; ++i) {
            const float* row = logits.row(b * batch.seq_len + batch.mask_positions[i]);
            uint32_t arg = 0;
            for (uint32_t c = 1; c < V; ++c)
                if (row[c] > row[arg]) arg = c;
            const uint32_t block = block_size ? static_cast<uint32_t>(i) / block_size : 0;
            total[block] += 1;
            if (arg == batch.target_bits[b * n_mask + i]) correct[block] += 1;
        }
    }
}

}  // namespace

MetricsRecord eval_accuracy(const nn::ModelConfig& cfg, const nn::Parameters<float>& params,
                            const std::vector<Sample>& samples, const TaskConfig& task,
                            uint32_t batch_size) {
    task.validate();
    cfg.validate();
    if (samples.empty()) throw std::invalid_argument("eval_accuracy: empty dataset");

    const uint32_t n_blocks = task.task == TaskKind::OO ? task.horizon : 1;
    std::vector<uint64_t> correct(n_blocks, 0), total(n_blocks, 0);

    BatchAssembler assembler(samples, task);
    nn::Workspace<float> ws;
    std::vector<uint32_t> indices;
    for (uint32_t begin = 0; begin < samples.size(); begin += batch_size) {
        const uint32_t end = std::min<uint32_t>(begin + batch_size, samples.size());
        indices.resize(end - begin);
        std::iota(indices.begin(), indices.end(), begin);
        nn::Batch batch = assembler.gather(indices);
        nn::forward(cfg, params, batch.tokens.data(), batch.batch_size, batch.seq_len, ws);
        tally_batch(ws.logits, batch, n_blocks > 1 ? task.width : 0, correct, total);
    }

    MetricsRecord rec;
    rec.sample_count = samples.size();
    for (uint32_t blk = 0; blk < n_blocks; ++blk) {
        rec.correct_bits += correct[blk];
        rec.total_bits += total[blk];
        if (n_blocks > 1) rec.per_step.push_back(static_cast<double>(correct[blk]) / total[blk]);
    }
    rec.accuracy = static_cast<double>(rec.correct_bits) / static_cast<double>(rec.total_bits);
    return rec;
}

namespace {

MetricsRecord score_fixed(const std::vector<Sample>& samples, const TaskConfig& task,
                          const std::function<uint8_t(const TaskInstance&, size_t)>& predictor) {
    task.validate();
    if (samples.empty()) throw std::invalid_argument("eval fixture: empty dataset");
    const uint32_t n_blocks = task.task == TaskKind::OO ? task.horizon : 1;
    std::vector<uint64_t> correct(n_blocks, 0), total(n_blocks, 0);
    for (const Sample& s : samples) {
        TaskInstance inst = encode(s, task);
        for (size_t i = 0; i < inst.target_bits.size(); ++i) {
            const uint32_t block = n_blocks > 1 ? static_cast<uint32_t>(i) / task.width : 0;
            total[block] += 1;
            if (predictor(inst, i) == inst.target_bits[i]) correct[block] += 1;
        }
    }
    MetricsRecord rec;
    rec.sample_count = samples.size();
    for (uint32_t blk = 0; blk < n_blocks; ++blk) {
        rec.correct_bits += correct[blk];
        rec.total_bits += total[blk];
        if (n_blocks > 1) rec.per_step.push_back(static_cast<double>(correct[blk]) / total[blk]);
    }
    rec.accuracy = static_cast<double>(rec.correct_bits) / static_cast<double>(rec.total_bits);
    return rec;
}

}  // namespace

MetricsRecord eval_oracle(const std::vector<Sample>& samples, const TaskConfig& task) {
    return score_fixed(samples, task,
                       [](const TaskInstance& inst, size_t i) { return inst.target_bits[i]; });
}

MetricsRecord eval_constant(const std::vector<Sample>& samples, const TaskConfig& task, bool bit) {
    const uint8_t value = bit ? 1 : 0;
    return score_fixed(samples, task, [value](const TaskInstance&, size_t) { return value; });
}

TrainResult train_model(const ExperimentSpec& spec, const ProgressFn& progress) {
    DatasetReader train_reader(spec.train_path);
    spec.validate_against(train_reader.header());
    const DatasetHeader test_header = read_header(spec.test_path);
    spec.validate_against(test_header);

    std::vector<Sample> train = load_samples(spec.train_path);
    if (train.size() < spec.batch_size)
        throw std::invalid_argument("train set smaller than one batch");

    std::vector<Sample> eval_slice;
    {
        DatasetReader reader(spec.test_path);
        Sample s{decode_rule(0, 1), Orbit{}};
        const uint64_t want = std::min<uint64_t>(spec.eval_samples, test_header.sample_count);
        while (eval_slice.size() < want && reader.next(s)) eval_slice.push_back(s);
    }

    BatchAssembler assembler(train, spec.task);

    TrainResult result;
    result.model = spec.model;
    result.params = nn::init_params<float>(spec.model, spec.seed);
    nn::AdamState adam_state = nn::make_adam_state(spec.model);
    nn::Parameters<float> grads = nn::alloc_params<float>(spec.model);
    nn::Workspace<float> ws;

    const uint64_t record_every = spec.eval_every > 0 ? spec.eval_every : 100;
    const uint32_t per_epoch = static_cast<uint32_t>(train.size()) / spec.batch_size;

    std::vector<uint32_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    nn::Parameters<float> best = result.params;
    double best_eval = -1.0;
    uint64_t best_step = 0;
    double loss_accum = 0.0;
    uint64_t loss_count = 0;
    uint64_t epoch = 0;
    uint32_t batch_in_epoch = 0;

    auto reshuffle = [&](uint64_t e) {
        SplitMix64 rng(derive_seed(spec.seed, kShuffleTag, e));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);
    };
    reshuffle(0);

    for (uint64_t step = 1; step <= spec.train_steps; ++step) {
        if (batch_in_epoch == per_epoch) {
            batch_in_epoch = 0;
            reshuffle(++epoch);
        }
        const std::span<const uint32_t> idx(order.data() +
                                                static_cast<size_t>(batch_in_epoch) * spec.batch_size,
                                            spec.batch_size);
        ++batch_in_epoch;
        nn::Batch batch = assembler.gather(idx);
        const float loss =
            nn::train_step(spec.model, result.params, adam_state, spec.adam, batch, grads, ws,
                           derive_seed(spec.seed, kDropoutTag, step));
        loss_accum += loss;
        ++loss_count;

        const bool record = step % record_every == 0 || step == spec.train_steps;
        if (!record) continue;

        CurvePoint point;
        point.step = step;
        point.train_loss = loss_accum / static_cast<double>(loss_count);
        loss_accum = 0.0;
        loss_count = 0;
        if (spec.eval_every > 0 && !eval_slice.empty()) {
            MetricsRecord rec =
                eval_accuracy(spec.model, result.params, eval_slice, spec.task, spec.batch_size);
            point.eval_accuracy = rec.accuracy;
            if (rec.accuracy > best_eval) {
                best_eval = rec.accuracy;
                best = result.params;
                best_step = step;
            }
        }
        result.curve.push_back(point);
        if (progress) progress(point);
    }

    result.last_params = result.params;
    if (best_eval >= 0.0) {
        result.params = best;
        result.best_eval = best_eval;
        result.best_step = best_step;
    }
    return result;
}

namespace {

// Rollout state for one batch of samples: the sliding window of the most
// recent prefix_len states, encoded exactly like the training layout.
std::vector<uint8_t> window_tokens(const std::vector<std::vector<LatticeState>>& windows,
                                   const TaskConfig& task) {
    const uint32_t W = task.width;
    std::vector<uint8_t> tokens;
    tokens.reserve(windows.size() * task.input_length());
    for (const auto& window : windows) {
        if (window.size() != task.prefix_len)
            throw std::logic_error("rollout: window does not hold prefix_len states");
        for (const LatticeState& s : window) {
            for (uint32_t w = 0; w < W; ++w)
                tokens.push_back(s.get(w) ? static_cast<uint8_t>(Token::One)
                                          : static_cast<uint8_t>(Token::Zero));
            tokens.push_back(static_cast<uint8_t>(Token::Sep));
        }
        for (uint32_t w = 0; w < W; ++w) tokens.push_back(static_cast<uint8_t>(Token::Mask));
    }
    return tokens;
}

}  // namespace

MetricsRecord autoregressive_rollout(const nn::ModelConfig& cfg,
                                     const nn::Parameters<float>& params,
                                     const std::vector<Sample>& samples, const TaskConfig& task,
                                     uint32_t steps, bool teacher_forcing, uint32_t batch_size) {
    task.validate();
    if (task.task != TaskKind::OS || task.lookahead != 0)
        throw std::invalid_argument("autoregressive_rollout: needs an OS task with lookahead 0");
    if (steps < 1) throw std::invalid_argument("autoregressive_rollout: steps must be >= 1");
    if (samples.empty()) throw std::invalid_argument("autoregressive_rollout: empty dataset");
    if (cfg.max_seq_len < task.input_length())
        throw std::invalid_argument("autoregressive_rollout: layout exceeds model max_seq_len");

    const uint32_t P = task.prefix_len, W = task.width;
    for (const Sample& s : samples)
        if (s.orbit.steps() < P + steps)
            throw std::out_of_range("autoregressive_rollout: orbit too short for rollout depth");

    const uint32_t seq_len = task.input_length();
    std::vector<uint64_t> correct(steps, 0), total(steps, 0);
    nn::Workspace<float> ws;

    for (uint32_t begin = 0; begin < samples.size(); begin += batch_size) {
        const uint32_t end = std::min<uint32_t>(begin + batch_size, samples.size());
        const uint32_t B = end - begin;

        std::vector<std::vector<LatticeState>> windows(B);
        for (uint32_t b = 0; b < B; ++b)
            windows[b].assign(samples[begin + b].orbit.states.begin(),
                              samples[begin + b].orbit.states.begin() + P);

        for (uint32_t step = 1; step <= steps; ++step) {
            std::vector<uint8_t> tokens = window_tokens(windows, task);
            if (tokens.size() != static_cast<size_t>(B) * seq_len)
                throw std::logic_error("rollout: layout length drifted from the codec formula");
            nn::forward(cfg, params, tokens.data(), B, seq_len, ws);

            for (uint32_t b = 0; b < B; ++b) {
                const LatticeState& truth = samples[begin + b].orbit.states[P + step - 1];
                LatticeState predicted(W);
                for (uint32_t w = 0; w < W; ++w) {
                    const float* row = ws.logits.row(b * seq_len + (P * (W + 1) + w));
                    // score with the full vocabulary: SEP/MASK count as wrong
                    uint32_t arg = 0;
                    for (uint32_t c = 1; c < cfg.vocab_size; ++c)
                        if (row[c] > row[arg]) arg = c;
                    total[step - 1] += 1;
                    if (arg == (truth.get(w) ? 1u : 0u)) correct[step - 1] += 1;
                    // feed back a hard bit: argmax restricted to {0, 1}
                    predicted.set(w, row[1] > row[0]);
                }
                windows[b].erase(windows[b].begin());
                windows[b].push_back(teacher_forcing ? truth : predicted);
            }
        }
    }

    MetricsRecord rec;
    rec.sample_count = samples.size();
    for (uint32_t s = 0; s < steps; ++s) {
        rec.correct_bits += correct[s];
        rec.total_bits += total[s];
        rec.per_step.push_back(static_cast<double>(correct[s]) / static_cast<double>(total[s]));
    }
    rec.accuracy = static_cast<double>(rec.correct_bits) / static_cast<double>(rec.total_bits);
    return rec;
}

std::vector<ArVsLaRow> ar_vs_la(const nn::ModelConfig& ar_cfg,
                                const nn::Parameters<float>& ar_params,
                                const std::vector<LaCheckpoint>& la_models,
                                const std::vector<Sample>& samples, const TaskConfig& os_task) {
    if (la_models.empty()) throw std::invalid_argument("ar_vs_la: no look-ahead checkpoints");

    uint32_t max_horizon = 0;
    for (const LaCheckpoint& la : la_models) {
        if (la.lookahead < 1) throw std::invalid_argument("ar_vs_la: look-ahead models need k >= 1");
        max_horizon = std::max(max_horizon, la.lookahead + 1);
    }

    MetricsRecord ar = autoregressive_rollout(ar_cfg, ar_params, samples, os_task, max_horizon);

    std::vector<ArVsLaRow> rows;
    for (const LaCheckpoint& la : la_models) {
        TaskConfig la_task = os_task;
        la_task.lookahead = la.lookahead;
        MetricsRecord rec = eval_accuracy(la.cfg, la.params, samples, la_task);
        ArVsLaRow row;
        row.horizon = la.lookahead + 1;
        row.ar_accuracy = ar.per_step[row.horizon - 1];
        row.la_accuracy = rec.accuracy;
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const ArVsLaRow& a, const ArVsLaRow& b) { return a.horizon < b.horizon; });
    return rows;
}

std::vector<DepthSweepRow> depth_sweep(const std::vector<uint32_t>& layer_counts,
                                       const ExperimentSpec& base_spec, const ProgressFn& progress) {
    if (layer_counts.empty()) throw std::invalid_argument("depth_sweep: no layer counts");
    if (base_spec.task.task != TaskKind::OO)
        throw std::invalid_argument("depth_sweep: base spec must use the OO task");

    std::vector<Sample> test = load_samples(base_spec.test_path);

    std::vector<DepthSweepRow> rows;
    for (uint32_t depth : layer_counts) {
        ExperimentSpec spec = base_spec;
        spec.model.num_layers = depth;
        TrainResult trained = train_model(spec, progress);
        MetricsRecord rec =
            eval_accuracy(spec.model, trained.params, test, spec.task, spec.batch_size);
        for (uint32_t s = 0; s < spec.task.horizon; ++s) {
            DepthSweepRow row;
            row.depth = depth;
            row.step = s + 1;
            row.accuracy = rec.per_step.empty() ? rec.accuracy : rec.per_step[s];
            row.n_bits = rec.total_bits / spec.task.horizon;
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataFormatError(path + ": cannot open for writing");
    out << std::setprecision(10);
    return out;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsCsvRow>& rows) {
    std::ofstream out = open_csv(path);
    out << "experiment_id,task,k,depth,step,accuracy,n_bits\n";
    for (const MetricsCsvRow& r : rows)
        out << r.experiment_id << ',' << r.task << ',' << r.lookahead << ',' << r.depth << ','
            << r.step << ',' << r.accuracy << ',' << r.n_bits << '\n';
    if (!out.flush()) throw DataFormatError(path + ": write failed");
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out = open_csv(path);
    out << "step,train_loss,eval_accuracy\n";
    for (const CurvePoint& p : curve) {
        out << p.step << ',' << p.train_loss << ',';
        if (p.eval_accuracy) out << *p.eval_accuracy;
        out << '\n';
    }
    if (!out.flush()) throw DataFormatError(path + ": write failed");
}

void write_coverage_csv(const std::string& path, const std::vector<ecalab::CoveragePoint>& curve) {
    std::ofstream out = open_csv(path);
    out << "t,mean_coverage,frac_determined\n";
    for (const ecalab::CoveragePoint& p : curve)
        out << p.t << ',' << p.mean_coverage << ',' << p.frac_determined << '\n';
    if (!out.flush()) throw DataFormatError(path + ": write failed");
}

}  // namespace ecalab::harness
