// ecalab: generate ECA datasets, infer rules, train and evaluate masked
// sequence models over them.
//
// Exit codes: 0 success, 2 usage/config error, 3 data/file error,
// 4 numeric failure, 5 inconsistent orbit.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "ecalab/config.hpp"
#include "ecalab/harness.hpp"
#include "ecalab/kernels.hpp"
#include "ecalab/plot.hpp"
#include "ecalab/rule_infer.hpp"

namespace fs = std::filesystem;
using namespace ecalab;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInconsistent = 5;

struct GenDataArgs {
    std::string out_dir = "data";
    std::string profile = "desk";
    uint32_t radius = 0, width = 0, steps = 0;  // 0: take from profile
    uint64_t train_count = 0, test_count = 0;
    uint64_t seed = 0;
    bool skip_check = false;
};

struct TrainArgs {
    std::string config_path;
    std::string out_dir = "run";
};

struct EvalArgs {
    std::string checkpoint, data, out_dir = "eval";
    std::string task = "os";
    uint32_t prefix_len = 10, lookahead = 0, horizon = 1;
    uint32_t batch_size = 32;
    bool oracle = false, constant = false;
};

struct RolloutArgs {
    std::string checkpoint, data, out_dir = "rollout";
    uint32_t prefix_len = 10, steps = 10, batch_size = 32;
    uint64_t max_samples = 0;
    bool teacher_forcing = false, plot = false;
};

struct ArVsLaArgs {
    std::string ar_checkpoint, data, out_dir = "ar_vs_la";
    std::vector<std::string> la_checkpoints;
    std::vector<uint32_t> la_ks;
    uint32_t prefix_len = 10;
    uint64_t max_samples = 0;
    bool plot = false;
};

struct DepthSweepArgs {
    std::string config_path, out_dir = "depth_sweep";
    std::vector<uint32_t> layers;
    bool plot = false;
};

struct InferArgs {
    std::string input;
    std::string text;
    uint32_t radius = 2;
};

TaskConfig task_from_config(const RunConfig& cfg) {
    TaskConfig task;
    task.task = parse_task(cfg.get_or("task", "task", "os"));
    task.prefix_len = static_cast<uint32_t>(cfg.get_u64("task", "prefix_len", 10));
    task.lookahead = static_cast<uint32_t>(cfg.get_u64("task", "lookahead", 0));
    task.horizon = static_cast<uint32_t>(
        cfg.get_u64("task", "horizon", task.task == TaskKind::OO ? 4 : 1));
    task.width = static_cast<uint32_t>(cfg.get_u64("task", "width", 20));
    task.radius = static_cast<uint32_t>(cfg.get_u64("task", "radius", 2));
    return task;
}

nn::ModelConfig model_from_config(const RunConfig& cfg, const TaskConfig& task) {
    nn::ModelConfig model;
    model.num_layers = static_cast<uint32_t>(cfg.get_u64("model", "layers", 2));
    model.num_heads = static_cast<uint32_t>(cfg.get_u64("model", "heads", 4));
    model.d_model = static_cast<uint32_t>(cfg.get_u64("model", "d_model", 64));
    model.d_ff = static_cast<uint32_t>(cfg.get_u64("model", "d_ff", 256));
    model.max_seq_len =
        static_cast<uint32_t>(cfg.get_u64("model", "max_seq_len", task.input_length()));
    model.dropout_rate = static_cast<float>(cfg.get_double("model", "dropout", 0.0));
    return model;
}

harness::ExperimentSpec spec_from_config(const RunConfig& cfg) {
    harness::ExperimentSpec spec;
    spec.task = task_from_config(cfg);
    spec.model = model_from_config(cfg, spec.task);
    spec.train_path = cfg.get("data", "train");
    spec.test_path = cfg.get("data", "test");
    spec.train_steps = cfg.get_u64("train", "steps", 10'000);
    spec.batch_size = static_cast<uint32_t>(cfg.get_u64("train", "batch_size", 32));
    spec.eval_every = static_cast<uint32_t>(cfg.get_u64("train", "eval_every", 500));
    spec.eval_samples = static_cast<uint32_t>(cfg.get_u64("train", "eval_samples", 1000));
    spec.adam.lr = static_cast<float>(cfg.get_double("train", "lr", 3e-4));
    spec.adam.warmup_steps = static_cast<uint32_t>(cfg.get_u64("train", "warmup_steps", 0));
    spec.seed = cfg.get_u64("train", "seed", 0);
    return spec;
}

RunConfig resolve_config(const harness::ExperimentSpec& spec) {
    RunConfig cfg;
    cfg.set("data", "train", spec.train_path);
    cfg.set("data", "test", spec.test_path);
    cfg.set("task", "task", task_name(spec.task.task));
    cfg.set_u64("task", "prefix_len", spec.task.prefix_len);
    cfg.set_u64("task", "lookahead", spec.task.lookahead);
    cfg.set_u64("task", "horizon", spec.task.horizon);
    cfg.set_u64("task", "width", spec.task.width);
    cfg.set_u64("task", "radius", spec.task.radius);
    cfg.set_u64("model", "layers", spec.model.num_layers);
    cfg.set_u64("model", "heads", spec.model.num_heads);
    cfg.set_u64("model", "d_model", spec.model.d_model);
    cfg.set_u64("model", "d_ff", spec.model.d_ff);
    cfg.set_u64("model", "max_seq_len", spec.model.max_seq_len);
    cfg.set_double("model", "dropout", spec.model.dropout_rate);
    cfg.set_u64("train", "steps", spec.train_steps);
    cfg.set_u64("train", "batch_size", spec.batch_size);
    cfg.set_u64("train", "eval_every", spec.eval_every);
    cfg.set_u64("train", "eval_samples", spec.eval_samples);
    cfg.set_double("train", "lr", spec.adam.lr);
    cfg.set_u64("train", "warmup_steps", spec.adam.warmup_steps);
    cfg.set_u64("train", "seed", spec.seed);
    return cfg;
}

std::vector<Sample> load_limited(const std::string& path, uint64_t max_samples) {
    DatasetReader reader(path);
    std::vector<Sample> out;
    Sample s{decode_rule(0, 1), Orbit{}};
    while ((max_samples == 0 || out.size() < max_samples) && reader.next(s)) out.push_back(s);
    return out;
}

TaskConfig os_task_for(const DatasetHeader& header, uint32_t prefix_len) {
    TaskConfig task;
    task.task = TaskKind::OS;
    task.prefix_len = prefix_len;
    task.lookahead = 0;
    task.width = header.width;
    task.radius = header.radius;
    return task;
}

int run_gen_data(const GenDataArgs& args) {
    SplitSpec spec = args.profile == "paper" ? SplitSpec::full(args.seed)
                                             : SplitSpec::desk(args.seed);
    if (args.radius) spec.radius = args.radius;
    if (args.width) spec.width = args.width;
    if (args.steps) spec.steps = args.steps;
    if (args.train_count) spec.train_count = args.train_count;
    if (args.test_count) spec.test_count = args.test_count;

    if (spec.train_count >= 500'000)
        std::cerr << "note: generating " << spec.train_count
                  << " samples; this runs a while on one machine\n";

    fs::create_directories(args.out_dir);
    const std::string train_path = (fs::path(args.out_dir) / "train.ecad").string();
    const std::string test_path = (fs::path(args.out_dir) / "test.ecad").string();
    generate_split(spec, train_path, test_path);

    if (!args.skip_check) {
        std::set<std::vector<uint64_t>> test_rules;
        {
            DatasetReader reader(test_path);
            Sample s{decode_rule(0, 1), Orbit{}};
            while (reader.next(s)) {
                std::vector<uint64_t> key;
                for (size_t j = 0; j < s.rule.outputs().word_count(); ++j)
                    key.push_back(s.rule.outputs().word(j));
                test_rules.insert(key);
            }
        }
        DatasetReader reader(train_path);
        Sample s{decode_rule(0, 1), Orbit{}};
        while (reader.next(s)) {
            std::vector<uint64_t> key;
            for (size_t j = 0; j < s.rule.outputs().word_count(); ++j)
                key.push_back(s.rule.outputs().word(j));
            if (test_rules.count(key)) {
                std::cerr << "post-write check failed: train/test rule sets intersect\n";
                return kExitData;
            }
        }
        std::cout << "post-write check: train/test rule sets are disjoint\n";
    }

    RunConfig manifest;
    manifest.set("split", "profile", args.profile);
    manifest.set_u64("split", "radius", spec.radius);
    manifest.set_u64("split", "width", spec.width);
    manifest.set_u64("split", "steps", spec.steps);
    manifest.set_u64("split", "train_count", spec.train_count);
    manifest.set_u64("split", "test_count", spec.test_count);
    manifest.set_u64("split", "master_seed", spec.master_seed);
    manifest.set("files", "train", train_path);
    manifest.set("files", "test", test_path);
    manifest.write_file((fs::path(args.out_dir) / "manifest.txt").string());

    std::cout << "wrote " << train_path << " (" << spec.train_count << " samples) and "
              << test_path << " (" << spec.test_count << " samples)\n";
    return 0;
}

int run_infer_rule(const InferArgs& args) {
    std::string text = args.text;
    if (!args.input.empty()) {
        std::ifstream in(args.input);
        if (!in) {
            std::cerr << args.input << ": cannot open\n";
            return kExitData;
        }
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    if (text.empty()) {
        std::cerr << "infer-rule: provide --input FILE or --text ROWS\n";
        return kExitUsage;
    }

    Orbit o = parse_orbit(text);
    std::cout << "orbit: " << o.steps() << " states, width " << o.width() << ", radius "
              << args.radius << "\n";
    std::cout << "tmin_estimate(r=" << args.radius << ", W=" << o.width()
              << ") = " << tmin_estimate(args.radius, o.width()) << "\n";

    PartialRule partial = observe(o, args.radius);
    CoverageReport rep = coverage(partial);
    std::cout << "coverage: " << rep.observed_count << "/" << rep.total << " neighborhoods ("
              << rep.coverage_fraction << ")\n";
    std::cout << "consistent rules: 2^" << rep.consistent_rule_count_log2 << "\n";
    if (auto rule = complete_rule(partial)) {
        std::cout << "rule fully determined: ";
        if (rule->size() <= 64)
            std::cout << "rule number " << encode_rule(*rule) << "\n";
        else
            std::cout << "table " << rule->outputs().to_string() << "\n";
    } else {
        std::cout << "rule not fully determined by this orbit\n";
    }
    return 0;
}

int run_train(const TrainArgs& args) {
    RunConfig file_cfg = RunConfig::parse_file(args.config_path);
    harness::ExperimentSpec spec = spec_from_config(file_cfg);

    fs::create_directories(args.out_dir);
    resolve_config(spec).write_file((fs::path(args.out_dir) / "config.resolved").string());

    std::cout << "training " << task_name(spec.task.task) << " (k=" << spec.task.lookahead
              << "), L=" << spec.model.num_layers << " d=" << spec.model.d_model << " on "
              << spec.train_path << " [" << kern::backend_name(kern::active_backend())
              << " kernels]\n";

    harness::TrainResult result;
    const std::string best_path = (fs::path(args.out_dir) / "checkpoint_best.eckp").string();
    const std::string last_path = (fs::path(args.out_dir) / "checkpoint_last.eckp").string();
    try {
        result = harness::train_model(spec, [&](const harness::CurvePoint& p) {
            std::cout << "step " << p.step << "  loss " << p.train_loss;
            if (p.eval_accuracy) std::cout << "  eval " << *p.eval_accuracy;
            std::cout << std::endl;
        });
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }

    nn::save_checkpoint(spec.model, result.params, best_path);
    nn::save_checkpoint(spec.model, result.last_params, last_path);
    harness::write_curve_csv((fs::path(args.out_dir) / "curve.csv").string(), result.curve);
    std::cout << "best eval " << result.best_eval << " at step " << result.best_step << "\n"
              << "wrote " << best_path << ", " << last_path << "\n";
    return 0;
}

int run_eval(const EvalArgs& args) {
    fs::create_directories(args.out_dir);
    std::vector<Sample> samples = load_limited(args.data, 0);
    const DatasetHeader header = read_header(args.data);

    TaskConfig task;
    task.task = parse_task(args.task);
    task.prefix_len = args.prefix_len;
    task.lookahead = args.lookahead;
    task.horizon = args.horizon;
    task.width = header.width;
    task.radius = header.radius;

    harness::MetricsRecord rec;
    std::string experiment_id;
    if (args.oracle) {
        rec = harness::eval_oracle(samples, task);
        experiment_id = "oracle";
    } else if (args.constant) {
        rec = harness::eval_constant(samples, task, false);
        experiment_id = "constant0";
    } else {
        auto [cfg, params] = nn::load_checkpoint(args.checkpoint);
        rec = harness::eval_accuracy(cfg, params, samples, task, args.batch_size);
        experiment_id = "eval";
    }

    std::vector<harness::MetricsCsvRow> rows;
    if (rec.per_step.empty()) {
        rows.push_back(harness::MetricsCsvRow{experiment_id, task_name(task.task), task.lookahead,
                                              0, 0, rec.accuracy, rec.total_bits});
    } else {
        for (size_t s = 0; s < rec.per_step.size(); ++s)
            rows.push_back(harness::MetricsCsvRow{experiment_id, task_name(task.task),
                                                  task.lookahead, 0, static_cast<uint32_t>(s + 1),
                                                  rec.per_step[s],
                                                  rec.total_bits / rec.per_step.size()});
    }
    const std::string csv = (fs::path(args.out_dir) / "metrics.csv").string();
    harness::write_metrics_csv(csv, rows);
    std::cout << "per-bit accuracy " << rec.accuracy << " over " << rec.total_bits << " bits ("
              << rec.sample_count << " samples); wrote " << csv << "\n";
    return 0;
}

int run_rollout(const RolloutArgs& args) {
    fs::create_directories(args.out_dir);
    auto [cfg, params] = nn::load_checkpoint(args.checkpoint);
    std::vector<Sample> samples = load_limited(args.data, args.max_samples);
    TaskConfig task = os_task_for(read_header(args.data), args.prefix_len);

    harness::MetricsRecord rec = harness::autoregressive_rollout(
        cfg, params, samples, task, args.steps, args.teacher_forcing, args.batch_size);

    std::vector<harness::MetricsCsvRow> rows;
    for (size_t s = 0; s < rec.per_step.size(); ++s)
        rows.push_back(harness::MetricsCsvRow{
            args.teacher_forcing ? "rollout_teacher_forced" : "rollout", "os", 0, 0,
            static_cast<uint32_t>(s + 1), rec.per_step[s], rec.total_bits / rec.per_step.size()});
    const std::string csv = (fs::path(args.out_dir) / "rollout.csv").string();
    harness::write_metrics_csv(csv, rows);
    std::cout << "rollout over " << rec.per_step.size() << " steps, overall accuracy "
              << rec.accuracy << "; wrote " << csv << "\n";

    if (args.plot) {
        LineChart chart("Autoregressive rollout", "rollout step", "per-bit accuracy");
        std::vector<double> xs, ys;
        for (size_t s = 0; s < rec.per_step.size(); ++s) {
            xs.push_back(static_cast<double>(s + 1));
            ys.push_back(rec.per_step[s]);
        }
        chart.set_y_range(0.0, 1.0);
        chart.add_series("accuracy", xs, ys);
        chart.write_svg((fs::path(args.out_dir) / "rollout.svg").string());
    }
    return 0;
}

int run_ar_vs_la(const ArVsLaArgs& args) {
    if (args.la_checkpoints.size() != args.la_ks.size() || args.la_checkpoints.empty()) {
        std::cerr << "ar-vs-la: provide matching --la-checkpoint and --la-k lists\n";
        return kExitUsage;
    }
    fs::create_directories(args.out_dir);
    auto [ar_cfg, ar_params] = nn::load_checkpoint(args.ar_checkpoint);
    std::vector<harness::LaCheckpoint> las;
    for (size_t i = 0; i < args.la_checkpoints.size(); ++i) {
        auto [cfg, params] = nn::load_checkpoint(args.la_checkpoints[i]);
        las.push_back(harness::LaCheckpoint{args.la_ks[i], cfg, std::move(params)});
    }
    std::vector<Sample> samples = load_limited(args.data, args.max_samples);
    TaskConfig task = os_task_for(read_header(args.data), args.prefix_len);

    std::vector<harness::ArVsLaRow> table = harness::ar_vs_la(ar_cfg, ar_params, las, samples, task);

    std::vector<harness::MetricsCsvRow> rows;
    for (const harness::ArVsLaRow& r : table) {
        rows.push_back(harness::MetricsCsvRow{"ar", "os", 0, 0, r.horizon, r.ar_accuracy, 0});
        rows.push_back(
            harness::MetricsCsvRow{"la", "os", r.horizon - 1, 0, r.horizon, r.la_accuracy, 0});
        std::cout << "horizon " << r.horizon << ": AR " << r.ar_accuracy << " vs LA "
                  << r.la_accuracy << "\n";
    }
    const std::string csv = (fs::path(args.out_dir) / "ar_vs_la.csv").string();
    harness::write_metrics_csv(csv, rows);
    std::cout << "wrote " << csv << "\n";

    if (args.plot) {
        LineChart chart("AR rollout vs direct look-ahead", "horizon (states past prefix)",
                        "per-bit accuracy");
        std::vector<double> xs, ar, la;
        for (const harness::ArVsLaRow& r : table) {
            xs.push_back(r.horizon);
            ar.push_back(r.ar_accuracy);
            la.push_back(r.la_accuracy);
        }
        chart.set_y_range(0.0, 1.0);
        chart.add_series("AR", xs, ar);
        chart.add_series("LA", xs, la);
        chart.write_svg((fs::path(args.out_dir) / "ar_vs_la.svg").string());
    }
    return 0;
}

int run_depth_sweep(const DepthSweepArgs& args) {
    if (args.layers.empty()) {
        std::cerr << "depth-sweep: provide --layers\n";
        return kExitUsage;
    }
    RunConfig file_cfg = RunConfig::parse_file(args.config_path);
    harness::ExperimentSpec spec = spec_from_config(file_cfg);
    if (spec.task.task != TaskKind::OO) {
        std::cerr << "depth-sweep: config must select the oo task\n";
        return kExitUsage;
    }
    fs::create_directories(args.out_dir);
    resolve_config(spec).write_file((fs::path(args.out_dir) / "config.resolved").string());

    std::vector<harness::DepthSweepRow> table = harness::depth_sweep(args.layers, spec, nullptr);

    std::vector<harness::MetricsCsvRow> rows;
    for (const harness::DepthSweepRow& r : table) {
        rows.push_back(harness::MetricsCsvRow{"depth_sweep", "oo", 0, r.depth, r.step, r.accuracy,
                                              r.n_bits});
        std::cout << "depth " << r.depth << " step " << r.step << ": " << r.accuracy << "\n";
    }
    const std::string csv = (fs::path(args.out_dir) / "depth_sweep.csv").string();
    harness::write_metrics_csv(csv, rows);
    std::cout << "wrote " << csv << "\n";

    if (args.plot) {
        LineChart chart("Accuracy per future state, by depth", "future state", "per-bit accuracy");
        chart.set_y_range(0.0, 1.0);
        for (uint32_t depth : args.layers) {
            std::vector<double> xs, ys;
            for (const harness::DepthSweepRow& r : table)
                if (r.depth == depth) {
                    xs.push_back(r.step);
                    ys.push_back(r.accuracy);
                }
            chart.add_series("L=" + std::to_string(depth), xs, ys);
        }
        chart.write_svg((fs::path(args.out_dir) / "depth_sweep.svg").string());
    }
    return 0;
}

int run_inspect(const std::string& path) {
    std::cout << describe(read_header(path));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECA sequence-model laboratory"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a rule-disjoint train/test split");
    gen->add_option("--out", gen_args.out_dir, "output directory");
    gen->add_option("--profile", gen_args.profile, "desk (1e5/1e4) or paper (9.5e5/1e5)")
        ->check(CLI::IsMember({"desk", "paper"}));
    gen->add_option("--radius", gen_args.radius, "neighborhood radius");
    gen->add_option("--width", gen_args.width, "lattice width");
    gen->add_option("--steps", gen_args.steps, "orbit length");
    gen->add_option("--train-count", gen_args.train_count, "training samples");
    gen->add_option("--test-count", gen_args.test_count, "test samples");
    gen->add_option("--seed", gen_args.seed, "master seed");
    gen->add_flag("--skip-check", gen_args.skip_check, "skip the post-write disjointness check");

    InferArgs infer_args;
    CLI::App* infer = app.add_subcommand("infer-rule", "recover a rule from an observed orbit");
    infer->add_option("--input", infer_args.input, "orbit text file, one state per line");
    infer->add_option("--text", infer_args.text, "inline orbit rows, newline separated");
    infer->add_option("--radius", infer_args.radius, "assumed neighborhood radius");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", train_args.config_path, "config file")->required();
    train->add_option("--out", train_args.out_dir, "run directory");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "per-bit accuracy of a checkpoint on a dataset");
    eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint");
    eval->add_option("--data", eval_args.data, "dataset file")->required();
    eval->add_option("--out", eval_args.out_dir, "output directory");
    eval->add_option("--task", eval_args.task, "os, oo, osr or ros");
    eval->add_option("--prefix-len", eval_args.prefix_len, "states shown to the model");
    eval->add_option("--lookahead", eval_args.lookahead, "look-ahead k");
    eval->add_option("--horizon", eval_args.horizon, "oo: future states predicted");
    eval->add_option("--batch-size", eval_args.batch_size, "evaluation batch size");
    eval->add_flag("--oracle", eval_args.oracle, "metric self-check: score ground truth");
    eval->add_flag("--constant", eval_args.constant, "metric self-check: constant-zero predictor");

    RolloutArgs roll_args;
    CLI::App* roll = app.add_subcommand("rollout", "autoregressive orbit continuation");
    roll->add_option("--checkpoint", roll_args.checkpoint, "os k=0 checkpoint")->required();
    roll->add_option("--data", roll_args.data, "dataset file")->required();
    roll->add_option("--out", roll_args.out_dir, "output directory");
    roll->add_option("--prefix-len", roll_args.prefix_len, "context window in states");
    roll->add_option("--steps", roll_args.steps, "rollout depth");
    roll->add_option("--batch-size", roll_args.batch_size, "batch size");
    roll->add_option("--max-samples", roll_args.max_samples, "cap evaluated samples (0: all)");
    roll->add_flag("--teacher-forcing", roll_args.teacher_forcing,
                   "feed ground-truth states instead of predictions");
    roll->add_flag("--plot", roll_args.plot, "also write an SVG chart");

    ArVsLaArgs avl_args;
    CLI::App* avl = app.add_subcommand("ar-vs-la", "autoregressive vs look-ahead comparison");
    avl->add_option("--ar-checkpoint", avl_args.ar_checkpoint, "os k=0 checkpoint")->required();
    avl->add_option("--la-checkpoint", avl_args.la_checkpoints, "look-ahead checkpoints");
    avl->add_option("--la-k", avl_args.la_ks, "look-ahead k per checkpoint");
    avl->add_option("--data", avl_args.data, "dataset file")->required();
    avl->add_option("--out", avl_args.out_dir, "output directory");
    avl->add_option("--prefix-len", avl_args.prefix_len, "context window in states");
    avl->add_option("--max-samples", avl_args.max_samples, "cap evaluated samples (0: all)");
    avl->add_flag("--plot", avl_args.plot, "also write an SVG chart");

    DepthSweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("depth-sweep", "train oo models across depths");
    sweep->add_option("--config", sweep_args.config_path, "base oo train config")->required();
    sweep->add_option("--layers", sweep_args.layers, "layer counts to sweep")->required();
    sweep->add_option("--out", sweep_args.out_dir, "output directory");
    sweep->add_flag("--plot", sweep_args.plot, "also write an SVG chart");

    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect-data", "print a dataset header");
    inspect->add_option("path", inspect_path, "dataset file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(gen_args);
        if (infer->parsed()) return run_infer_rule(infer_args);
        if (train->parsed()) return run_train(train_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (roll->parsed()) return run_rollout(roll_args);
        if (avl->parsed()) return run_ar_vs_la(avl_args);
        if (sweep->parsed()) return run_depth_sweep(sweep_args);
        if (inspect->parsed()) return run_inspect(inspect_path);
    } catch (const InconsistentOrbitError& e) {
        std::cerr << "inconsistent orbit: " << e.what() << "\n";
        return kExitInconsistent;
    } catch (const DataFormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
