#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "saf/equivalence.hpp"
#include "saf/parallel.hpp"
#include "saf/trainer.hpp"

namespace {

using namespace saf;

// Shared flag block mirroring the ExperimentConfig keys; set flags win
// over config-file values.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value configuration file");
        auto passthrough = [this](const std::string& key) {
            return [this, key](const std::string& value) { overrides.emplace_back(key, value); };
        };
        cmd->add_option_function<std::string>("--dataset", passthrough("dataset"),
                                              "two-moons or a delimited file (label last)");
        cmd->add_option_function<std::string>("--test-dataset", passthrough("test_dataset"),
                                              "optional held-out split, same forms");
        cmd->add_option_function<std::string>("--engine", passthrough("engine"),
                                              "saf-e | saf-f | ottt-o | ottt-a");
        cmd->add_option_function<std::string>("--hidden", passthrough("hidden_sizes"),
                                              "hidden layer widths, comma separated");
        cmd->add_option_function<std::string>("--epochs", passthrough("epochs"), "");
        cmd->add_option_function<std::string>("--batch-size", passthrough("batch_size"), "");
        cmd->add_option_function<std::string>("--lr", passthrough("lr"), "");
        cmd->add_option_function<std::string>("--momentum", passthrough("momentum"), "");
        cmd->add_option_function<std::string>("--alpha", passthrough("alpha"),
                                              "MSE share of the loss mix");
        cmd->add_option_function<std::string>("--num-steps", passthrough("num_steps"), "");
        cmd->add_option_function<std::string>("--leak", passthrough("leak"), "");
        cmd->add_option_function<std::string>("--v-th", passthrough("v_th"), "");
        cmd->add_option_function<std::string>("--sg-beta", passthrough("sg_beta"), "");
        cmd->add_option_function<std::string>("--connection", passthrough("connection"),
                                              "none | feedforward | feedback");
        cmd->add_option_function<std::string>("--seed", passthrough("seed"), "");
        cmd->add_option_function<std::string>("--encoding", passthrough("encoding"),
                                              "constant | spike-encode");
        cmd->add_option_function<std::string>("--threads", passthrough("threads"),
                                              "0 = all cores, 1 = serial");
        cmd->add_option_function<std::string>("--moons-n", passthrough("moons_n"), "");
        cmd->add_option_function<std::string>("--moons-noise", passthrough("moons_noise"), "");
        cmd->add_option_function<std::string>("--checkpoint-out", passthrough("checkpoint_out"),
                                              "");
        cmd->add_option_function<std::string>("--metrics-out", passthrough("metrics_out"), "");
        cmd->add_flag_callback("--accumulate",
                               [this] { overrides.emplace_back("accumulate", "true"); },
                               "sum per-step gradients and update once per batch");
        cmd->add_flag_callback(
            "--freeze-within-sequence",
            [this] { overrides.emplace_back("freeze_within_sequence", "true"); },
            "keep the forward dynamics on batch-start parameters");
    }

    ExperimentConfig resolve() const { return parse_config(config_path, overrides); }
};

int cmd_train(const ConfigFlags& flags) {
    ExperimentConfig cfg = flags.resolve();
    Dataset data = load_configured_dataset(cfg);
    std::cout << "training engine=" << cfg.engine << " samples=" << data.size()
              << " classes=" << data.num_classes << " T=" << cfg.num_steps << '\n';
    TrainResult result = train(cfg, data);
    for (const EpochMetrics& em : result.metrics.epochs)
        std::cout << "epoch " << em.epoch << "  acc=" << em.train_accuracy
                  << "  loss=" << em.train_loss << "  rate=" << em.total_rate << '\n';
    std::cout << "iterations=" << result.metrics.iterations
              << "  sec/iter=" << result.metrics.seconds_per_iteration
              << "  state-vectors/layer=" << result.metrics.state_buffers.per_layer.front()
              << (result.metrics.diverged ? "  DIVERGED (restored last good parameters)" : "")
              << '\n';
    if (!cfg.checkpoint_out.empty()) {
        save_network(result.spec, cfg.checkpoint_out);
        std::cout << "checkpoint written to " << cfg.checkpoint_out << '\n';
    }
    if (!cfg.metrics_out.empty()) {
        std::ofstream os(cfg.metrics_out);
        write_metrics_csv(result.metrics, os);
        std::cout << "metrics written to " << cfg.metrics_out << '\n';
    }
    return result.metrics.diverged ? 1 : 0;
}

Dataset dataset_in_model_space(const ExperimentConfig& cfg, const NetworkSpec& spec) {
    Dataset raw = (cfg.dataset == "two-moons")
                      ? make_two_moons(cfg.moons_n, cfg.moons_noise, cfg.seed)
                      : load_delimited_raw(cfg.dataset);
    // Replay the training-time normalization embedded in the checkpoint.
    if (!spec.norm_shift.empty()) {
        NormRecord record;
        record.shift = spec.norm_shift;
        record.scale = spec.norm_scale;
        for (Sample& s : raw.samples) s.features = apply_normalization(s.features, record);
    }
    return raw;
}

int cmd_infer(const ConfigFlags& flags, const std::string& checkpoint) {
    ExperimentConfig cfg = flags.resolve();
    NetworkSpec spec = load_network(checkpoint);
    Dataset data = dataset_in_model_space(cfg, spec);

    InferenceResult saf_mode =
        infer_saf(spec, data, cfg.num_steps, cfg.encoding, cfg.seed, cfg.threads);
    InferenceResult lif_mode =
        infer_lif(spec, data, cfg.num_steps, cfg.encoding, cfg.seed, cfg.threads);

    std::cout << std::setprecision(10);
    std::cout << "saf-mode  accuracy=" << saf_mode.accuracy << " total-rate=" << saf_mode.total_rate
              << '\n';
    std::cout << "lif-mode  accuracy=" << lif_mode.accuracy << " total-rate=" << lif_mode.total_rate
              << '\n';
    std::cout << "delta     accuracy=" << (lif_mode.accuracy - saf_mode.accuracy)
              << " total-rate=" << (lif_mode.total_rate - saf_mode.total_rate) << '\n';
    for (std::size_t l = 0; l < lif_mode.layer_rates.size(); ++l)
        std::cout << "layer " << (l + 1) << " rate: saf=" << saf_mode.layer_rates[l]
                  << " lif=" << lif_mode.layer_rates[l] << '\n';
    return 0;
}

int cmd_verify(std::uint64_t seed, std::size_t trials, int threads, const std::string& csv_path) {
    SuiteOptions opt;
    opt.seed = seed;
    opt.trials = trials;
    opt.threads = threads;
    std::ofstream csv;
    std::ostream* csv_out = nullptr;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        csv_out = &csv;
    }
    bool ok = run_all_suites(opt, std::cout, csv_out);
    std::cout << (ok ? "ALL SUITES PASS" : "SUITE FAILURES PRESENT") << '\n';
    return ok ? 0 : 1;
}

GradientSet engine_batch_gradient(EngineKind engine, const NetworkSpec& spec, const Dataset& data,
                                  const ExperimentConfig& cfg, std::size_t samples) {
    LossSpec loss{cfg.alpha, spec.output_dim()};
    GradientSet total = zero_gradients(spec, engine);
    const std::size_t n = std::min<std::size_t>(samples, data.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Vector> seq = encode_input(data.samples[i].features, cfg.num_steps,
                                               cfg.encoding, cfg.seed + i);
        const std::size_t label = data.samples[i].label;
        switch (engine) {
            case EngineKind::SafE: {
                ForwardTrace trace = forward_saf(spec, seq);
                GradientSet sum = zero_gradients(spec, engine);
                for (std::size_t t = 1; t <= cfg.num_steps; ++t)
                    sum.add(grad_saf_e(trace, t, label, spec, loss));
                total.add(sum);
                break;
            }
            case EngineKind::OtttO: {
                ForwardTrace trace = forward_lif(spec, seq);
                GradientSet sum = zero_gradients(spec, engine);
                for (std::size_t t = 1; t <= cfg.num_steps; ++t)
                    sum.add(grad_ottt_o(trace, t, label, spec, loss));
                total.add(sum);
                break;
            }
            case EngineKind::SafF:
                total.add(grad_saf_f(forward_saf(spec, seq), label, spec, loss));
                break;
            case EngineKind::OtttA:
                total.add(grad_ottt_a(forward_lif(spec, seq), label, spec, loss));
                break;
            case EngineKind::SpikeRep:
                total.add(grad_spike_representation(forward_saf(spec, seq), label, spec, loss));
                break;
        }
    }
    total.scale_by(1.0 / static_cast<double>(n));
    return total;
}

int cmd_compare_grads(const ConfigFlags& flags, const std::string& checkpoint,
                      const std::string& engine_a, const std::string& engine_b,
                      std::size_t samples, const std::string& csv_path) {
    ExperimentConfig cfg = flags.resolve();
    NetworkSpec spec;
    Dataset data;
    if (!checkpoint.empty()) {
        spec = load_network(checkpoint);
        data = dataset_in_model_space(cfg, spec);
    } else {
        data = load_configured_dataset(cfg);
        std::cout << "no checkpoint given; training first (" << cfg.engine << ", " << cfg.epochs
                  << " epochs)\n";
        TrainResult result = train(cfg, data);
        spec = std::move(result.spec);
    }

    EngineKind a = parse_engine(engine_a);
    EngineKind b = parse_engine(engine_b);
    GradientSet ga = engine_batch_gradient(a, spec, data, cfg, samples);
    GradientSet gb = engine_batch_gradient(b, spec, data, cfg, samples);

    SimilarityResult input_layer = gradient_similarity(ga, gb);
    SimilarityResult full = vector_similarity(ga.flatten(), gb.flatten());
    std::cout << std::setprecision(10);
    std::cout << "input-layer weights: corr="
              << (input_layer.defined ? std::to_string(input_layer.correlation)
                                      : std::string("undefined"))
              << " mae=" << input_layer.mae << '\n';
    std::cout << "all parameters:      corr="
              << (full.defined ? std::to_string(full.correlation) : std::string("undefined"))
              << " mae=" << full.mae << '\n';
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        write_gradients_csv(ga, spec, os);
        write_gradients_csv(gb, spec, os);
        std::cout << "gradients written to " << csv_path << '\n';
    }
    return 0;
}

int cmd_bench(std::uint64_t seed, int threads, std::size_t reps) {
    BenchReport report = run_bench(seed, threads, reps);
    std::cout << "T    saf-stream-ms  lif-traced-ms  saf-state-vecs  lif-trace-vecs\n";
    for (const BenchRow& row : report.rows)
        std::cout << std::left << std::setw(5) << row.num_steps << std::setw(15)
                  << row.saf_stream_ms << std::setw(15) << row.lif_traced_ms << std::setw(16)
                  << row.saf_state_vectors << row.lif_trace_vectors << '\n';
    std::cout << "batch gradients: serial=" << report.serial_batch_ms
              << " ms, parallel(" << report.parallel_threads << " threads)="
              << report.parallel_batch_ms << " ms\n";
    std::cout << "memory claim (streaming flat in T, traced linear): "
              << (report.memory_claim_holds ? "holds" : "VIOLATED") << '\n';
    return report.memory_claim_holds ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spike-accumulation training library"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train a network");
    train_flags.attach(train_cmd);

    ConfigFlags infer_flags;
    std::string infer_checkpoint;
    CLI::App* infer_cmd = app.add_subcommand("infer", "run inference from a checkpoint");
    infer_flags.attach(infer_cmd);
    infer_cmd->add_option("--checkpoint", infer_checkpoint, "trained network file")->required();

    std::uint64_t verify_seed = 7;
    std::size_t verify_trials = 200;
    int verify_threads = 0;
    std::string verify_csv;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the equivalence suites");
    verify_cmd->add_option("--seed", verify_seed, "suite seed");
    verify_cmd->add_option("--trials", verify_trials, "trials per suite");
    verify_cmd->add_option("--threads", verify_threads, "0 = all cores, 1 = serial");
    verify_cmd->add_option("--csv", verify_csv, "per-trial report CSV");

    ConfigFlags compare_flags;
    std::string compare_checkpoint, engine_a = "saf-f", engine_b = "ottt-a", compare_csv;
    std::size_t compare_samples = 32;
    CLI::App* compare_cmd =
        app.add_subcommand("compare-grads", "correlation/MAE between two engines' gradients");
    compare_flags.attach(compare_cmd);
    compare_cmd->add_option("--checkpoint", compare_checkpoint,
                            "trained network (otherwise trains first)");
    compare_cmd->add_option("--engine-a", engine_a, "first engine");
    compare_cmd->add_option("--engine-b", engine_b, "second engine");
    compare_cmd->add_option("--samples", compare_samples, "batch size for the comparison");
    compare_cmd->add_option("--csv", compare_csv, "write both gradient sets as CSV");

    std::uint64_t bench_seed = 7;
    int bench_threads = 0;
    std::size_t bench_reps = 20;
    CLI::App* bench_cmd = app.add_subcommand("bench", "timing and state-buffer comparison");
    bench_cmd->add_option("--seed", bench_seed, "network seed");
    bench_cmd->add_option("--threads", bench_threads, "threads for the batch comparison");
    bench_cmd->add_option("--reps", bench_reps, "repetitions per median");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return cmd_train(train_flags);
        if (*infer_cmd) return cmd_infer(infer_flags, infer_checkpoint);
        if (*verify_cmd) return cmd_verify(verify_seed, verify_trials, verify_threads, verify_csv);
        if (*compare_cmd)
            return cmd_compare_grads(compare_flags, compare_checkpoint, engine_a, engine_b,
                                     compare_samples, compare_csv);
        if (*bench_cmd) return cmd_bench(bench_seed, bench_threads, bench_reps);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
