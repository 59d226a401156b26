#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "saf/data.hpp"
#include "saf/gradients.hpp"
#include "saf/network.hpp"

namespace saf {

// SGD with classical momentum (v <- mu*v + g; theta <- theta - lr*v) and
// cosine annealing lr(k) = base * 0.5 * (1 + cos(pi * k / total)).
struct OptimizerState {
    std::vector<Matrix> weight_momentum;
    std::vector<Vector> bias_momentum;
    std::optional<Matrix> conn_momentum;
    std::size_t step_count = 0;
    std::size_t total_steps = 1;
    double base_lr = 0.1;
    double momentum = 0.9;

    static OptimizerState create(const NetworkSpec& spec, double base_lr, double momentum,
                                 std::size_t total_steps);
    double current_lr() const;
    void apply(NetworkSpec& spec, const GradientSet& grads);
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_accuracy = 0.0;
    double train_loss = 0.0;
    bool has_test = false;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::vector<double> layer_rates;
    double total_rate = 0.0;
};

struct RunMetrics {
    std::vector<EpochMetrics> epochs;
    double seconds_per_iteration = 0.0;  // mean wall time per minibatch, data loading excluded
    std::size_t iterations = 0;
    StateBufferReport state_buffers;
    bool diverged = false;
};

struct TrainResult {
    NetworkSpec spec;
    RunMetrics metrics;
};

// Runs the configured engine over the dataset. Per-step engines (saf-e,
// ottt-o) take one optimizer step per time step per minibatch unless
// cfg.accumulate is set; final-step engines (saf-f, ottt-a) step once per
// minibatch. Sample gradients are averaged in fixed sample order. A
// non-finite loss aborts with the last epoch's parameters restored.
TrainResult train(const ExperimentConfig& cfg, const Dataset& data);
TrainResult train(const ExperimentConfig& cfg);

struct InferenceResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<double> layer_rates;
    double total_rate = 0.0;
    std::vector<std::size_t> predictions;
};

// Classification by the weighted firing rate of the output layer at T;
// ties broken toward the lowest class index. Features must already be in
// model space (apply_normalization for raw data).
InferenceResult infer_lif(const NetworkSpec& spec, const Dataset& data, std::size_t num_steps,
                          InputEncoding encoding, std::uint64_t seed, int threads,
                          double alpha = 0.05);
InferenceResult infer_saf(const NetworkSpec& spec, const Dataset& data, std::size_t num_steps,
                          InputEncoding encoding, std::uint64_t seed, int threads,
                          double alpha = 0.05);

// Per-layer firing rates of a recorded run: sum of spikes over (T, width).
std::vector<double> firing_rate_report(const ForwardTrace& trace);

struct BenchRow {
    std::size_t num_steps = 0;
    double saf_stream_ms = 0.0;       // streaming accumulation-form forward
    double lif_traced_ms = 0.0;       // traced LIF forward (offline backward style)
    std::size_t saf_state_vectors = 0;
    std::size_t lif_trace_vectors = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;        // T in {4, 8, 16, 32}
    double serial_batch_ms = 0.0;      // one minibatch gradient, single thread
    double parallel_batch_ms = 0.0;    // same work across OpenMP threads
    int parallel_threads = 1;
    bool memory_claim_holds = false;   // streaming count flat in T, traced count linear
};

// Median-of-`reps` wall times, data generation excluded from the timed
// region.
BenchReport run_bench(std::uint64_t seed, int threads, std::size_t reps = 20);

void write_metrics_csv(const RunMetrics& metrics, std::ostream& os);

}  // namespace saf
