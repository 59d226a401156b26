#include "saf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "saf/loss.hpp"
#include "saf/parallel.hpp"

namespace saf {

OptimizerState OptimizerState::create(const NetworkSpec& spec, double base_lr, double momentum,
                                      std::size_t total_steps) {
    OptimizerState opt;
    opt.base_lr = base_lr;
    opt.momentum = momentum;
    opt.total_steps = std::max<std::size_t>(1, total_steps);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        opt.weight_momentum.emplace_back(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
        opt.bias_momentum.emplace_back(spec.layer_sizes[l + 1], 0.0);
    }
    if (spec.connection)
        opt.conn_momentum = Matrix(spec.connection->weight.rows, spec.connection->weight.cols);
    return opt;
}

double OptimizerState::current_lr() const {
    double ratio = static_cast<double>(step_count) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * ratio));
}

void OptimizerState::apply(NetworkSpec& spec, const GradientSet& grads) {
    const double lr = current_lr();
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        Matrix& vm = weight_momentum[l];
        for (std::size_t i = 0; i < vm.data.size(); ++i) {
            vm.data[i] = momentum * vm.data[i] + grads.weight_grads[l].data[i];
            spec.weights[l].data[i] -= lr * vm.data[i];
        }
        Vector& vb = bias_momentum[l];
        for (std::size_t i = 0; i < vb.size(); ++i) {
            vb[i] = momentum * vb[i] + grads.bias_grads[l][i];
            spec.biases[l][i] -= lr * vb[i];
        }
    }
    if (conn_momentum && grads.conn_grad && spec.connection) {
        for (std::size_t i = 0; i < conn_momentum->data.size(); ++i) {
            conn_momentum->data[i] =
                momentum * conn_momentum->data[i] + grads.conn_grad->data[i];
            spec.connection->weight.data[i] -= lr * conn_momentum->data[i];
        }
    }
    ++step_count;
}

namespace {

std::size_t argmax_lowest(const Vector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::uint64_t sample_seed(std::uint64_t base, std::size_t index) {
    return Rng(base).split(0x5A110000ULL + index).next_u64();
}

GradientSet mean_of(std::vector<GradientSet>& slots, const NetworkSpec& spec, EngineKind engine) {
    GradientSet total = zero_gradients(spec, engine);
    for (const GradientSet& g : slots) total.add(g);
    total.scale_by(1.0 / static_cast<double>(slots.size()));
    return total;
}

InferenceResult infer_impl(const NetworkSpec& spec, const Dataset& data, std::size_t num_steps,
                           InputEncoding encoding, std::uint64_t seed, int threads, bool lif_mode,
                           double alpha) {
    validate(spec);
    InferenceResult result;
    const std::size_t n = data.size();
    result.predictions.assign(n, 0);
    std::vector<double> losses(n, 0.0);
    std::vector<std::vector<double>> spike_sums(n);
    LossSpec loss_spec{alpha, spec.output_dim()};

    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<Vector> seq =
            encode_input(data.samples[i].features, num_steps, encoding, sample_seed(seed, i));
        StreamResult run = lif_mode ? run_lif_streaming(spec, seq) : run_saf_streaming(spec, seq);
        result.predictions[i] = argmax_lowest(run.output_accum);
        losses[i] = rate_loss(run.output_accum, data.samples[i].label, loss_spec,
                              spec.params.leak, num_steps)
                        .value;
        spike_sums[i] = run.layer_spike_sums;
    });

    std::size_t correct = 0;
    double loss_sum = 0.0;
    std::vector<double> layer_totals(spec.num_layers(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (result.predictions[i] == data.samples[i].label) ++correct;
        loss_sum += losses[i];
        for (std::size_t l = 0; l < layer_totals.size(); ++l) layer_totals[l] += spike_sums[i][l];
    }
    result.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    result.mean_loss = n ? loss_sum / static_cast<double>(n) : 0.0;
    result.layer_rates.resize(spec.num_layers());
    double all_spikes = 0.0, all_slots = 0.0;
    for (std::size_t l = 0; l < layer_totals.size(); ++l) {
        double slots = static_cast<double>(n * num_steps * spec.layer_sizes[l + 1]);
        result.layer_rates[l] = slots > 0 ? layer_totals[l] / slots : 0.0;
        all_spikes += layer_totals[l];
        all_slots += slots;
    }
    result.total_rate = all_slots > 0 ? all_spikes / all_slots : 0.0;
    return result;
}

}  // namespace

InferenceResult infer_lif(const NetworkSpec& spec, const Dataset& data, std::size_t num_steps,
                          InputEncoding encoding, std::uint64_t seed, int threads, double alpha) {
    return infer_impl(spec, data, num_steps, encoding, seed, threads, true, alpha);
}

InferenceResult infer_saf(const NetworkSpec& spec, const Dataset& data, std::size_t num_steps,
                          InputEncoding encoding, std::uint64_t seed, int threads, double alpha) {
    return infer_impl(spec, data, num_steps, encoding, seed, threads, false, alpha);
}

std::vector<double> firing_rate_report(const ForwardTrace& trace) {
    std::vector<double> rates(trace.num_layers(), 0.0);
    for (std::size_t l = 1; l <= trace.num_layers(); ++l) {
        double total = 0.0;
        std::size_t width = 0;
        for (std::size_t t = 1; t <= trace.num_steps(); ++t) {
            Vector s = trace.spikes(l, t);
            width = s.size();
            for (double v : s) total += v;
        }
        rates[l - 1] = total / static_cast<double>(trace.num_steps() * width);
    }
    return rates;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(const ExperimentConfig& cfg, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    EngineKind engine = parse_engine(cfg.engine);
    if (engine == EngineKind::SpikeRep)
        throw std::invalid_argument("train: the rate-space engine is not a training engine");
    const bool saf_side = (engine == EngineKind::SafE || engine == EngineKind::SafF);
    const bool per_step_engine = (engine == EngineKind::SafE || engine == EngineKind::OtttO);
    const bool step_updates = per_step_engine && !cfg.accumulate;
    const std::size_t num_steps = cfg.num_steps;

    std::vector<std::size_t> sizes;
    sizes.push_back(data.feature_dim);
    for (std::size_t h : cfg.hidden_sizes) sizes.push_back(h);
    sizes.push_back(data.num_classes);

    Rng init_rng(cfg.seed);
    NetworkSpec spec =
        make_random_network(sizes, NeuronParams{cfg.leak, cfg.v_th}, cfg.sg_beta, init_rng);
    if (cfg.connection == "feedforward")
        attach_random_connection(spec, ConnectionKind::Feedforward, 1, spec.num_layers(),
                                 init_rng);
    else if (cfg.connection == "feedback")
        attach_random_connection(spec, ConnectionKind::Feedback, spec.num_layers(), 1, init_rng);
    spec.norm_shift = data.normalization.shift;
    spec.norm_scale = data.normalization.scale;

    const std::size_t n = data.size();
    const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(1, cfg.batch_size), n);
    const std::size_t num_batches = (n + batch - 1) / batch;
    const std::size_t opt_steps_per_batch = step_updates ? num_steps : 1;
    OptimizerState opt = OptimizerState::create(
        spec, cfg.lr, cfg.momentum, cfg.epochs * num_batches * opt_steps_per_batch);

    // Inputs are encoded once per sample; the Bernoulli encoding draws a
    // fixed per-sample stream so runs are reproducible.
    std::vector<std::vector<Vector>> encoded(n);
    for (std::size_t i = 0; i < n; ++i)
        encoded[i] = encode_input(data.samples[i].features, num_steps, cfg.encoding,
                                  sample_seed(cfg.seed, i));

    LossSpec loss_spec{cfg.alpha, data.num_classes};
    RunMetrics metrics;
    metrics.state_buffers = count_state_buffers(spec, saf_side ? TraceMode::Saf : TraceMode::Lif);

    // Optional held-out split, mapped through the training normalization.
    Dataset test_data;
    bool has_test = !cfg.test_dataset.empty();
    if (has_test) {
        Dataset raw = (cfg.test_dataset == "two-moons")
                          ? make_two_moons(cfg.moons_n, cfg.moons_noise, cfg.seed + 1)
                          : load_delimited_raw(cfg.test_dataset);
        for (Sample& s : raw.samples)
            s.features = apply_normalization(s.features, data.normalization);
        test_data = std::move(raw);
        test_data.num_classes = data.num_classes;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    NetworkSpec last_good = spec;
    double wall_seconds = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Deterministic per-epoch shuffle, independent of the engine.
        Rng shuffle_rng = Rng(cfg.seed).split(0xE90C0000ULL + epoch);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(i));
            std::swap(order[i - 1], order[j]);
        }

        for (std::size_t b = 0; b < num_batches; ++b) {
            const std::size_t begin = b * batch;
            const std::size_t end = std::min(begin + batch, n);
            const std::size_t bsize = end - begin;

            auto t0 = std::chrono::steady_clock::now();
            // Dynamics read `dyn`: either the live parameters (so per-step
            // updates act mid-sequence) or a snapshot taken at batch start.
            NetworkSpec snapshot;
            if (cfg.freeze_within_sequence) snapshot = spec;
            const NetworkSpec& dyn = cfg.freeze_within_sequence ? snapshot : spec;

            std::vector<OnlineSafNet> saf_nets;
            std::vector<OnlineLifNet> lif_nets;
            if (saf_side)
                saf_nets.assign(bsize, OnlineSafNet(spec));
            else
                lif_nets.assign(bsize, OnlineLifNet(spec));

            std::vector<GradientSet> slots(bsize);
            std::vector<GradientSet> sums;
            if (!step_updates && per_step_engine)
                sums.assign(bsize, zero_gradients(spec, engine));
            if (engine == EngineKind::OtttA) sums.assign(bsize, zero_gradients(spec, engine));

            for (std::size_t t = 1; t <= num_steps; ++t) {
                parallel_for(bsize, cfg.threads, [&](std::size_t i) {
                    const std::vector<Vector>& seq = encoded[order[begin + i]];
                    const std::size_t label = data.samples[order[begin + i]].label;
                    if (saf_side) {
                        saf_nets[i].step(dyn, seq[t - 1]);
                        if (engine == EngineKind::SafE)
                            slots[i] =
                                online_grad_saf_e(saf_nets[i], dyn, label, loss_spec, num_steps);
                    } else {
                        lif_nets[i].step(dyn, seq[t - 1]);
                        if (engine == EngineKind::OtttO || engine == EngineKind::OtttA)
                            slots[i] =
                                online_grad_ottt_o(lif_nets[i], dyn, label, loss_spec, num_steps);
                    }
                });
                if (step_updates) {
                    GradientSet g = mean_of(slots, spec, engine);
                    opt.apply(spec, g);
                } else if (engine == EngineKind::OtttA ||
                           (per_step_engine && cfg.accumulate)) {
                    for (std::size_t i = 0; i < bsize; ++i) sums[i].add(slots[i]);
                }
            }

            if (!step_updates) {
                if (engine == EngineKind::SafF) {
                    parallel_for(bsize, cfg.threads, [&](std::size_t i) {
                        const std::size_t label = data.samples[order[begin + i]].label;
                        slots[i] =
                            online_grad_saf_f(saf_nets[i], dyn, label, loss_spec, num_steps);
                    });
                    GradientSet g = mean_of(slots, spec, engine);
                    opt.apply(spec, g);
                } else {
                    GradientSet g = mean_of(sums, spec, engine);
                    opt.apply(spec, g);
                }
            }
            auto t1 = std::chrono::steady_clock::now();
            wall_seconds += std::chrono::duration<double>(t1 - t0).count();
            ++metrics.iterations;
        }

        InferenceResult eval =
            saf_side
                ? infer_saf(spec, data, num_steps, cfg.encoding, cfg.seed, cfg.threads, cfg.alpha)
                : infer_lif(spec, data, num_steps, cfg.encoding, cfg.seed, cfg.threads, cfg.alpha);
        EpochMetrics em;
        em.epoch = epoch;
        em.train_accuracy = eval.accuracy;
        em.train_loss = eval.mean_loss;
        em.layer_rates = eval.layer_rates;
        em.total_rate = eval.total_rate;
        if (has_test) {
            InferenceResult test_eval = saf_side ? infer_saf(spec, test_data, num_steps,
                                                             cfg.encoding, cfg.seed, cfg.threads,
                                                             cfg.alpha)
                                                 : infer_lif(spec, test_data, num_steps,
                                                             cfg.encoding, cfg.seed, cfg.threads,
                                                             cfg.alpha);
            em.has_test = true;
            em.test_accuracy = test_eval.accuracy;
            em.test_loss = test_eval.mean_loss;
        }
        metrics.epochs.push_back(em);

        bool params_finite = true;
        for (double v : flatten_parameters(spec)) params_finite = params_finite && std::isfinite(v);
        if (!std::isfinite(eval.mean_loss) || !params_finite) {
            spec = last_good;
            metrics.diverged = true;
            break;
        }
        last_good = spec;
    }

    metrics.seconds_per_iteration =
        metrics.iterations ? wall_seconds / static_cast<double>(metrics.iterations) : 0.0;
    return TrainResult{std::move(spec), std::move(metrics)};
}

TrainResult train(const ExperimentConfig& cfg) {
    Dataset data = load_configured_dataset(cfg);
    return train(cfg, data);
}

// ---------------------------------------------------------------------------
// Bench

namespace {

double median_ms(std::vector<double>& samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    if (n == 0) return 0.0;
    return (n % 2) ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

template <typename F>
double time_ms(F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

BenchReport run_bench(std::uint64_t seed, int threads, std::size_t reps) {
    Rng rng(seed);
    NetworkSpec spec =
        make_random_network({16, 64, 64, 10}, NeuronParams{0.5, 1.0}, 4.0, rng);
    Vector features(spec.input_dim());
    for (double& x : features) x = rng.uniform();

    BenchReport report;
    for (std::size_t steps : {std::size_t(4), std::size_t(8), std::size_t(16), std::size_t(32)}) {
        std::vector<Vector> inputs = constant_input(features, steps);
        BenchRow row;
        row.num_steps = steps;
        std::vector<double> saf_times, lif_times;
        for (std::size_t r = 0; r < reps; ++r) {
            saf_times.push_back(time_ms([&] { run_saf_streaming(spec, inputs); }));
            lif_times.push_back(time_ms([&] { forward_lif(spec, inputs); }));
        }
        row.saf_stream_ms = median_ms(saf_times);
        row.lif_traced_ms = median_ms(lif_times);
        row.saf_state_vectors = run_saf_streaming(spec, inputs).peak_state_vectors;
        row.lif_trace_vectors = forward_lif(spec, inputs).stored_vector_count();
        report.rows.push_back(row);
    }

    // Streaming state must not grow with T; the traced form grows
    // linearly. Measured at T = 8 and T = 64.
    std::vector<Vector> in8 = constant_input(features, 8);
    std::vector<Vector> in64 = constant_input(features, 64);
    std::size_t saf8 = run_saf_streaming(spec, in8).peak_state_vectors;
    std::size_t saf64 = run_saf_streaming(spec, in64).peak_state_vectors;
    std::size_t lif8 = forward_lif(spec, in8).stored_vector_count();
    std::size_t lif64 = forward_lif(spec, in64).stored_vector_count();
    report.memory_claim_holds = (saf8 == saf64) && (lif64 == 8 * lif8);

    // One minibatch of final-step gradients, serial reference vs OpenMP.
    const std::size_t bsize = 64;
    LossSpec loss_spec{0.05, spec.output_dim()};
    std::vector<std::vector<Vector>> batch_inputs(bsize);
    std::vector<std::size_t> labels(bsize);
    for (std::size_t i = 0; i < bsize; ++i) {
        Vector f(spec.input_dim());
        for (double& x : f) x = rng.uniform();
        batch_inputs[i] = constant_input(f, 16);
        labels[i] = rng.uniform_int(spec.output_dim());
    }
    std::vector<GradientSet> slots(bsize);
    auto batch_work = [&](int nthreads) {
        parallel_for(bsize, nthreads, [&](std::size_t i) {
            ForwardTrace trace = forward_saf(spec, batch_inputs[i]);
            slots[i] = grad_saf_f(trace, labels[i], spec, loss_spec);
        });
    };
    std::vector<double> serial_times, parallel_times;
    const int par_threads = (threads == 0) ? hardware_threads() : threads;
    for (std::size_t r = 0; r < reps; ++r) {
        serial_times.push_back(time_ms([&] { batch_work(1); }));
        parallel_times.push_back(time_ms([&] { batch_work(par_threads); }));
    }
    report.serial_batch_ms = median_ms(serial_times);
    report.parallel_batch_ms = median_ms(parallel_times);
    report.parallel_threads = par_threads;
    return report;
}

void write_metrics_csv(const RunMetrics& metrics, std::ostream& os) {
    os << "epoch,split,accuracy,loss,total_rate";
    std::size_t max_layers = 0;
    for (const EpochMetrics& em : metrics.epochs)
        max_layers = std::max(max_layers, em.layer_rates.size());
    for (std::size_t l = 0; l < max_layers; ++l) os << ",rate_layer" << (l + 1);
    os << '\n';
    for (const EpochMetrics& em : metrics.epochs) {
        os << em.epoch << ",train," << em.train_accuracy << ',' << em.train_loss << ','
           << em.total_rate;
        for (double r : em.layer_rates) os << ',' << r;
        os << '\n';
        if (em.has_test) {
            os << em.epoch << ",test," << em.test_accuracy << ',' << em.test_loss << ",,";
            os << '\n';
        }
    }
}

}  // namespace saf
