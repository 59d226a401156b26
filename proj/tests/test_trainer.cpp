#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "saf/trainer.hpp"

using namespace saf;

TEST_CASE("cosine schedule endpoints") {
    Rng rng(1);
    NetworkSpec spec = make_random_network({2, 4, 2}, NeuronParams{0.5, 1.0}, 4.0, rng);
    OptimizerState opt = OptimizerState::create(spec, 0.1, 0.9, 100);
    CHECK(opt.current_lr() == doctest::Approx(0.1).epsilon(1e-15));
    opt.step_count = 100;
    CHECK(std::abs(opt.current_lr()) < 1e-16);
    opt.step_count = 50;
    CHECK(opt.current_lr() == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("momentum update matches a hand-stepped fixture") {
    // Two parameters, two steps, constant lr (total steps huge so the
    // cosine factor is ~1 at step 0; use explicit expected values).
    NetworkSpec spec;
    spec.layer_sizes = {1, 2};
    spec.params = NeuronParams{0.5, 1.0};
    spec.weights = {Matrix(2, 1)};
    spec.weights[0].data = {1.0, 2.0};
    spec.biases = {Vector{0.0, 0.0}};

    OptimizerState opt = OptimizerState::create(spec, 0.1, 0.9, 1u << 30);
    GradientSet g = zero_gradients(spec, EngineKind::SafE);
    g.weight_grads[0].data = {0.5, -1.0};

    // Step 1: v = g, theta -= lr*v.
    opt.apply(spec, g);
    CHECK(spec.weights[0].data[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-12));
    CHECK(spec.weights[0].data[1] == doctest::Approx(2.0 + 0.1 * 1.0).epsilon(1e-12));

    // Step 2 with the same gradient: v = 0.9*v + g = 1.9*g.
    double lr1 = opt.current_lr();
    opt.apply(spec, g);
    CHECK(spec.weights[0].data[0] ==
          doctest::Approx(1.0 - 0.1 * 0.5 - lr1 * 1.9 * 0.5).epsilon(1e-10));
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.moons_n = 24;
    cfg.hidden_sizes = {6};
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.lr = 0.0;
    cfg.num_steps = 4;
    cfg.seed = 3;
    Dataset data = make_two_moons(cfg.moons_n, 0.1, cfg.seed);

    Rng rng(cfg.seed);
    NetworkSpec init = make_random_network({2, 6, 2}, NeuronParams{cfg.leak, cfg.v_th},
                                           cfg.sg_beta, rng);
    TrainResult result = train(cfg, data);
    CHECK(flatten_parameters(result.spec) == flatten_parameters(init));
}

TEST_CASE("training learns two moons at desk scale") {
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.engine = "saf-f";
    cfg.moons_n = 60;
    cfg.hidden_sizes = {16};
    cfg.epochs = 20;
    cfg.batch_size = 4;
    cfg.lr = 0.1;
    cfg.num_steps = 6;
    cfg.seed = 3;
    Dataset data = load_configured_dataset(cfg);
    TrainResult result = train(cfg, data);
    REQUIRE(!result.metrics.epochs.empty());
    CHECK(result.metrics.epochs.back().train_accuracy > 0.85);
    CHECK(result.metrics.iterations == 20 * 15);
    CHECK_FALSE(result.metrics.diverged);
}

TEST_CASE("per-step and summed engines produce working runs for every engine") {
    Dataset data = make_two_moons(32, 0.1, 21);
    for (const char* engine : {"saf-e", "saf-f", "ottt-o", "ottt-a"}) {
        ExperimentConfig cfg;
        cfg.dataset = "two-moons";
        cfg.engine = engine;
        cfg.hidden_sizes = {8};
        cfg.epochs = 2;
        cfg.batch_size = 8;
        cfg.num_steps = 4;
        cfg.seed = 22;
        TrainResult result = train(cfg, data);
        CHECK(result.metrics.epochs.size() == 2);
        for (double v : flatten_parameters(result.spec)) CHECK(std::isfinite(v));
    }
}

TEST_CASE("engine trajectories coincide over a short run") {
    Dataset data = make_two_moons(48, 0.1, 31);
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.hidden_sizes = {12};
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.num_steps = 4;
    cfg.seed = 31;

    cfg.engine = "saf-e";
    TrainResult a = train(cfg, data);
    cfg.engine = "ottt-o";
    TrainResult b = train(cfg, data);

    Vector pa = flatten_parameters(a.spec);
    Vector pb = flatten_parameters(b.spec);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        max_diff = std::max(max_diff, std::abs(pa[i] - pb[i]));
    CHECK(max_diff <= 1e-10);
}

TEST_CASE("accumulate flag sums the per-step gradients into one update") {
    Dataset data = make_two_moons(16, 0.1, 41);
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.engine = "saf-e";
    cfg.hidden_sizes = {6};
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.num_steps = 4;
    cfg.seed = 41;
    cfg.accumulate = true;
    TrainResult accumulated = train(cfg, data);
    // One batch, one update.
    CHECK(accumulated.metrics.iterations == 1);
    for (double v : flatten_parameters(accumulated.spec)) CHECK(std::isfinite(v));
}

TEST_CASE("freeze-within-sequence keeps dynamics on the batch-start parameters") {
    Dataset data = make_two_moons(16, 0.1, 43);
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.engine = "saf-e";
    cfg.hidden_sizes = {6};
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.num_steps = 6;
    cfg.seed = 43;
    cfg.freeze_within_sequence = true;
    TrainResult frozen = train(cfg, data);
    cfg.freeze_within_sequence = false;
    TrainResult live = train(cfg, data);
    // Same seed, different update placement: the runs must both finish
    // and generally end at different parameters.
    CHECK(flatten_parameters(frozen.spec) != flatten_parameters(live.spec));
}

TEST_CASE("spike-encoded inputs train end to end") {
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.engine = "saf-f";
    cfg.moons_n = 24;
    cfg.hidden_sizes = {8};
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.num_steps = 8;
    cfg.seed = 13;
    cfg.encoding = InputEncoding::SpikeBernoulli;
    // Raw moons keep features mostly inside [0,1], where Bernoulli rates
    // are informative; standardized features would clamp.
    Dataset data = make_two_moons(cfg.moons_n, 0.1, cfg.seed);
    TrainResult result = train(cfg, data);
    CHECK(result.metrics.epochs.size() == 2);
    CHECK_FALSE(result.metrics.diverged);
    for (double v : flatten_parameters(result.spec)) CHECK(std::isfinite(v));
}

TEST_CASE("digit-style images train from an idx pair") {
    // Two 4x4 classes: bright top half vs bright bottom half, plus noise.
    Rng rng(37);
    std::vector<Vector> images;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 40; ++i) {
        Vector img(16, 0.0);
        bool top = (i % 2) == 0;
        for (std::size_t p = 0; p < 16; ++p) {
            bool bright = top ? (p < 8) : (p >= 8);
            img[p] = (bright ? 0.8 : 0.1) + 0.1 * rng.uniform();
        }
        images.push_back(img);
        labels.push_back(top ? 0 : 1);
    }
    write_idx(images, labels, 4, 4, "/tmp/saf_digits.idx3", "/tmp/saf_digits.idx1");
    Dataset data = load_idx("/tmp/saf_digits.idx3", "/tmp/saf_digits.idx1");
    std::remove("/tmp/saf_digits.idx3");
    std::remove("/tmp/saf_digits.idx1");
    REQUIRE(data.size() == 40);
    standardize(data);

    ExperimentConfig cfg;
    cfg.dataset = "idx";
    cfg.engine = "saf-f";
    cfg.hidden_sizes = {12};
    cfg.epochs = 10;
    cfg.batch_size = 4;
    cfg.num_steps = 6;
    cfg.seed = 37;
    TrainResult result = train(cfg, data);
    CHECK(result.metrics.epochs.back().train_accuracy >= 0.9);
}

TEST_CASE("engine trajectories coincide with connections attached") {
    for (const char* connection : {"feedforward", "feedback"}) {
        ExperimentConfig cfg;
        cfg.dataset = "two-moons";
        cfg.moons_n = 48;
        cfg.hidden_sizes = {10, 10};
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg.num_steps = 6;
        cfg.seed = 19;
        cfg.connection = connection;
        Dataset data = load_configured_dataset(cfg);

        cfg.engine = "saf-e";
        TrainResult a = train(cfg, data);
        cfg.engine = "ottt-o";
        TrainResult b = train(cfg, data);

        Vector pa = flatten_parameters(a.spec);
        Vector pb = flatten_parameters(b.spec);
        REQUIRE(pa.size() == pb.size());
        double max_diff = 0.0;
        for (std::size_t i = 0; i < pa.size(); ++i)
            max_diff = std::max(max_diff, std::abs(pa[i] - pb[i]));
        CHECK(max_diff <= 1e-10);
    }
}

TEST_CASE("divergence restores the last good parameters") {
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.engine = "saf-f";
    cfg.moons_n = 16;
    cfg.hidden_sizes = {6};
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.lr = std::numeric_limits<double>::infinity();  // blows up the first update
    cfg.num_steps = 4;
    cfg.seed = 9;
    Dataset data = load_configured_dataset(cfg);
    TrainResult result = train(cfg, data);
    CHECK(result.metrics.diverged);
    for (double v : flatten_parameters(result.spec)) CHECK(std::isfinite(v));
}

TEST_CASE("inference on a zero network predicts the lowest class") {
    NetworkSpec spec;
    spec.layer_sizes = {2, 3, 3};
    spec.params = NeuronParams{0.5, 1.0};
    spec.weights = {Matrix(3, 2), Matrix(3, 3)};
    spec.biases = {Vector(3, 0.0), Vector(3, 0.0)};
    Dataset data = make_two_moons(10, 0.1, 5);
    data.num_classes = 3;
    InferenceResult r = infer_lif(spec, data, 4, InputEncoding::ConstantCurrent, 1, 1);
    for (std::size_t p : r.predictions) CHECK(p == 0);
    CHECK(r.total_rate == 0.0);
}

TEST_CASE("lif and saf inference agree on a trained-shape network") {
    Rng rng(51);
    NetworkSpec spec = make_random_network({2, 16, 2}, NeuronParams{0.5, 1.0}, 4.0, rng);
    Dataset data = make_two_moons(64, 0.1, 51);
    InferenceResult a = infer_saf(spec, data, 6, InputEncoding::ConstantCurrent, 1, 1);
    InferenceResult b = infer_lif(spec, data, 6, InputEncoding::ConstantCurrent, 1, 1);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.predictions.size(); ++i)
        if (a.predictions[i] == b.predictions[i]) ++agree;
    CHECK(agree == a.predictions.size());
    CHECK(std::abs(a.total_rate - b.total_rate) < 1e-12);
}

TEST_CASE("firing rate report endpoints") {
    NetworkSpec silent;
    silent.layer_sizes = {1, 1};
    silent.params = NeuronParams{0.5, 1.0};
    silent.weights = {Matrix(1, 1)};
    silent.biases = {Vector{0.0}};
    ForwardTrace quiet = forward_lif(silent, constant_input({0.0}, 5));
    CHECK(firing_rate_report(quiet)[0] == 0.0);

    NetworkSpec loud = silent;
    loud.biases[0] = {2.0};
    ForwardTrace busy = forward_lif(loud, constant_input({0.0}, 5));
    CHECK(firing_rate_report(busy)[0] == 1.0);

    // Rates agree across modes on a margin-guarded run.
    Rng rng(52);
    NetworkSpec spec = make_random_network({2, 10, 2}, NeuronParams{0.5, 1.0}, 4.0, rng);
    std::vector<Vector> inputs = constant_input({0.6, 0.3}, 8);
    ForwardTrace lt = forward_lif(spec, inputs);
    ForwardTrace st = forward_saf(spec, inputs);
    if (lt.min_margin() >= 1e-9 && st.min_margin() >= 1e-9)
        CHECK(firing_rate_report(lt) == firing_rate_report(st));
}

TEST_CASE("bench reports the flat-vs-linear state growth") {
    BenchReport report = run_bench(7, 1, 3);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.memory_claim_holds);
    CHECK(report.rows[0].saf_state_vectors == report.rows[3].saf_state_vectors);
    CHECK(report.rows[3].lif_trace_vectors == 8 * report.rows[0].lif_trace_vectors);
}

TEST_CASE("held-out split is evaluated each epoch") {
    ExperimentConfig cfg;
    cfg.dataset = "two-moons";
    cfg.test_dataset = "two-moons";
    cfg.engine = "saf-f";
    cfg.moons_n = 24;
    cfg.hidden_sizes = {8};
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.num_steps = 4;
    cfg.seed = 5;
    Dataset data = load_configured_dataset(cfg);
    TrainResult result = train(cfg, data);
    for (const EpochMetrics& em : result.metrics.epochs) {
        CHECK(em.has_test);
        CHECK(em.test_accuracy >= 0.0);
        CHECK(std::isfinite(em.test_loss));
    }
    std::ostringstream os;
    write_metrics_csv(result.metrics, os);
    CHECK(os.str().find(",test,") != std::string::npos);
}

TEST_CASE("metrics CSV carries one row per epoch") {
    RunMetrics metrics;
    EpochMetrics em;
    em.epoch = 0;
    em.train_accuracy = 0.75;
    em.train_loss = 0.5;
    em.layer_rates = {0.1, 0.2};
    em.total_rate = 0.15;
    metrics.epochs.push_back(em);
    std::ostringstream os;
    write_metrics_csv(metrics, os);
    CHECK(os.str().find("epoch,split,accuracy,loss,total_rate,rate_layer1,rate_layer2") == 0);
    CHECK(os.str().find("0,train,0.75,0.5,0.15,0.1,0.2") != std::string::npos);
}
