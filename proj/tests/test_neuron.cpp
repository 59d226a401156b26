#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "saf/neuron.hpp"

using namespace saf;

TEST_CASE("lif_step: zero input never fires") {
    LifState state(3);
    NeuronParams p{0.5, 1.0};
    for (int t = 0; t < 10; ++t) {
        Vector s = lif_step(state, {0.0, 0.0, 0.0}, p);
        CHECK(s == Vector{0.0, 0.0, 0.0});
        CHECK(state.potential == Vector{0.0, 0.0, 0.0});
    }
}

TEST_CASE("lif_step: hand-unrolled single neuron, leak 0.5") {
    LifState state(1);
    NeuronParams p{0.5, 1.0};
    Vector drive{0.6};
    const double expected_u[4] = {0.6, 0.9, 1.05, 0.625};
    const double expected_s[4] = {0.0, 0.0, 1.0, 0.0};
    for (int t = 0; t < 4; ++t) {
        Vector s = lif_step(state, drive, p);
        CHECK(state.potential[0] == doctest::Approx(expected_u[t]).epsilon(1e-15));
        CHECK(s[0] == expected_s[t]);
    }
}

TEST_CASE("lif_step: IF neuron at threshold drive fires every step") {
    LifState state(1);
    NeuronParams p{1.0, 1.0};
    for (int t = 0; t < 6; ++t) {
        Vector s = lif_step(state, {1.0}, p);
        CHECK(s[0] == 1.0);
        CHECK(state.potential[0] == 1.0);
    }
}

TEST_CASE("saf_step: silent with zero input") {
    SafState state(2);
    NeuronParams p{0.5, 1.0};
    for (int t = 0; t < 5; ++t) {
        Vector s = saf_step(state, {0.0, 0.0}, p);
        CHECK(s == Vector{0.0, 0.0});
        CHECK(state.accum == Vector{0.0, 0.0});
    }
}

TEST_CASE("saf_step: hand-unrolled single neuron matches the LIF trace") {
    SafState state(1);
    NeuronParams p{0.5, 1.0};
    const double expected_accum[4] = {0.0, 0.0, 1.0, 0.5};
    const double expected_s[4] = {0.0, 0.0, 1.0, 0.0};
    for (int t = 0; t < 4; ++t) {
        Vector s = saf_step(state, {0.6}, p);
        CHECK(s[0] == expected_s[t]);
        CHECK(state.accum[0] == doctest::Approx(expected_accum[t]).epsilon(1e-15));
    }
}

TEST_CASE("saf_step: IF case accumulates one spike per step") {
    SafState state(1);
    NeuronParams p{1.0, 1.0};
    for (int t = 1; t <= 8; ++t) {
        saf_step(state, {1.0}, p);
        CHECK(state.accum[0] == static_cast<double>(t));
    }
}

TEST_CASE("saf_to_lif reproduces the membrane view") {
    SafState state(1);
    NeuronParams p{0.5, 1.0};
    CHECK_THROWS_AS(saf_to_lif(state, p), std::invalid_argument);

    const double expected_u[4] = {0.6, 0.9, 1.05, 0.625};
    const double expected_s[4] = {0.0, 0.0, 1.0, 0.0};
    for (int t = 0; t < 4; ++t) {
        saf_step(state, {0.6}, p);
        LifView view = saf_to_lif(state, p);
        CHECK(view.potential[0] == doctest::Approx(expected_u[t]).epsilon(1e-12));
        CHECK(view.spikes[0] == doctest::Approx(expected_s[t]).epsilon(1e-12));
    }
}

TEST_CASE("saf_to_lif: silent state decays the initial accumulation") {
    SafState state(1);
    state.pot_accum_init = {0.8};
    state.pot_accum = {0.8};
    NeuronParams p{0.5, 1.0};
    for (int t = 1; t <= 3; ++t) {
        saf_step(state, {0.0}, p);
        LifView view = saf_to_lif(state, p);
        CHECK(view.potential[0] ==
              doctest::Approx(0.8 * std::pow(0.5, t)).epsilon(1e-12));
        CHECK(view.spikes[0] == 0.0);
    }
}

TEST_CASE("saf_to_lif: IF with a single first-step spike") {
    SafState state(1);
    NeuronParams p{1.0, 1.0};
    saf_step(state, {1.5}, p);
    LifView view = saf_to_lif(state, p);
    CHECK(view.spikes[0] == 1.0);
}

TEST_CASE("lif_to_saf inverts the spike history") {
    CHECK(lif_to_saf({}, {0.0, 0.0}, NeuronParams{0.5, 1.0}).accum == Vector{0.0, 0.0});

    // Round trip against an actual accumulation run.
    NeuronParams p{0.5, 1.0};
    SafState state(1);
    std::vector<Vector> spikes;
    for (int t = 0; t < 6; ++t) spikes.push_back(saf_step(state, {0.7}, p));
    LifView view = saf_to_lif(state, p);
    SafState rebuilt = lif_to_saf(spikes, view.potential, p);
    CHECK(rebuilt.accum == state.accum);
    CHECK(rebuilt.accum_prev == state.accum_prev);

    // A lone spike at the last step contributes weight 1 for any leak.
    for (double leak : {1.0, 0.5, 0.25}) {
        std::vector<Vector> history(4, Vector{0.0});
        history.back() = {1.0};
        SafState s = lif_to_saf(history, {0.0}, NeuronParams{leak, 1.0});
        CHECK(s.accum[0] == 1.0);
    }
}

TEST_CASE("closed form potential accumulation matches the recurrence") {
    NeuronParams p{0.5, 1.0};
    Rng rng(21);
    SafState state(1);
    state.pot_accum_init = {rng.uniform(-0.2, 0.2)};
    state.pot_accum = state.pot_accum_init;
    Vector bias{0.15};
    double in_accum = 0.0, in_accum_prev = 0.0;
    const double w = 0.9;
    for (std::size_t t = 1; t <= 32; ++t) {
        double x = 0.4;
        in_accum_prev = in_accum;
        in_accum = p.leak * in_accum_prev + x;
        double drive = w * (in_accum - p.leak * in_accum_prev) + bias[0];
        saf_step(state, {drive}, p);
        Vector closed = saf_pot_accum_closed_form({w * in_accum}, bias, state.pot_accum_init,
                                                  p.leak, t);
        CHECK(state.pot_accum[0] ==
              doctest::Approx(closed[0]).epsilon(1e-10));
    }
}

TEST_CASE("weighted firing rate") {
    CHECK(weighted_firing_rate({0.0, 0.0}, 0.5, 7) == Vector{0.0, 0.0});
    // Plain rate for the IF case: k spikes over t+1 steps.
    CHECK(weighted_firing_rate({3.0}, 1.0, 5)[0] == doctest::Approx(0.5).epsilon(1e-15));
    // Saturated neuron divides out the geometric sum exactly.
    CHECK(weighted_firing_rate({1.75}, 0.5, 2)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("weighted mean input") {
    CHECK_THROWS_AS(weighted_mean_input({}, 0.5), std::invalid_argument);
    std::vector<Vector> constant(5, Vector{0.3, -0.7});
    Vector m = weighted_mean_input(constant, 0.5);
    CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(m[1] == doctest::Approx(-0.7).epsilon(1e-12));

    std::vector<Vector> seq{{1.0}, {2.0}, {6.0}};
    CHECK(weighted_mean_input(seq, 1.0)[0] == doctest::Approx(3.0).epsilon(1e-12));

    std::vector<Vector> pair{{0.0}, {1.0}};
    CHECK(weighted_mean_input(pair, 0.5)[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("accumulation is monotone for the IF neuron") {
    NeuronParams p{1.0, 1.0};
    Rng rng(31);
    SafState state(4);
    Vector prev(4, 0.0);
    for (int t = 0; t < 40; ++t) {
        Vector drive(4);
        for (double& d : drive) d = rng.uniform(-0.5, 1.5);
        saf_step(state, drive, p);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(state.accum[i] >= prev[i]);
            prev[i] = state.accum[i];
        }
    }
}

TEST_CASE("accumulation state size is step-count independent") {
    CHECK(SafState::kVectorsPerLayer == 4);
    SafState state(8);
    NeuronParams p{0.5, 1.0};
    for (int t = 0; t < 100; ++t) saf_step(state, Vector(8, 0.3), p);
    // Exactly the four vectors, regardless of how far the run went.
    CHECK(state.accum.size() == 8);
    CHECK(state.accum_prev.size() == 8);
    CHECK(state.pot_accum.size() == 8);
    CHECK(state.pot_accum_init.size() == 8);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(validate(NeuronParams{0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(NeuronParams{1.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(NeuronParams{0.5, 0.0}), std::invalid_argument);
    CHECK_NOTHROW(validate(NeuronParams{1.0, 2.0}));
}
