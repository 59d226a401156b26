#pragma once

#include <cstddef>

#include "saf/math.hpp"

namespace saf {

struct NeuronParams {
    double leak = 0.5;  // lambda in (0, 1]; 1 gives the IF neuron
    double v_th = 1.0;  // firing threshold, > 0
};

void validate(const NeuronParams& p);

// Leaky integrate-and-fire layer state: membrane potential and the spike
// output of the previous step (needed for the subtractive reset).
struct LifState {
    Vector potential;    // u
    Vector last_spikes;  // s[t-1], entries in {0,1}

    explicit LifState(std::size_t width)
        : potential(width, 0.0), last_spikes(width, 0.0) {}
    LifState() = default;
};

// Spike-accumulation layer state. Exactly four vectors regardless of how
// many steps have been taken; the past potential accumulation is never
// retained.
struct SafState {
    Vector accum;           // spike accumulation at the current step
    Vector accum_prev;      // spike accumulation one step back
    Vector pot_accum;       // potential accumulation at the current step
    Vector pot_accum_init;  // potential accumulation at step 0
    std::size_t step = 0;   // number of steps taken

    explicit SafState(std::size_t width)
        : accum(width, 0.0),
          accum_prev(width, 0.0),
          pot_accum(width, 0.0),
          pot_accum_init(width, 0.0) {}
    SafState() = default;

    static constexpr std::size_t kVectorsPerLayer = 4;
};

// One LIF step: u <- leak*(u - v_th*s_prev) + drive; spike iff u >= v_th
// (soft reset). Returns the emitted spikes.
Vector lif_step(LifState& state, const Vector& drive, const NeuronParams& params);

// One SAF step in recurrence form:
//   pot_accum <- leak*pot_accum + drive_increment
//   spike iff pot_accum >= v_th*(leak*accum_prev + 1)
//   accum <- leak*accum_prev + spike
// drive_increment is W*(accum_in[t] - leak*accum_in[t-1]) + b (+ connection
// increment), prepared by the caller. Returns the emitted spikes.
Vector saf_step(SafState& state, const Vector& drive_increment, const NeuronParams& params);

// Closed-form potential accumulation for cross-checking the recurrence:
// W*accum_in[t] + b*sum_{tau=0}^{t-1} leak^{t-tau} + leak^t * init.
Vector saf_pot_accum_closed_form(const Vector& w_accum_in, const Vector& bias,
                                 const Vector& pot_accum_init, double leak, std::size_t t);

// Membrane potential / spikes recovered from accumulation state:
//   u = pot_accum - v_th*leak*accum_prev
//   s = accum - leak*accum_prev
// Requires at least one step taken.
struct LifView {
    Vector potential;
    Vector spikes;
};
LifView saf_to_lif(const SafState& state, const NeuronParams& params);

// Rebuild accumulation state from a spike history s[1..t] and the current
// membrane potential (inverse of the conversion above).
SafState lif_to_saf(const std::vector<Vector>& spike_history, const Vector& potential,
                    const NeuronParams& params);

// accum / sum_{tau=0}^{t} leak^{t-tau}
Vector weighted_firing_rate(const Vector& accum, double leak, std::size_t t);

// sum_tau leak^{t-tau} x[tau] / sum_tau leak^{t-tau} over the given
// sequence (t = inputs.size() - 1).
Vector weighted_mean_input(const std::vector<Vector>& inputs, double leak);

}  // namespace saf
