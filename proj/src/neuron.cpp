#include "saf/neuron.hpp"

#include <cmath>
#include <stdexcept>

namespace saf {

void validate(const NeuronParams& p) {
    if (!(p.leak > 0.0 && p.leak <= 1.0)) throw std::invalid_argument("leak must be in (0, 1]");
    if (!(p.v_th > 0.0)) throw std::invalid_argument("v_th must be positive");
}

Vector lif_step(LifState& state, const Vector& drive, const NeuronParams& params) {
    if (drive.size() != state.potential.size())
        throw std::invalid_argument("lif_step: drive width mismatch");
    const std::size_t n = drive.size();
    Vector spikes(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double u = params.leak * (state.potential[i] - params.v_th * state.last_spikes[i]) + drive[i];
        state.potential[i] = u;
        spikes[i] = (u >= params.v_th) ? 1.0 : 0.0;
    }
    state.last_spikes = spikes;
    return spikes;
}

Vector saf_step(SafState& state, const Vector& drive_increment, const NeuronParams& params) {
    if (drive_increment.size() != state.accum.size())
        throw std::invalid_argument("saf_step: drive width mismatch");
    const std::size_t n = drive_increment.size();
    Vector spikes(n, 0.0);
    state.accum_prev = state.accum;
    for (std::size_t i = 0; i < n; ++i) {
        double pa = params.leak * state.pot_accum[i] + drive_increment[i];
        state.pot_accum[i] = pa;
        double gate = pa - params.v_th * (params.leak * state.accum_prev[i] + 1.0);
        spikes[i] = (gate >= 0.0) ? 1.0 : 0.0;
        state.accum[i] = params.leak * state.accum_prev[i] + spikes[i];
    }
    state.step += 1;
    return spikes;
}

Vector saf_pot_accum_closed_form(const Vector& w_accum_in, const Vector& bias,
                                 const Vector& pot_accum_init, double leak, std::size_t t) {
    if (w_accum_in.size() != bias.size() || bias.size() != pot_accum_init.size())
        throw std::invalid_argument("saf_pot_accum_closed_form: width mismatch");
    // The recurrence adds the bias once per step, so t steps accumulate
    // 1 + leak + ... + leak^{t-1}.
    double bias_sum = 0.0;
    double power = 1.0;
    for (std::size_t k = 0; k < t; ++k) {
        bias_sum += power;
        power *= leak;
    }
    double decay = std::pow(leak, static_cast<double>(t));
    Vector out(w_accum_in.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = w_accum_in[i] + bias[i] * bias_sum + decay * pot_accum_init[i];
    return out;
}

LifView saf_to_lif(const SafState& state, const NeuronParams& params) {
    if (state.step == 0) throw std::invalid_argument("saf_to_lif: no step taken yet");
    const std::size_t n = state.accum.size();
    LifView view;
    view.potential.resize(n);
    view.spikes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        view.potential[i] = state.pot_accum[i] - params.v_th * params.leak * state.accum_prev[i];
        view.spikes[i] = state.accum[i] - params.leak * state.accum_prev[i];
    }
    return view;
}

SafState lif_to_saf(const std::vector<Vector>& spike_history, const Vector& potential,
                    const NeuronParams& params) {
    const std::size_t n = potential.size();
    SafState state(n);
    for (const Vector& s : spike_history) {
        if (s.size() != n) throw std::invalid_argument("lif_to_saf: spike width mismatch");
        state.accum_prev = state.accum;
        for (std::size_t i = 0; i < n; ++i)
            state.accum[i] = params.leak * state.accum_prev[i] + s[i];
        state.step += 1;
    }
    for (std::size_t i = 0; i < n; ++i)
        state.pot_accum[i] = potential[i] + params.v_th * params.leak * state.accum_prev[i];
    return state;
}

Vector weighted_firing_rate(const Vector& accum, double leak, std::size_t t) {
    double denom = geometric_weight_sum(leak, t);
    Vector out(accum.size());
    for (std::size_t i = 0; i < accum.size(); ++i) out[i] = accum[i] / denom;
    return out;
}

Vector weighted_mean_input(const std::vector<Vector>& inputs, double leak) {
    if (inputs.empty()) throw std::invalid_argument("weighted_mean_input: empty sequence");
    const std::size_t n = inputs.front().size();
    const std::size_t t = inputs.size() - 1;
    Vector acc(n, 0.0);
    // Accumulate in time order, weight leak^{t-tau}.
    for (std::size_t tau = 0; tau < inputs.size(); ++tau) {
        if (inputs[tau].size() != n)
            throw std::invalid_argument("weighted_mean_input: ragged sequence");
        double w = std::pow(leak, static_cast<double>(t - tau));
        for (std::size_t i = 0; i < n; ++i) acc[i] += w * inputs[tau][i];
    }
    double denom = geometric_weight_sum(leak, t);
    for (std::size_t i = 0; i < n; ++i) acc[i] /= denom;
    return acc;
}

}  // namespace saf
