#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "saf/loss.hpp"
#include "saf/network.hpp"

namespace saf {

enum class EngineKind { SafE, SafF, OtttO, OtttA, SpikeRep };

std::string engine_name(EngineKind kind);
// Parses "saf-e", "saf-f", "ottt-o", "ottt-a", "spike-rep".
EngineKind parse_engine(const std::string& name);

// Per-parameter gradients from one backward engine. weight_grads[l] and
// bias_grads[l] mirror NetworkSpec::weights/biases; orientation is
// grad[i][j] = dL/dW[i][j] with i the postsynaptic row.
struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<Vector> bias_grads;
    std::optional<Matrix> conn_grad;
    EngineKind engine = EngineKind::SafE;
    std::size_t time_index = 0;  // for per-step engines

    void add(const GradientSet& other);
    void scale_by(double s);
    // Fixed flattening order: W0 row-major, b1, W1, b2, ..., then the
    // connection weight if present.
    Vector flatten() const;
};

GradientSet zero_gradients(const NetworkSpec& spec, EngineKind engine);

// Backward signal per layer: per_layer[l-1] is the gradient of the loss
// w.r.t. the potential-accumulation (equivalently membrane) drive of
// layer l at the evaluated step.
struct BackSignal {
    std::vector<Vector> per_layer;
};

// Per-neuron derivative factors of the spike nonlinearity, one vector per
// layer 1..N: surrogate factors evaluate sg at the membrane view of step
// t; clamp factors evaluate the clamp derivative at the rate-space
// pre-activation of the final step (1 strictly inside (0,1), else 0).
std::vector<Vector> surrogate_factors(const ForwardTrace& trace, std::size_t t,
                                      const NetworkSpec& spec);
std::vector<Vector> clamp_factors(const ForwardTrace& trace, const NetworkSpec& spec);

// Descending chain: g^N = loss_grad (*) f^N; g^k = (W^k)^T g^{k+1} (*) f^k,
// plus the same-step path through a feedforward connection into its
// source layer's signal. Feedback connections contribute no same-step
// backward path (their read of the previous step is treated as constant).
BackSignal back_signal_with_factors(const std::vector<Vector>& factors, const Vector& loss_grad,
                                    const NetworkSpec& spec);
// Convenience form with surrogate factors at step t.
BackSignal back_signal(const ForwardTrace& trace, std::size_t t, const Vector& loss_grad_at_top,
                       const NetworkSpec& spec);

enum class FactorMode { Surrogate, ClampShared };

// Per-step engine on accumulation quantities: dW^l = outer(g^{l+1},
// accum^l[t]), biases take the bare signal, the connection weight takes
// the source accumulation at t (feedforward) or t-1 (feedback).
GradientSet grad_saf_e(const ForwardTrace& trace, std::size_t t, std::size_t label,
                       const NetworkSpec& spec, const LossSpec& loss_spec);

// Final-step engine on the weighted-rate loss. ClampShared swaps the
// surrogate factors for the clamp factors (the configuration under which
// the rate-space engine below matches up to the v_th scale).
GradientSet grad_saf_f(const ForwardTrace& trace, std::size_t label, const NetworkSpec& spec,
                       const LossSpec& loss_spec, FactorMode mode = FactorMode::Surrogate);

// Per-step engine on spike-train quantities (identical formula shape,
// evaluated from the spike/membrane view of the trace).
GradientSet grad_ottt_o(const ForwardTrace& trace, std::size_t t, std::size_t label,
                        const NetworkSpec& spec, const LossSpec& loss_spec);

// Sum of the per-step gradients over t = 1..T, in ascending t.
GradientSet grad_ottt_a(const ForwardTrace& trace, std::size_t label, const NetworkSpec& spec,
                        const LossSpec& loss_spec);

// Rate-space engine: clamp-derivative factors, the same chain, and a
// global 1/v_th factor on every parameter gradient.
GradientSet grad_spike_representation(const ForwardTrace& trace, std::size_t label,
                                      const NetworkSpec& spec, const LossSpec& loss_spec);

// Streaming counterparts of the per-step and final-step engines, reading
// the online network states directly (same arithmetic as the trace
// adapters above; the trainer uses these so parameters can change
// mid-sequence without a trace).
GradientSet online_grad_saf_e(const OnlineSafNet& net, const NetworkSpec& spec, std::size_t label,
                              const LossSpec& loss_spec, std::size_t num_steps);
GradientSet online_grad_ottt_o(const OnlineLifNet& net, const NetworkSpec& spec, std::size_t label,
                               const LossSpec& loss_spec, std::size_t num_steps);
GradientSet online_grad_saf_f(const OnlineSafNet& net, const NetworkSpec& spec, std::size_t label,
                              const LossSpec& loss_spec, std::size_t num_steps);

// Brute-force chain-rule unroll over the same-step layer graph (previous
// step reads treated as constants), used as ground truth for the engines
// above. Only accepts tiny instances: <= 3 layers, <= 4 units per layer,
// T <= 4.
GradientSet unrolled_reference_grad(const NetworkSpec& spec,
                                    const std::vector<Vector>& input_sequence, std::size_t label,
                                    const LossSpec& loss_spec, EngineKind engine,
                                    std::size_t t = 0);

// Flat CSV: engine,layer,index,value. Layer labels are W0,b1,W1,...,Wf/Wb.
void write_gradients_csv(const GradientSet& grads, const NetworkSpec& spec, std::ostream& os);

double max_abs_diff(const GradientSet& a, const GradientSet& b);
// Entrywise |a-b| / max(|a|,|b|); entries where both are exactly zero
// compare as equal.
double max_rel_diff(const GradientSet& a, const GradientSet& b);

}  // namespace saf
