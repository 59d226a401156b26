#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "saf/math.hpp"
#include "saf/neuron.hpp"

namespace saf {

enum class ConnectionKind { Feedforward, Feedback };

// One auxiliary weight matrix between non-adjacent layers. Feedforward
// reads the source layer at the same step (src < dst); feedback reads it
// one step back (src >= dst). Layers are numbered 0 (input) .. N.
struct Connection {
    ConnectionKind kind = ConnectionKind::Feedforward;
    std::size_t src = 0;  // source layer, 1..N
    std::size_t dst = 0;  // destination layer, 1..N
    Matrix weight;        // shape: size[dst] x size[src]
};

// Fully connected layer stack. weights[l] maps layer l to layer l+1
// (shape size[l+1] x size[l]); biases[l] belongs to layer l+1.
struct NetworkSpec {
    std::vector<std::size_t> layer_sizes;  // N+1 entries including the input layer
    NeuronParams params;
    double sg_beta = 4.0;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::optional<Connection> connection;
    // Per-feature normalization applied to raw inputs before encoding
    // (recorded at training time so inference replays it bit-identically).
    Vector norm_shift;
    Vector norm_scale;

    std::size_t num_layers() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
    std::size_t input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.back(); }
};

void validate(const NetworkSpec& spec);

enum class TraceMode { Lif, Saf };

// Per-step record of everything the backward engines read. Both modes
// expose the same accessors so any engine can run on either trace:
//   Lif mode stores (u, accum) per layer-step; spikes are recomputed
//   exactly as u >= v_th.
//   Saf mode stores (accum, accum_prev, pot_accum) per layer-step; the
//   membrane view comes from the accumulation identities, and spikes are
//   reconstructed as accum - leak*accum_prev snapped to {0,1}.
class ForwardTrace {
  public:
    ForwardTrace(TraceMode mode, const NetworkSpec& spec, std::size_t num_steps);

    TraceMode mode() const { return mode_; }
    std::size_t num_steps() const { return num_steps_; }
    std::size_t num_layers() const { return num_layers_; }
    const NeuronParams& params() const { return params_; }

    // Accumulation of layer l (0 = input) at step t in 1..T; t = 0 gives
    // the zero initial state.
    const Vector& accum(std::size_t layer, std::size_t t) const;
    const Vector& accum_prev(std::size_t layer, std::size_t t) const;
    // Membrane potential of layer l in 1..N at step t in 1..T.
    Vector potential(std::size_t layer, std::size_t t) const;
    // Spike vector of layer l in 1..N at step t (entries exactly 0 or 1).
    Vector spikes(std::size_t layer, std::size_t t) const;
    // |u - v_th| margin, for guard checks.
    double min_margin(std::size_t t) const;
    double min_margin() const;

    // Number of stored state vectors, using the per-step accounting the
    // backward passes consume: 2 per layer-step in Lif mode (u, accum),
    // 3 in Saf mode (accum, accum_prev, pot_accum).
    std::size_t stored_vector_count() const;

    // Filled by the forward runners.
    void record_lif(std::size_t layer, std::size_t t, const Vector& u, const Vector& accum);
    void record_saf(std::size_t layer, std::size_t t, const Vector& accum,
                    const Vector& accum_prev, const Vector& pot_accum);
    void record_input_accum(std::size_t t, const Vector& accum, const Vector& accum_prev);

  private:
    TraceMode mode_;
    std::size_t num_steps_;
    std::size_t num_layers_;
    NeuronParams params_;
    Vector zero_input_;                              // accum(l, 0)
    std::vector<Vector> zeros_;                      // per-layer zero vectors
    std::vector<std::vector<Vector>> accum_;         // [layer][t-1], layer 0..N
    std::vector<std::vector<Vector>> accum_prev_;    // Saf mode, [layer][t-1]
    std::vector<std::vector<Vector>> potential_;     // [layer-1][t-1], layers 1..N
};

// Streaming network state in LIF form, plus the running spike
// accumulations the per-step gradient engines read. One instance per
// sample; step() advances every layer by one step.
struct OnlineLifNet {
    std::vector<LifState> layers;
    std::vector<Vector> accum;       // layers 0..N, accumulation at the current step
    std::vector<Vector> accum_prev;  // layers 0..N, one step back
    std::size_t step_count = 0;

    explicit OnlineLifNet(const NetworkSpec& spec);
    // Returns the output layer's spikes.
    const Vector& step(const NetworkSpec& spec, const Vector& x);
};

// Streaming network state in accumulation form. The input accumulation
// is the only extra state beyond the per-layer SafState.
struct OnlineSafNet {
    std::vector<SafState> layers;
    Vector input_accum;
    Vector input_accum_prev;
    std::size_t step_count = 0;

    explicit OnlineSafNet(const NetworkSpec& spec);
    const Vector& step(const NetworkSpec& spec, const Vector& x);
};

// Run the stack in LIF form. Inputs are injected as drive W^0 x[t] + b
// each step; the trace also carries the running input/layer spike
// accumulations the gradient engines need.
ForwardTrace forward_lif(const NetworkSpec& spec, const std::vector<Vector>& input_sequence);

// Run the stack in accumulation form; only accumulations are stored.
ForwardTrace forward_saf(const NetworkSpec& spec, const std::vector<Vector>& input_sequence);

// Streaming (no-trace) forward passes: return the output layer's final
// accumulation, for classification, plus per-layer spike totals.
struct StreamResult {
    Vector output_accum;                  // accum of layer N at T
    std::vector<double> layer_spike_sums; // total spikes per layer over the run
    std::size_t peak_state_vectors = 0;   // high-water count of live state vectors
};
StreamResult run_lif_streaming(const NetworkSpec& spec, const std::vector<Vector>& input_sequence);
StreamResult run_saf_streaming(const NetworkSpec& spec, const std::vector<Vector>& input_sequence);

struct StateBufferReport {
    std::vector<std::size_t> per_layer;  // retained state vectors per layer
    std::size_t total() const;
};

// Retained-vector counts for a forward pass at arbitrary T. Saf mode
// holds 4 vectors per layer regardless of T; Lif inference holds 2.
StateBufferReport count_state_buffers(const NetworkSpec& spec, TraceMode mode);

// Stored trace vectors for a traced forward pass of num_steps steps
// (2*N*T in Lif mode, 3*N*T in Saf mode).
std::size_t traced_vector_count(const NetworkSpec& spec, TraceMode mode, std::size_t num_steps);

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases uniform
// in [0, 0.3]; connection weights follow the same fan-in rule.
NetworkSpec make_random_network(const std::vector<std::size_t>& layer_sizes,
                                const NeuronParams& params, double sg_beta, Rng& rng);
void attach_random_connection(NetworkSpec& spec, ConnectionKind kind, std::size_t src,
                              std::size_t dst, Rng& rng);

// Flat key=value serialization (exact round-trip via shortest
// representation that parses back to the same double).
void save_network(const NetworkSpec& spec, std::ostream& os);
void save_network(const NetworkSpec& spec, const std::string& path);
NetworkSpec load_network(std::istream& is);
NetworkSpec load_network(const std::string& path);

// Constant-current encoding: the same feature vector at every step.
std::vector<Vector> constant_input(const Vector& features, std::size_t num_steps);

// All parameters in a fixed order (W0 row-major, b1, W1, b2, ..., then
// the connection weight), for trajectory comparisons.
Vector flatten_parameters(const NetworkSpec& spec);

}  // namespace saf
