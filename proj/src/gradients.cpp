#include "saf/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace saf {

std::string engine_name(EngineKind kind) {
    switch (kind) {
        case EngineKind::SafE: return "saf-e";
        case EngineKind::SafF: return "saf-f";
        case EngineKind::OtttO: return "ottt-o";
        case EngineKind::OtttA: return "ottt-a";
        case EngineKind::SpikeRep: return "spike-rep";
    }
    return "?";
}

EngineKind parse_engine(const std::string& name) {
    if (name == "saf-e") return EngineKind::SafE;
    if (name == "saf-f") return EngineKind::SafF;
    if (name == "ottt-o") return EngineKind::OtttO;
    if (name == "ottt-a") return EngineKind::OtttA;
    if (name == "spike-rep") return EngineKind::SpikeRep;
    throw std::invalid_argument("unknown engine '" + name +
                                "' (valid: saf-e, saf-f, ottt-o, ottt-a, spike-rep)");
}

void GradientSet::add(const GradientSet& other) {
    for (std::size_t l = 0; l < weight_grads.size(); ++l)
        for (std::size_t i = 0; i < weight_grads[l].data.size(); ++i)
            weight_grads[l].data[i] += other.weight_grads[l].data[i];
    for (std::size_t l = 0; l < bias_grads.size(); ++l)
        for (std::size_t i = 0; i < bias_grads[l].size(); ++i)
            bias_grads[l][i] += other.bias_grads[l][i];
    if (conn_grad && other.conn_grad)
        for (std::size_t i = 0; i < conn_grad->data.size(); ++i)
            conn_grad->data[i] += other.conn_grad->data[i];
}

void GradientSet::scale_by(double s) {
    for (Matrix& m : weight_grads)
        for (double& x : m.data) x *= s;
    for (Vector& v : bias_grads)
        for (double& x : v) x *= s;
    if (conn_grad)
        for (double& x : conn_grad->data) x *= s;
}

Vector GradientSet::flatten() const {
    Vector out;
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        out.insert(out.end(), weight_grads[l].data.begin(), weight_grads[l].data.end());
        out.insert(out.end(), bias_grads[l].begin(), bias_grads[l].end());
    }
    if (conn_grad) out.insert(out.end(), conn_grad->data.begin(), conn_grad->data.end());
    return out;
}

GradientSet zero_gradients(const NetworkSpec& spec, EngineKind engine) {
    GradientSet g;
    g.engine = engine;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        g.weight_grads.emplace_back(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
        g.bias_grads.emplace_back(spec.layer_sizes[l + 1], 0.0);
    }
    if (spec.connection)
        g.conn_grad = Matrix(spec.connection->weight.rows, spec.connection->weight.cols);
    return g;
}

std::vector<Vector> surrogate_factors(const ForwardTrace& trace, std::size_t t,
                                      const NetworkSpec& spec) {
    SurrogateParams sp{spec.sg_beta, spec.params.v_th};
    std::vector<Vector> factors(spec.num_layers());
    for (std::size_t l = 1; l <= spec.num_layers(); ++l)
        factors[l - 1] = sg(trace.potential(l, t), sp);
    return factors;
}

namespace {

// Clamp derivative with the saturated boundary convention: 1 strictly
// inside (0, 1), 0 at and beyond the boundaries.
double clamp_derivative(double x) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; }

}  // namespace

std::vector<Vector> clamp_factors(const ForwardTrace& trace, const NetworkSpec& spec) {
    const std::size_t steps = trace.num_steps();
    const double leak = spec.params.leak;
    const double v_th = spec.params.v_th;
    const double denom = geometric_weight_sum(leak, steps);
    std::vector<Vector> factors(spec.num_layers());
    for (std::size_t l = 1; l <= spec.num_layers(); ++l) {
        // Rate-space pre-activation (W a^{l-1}[T] + b [+ connection]) / v_th.
        Vector rate_in = scale(trace.accum(l - 1, steps), 1.0 / denom);
        Vector z = matvec(spec.weights[l - 1], rate_in);
        add_in_place(z, spec.biases[l - 1]);
        if (spec.connection && spec.connection->dst == l) {
            const Connection& c = *spec.connection;
            if (c.kind == ConnectionKind::Feedforward) {
                Vector src_rate = scale(trace.accum(c.src, steps), 1.0 / denom);
                add_in_place(z, matvec(c.weight, src_rate));
            } else {
                double denom_prev = geometric_weight_sum(leak, steps - 1);
                Vector src_rate = scale(trace.accum_prev(c.src, steps), 1.0 / denom_prev);
                add_in_place(z, matvec(c.weight, src_rate));
            }
        }
        Vector f(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) f[i] = clamp_derivative(z[i] / v_th);
        factors[l - 1] = f;
    }
    return factors;
}

BackSignal back_signal_with_factors(const std::vector<Vector>& factors, const Vector& loss_grad,
                                    const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    if (factors.size() != n) throw std::invalid_argument("back_signal: factor count mismatch");
    BackSignal sig;
    sig.per_layer.resize(n);
    sig.per_layer[n - 1] = hadamard(loss_grad, factors[n - 1]);
    for (std::size_t k = n - 1; k >= 1; --k) {
        Vector g = matvec_transposed(spec.weights[k], sig.per_layer[k]);
        if (spec.connection && spec.connection->kind == ConnectionKind::Feedforward &&
            spec.connection->src == k) {
            // Same-step skip path: the source layer also feeds dst via the
            // connection weight (dst > k, so its signal is already built).
            add_in_place(g, matvec_transposed(spec.connection->weight,
                                              sig.per_layer[spec.connection->dst - 1]));
        }
        sig.per_layer[k - 1] = hadamard(g, factors[k - 1]);
    }
    return sig;
}

BackSignal back_signal(const ForwardTrace& trace, std::size_t t, const Vector& loss_grad_at_top,
                       const NetworkSpec& spec) {
    return back_signal_with_factors(surrogate_factors(trace, t, spec), loss_grad_at_top, spec);
}

namespace {

// Everything a backward engine reads at one step, with one construction
// path from traces and one from streaming states so both are
// arithmetically identical.
struct EngineInputs {
    std::vector<const Vector*> accum;       // layers 0..N at t
    std::vector<const Vector*> accum_prev;  // layers 0..N at t-1
    std::vector<Vector> potential;          // layers 1..N, membrane view (owned)
    Vector out_spikes;                      // layer N spikes, exact {0,1}
};

EngineInputs inputs_from_trace(const ForwardTrace& trace, std::size_t t, const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    EngineInputs in;
    in.accum.resize(n + 1);
    in.accum_prev.resize(n + 1);
    for (std::size_t l = 0; l <= n; ++l) {
        in.accum[l] = &trace.accum(l, t);
        in.accum_prev[l] = &trace.accum_prev(l, t);
    }
    in.potential.resize(n);
    for (std::size_t l = 1; l <= n; ++l) in.potential[l - 1] = trace.potential(l, t);
    in.out_spikes = trace.spikes(n, t);
    return in;
}

EngineInputs inputs_from_online(const OnlineSafNet& net, const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    const double leak = spec.params.leak;
    const double v_th = spec.params.v_th;
    EngineInputs in;
    in.accum.resize(n + 1);
    in.accum_prev.resize(n + 1);
    in.accum[0] = &net.input_accum;
    in.accum_prev[0] = &net.input_accum_prev;
    in.potential.resize(n);
    for (std::size_t l = 1; l <= n; ++l) {
        const SafState& st = net.layers[l - 1];
        in.accum[l] = &st.accum;
        in.accum_prev[l] = &st.accum_prev;
        Vector u(st.accum.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = st.pot_accum[i] - v_th * leak * st.accum_prev[i];
        in.potential[l - 1] = std::move(u);
    }
    const SafState& top = net.layers[n - 1];
    in.out_spikes.resize(top.accum.size());
    for (std::size_t i = 0; i < top.accum.size(); ++i) {
        double raw = top.accum[i] - leak * top.accum_prev[i];
        in.out_spikes[i] = (raw > 0.5) ? 1.0 : 0.0;
    }
    return in;
}

EngineInputs inputs_from_online(const OnlineLifNet& net, const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    EngineInputs in;
    in.accum.resize(n + 1);
    in.accum_prev.resize(n + 1);
    in.potential.resize(n);
    for (std::size_t l = 0; l <= n; ++l) {
        in.accum[l] = &net.accum[l];
        in.accum_prev[l] = &net.accum_prev[l];
    }
    for (std::size_t l = 1; l <= n; ++l) in.potential[l - 1] = net.layers[l - 1].potential;
    const Vector& u = net.layers[n - 1].potential;
    in.out_spikes.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        in.out_spikes[i] = (u[i] >= spec.params.v_th) ? 1.0 : 0.0;
    return in;
}

std::vector<Vector> surrogate_factors_of(const std::vector<Vector>& potential,
                                         const NetworkSpec& spec) {
    SurrogateParams sp{spec.sg_beta, spec.params.v_th};
    std::vector<Vector> factors(potential.size());
    for (std::size_t l = 0; l < potential.size(); ++l) factors[l] = sg(potential[l], sp);
    return factors;
}

// Outer products of the back signal with the presynaptic accumulations.
GradientSet assemble(const EngineInputs& in, const BackSignal& sig, const NetworkSpec& spec,
                     EngineKind engine, double scale_all = 1.0) {
    GradientSet g;
    g.engine = engine;
    const std::size_t n = spec.num_layers();
    for (std::size_t l = 0; l < n; ++l) {
        g.weight_grads.push_back(outer(sig.per_layer[l], *in.accum[l]));
        g.bias_grads.push_back(sig.per_layer[l]);
    }
    if (spec.connection) {
        const Connection& c = *spec.connection;
        const Vector& src_accum = (c.kind == ConnectionKind::Feedforward) ? *in.accum[c.src]
                                                                          : *in.accum_prev[c.src];
        g.conn_grad = outer(sig.per_layer[c.dst - 1], src_accum);
    }
    if (scale_all != 1.0) g.scale_by(scale_all);
    return g;
}

GradientSet step_engine_core(const EngineInputs& in, const NetworkSpec& spec, std::size_t label,
                             const LossSpec& loss_spec, std::size_t num_steps, EngineKind engine,
                             std::size_t t) {
    LossResult loss = step_loss(in.out_spikes, label, loss_spec, num_steps);
    BackSignal sig =
        back_signal_with_factors(surrogate_factors_of(in.potential, spec), loss.grad, spec);
    GradientSet g = assemble(in, sig, spec, engine);
    g.time_index = t;
    return g;
}

GradientSet final_engine_core(const EngineInputs& in, const NetworkSpec& spec, std::size_t label,
                              const LossSpec& loss_spec, std::size_t num_steps,
                              const std::vector<Vector>& factors, EngineKind engine,
                              double scale_all) {
    LossResult loss =
        rate_loss(*in.accum[spec.num_layers()], label, loss_spec, spec.params.leak, num_steps);
    BackSignal sig = back_signal_with_factors(factors, loss.grad, spec);
    GradientSet g = assemble(in, sig, spec, engine, scale_all);
    g.time_index = num_steps;
    return g;
}

}  // namespace

GradientSet grad_saf_e(const ForwardTrace& trace, std::size_t t, std::size_t label,
                       const NetworkSpec& spec, const LossSpec& loss_spec) {
    if (t < 1 || t > trace.num_steps()) throw std::out_of_range("grad_saf_e: t out of range");
    return step_engine_core(inputs_from_trace(trace, t, spec), spec, label, loss_spec,
                            trace.num_steps(), EngineKind::SafE, t);
}

GradientSet grad_saf_f(const ForwardTrace& trace, std::size_t label, const NetworkSpec& spec,
                       const LossSpec& loss_spec, FactorMode mode) {
    const std::size_t steps = trace.num_steps();
    EngineInputs in = inputs_from_trace(trace, steps, spec);
    std::vector<Vector> factors = (mode == FactorMode::Surrogate)
                                      ? surrogate_factors_of(in.potential, spec)
                                      : clamp_factors(trace, spec);
    return final_engine_core(in, spec, label, loss_spec, steps, factors, EngineKind::SafF, 1.0);
}

GradientSet grad_ottt_o(const ForwardTrace& trace, std::size_t t, std::size_t label,
                        const NetworkSpec& spec, const LossSpec& loss_spec) {
    if (t < 1 || t > trace.num_steps()) throw std::out_of_range("grad_ottt_o: t out of range");
    return step_engine_core(inputs_from_trace(trace, t, spec), spec, label, loss_spec,
                            trace.num_steps(), EngineKind::OtttO, t);
}

GradientSet grad_ottt_a(const ForwardTrace& trace, std::size_t label, const NetworkSpec& spec,
                        const LossSpec& loss_spec) {
    GradientSet total = zero_gradients(spec, EngineKind::OtttA);
    for (std::size_t t = 1; t <= trace.num_steps(); ++t)
        total.add(grad_ottt_o(trace, t, label, spec, loss_spec));
    total.time_index = trace.num_steps();
    return total;
}

GradientSet grad_spike_representation(const ForwardTrace& trace, std::size_t label,
                                      const NetworkSpec& spec, const LossSpec& loss_spec) {
    const std::size_t steps = trace.num_steps();
    EngineInputs in = inputs_from_trace(trace, steps, spec);
    return final_engine_core(in, spec, label, loss_spec, steps, clamp_factors(trace, spec),
                             EngineKind::SpikeRep, 1.0 / spec.params.v_th);
}

GradientSet online_grad_saf_e(const OnlineSafNet& net, const NetworkSpec& spec, std::size_t label,
                              const LossSpec& loss_spec, std::size_t num_steps) {
    return step_engine_core(inputs_from_online(net, spec), spec, label, loss_spec, num_steps,
                            EngineKind::SafE, net.step_count);
}

GradientSet online_grad_ottt_o(const OnlineLifNet& net, const NetworkSpec& spec, std::size_t label,
                               const LossSpec& loss_spec, std::size_t num_steps) {
    return step_engine_core(inputs_from_online(net, spec), spec, label, loss_spec, num_steps,
                            EngineKind::OtttO, net.step_count);
}

GradientSet online_grad_saf_f(const OnlineSafNet& net, const NetworkSpec& spec, std::size_t label,
                              const LossSpec& loss_spec, std::size_t num_steps) {
    EngineInputs in = inputs_from_online(net, spec);
    return final_engine_core(in, spec, label, loss_spec, num_steps,
                             surrogate_factors_of(in.potential, spec), EngineKind::SafF, 1.0);
}

// ---------------------------------------------------------------------------
// Unrolled reference

namespace {

struct UnrolledForward {
    // [layer][t-1]; layer 0 holds the input accumulation.
    std::vector<std::vector<Vector>> accum;
    std::vector<std::vector<Vector>> potential;  // layers 1..N at [l-1][t-1]
    std::vector<std::vector<Vector>> spikes;     // layers 1..N at [l-1][t-1]

    Vector accum_at(std::size_t layer, std::size_t t, const NetworkSpec& spec) const {
        if (t == 0) return Vector(spec.layer_sizes[layer], 0.0);
        return accum[layer][t - 1];
    }
};

// Plain LIF re-simulation, written independently of the forward runners.
UnrolledForward simulate_for_oracle(const NetworkSpec& spec, const std::vector<Vector>& inputs) {
    const std::size_t n = spec.num_layers();
    const std::size_t steps = inputs.size();
    const double leak = spec.params.leak;
    const double v_th = spec.params.v_th;

    UnrolledForward fwd;
    fwd.accum.assign(n + 1, std::vector<Vector>(steps));
    fwd.potential.assign(n, std::vector<Vector>(steps));
    fwd.spikes.assign(n, std::vector<Vector>(steps));

    std::vector<Vector> u(n);
    std::vector<Vector> s_prev(n);
    std::vector<Vector> acc(n + 1);
    acc[0].assign(spec.input_dim(), 0.0);
    for (std::size_t l = 1; l <= n; ++l) {
        u[l - 1].assign(spec.layer_sizes[l], 0.0);
        s_prev[l - 1].assign(spec.layer_sizes[l], 0.0);
        acc[l].assign(spec.layer_sizes[l], 0.0);
    }

    for (std::size_t t = 1; t <= steps; ++t) {
        for (std::size_t i = 0; i < acc[0].size(); ++i)
            acc[0][i] = leak * acc[0][i] + inputs[t - 1][i];
        fwd.accum[0][t - 1] = acc[0];
        Vector below = inputs[t - 1];
        std::vector<Vector> step_spikes(n + 1);
        step_spikes[0] = below;
        for (std::size_t l = 1; l <= n; ++l) {
            const std::size_t w = spec.layer_sizes[l];
            Vector drive(w, 0.0);
            for (std::size_t i = 0; i < w; ++i) {
                double d = spec.biases[l - 1][i];
                for (std::size_t j = 0; j < step_spikes[l - 1].size(); ++j)
                    d += spec.weights[l - 1](i, j) * step_spikes[l - 1][j];
                drive[i] = d;
            }
            if (spec.connection && spec.connection->dst == l) {
                const Connection& c = *spec.connection;
                const Vector& src = (c.kind == ConnectionKind::Feedforward)
                                        ? step_spikes[c.src]
                                        : (t >= 2 ? fwd.spikes[c.src - 1][t - 2] : Vector(spec.layer_sizes[c.src], 0.0));
                for (std::size_t i = 0; i < w; ++i) {
                    double d = 0.0;
                    for (std::size_t j = 0; j < src.size(); ++j) d += c.weight(i, j) * src[j];
                    drive[i] += d;
                }
            }
            Vector spike(w, 0.0);
            for (std::size_t i = 0; i < w; ++i) {
                u[l - 1][i] = leak * (u[l - 1][i] - v_th * s_prev[l - 1][i]) + drive[i];
                spike[i] = (u[l - 1][i] >= v_th) ? 1.0 : 0.0;
                acc[l][i] = leak * acc[l][i] + spike[i];
            }
            s_prev[l - 1] = spike;
            step_spikes[l] = spike;
            fwd.potential[l - 1][t - 1] = u[l - 1];
            fwd.spikes[l - 1][t - 1] = spike;
            fwd.accum[l][t - 1] = acc[l];
        }
    }
    return fwd;
}

// Sensitivity of the loss w.r.t. the accumulation of `layer` at the
// evaluated step, by explicitly walking every same-step path up to the
// output layer. No memoization: the recursion is the path enumeration.
double oracle_sensitivity(std::size_t layer, std::size_t unit, const Vector& loss_grad,
                          const UnrolledForward& fwd, std::size_t t, const NetworkSpec& spec,
                          const SurrogateParams& sp) {
    const std::size_t n = spec.num_layers();
    if (layer == n) return loss_grad[unit];
    double total = 0.0;
    const Vector& u_above = fwd.potential[layer][t - 1];
    for (std::size_t k = 0; k < spec.layer_sizes[layer + 1]; ++k) {
        total += oracle_sensitivity(layer + 1, k, loss_grad, fwd, t, spec, sp) * sg(u_above[k], sp) *
                 spec.weights[layer](k, unit);
    }
    if (spec.connection && spec.connection->kind == ConnectionKind::Feedforward &&
        spec.connection->src == layer) {
        const Connection& c = *spec.connection;
        const Vector& u_dst = fwd.potential[c.dst - 1][t - 1];
        for (std::size_t k = 0; k < spec.layer_sizes[c.dst]; ++k) {
            total += oracle_sensitivity(c.dst, k, loss_grad, fwd, t, spec, sp) * sg(u_dst[k], sp) *
                     c.weight(k, unit);
        }
    }
    return total;
}

GradientSet oracle_step_gradient(const NetworkSpec& spec, const UnrolledForward& fwd,
                                 std::size_t t, const Vector& loss_grad, EngineKind engine) {
    SurrogateParams sp{spec.sg_beta, spec.params.v_th};
    const std::size_t n = spec.num_layers();
    GradientSet g = zero_gradients(spec, engine);
    g.time_index = t;
    for (std::size_t l = 0; l < n; ++l) {
        const Vector pre = fwd.accum_at(l, t, spec);
        const Vector& u_post = fwd.potential[l][t - 1];
        for (std::size_t i = 0; i < spec.layer_sizes[l + 1]; ++i) {
            double s = oracle_sensitivity(l + 1, i, loss_grad, fwd, t, spec, sp) * sg(u_post[i], sp);
            for (std::size_t j = 0; j < pre.size(); ++j) g.weight_grads[l](i, j) = s * pre[j];
            g.bias_grads[l][i] = s;
        }
    }
    if (spec.connection) {
        const Connection& c = *spec.connection;
        const Vector pre = (c.kind == ConnectionKind::Feedforward)
                               ? fwd.accum_at(c.src, t, spec)
                               : fwd.accum_at(c.src, t - 1, spec);
        const Vector& u_dst = fwd.potential[c.dst - 1][t - 1];
        for (std::size_t i = 0; i < spec.layer_sizes[c.dst]; ++i) {
            double s = oracle_sensitivity(c.dst, i, loss_grad, fwd, t, spec, sp) * sg(u_dst[i], sp);
            for (std::size_t j = 0; j < pre.size(); ++j) (*g.conn_grad)(i, j) = s * pre[j];
        }
    }
    return g;
}

}  // namespace

GradientSet unrolled_reference_grad(const NetworkSpec& spec,
                                    const std::vector<Vector>& input_sequence, std::size_t label,
                                    const LossSpec& loss_spec, EngineKind engine, std::size_t t) {
    validate(spec);
    if (spec.num_layers() > 3) throw std::invalid_argument("unrolled reference: too many layers");
    for (std::size_t s : spec.layer_sizes)
        if (s > 4) throw std::invalid_argument("unrolled reference: layer too wide");
    if (input_sequence.size() > 4) throw std::invalid_argument("unrolled reference: too many steps");
    if (input_sequence.empty()) throw std::invalid_argument("unrolled reference: empty input");

    const std::size_t steps = input_sequence.size();
    UnrolledForward fwd = simulate_for_oracle(spec, input_sequence);
    const std::size_t n = spec.num_layers();

    auto step_loss_grad = [&](std::size_t step) {
        return step_loss(fwd.spikes[n - 1][step - 1], label, loss_spec, steps).grad;
    };

    switch (engine) {
        case EngineKind::SafE:
        case EngineKind::OtttO: {
            if (t < 1 || t > steps) throw std::out_of_range("unrolled reference: t out of range");
            return oracle_step_gradient(spec, fwd, t, step_loss_grad(t), engine);
        }
        case EngineKind::OtttA: {
            GradientSet total = zero_gradients(spec, engine);
            for (std::size_t step = 1; step <= steps; ++step)
                total.add(oracle_step_gradient(spec, fwd, step, step_loss_grad(step), engine));
            total.time_index = steps;
            return total;
        }
        case EngineKind::SafF: {
            Vector grad = rate_loss(fwd.accum[n][steps - 1], label, loss_spec, spec.params.leak,
                                    steps)
                              .grad;
            return oracle_step_gradient(spec, fwd, steps, grad, engine);
        }
        case EngineKind::SpikeRep:
            throw std::invalid_argument("unrolled reference: rate-space engine not covered");
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------

void write_gradients_csv(const GradientSet& grads, const NetworkSpec& spec, std::ostream& os) {
    os << std::setprecision(17);
    os << "engine,layer,index,value\n";
    const std::string name = engine_name(grads.engine);
    for (std::size_t l = 0; l < grads.weight_grads.size(); ++l) {
        for (std::size_t i = 0; i < grads.weight_grads[l].data.size(); ++i)
            os << name << ",W" << l << ',' << i << ',' << grads.weight_grads[l].data[i] << '\n';
        for (std::size_t i = 0; i < grads.bias_grads[l].size(); ++i)
            os << name << ",b" << (l + 1) << ',' << i << ',' << grads.bias_grads[l][i] << '\n';
    }
    if (grads.conn_grad) {
        const char* label = "Wc";
        if (spec.connection)
            label = (spec.connection->kind == ConnectionKind::Feedforward) ? "Wf" : "Wb";
        for (std::size_t i = 0; i < grads.conn_grad->data.size(); ++i)
            os << name << ',' << label << ',' << i << ',' << grads.conn_grad->data[i] << '\n';
    }
}

double max_abs_diff(const GradientSet& a, const GradientSet& b) {
    Vector fa = a.flatten();
    Vector fb = b.flatten();
    if (fa.size() != fb.size()) throw std::invalid_argument("gradient shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) m = std::max(m, std::abs(fa[i] - fb[i]));
    return m;
}

double max_rel_diff(const GradientSet& a, const GradientSet& b) {
    Vector fa = a.flatten();
    Vector fb = b.flatten();
    if (fa.size() != fb.size()) throw std::invalid_argument("gradient shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        double denom = std::max(std::abs(fa[i]), std::abs(fb[i]));
        if (denom == 0.0) continue;
        m = std::max(m, std::abs(fa[i] - fb[i]) / denom);
    }
    return m;
}

}  // namespace saf
