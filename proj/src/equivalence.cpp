#include "saf/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "saf/parallel.hpp"

namespace saf {

std::string TrialConfig::describe() const {
    std::ostringstream os;
    os << "seed=" << seed << " layers=";
    for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
        if (i) os << 'x';
        os << layer_sizes[i];
    }
    os << " T=" << num_steps << " leak=" << leak << " v_th=" << v_th << " beta=" << sg_beta;
    os << " conn=";
    if (!connection)
        os << "none";
    else
        os << (*connection == ConnectionKind::Feedforward ? "feedforward" : "feedback");
    os << " input=" << (input_mode == InputMode::Constant ? "constant" : "spikes");
    return os.str();
}

namespace {

constexpr double kIdentityTol = 1e-10;
constexpr double kFiringFloor = 0.02;

NetworkSpec build_network(const TrialConfig& cfg, Rng& rng) {
    NeuronParams params{cfg.leak, cfg.v_th};
    NetworkSpec spec = make_random_network(cfg.layer_sizes, params, cfg.sg_beta, rng);
    if (cfg.connection) {
        std::size_t n = spec.num_layers();
        if (*cfg.connection == ConnectionKind::Feedforward) {
            if (n < 2) throw std::invalid_argument("feedforward trial needs >= 2 layers");
            attach_random_connection(spec, ConnectionKind::Feedforward, 1, n, rng);
        } else {
            attach_random_connection(spec, ConnectionKind::Feedback, n, 1, rng);
        }
    }
    // The dynamics are scale covariant: multiplying weights, biases and
    // inputs by v_th reproduces the v_th = 1 spike pattern at any
    // threshold, which keeps the firing floor reachable in the sweep.
    if (cfg.v_th != 1.0) {
        for (Matrix& w : spec.weights)
            for (double& x : w.data) x *= cfg.v_th;
        for (Vector& b : spec.biases)
            for (double& x : b) x *= cfg.v_th;
        if (spec.connection)
            for (double& x : spec.connection->weight.data) x *= cfg.v_th;
    }
    return spec;
}

std::vector<Vector> build_inputs(const TrialConfig& cfg, Rng& rng) {
    const std::size_t dim = cfg.layer_sizes.front();
    if (cfg.input_mode == InputMode::Constant) {
        Vector x(dim);
        for (double& v : x) v = rng.uniform() * cfg.v_th;
        return constant_input(x, cfg.num_steps);
    }
    std::vector<Vector> seq(cfg.num_steps, Vector(dim, 0.0));
    for (Vector& x : seq)
        for (double& v : x) v = (rng.uniform() < 0.5) ? cfg.v_th : 0.0;
    return seq;
}

double firing_rate_of(const ForwardTrace& trace) {
    double spikes = 0.0;
    double slots = 0.0;
    for (std::size_t t = 1; t <= trace.num_steps(); ++t) {
        for (std::size_t l = 1; l <= trace.num_layers(); ++l) {
            Vector s = trace.spikes(l, t);
            for (double v : s) spikes += v;
            slots += static_cast<double>(s.size());
        }
    }
    return slots > 0.0 ? spikes / slots : 0.0;
}

}  // namespace

TrialInstance make_trial_instance(const TrialConfig& cfg, bool require_margin_clean) {
    constexpr std::size_t kMaxAttempts = 200;
    Rng base(cfg.seed);
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng = base.split(attempt);
        TrialInstance inst;
        inst.spec = build_network(cfg, rng);
        inst.inputs = build_inputs(cfg, rng);
        inst.label = static_cast<std::size_t>(rng.uniform_int(inst.spec.output_dim()));
        inst.resamples = attempt;

        ForwardTrace lif = forward_lif(inst.spec, inst.inputs);
        if (firing_rate_of(lif) < kFiringFloor) continue;
        if (require_margin_clean) {
            ForwardTrace safm = forward_saf(inst.spec, inst.inputs);
            if (lif.min_margin() < cfg.margin_guard || safm.min_margin() < cfg.margin_guard)
                continue;
        }
        return inst;
    }
    throw std::runtime_error("trial instance generation exhausted resampling budget: " +
                             cfg.describe());
}

SimilarityResult vector_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("similarity: size mismatch");
    SimilarityResult r;
    const std::size_t n = a.size();
    if (n == 0) {
        r.defined = false;
        return r;
    }
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0, abs_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = a[i] - mean_a;
        double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
        abs_err += std::abs(a[i] - b[i]);
    }
    r.mae = abs_err / static_cast<double>(n);
    if (var_a == 0.0 || var_b == 0.0) {
        r.defined = false;
        return r;
    }
    r.correlation = cov / std::sqrt(var_a * var_b);
    return r;
}

SimilarityResult gradient_similarity(const GradientSet& a, const GradientSet& b) {
    if (a.weight_grads.empty() || b.weight_grads.empty())
        throw std::invalid_argument("similarity: empty gradient set");
    Vector fa(a.weight_grads[0].data.begin(), a.weight_grads[0].data.end());
    Vector fb(b.weight_grads[0].data.begin(), b.weight_grads[0].data.end());
    return vector_similarity(fa, fb);
}

// ---------------------------------------------------------------------------
// Checkers

ComparisonReport check_forward_equivalence(const TrialConfig& cfg) {
    ComparisonReport report;
    report.tag = "forward";
    report.seed = cfg.seed;

    TrialInstance inst = make_trial_instance(cfg, /*require_margin_clean=*/false);
    report.resamples = inst.resamples;
    ForwardTrace lif = forward_lif(inst.spec, inst.inputs);
    ForwardTrace safm = forward_saf(inst.spec, inst.inputs);

    bool ok = true;
    for (std::size_t t = 1; t <= lif.num_steps(); ++t) {
        for (std::size_t l = 1; l <= lif.num_layers(); ++l) {
            Vector u_lif = lif.potential(l, t);
            Vector u_saf = safm.potential(l, t);
            Vector s_lif = lif.spikes(l, t);
            Vector s_saf = safm.spikes(l, t);
            for (std::size_t i = 0; i < u_lif.size(); ++i) {
                double margin = std::min(std::abs(u_lif[i] - cfg.v_th),
                                         std::abs(u_saf[i] - cfg.v_th));
                if (margin < cfg.margin_guard) {
                    ++report.guard_trips;
                    continue;
                }
                ++report.compared;
                if (s_lif[i] != s_saf[i]) ok = false;
            }
        }
    }
    report.pass = ok;
    if (!ok) report.detail = "spike mismatch on guarded trial: " + cfg.describe();
    return report;
}

ComparisonReport check_step_gradient_identity(const TrialConfig& cfg) {
    ComparisonReport report;
    report.tag = "step-identity";
    report.seed = cfg.seed;

    TrialInstance inst = make_trial_instance(cfg, /*require_margin_clean=*/true);
    report.resamples = inst.resamples;
    ForwardTrace lif = forward_lif(inst.spec, inst.inputs);
    ForwardTrace safm = forward_saf(inst.spec, inst.inputs);
    LossSpec loss{cfg.alpha, inst.spec.output_dim()};

    double corr_min = 1.0;
    for (std::size_t t = 1; t <= safm.num_steps(); ++t) {
        GradientSet gs = grad_saf_e(safm, t, inst.label, inst.spec, loss);
        GradientSet go = grad_ottt_o(lif, t, inst.label, inst.spec, loss);
        report.max_abs_diff = std::max(report.max_abs_diff, max_abs_diff(gs, go));
        report.max_rel_diff = std::max(report.max_rel_diff, max_rel_diff(gs, go));
        SimilarityResult sim = gradient_similarity(gs, go);
        if (sim.defined) corr_min = std::min(corr_min, sim.correlation);
        report.mae = std::max(report.mae, sim.mae);
        report.compared += gs.flatten().size();
    }
    report.correlation = corr_min;
    report.pass = report.max_rel_diff <= kIdentityTol;
    if (!report.pass) report.detail = "replay: " + cfg.describe();
    return report;
}

ComparisonReport check_rate_scale_identity(const TrialConfig& cfg) {
    ComparisonReport report;
    report.tag = "scale-identity";
    report.seed = cfg.seed;

    TrialInstance inst = make_trial_instance(cfg, /*require_margin_clean=*/true);
    report.resamples = inst.resamples;
    ForwardTrace trace = forward_saf(inst.spec, inst.inputs);
    LossSpec loss{cfg.alpha, inst.spec.output_dim()};

    GradientSet gf = grad_saf_f(trace, inst.label, inst.spec, loss, FactorMode::ClampShared);
    GradientSet gr = grad_spike_representation(trace, inst.label, inst.spec, loss);
    gr.scale_by(inst.spec.params.v_th);

    report.max_abs_diff = max_abs_diff(gf, gr);
    report.max_rel_diff = max_rel_diff(gf, gr);
    SimilarityResult sim = gradient_similarity(gf, gr);
    report.correlation = sim.correlation;
    report.correlation_defined = sim.defined;
    report.mae = sim.mae;
    report.compared = gf.flatten().size();
    report.pass = report.max_rel_diff <= kIdentityTol;
    if (!report.pass) report.detail = "replay: " + cfg.describe();
    return report;
}

// ---------------------------------------------------------------------------
// Feedback alignment: implicit rate-space direction

namespace {

// Gaussian elimination with partial pivoting; false if a pivot is
// negligible relative to the matrix scale.
bool solve_dense(Matrix m, Vector rhs, Vector& out) {
    const std::size_t n = m.rows;
    double scale = 0.0;
    for (double x : m.data) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
        if (std::abs(m(pivot, col)) < 1e-12 * scale) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(m(pivot, c), m(col, c));
            std::swap(rhs[pivot], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = m(r, col) / m(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) m(r, c) -= f * m(col, c);
            rhs[r] -= f * rhs[col];
        }
    }
    out.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = rhs[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= m(ri, c) * out[c];
        out[ri] = acc / m(ri, ri);
    }
    return true;
}

double norm_of(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

// Gradient of the rate loss through the layered fixed point
// a^{l+1} = clamp((W^l a^l + b + [connection]) / v_th), with the
// feedback read folded into the same-step Jacobian (the equilibrium
// premise). Solves the adjoint system against (I - J)^T.
bool implicit_rate_direction(const ForwardTrace& trace, std::size_t label,
                             const NetworkSpec& spec, const LossSpec& loss_spec,
                             GradientSet& out) {
    const std::size_t n = spec.num_layers();
    const std::size_t steps = trace.num_steps();
    const double v_th = spec.params.v_th;
    const double denom = geometric_weight_sum(spec.params.leak, steps);

    std::vector<Vector> rate(n + 1);
    for (std::size_t l = 0; l <= n; ++l) rate[l] = scale(trace.accum(l, steps), 1.0 / denom);

    // Per-layer clamp derivatives at the same pre-activations the
    // rate-space engine uses.
    std::vector<Vector> d = clamp_factors(trace, spec);

    // Stacked state holds the rates of layers 1..N; offset[l] is the
    // start of layer l's block.
    std::vector<std::size_t> offset(n + 1, 0);
    std::size_t dim = 0;
    for (std::size_t l = 1; l <= n; ++l) {
        offset[l] = dim;
        dim += spec.layer_sizes[l];
    }

    // J[row_block l][col_block m] = d(f_l)/d(a^m).
    Matrix system(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) system(i, i) = 1.0;
    auto subtract_block = [&](std::size_t dst_layer, std::size_t src_layer, const Matrix& w) {
        for (std::size_t i = 0; i < spec.layer_sizes[dst_layer]; ++i) {
            double di = d[dst_layer - 1][i] / v_th;
            for (std::size_t j = 0; j < spec.layer_sizes[src_layer]; ++j)
                system(offset[dst_layer] + i, offset[src_layer] + j) -= di * w(i, j);
        }
    };
    for (std::size_t l = 2; l <= n; ++l) subtract_block(l, l - 1, spec.weights[l - 1]);
    if (spec.connection) subtract_block(spec.connection->dst, spec.connection->src,
                                        spec.connection->weight);

    // Loss gradient w.r.t. a^N: rate_loss returns the accumulation-space
    // gradient, which differs by the 1/denom chain factor.
    Vector top = rate_loss(trace.accum(n, steps), label, loss_spec, spec.params.leak, steps).grad;
    for (double& g : top) g *= denom;
    Vector rhs(dim, 0.0);
    for (std::size_t i = 0; i < spec.layer_sizes[n]; ++i) rhs[offset[n] + i] = top[i];

    // Adjoint solve: (I - J)^T g = e.
    Matrix transposed(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) transposed(i, j) = system(j, i);
    Vector adj;
    if (!solve_dense(transposed, rhs, adj)) return false;

    out = zero_gradients(spec, EngineKind::SpikeRep);
    for (std::size_t l = 1; l <= n; ++l) {
        for (std::size_t i = 0; i < spec.layer_sizes[l]; ++i) {
            double s = adj[offset[l] + i] * d[l - 1][i] / v_th;
            for (std::size_t j = 0; j < spec.layer_sizes[l - 1]; ++j)
                out.weight_grads[l - 1](i, j) = s * rate[l - 1][j];
            out.bias_grads[l - 1][i] = s;
        }
    }
    if (spec.connection) {
        const Connection& c = *spec.connection;
        Vector src_rate;
        if (c.kind == ConnectionKind::Feedforward) {
            src_rate = rate[c.src];
        } else {
            double denom_prev = geometric_weight_sum(spec.params.leak, steps - 1);
            src_rate = scale(trace.accum_prev(c.src, steps), 1.0 / denom_prev);
        }
        for (std::size_t i = 0; i < spec.layer_sizes[c.dst]; ++i) {
            double s = adj[offset[c.dst] + i] * d[c.dst - 1][i] / v_th;
            for (std::size_t j = 0; j < src_rate.size(); ++j)
                (*out.conn_grad)(i, j) = s * src_rate[j];
        }
    }
    return true;
}

ComparisonReport check_feedback_alignment(const TrialConfig& cfg) {
    ComparisonReport report;
    report.tag = "feedback-alignment";
    report.seed = cfg.seed;

    TrialInstance inst = make_trial_instance(cfg, /*require_margin_clean=*/false);
    report.resamples = inst.resamples;
    ForwardTrace trace = forward_saf(inst.spec, inst.inputs);
    LossSpec loss{cfg.alpha, inst.spec.output_dim()};

    GradientSet g_saf = grad_saf_f(trace, inst.label, inst.spec, loss, FactorMode::Surrogate);
    GradientSet g_imp;
    if (!implicit_rate_direction(trace, inst.label, inst.spec, loss, g_imp)) {
        report.inconclusive = true;
        report.detail = "ill-conditioned adjoint solve: " + cfg.describe();
        return report;
    }

    Vector fa = g_saf.flatten();
    Vector fb = g_imp.flatten();
    if (norm_of(fa) == 0.0 || norm_of(fb) == 0.0) {
        report.inconclusive = true;
        report.detail = "vacuous (zero gradient): " + cfg.describe();
        return report;
    }
    report.inner_product = dot(fa, fb);
    SimilarityResult sim = vector_similarity(fa, fb);
    report.correlation = sim.correlation;
    report.correlation_defined = sim.defined;
    report.mae = sim.mae;
    report.compared = fa.size();
    report.pass = report.inner_product > 0.0;
    if (!report.pass) report.detail = "negative inner product: " + cfg.describe();
    return report;
}

// ---------------------------------------------------------------------------
// Suites

namespace {

TrialConfig suite_trial_config(std::uint64_t suite_seed, std::size_t index, std::size_t max_width,
                               std::size_t min_layers, std::size_t max_layers) {
    Rng rng = Rng(suite_seed).split(index);
    TrialConfig cfg;
    cfg.seed = rng.next_u64();
    std::size_t layers = min_layers + rng.uniform_int(max_layers - min_layers + 1);
    cfg.layer_sizes.push_back(2 + rng.uniform_int(7));  // input dim 2..8
    for (std::size_t l = 1; l < layers; ++l)
        cfg.layer_sizes.push_back(2 + rng.uniform_int(max_width - 1));
    cfg.layer_sizes.push_back(2 + rng.uniform_int(7));  // output dim 2..8
    cfg.leak = (rng.uniform() < 0.5) ? 1.0 : 0.5;
    return cfg;
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& opt,
                      ComparisonReport (*checker)(const TrialConfig&),
                      const std::function<TrialConfig(std::size_t)>& make_cfg) {
    SuiteResult suite;
    suite.name = name;
    suite.trials.resize(opt.trials);
    parallel_for(opt.trials, opt.threads, [&](std::size_t i) {
        // A drawn architecture can be unable to meet the firing floor at
        // any weight draw (deep mostly-silent stacks); redraw it
        // deterministically before giving the trial up as inconclusive.
        for (std::size_t redraw = 0;; ++redraw) {
            TrialConfig cfg = make_cfg(i + redraw * 9973591);
            try {
                suite.trials[i] = checker(cfg);
                break;
            } catch (const std::exception& e) {
                if (redraw == 4) {
                    suite.trials[i].tag = name;
                    suite.trials[i].seed = cfg.seed;
                    suite.trials[i].inconclusive = true;
                    suite.trials[i].detail = e.what();
                    break;
                }
            }
        }
    });
    for (const ComparisonReport& r : suite.trials) {
        if (r.inconclusive)
            ++suite.inconclusive;
        else if (r.pass)
            ++suite.passed;
        else
            ++suite.failed;
    }
    return suite;
}

}  // namespace

SuiteResult run_forward_suite(const SuiteOptions& opt) {
    SuiteResult suite = run_suite(
        "forward-equivalence", opt, check_forward_equivalence, [&](std::size_t i) {
            TrialConfig cfg = suite_trial_config(opt.seed, i, 64, 2, 5);
            Rng rng = Rng(opt.seed).split(1000000 + i);
            cfg.num_steps = 4 + rng.uniform_int(29);  // T in 4..32
            cfg.input_mode = (rng.uniform() < 0.5) ? InputMode::Constant : InputMode::RandomSpikes;
            return cfg;
        });
    // Guard-trip rate over all comparisons must stay under 0.5%.
    std::size_t trips = 0, compared = 0;
    for (const ComparisonReport& r : suite.trials) {
        trips += r.guard_trips;
        compared += r.compared + r.guard_trips;
    }
    double trip_rate = compared ? static_cast<double>(trips) / static_cast<double>(compared) : 0.0;
    suite.required_pass = (suite.failed == 0) && (trip_rate < 0.005);
    return suite;
}

SuiteResult run_step_identity_suite(const SuiteOptions& opt, std::optional<ConnectionKind> connection) {
    std::string name = "step-identity-";
    if (!connection)
        name += "none";
    else
        name += (*connection == ConnectionKind::Feedforward) ? "feedforward" : "feedback";
    SuiteResult suite = run_suite(name, opt, check_step_gradient_identity, [&](std::size_t i) {
        TrialConfig cfg = suite_trial_config(opt.seed, i, 32, 2, 4);
        Rng rng = Rng(opt.seed).split(2000000 + i);
        cfg.num_steps = 4 + rng.uniform_int(13);  // T in 4..16
        cfg.connection = connection;
        cfg.input_mode = (rng.uniform() < 0.5) ? InputMode::Constant : InputMode::RandomSpikes;
        return cfg;
    });
    suite.required_pass = (suite.failed == 0);
    return suite;
}

SuiteResult run_scale_identity_suite(const SuiteOptions& opt, double v_th, bool feedforward) {
    std::ostringstream name;
    name << "scale-identity-vth" << v_th << (feedforward ? "-feedforward" : "-none");
    SuiteResult suite = run_suite(name.str(), opt, check_rate_scale_identity, [&](std::size_t i) {
        TrialConfig cfg = suite_trial_config(opt.seed, i, 32, 2, 4);
        cfg.num_steps = 32;
        cfg.v_th = v_th;
        cfg.input_mode = InputMode::Constant;
        if (feedforward) cfg.connection = ConnectionKind::Feedforward;
        return cfg;
    });
    suite.required_pass = (suite.failed == 0);
    return suite;
}

SuiteResult run_feedback_alignment_suite(const SuiteOptions& opt) {
    SuiteResult suite = run_suite("feedback-alignment", opt, check_feedback_alignment, [&](std::size_t i) {
        TrialConfig cfg = suite_trial_config(opt.seed, i, 16, 2, 4);
        cfg.num_steps = 64;
        cfg.connection = ConnectionKind::Feedback;
        cfg.input_mode = InputMode::Constant;
        return cfg;
    });
    std::size_t conclusive = suite.passed + suite.failed;
    double positive_rate =
        conclusive ? static_cast<double>(suite.passed) / static_cast<double>(conclusive) : 0.0;
    suite.required_pass = conclusive > 0 && positive_rate >= 0.95;
    return suite;
}

void write_reports_csv(const SuiteResult& suite, std::ostream& os) {
    for (const ComparisonReport& r : suite.trials) {
        os << suite.name << ',' << r.seed << ',' << r.max_abs_diff << ',' << r.max_rel_diff << ','
           << (r.correlation_defined ? std::to_string(r.correlation) : std::string("undefined"))
           << ',' << r.mae << ',' << r.guard_trips << ',' << r.resamples << ','
           << r.inner_product << ',' << (r.inconclusive ? "inconclusive" : (r.pass ? "pass" : "fail"))
           << '\n';
    }
}

bool run_all_suites(const SuiteOptions& opt, std::ostream& summary, std::ostream* csv) {
    bool all_pass = true;
    if (csv) *csv << "suite,seed,max_abs,max_rel,correlation,mae,guard_trips,resamples,inner_product,status\n";
    auto emit = [&](const SuiteResult& suite) {
        summary << (suite.required_pass ? "[PASS] " : "[FAIL] ") << suite.name << ": "
                << suite.passed << " passed, " << suite.failed << " failed, "
                << suite.inconclusive << " inconclusive over " << suite.trials.size()
                << " trials\n";
        for (const ComparisonReport& r : suite.trials)
            if (!r.pass && !r.inconclusive && !r.detail.empty()) summary << "    " << r.detail << '\n';
        if (csv) write_reports_csv(suite, *csv);
        all_pass = all_pass && suite.required_pass;
    };
    emit(run_forward_suite(opt));
    emit(run_step_identity_suite(opt, std::nullopt));
    emit(run_step_identity_suite(opt, ConnectionKind::Feedforward));
    emit(run_step_identity_suite(opt, ConnectionKind::Feedback));
    SuiteOptions quarter = opt;
    quarter.trials = std::max<std::size_t>(1, opt.trials / 4);
    emit(run_scale_identity_suite(quarter, 1.0, false));
    emit(run_scale_identity_suite(quarter, 1.0, true));
    emit(run_scale_identity_suite(quarter, 2.0, false));
    emit(run_scale_identity_suite(quarter, 2.0, true));
    emit(run_feedback_alignment_suite(opt));
    return all_pass;
}

}  // namespace saf
