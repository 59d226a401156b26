#include "saf/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace saf {

void validate(const NetworkSpec& spec) {
    validate(spec.params);
    if (spec.layer_sizes.size() < 2)
        throw std::invalid_argument("network: need at least input and one layer");
    for (std::size_t s : spec.layer_sizes)
        if (s == 0) throw std::invalid_argument("network: zero-width layer");
    const std::size_t n = spec.num_layers();
    if (spec.weights.size() != n || spec.biases.size() != n)
        throw std::invalid_argument("network: weight/bias count mismatch");
    for (std::size_t l = 0; l < n; ++l) {
        if (spec.weights[l].rows != spec.layer_sizes[l + 1] ||
            spec.weights[l].cols != spec.layer_sizes[l])
            throw std::invalid_argument("network: weight shape mismatch");
        if (spec.biases[l].size() != spec.layer_sizes[l + 1])
            throw std::invalid_argument("network: bias shape mismatch");
    }
    if (spec.connection) {
        const Connection& c = *spec.connection;
        if (c.src < 1 || c.src > n || c.dst < 1 || c.dst > n)
            throw std::invalid_argument("network: connection layer out of range");
        if (c.kind == ConnectionKind::Feedforward && c.dst <= c.src)
            throw std::invalid_argument("network: feedforward connection requires dst > src");
        if (c.kind == ConnectionKind::Feedback && c.dst > c.src)
            throw std::invalid_argument("network: feedback connection requires dst <= src");
        if (c.weight.rows != spec.layer_sizes[c.dst] || c.weight.cols != spec.layer_sizes[c.src])
            throw std::invalid_argument("network: connection weight shape mismatch");
    }
    if (!spec.norm_shift.empty() && spec.norm_shift.size() != spec.input_dim())
        throw std::invalid_argument("network: normalization record width mismatch");
    if (spec.norm_shift.size() != spec.norm_scale.size())
        throw std::invalid_argument("network: normalization record incomplete");
}

// ---------------------------------------------------------------------------
// ForwardTrace

ForwardTrace::ForwardTrace(TraceMode mode, const NetworkSpec& spec, std::size_t num_steps)
    : mode_(mode),
      num_steps_(num_steps),
      num_layers_(spec.num_layers()),
      params_(spec.params) {
    zero_input_.assign(spec.input_dim(), 0.0);
    zeros_.resize(num_layers_ + 1);
    zeros_[0] = zero_input_;
    for (std::size_t l = 1; l <= num_layers_; ++l)
        zeros_[l].assign(spec.layer_sizes[l], 0.0);
    accum_.assign(num_layers_ + 1, std::vector<Vector>(num_steps));
    if (mode == TraceMode::Saf)
        accum_prev_.assign(num_layers_ + 1, std::vector<Vector>(num_steps));
    potential_.assign(num_layers_, std::vector<Vector>(num_steps));
}

const Vector& ForwardTrace::accum(std::size_t layer, std::size_t t) const {
    if (layer > num_layers_ || t > num_steps_) throw std::out_of_range("trace: accum index");
    if (t == 0) return zeros_[layer];
    return accum_[layer][t - 1];
}

const Vector& ForwardTrace::accum_prev(std::size_t layer, std::size_t t) const {
    if (layer > num_layers_ || t == 0 || t > num_steps_)
        throw std::out_of_range("trace: accum_prev index");
    if (mode_ == TraceMode::Saf) return accum_prev_[layer][t - 1];
    return accum(layer, t - 1);
}

Vector ForwardTrace::potential(std::size_t layer, std::size_t t) const {
    if (layer < 1 || layer > num_layers_ || t < 1 || t > num_steps_)
        throw std::out_of_range("trace: potential index");
    const Vector& stored = potential_[layer - 1][t - 1];
    if (mode_ == TraceMode::Lif) return stored;
    // Membrane view of the accumulation state.
    const Vector& prev = accum_prev(layer, t);
    Vector u(stored.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = stored[i] - params_.v_th * params_.leak * prev[i];
    return u;
}

Vector ForwardTrace::spikes(std::size_t layer, std::size_t t) const {
    if (layer < 1 || layer > num_layers_ || t < 1 || t > num_steps_)
        throw std::out_of_range("trace: spike index");
    if (mode_ == TraceMode::Lif) {
        const Vector& u = potential_[layer - 1][t - 1];
        Vector s(u.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            s[i] = (u[i] >= params_.v_th) ? 1.0 : 0.0;
        return s;
    }
    const Vector& a = accum_[layer][t - 1];
    const Vector& prev = accum_prev_[layer][t - 1];
    Vector s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double raw = a[i] - params_.leak * prev[i];
        s[i] = (raw > 0.5) ? 1.0 : 0.0;
    }
    return s;
}

double ForwardTrace::min_margin(std::size_t t) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l <= num_layers_; ++l) {
        Vector u = potential(l, t);
        for (double x : u) m = std::min(m, std::abs(x - params_.v_th));
    }
    return m;
}

double ForwardTrace::min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t <= num_steps_; ++t) m = std::min(m, min_margin(t));
    return m;
}

std::size_t ForwardTrace::stored_vector_count() const {
    std::size_t per_step = (mode_ == TraceMode::Lif) ? 2 : 3;
    return per_step * num_layers_ * num_steps_;
}

void ForwardTrace::record_lif(std::size_t layer, std::size_t t, const Vector& u,
                              const Vector& accum) {
    potential_[layer - 1][t - 1] = u;
    accum_[layer][t - 1] = accum;
}

void ForwardTrace::record_saf(std::size_t layer, std::size_t t, const Vector& accum,
                              const Vector& accum_prev, const Vector& pot_accum) {
    accum_[layer][t - 1] = accum;
    accum_prev_[layer][t - 1] = accum_prev;
    potential_[layer - 1][t - 1] = pot_accum;
}

void ForwardTrace::record_input_accum(std::size_t t, const Vector& accum,
                                      const Vector& accum_prev) {
    accum_[0][t - 1] = accum;
    if (mode_ == TraceMode::Saf) accum_prev_[0][t - 1] = accum_prev;
}

// ---------------------------------------------------------------------------
// Forward runners

namespace {

void check_inputs(const NetworkSpec& spec, const std::vector<Vector>& inputs) {
    validate(spec);
    if (inputs.empty()) throw std::invalid_argument("forward: empty input sequence");
    for (const Vector& x : inputs)
        if (x.size() != spec.input_dim())
            throw std::invalid_argument("forward: input width mismatch");
}

}  // namespace

OnlineLifNet::OnlineLifNet(const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    accum.resize(n + 1);
    accum_prev.resize(n + 1);
    accum[0].assign(spec.input_dim(), 0.0);
    accum_prev[0].assign(spec.input_dim(), 0.0);
    for (std::size_t l = 1; l <= n; ++l) {
        layers.emplace_back(spec.layer_sizes[l]);
        accum[l].assign(spec.layer_sizes[l], 0.0);
        accum_prev[l].assign(spec.layer_sizes[l], 0.0);
    }
}

const Vector& OnlineLifNet::step(const NetworkSpec& spec, const Vector& x) {
    const std::size_t n = spec.num_layers();
    const double leak = spec.params.leak;
    accum_prev[0] = accum[0];
    for (std::size_t i = 0; i < x.size(); ++i) accum[0][i] = leak * accum_prev[0][i] + x[i];

    const Vector* below = &x;
    for (std::size_t l = 1; l <= n; ++l) {
        Vector drive = matvec(spec.weights[l - 1], *below);
        add_in_place(drive, spec.biases[l - 1]);
        if (spec.connection && spec.connection->dst == l) {
            const Connection& c = *spec.connection;
            // Feedforward sources (src < dst) have already fired this step;
            // feedback sources still hold the previous step's spikes.
            add_in_place(drive, matvec(c.weight, layers[c.src - 1].last_spikes));
        }
        lif_step(layers[l - 1], drive, spec.params);
        const Vector& spikes = layers[l - 1].last_spikes;
        accum_prev[l] = accum[l];
        for (std::size_t i = 0; i < spikes.size(); ++i)
            accum[l][i] = leak * accum_prev[l][i] + spikes[i];
        below = &spikes;
    }
    ++step_count;
    return layers[n - 1].last_spikes;
}

OnlineSafNet::OnlineSafNet(const NetworkSpec& spec) {
    const std::size_t n = spec.num_layers();
    input_accum.assign(spec.input_dim(), 0.0);
    input_accum_prev.assign(spec.input_dim(), 0.0);
    for (std::size_t l = 1; l <= n; ++l) layers.emplace_back(spec.layer_sizes[l]);
}

const Vector& OnlineSafNet::step(const NetworkSpec& spec, const Vector& x) {
    const std::size_t n = spec.num_layers();
    const double leak = spec.params.leak;
    input_accum_prev = input_accum;
    for (std::size_t i = 0; i < x.size(); ++i)
        input_accum[i] = leak * input_accum_prev[i] + x[i];

    for (std::size_t l = 1; l <= n; ++l) {
        // Increment form of the drive: W*(accum_in[t] - leak*accum_in[t-1]) + b.
        const Vector& in_now = (l == 1) ? input_accum : layers[l - 2].accum;
        const Vector& in_prev = (l == 1) ? input_accum_prev : layers[l - 2].accum_prev;
        Vector delta(in_now.size());
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = in_now[i] - leak * in_prev[i];
        Vector drive = matvec(spec.weights[l - 1], delta);
        add_in_place(drive, spec.biases[l - 1]);
        if (spec.connection && spec.connection->dst == l) {
            const Connection& c = *spec.connection;
            // Feedforward sources (src < dst) were already updated this
            // step, so their state contributes accum[t] - leak*accum[t-1];
            // feedback sources still hold accum[t-1] - leak*accum[t-2].
            const SafState& src = layers[c.src - 1];
            Vector conn_delta(spec.layer_sizes[c.src]);
            for (std::size_t i = 0; i < conn_delta.size(); ++i)
                conn_delta[i] = src.accum[i] - leak * src.accum_prev[i];
            add_in_place(drive, matvec(c.weight, conn_delta));
        }
        saf_step(layers[l - 1], drive, spec.params);
    }
    ++step_count;
    return layers[n - 1].accum;
}

ForwardTrace forward_lif(const NetworkSpec& spec, const std::vector<Vector>& input_sequence) {
    check_inputs(spec, input_sequence);
    const std::size_t steps = input_sequence.size();
    ForwardTrace trace(TraceMode::Lif, spec, steps);
    OnlineLifNet net(spec);
    for (std::size_t t = 1; t <= steps; ++t) {
        net.step(spec, input_sequence[t - 1]);
        trace.record_input_accum(t, net.accum[0], {});
        for (std::size_t l = 1; l <= spec.num_layers(); ++l)
            trace.record_lif(l, t, net.layers[l - 1].potential, net.accum[l]);
    }
    return trace;
}

ForwardTrace forward_saf(const NetworkSpec& spec, const std::vector<Vector>& input_sequence) {
    check_inputs(spec, input_sequence);
    const std::size_t steps = input_sequence.size();
    ForwardTrace trace(TraceMode::Saf, spec, steps);
    OnlineSafNet net(spec);
    for (std::size_t t = 1; t <= steps; ++t) {
        net.step(spec, input_sequence[t - 1]);
        trace.record_input_accum(t, net.input_accum, net.input_accum_prev);
        for (std::size_t l = 1; l <= spec.num_layers(); ++l)
            trace.record_saf(l, t, net.layers[l - 1].accum, net.layers[l - 1].accum_prev,
                             net.layers[l - 1].pot_accum);
    }
    return trace;
}

StreamResult run_lif_streaming(const NetworkSpec& spec, const std::vector<Vector>& input_sequence) {
    check_inputs(spec, input_sequence);
    const std::size_t n = spec.num_layers();
    OnlineLifNet net(spec);
    StreamResult result;
    result.layer_spike_sums.assign(n, 0.0);
    result.peak_state_vectors = 2 * n;  // (potential, last_spikes) per layer
    for (const Vector& x : input_sequence) {
        net.step(spec, x);
        for (std::size_t l = 1; l <= n; ++l)
            for (double s : net.layers[l - 1].last_spikes) result.layer_spike_sums[l - 1] += s;
    }
    result.output_accum = net.accum[n];
    return result;
}

StreamResult run_saf_streaming(const NetworkSpec& spec, const std::vector<Vector>& input_sequence) {
    check_inputs(spec, input_sequence);
    const std::size_t n = spec.num_layers();
    OnlineSafNet net(spec);
    StreamResult result;
    result.layer_spike_sums.assign(n, 0.0);
    result.peak_state_vectors = SafState::kVectorsPerLayer * n;
    const double leak = spec.params.leak;
    for (const Vector& x : input_sequence) {
        net.step(spec, x);
        for (std::size_t l = 1; l <= n; ++l) {
            const SafState& st = net.layers[l - 1];
            for (std::size_t i = 0; i < st.accum.size(); ++i) {
                double raw = st.accum[i] - leak * st.accum_prev[i];
                result.layer_spike_sums[l - 1] += (raw > 0.5) ? 1.0 : 0.0;
            }
        }
    }
    result.output_accum = net.layers[n - 1].accum;
    return result;
}

std::size_t StateBufferReport::total() const {
    std::size_t sum = 0;
    for (std::size_t c : per_layer) sum += c;
    return sum;
}

StateBufferReport count_state_buffers(const NetworkSpec& spec, TraceMode mode) {
    StateBufferReport report;
    const std::size_t per =
        (mode == TraceMode::Saf) ? SafState::kVectorsPerLayer : 2;  // (u, s_prev)
    report.per_layer.assign(spec.num_layers(), per);
    return report;
}

std::size_t traced_vector_count(const NetworkSpec& spec, TraceMode mode, std::size_t num_steps) {
    std::size_t per_step = (mode == TraceMode::Lif) ? 2 : 3;
    return per_step * spec.num_layers() * num_steps;
}

// ---------------------------------------------------------------------------
// Construction helpers

NetworkSpec make_random_network(const std::vector<std::size_t>& layer_sizes,
                                const NeuronParams& params, double sg_beta, Rng& rng) {
    NetworkSpec spec;
    spec.layer_sizes = layer_sizes;
    spec.params = params;
    spec.sg_beta = sg_beta;
    const std::size_t n = spec.num_layers();
    for (std::size_t l = 0; l < n; ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes[l]));
        Matrix w(layer_sizes[l + 1], layer_sizes[l]);
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        spec.weights.push_back(std::move(w));
        Vector b(layer_sizes[l + 1]);
        for (double& x : b) x = rng.uniform(0.0, 0.3);
        spec.biases.push_back(std::move(b));
    }
    validate(spec);
    return spec;
}

void attach_random_connection(NetworkSpec& spec, ConnectionKind kind, std::size_t src,
                              std::size_t dst, Rng& rng) {
    Connection c;
    c.kind = kind;
    c.src = src;
    c.dst = dst;
    double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[src]));
    c.weight = Matrix(spec.layer_sizes[dst], spec.layer_sizes[src]);
    for (double& x : c.weight.data) x = rng.uniform(-bound, bound);
    spec.connection = c;
    validate(spec);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("network file: bad number '" + s + "'");
    return v;
}

std::string join_values(const Vector& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v[i]);
    }
    return out;
}

Vector parse_values(const std::string& s) {
    Vector out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(parse_double(tok));
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void save_network(const NetworkSpec& spec, std::ostream& os) {
    validate(spec);
    os << "layer_sizes = ";
    for (std::size_t i = 0; i < spec.layer_sizes.size(); ++i) {
        if (i) os << ',';
        os << spec.layer_sizes[i];
    }
    os << '\n';
    os << "leak = " << format_double(spec.params.leak) << '\n';
    os << "v_th = " << format_double(spec.params.v_th) << '\n';
    os << "sg_beta = " << format_double(spec.sg_beta) << '\n';
    if (spec.connection) {
        const Connection& c = *spec.connection;
        os << "connection = "
           << (c.kind == ConnectionKind::Feedforward ? "feedforward" : "feedback") << '\n';
        os << "conn_src = " << c.src << '\n';
        os << "conn_dst = " << c.dst << '\n';
    } else {
        os << "connection = none\n";
    }
    if (!spec.norm_shift.empty()) {
        os << "norm_shift = " << join_values(spec.norm_shift) << '\n';
        os << "norm_scale = " << join_values(spec.norm_scale) << '\n';
    }
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        Vector flat(spec.weights[l].data.begin(), spec.weights[l].data.end());
        os << "W" << l << " = " << join_values(flat) << '\n';
        os << "b" << (l + 1) << " = " << join_values(spec.biases[l]) << '\n';
    }
    if (spec.connection)
        os << "Wc = "
           << join_values(Vector(spec.connection->weight.data.begin(),
                                 spec.connection->weight.data.end()))
           << '\n';
}

void save_network(const NetworkSpec& spec, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_network(spec, os);
}

NetworkSpec load_network(std::istream& is) {
    NetworkSpec spec;
    std::string line;
    std::string conn_kind = "none";
    std::size_t conn_src = 0, conn_dst = 0;
    Vector conn_flat;
    std::vector<std::pair<std::string, std::string>> entries;
    while (std::getline(is, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw std::runtime_error("network file: missing '=' in: " + t);
        entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    for (const auto& [key, value] : entries) {
        if (key == "layer_sizes") {
            std::istringstream iss(value);
            std::string tok;
            while (std::getline(iss, tok, ','))
                spec.layer_sizes.push_back(static_cast<std::size_t>(std::stoull(trim(tok))));
        } else if (key == "leak") {
            spec.params.leak = parse_double(value);
        } else if (key == "v_th") {
            spec.params.v_th = parse_double(value);
        } else if (key == "sg_beta") {
            spec.sg_beta = parse_double(value);
        } else if (key == "connection") {
            conn_kind = value;
        } else if (key == "conn_src") {
            conn_src = std::stoull(value);
        } else if (key == "conn_dst") {
            conn_dst = std::stoull(value);
        } else if (key == "norm_shift") {
            spec.norm_shift = parse_values(value);
        } else if (key == "norm_scale") {
            spec.norm_scale = parse_values(value);
        } else if (key == "Wc") {
            conn_flat = parse_values(value);
        } else if (key.size() >= 2 && key[0] == 'W') {
            std::size_t l = std::stoull(key.substr(1));
            if (spec.weights.size() <= l) spec.weights.resize(l + 1);
            Vector flat = parse_values(value);
            if (spec.layer_sizes.size() <= l + 1)
                throw std::runtime_error("network file: weights before layer_sizes");
            Matrix m(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
            if (flat.size() != m.data.size())
                throw std::runtime_error("network file: weight entry count mismatch");
            m.data.assign(flat.begin(), flat.end());
            spec.weights[l] = std::move(m);
        } else if (key.size() >= 2 && key[0] == 'b') {
            std::size_t l = std::stoull(key.substr(1));
            if (l == 0) throw std::runtime_error("network file: bias index must be >= 1");
            if (spec.biases.size() < l) spec.biases.resize(l);
            spec.biases[l - 1] = parse_values(value);
        } else {
            throw std::runtime_error("network file: unknown key '" + key + "'");
        }
    }
    if (conn_kind != "none") {
        Connection c;
        if (conn_kind == "feedforward")
            c.kind = ConnectionKind::Feedforward;
        else if (conn_kind == "feedback")
            c.kind = ConnectionKind::Feedback;
        else
            throw std::runtime_error("network file: unknown connection kind '" + conn_kind + "'");
        c.src = conn_src;
        c.dst = conn_dst;
        if (c.src < 1 || c.src >= spec.layer_sizes.size() || c.dst < 1 ||
            c.dst >= spec.layer_sizes.size())
            throw std::runtime_error("network file: connection layer out of range");
        c.weight = Matrix(spec.layer_sizes[c.dst], spec.layer_sizes[c.src]);
        if (conn_flat.size() != c.weight.data.size())
            throw std::runtime_error("network file: connection weight entry count mismatch");
        c.weight.data.assign(conn_flat.begin(), conn_flat.end());
        spec.connection = std::move(c);
    }
    validate(spec);
    return spec;
}

NetworkSpec load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return load_network(is);
}

std::vector<Vector> constant_input(const Vector& features, std::size_t num_steps) {
    return std::vector<Vector>(num_steps, features);
}

Vector flatten_parameters(const NetworkSpec& spec) {
    Vector out;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        out.insert(out.end(), spec.weights[l].data.begin(), spec.weights[l].data.end());
        out.insert(out.end(), spec.biases[l].begin(), spec.biases[l].end());
    }
    if (spec.connection)
        out.insert(out.end(), spec.connection->weight.data.begin(),
                   spec.connection->weight.data.end());
    return out;
}

}  // namespace saf
