#include "saf/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saf {

double sg(double u, const SurrogateParams& p) {
    // exp(z)/(1+exp(z))^2 is even in z; evaluate with the negative
    // exponent so large |u| underflows to 0 instead of overflowing.
    double z = -std::abs((p.v_th - u) / p.beta);
    double e = std::exp(z);
    double denom = 1.0 + e;
    return e / (p.beta * denom * denom);
}

Vector sg(const Vector& u, const SurrogateParams& p) {
    Vector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = sg(u[i], p);
    return out;
}

Vector softmax(const Vector& v) {
    double mx = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

namespace {

// Shared CE+MSE mixture on an arbitrary readout vector; grad w.r.t. that
// vector, both scaled by `scale`.
LossResult mixture_loss(const Vector& v, std::size_t label, const LossSpec& spec, double scale) {
    if (spec.num_classes != v.size())
        throw std::invalid_argument("loss: readout width does not match num_classes");
    if (label >= spec.num_classes) throw std::invalid_argument("loss: label out of range");
    if (spec.alpha < 0.0 || spec.alpha > 1.0)
        throw std::invalid_argument("loss: alpha must be in [0, 1]");

    const std::size_t c = v.size();
    Vector p = softmax(v);
    double ce = -std::log(std::max(p[label], 1e-300));

    double mse = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        double onehot = (i == label) ? 1.0 : 0.0;
        double d = v[i] - onehot;
        mse += d * d;
    }
    mse /= static_cast<double>(c);

    LossResult out;
    out.value = ((1.0 - spec.alpha) * ce + spec.alpha * mse) * scale;
    out.grad.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        double onehot = (i == label) ? 1.0 : 0.0;
        double g_ce = p[i] - onehot;
        double g_mse = 2.0 / static_cast<double>(c) * (v[i] - onehot);
        out.grad[i] = ((1.0 - spec.alpha) * g_ce + spec.alpha * g_mse) * scale;
    }
    return out;
}

}  // namespace

LossResult step_loss(const Vector& spikes, std::size_t label, const LossSpec& spec,
                     std::size_t num_steps) {
    if (num_steps == 0) throw std::invalid_argument("step_loss: num_steps must be positive");
    return mixture_loss(spikes, label, spec, 1.0 / static_cast<double>(num_steps));
}

LossResult rate_loss(const Vector& accum, std::size_t label, const LossSpec& spec,
                     double leak, std::size_t num_steps) {
    double denom = geometric_weight_sum(leak, num_steps);
    Vector rate(accum.size());
    for (std::size_t i = 0; i < accum.size(); ++i) rate[i] = accum[i] / denom;
    LossResult r = mixture_loss(rate, label, spec, 1.0);
    // Chain through a = accum / Lambda.
    for (double& g : r.grad) g /= denom;
    return r;
}

}  // namespace saf
