#pragma once

#include <cstddef>

#include "saf/math.hpp"

namespace saf {

struct SurrogateParams {
    double beta = 4.0;  // temperature of the sigmoid-derivative surrogate
    double v_th = 1.0;
};

// Sigmoid-derivative surrogate for the spike nonlinearity, evaluated at
// the effective membrane potential (for accumulation state this is
// pot_accum - v_th*leak*accum_prev, so both neuron models see the same
// argument). Peak value 1/(4*beta) at u = v_th; even in (u - v_th).
double sg(double u, const SurrogateParams& p);
Vector sg(const Vector& u, const SurrogateParams& p);

struct LossSpec {
    double alpha = 0.05;  // MSE mixing weight in [0, 1]
    std::size_t num_classes = 0;
};

struct LossResult {
    double value = 0.0;
    Vector grad;  // w.r.t. the function's direct argument
};

// Per-step loss on the output spike vector:
//   [(1-alpha)*CE(softmax(s), y) + alpha*MSE(s, onehot(y))] / T
// grad is taken w.r.t. s.
LossResult step_loss(const Vector& spikes, std::size_t label, const LossSpec& spec,
                     std::size_t num_steps);

// Final-step loss on the weighted firing rate a = accum / Lambda where
// Lambda = sum_{tau=0}^{T} leak^{T-tau}:
//   (1-alpha)*CE(softmax(a), y) + alpha*MSE(a, onehot(y))
// grad is taken w.r.t. accum (includes the 1/Lambda factor).
LossResult rate_loss(const Vector& accum, std::size_t label, const LossSpec& spec,
                     double leak, std::size_t num_steps);

// Numerically stable softmax (max subtraction before exponentiation).
Vector softmax(const Vector& v);

}  // namespace saf
