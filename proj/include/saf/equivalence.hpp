#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "saf/gradients.hpp"
#include "saf/network.hpp"

namespace saf {

enum class InputMode { Constant, RandomSpikes };

struct TrialConfig {
    std::uint64_t seed = 0;
    std::vector<std::size_t> layer_sizes;
    std::size_t num_steps = 16;
    double leak = 0.5;
    double v_th = 1.0;
    double sg_beta = 4.0;
    std::optional<ConnectionKind> connection;
    InputMode input_mode = InputMode::Constant;
    double margin_guard = 1e-9;
    double alpha = 0.05;  // loss mix

    std::string describe() const;
};

struct ComparisonReport {
    std::string tag;
    std::uint64_t seed = 0;
    double max_abs_diff = 0.0;
    double max_rel_diff = 0.0;
    double correlation = 1.0;
    bool correlation_defined = true;
    double mae = 0.0;
    std::size_t guard_trips = 0;
    std::size_t compared = 0;
    std::size_t resamples = 0;
    bool pass = false;
    bool inconclusive = false;
    double inner_product = 0.0;  // alignment-style checks
    std::string detail;          // replay info on failure
};

// Pearson correlation and mean absolute error over two flattened
// gradient vectors (by convention the input-layer weight block, matching
// how the similarity metric is reported).
struct SimilarityResult {
    double correlation = 0.0;
    bool defined = true;
    double mae = 0.0;
};
SimilarityResult gradient_similarity(const GradientSet& a, const GradientSet& b);
SimilarityResult vector_similarity(const Vector& a, const Vector& b);

// Spike trains of the two forward modes compared element-wise on steps
// whose membrane margin clears the guard; trips are counted, never
// silently dropped.
ComparisonReport check_forward_equivalence(const TrialConfig& cfg);

// Per-step engine identity across all t and all parameters (including a
// connection weight when configured); pass iff max rel diff <= 1e-10.
// Instances are resampled until margin-clean and firing above the 2%
// floor; the resample count is reported.
ComparisonReport check_step_gradient_identity(const TrialConfig& cfg);

// Final-step engine vs the rate-space engine in shared-derivative-factor
// mode: pass iff max rel diff of grad_saf_f vs v_th * grad_spike_rep
// <= 1e-10.
ComparisonReport check_rate_scale_identity(const TrialConfig& cfg);

// Feedback-connection trials: global inner product between the final-step
// engine's gradient and the implicit rate-space direction (dense solve of
// the fixed-point adjoint). Reports the sign; ill-conditioned solves are
// flagged inconclusive.
ComparisonReport check_feedback_alignment(const TrialConfig& cfg);

// The reference direction used by the check above: gradient of the rate
// loss through the layered fixed point, with the feedback read folded
// into the same-step Jacobian and the adjoint solved densely. Checker
// machinery, never a training engine. Returns false when the solve is
// ill-conditioned.
bool implicit_rate_direction(const ForwardTrace& trace, std::size_t label,
                             const NetworkSpec& spec, const LossSpec& loss_spec,
                             GradientSet& out);

struct SuiteResult {
    std::string name;
    std::vector<ComparisonReport> trials;
    std::size_t passed = 0;
    std::size_t failed = 0;
    std::size_t inconclusive = 0;
    bool required_pass = false;
};

struct SuiteOptions {
    std::uint64_t seed = 7;
    std::size_t trials = 200;
    int threads = 0;  // 0 = OpenMP default, 1 = serial reference
};

SuiteResult run_forward_suite(const SuiteOptions& opt);
SuiteResult run_step_identity_suite(const SuiteOptions& opt, std::optional<ConnectionKind> connection);
SuiteResult run_scale_identity_suite(const SuiteOptions& opt, double v_th, bool feedforward);
SuiteResult run_feedback_alignment_suite(const SuiteOptions& opt);

// Runs every required suite; returns false if any fails its bar.
bool run_all_suites(const SuiteOptions& opt, std::ostream& summary, std::ostream* csv);

void write_reports_csv(const SuiteResult& suite, std::ostream& os);

// Instance generation shared by the checkers: random network + inputs for
// the trial config, resampled until the forward pass fires at or above
// the 2% floor (and, when `require_margin_clean`, until no margin trips).
struct TrialInstance {
    NetworkSpec spec;
    std::vector<Vector> inputs;
    std::size_t label = 0;
    std::size_t resamples = 0;
};
TrialInstance make_trial_instance(const TrialConfig& cfg, bool require_margin_clean);

}  // namespace saf
