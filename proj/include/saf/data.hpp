#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "saf/math.hpp"

namespace saf {

struct Sample {
    Vector features;
    std::size_t label = 0;
};

struct NormRecord {
    Vector shift;  // per-feature mean removed at load time
    Vector scale;  // per-feature std divided out (1 for constant columns)
    std::vector<bool> constant_column;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    NormRecord normalization;

    std::size_t size() const { return samples.size(); }
};

// Comma- or whitespace-separated text, one sample per line, label last.
// Features are normalized to zero mean / unit variance per column;
// constant columns get scale 1 and are flagged in the record. Errors
// carry the offending line number.
Dataset load_delimited(const std::string& path);
// Same parse without normalization (used to rebuild raw features).
Dataset load_delimited_raw(const std::string& path);
void write_delimited(const Dataset& dataset, const std::string& path);

// Applies an existing normalization record (training-time statistics) to
// raw features, entry for entry.
Vector apply_normalization(const Vector& raw, const NormRecord& record);

// Zero-mean unit-variance per feature, recording the statistics in the
// dataset (what load_delimited does after parsing).
void standardize(Dataset& dataset);

// Standard IDX pair (big-endian; magic 0x00000803 for images, 0x00000801
// for labels). Pixels are scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const std::vector<Vector>& images, const std::vector<std::uint8_t>& labels,
               std::size_t rows, std::size_t cols, const std::string& images_path,
               const std::string& labels_path);

// Two interleaved half-circles with Gaussian noise; binary labels,
// |#0 - #1| <= 1, deterministic per seed.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

enum class InputEncoding { ConstantCurrent, SpikeBernoulli };

struct ExperimentConfig {
    // network
    std::vector<std::size_t> hidden_sizes{32, 32};
    double leak = 0.5;
    double v_th = 1.0;
    double sg_beta = 4.0;
    std::string connection = "none";  // none | feedforward | feedback
    // training
    std::string engine = "saf-e";
    std::size_t epochs = 300;
    std::size_t batch_size = 128;
    double lr = 0.1;
    double momentum = 0.9;
    double alpha = 0.05;
    std::size_t num_steps = 6;
    std::uint64_t seed = 1;
    bool accumulate = false;
    bool freeze_within_sequence = false;
    InputEncoding encoding = InputEncoding::ConstantCurrent;
    int threads = 1;
    // data
    std::string dataset;       // path to delimited file, or "two-moons"
    std::string test_dataset;  // optional held-out split, same forms
    std::size_t moons_n = 200;
    double moons_noise = 0.1;
    // io
    std::string checkpoint_out;
    std::string metrics_out;
};

// The named preset backing unspecified fields: leak 0.5, v_th 1, beta 4,
// alpha 0.05, lr 0.1, momentum 0.9, batch 128, epochs 300, T 6.
ExperimentConfig default_preset();

// key = value lines with '#' comments; unknown keys are an error listing
// the valid set. Overrides are applied on top (CLI flags beat the file).
ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides);
ExperimentConfig parse_config_text(std::istream& is,
                                   const std::vector<std::pair<std::string, std::string>>& overrides);

// Loads cfg.dataset (two-moons or delimited file).
Dataset load_configured_dataset(const ExperimentConfig& cfg);

// Per-sample input sequence under the configured encoding. Bernoulli
// encoding draws spikes with probability equal to the (clamped to [0,1])
// feature value, deterministically from the given seed.
std::vector<Vector> encode_input(const Vector& features, std::size_t num_steps,
                                 InputEncoding encoding, std::uint64_t seed);

}  // namespace saf
