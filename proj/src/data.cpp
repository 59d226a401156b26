#include "saf/data.hpp"

#include "saf/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace saf {

namespace {

double parse_field(const std::string& tok, std::size_t line_no) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric field '" +
                                 tok + "'");
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::string normalized = line;
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::istringstream iss(normalized);
    std::vector<std::string> out;
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

Dataset parse_delimited(std::istream& is) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::set<std::size_t> labels_seen;
    while (std::getline(is, line)) {
        ++line_no;
        std::vector<std::string> fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() < 2)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": need at least one feature and a label");
        Sample s;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            double v = parse_field(fields[i], line_no);
            if (!std::isfinite(v))
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": non-finite feature");
            s.features.push_back(v);
        }
        double raw_label = parse_field(fields.back(), line_no);
        if (raw_label < 0 || raw_label != std::floor(raw_label))
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": label must be a non-negative integer");
        s.label = static_cast<std::size_t>(raw_label);
        if (ds.samples.empty()) {
            ds.feature_dim = s.features.size();
        } else if (s.features.size() != ds.feature_dim) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": inconsistent feature count");
        }
        labels_seen.insert(s.label);
        ds.samples.push_back(std::move(s));
    }
    ds.num_classes = labels_seen.empty() ? 0 : (*labels_seen.rbegin() + 1);
    return ds;
}

}  // namespace

void standardize(Dataset& ds) {
    const std::size_t d = ds.feature_dim;
    const std::size_t n = ds.size();
    ds.normalization.shift.assign(d, 0.0);
    ds.normalization.scale.assign(d, 1.0);
    ds.normalization.constant_column.assign(d, false);
    if (n == 0) return;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const Sample& s : ds.samples) mean += s.features[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const Sample& s : ds.samples) {
            double dd = s.features[j] - mean;
            var += dd * dd;
        }
        var /= static_cast<double>(n);
        double sd = std::sqrt(var);
        ds.normalization.shift[j] = mean;
        if (sd == 0.0) {
            ds.normalization.scale[j] = 1.0;
            ds.normalization.constant_column[j] = true;
        } else {
            ds.normalization.scale[j] = sd;
        }
    }
    for (Sample& s : ds.samples)
        for (std::size_t j = 0; j < d; ++j)
            s.features[j] = (s.features[j] - ds.normalization.shift[j]) / ds.normalization.scale[j];
}

Dataset load_delimited_raw(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return parse_delimited(is);
}

Dataset load_delimited(const std::string& path) {
    Dataset ds = load_delimited_raw(path);
    standardize(ds);
    return ds;
}

void write_delimited(const Dataset& dataset, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    char buf[64];
    for (const Sample& s : dataset.samples) {
        for (double v : s.features) {
            auto res = std::to_chars(buf, buf + sizeof(buf), v);
            os.write(buf, res.ptr - buf);
            os << ',';
        }
        os << s.label << '\n';
    }
}

Vector apply_normalization(const Vector& raw, const NormRecord& record) {
    if (raw.size() != record.shift.size())
        throw std::invalid_argument("apply_normalization: width mismatch");
    Vector out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j)
        out[j] = (raw[j] - record.shift[j]) / record.scale[j];
    return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open '" + images_path + "'");
    if (read_be32(img, "image magic") != kImageMagic)
        throw std::runtime_error("idx: bad image magic in '" + images_path + "'");
    std::uint32_t count = read_be32(img, "image count");
    std::uint32_t rows = read_be32(img, "image rows");
    std::uint32_t cols = read_be32(img, "image cols");

    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw std::runtime_error("cannot open '" + labels_path + "'");
    if (read_be32(lbl, "label magic") != kLabelMagic)
        throw std::runtime_error("idx: bad label magic in '" + labels_path + "'");
    std::uint32_t label_count = read_be32(lbl, "label count");
    if (count != label_count) throw std::runtime_error("idx: image/label count mismatch");

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Dataset ds;
    ds.feature_dim = pixels;
    std::vector<unsigned char> raw(pixels);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
            throw std::runtime_error("idx: truncated image data");
        unsigned char lab = 0;
        if (!lbl.read(reinterpret_cast<char*>(&lab), 1))
            throw std::runtime_error("idx: truncated label data");
        Sample s;
        s.features.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) s.features[p] = raw[p] / 255.0;
        s.label = lab;
        max_label = std::max(max_label, s.label);
        ds.samples.push_back(std::move(s));
    }
    ds.num_classes = ds.samples.empty() ? 0 : max_label + 1;
    ds.normalization.shift.assign(pixels, 0.0);
    ds.normalization.scale.assign(pixels, 1.0);
    ds.normalization.constant_column.assign(pixels, false);
    return ds;
}

void write_idx(const std::vector<Vector>& images, const std::vector<std::uint8_t>& labels,
               std::size_t rows, std::size_t cols, const std::string& images_path,
               const std::string& labels_path) {
    if (images.size() != labels.size())
        throw std::invalid_argument("write_idx: image/label count mismatch");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open '" + images_path + "' for writing");
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<std::uint32_t>(images.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    for (const Vector& v : images) {
        if (v.size() != rows * cols) throw std::invalid_argument("write_idx: image size mismatch");
        for (double x : v) {
            double clamped = std::min(1.0, std::max(0.0, x));
            unsigned char b = static_cast<unsigned char>(std::lround(clamped * 255.0));
            img.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw std::runtime_error("cannot open '" + labels_path + "' for writing");
    write_be32(lbl, kLabelMagic);
    write_be32(lbl, static_cast<std::uint32_t>(labels.size()));
    for (std::uint8_t l : labels) lbl.write(reinterpret_cast<const char*>(&l), 1);
}

// ---------------------------------------------------------------------------
// Synthetic data

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_two_moons: need n >= 2");
    Rng rng(seed);
    Dataset ds;
    ds.feature_dim = 2;
    ds.num_classes = 2;
    const std::size_t n0 = n - n / 2;  // class 0 gets the extra point for odd n
    const std::size_t n1 = n / 2;
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n0; ++i) {
        double theta = (n0 == 1) ? 0.0 : pi * static_cast<double>(i) / static_cast<double>(n0 - 1);
        Sample s;
        s.features = {std::cos(theta), std::sin(theta)};
        s.label = 0;
        ds.samples.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < n1; ++i) {
        double theta = (n1 == 1) ? 0.0 : pi * static_cast<double>(i) / static_cast<double>(n1 - 1);
        Sample s;
        s.features = {1.0 - std::cos(theta), 0.5 - std::sin(theta)};
        s.label = 1;
        ds.samples.push_back(std::move(s));
    }
    if (noise > 0.0)
        for (Sample& s : ds.samples)
            for (double& x : s.features) x += noise * rng.gaussian();
    ds.normalization.shift.assign(2, 0.0);
    ds.normalization.scale.assign(2, 1.0);
    ds.normalization.constant_column.assign(2, false);
    return ds;
}

// ---------------------------------------------------------------------------
// Experiment configuration

ExperimentConfig default_preset() {
    return ExperimentConfig{};  // defaults carry the preset values
}

namespace {

const char* kValidKeys =
    "hidden_sizes, leak, v_th, sg_beta, connection, engine, epochs, batch_size, lr, momentum, "
    "alpha, num_steps, seed, accumulate, freeze_within_sequence, encoding, threads, dataset, "
    "test_dataset, moons_n, moons_noise, checkpoint_out, metrics_out";

void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&](const std::string& v) {
        double d = 0.0;
        auto res = std::from_chars(v.data(), v.data() + v.size(), d);
        if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
            throw std::runtime_error("config: unparsable value '" + v + "' for key '" + key + "'");
        return d;
    };
    auto as_size = [&](const std::string& v) {
        return static_cast<std::size_t>(as_double(v));
    };
    auto as_bool = [&](const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::runtime_error("config: unparsable bool '" + v + "' for key '" + key + "'");
    };

    if (key == "hidden_sizes") {
        cfg.hidden_sizes.clear();
        std::string norm = value;
        std::replace(norm.begin(), norm.end(), ',', ' ');
        std::istringstream iss(norm);
        std::size_t w;
        while (iss >> w) cfg.hidden_sizes.push_back(w);
    } else if (key == "leak") {
        cfg.leak = as_double(value);
    } else if (key == "v_th") {
        cfg.v_th = as_double(value);
    } else if (key == "sg_beta") {
        cfg.sg_beta = as_double(value);
    } else if (key == "connection") {
        if (value != "none" && value != "feedforward" && value != "feedback")
            throw std::runtime_error("config: connection must be none|feedforward|feedback");
        cfg.connection = value;
    } else if (key == "engine") {
        if (value != "saf-e" && value != "saf-f" && value != "ottt-o" && value != "ottt-a")
            throw std::runtime_error("config: unknown engine '" + value +
                                     "' (valid: saf-e, saf-f, ottt-o, ottt-a)");
        cfg.engine = value;
    } else if (key == "epochs") {
        cfg.epochs = as_size(value);
    } else if (key == "batch_size") {
        cfg.batch_size = as_size(value);
    } else if (key == "lr") {
        cfg.lr = as_double(value);
    } else if (key == "momentum") {
        cfg.momentum = as_double(value);
    } else if (key == "alpha") {
        cfg.alpha = as_double(value);
    } else if (key == "num_steps") {
        cfg.num_steps = as_size(value);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(as_double(value));
    } else if (key == "accumulate") {
        cfg.accumulate = as_bool(value);
    } else if (key == "freeze_within_sequence") {
        cfg.freeze_within_sequence = as_bool(value);
    } else if (key == "encoding") {
        if (value == "constant")
            cfg.encoding = InputEncoding::ConstantCurrent;
        else if (value == "spike-encode")
            cfg.encoding = InputEncoding::SpikeBernoulli;
        else
            throw std::runtime_error("config: encoding must be constant|spike-encode");
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(as_double(value));
    } else if (key == "dataset") {
        cfg.dataset = value;
    } else if (key == "test_dataset") {
        cfg.test_dataset = value;
    } else if (key == "moons_n") {
        cfg.moons_n = as_size(value);
    } else if (key == "moons_noise") {
        cfg.moons_noise = as_double(value);
    } else if (key == "checkpoint_out") {
        cfg.checkpoint_out = value;
    } else if (key == "metrics_out") {
        cfg.metrics_out = value;
    } else {
        throw std::runtime_error("config: unknown key '" + key + "' (valid keys: " + kValidKeys +
                                 ")");
    }
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config_text(std::istream& is,
                                   const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg = default_preset();
    std::string line;
    while (std::getline(is, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: missing '=' in: " + t);
        apply_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    for (const auto& [key, value] : overrides) apply_kv(cfg, key, value);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (path.empty()) {
        std::istringstream empty;
        return parse_config_text(empty, overrides);
    }
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_config_text(is, overrides);
}

Dataset load_configured_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.empty())
        throw std::runtime_error("no dataset configured (set dataset=two-moons or a file path)");
    if (cfg.dataset == "two-moons") {
        Dataset ds = make_two_moons(cfg.moons_n, cfg.moons_noise, cfg.seed);
        standardize(ds);
        return ds;
    }
    return load_delimited(cfg.dataset);
}

std::vector<Vector> encode_input(const Vector& features, std::size_t num_steps,
                                 InputEncoding encoding, std::uint64_t seed) {
    if (encoding == InputEncoding::ConstantCurrent) return constant_input(features, num_steps);
    Rng rng(seed);
    std::vector<Vector> seq(num_steps, Vector(features.size(), 0.0));
    for (Vector& frame : seq)
        for (std::size_t i = 0; i < features.size(); ++i) {
            double p = std::min(1.0, std::max(0.0, features[i]));
            frame[i] = (rng.uniform() < p) ? 1.0 : 0.0;
        }
    return seq;
}

}  // namespace saf
