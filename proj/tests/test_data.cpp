#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "saf/data.hpp"

using namespace saf;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/saf_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("delimited loader parses and normalizes") {
    TempFile f("basic.csv");
    {
        std::ofstream os(f.path);
        os << "1.0, 2.0, 0\n";
        os << "3.0  4.0  1\n";  // whitespace-separated works too
        os << "5.0, 6.0, 1\n";
    }
    Dataset ds = load_delimited(f.path);
    CHECK(ds.size() == 3);
    CHECK(ds.feature_dim == 2);
    CHECK(ds.num_classes == 2);
    // Normalized columns have zero mean.
    double mean0 = 0.0;
    for (const Sample& s : ds.samples) mean0 += s.features[0];
    CHECK(std::abs(mean0) < 1e-12);
    CHECK(ds.normalization.shift[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("constant feature column gets unit scale and a flag") {
    TempFile f("constant.csv");
    {
        std::ofstream os(f.path);
        os << "7.0, 1.0, 0\n7.0, 2.0, 1\n7.0, 3.0, 0\n";
    }
    Dataset ds = load_delimited(f.path);
    CHECK(ds.normalization.constant_column[0]);
    CHECK_FALSE(ds.normalization.constant_column[1]);
    CHECK(ds.normalization.scale[0] == 1.0);
    for (const Sample& s : ds.samples) CHECK(s.features[0] == 0.0);
}

TEST_CASE("delimited round trip preserves raw values") {
    TempFile f("roundtrip.csv");
    Dataset ds;
    ds.feature_dim = 3;
    ds.num_classes = 2;
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        Sample s;
        s.features = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        s.label = rng.uniform_int(2);
        ds.samples.push_back(s);
    }
    write_delimited(ds, f.path);
    Dataset back = load_delimited_raw(f.path);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.samples[i].label == ds.samples[i].label);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(back.samples[i].features[j] - ds.samples[i].features[j]) < 1e-12);
    }
}

TEST_CASE("delimited loader reports the offending line") {
    TempFile f("bad.csv");
    {
        std::ofstream os(f.path);
        os << "1.0, 2.0, 0\n";
        os << "1.0, oops, 1\n";
    }
    try {
        load_delimited(f.path);
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("normalization replays bit-identically") {
    TempFile f("replay.csv");
    {
        std::ofstream os(f.path);
        os << "1.5, -2.0, 0\n0.5, 3.0, 1\n2.5, 1.0, 0\n";
    }
    Dataset normalized = load_delimited(f.path);
    Dataset raw = load_delimited_raw(f.path);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Vector replayed = apply_normalization(raw.samples[i].features, normalized.normalization);
        CHECK(replayed == normalized.samples[i].features);
    }
}

TEST_CASE("idx writer/loader round trip") {
    TempFile img("fixture.idx3");
    TempFile lbl("fixture.idx1");
    std::vector<Vector> images(2, Vector(16, 0.0));
    for (std::size_t p = 0; p < 16; ++p) images[0][p] = p / 15.0;
    images[1][5] = 1.0;
    write_idx(images, {3, 11}, 4, 4, img.path, lbl.path);

    Dataset ds = load_idx(img.path, lbl.path);
    CHECK(ds.size() == 2);
    CHECK(ds.feature_dim == 16);
    CHECK(ds.samples[0].label == 3);
    CHECK(ds.samples[1].label == 11);  // labels beyond 9 are fine
    CHECK(ds.num_classes == 12);
    CHECK(ds.samples[1].features[5] == 1.0);
    for (std::size_t p = 0; p < 16; ++p)
        CHECK(std::abs(ds.samples[0].features[p] - images[0][p]) < 1.0 / 255.0 + 1e-12);
}

TEST_CASE("idx loader accepts an empty pair and rejects corruption") {
    TempFile img("empty.idx3");
    TempFile lbl("empty.idx1");
    write_idx({}, {}, 4, 4, img.path, lbl.path);
    Dataset empty = load_idx(img.path, lbl.path);
    CHECK(empty.size() == 0);

    // Magic mismatch: feed the label file as images.
    CHECK_THROWS(load_idx(lbl.path, img.path));

    // Count mismatch.
    TempFile img2("two.idx3");
    TempFile lbl1("one.idx1");
    write_idx({Vector(16, 0.5), Vector(16, 0.1)}, {0, 1}, 4, 4, img2.path, "/tmp/saf_test_lbl2");
    write_idx({Vector(16, 0.5)}, {0}, 4, 4, "/tmp/saf_test_img1", lbl1.path);
    CHECK_THROWS(load_idx(img2.path, lbl1.path));
    std::remove("/tmp/saf_test_lbl2");
    std::remove("/tmp/saf_test_img1");

    // Truncated image payload.
    TempFile trunc("trunc.idx3");
    {
        std::ofstream os(trunc.path, std::ios::binary);
        unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 4, 0, 0, 0, 4};
        os.write(reinterpret_cast<char*>(header), 16);
        os << "abc";  // 3 bytes instead of 16
    }
    TempFile lbl3("trunc.idx1");
    write_idx({Vector(16, 0.0)}, {0}, 4, 4, "/tmp/saf_test_img_scratch", lbl3.path);
    CHECK_THROWS(load_idx(trunc.path, lbl3.path));
    std::remove("/tmp/saf_test_img_scratch");
}

TEST_CASE("two moons geometry, determinism, balance") {
    Dataset clean = make_two_moons(40, 0.0, 7);
    std::size_t zeros = 0;
    for (const Sample& s : clean.samples) {
        if (s.label == 0) {
            ++zeros;
            double r = std::hypot(s.features[0], s.features[1]);
            CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(s.features[1] >= -1e-12);
        } else {
            double r = std::hypot(s.features[0] - 1.0, s.features[1] - 0.5);
            CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(zeros == 20);

    Dataset odd = make_two_moons(41, 0.1, 9);
    std::size_t c0 = 0, c1 = 0;
    for (const Sample& s : odd.samples) (s.label == 0 ? c0 : c1)++;
    CHECK((c0 > c1 ? c0 - c1 : c1 - c0) <= 1);

    Dataset a = make_two_moons(100, 0.1, 123);
    Dataset b = make_two_moons(100, 0.1, 123);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].features == b.samples[i].features);

    CHECK_THROWS_AS(make_two_moons(1, 0.0, 1), std::invalid_argument);
}

TEST_CASE("config preset carries the published defaults") {
    std::istringstream empty;
    ExperimentConfig cfg = parse_config_text(empty, {});
    CHECK(cfg.leak == 0.5);
    CHECK(cfg.v_th == 1.0);
    CHECK(cfg.sg_beta == 4.0);
    CHECK(cfg.alpha == 0.05);
    CHECK(cfg.momentum == 0.9);
    CHECK(cfg.lr == 0.1);
    CHECK(cfg.batch_size == 128);
    CHECK(cfg.epochs == 300);
    CHECK(cfg.num_steps == 6);
}

TEST_CASE("config file parsing with overrides") {
    std::istringstream file("# comment\nlr = 0.1\nengine = saf-f\nhidden_sizes = 16,8\n");
    ExperimentConfig cfg = parse_config_text(file, {{"lr", "0.01"}});
    CHECK(cfg.lr == 0.01);  // the override wins
    CHECK(cfg.engine == "saf-f");
    CHECK(cfg.hidden_sizes == std::vector<std::size_t>{16, 8});

    std::istringstream bogus_engine("engine = bogus\n");
    try {
        parse_config_text(bogus_engine, {});
        FAIL("expected an engine error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("saf-e") != std::string::npos);
    }

    std::istringstream unknown("not_a_key = 3\n");
    CHECK_THROWS(parse_config_text(unknown, {}));
}

TEST_CASE("input encodings") {
    Vector features{0.25, 0.75};
    std::vector<Vector> constant = encode_input(features, 4, InputEncoding::ConstantCurrent, 1);
    CHECK(constant.size() == 4);
    for (const Vector& frame : constant) CHECK(frame == features);

    std::vector<Vector> spikes_a = encode_input(features, 50, InputEncoding::SpikeBernoulli, 5);
    std::vector<Vector> spikes_b = encode_input(features, 50, InputEncoding::SpikeBernoulli, 5);
    CHECK(spikes_a == spikes_b);
    double ones = 0.0;
    for (const Vector& frame : spikes_a)
        for (double v : frame) {
            CHECK((v == 0.0 || v == 1.0));
            ones += v;
        }
    CHECK(ones > 0);
    CHECK(ones < 100);
}
