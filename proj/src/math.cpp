#include "saf/math.hpp"

#include <cmath>
#include <stdexcept>

namespace saf {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) throw std::invalid_argument("matvec: dimension mismatch");
    Vector out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        const double* row = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) throw std::invalid_argument("matvec_transposed: dimension mismatch");
    Vector out(m.cols, 0.0);
    for (std::size_t j = 0; j < m.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) acc += m.data[i * m.cols + j] * v[i];
        out[j] = acc;
    }
    return out;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

double geometric_weight_sum(double lambda, std::size_t t) {
    double acc = 0.0;
    double power = 1.0;
    for (std::size_t k = 0; k <= t; ++k) {
        acc += power;
        power *= lambda;
    }
    return acc;
}

Vector add(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector sub(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hadamard: dimension mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

Vector scale(const Vector& a, double s) {
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

void add_in_place(Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add_in_place: dimension mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void add_scaled_in_place(Vector& a, const Vector& b, double s) {
    if (a.size() != b.size()) throw std::invalid_argument("add_scaled_in_place: dimension mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i] * s;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// PCG-XSH-RR 64/32, two 32-bit outputs combined per 64-bit draw. The
// generator is fully pinned here so streams never depend on the standard
// library's engine or distribution details.
namespace {
constexpr std::uint64_t kPcgMult = 6364136223846793005ULL;

std::uint32_t pcg32(std::uint64_t& state, std::uint64_t inc) {
    std::uint64_t old = state;
    state = old * kPcgMult + inc;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}
}  // namespace

Rng::Rng(std::uint64_t seed) : state_(0), inc_((seed << 1u) | 1u) {
    pcg32(state_, inc_);
    state_ += seed;
    pcg32(state_, inc_);
}

std::uint64_t Rng::next_u64() {
    std::uint64_t hi = pcg32(state_, inc_);
    std::uint64_t lo = pcg32(state_, inc_);
    return (hi << 32) | lo;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    // Rejection sampling for an unbiased draw.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream) const {
    // Mix the base increment with the stream id; seeds the child from a
    // hash so sibling streams do not overlap in practice.
    std::uint64_t mixed = inc_ ^ (stream * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
    mixed ^= mixed >> 33;
    mixed *= 0xFF51AFD7ED558CCDULL;
    mixed ^= mixed >> 33;
    return Rng(mixed);
}

}  // namespace saf
