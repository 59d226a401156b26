#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace saf {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit floats. All library arithmetic is
// plain loops with a fixed left-to-right summation order so that two
// engines evaluating the same formula produce bitwise-equal results.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n);
};

// out[i] = sum_j m[i,j] * v[j], summed left-to-right over j.
Vector matvec(const Matrix& m, const Vector& v);

// out[j] = sum_i m[i,j] * v[i], summed left-to-right over i (i.e. m^T v).
Vector matvec_transposed(const Matrix& m, const Vector& v);

// out[i,j] = u[i] * v[j].
Matrix outer(const Vector& u, const Vector& v);

// sum_{tau=0}^{t} lambda^{t-tau}, by direct summation (not the closed
// form) so every consumer sees the same rounding sequence.
double geometric_weight_sum(double lambda, std::size_t t);

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double s);
void add_in_place(Vector& a, const Vector& b);
void add_scaled_in_place(Vector& a, const Vector& b, double s);
double dot(const Vector& a, const Vector& b);

// Counter-based deterministic RNG: identical seed => identical stream,
// independent of the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller.
    double gaussian();
    // Derive an independent stream for sub-tasks (trial i of a suite).
    Rng split(std::uint64_t stream) const;

  private:
    std::uint64_t state_;
    std::uint64_t inc_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace saf
