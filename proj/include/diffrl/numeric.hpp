#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffrl {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small networks only; no BLAS needed.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double &at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

/// Error raised when an input file cannot be understood.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Error raised when a structurally well-formed object breaks an invariant.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Deterministic uniform generator used for seeded weight initialization.
/// Uses mt19937_64 output bits directly so results are identical across
/// standard library implementations.
class SeededUniform {
  public:
    explicit SeededUniform(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 1) {}

    double unit() {
        // xorshift-mixed 53-bit mantissa in [0, 1)
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return double((state_ * 0x2545F4914F6CDD1DULL) >> 11) * 0x1.0p-53;
    }

    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  private:
    std::uint64_t state_;
};

} // namespace diffrl
