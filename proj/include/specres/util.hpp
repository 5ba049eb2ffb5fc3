#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace specres {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Thrown when a numerical contract cannot be met (quadrature tail too
/// large, solver non-convergence, ellipticity failure, ...). Never
/// swallowed: callers either handle it or let it surface.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Deterministic, platform-independent RNG (splitmix64 core). std::
/// distributions are not reproducible across standard libraries, so the
/// few samplers we need are spelled out.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// standard normal, Box-Muller (always draws two uniforms)
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    cplx normal_cplx() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
    }

  private:
    std::uint64_t state_;
};

/// Pairwise summation; deterministic for a fixed element order.
template <class T>
T pairwise_sum(std::span<const T> v) {
    const std::size_t n = v.size();
    if (n == 0) return T{};
    if (n <= 8) {
        T s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(std::span<const T>(v));
}

inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw InvalidArgument("linspace: need n >= 2");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
    return v;
}

inline std::vector<double> logspace(double a, double b, int n) {
    if (a <= 0 || b <= 0) throw InvalidArgument("logspace: endpoints must be positive");
    std::vector<double> v = linspace(std::log(a), std::log(b), n);
    for (double& x : v) x = std::exp(x);
    return v;
}

/// FNV-1a, used for config hashes embedded in reports.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline double sq(double x) { return x * x; }

/// <x> = (1 + |x|^2)^{1/2}
inline double jbracket(std::span<const double> x) {
    double s = 1.0;
    for (double c : x) s += c * c;
    return std::sqrt(s);
}

}  // namespace specres
