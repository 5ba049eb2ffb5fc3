#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "specres/jets.hpp"
#include "specres/util.hpp"

namespace specres {

/// The single smooth compactly supported profile used everywhere in the
/// project: B(t) = e * exp(-1/(1-t^2)) on (-1,1), 0 outside, peak B(0)=1.
inline Jet bump_profile_jet(double t, int order) {
    if (std::abs(t) >= 1.0) return Jet(order, 0.0);
    Jet tt = Jet::variable(order, t);
    Jet g = 1.0 - tt * tt;           // 1 - t^2 > 0
    Jet e = (-1.0 * g.recip()).exp();  // exp(-1/(1-t^2))
    return std::exp(1.0) * e;
}

inline double bump_profile(double t) { return bump_profile_jet(t, 0).value(); }

namespace detail {

inline const std::array<double, 8>& gl16_nodes() {
    // Gauss-Legendre 16, positive half (abscissae on [0,1) of the symmetric rule on [-1,1])
    static const std::array<double, 8> x = {
        0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
        0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
    return x;
}
inline const std::array<double, 8>& gl16_weights() {
    static const std::array<double, 8> w = {
        0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
    return w;
}

template <class F>
double gl16(F&& f, double a, double b) {
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double x = gl16_nodes()[i] * hw;
        s += gl16_weights()[i] * (f(c + x) + f(c - x));
    }
    return s * hw;
}

// cumulative integral of the bump over [-1, t], tabulated at 128 fixed
// breakpoints so evaluation is deterministic and cheap
struct BumpCdf {
    static constexpr int kPanels = 128;
    std::array<double, kPanels + 1> cum{};
    double total = 0.0;
    BumpCdf() {
        cum[0] = 0.0;
        for (int i = 0; i < kPanels; ++i) {
            const double a = -1.0 + 2.0 * i / kPanels;
            const double b = -1.0 + 2.0 * (i + 1) / kPanels;
            cum[i + 1] = cum[i] + gl16([](double t) { return bump_profile(t); }, a, b);
        }
        total = cum[kPanels];
    }
    double eval(double t) const {
        if (t <= -1.0) return 0.0;
        if (t >= 1.0) return total;
        int i = int((t + 1.0) * 0.5 * kPanels);
        if (i >= kPanels) i = kPanels - 1;
        const double a = -1.0 + 2.0 * i / kPanels;
        return cum[i] + gl16([](double s) { return bump_profile(s); }, a, t);
    }
};

inline const BumpCdf& bump_cdf() {
    static const BumpCdf c;
    return c;
}

}  // namespace detail

/// Smooth step built from the repo bump: 0 for t <= -1, 1 for t >= 1,
/// S(t) = int_{-1}^t B / int_{-1}^1 B in between. All derivatives are
/// closed-form (S^(k) = B^(k-1)/I).
inline double smoothstep(double t) {
    return detail::bump_cdf().eval(t) / detail::bump_cdf().total;
}

inline Jet smoothstep_jet(double t, int order) {
    Jet r(order, smoothstep(t));
    if (order >= 1 && std::abs(t) < 1.0) {
        Jet b = bump_profile_jet(t, order >= 1 ? order - 1 : 0);
        const double inv = 1.0 / detail::bump_cdf().total;
        for (int k = 1; k <= order; ++k) r.coeff(k) = b.coeff(k - 1) * inv / double(k);
    }
    return r;
}

/// step that rises smoothly from 0 to 1 across [a, b]
inline Jet step_up_jet(double t, double a, double b, int order) {
    const double sc = 2.0 / (b - a);
    Jet r = smoothstep_jet((t - a) * sc - 1.0, order);
    double f = 1.0;
    for (int k = 1; k <= order; ++k) {
        f *= sc;
        r.coeff(k) *= f;
    }
    return r;
}

inline double step_up(double t, double a, double b) {
    return smoothstep((t - a) * 2.0 / (b - a) - 1.0);
}
inline double step_down(double t, double a, double b) { return 1.0 - step_up(t, a, b); }

inline Jet step_down_jet(double t, double a, double b, int order) {
    return 1.0 - step_up_jet(t, a, b, order);
}

/// Smooth compactly supported function of one (spectral) variable.
/// Three shapes cover every use: a plain bump, a plateau band
/// (rise/plateau/fall), and the dyadic Littlewood-Paley difference band.
class BumpFunction {
  public:
    static BumpFunction bump(double center, double halfwidth) {
        BumpFunction f;
        f.kind_ = Kind::Bump;
        f.p_ = {center, halfwidth};
        return f;
    }

    /// 0 below a0, rises on [a0,a1], 1 on [a1,b0], falls on [b0,b1], 0 above
    static BumpFunction band(double a0, double a1, double b0, double b1) {
        if (!(a0 < a1 && a1 <= b0 && b0 < b1)) throw InvalidArgument("BumpFunction::band: bad knots");
        BumpFunction f;
        f.kind_ = Kind::Band;
        f.p_ = {a0, a1, b0, b1};
        return f;
    }

    /// s(2^{-k-1} t) - s(2^{-k} t) with s = step_down(.; A, B); the k-th
    /// piece of the dyadic partition of unity
    static BumpFunction dyadic_band(int k, double A, double B) {
        BumpFunction f;
        f.kind_ = Kind::Dyadic;
        f.p_ = {double(k), A, B};
        return f;
    }

    /// step_down(t; A, B): the low block of the partition
    static BumpFunction low_block(double A, double B) {
        BumpFunction f;
        f.kind_ = Kind::Low;
        f.p_ = {A, B};
        return f;
    }

    double operator()(double t) const { return jet(t, 0).value(); }
    double derivative(double t, int k) const { return jet(t, k).derivative(k); }

    Jet jet(double t, int order) const {
        switch (kind_) {
            case Kind::Bump: {
                const double c = p_[0], hw = p_[1];
                Jet r = bump_profile_jet((t - c) / hw, order);
                double f = 1.0;
                for (int k = 1; k <= order; ++k) {
                    f /= hw;
                    r.coeff(k) *= f;
                }
                return r;
            }
            case Kind::Band:
                return step_up_jet(t, p_[0], p_[1], order) * step_down_jet(t, p_[2], p_[3], order);
            case Kind::Dyadic: {
                const double s1 = std::exp2(-p_[0] - 1.0), s2 = std::exp2(-p_[0]);
                Jet a = step_down_jet(t * s1, p_[1], p_[2], order);
                Jet b = step_down_jet(t * s2, p_[1], p_[2], order);
                double f1 = 1.0, f2 = 1.0;
                for (int k = 1; k <= order; ++k) {
                    f1 *= s1;
                    f2 *= s2;
                    a.coeff(k) *= f1;
                    b.coeff(k) *= f2;
                }
                return a - b;
            }
            case Kind::Low: {
                return step_down_jet(t, p_[0], p_[1], order);
            }
        }
        return Jet(order, 0.0);
    }

    /// closed support [lo, hi]
    std::pair<double, double> support() const {
        switch (kind_) {
            case Kind::Bump: return {p_[0] - p_[1], p_[0] + p_[1]};
            case Kind::Band: return {p_[0], p_[3]};
            case Kind::Dyadic: return {p_[1] * std::exp2(p_[0]), p_[2] * std::exp2(p_[0] + 1.0)};
            case Kind::Low: return {0.0, p_[1]};
        }
        return {0.0, 0.0};
    }

  private:
    enum class Kind { Bump, Band, Dyadic, Low };
    Kind kind_ = Kind::Bump;
    std::array<double, 4> p_{};
};

/// Dyadic Littlewood-Paley family: Phi0 + sum_k phi_k = 1 on [0, lambda_max]
/// exactly (telescoping). Band k is supported in [A 2^k, B 2^{k+1}], so at
/// most two bands overlap at any point.
struct DyadicPartition {
    BumpFunction low;                 // Phi0
    std::vector<BumpFunction> bands;  // phi_0 .. phi_kmax
    double A = 0.55, B = 0.95;
    double lambda_max = 0.0;

    double sum(double t) const {
        double s = low(t);
        for (const auto& b : bands) s += b(t);
        return s;
    }
};

inline DyadicPartition dyadic_partition(double lambda_max, int k_max) {
    if (k_max < 1) throw InvalidArgument("dyadic_partition: k_max >= 1");
    DyadicPartition p;
    p.lambda_max = lambda_max;
    const int need = int(std::ceil(std::log2(std::max(lambda_max, 1.0) / p.A))) + 1;
    if (k_max < need) k_max = need;  // sum must close on [0, lambda_max]
    p.low = BumpFunction::low_block(p.A, p.B);
    for (int k = 0; k <= k_max; ++k) p.bands.push_back(BumpFunction::dyadic_band(k, p.A, p.B));
    return p;
}

/// psi for the localization machinery: equal to 1 on a neighborhood of the
/// dyadic band support [A, 2B], with total support ratio < 4 so bands two
/// apart are spectrally disjoint (almost-orthogonality constant 3).
inline BumpFunction dyadic_psi(int k, double A = 0.55, double B = 0.95) {
    const double s = std::exp2(double(k));
    return BumpFunction::band(0.52 * s, 0.5495 * s, 1.901 * s, 2.05 * s);
}

}  // namespace specres
