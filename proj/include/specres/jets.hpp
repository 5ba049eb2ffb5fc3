#pragma once

#include <cmath>
#include <vector>

#include "specres/util.hpp"

namespace specres {

/// Truncated Taylor series (value + derivatives/k! up to fixed order) of a
/// univariate function at a point. Coefficient recurrences give exact
/// high-order derivatives of the smooth cutoff/bump profiles used
/// throughout without any numeric differencing.
class Jet {
  public:
    Jet() = default;
    Jet(int order, double constant) : c_(order + 1, 0.0) { c_[0] = constant; }

    static Jet variable(int order, double value) {
        Jet j(order, value);
        if (order >= 1) j.c_[1] = 1.0;
        return j;
    }

    int order() const { return int(c_.size()) - 1; }
    double value() const { return c_[0]; }
    double coeff(int k) const { return c_[k]; }
    double& coeff(int k) { return c_[k]; }
    /// k-th derivative (coefficients times k!)
    double derivative(int k) const {
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return c_[k] * f;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        Jet r = a;
        for (int k = 0; k <= r.order(); ++k) r.c_[k] += b.c_[k];
        return r;
    }
    friend Jet operator-(const Jet& a, const Jet& b) {
        Jet r = a;
        for (int k = 0; k <= r.order(); ++k) r.c_[k] -= b.c_[k];
        return r;
    }
    friend Jet operator*(double s, const Jet& a) {
        Jet r = a;
        for (double& x : r.c_) x *= s;
        return r;
    }
    friend Jet operator+(const Jet& a, double s) {
        Jet r = a;
        r.c_[0] += s;
        return r;
    }
    friend Jet operator-(const Jet& a, double s) { return a + (-s); }
    friend Jet operator-(double s, const Jet& a) {
        Jet r = -1.0 * a;
        r.c_[0] += s;
        return r;
    }
    friend Jet operator*(const Jet& a, const Jet& b) {
        const int N = a.order();
        Jet r(N, 0.0);
        for (int k = 0; k <= N; ++k) {
            double s = 0.0;
            for (int j = 0; j <= k; ++j) s += a.c_[j] * b.c_[k - j];
            r.c_[k] = s;
        }
        return r;
    }

    Jet recip() const {
        const int N = order();
        Jet r(N, 1.0 / c_[0]);
        for (int k = 1; k <= N; ++k) {
            double s = 0.0;
            for (int j = 1; j <= k; ++j) s += c_[j] * r.c_[k - j];
            r.c_[k] = -s / c_[0];
        }
        return r;
    }

    Jet exp() const {
        const int N = order();
        Jet r(N, std::exp(c_[0]));
        for (int k = 1; k <= N; ++k) {
            double s = 0.0;
            for (int j = 1; j <= k; ++j) s += double(j) * c_[j] * r.c_[k - j];
            r.c_[k] = s / double(k);
        }
        return r;
    }

    /// a^p for real p; requires a(0) > 0.
    Jet pow(double p) const {
        const int N = order();
        Jet r(N, std::pow(c_[0], p));
        for (int k = 1; k <= N; ++k) {
            double s = 0.0;
            for (int j = 1; j <= k; ++j)
                s += ((p + 1.0) * double(j) - double(k)) * c_[j] * r.c_[k - j];
            r.c_[k] = s / (double(k) * c_[0]);
        }
        return r;
    }

    Jet sqrt() const { return pow(0.5); }

    /// composition a(b(t)) where the outer jet a is expanded at b.value().
    /// Standard Horner on truncated series; requires matching orders.
    static Jet compose(const Jet& outer, const Jet& inner) {
        const int N = inner.order();
        Jet shifted = inner;  // inner minus its constant term
        shifted.c_[0] = 0.0;
        Jet r(N, outer.c_[N]);
        for (int k = N - 1; k >= 0; --k) {
            r = r * shifted;
            r.c_[0] += outer.c_[k];
        }
        return r;
    }

  private:
    std::vector<double> c_;
};

}  // namespace specres
