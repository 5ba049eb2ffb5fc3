#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "specres/util.hpp"

namespace specres {

namespace detail {
// Gauss-Legendre nodes/weights on [-1,1], n = 16 (full rule)
inline const std::vector<std::pair<double, double>>& gl16_full() {
    static const std::vector<std::pair<double, double>> nw = [] {
        const double x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                             0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                             0.9445750230732326, 0.9894009349916499};
        const double w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                             0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                             0.0622535239386479, 0.0271524594117541};
        std::vector<std::pair<double, double>> v;
        for (int i = 7; i >= 0; --i) v.push_back({-x[i], w[i]});
        for (int i = 0; i < 8; ++i) v.push_back({x[i], w[i]});
        return v;
    }();
    return nw;
}
}  // namespace detail

/// Product quadrature for L^p(R^d) integrals of radially dominated smooth
/// integrands: dyadic radial panels (Gauss-Legendre 16 each) out to R_max,
/// times an angular rule. Supports d <= 3. rescaled(s) shrinks/stretches
/// all nodes by s (weights pick up s^d), used for matched-grid scaling.
class QuadratureGrid {
  public:
    explicit QuadratureGrid(int d, int dyadic_panels = 12, int n_theta = 16, int n_phi = 32)
        : d_(d) {
        if (d < 1 || d > 3)
            throw InvalidArgument("QuadratureGrid: angular rules implemented for d <= 3 only");
        // radial panels [0,1], [1,2], ..., [2^{K-1}, 2^K]
        std::vector<std::pair<double, double>> panels;
        panels.push_back({0.0, 1.0});
        double a = 1.0;
        for (int k = 0; k < dyadic_panels; ++k) {
            panels.push_back({a, 2 * a});
            a *= 2;
        }
        r_max_ = a;
        panel_edges_.reserve(panels.size());
        for (auto [lo, hi] : panels) {
            panel_edges_.push_back(lo);
            const double c = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
            for (auto [xi, wi] : detail::gl16_full()) radial_.push_back({c + hw * xi, hw * wi});
        }
        n_panels_ = int(panels.size());

        // angular nodes (omega, weight); weights sum to |S^{d-1}|
        if (d == 1) {
            angular_.push_back({{1.0}, 1.0});
            angular_.push_back({{-1.0}, 1.0});
        } else if (d == 2) {
            for (int j = 0; j < n_phi; ++j) {
                const double p = 2.0 * kPi * j / n_phi;
                angular_.push_back({{std::cos(p), std::sin(p)}, 2.0 * kPi / n_phi});
            }
        } else {
            // Gauss-Legendre in cos(theta) x uniform phi
            std::vector<std::pair<double, double>> gl;
            {
                // n_theta-point rule assembled from the 16-pt rule by panel splitting
                int panels_theta = (n_theta + 15) / 16;
                for (int pnl = 0; pnl < panels_theta; ++pnl) {
                    const double lo = -1.0 + 2.0 * pnl / panels_theta;
                    const double hi = -1.0 + 2.0 * (pnl + 1) / panels_theta;
                    const double c = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
                    for (auto [xi, wi] : detail::gl16_full()) gl.push_back({c + hw * xi, hw * wi});
                }
            }
            for (auto [u, wu] : gl) {
                const double st = std::sqrt(std::max(0.0, 1.0 - u * u));
                for (int j = 0; j < n_phi; ++j) {
                    const double p = 2.0 * kPi * j / n_phi;
                    angular_.push_back({{st * std::cos(p), st * std::sin(p), u}, wu * 2.0 * kPi / n_phi});
                }
            }
        }
    }

    int dim() const { return d_; }
    double scale() const { return scale_; }
    double r_max() const { return r_max_ * scale_; }
    int n_panels() const { return n_panels_; }

    QuadratureGrid rescaled(double s) const {
        QuadratureGrid q = *this;
        q.scale_ *= s;
        return q;
    }

    /// integral of f over R^d, plus per-panel partial sums (for tail bounds)
    struct Integral {
        double total = 0.0;
        std::vector<double> panel;  // per radial dyadic panel
    };

    Integral integrate(const std::function<double(std::span<const double>)>& f) const {
        Integral out;
        out.panel.assign(n_panels_, 0.0);
        std::vector<double> x(d_);
        const int per_panel = 16;
        for (int q = 0; q < int(radial_.size()); ++q) {
            const double r = radial_[q].first * scale_;
            const double wr = radial_[q].second * scale_;
            double shell = 0.0;
            for (const auto& [omega, wa] : angular_) {
                for (int i = 0; i < d_; ++i) x[i] = r * omega[i];
                shell += wa * f(x);
            }
            out.panel[q / per_panel] += wr * std::pow(r, d_ - 1) * shell;
        }
        std::span<const double> p(out.panel);
        out.total = pairwise_sum(p);
        return out;
    }

    /// sup of |f| over all nodes
    double sup_abs(const std::function<double(std::span<const double>)>& f) const {
        double m = 0.0;
        std::vector<double> x(d_);
        for (const auto& [r0, wr] : radial_) {
            const double r = r0 * scale_;
            for (const auto& [omega, wa] : angular_) {
                for (int i = 0; i < d_; ++i) x[i] = r * omega[i];
                m = std::max(m, std::abs(f(x)));
            }
        }
        return m;
    }

    /// Relative tail bound past R_max from the fitted dyadic decay of the
    /// last panels: panel sums I_k ~ C q^k extrapolate to I_K q/(1-q).
    static double tail_relative(const Integral& I) {
        const int K = int(I.panel.size());
        if (K < 3) return 1.0;
        const double last = std::abs(I.panel[K - 1]);
        const double prev = std::abs(I.panel[K - 2]);
        const double tot = std::abs(I.total);
        if (tot == 0.0) return 0.0;
        if (last <= 1e-14 * tot) return last / tot;
        const double q = last / std::max(prev, 1e-300);
        if (q >= 0.9) return 1.0;  // not decaying: report an order-one tail
        return (last * q / (1.0 - q)) / tot;
    }

  private:
    int d_;
    double r_max_ = 0.0;
    double scale_ = 1.0;
    int n_panels_ = 0;
    std::vector<double> panel_edges_;
    std::vector<std::pair<double, double>> radial_;              // (r, weight)
    std::vector<std::pair<std::vector<double>, double>> angular_;  // (omega, weight)
};

}  // namespace specres
