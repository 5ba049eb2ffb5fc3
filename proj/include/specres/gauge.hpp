#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "specres/bump.hpp"
#include "specres/metric.hpp"
#include "specres/norms.hpp"
#include "specres/symbol.hpp"

namespace specres {

namespace detail {

/// integral over tau in [1, u] of g(x/tau) tau^{-p}, dyadic panels with
/// doubling refinement to a fixed relative tolerance
inline double ray_integral(const std::function<double(std::span<const double>)>& g,
                           std::span<const double> x, double u, double p) {
    if (u <= 1.0) return 0.0;
    const int d = int(x.size());
    std::vector<double> y(d);
    auto f = [&](double tau) {
        for (int i = 0; i < d; ++i) y[i] = x[i] / tau;
        return g(y) * std::pow(tau, -p);
    };
    auto integrate = [&](int split) {
        double s = 0.0;
        double lo = 1.0;
        while (lo < u) {
            const double hi = std::min(2.0 * lo, u);
            for (int j = 0; j < split; ++j) {
                const double a = lo + (hi - lo) * j / split;
                const double b = lo + (hi - lo) * (j + 1) / split;
                s += gl16(f, a, b);
            }
            lo = hi;
        }
        return s;
    };
    double prev = integrate(1);
    for (int split = 2; split <= 16; split *= 2) {
        const double cur = integrate(split);
        if (std::abs(cur - prev) <= 1e-13 * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

}  // namespace detail

/// phi(x) = 1 + n int_1^{|x|/R} delta(x/tau) tau^{-n-1} dtau solved along
/// rays; satisfies the transport equation phi + (x/n).grad phi = 1 + delta
/// for |x| >= R. Returns phi itself (the n-th root is taken by the caller).
class TransportPhiSymbol final : public SymbolImpl {
  public:
    TransportPhiSymbol(ScalarSymbol delta, double R, int n)
        : delta_(std::move(delta)), R_(R), n_(n) {}

    int dim() const override { return delta_.dim(); }
    int exact_order() const override { return 2; }

    double value(std::span<const double> x) const override {
        const double u = norm(x) / R_;
        if (u <= 1.0) return 1.0;
        auto g = [&](std::span<const double> y) { return delta_.value(y); };
        return 1.0 + n_ * detail::ray_integral(g, x, u, n_ + 1.0);
    }

    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(x);
        if (ord > 2) return fd_extend_partial(*this, a, x, 2);
        const int d = dim();
        const double r = norm(x), u = r / R_;
        if (u <= 1.0) return 0.0;
        std::vector<double> omega(d);
        for (int i = 0; i < d; ++i) omega[i] = x[i] / r;
        std::vector<double> Rw(d);
        for (int i = 0; i < d; ++i) Rw[i] = R_ * omega[i];

        if (ord == 1) {
            int i = axis(a, 0);
            auto g = [&](std::span<const double> y) { return delta_.partial(mi_unit(d, i), y); };
            const double integral = detail::ray_integral(g, x, u, n_ + 2.0);
            const double boundary = delta_.value(Rw) * std::pow(u, -n_ - 1.0) * omega[i] / R_;
            return n_ * (boundary + integral);
        }

        // ord == 2: axes i, j (i may equal j)
        const int i = axis(a, 0), j = axis(a, 1);
        auto gij = [&](std::span<const double> y) {
            MultiIndex m = mi_zero(d);
            m[i] += 1;
            m[j] += 1;
            return delta_.partial(m, y);
        };
        const double integral = detail::ray_integral(gij, x, u, n_ + 3.0);

        const double um = std::pow(u, -n_ - 1.0);
        const double dval = delta_.value(Rw);
        // grad delta at R omega
        double ddel_dir = 0.0;  // sum_k d_k delta(Rw) * R * d_j omega_k
        for (int k = 0; k < d; ++k) {
            const double djwk = (double(j == k) - omega[j] * omega[k]) / r;
            ddel_dir += delta_.partial(mi_unit(d, k), Rw) * R_ * djwk;
        }
        const double termA = ddel_dir * um * omega[i] / R_ +
                             dval * (-(n_ + 1.0) * std::pow(u, -n_ - 2.0) * omega[j] / R_) * omega[i] / R_ +
                             dval * um * (double(i == j) - omega[i] * omega[j]) / (R_ * r);
        const double termB = delta_.partial(mi_unit(d, i), Rw) * std::pow(u, -n_ - 2.0) * omega[j] / R_;
        return n_ * (termA + termB + integral);
    }

  private:
    static double norm(std::span<const double> x) {
        double s = 0;
        for (double c : x) s += c * c;
        return std::sqrt(s);
    }
    static int axis(const MultiIndex& a, int which) {
        int seen = 0;
        for (int i = 0; i < int(a.size()); ++i)
            for (int k = 0; k < a[i]; ++k)
                if (seen++ == which) return i;
        return -1;
    }

    ScalarSymbol delta_;
    double R_;
    int n_;
};

/// phi^{1/n} with chain-rule partials (orders <= 2 exact)
class RootSymbol final : public SymbolImpl {
  public:
    RootSymbol(ScalarSymbol base, double power) : base_(std::move(base)), p_(power) {}
    int dim() const override { return base_.dim(); }
    int exact_order() const override { return std::min(2, base_.exact_order()); }
    double value(std::span<const double> x) const override { return std::pow(base_.value(x), p_); }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(x);
        if (ord > 2) return fd_extend_partial(*this, a, x, 2);
        const double f = base_.value(x);
        if (f <= 0.0) throw NumericalError("RootSymbol: base not positive (increase R)");
        const int d = dim();
        if (ord == 1) return p_ * std::pow(f, p_ - 1.0) * base_.partial(a, x);
        int i = -1, j = -1;
        for (int k = 0; k < d; ++k)
            for (int c = 0; c < a[k]; ++c) (i < 0 ? i : j) = k;
        const double fi = base_.partial(mi_unit(d, i), x);
        const double fj = base_.partial(mi_unit(d, j), x);
        return p_ * (p_ - 1.0) * std::pow(f, p_ - 2.0) * fi * fj + p_ * std::pow(f, p_ - 1.0) * base_.partial(a, x);
    }

  private:
    ScalarSymbol base_;
    double p_;
};

/// radial smooth step s(|x|) rising across [R, 2R] (orders <= 2 exact)
class RadialStepSymbol final : public SymbolImpl {
  public:
    RadialStepSymbol(int d, double lo, double hi) : d_(d), lo_(lo), hi_(hi) {}
    int dim() const override { return d_; }
    int exact_order() const override { return 2; }
    double value(std::span<const double> x) const override { return step_up(norm(x), lo_, hi_); }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(x);
        if (ord > 2) return fd_extend_partial(*this, a, x, 2);
        const double r = norm(x);
        if (r <= 1e-14) return 0.0;
        const double sc = 2.0 / (hi_ - lo_);
        const Jet S = smoothstep_jet((r - lo_) * sc - 1.0, 2);
        const double S1 = S.derivative(1) * sc, S2 = S.derivative(2) * sc * sc;
        std::vector<double> w(d_);
        for (int i = 0; i < d_; ++i) w[i] = x[i] / r;
        if (ord == 1) {
            int i = 0;
            while (a[i] == 0) ++i;
            return S1 * w[i];
        }
        int i = -1, j = -1;
        for (int k = 0; k < d_; ++k)
            for (int c = 0; c < a[k]; ++c) (i < 0 ? i : j) = k;
        return S2 * w[i] * w[j] + S1 * (double(i == j) - w[i] * w[j]) / r;
    }

  private:
    static double norm(std::span<const double> x) {
        double s = 0;
        for (double c : x) s += c * c;
        return std::sqrt(s);
    }
    int d_;
    double lo_, hi_;
};

/// solve the transport equation for phi = (det G^{1/2})-normalizing radial
/// profile; returns phi^{1/d}, valid for |x| >= R
inline ScalarSymbol solve_transport(const ScalarSymbol& delta, double R, int d) {
    ScalarSymbol phi(std::make_shared<TransportPhiSymbol>(delta, R, d));
    // positivity probe: phi^{1/d} must stay positive
    Rng rng(0xF00Dull);
    for (int s = 0; s < 64; ++s) {
        std::vector<double> x(d);
        double n2 = 0;
        for (double& c : x) {
            c = rng.normal();
            n2 += c * c;
        }
        const double r = R * std::exp(rng.uniform(0.0, std::log(64.0)));
        for (double& c : x) c *= r / std::sqrt(n2);
        if (phi.value(x) <= 0.0)
            throw NumericalError("solve_transport: phi not positive; increase R (see choose_R)");
    }
    return ScalarSymbol(std::make_shared<RootSymbol>(phi, 1.0 / d));
}

/// smallest R in {1,2,4,...} with sup |phi - 1| <= 1/2 and
/// 1/2 <= phi + (x/n).grad phi <= 3/2 on a dense ray sample
inline double choose_R(const ScalarSymbol& delta, double R_cap = 1024.0) {
    const int d = delta.dim();
    Rng rng(0xC0FFEEull);
    std::vector<std::vector<double>> dirs;
    for (int i = 0; i < 16; ++i) {
        std::vector<double> v(d);
        double n2 = 0;
        for (double& c : v) {
            c = rng.normal();
            n2 += c * c;
        }
        for (double& c : v) c /= std::sqrt(n2);
        dirs.push_back(v);
    }
    for (double R = 1.0; R <= R_cap; R *= 2.0) {
        ScalarSymbol phi(std::make_shared<TransportPhiSymbol>(delta, R, d));
        bool ok = true;
        for (const auto& w : dirs) {
            for (int j = 0; j < 24 && ok; ++j) {
                const double r = R * std::exp2(double(j) / 4.0);  // up to 64 R
                std::vector<double> x(d);
                for (int i = 0; i < d; ++i) x[i] = r * w[i];
                const double p = phi.value(x);
                double xg = 0.0;
                for (int i = 0; i < d; ++i) xg += x[i] * phi.partial(mi_unit(d, i), x);
                const double drift = p + xg / d;
                if (std::abs(p - 1.0) > 0.5 || drift < 0.5 || drift > 1.5) ok = false;
            }
            if (!ok) break;
        }
        if (ok) return R;
    }
    throw NumericalError("choose_R: no admissible R below the cap (delta too large or not decaying)");
}

/// Radial-profile diffeomorphism x -> phi(x) x, phi glued to 1 inside |x| <= R.
class Diffeo {
  public:
    Diffeo(ScalarSymbol phi_raw, double R, int d)
        : d_(d), R_(R), C_(2.0 * R) {
        ScalarSymbol step(std::make_shared<RadialStepSymbol>(d, R, 2.0 * R));
        ScalarSymbol one = ScalarSymbol::constant(d, 1.0);
        phi_ = one + step * (phi_raw - one);
        check_monotone();
    }

    int dim() const { return d_; }
    double matching_radius() const { return R_; }
    /// identities det Jac = det G^{1/2} hold for |x| >= C
    double C() const { return C_; }
    const ScalarSymbol& phi() const { return phi_; }

    std::vector<double> map(std::span<const double> x) const {
        const double p = phi_.value(x);
        std::vector<double> y(x.begin(), x.end());
        for (double& c : y) c *= p;
        return y;
    }

    Eigen::MatrixXd jac(std::span<const double> x) const {
        const double p = phi_.value(x);
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(d_, d_) * p;
        for (int j = 0; j < d_; ++j) {
            const double dj = phi_.partial(mi_unit(d_, j), x);
            for (int i = 0; i < d_; ++i) J(i, j) += x[i] * dj;
        }
        return J;
    }

    /// d_k Jac
    Eigen::MatrixXd jac_partial(std::span<const double> x, int k) const {
        Eigen::MatrixXd D(d_, d_);
        const double pk = phi_.partial(mi_unit(d_, k), x);
        for (int j = 0; j < d_; ++j) {
            MultiIndex m = mi_unit(d_, j);
            m[k] += 1;
            const double pjk = phi_.partial(m, x);
            const double pj = phi_.partial(mi_unit(d_, j), x);
            for (int i = 0; i < d_; ++i)
                D(i, j) = pk * double(i == j) + double(i == k) * pj + x[i] * pjk;
        }
        return D;
    }

    double det_jac_lu(std::span<const double> x) const {
        return jac(x).partialPivLu().determinant();
    }

    /// phi^{d-1} (phi + x.grad phi): the rank-one update determinant
    double det_jac_rank1(std::span<const double> x) const {
        const double p = phi_.value(x);
        double xg = 0;
        for (int i = 0; i < d_; ++i) xg += x[i] * phi_.partial(mi_unit(d_, i), x);
        return std::pow(p, d_ - 1) * (p + xg);
    }

    /// ray-wise inverse: solve r phi(r omega) = |y| (bisection + Newton polish)
    std::vector<double> inverse(std::span<const double> y) const {
        double ry = 0;
        for (double c : y) ry += c * c;
        ry = std::sqrt(ry);
        if (ry <= 1e-300) return std::vector<double>(d_, 0.0);
        std::vector<double> w(d_);
        for (int i = 0; i < d_; ++i) w[i] = y[i] / ry;
        auto g = [&](double r) {
            std::vector<double> x(d_);
            for (int i = 0; i < d_; ++i) x[i] = r * w[i];
            return r * phi_.value(x) - ry;
        };
        double lo = ry / 4.0, hi = ry * 4.0;
        if (g(lo) > 0 || g(hi) < 0) throw NumericalError("Diffeo::inverse: bracket failed (not monotone?)");
        for (int it = 0; it < 80 && (hi - lo) > 1e-14 * ry; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) <= 0 ? lo : hi) = mid;
        }
        double r = 0.5 * (lo + hi);
        for (int it = 0; it < 4; ++it) {  // Newton polish, tol 1e-12
            std::vector<double> x(d_);
            for (int i = 0; i < d_; ++i) x[i] = r * w[i];
            const double p = phi_.value(x);
            double xg = 0;
            for (int i = 0; i < d_; ++i) xg += x[i] * phi_.partial(mi_unit(d_, i), x);
            const double deriv = p + xg;  // d/dr (r phi(r omega))
            const double f = r * p - ry;
            if (std::abs(deriv) < 1e-14) break;
            r -= f / deriv;
        }
        std::vector<double> x(d_);
        for (int i = 0; i < d_; ++i) x[i] = r * w[i];
        return x;
    }

  private:
    void check_monotone() {
        Rng rng(0xD1FFull);
        for (int s = 0; s < 32; ++s) {
            std::vector<double> w(d_);
            double n2 = 0;
            for (double& c : w) {
                c = rng.normal();
                n2 += c * c;
            }
            for (double& c : w) c /= std::sqrt(n2);
            for (int j = 0; j < 40; ++j) {
                const double r = 0.05 * R_ * std::exp2(double(j) / 3.0);
                std::vector<double> x(d_);
                for (int i = 0; i < d_; ++i) x[i] = r * w[i];
                const double p = phi_.value(x);
                double xg = 0;
                for (int i = 0; i < d_; ++i) xg += x[i] * phi_.partial(mi_unit(d_, i), x);
                if (p + xg <= 0.0)
                    throw NumericalError("Diffeo: r -> r phi(r omega) not increasing on a sampled ray");
            }
        }
    }

    int d_;
    double R_, C_;
    ScalarSymbol phi_;
};

inline Diffeo build_diffeo(const ScalarSymbol& phi_raw, double R) {
    return Diffeo(phi_raw, R, phi_raw.dim());
}

namespace detail {

/// entries of the pulled-back metric Jac^{-T} G Jac^{-1} at x = chi^{-1}(y).
/// All d^2 entries at a point share one inverse/Jacobian computation via a
/// per-thread memo (the symbols themselves stay immutable).
class PullbackEntrySymbol final : public SymbolImpl {
  public:
    PullbackEntrySymbol(std::shared_ptr<const Diffeo> chi, std::shared_ptr<const MetricField> G,
                        int j, int k)
        : chi_(std::move(chi)), G_(std::move(G)), j_(j), k_(k) {}
    int dim() const override { return G_->dim(); }
    int exact_order() const override { return 1; }

    double value(std::span<const double> y) const override {
        Memo& m = memo();
        if (!m.hit(chi_.get(), G_.get(), -1, y)) {
            const std::vector<double> x = chi_->inverse(y);
            const Eigen::MatrixXd Jinv = chi_->jac(x).inverse();
            m.M = Jinv.transpose() * G_->eval(x) * Jinv;
            m.store(chi_.get(), G_.get(), -1, y);
        }
        return m.M(j_, k_);
    }

    double partial(const MultiIndex& a, std::span<const double> y) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(y);
        if (ord > 1) return fd_extend_partial(*this, a, y, 1);
        int ax = 0;
        while (a[ax] == 0) ++ax;
        Memo& m = memo();
        if (!m.hit(chi_.get(), G_.get(), ax, y)) {
            const int d = dim();
            const std::vector<double> x = chi_->inverse(y);
            const Eigen::MatrixXd Jinv = chi_->jac(x).inverse();
            const Eigen::MatrixXd G = G_->eval(x);
            // d/dy_ax = sum_b (J^{-1})_{b ax} d/dx_b of Jinv^T G Jinv
            Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
            for (int b = 0; b < d; ++b) {
                const double w = Jinv(b, ax);
                if (w == 0.0) continue;
                const Eigen::MatrixXd dJ = chi_->jac_partial(x, b);
                const Eigen::MatrixXd dG = G_->partial(mi_unit(d, b), x);
                const Eigen::MatrixXd dJinv = -Jinv * dJ * Jinv;
                total += w * (dJinv.transpose() * G * Jinv + Jinv.transpose() * dG * Jinv +
                              Jinv.transpose() * G * dJinv);
            }
            m.M = total;
            m.store(chi_.get(), G_.get(), ax, y);
        }
        return m.M(j_, k_);
    }

  private:
    struct Memo {
        const void* owner = nullptr;
        const void* src = nullptr;
        int ax = -2;
        std::vector<double> y;
        Eigen::MatrixXd M;
        bool hit(const void* o, const void* s, int a, std::span<const double> p) const {
            return owner == o && src == s && ax == a && y.size() == p.size() &&
                   std::equal(y.begin(), y.end(), p.begin());
        }
        void store(const void* o, const void* s, int a, std::span<const double> p) {
            owner = o;
            src = s;
            ax = a;
            y.assign(p.begin(), p.end());
        }
    };
    static Memo& memo() {
        static thread_local Memo m;
        return m;
    }

    std::shared_ptr<const Diffeo> chi_;
    std::shared_ptr<const MetricField> G_;
    int j_, k_;
};

}  // namespace detail

/// G~(y) = Jac^{-T} G Jac^{-1} at x = chi^{-1}(y); det G~ = 1 outside the
/// compact set by the transport construction
inline MetricField pullback_metric(const MetricField& G, const Diffeo& chi) {
    const int d = G.dim();
    auto chip = std::make_shared<const Diffeo>(chi);
    auto Gp = std::make_shared<const MetricField>(G);
    std::vector<ScalarSymbol> e(d * d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            e[j * d + k] = ScalarSymbol(std::make_shared<detail::PullbackEntrySymbol>(chip, Gp, j, k));
    // det G~ = det G / (det Jac)^2
    ScalarSymbol delta = ScalarSymbol::from_function(d, [chip, Gp](std::span<const double> y) {
        const std::vector<double> x = chip->inverse(y);
        const double dj = chip->det_jac_lu(x);
        return std::sqrt(Gp->eval(x).determinant() / (dj * dj)) - 1.0;
    });
    return MetricField(d, G.rho(), std::move(e), std::move(delta), G.name() + "_pullback", G.params(),
                       chi.C());
}

/// Coefficients (a_{jk}, b_k, v) of a formally symmetric divergence-form
/// operator P = -d_j a_{jk} d_k + v (b_k = -d_j a_{jk} recorded for the
/// model-operator views).
struct ConjugatedOperator {
    int d = 0;
    std::vector<ScalarSymbol> a;  // d x d row-major
    std::vector<ScalarSymbol> b;  // d
    ScalarSymbol v;
    bool flat = false;
    std::string provenance;

    const ScalarSymbol& aij(int j, int k) const { return a[j * d + k]; }

    Eigen::MatrixXd a_eval(std::span<const double> x) const {
        Eigen::MatrixXd M(d, d);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) M(j, k) = a[j * d + k].value(x);
        return M;
    }

    /// dilated coefficients: lambda^{-1} P = e^{-i tau A} P_tau e^{i tau A}
    /// with P_tau carrying (a_tau, e^tau b_tau, e^{2 tau} v_tau)
    ConjugatedOperator dilate(double tau) const {
        ConjugatedOperator out;
        out.d = d;
        out.flat = flat;
        out.provenance = provenance + "_dilated";
        for (const auto& s : a) out.a.push_back(dilate_symbol(s, tau));
        for (const auto& s : b) out.b.push_back(std::exp(tau) * dilate_symbol(s, tau));
        out.v = std::exp(2.0 * tau) * dilate_symbol(v, tau);
        return out;
    }
};

namespace detail {

/// entries of G^{-1} with exact partials to order 2
class InverseEntrySymbol final : public SymbolImpl {
  public:
    InverseEntrySymbol(std::shared_ptr<const MetricField> G, int j, int k)
        : G_(std::move(G)), j_(j), k_(k) {}
    int dim() const override { return G_->dim(); }
    int exact_order() const override { return 2; }
    double value(std::span<const double> x) const override {
        return G_->eval(x).inverse()(j_, k_);
    }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(x);
        if (ord > 2) return fd_extend_partial(*this, a, x, 2);
        const int d = dim();
        const Eigen::MatrixXd Ginv = G_->eval(x).inverse();
        if (ord == 1) {
            const Eigen::MatrixXd dG = G_->partial(a, x);
            return (-Ginv * dG * Ginv)(j_, k_);
        }
        int ax1 = -1, ax2 = -1;
        for (int k = 0; k < d; ++k)
            for (int c = 0; c < a[k]; ++c) (ax1 < 0 ? ax1 : ax2) = k;
        const Eigen::MatrixXd Gi = G_->partial(mi_unit(d, ax1), x);
        const Eigen::MatrixXd Gj = G_->partial(mi_unit(d, ax2), x);
        const Eigen::MatrixXd Gij = G_->partial(a, x);
        const Eigen::MatrixXd M = Ginv * Gi * Ginv * Gj * Ginv + Ginv * Gj * Ginv * Gi * Ginv -
                                  Ginv * Gij * Ginv;
        return M(j_, k_);
    }

  private:
    std::shared_ptr<const MetricField> G_;
    int j_, k_;
};

/// b_k = - sum_j d_j (G^{-1})_{jk}
class DivergenceSymbol final : public SymbolImpl {
  public:
    DivergenceSymbol(std::vector<ScalarSymbol> acol, int k) : acol_(std::move(acol)), k_(k) {}
    int dim() const override { return int(acol_.size()); }
    int exact_order() const override { return 1; }
    double value(std::span<const double> x) const override {
        const int d = dim();
        double s = 0;
        for (int j = 0; j < d; ++j) s += acol_[j].partial(mi_unit(d, j), x);
        return -s;
    }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const int ord = mi_order(a);
        if (ord == 0) return value(x);
        if (ord > 1) return fd_extend_partial(*this, a, x, 1);
        const int d = dim();
        double s = 0;
        for (int j = 0; j < d; ++j) {
            MultiIndex m = a;
            m[j] += 1;
            s += acol_[j].partial(m, x);
        }
        return -s;
    }

  private:
    std::vector<ScalarSymbol> acol_;  // a_{jk} for j = 0..d-1 at fixed k
    int k_;
};

/// v = -det^{-1/4} d_j ( det^{1/2} a_{jk} d_k det^{-1/4} ), evaluated from
/// metric derivatives (Jacobi's formula for det derivatives)
class ConjugationPotentialSymbol final : public SymbolImpl {
  public:
    explicit ConjugationPotentialSymbol(std::shared_ptr<const MetricField> G) : G_(std::move(G)) {}
    int dim() const override { return G_->dim(); }
    int exact_order() const override { return 0; }
    double value(std::span<const double> x) const override {
        const int d = dim();
        const Eigen::MatrixXd G = G_->eval(x);
        const Eigen::MatrixXd Ginv = G.inverse();
        const double D = G.determinant();
        // det derivatives via Jacobi
        Eigen::VectorXd dD(d);
        std::vector<Eigen::MatrixXd> dG(d);
        for (int i = 0; i < d; ++i) {
            dG[i] = G_->partial(mi_unit(d, i), x);
            dD(i) = D * (Ginv * dG[i]).trace();
        }
        Eigen::MatrixXd d2D(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                MultiIndex m = mi_unit(d, i);
                m[j] += 1;
                const Eigen::MatrixXd Gij = G_->partial(m, x);
                const double tij = (Ginv * Gij).trace() - (Ginv * dG[j] * Ginv * dG[i]).trace();
                d2D(i, j) = d2D(j, i) = dD(j) * (Ginv * dG[i]).trace() + D * tij;
            }
        // m^{-1} = D^{-1/4}: d_k m^{-1} = -1/4 D^{-5/4} d_k D
        // F_j = D^{1/2} a_{jk} d_k m^{-1} = -1/4 D^{-3/4} sum_k a_{jk} d_k D
        // v = -D^{-1/4} sum_j d_j F_j
        double div = 0.0;
        for (int j = 0; j < d; ++j) {
            // d_j F_j = -1/4 [ -3/4 D^{-7/4} d_j D (a d D)_j
            //                  + D^{-3/4} sum_k ( d_j a_{jk} d_k D + a_{jk} d2D(j,k) ) ]
            double adD = 0.0, term = 0.0;
            for (int k = 0; k < d; ++k) adD += Ginv(j, k) * dD(k);
            for (int k = 0; k < d; ++k) {
                const Eigen::MatrixXd dA = -Ginv * dG[j] * Ginv;
                term += dA(j, k) * dD(k) + Ginv(j, k) * d2D(j, k);
            }
            div += -0.25 * (-0.75 * std::pow(D, -1.75) * dD(j) * adD + std::pow(D, -0.75) * term);
        }
        return -std::pow(D, -0.25) * div;
    }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        if (mi_order(a) == 0) return value(x);
        return fd_extend_partial(*this, a, x, 0);
    }

  private:
    std::shared_ptr<const MetricField> G_;
};

}  // namespace detail

/// Expand P = -det^{-1/4} d_j (det^{1/2} G_{jk} d_k (det^{-1/4} .)) into
/// divergence-form coefficients (a = G^{-1}, b = -div a, v).
inline ConjugatedOperator conjugate_to_lebesgue(const MetricField& G) {
    const int d = G.dim();
    ConjugatedOperator P;
    P.d = d;
    P.provenance = G.name();
    P.flat = G.is_flat();
    auto Gp = std::make_shared<const MetricField>(G);
    if (P.flat) {
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                P.a.push_back(ScalarSymbol::constant(d, j == k ? 1.0 : 0.0));
        for (int k = 0; k < d; ++k) P.b.push_back(ScalarSymbol::zero(d));
        P.v = ScalarSymbol::zero(d);
        return P;
    }
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            P.a.push_back(ScalarSymbol(std::make_shared<detail::InverseEntrySymbol>(Gp, j, k)));
    for (int k = 0; k < d; ++k) {
        std::vector<ScalarSymbol> col;
        for (int j = 0; j < d; ++j) col.push_back(P.a[j * d + k]);
        P.b.push_back(ScalarSymbol(std::make_shared<detail::DivergenceSymbol>(std::move(col), k)));
    }
    P.v = ScalarSymbol(std::make_shared<detail::ConjugationPotentialSymbol>(Gp));
    return P;
}

/// P = P0 + W with W compactly supported (cutoff in [r_cut, 2 r_cut]) and
/// P0 a small long-range perturbation of -Delta; reports the S-norm size of
/// P0's perturbation and enforces eta_target.
struct SplitOperator {
    ConjugatedOperator p0;
    ConjugatedOperator w;
    double support_radius = 0.0;  // W vanishes outside this radius
    double eta_reported = 0.0;
};

inline SplitOperator split_small_plus_compact(const ConjugatedOperator& P, double r_cut,
                                              double eta_target, const QuadratureGrid* quad = nullptr) {
    const int d = P.d;
    ScalarSymbol cut(std::make_shared<RadialStepSymbol>(d, r_cut, 2.0 * r_cut));  // rises to 1 outward
    ScalarSymbol one = ScalarSymbol::constant(d, 1.0);
    ScalarSymbol inner = one - cut;  // 1 inside, 0 outside 2 r_cut

    SplitOperator S;
    S.support_radius = 2.0 * r_cut;
    S.p0.d = S.w.d = d;
    S.p0.provenance = P.provenance + "_tail";
    S.w.provenance = P.provenance + "_compact";
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            const ScalarSymbol pert = P.aij(j, k) - ScalarSymbol::constant(d, j == k ? 1.0 : 0.0);
            S.w.a.push_back(inner * pert);
            ScalarSymbol tail = cut * pert;
            S.p0.a.push_back(j == k ? one + tail : tail);
        }
    for (int k = 0; k < d; ++k) {
        std::vector<ScalarSymbol> col0, colw;
        for (int j = 0; j < d; ++j) {
            col0.push_back(S.p0.a[j * d + k]);
            colw.push_back(S.w.a[j * d + k]);
        }
        S.p0.b.push_back(ScalarSymbol(std::make_shared<detail::DivergenceSymbol>(std::move(col0), k)));
        S.w.b.push_back(ScalarSymbol(std::make_shared<detail::DivergenceSymbol>(std::move(colw), k)));
    }
    S.p0.v = cut * P.v;
    S.w.v = inner * P.v;

    // smallness of the tail in the scale-invariant norms
    QuadratureGrid fallback(d);
    const QuadratureGrid& q = quad ? *quad : fallback;
    double eta = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            eta += symbol_norm(S.p0.a[j * d + k] - ScalarSymbol::constant(d, j == k ? 1.0 : 0.0),
                               {0, 1, 0}, q);
    for (int k = 0; k < d; ++k) eta += symbol_norm(S.p0.b[k], {1, 0, 0}, q);
    S.eta_reported = eta;
    if (eta > eta_target)
        throw NumericalError("split_small_plus_compact: tail norm " + std::to_string(eta) +
                             " exceeds eta_target (metric tail too heavy; increase r_cut)");
    return S;
}

}  // namespace specres
