#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specres/symbol.hpp"
#include "specres/util.hpp"

namespace specres {

/// largest integer strictly smaller than d/2 ([d/2] for odd d, d/2 - 1 for even)
inline int rbar(int d) { return (d % 2) ? d / 2 : d / 2 - 1; }

/// conjugate Lebesgue exponents 2d/(d+2n), 2d/(d-2n)
inline double lebesgue_p(int d, int n) { return 2.0 * d / double(d + 2 * n); }
inline double lebesgue_q(int d, int n) { return 2.0 * d / double(d - 2 * n); }

/// parameters (o, r, N) of the scale-invariant symbol norm ||.||_{o,r,N}
struct SymbolClassParams {
    int o = 0;
    int r = 0;
    int N = 0;

    void validate(int d) const {
        if (o < 0 || o > 1 || r < 0 || N < 0) throw InvalidArgument("SymbolClassParams: fields nonnegative, o in {0,1}");
        if (o + r > rbar(d)) throw InvalidArgument("SymbolClassParams: o + r must be <= rbar(d)");
    }
};

/// Long-range metric G^{jk}(x): symmetric, uniformly elliptic, with
/// d^alpha(G - I) = O(<x>^{-rho-|alpha|}). Entries carry exact derivatives.
class MetricField {
  public:
    MetricField(int d, double rho, std::vector<ScalarSymbol> entries, ScalarSymbol delta,
                std::string name, std::vector<double> params, double compact_radius)
        : d_(d),
          rho_(rho),
          entries_(std::move(entries)),
          delta_(std::move(delta)),
          name_(std::move(name)),
          params_(std::move(params)),
          compact_radius_(compact_radius) {
        check_ellipticity();
    }

    int dim() const { return d_; }
    double rho() const { return rho_; }
    double lambda_bound() const { return lambda_; }
    double compact_radius() const { return compact_radius_; }
    const std::string& name() const { return name_; }
    const std::vector<double>& params() const { return params_; }
    bool is_flat() const { return name_ == "flat"; }

    const ScalarSymbol& coeff(int j, int k) const { return entries_[idx(j, k)]; }
    /// det(G)^{1/2} - 1 as a symbol (closed form for catalog families)
    const ScalarSymbol& det_sqrt_minus_one() const { return delta_; }

    Eigen::MatrixXd eval(std::span<const double> x) const {
        Eigen::MatrixXd G(d_, d_);
        for (int j = 0; j < d_; ++j)
            for (int k = j; k < d_; ++k) G(j, k) = G(k, j) = coeff(j, k).value(x);
        return G;
    }

    Eigen::MatrixXd partial(const MultiIndex& a, std::span<const double> x) const {
        Eigen::MatrixXd G(d_, d_);
        for (int j = 0; j < d_; ++j)
            for (int k = j; k < d_; ++k) G(j, k) = G(k, j) = coeff(j, k).partial(a, x);
        return G;
    }

  private:
    int idx(int j, int k) const { return j * d_ + k; }

    void check_ellipticity() {
        Rng rng(0x5EEDF1E1Dull);
        double lo = 1e300, hi = 0.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        std::vector<double> x(d_);
        for (int s = 0; s < 2048; ++s) {
            const double r = std::exp(rng.uniform(std::log(1e-2), std::log(256.0)));
            double n2 = 0.0;
            for (int i = 0; i < d_; ++i) {
                x[i] = rng.normal();
                n2 += x[i] * x[i];
            }
            const double sc = r / std::sqrt(std::max(n2, 1e-30));
            for (double& c : x) c *= sc;
            es.compute(eval(x), Eigen::EigenvaluesOnly);
            lo = std::min(lo, es.eigenvalues().minCoeff());
            hi = std::max(hi, es.eigenvalues().maxCoeff());
        }
        if (lo <= 1e-8) throw NumericalError("MetricField: uniform ellipticity failed (eigenvalue check)");
        lambda_ = std::max(hi, 1.0 / lo);
    }

    int d_;
    double rho_;
    double lambda_ = 1.0;
    std::vector<ScalarSymbol> entries_;  // row-major d x d
    ScalarSymbol delta_;
    std::string name_;
    std::vector<double> params_;
    double compact_radius_;
};

namespace detail {

inline int catalog_max_order(int d) { return std::max(8, rbar(d) + 4); }

inline ScalarSymbol profile_entry(int d, double R0, ProfileFn F,
                                  std::vector<ProfileTermSymbol::Term> terms, int max_order) {
    return ScalarSymbol(std::make_shared<ProfileTermSymbol>(d, R0, std::move(F), std::move(terms), max_order));
}

}  // namespace detail

/// Catalog of test metrics. All satisfy the long-range condition with the
/// declared rho (closed-form derivatives throughout).
///   flat            []              G = I
///   radial_power    [c, rho, R0]    G = (1 + c (R0^2+|x|^2)^{-rho/2}) I
///   aniso_bump      [eta, rho]      G = I + eta x x^T (1+|x|^2)^{-(rho+2)/2}
///   small_longrange [eta, rho]      G = I + eta S(x), S fixed, S^{-rho} seminorms <= 1
inline MetricField catalog(const std::string& name, const std::vector<double>& params, int d) {
    if (d < 1) throw InvalidArgument("catalog: d >= 1");
    const int mo = detail::catalog_max_order(d);

    if (name == "flat") {
        std::vector<ScalarSymbol> e(d * d);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                e[j * d + k] = ScalarSymbol::constant(d, j == k ? 1.0 : 0.0);
        return MetricField(d, 1.0, std::move(e), ScalarSymbol::zero(d), "flat", {}, 1.0);
    }

    if (name == "radial_power") {
        if (params.size() != 3) throw InvalidArgument("radial_power: params [c, rho, R0]");
        const double c = params[0], rho = params[1], R0 = params[2];
        if (rho <= 0) throw InvalidArgument("radial_power: rho must be > 0");
        if (R0 <= 0) throw InvalidArgument("radial_power: R0 must be > 0");
        ProfileFn diag = [c, rho](double s, int order) {
            return c * Jet::variable(order, s).pow(-rho / 2.0) + 1.0;
        };
        ProfileFn delta = [c, rho, d](double s, int order) {
            Jet g = c * Jet::variable(order, s).pow(-rho / 2.0) + 1.0;
            return g.pow(0.5 * d) - 1.0;
        };
        std::vector<ScalarSymbol> e(d * d);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                e[j * d + k] = (j == k)
                                   ? detail::profile_entry(d, R0, diag, {{1.0, 0, mi_zero(d)}}, mo)
                                   : ScalarSymbol::zero(d);
        ScalarSymbol del = detail::profile_entry(d, R0, delta, {{1.0, 0, mi_zero(d)}}, mo);
        return MetricField(d, rho, std::move(e), std::move(del), "radial_power", params, R0);
    }

    if (name == "aniso_bump") {
        if (params.size() != 2) throw InvalidArgument("aniso_bump: params [eta, rho]");
        const double eta = params[0], rho = params[1];
        if (rho <= 0) throw InvalidArgument("aniso_bump: rho must be > 0");
        const double q = -(rho + 2.0) / 2.0;
        std::vector<ScalarSymbol> e(d * d);
        // diag: 1 + eta x_j^2 s^q ; offdiag: eta x_j x_k s^q
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                ScalarSymbol m = ScalarSymbol::monomial_radial(d, eta, j, k, q, 1.0);
                e[j * d + k] = (j == k) ? ScalarSymbol::constant(d, 1.0) + m : m;
            }
        // det = 1 + eta (s-1) s^q  (rank-one update)
        ProfileFn delta = [eta, q](double s, int order) {
            Jet sj = Jet::variable(order, s);
            Jet det = eta * ((sj - Jet(order, 1.0)) * sj.pow(q)) + 1.0;
            return det.pow(0.5) - 1.0;
        };
        ScalarSymbol del = detail::profile_entry(d, 1.0, delta, {{1.0, 0, mi_zero(d)}}, mo);
        return MetricField(d, rho, std::move(e), std::move(del), "aniso_bump", params, 1.0);
    }

    if (name == "small_longrange") {
        if (params.size() != 2) throw InvalidArgument("small_longrange: params [eta, rho]");
        const double eta = params[0], rho = params[1];
        if (rho <= 0) throw InvalidArgument("small_longrange: rho must be > 0");
        // S = c1 s^{-rho/2} I + c2 x x^T s^{-(rho+2)/2}; eta = 0 gives flat.
        // c1 = c2 = 0.08 keeps the S^{-rho} seminorms of S below 1 up to
        // derivative order rbar(d)+2 (verified on shell samples in tests).
        const double c1 = 0.08, c2 = 0.08;
        const double qv = -(rho + 2.0) / 2.0;
        std::vector<ScalarSymbol> e(d * d);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                ScalarSymbol m = ScalarSymbol::monomial_radial(d, eta * c2, j, k, qv, 1.0);
                if (j == k) {
                    ScalarSymbol w = ScalarSymbol::radial_power(d, eta * c1, -rho / 2.0, 1.0);
                    e[j * d + k] = ScalarSymbol::constant(d, 1.0) + w + m;
                } else {
                    e[j * d + k] = m;
                }
            }
        ProfileFn delta = [eta, rho, qv, c1, c2, d](double s, int order) {
            Jet sj = Jet::variable(order, s);
            Jet diag = eta * c1 * sj.pow(-rho / 2.0) + 1.0;
            Jet radial = diag + eta * c2 * ((sj - Jet(order, 1.0)) * sj.pow(qv));
            Jet det = diag.pow(double(d - 1)) * radial;
            return det.pow(0.5) - 1.0;
        };
        ScalarSymbol del = detail::profile_entry(d, 1.0, delta, {{1.0, 0, mi_zero(d)}}, mo);
        return MetricField(d, rho, std::move(e), std::move(del), "small_longrange", params, 1.0);
    }

    throw InvalidArgument("catalog: unknown metric name '" + name + "'");
}

}  // namespace specres
