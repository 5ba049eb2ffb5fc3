#pragma once

#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "specres/jets.hpp"
#include "specres/multiindex.hpp"
#include "specres/util.hpp"

namespace specres {

inline double mi_pow(std::span<const double> x, const MultiIndex& a) {
    double r = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < a[i]; ++k) r *= x[i];
    return r;
}

/// A scalar coefficient a(x) with derivative access. Implementations either
/// carry closed-form derivatives (catalog symbols, radial profiles) or fall
/// back to 4th-order centered finite differences with step 1e-3*<x>.
class SymbolImpl {
  public:
    virtual ~SymbolImpl() = default;
    virtual int dim() const = 0;
    /// highest derivative order with closed-form (non-FD) evaluation
    virtual int exact_order() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    virtual double partial(const MultiIndex& a, std::span<const double> x) const = 0;
};

namespace detail {

/// 4th-order centered first difference of g along axis j, scale-aware step
template <class G>
double fd4_axis(const G& g, std::span<const double> x, int j, double h) {
    std::vector<double> p(x.begin(), x.end());
    auto at = [&](double off) {
        p[j] = x[j] + off;
        return g(std::span<const double>(p));
    };
    const double v = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    return v;
}

inline double fd_step(std::span<const double> x) { return 1e-3 * jbracket(x); }

}  // namespace detail

/// Generic symbol from a callable; derivatives by nested FD4.
class FunctionSymbol final : public SymbolImpl {
  public:
    FunctionSymbol(int d, std::function<double(std::span<const double>)> f)
        : d_(d), f_(std::move(f)) {}
    int dim() const override { return d_; }
    int exact_order() const override { return 0; }
    double value(std::span<const double> x) const override { return f_(x); }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        return fd_partial(a, x);
    }

  private:
    double fd_partial(const MultiIndex& a, std::span<const double> x) const {
        if (mi_order(a) == 0) return f_(x);
        int j = 0;
        while (a[j] == 0) ++j;
        MultiIndex b = a;
        b[j] -= 1;
        auto g = [&](std::span<const double> y) { return fd_partial(b, y); };
        return detail::fd4_axis(g, x, j, detail::fd_step(x));
    }
    int d_;
    std::function<double(std::span<const double>)> f_;
};

/// Radial profile F evaluated at s = R0^2 + |x|^2, with a jet (Taylor data
/// in s) supplied by the profile functor. Covers s^q, <x>^mu, smooth radial
/// cutoffs and their univariate composites.
using ProfileFn = std::function<Jet(double s, int order)>;

inline ProfileFn power_profile(double p) {
    return [p](double s, int order) { return Jet::variable(order, s).pow(p); };
}

/// Term calculus on c * F^{(k)}(s) * x^alpha, closed under differentiation:
/// d_i -> (2c, k+1, alpha+e_i) + (c*alpha_i, k, alpha-e_i).
class ProfileTermSymbol final : public SymbolImpl {
  public:
    struct Term {
        double c;
        int k;
        MultiIndex alpha;
    };

    /// R0 = 0 is allowed (pure powers of |x|^2); evaluation then requires x != 0
    ProfileTermSymbol(int d, double R0, ProfileFn F, std::vector<Term> terms, int max_order = 12)
        : d_(d), R0sq_(R0 * R0), F_(std::move(F)), max_order_(max_order) {
        tables_[mi_zero(d)] = std::move(terms);
        for (int n = 1; n <= max_order_; ++n)
            for (const auto& a : multi_indices_exact(d_, n)) {
                int j = 0;
                while (a[j] == 0) ++j;
                tables_[a] = differentiate(tables_.at(mi_sub(a, mi_unit(d_, j))), j);
            }
    }

    int dim() const override { return d_; }
    int exact_order() const override { return max_order_; }

    double value(std::span<const double> x) const override { return eval(tables_.at(mi_zero(d_)), x); }

    double partial(const MultiIndex& a, std::span<const double> x) const override {
        auto it = tables_.find(a);
        if (it == tables_.end()) throw InvalidArgument("ProfileTermSymbol: derivative order above table");
        return eval(it->second, x);
    }

  private:
    std::vector<Term> differentiate(const std::vector<Term>& ts, int j) const {
        std::map<std::pair<int, MultiIndex>, double> acc;
        for (const auto& t : ts) {
            MultiIndex up = t.alpha;
            up[j] += 1;
            acc[{t.k + 1, up}] += 2.0 * t.c;
            if (t.alpha[j] > 0) {
                MultiIndex dn = t.alpha;
                dn[j] -= 1;
                acc[{t.k, dn}] += t.c * double(t.alpha[j]);
            }
        }
        std::vector<Term> out;
        for (const auto& [key, c] : acc)
            if (c != 0.0) out.push_back({c, key.first, key.second});
        return out;
    }

    double eval(const std::vector<Term>& ts, std::span<const double> x) const {
        if (ts.empty()) return 0.0;
        double s = R0sq_;
        for (double c : x) s += c * c;
        int kmax = 0;
        for (const auto& t : ts) kmax = std::max(kmax, t.k);
        const Jet Fj = F_(s, kmax);
        double r = 0.0;
        for (const auto& t : ts) r += t.c * Fj.derivative(t.k) * mi_pow(x, t.alpha);
        return r;
    }

    int d_;
    double R0sq_;
    ProfileFn F_;
    int max_order_;
    std::map<MultiIndex, std::vector<Term>> tables_;
};

/// Extends an impl with closed-form partials up to exact_order to higher
/// orders by FD4 on the highest exact level.
inline double fd_extend_partial(const SymbolImpl& s, const MultiIndex& a, std::span<const double> x,
                                int exact_order) {
    if (mi_order(a) <= exact_order) return s.partial(a, x);
    int j = 0;
    while (a[j] == 0) ++j;
    MultiIndex b = a;
    b[j] -= 1;
    auto g = [&](std::span<const double> y) { return fd_extend_partial(s, b, y, exact_order); };
    return detail::fd4_axis(g, x, j, detail::fd_step(x));
}

class ScalarSymbol {
  public:
    ScalarSymbol() = default;
    explicit ScalarSymbol(std::shared_ptr<const SymbolImpl> impl) : impl_(std::move(impl)) {}

    static ScalarSymbol zero(int d);
    static ScalarSymbol constant(int d, double c);
    /// <x>^mu = (1+|x|^2)^{mu/2}
    static ScalarSymbol bracket_power(int d, double mu);
    /// c * (R0^2 + |x|^2)^q
    static ScalarSymbol radial_power(int d, double c, double q, double R0);
    /// c * x_j x_k (R0^2+|x|^2)^q
    static ScalarSymbol monomial_radial(int d, double c, int j, int k, double q, double R0);
    static ScalarSymbol from_function(int d, std::function<double(std::span<const double>)> f);

    int dim() const { return impl_->dim(); }
    int exact_order() const { return impl_->exact_order(); }
    double operator()(std::span<const double> x) const { return impl_->value(x); }
    double value(std::span<const double> x) const { return impl_->value(x); }
    double partial(const MultiIndex& a, std::span<const double> x) const {
        return impl_->partial(a, x);
    }
    const std::shared_ptr<const SymbolImpl>& impl() const { return impl_; }

  private:
    std::shared_ptr<const SymbolImpl> impl_;
};

inline ScalarSymbol ScalarSymbol::zero(int d) {
    return radial_power(d, 0.0, 0.0, 1.0);
}
inline ScalarSymbol ScalarSymbol::constant(int d, double c) {
    return radial_power(d, c, 0.0, 1.0);
}
inline ScalarSymbol ScalarSymbol::bracket_power(int d, double mu) {
    return radial_power(d, 1.0, mu / 2.0, 1.0);
}
inline ScalarSymbol ScalarSymbol::radial_power(int d, double c, double q, double R0) {
    std::vector<ProfileTermSymbol::Term> t;
    if (c != 0.0) t.push_back({c, 0, mi_zero(d)});
    return ScalarSymbol(std::make_shared<ProfileTermSymbol>(d, R0, power_profile(q), std::move(t)));
}
inline ScalarSymbol ScalarSymbol::monomial_radial(int d, double c, int j, int k, double q, double R0) {
    MultiIndex a = mi_zero(d);
    a[j] += 1;
    a[k] += 1;
    std::vector<ProfileTermSymbol::Term> t;
    if (c != 0.0) t.push_back({c, 0, a});
    return ScalarSymbol(std::make_shared<ProfileTermSymbol>(d, R0, power_profile(q), std::move(t)));
}
inline ScalarSymbol ScalarSymbol::from_function(int d, std::function<double(std::span<const double>)> f) {
    return ScalarSymbol(std::make_shared<FunctionSymbol>(d, std::move(f)));
}

/// a_tau(x) = a(e^tau x); derivatives pick up e^{tau |alpha|}.
class DilatedSymbol final : public SymbolImpl {
  public:
    DilatedSymbol(ScalarSymbol base, double tau) : base_(std::move(base)), tau_(tau) {}
    int dim() const override { return base_.dim(); }
    int exact_order() const override { return base_.exact_order(); }
    double value(std::span<const double> x) const override { return base_.value(scaled(x)); }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        const std::vector<double> y = scaled(x);
        return std::exp(tau_ * mi_order(a)) * base_.partial(a, y);
    }

  private:
    std::vector<double> scaled(std::span<const double> x) const {
        std::vector<double> y(x.begin(), x.end());
        const double e = std::exp(tau_);
        for (double& c : y) c *= e;
        return y;
    }
    ScalarSymbol base_;
    double tau_;
};

inline ScalarSymbol dilate_symbol(const ScalarSymbol& a, double tau) {
    if (tau == 0.0) return a;
    return ScalarSymbol(std::make_shared<DilatedSymbol>(a, tau));
}

class LinCombSymbol final : public SymbolImpl {
  public:
    LinCombSymbol(std::vector<std::pair<double, ScalarSymbol>> parts) : parts_(std::move(parts)) {}
    int dim() const override { return parts_.front().second.dim(); }
    int exact_order() const override {
        int m = 1 << 20;
        for (const auto& [c, s] : parts_) m = std::min(m, s.exact_order());
        return m;
    }
    double value(std::span<const double> x) const override {
        double r = 0.0;
        for (const auto& [c, s] : parts_) r += c * s.value(x);
        return r;
    }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        double r = 0.0;
        for (const auto& [c, s] : parts_) r += c * s.partial(a, x);
        return r;
    }

  private:
    std::vector<std::pair<double, ScalarSymbol>> parts_;
};

inline ScalarSymbol lincomb(std::vector<std::pair<double, ScalarSymbol>> parts) {
    return ScalarSymbol(std::make_shared<LinCombSymbol>(std::move(parts)));
}

inline ScalarSymbol operator+(const ScalarSymbol& a, const ScalarSymbol& b) {
    return lincomb({{1.0, a}, {1.0, b}});
}
inline ScalarSymbol operator-(const ScalarSymbol& a, const ScalarSymbol& b) {
    return lincomb({{1.0, a}, {-1.0, b}});
}
inline ScalarSymbol operator*(double c, const ScalarSymbol& a) { return lincomb({{c, a}}); }

/// product via Leibniz
class ProductSymbol final : public SymbolImpl {
  public:
    ProductSymbol(ScalarSymbol a, ScalarSymbol b) : a_(std::move(a)), b_(std::move(b)) {}
    int dim() const override { return a_.dim(); }
    int exact_order() const override { return std::min(a_.exact_order(), b_.exact_order()); }
    double value(std::span<const double> x) const override { return a_.value(x) * b_.value(x); }
    double partial(const MultiIndex& a, std::span<const double> x) const override {
        double r = 0.0;
        for (const auto& g : multi_indices_upto(int(a.size()), mi_order(a))) {
            if (!mi_leq(g, a)) continue;
            r += mi_binom(a, g) * a_.partial(g, x) * b_.partial(mi_sub(a, g), x);
        }
        return r;
    }

  private:
    ScalarSymbol a_, b_;
};

inline ScalarSymbol operator*(const ScalarSymbol& a, const ScalarSymbol& b) {
    return ScalarSymbol(std::make_shared<ProductSymbol>(a, b));
}

/// (x.grad)^n a evaluated through the precomputed expansion table
inline double xgrad_pow_value(const ScalarSymbol& a, const XGradTable& tab, int n,
                              std::span<const double> x) {
    double r = 0.0;
    for (const auto& t : tab.terms(n)) r += t.coeff * mi_pow(x, t.alpha) * a.partial(t.alpha, x);
    return r;
}

/// d^alpha (x.grad)^n a via Leibniz on the expansion terms
inline double partial_xgrad_value(const ScalarSymbol& a, const XGradTable& tab, const MultiIndex& alpha,
                                  int n, std::span<const double> x) {
    const int d = int(alpha.size());
    double r = 0.0;
    for (const auto& t : tab.terms(n)) {
        for (const auto& g : multi_indices_upto(d, std::min(mi_order(alpha), mi_order(t.alpha)))) {
            if (!mi_leq(g, alpha) || !mi_leq(g, t.alpha)) continue;
            const double w = mi_binom(alpha, g) * mi_falling(t.alpha, g);
            if (w == 0.0) continue;
            r += t.coeff * w * mi_pow(x, mi_sub(t.alpha, g)) * a.partial(mi_add(mi_sub(alpha, g), t.alpha), x);
        }
    }
    return r;
}

/// symbol view of (x.grad)^n a (shares the table)
class XGradSymbol final : public SymbolImpl {
  public:
    XGradSymbol(ScalarSymbol a, std::shared_ptr<const XGradTable> tab, int n)
        : a_(std::move(a)), tab_(std::move(tab)), n_(n) {}
    int dim() const override { return a_.dim(); }
    int exact_order() const override { return std::max(0, a_.exact_order() - n_); }
    double value(std::span<const double> x) const override { return xgrad_pow_value(a_, *tab_, n_, x); }
    double partial(const MultiIndex& al, std::span<const double> x) const override {
        return partial_xgrad_value(a_, *tab_, al, n_, x);
    }

  private:
    ScalarSymbol a_;
    std::shared_ptr<const XGradTable> tab_;
    int n_;
};

inline ScalarSymbol xgrad_apply(const ScalarSymbol& a, int n) {
    auto tab = std::make_shared<XGradTable>(a.dim(), n);
    return ScalarSymbol(std::make_shared<XGradSymbol>(a, std::move(tab), n));
}

/// coefficients of i^n ad_A^n P: (o - x.grad)^n applied to a coefficient,
/// with o = 2 for second-order coefficients and o = 1 for first-order ones
inline ScalarSymbol commutator_coefficient(const ScalarSymbol& a, int n, int o) {
    std::vector<std::pair<double, ScalarSymbol>> parts;
    for (int k = 0; k <= n; ++k) {
        const double c = binom(n, k) * std::pow(double(o), n - k) * ((k % 2) ? -1.0 : 1.0);
        parts.emplace_back(c, xgrad_apply(a, k));
    }
    return lincomb(std::move(parts));
}

}  // namespace specres
