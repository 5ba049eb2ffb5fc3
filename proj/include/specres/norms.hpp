#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "specres/metric.hpp"
#include "specres/quadrature.hpp"
#include "specres/symbol.hpp"

namespace specres {

struct SymbolNormOptions {
    double tail_tol = 1e-8;  // relative tail bound past R_max
};

/// ||a||_{o,r,N} = sum_{n<=N, |alpha|<=r} || d^alpha (x.grad)^n a ||_{L^{d/(o+|alpha|)}},
/// the o+|alpha| = 0 term taken as the sup over the quadrature grid.
inline double symbol_norm(const ScalarSymbol& a, const SymbolClassParams& p, const QuadratureGrid& q,
                          const SymbolNormOptions& opts = {}) {
    const int d = a.dim();
    p.validate(d);
    if (q.dim() != d) throw InvalidArgument("symbol_norm: quadrature dimension mismatch");
    const XGradTable tab(d, p.N);
    double total = 0.0;
    for (int n = 0; n <= p.N; ++n) {
        for (const auto& alpha : multi_indices_upto(d, p.r)) {
            const int e = p.o + mi_order(alpha);
            auto g = [&](std::span<const double> x) {
                return partial_xgrad_value(a, tab, alpha, n, x);
            };
            if (e == 0) {
                total += q.sup_abs(g);
                continue;
            }
            const double pleb = double(d) / double(e);
            if (pleb < 1.0) throw InvalidArgument("symbol_norm: Lebesgue exponent < 1");
            auto integrand = [&](std::span<const double> x) { return std::pow(std::abs(g(x)), pleb); };
            const auto I = q.integrate(integrand);
            const double tail = QuadratureGrid::tail_relative(I);
            if (tail > opts.tail_tol)
                throw NumericalError("symbol_norm: quadrature domain too small to resolve the decay (tail " +
                                     std::to_string(tail) + ")");
            total += std::pow(I.total, 1.0 / pleb);
        }
    }
    return total;
}

/// ratio ||a||_{o,r,N} / (S^{-mu-o} seminorm up to order r+N); finite for
/// symbols of the right order, 0 for the zero symbol.
inline double embedding_check(const ScalarSymbol& a, double mu, const SymbolClassParams& p,
                              const QuadratureGrid& q, const SymbolNormOptions& opts = {}) {
    const int d = a.dim();
    const double nrm = symbol_norm(a, p, q, opts);
    double semi = 0.0;
    for (const auto& beta : multi_indices_upto(d, p.r + p.N)) {
        auto f = [&](std::span<const double> x) {
            return std::pow(jbracket(x), mu + p.o + mi_order(beta)) * a.partial(beta, x);
        };
        semi = std::max(semi, q.sup_abs(f));
    }
    if (semi == 0.0) {
        if (nrm == 0.0) return 0.0;
        throw NumericalError("embedding_check: zero seminorm with nonzero norm");
    }
    const double ratio = nrm / semi;
    if (!std::isfinite(ratio)) throw NumericalError("embedding_check: ratio not finite");
    return ratio;
}

/// Per-shell decay constants of d^alpha (G - I) <x>^{rho+|alpha|}.
struct DecayReport {
    struct Row {
        MultiIndex alpha;
        double c_alpha = 0.0;          // global sup over shells
        double max_over_median = 0.0;  // boundedness diagnostic
        bool bounded = true;
        std::vector<double> shell_sup;  // indexed by shell
    };
    std::vector<Row> rows;
    std::vector<int> shells;  // dyadic exponents m covered, |x| in [2^m, 2^{m+1})
    double slack = 2.0;
    bool pass = true;
};

/// deterministic shell sample set: n_dirs directions x radii per dyadic shell
inline std::vector<std::vector<double>> make_shell_samples(int d, int m_min, int m_max,
                                                           int n_dirs = 24, int radii_per_shell = 4,
                                                           std::uint64_t seed = 0xD1A5ull) {
    Rng rng(seed);
    std::vector<std::vector<double>> dirs;
    for (int i = 0; i < n_dirs; ++i) {
        std::vector<double> v(d);
        double n2 = 0;
        for (double& c : v) {
            c = rng.normal();
            n2 += c * c;
        }
        for (double& c : v) c /= std::sqrt(std::max(n2, 1e-30));
        dirs.push_back(v);
    }
    std::vector<std::vector<double>> out;
    for (int m = m_min; m <= m_max; ++m)
        for (int j = 0; j < radii_per_shell; ++j) {
            const double r = std::exp2(m + double(j) / radii_per_shell);
            for (const auto& w : dirs) {
                std::vector<double> x(d);
                for (int i = 0; i < d; ++i) x[i] = r * w[i];
                out.push_back(std::move(x));
            }
        }
    return out;
}

/// Checks the long-range condition |d^alpha(G - I)| <= C_alpha <x>^{-rho-|alpha|}
/// by fitting per-shell sup constants; bounded iff max/median across shells
/// stays within `slack`.
inline DecayReport verify_long_range(const MetricField& G, const std::vector<std::vector<double>>& samples,
                                     int alpha_max, double slack = 2.0) {
    const int d = G.dim();
    std::map<int, std::vector<const std::vector<double>*>> by_shell;
    for (const auto& x : samples) {
        double r2 = 0;
        for (double c : x) r2 += c * c;
        const double r = std::sqrt(r2);
        if (r <= 0) continue;
        by_shell[int(std::floor(std::log2(r) + 1e-9))].push_back(&x);
    }
    if (int(by_shell.size()) < 3) throw InvalidArgument("verify_long_range: insufficient shells (< 3)");

    DecayReport rep;
    rep.slack = slack;
    for (const auto& [m, v] : by_shell) rep.shells.push_back(m);

    for (const auto& alpha : multi_indices_upto(d, alpha_max)) {
        DecayReport::Row row;
        row.alpha = alpha;
        for (const auto& [m, pts] : by_shell) {
            double sup = 0.0;
            for (const auto* px : pts) {
                std::span<const double> x(*px);
                Eigen::MatrixXd D = G.partial(alpha, x);
                if (mi_order(alpha) == 0) D -= Eigen::MatrixXd::Identity(d, d);
                const double mag = D.cwiseAbs().maxCoeff();
                sup = std::max(sup, mag * std::pow(jbracket(x), G.rho() + mi_order(alpha)));
            }
            row.shell_sup.push_back(sup);
        }
        row.c_alpha = *std::max_element(row.shell_sup.begin(), row.shell_sup.end());
        std::vector<double> sorted = row.shell_sup;
        std::sort(sorted.begin(), sorted.end());
        const double med = sorted[sorted.size() / 2];
        if (row.c_alpha <= 1e-14) {
            row.max_over_median = 0.0;
            row.bounded = true;
        } else if (med <= 1e-14 * row.c_alpha) {
            row.max_over_median = 1e300;
            row.bounded = false;
        } else {
            row.max_over_median = row.c_alpha / med;
            row.bounded = row.max_over_median <= slack;
        }
        rep.pass = rep.pass && row.bounded;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace specres
