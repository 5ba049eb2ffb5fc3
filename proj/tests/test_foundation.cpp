#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "specres/bump.hpp"
#include "specres/jets.hpp"
#include "specres/metric.hpp"
#include "specres/multiindex.hpp"
#include "specres/norms.hpp"
#include "specres/quadrature.hpp"
#include "specres/symbol.hpp"
#include "specres/util.hpp"

using namespace specres;
using Catch::Approx;

namespace {

// independent finite-difference oracle for jet derivatives
template <class F>
double fd_derivative(F f, double t, int k, double h) {
    if (k == 0) return f(t);
    auto g = [&](double s) { return fd_derivative(f, s, k - 1, h); };
    return (-g(t + 2 * h) + 8 * g(t + h) - 8 * g(t - h) + g(t - 2 * h)) / (12 * h);
}

double radial_integral_3d(const std::function<double(double)>& f, double rmax) {
    // high-resolution 1-D radial quadrature oracle: 4*pi * int r^2 f(r) dr,
    // dyadic panels subdivided 8-fold so the r ~ 1 structure is resolved
    double s = 0.0;
    double lo = 0.0, hi = 1.0;
    while (lo < rmax) {
        for (int j = 0; j < 8; ++j) {
            const double a = lo + (hi - lo) * j / 8.0, b = lo + (hi - lo) * (j + 1) / 8.0;
            s += detail::gl16([&](double r) { return r * r * f(r); }, a, b);
        }
        lo = hi;
        hi = 2 * hi;
    }
    return 4.0 * kPi * s;
}

}  // namespace

TEST_CASE("rng and hashing are deterministic") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    REQUIRE(fnv1a("") == 14695981039346656037ull);
    REQUIRE(fnv1a("specres") != fnv1a("specre"));
}

TEST_CASE("jets reproduce derivatives of smooth profiles") {
    // FD oracle: nested 4th-order stencils; h balances truncation vs roundoff
    auto f = [](double t) { return std::exp(-1.0 / t); };
    Jet tj = Jet::variable(8, 0.7);
    Jet fj = (-1.0 * tj.recip()).exp();
    for (int k = 0; k <= 4; ++k) {
        const double fd = fd_derivative(f, 0.7, k, 0.01);
        REQUIRE(fj.derivative(k) == Approx(fd).margin(1e-5).epsilon(1e-5));
    }

    // pow recurrence: (1+t^2)^{-3/2}; the nested-FD oracle itself carries
    // O(h^4 f^{(k+4)}) truncation at k = 4, hence the looser band there
    auto g = [](double t) { return std::pow(1.0 + t * t, -1.5); };
    Jet gj = (Jet::variable(8, 0.3) * Jet::variable(8, 0.3) + 1.0).pow(-1.5);
    for (int k = 0; k <= 4; ++k) {
        const double tol = (k <= 2) ? 1e-6 : 1e-3;
        REQUIRE(gj.derivative(k) == Approx(fd_derivative(g, 0.3, k, 0.01)).margin(tol).epsilon(tol));
    }

    // compose: sqrt then outer profile
    Jet s = Jet::variable(6, 4.0);
    Jet r = s.sqrt();
    Jet outer = Jet::variable(6, r.value()).pow(3.0);
    Jet comp = Jet::compose(outer, r);
    auto h = [](double v) { return std::pow(std::sqrt(v), 3.0); };
    for (int k = 0; k <= 3; ++k)
        REQUIRE(comp.derivative(k) == Approx(fd_derivative(h, 4.0, k, 0.01)).margin(1e-6).epsilon(1e-6));
}

TEST_CASE("bump profile and smoothstep") {
    REQUIRE(bump_profile(0.0) == Approx(1.0));
    REQUIRE(bump_profile(1.0) == 0.0);
    REQUIRE(bump_profile(-1.2) == 0.0);
    REQUIRE(smoothstep(-1.0) == 0.0);
    REQUIRE(smoothstep(1.0) == 1.0);
    REQUIRE(smoothstep(0.0) == Approx(0.5).epsilon(1e-12));

    // derivative identity S' = B / I
    Jet j = smoothstep_jet(0.4, 3);
    const double I = detail::bump_cdf().total;
    REQUIRE(j.derivative(1) == Approx(bump_profile(0.4) / I).epsilon(1e-12));
    const double fd = fd_derivative([](double t) { return smoothstep(t); }, 0.4, 1, 1e-4);
    REQUIRE(j.derivative(1) == Approx(fd).epsilon(1e-8));
}

TEST_CASE("dyadic partition sums to one with overlap <= 2") {
    const double lambda_max = 20.0;
    auto part = dyadic_partition(lambda_max, 4);
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(0.0, lambda_max);
        REQUIRE(part.sum(t) == Approx(1.0).margin(1e-12));
        int nonzero = 0;
        for (const auto& b : part.bands) nonzero += (b(t) != 0.0);
        REQUIRE(nonzero <= 2);
    }
    // supp phi_k inside [2^{k-1} c1, 2^{k+1} c2]
    for (int k = 0; k < int(part.bands.size()); ++k) {
        auto [lo, hi] = part.bands[k].support();
        REQUIRE(lo >= std::exp2(k - 1) * 1.1 - 1e-12);
        REQUIRE(hi <= std::exp2(k + 1) * 0.95 + 1e-12);
    }
}

TEST_CASE("x.grad expansion table") {
    // (x.grad)^2 f(r) = r f' + r^2 f'' for radial f; check on f = <x>^{-1}
    ScalarSymbol a = ScalarSymbol::bracket_power(3, -1.0);
    XGradTable tab(3, 2);
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        const double b = std::sqrt(1 + r2);
        const double xg1 = -r2 / (b * b * b);
        const double xg2 = -2 * r2 / std::pow(b, 3) + 3 * r2 * r2 / std::pow(b, 5);
        REQUIRE(xgrad_pow_value(a, tab, 1, x) == Approx(xg1).margin(1e-12));
        REQUIRE(xgrad_pow_value(a, tab, 2, x) == Approx(xg2).margin(1e-12));
    }
}

TEST_CASE("closed-form symbol derivatives agree with finite differences") {
    auto check = [](const ScalarSymbol& s) {
        Rng rng(23);
        const int d = s.dim();
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> x(d);
            for (double& c : x) c = rng.uniform(-3, 3);
            ScalarSymbol fd = ScalarSymbol::from_function(d, [&s](std::span<const double> y) { return s.value(y); });
            for (const auto& al : multi_indices_upto(d, 2)) {
                if (mi_order(al) == 0) continue;
                const double exact = s.partial(al, x);
                const double approx = fd.partial(al, x);
                REQUIRE(exact == Approx(approx).margin(1e-5).epsilon(1e-5));
            }
        }
    };
    check(ScalarSymbol::bracket_power(3, -1.0));
    check(ScalarSymbol::monomial_radial(3, 0.7, 0, 1, -1.5, 1.0));
    check(ScalarSymbol::bracket_power(2, -2.0));
    ScalarSymbol prod = ScalarSymbol::bracket_power(3, -1.0) * ScalarSymbol::monomial_radial(3, 1.0, 1, 2, -1.0, 2.0);
    check(prod);
}

TEST_CASE("dilate_symbol evaluates a(e^tau x) with chain-rule derivatives") {
    ScalarSymbol a = ScalarSymbol::bracket_power(3, -1.0);
    ScalarSymbol at = dilate_symbol(a, std::log(2.0));
    std::vector<double> x = {1.0, 0.0, 0.0};
    REQUIRE(at.value(x) == Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));  // (1+4)^{-1/2}
    // tau = 0 is the identity
    REQUIRE(dilate_symbol(a, 0.0).value(x) == a.value(x));
    // derivative carries e^{tau}
    MultiIndex e1 = mi_unit(3, 0);
    REQUIRE(at.partial(e1, x) == Approx(2.0 * a.partial(e1, std::vector<double>{2, 0, 0})).epsilon(1e-12));
}

TEST_CASE("quadrature grid integrates decaying radial functions") {
    // oracles: int <x>^{-2} dx (d=1) = pi ; int <x>^{-3} (d=2) = 2 pi ;
    // int <x>^{-6} (d=3) = pi^2/4
    QuadratureGrid q1(1), q2(2), q3(3);
    auto f1 = [](std::span<const double> x) { return std::pow(1.0 + x[0] * x[0], -2.0); };
    REQUIRE(q1.integrate(f1).total == Approx(kPi / 2).epsilon(1e-9));
    auto f2 = [](std::span<const double> x) { return std::pow(1 + x[0] * x[0] + x[1] * x[1], -2.5); };
    REQUIRE(q2.integrate(f2).total == Approx(2 * kPi / 3).epsilon(1e-9));
    auto f3 = [](std::span<const double> x) {
        return std::pow(1 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2], -3.0);
    };
    const double oracle = radial_integral_3d([](double r) { return std::pow(1 + r * r, -3.0); }, 8192.0);
    REQUIRE(oracle == Approx(kPi * kPi / 4).epsilon(1e-10));
    REQUIRE(q3.integrate(f3).total == Approx(oracle).epsilon(1e-9));
}

TEST_CASE("symbol_norm examples") {
    QuadratureGrid q(3);

    SECTION("zero symbol") {
        REQUIRE(symbol_norm(ScalarSymbol::zero(3), {1, 0, 0}, q) == 0.0);
    }

    SECTION("<x>^{-2} in S^{1,0,0}: the L^3 norm, radial quadrature oracle") {
        // || <x>^{-2} ||_{L^3}^3 = 4 pi int r^2 (1+r^2)^{-3} dr = pi^2/4
        const double oracle = std::cbrt(radial_integral_3d(
            [](double r) { return std::pow(1 + r * r, -3.0); }, 8192.0));
        REQUIRE(oracle == Approx(std::cbrt(kPi * kPi / 4)).epsilon(1e-10));
        const double nrm = symbol_norm(ScalarSymbol::bracket_power(3, -2.0), {1, 0, 0}, q);
        REQUIRE(nrm == Approx(oracle).epsilon(1e-8));
    }

    SECTION("constants are annihilated by derivatives: norm is the sup term") {
        ScalarSymbol one = ScalarSymbol::constant(3, 1.0);
        REQUIRE(symbol_norm(one, {0, 1, 2}, q) == Approx(1.0).margin(1e-13));
    }
}

TEST_CASE("scaling homogeneity of the symbol norm (matched rescaled grids)") {
    QuadratureGrid q(3);
    // o = 1 on a radial catalog-style coefficient; o = 0 on an anisotropic one
    ScalarSymbol a1 = ScalarSymbol::radial_power(3, 0.3, -1.0, 1.0);  // ~ <x>^{-2}
    ScalarSymbol a0 = ScalarSymbol::monomial_radial(3, 0.2, 0, 1, -1.5, 1.0);
    for (double tau : {-1.0, -0.5, 0.5, 1.0}) {
        {
            SymbolClassParams p{1, 0, 1};
            const double base = symbol_norm(a1, p, q);
            const double scaled = std::exp(1.0 * tau) * symbol_norm(dilate_symbol(a1, tau), p, q.rescaled(std::exp(-tau)));
            REQUIRE(scaled == Approx(base).epsilon(1e-6));
        }
        {
            SymbolClassParams p{0, 1, 1};
            const double base = symbol_norm(a0, p, q);
            const double scaled = symbol_norm(dilate_symbol(a0, tau), p, q.rescaled(std::exp(-tau)));
            REQUIRE(scaled == Approx(base).epsilon(1e-6));
        }
    }
}

TEST_CASE("embedding checks") {
    QuadratureGrid q(3);
    SECTION("<x>^{-1} into S^{0,1,0}") {
        const double ratio = embedding_check(ScalarSymbol::bracket_power(3, -1.0), 1.0, {0, 1, 0}, q);
        REQUIRE(std::isfinite(ratio));
        REQUIRE(ratio > 0.0);
    }
    SECTION("zero symbol gives ratio 0") {
        REQUIRE(embedding_check(ScalarSymbol::zero(3), 1.0, {0, 1, 0}, q) == 0.0);
    }
    SECTION("<x>^{-2} into S^{1,0,0} equals its L^3 norm (unit seminorm)") {
        const double l3 = std::cbrt(kPi * kPi / 4);
        const double ratio = embedding_check(ScalarSymbol::bracket_power(3, -2.0), 1.0, {1, 0, 0}, q);
        REQUIRE(ratio == Approx(l3).epsilon(1e-6));
    }
}

TEST_CASE("catalog metrics: symmetry, ellipticity, decay") {
    SECTION("flat is the identity everywhere") {
        auto G = catalog("flat", {}, 3);
        std::vector<double> x = {0.3, -2.0, 5.0};
        REQUIRE((G.eval(x) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
    }

    SECTION("radial_power closed form on axis") {
        auto G = catalog("radial_power", {0.2, 1.0, 1.0}, 3);
        Rng rng(3);
        for (int i = 0; i < 10; ++i) {
            std::vector<double> x = {rng.uniform(-4, 4), 0.0, 0.0};
            const double expect = 0.2 * std::pow(1.0 + x[0] * x[0], -0.5);
            REQUIRE(G.eval(x)(0, 0) - 1.0 == Approx(expect).margin(1e-13));
        }
    }

    SECTION("small_longrange with eta = 0 is flat") {
        auto G = catalog("small_longrange", {0.0, 1.0}, 3);
        std::vector<double> x = {1.0, 2.0, -0.5};
        REQUIRE((G.eval(x) - Eigen::MatrixXd::Identity(3, 3)).norm() == Approx(0.0).margin(1e-14));
    }

    SECTION("unknown name / bad rho / huge eta rejected") {
        REQUIRE_THROWS_AS(catalog("nope", {}, 3), InvalidArgument);
        REQUIRE_THROWS_AS(catalog("radial_power", {0.2, -1.0, 1.0}, 3), InvalidArgument);
        REQUIRE_THROWS(catalog("aniso_bump", {-3.0, 1.0}, 3));
    }

    SECTION("symmetry and ellipticity at random points") {
        for (const char* name : {"radial_power", "aniso_bump", "small_longrange"}) {
            auto G = std::string(name) == "radial_power" ? catalog(name, {0.2, 1.0, 1.0}, 3)
                                                         : catalog(name, {0.2, 1.0}, 3);
            Rng rng(99);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            for (int i = 0; i < 10000; ++i) {
                std::vector<double> x = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
                Eigen::MatrixXd M = G.eval(x);
                REQUIRE((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
                es.compute(M, Eigen::EigenvaluesOnly);
                REQUIRE(es.eigenvalues().minCoeff() > 1.0 / G.lambda_bound() - 1e-9);
                REQUIRE(es.eigenvalues().maxCoeff() < G.lambda_bound() + 1e-9);
            }
        }
    }

    SECTION("small_longrange S-field seminorms at most 1") {
        auto G = catalog("small_longrange", {1.0, 1.0}, 3);  // eta = 1 exposes S itself
        auto samples = make_shell_samples(3, 0, 6);
        for (const auto& al : multi_indices_upto(3, rbar(3) + 2)) {
            double semi = 0.0;
            for (const auto& x : samples) {
                Eigen::MatrixXd D = G.partial(al, x);
                if (mi_order(al) == 0) D -= Eigen::MatrixXd::Identity(3, 3);
                semi = std::max(semi, D.cwiseAbs().maxCoeff() * std::pow(jbracket(x), 1.0 + mi_order(al)));
            }
            REQUIRE(semi <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("verify_long_range") {
    auto samples = make_shell_samples(3, 0, 6);

    SECTION("flat: identically zero constants") {
        auto rep = verify_long_range(catalog("flat", {}, 3), samples, 2);
        REQUIRE(rep.pass);
        for (const auto& r : rep.rows) REQUIRE(r.c_alpha == 0.0);
    }

    SECTION("radial_power passes with C_0 ~ 0.2") {
        auto rep = verify_long_range(catalog("radial_power", {0.2, 1.0, 1.0}, 3), samples, 2);
        REQUIRE(rep.pass);
        REQUIRE(rep.rows[0].c_alpha == Approx(0.2).epsilon(0.05));
    }

    SECTION("<x>^{-1/2} decay declared as rho = 1 fails") {
        // metric I + <x>^{-1/2} I with mismatched declared decay
        std::vector<ScalarSymbol> e(9);
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                e[j * 3 + k] = (j == k) ? ScalarSymbol::constant(3, 1.0) + ScalarSymbol::bracket_power(3, -0.5)
                                        : ScalarSymbol::zero(3);
        MetricField bad(3, 1.0, std::move(e), ScalarSymbol::zero(3), "custom", {}, 1.0);
        auto rep = verify_long_range(bad, samples, 0);
        REQUIRE_FALSE(rep.pass);
    }

    SECTION("fewer than 3 shells is an error") {
        auto few = make_shell_samples(3, 0, 1);
        REQUIRE_THROWS_AS(verify_long_range(catalog("flat", {}, 3), few, 0), InvalidArgument);
    }
}

TEST_CASE("commutator coefficients via (o - x.grad)^n") {
    // constants: (2 - x.grad)^n 1 = 2^n
    ScalarSymbol one = ScalarSymbol::constant(3, 1.0);
    std::vector<double> x = {0.5, -1.0, 2.0};
    for (int n = 0; n <= 3; ++n)
        REQUIRE(commutator_coefficient(one, n, 2).value(x) == Approx(std::exp2(n)).margin(1e-12));
    // radial check: (1 - x.grad) <x>^{-1} = <x>^{-1} + |x|^2 <x>^{-3}
    ScalarSymbol a = ScalarSymbol::bracket_power(3, -1.0);
    const double r2 = 0.25 + 1.0 + 4.0;
    const double b = std::sqrt(1 + r2);
    REQUIRE(commutator_coefficient(a, 1, 1).value(x) == Approx(1 / b + r2 / (b * b * b)).epsilon(1e-12));
}
