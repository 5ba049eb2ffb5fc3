#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "specres/util.hpp"

namespace specres {

/// Multi-index alpha in d variables.
using MultiIndex = std::vector<int>;

inline int mi_order(const MultiIndex& a) {
    int s = 0;
    for (int k : a) s += k;
    return s;
}

inline MultiIndex mi_zero(int d) { return MultiIndex(d, 0); }

inline MultiIndex mi_unit(int d, int j) {
    MultiIndex a(d, 0);
    a[j] = 1;
    return a;
}

inline MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

/// a - b, requires b <= a componentwise
inline MultiIndex mi_sub(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

inline bool mi_leq(const MultiIndex& a, const MultiIndex& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) return false;
    return true;
}

namespace detail {
inline void compositions_rec(int d, int pos, int rem, MultiIndex& cur, std::vector<MultiIndex>& out) {
    if (pos == d - 1) {
        cur[pos] = rem;
        out.push_back(cur);
        return;
    }
    for (int k = rem; k >= 0; --k) {
        cur[pos] = k;
        compositions_rec(d, pos + 1, rem - k, cur, out);
    }
}
}  // namespace detail

/// all alpha with |alpha| = n (deterministic order)
inline std::vector<MultiIndex> multi_indices_exact(int d, int n) {
    std::vector<MultiIndex> out;
    MultiIndex cur(d, 0);
    detail::compositions_rec(d, 0, n, cur, out);
    return out;
}

/// all alpha with |alpha| <= order, graded by total order
inline std::vector<MultiIndex> multi_indices_upto(int d, int order) {
    std::vector<MultiIndex> out;
    for (int n = 0; n <= order; ++n)
        for (auto& a : multi_indices_exact(d, n)) out.push_back(std::move(a));
    return out;
}

inline double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

/// binomial coefficient for multi-indices: prod_i C(a_i, b_i)
inline double mi_binom(const MultiIndex& a, const MultiIndex& b) {
    double r = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) r *= binom(a[i], b[i]);
    return r;
}

/// falling factorial a! / (a-b)! = prod_i a_i (a_i-1) ... (a_i - b_i + 1)
inline double mi_falling(const MultiIndex& a, const MultiIndex& b) {
    double r = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < b[i]; ++k) r *= double(a[i] - k);
    return r;
}

/// Expansion (x.grad)^n = sum_{|alpha| <= n} c_{n,alpha} x^alpha d^alpha.
/// Table built once per (d, n) from the recurrence
/// c_{n+1,beta} = |beta| c_{n,beta} + sum_i c_{n,beta-e_i}.
class XGradTable {
  public:
    XGradTable(int d, int n_max) : d_(d) {
        terms_.resize(n_max + 1);
        std::map<MultiIndex, double> cur;
        cur[mi_zero(d)] = 1.0;
        store(0, cur);
        for (int n = 1; n <= n_max; ++n) {
            std::map<MultiIndex, double> nxt;
            for (const auto& [a, c] : cur) {
                const int o = mi_order(a);
                if (o > 0) nxt[a] += double(o) * c;
                for (int i = 0; i < d; ++i) nxt[mi_add(a, mi_unit(d, i))] += c;
            }
            store(n, nxt);
            cur = std::move(nxt);
        }
    }

    struct Term {
        MultiIndex alpha;
        double coeff;
    };

    const std::vector<Term>& terms(int n) const { return terms_.at(n); }
    int dim() const { return d_; }

  private:
    void store(int n, const std::map<MultiIndex, double>& m) {
        for (const auto& [a, c] : m) terms_[n].push_back({a, c});
    }
    int d_;
    std::vector<std::vector<Term>> terms_;
};

}  // namespace specres
