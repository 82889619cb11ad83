#pragma once

// Approximate cubic shaping codecs.
//
// Lattice points are integer vectors of dimension M: the complex symbols of a
// layer stacked as [Re; Im] (M = 2m), or the symbols themselves when the
// scheme is real (M = m). The transmitted signal is x = G (s~ - offset).
//
//   none  s~ = s, the data vector itself (unshaped reference)
//   hnf   Q = round(sigma~ G'^-1) = R V; s~ is the representative of the
//         coset s + Q Z^M inside the parallelotope Q [0,1)^M
//   plus  Q = G^-1 |det G|^(1/m); s~ = P[D_R[L[U[S0 s]]]] ~ Q s
//
// Data words are M digits in [0, sigma). HNF indexes them as the integer
// I = sum d_k sigma^k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latshape/error.hpp"
#include "latshape/exactmat.hpp"
#include "latshape/plusfact.hpp"
#include "latshape/rng.hpp"
#include "latshape/stcode.hpp"

namespace latshape {

using LatticeVec = std::vector<std::int64_t>;

enum class ShapingMode { none, hnf, plus };

inline const char* mode_name(ShapingMode m) {
    switch (m) {
        case ShapingMode::none: return "none";
        case ShapingMode::hnf: return "hnf";
        case ShapingMode::plus: return "plus";
    }
    return "?";
}

inline ShapingMode parse_mode(const std::string& s) {
    if (s == "none") return ShapingMode::none;
    if (s == "hnf") return ShapingMode::hnf;
    if (s == "plus") return ShapingMode::plus;
    throw Error(Errc::config, "unknown shaping mode '" + s + "' (expected hnf, plus or none)");
}

struct SchemeOptions {
    bool real = false;      // G and the data are real
    bool center = true;     // subtract the mean lattice point before G
    double search_start = 0.75;  // sigma~ scan starts at this fraction of sigma |det G'|^(1/M)
    std::size_t max_breakpoints = 2'000'000;
    std::size_t max_tie_bits = 16;  // exhaustive tie resolution up to 2^16 candidates
    std::size_t offset_samples = 1u << 16;
};

namespace detail {

using i128 = __int128;

inline i128 floor_div(i128 a, i128 b) {
    i128 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline bool fits(const BigInt& v, int bits) {
    return mpz_sizeinbase(v.get_mpz_t(), 2) < static_cast<std::size_t>(bits);
}

}  // namespace detail

// Integer data for the HNF codec, with an int64/int128 copy when the numbers
// are small enough.
struct HnfCodec {
    ExactIntMatrix Q;
    HnfDecomposition hnf;
    Adjugate inv;  // Q^-1 = adj / det
    BigInt volume;  // det R = |det Q|

    bool fast = false;
    std::size_t n = 0;
    std::vector<std::int64_t> q, r, adj;  // row-major
    std::int64_t det = 0;

    explicit HnfCodec(ExactIntMatrix qm) : Q(std::move(qm)), hnf(hnf_decompose(Q)), inv(adjugate(Q)), volume(abs(inv.det)) {
        n = Q.rows();
        fast = detail::fits(inv.det, 50);
        for (std::size_t i = 0; i < n && fast; ++i)
            for (std::size_t j = 0; j < n && fast; ++j)
                fast = detail::fits(Q(i, j), 30) && detail::fits(hnf.R(i, j), 50) && detail::fits(inv.adj(i, j), 50);
        if (!fast) return;
        q.resize(n * n);
        r.resize(n * n);
        adj.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                q[i * n + j] = Q(i, j).get_si();
                r[i * n + j] = hnf.R(i, j).get_si();
                adj[i * n + j] = inv.adj(i, j).get_si();
            }
        det = inv.det.get_si();
    }
};

// Coset leader of index I for lower-triangular R: s_i = I mod r_ii, I <- I div r_ii.
inline BigVector coset_leader(const ExactIntMatrix& R, const BigInt& index) {
    BigVector s(R.rows());
    BigInt rest = index;
    for (std::size_t i = 0; i < R.rows(); ++i) {
        mpz_fdiv_qr(rest.get_mpz_t(), s[i].get_mpz_t(), rest.get_mpz_t(), R(i, i).get_mpz_t());
    }
    return s;
}

// Index of the coset of s~ (any representative), top-down through R.
inline BigInt coset_index(const ExactIntMatrix& R, const BigVector& s_tilde) {
    const std::size_t n = R.rows();
    if (s_tilde.size() != n) throw Error(Errc::dimension, "coset_index: length mismatch");
    BigVector qv(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
        BigInt t = s_tilde[i];
        for (std::size_t j = 0; j < i; ++j) t -= R(i, j) * qv[j];
        mpz_fdiv_qr(qv[i].get_mpz_t(), s[i].get_mpz_t(), t.get_mpz_t(), R(i, i).get_mpz_t());
    }
    BigInt index = 0;
    for (std::size_t i = n; i-- > 0;) index = index * R(i, i) + s[i];
    return index;
}

struct ShapingScheme {
    ShapingMode mode = ShapingMode::none;
    CMatrix G;
    bool real = false;
    std::int64_t sigma = 2;
    double sigma_tilde = 1.0;
    RMatrix lattice_G;  // M x M real generator acting on lattice vectors
    std::optional<HnfCodec> hnf;
    CMatrix Qc;  // PLUS shaping matrix (m x m)
    std::optional<PlusFactorization> plus;
    RVector offset;  // lattice-domain translation, length M

    std::size_t m() const { return static_cast<std::size_t>(G.rows()); }
    std::size_t dim() const { return real ? m() : 2 * m(); }

    // Number of data words, sigma^M.
    BigInt data_size() const {
        BigInt v;
        mpz_ui_pow_ui(v.get_mpz_t(), static_cast<unsigned long>(sigma), static_cast<unsigned long>(dim()));
        return v;
    }
};

inline ExactIntMatrix round_matrix(const RMatrix& a) {
    ExactIntMatrix out(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = BigInt(std::to_string(round_half_away(a(i, j))));
    return out;
}

// Smallest scale sigma~ at which some entrywise rounding of sigma~ Ginv
// (every |Q_ij - sigma~ Ginv_ij| <= 1/2) has |det| >= target.
//
// Rounding only changes where sigma~ |Ginv_ij| crosses k + 1/2, so the scan
// walks those breakpoints upward. At a breakpoint the tied entries may round
// either way; when few enough entries tie, every up/down choice is tried and
// the admissible one with the smallest |det| wins. Otherwise (and between
// breakpoints) plain round-half-away is used.
struct ScaleSearch {
    double sigma_tilde;
    ExactIntMatrix Q;
};

inline ScaleSearch search_sigma_tilde(const RMatrix& ginv, const BigInt& target, double start, std::size_t max_breakpoints,
                                      std::size_t max_tie_bits = 16) {
    std::vector<double> g;
    for (Eigen::Index i = 0; i < ginv.size(); ++i)
        if (std::abs(ginv.data()[i]) > 1e-300) g.push_back(std::abs(ginv.data()[i]));
    if (g.empty()) throw Error(Errc::singular, "shaping: generator inverse is zero");
    constexpr double tie_tol = 1e-9;
    auto next_break = [&](double x) {
        double best = std::numeric_limits<double>::infinity();
        for (double a : g) {
            // Entries of equal magnitude share breakpoints; anything within
            // rounding of x counts as already passed.
            const double k = std::floor(x * a - 0.5) + 1.0;
            double bp = (k + 0.5) / a;
            if (bp <= x * (1.0 + 1e-12)) bp = (k + 1.5) / a;
            best = std::min(best, bp);
        }
        return best;
    };
    auto admissible = [&](const ExactIntMatrix& q, BigInt& d) {
        d = abs(det(q));
        return d != 0 && d >= target;
    };
    double x = 0.0;
    for (double a : g) {
        const double k = std::floor(start * a - 0.5);
        if (k >= 0) x = std::max(x, (k + 0.5) / a);
    }
    const auto rows = static_cast<std::size_t>(ginv.rows());
    for (std::size_t it = 0; it < max_breakpoints; ++it) {
        // Ties at x: |x Ginv_ij| = k + 1/2.
        const RMatrix v = x * ginv;
        ExactIntMatrix base = round_matrix(v);
        std::vector<std::pair<std::size_t, std::size_t>> ties;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < rows; ++j) {
                const double a = std::abs(v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                const double frac = a - std::floor(a);
                if (a > 0.25 && std::abs(frac - 0.5) <= tie_tol * std::max(1.0, a)) {
                    ties.push_back({i, j});
                    const long down = static_cast<long>(std::floor(a));
                    base(i, j) = v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < 0 ? -down : down;
                }
            }
        if (!ties.empty() && ties.size() <= max_tie_bits) {
            std::optional<ExactIntMatrix> best;
            BigInt best_det;
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << ties.size()); ++mask) {
                ExactIntMatrix q = base;
                for (std::size_t t = 0; t < ties.size(); ++t) {
                    if (!((mask >> t) & 1)) continue;
                    auto [i, j] = ties[t];
                    q(i, j) += v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < 0 ? -1 : 1;
                }
                BigInt d;
                if (admissible(q, d) && (!best || d < best_det)) {
                    best = std::move(q);
                    best_det = d;
                }
            }
            if (best) return {x, std::move(*best)};
        }
        const double hi = next_break(x);
        const double mid = 0.5 * (x + hi);
        ExactIntMatrix q = round_matrix(mid * ginv);
        BigInt d;
        if (admissible(q, d)) return {mid, std::move(q)};
        x = hi;
    }
    throw Error(Errc::construction, "shaping: sigma~ search exceeded the breakpoint cap");
}

inline LatticeVec random_digits(std::mt19937_64& rng, std::size_t n, std::int64_t sigma) {
    std::uniform_int_distribution<std::int64_t> d(0, sigma - 1);
    LatticeVec v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline BigInt digits_to_index(const LatticeVec& digits, std::int64_t sigma) {
    BigInt index = 0;
    for (std::size_t i = digits.size(); i-- > 0;) index = index * static_cast<long>(sigma) + static_cast<long>(digits[i]);
    return index;
}

inline LatticeVec index_to_digits(BigInt index, std::int64_t sigma, std::size_t n) {
    LatticeVec out(n);
    const BigInt b = static_cast<long>(sigma);
    for (std::size_t i = 0; i < n; ++i) {
        BigInt d;
        mpz_fdiv_qr(index.get_mpz_t(), d.get_mpz_t(), index.get_mpz_t(), b.get_mpz_t());
        out[i] = d.get_si();
    }
    if (index != 0) throw Error(Errc::range, "index_to_digits: index exceeds sigma^n");
    return out;
}

// ---------------------------------------------------------------------------
// HNF codec

inline LatticeVec hnf_encode(const ShapingScheme& sc, const BigInt& index) {
    if (sc.mode != ShapingMode::hnf || !sc.hnf) throw Error(Errc::config, "hnf_encode: scheme is not in HNF mode");
    const HnfCodec& h = *sc.hnf;
    if (index < 0 || index >= h.volume) throw Error(Errc::range, "hnf_encode: data index outside [0, det R)");
    const std::size_t n = h.n;
    LatticeVec out(n);
    if (h.fast && index.fits_slong_p()) {
        using detail::i128;
        std::vector<std::int64_t> s(n);
        std::int64_t rest = index.get_si();
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t rii = h.r[i * n + i];
            s[i] = rest % rii;
            rest /= rii;
        }
        std::vector<i128> gamma(n);
        for (std::size_t i = 0; i < n; ++i) {
            i128 acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += static_cast<i128>(h.adj[i * n + j]) * s[j];
            gamma[i] = detail::floor_div(acc, h.det);
        }
        for (std::size_t i = 0; i < n; ++i) {
            i128 acc = s[i];
            for (std::size_t j = 0; j < n; ++j) acc -= static_cast<i128>(h.q[i * n + j]) * gamma[j];
            out[i] = static_cast<std::int64_t>(acc);
        }
        return out;
    }
    const BigVector s = coset_leader(h.hnf.R, index);
    BigVector gamma(n);
    for (std::size_t i = 0; i < n; ++i) {
        BigInt acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += h.inv.adj(i, j) * s[j];
        mpz_fdiv_q(gamma[i].get_mpz_t(), acc.get_mpz_t(), h.inv.det.get_mpz_t());
    }
    for (std::size_t i = 0; i < n; ++i) {
        BigInt acc = s[i];
        for (std::size_t j = 0; j < n; ++j) acc -= h.Q(i, j) * gamma[j];
        if (!acc.fits_slong_p()) throw Error(Errc::range, "hnf_encode: lattice point exceeds 64 bits");
        out[i] = acc.get_si();
    }
    return out;
}

inline BigInt hnf_decode(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    if (sc.mode != ShapingMode::hnf || !sc.hnf) throw Error(Errc::config, "hnf_decode: scheme is not in HNF mode");
    const HnfCodec& h = *sc.hnf;
    const std::size_t n = h.n;
    if (s_tilde.size() != n) throw Error(Errc::dimension, "hnf_decode: length mismatch");
    bool small = h.fast;
    for (auto v : s_tilde) small = small && std::llabs(v) < (std::int64_t{1} << 30);
    if (small) {
        using detail::i128;
        std::vector<i128> qv(n);
        std::vector<std::int64_t> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            i128 t = s_tilde[i];
            for (std::size_t j = 0; j < i; ++j) t -= static_cast<i128>(h.r[i * n + j]) * qv[j];
            const std::int64_t rii = h.r[i * n + i];
            qv[i] = detail::floor_div(t, rii);
            s[i] = static_cast<std::int64_t>(t - qv[i] * rii);
        }
        i128 index = 0;
        bool ok = true;
        for (std::size_t i = n; i-- > 0;) {
            index = index * h.r[i * n + i] + s[i];
            if (index > (static_cast<i128>(1) << 100)) ok = false;
        }
        if (ok && index <= std::numeric_limits<std::int64_t>::max()) return BigInt(static_cast<long>(index));
    }
    BigVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<long>(s_tilde[i]);
    return coset_index(h.hnf.R, v);
}

// Q^-1 s~ in [0,1)^M, evaluated exactly.
inline bool in_fundamental_domain(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    const HnfCodec& h = *sc.hnf;
    const BigInt d = abs(h.inv.det);
    const int sign = sgn(h.inv.det);
    for (std::size_t i = 0; i < h.n; ++i) {
        BigInt acc = 0;
        for (std::size_t j = 0; j < h.n; ++j) acc += h.inv.adj(i, j) * static_cast<long>(s_tilde[j]);
        if (sign < 0) acc = -acc;
        if (acc < 0 || acc >= d) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// PLUS codec

inline IntVec lattice_to_gauss(const ShapingScheme& sc, const LatticeVec& v) {
    if (sc.real) {
        IntVec out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = {v[i], 0};
        return out;
    }
    return collapse_real(v);
}

inline LatticeVec gauss_to_lattice(const ShapingScheme& sc, const IntVec& v) {
    if (sc.real) {
        LatticeVec out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].re;
        return out;
    }
    return expand_real(v);
}

inline void check_digits(const ShapingScheme& sc, const LatticeVec& s, const char* what) {
    if (s.size() != sc.dim()) throw Error(Errc::dimension, std::string(what) + ": length mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] < 0 || s[i] >= sc.sigma)
            throw RangeError(i, std::string(what) + ": component " + std::to_string(i) + " = " + std::to_string(s[i]) + " outside [0, " +
                                    std::to_string(sc.sigma) + ")");
}

inline LatticeVec plus_encode(const ShapingScheme& sc, const LatticeVec& s) {
    if (sc.mode != ShapingMode::plus || !sc.plus) throw Error(Errc::config, "plus_encode: scheme is not in PLUS mode");
    check_digits(sc, s, "plus_encode");
    return gauss_to_lattice(sc, plus_forward(*sc.plus, lattice_to_gauss(sc, s)));
}

inline LatticeVec plus_decode(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    if (sc.mode != ShapingMode::plus || !sc.plus) throw Error(Errc::config, "plus_decode: scheme is not in PLUS mode");
    if (s_tilde.size() != sc.dim()) throw Error(Errc::dimension, "plus_decode: length mismatch");
    const LatticeVec s = gauss_to_lattice(sc, plus_inverse(*sc.plus, lattice_to_gauss(sc, s_tilde)));
    check_digits(sc, s, "plus_decode");
    return s;
}

// ---------------------------------------------------------------------------
// Mode-independent entry points on digit vectors

inline LatticeVec encode(const ShapingScheme& sc, const LatticeVec& digits) {
    switch (sc.mode) {
        case ShapingMode::none: check_digits(sc, digits, "encode"); return digits;
        case ShapingMode::plus: return plus_encode(sc, digits);
        case ShapingMode::hnf:
            check_digits(sc, digits, "encode");
            return hnf_encode(sc, digits_to_index(digits, sc.sigma));
    }
    return digits;
}

// Throws RangeError when s~ does not carry a valid data word.
inline LatticeVec decode(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    switch (sc.mode) {
        case ShapingMode::none: check_digits(sc, s_tilde, "decode"); return s_tilde;
        case ShapingMode::plus: return plus_decode(sc, s_tilde);
        case ShapingMode::hnf: {
            const BigInt index = hnf_decode(sc, s_tilde);
            if (index >= sc.data_size()) throw RangeError(0, "decode: coset index outside the data range");
            return index_to_digits(index, sc.sigma, sc.dim());
        }
    }
    return s_tilde;
}

// Membership in the transmitted set {encode(d)}.
inline bool is_region_point(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    if (s_tilde.size() != sc.dim()) return false;
    auto digits_ok = [&](const LatticeVec& s) { return std::all_of(s.begin(), s.end(), [&](std::int64_t v) { return v >= 0 && v < sc.sigma; }); };
    switch (sc.mode) {
        case ShapingMode::none: return digits_ok(s_tilde);
        case ShapingMode::hnf: return in_fundamental_domain(sc, s_tilde) && hnf_decode(sc, s_tilde) < sc.data_size();
        case ShapingMode::plus: return digits_ok(gauss_to_lattice(sc, plus_inverse(*sc.plus, lattice_to_gauss(sc, s_tilde))));
    }
    return false;
}

inline CVector lattice_to_complex(const ShapingScheme& sc, const RVector& v) {
    const auto m = static_cast<Eigen::Index>(sc.m());
    CVector out(m);
    for (Eigen::Index i = 0; i < m; ++i) out(i) = sc.real ? cplx(v(i), 0.0) : cplx(v(i), v(m + i));
    return out;
}

// x = G (s~ - offset).
inline CVector shape_to_signal(const ShapingScheme& sc, const LatticeVec& s_tilde) {
    if (s_tilde.size() != sc.dim()) throw Error(Errc::dimension, "shape_to_signal: length mismatch");
    RVector v(static_cast<Eigen::Index>(s_tilde.size()));
    for (std::size_t i = 0; i < s_tilde.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(s_tilde[i]);
    if (sc.offset.size() == v.size()) v -= sc.offset;
    return sc.G * lattice_to_complex(sc, v);
}

// Componentwise bounds of s~ over all data words (before any guard).
inline std::pair<LatticeVec, LatticeVec> lattice_box(const ShapingScheme& sc) {
    const std::size_t n = sc.dim();
    LatticeVec lo(n, 0), hi(n, sc.sigma - 1);
    if (sc.mode == ShapingMode::hnf) {
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = hi[i] = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const std::int64_t qij = sc.hnf->Q(i, j).get_si();
                (qij < 0 ? lo[i] : hi[i]) += qij;
            }
        }
    } else if (sc.mode == ShapingMode::plus) {
        const RMatrix q = sc.real ? RMatrix(sc.Qc.real()) : expand_real(sc.Qc);
        const RVector bound = sc.plus->rounding_bound(!sc.real);
        const auto m = static_cast<Eigen::Index>(sc.m());
        for (std::size_t i = 0; i < n; ++i) {
            double l = 0.0, h = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * static_cast<double>(sc.sigma - 1);
                (v < 0 ? l : h) += v;
            }
            const double e = bound(static_cast<Eigen::Index>(i) % m);
            lo[i] = static_cast<std::int64_t>(std::floor(l - e));
            hi[i] = static_cast<std::int64_t>(std::ceil(h + e));
        }
    }
    return {lo, hi};
}

inline RVector mean_lattice_point(const ShapingScheme& sc, std::size_t samples) {
    const std::size_t n = sc.dim();
    RVector sum = RVector::Zero(static_cast<Eigen::Index>(n));
    const BigInt total = sc.data_size();
    auto add = [&](const LatticeVec& d) {
        const LatticeVec s = encode(sc, d);
        for (std::size_t i = 0; i < n; ++i) sum(static_cast<Eigen::Index>(i)) += static_cast<double>(s[i]);
    };
    if (total <= static_cast<long>(samples)) {
        const long count = total.get_si();
        for (long k = 0; k < count; ++k) add(index_to_digits(BigInt(k), sc.sigma, n));
        return sum / static_cast<double>(count);
    }
    std::mt19937_64 rng(0x6c617473686170ULL);
    for (std::size_t k = 0; k < samples; ++k) add(random_digits(rng, n, sc.sigma));
    return sum / static_cast<double>(samples);
}

inline ShapingScheme build_scheme(const CMatrix& G, std::int64_t sigma, ShapingMode mode, SchemeOptions opt = {}) {
    if (G.rows() == 0 || G.rows() != G.cols()) throw Error(Errc::dimension, "build_scheme: G must be square");
    if (sigma < 2) throw Error(Errc::config, "build_scheme: sigma must be at least 2");
    if (opt.real && G.imag().cwiseAbs().maxCoeff() > 0.0) throw Error(Errc::config, "build_scheme: real scheme needs a real G");
    Eigen::FullPivLU<CMatrix> lu(G);
    if (lu.rank() < G.rows()) throw Error(Errc::singular, "build_scheme: G is singular");

    ShapingScheme sc;
    sc.mode = mode;
    sc.G = G;
    sc.real = opt.real;
    sc.sigma = sigma;
    sc.lattice_G = opt.real ? RMatrix(G.real()) : expand_real(G);
    const auto M = static_cast<double>(sc.dim());

    if (mode == ShapingMode::hnf) {
        const RMatrix ginv = sc.lattice_G.inverse();
        const double scale = std::pow(std::abs(sc.lattice_G.determinant()), 1.0 / M);
        auto found = search_sigma_tilde(ginv, sc.data_size(), opt.search_start * static_cast<double>(sigma) * scale, opt.max_breakpoints,
                                        opt.max_tie_bits);
        sc.sigma_tilde = found.sigma_tilde;
        sc.hnf.emplace(std::move(found.Q));
    } else if (mode == ShapingMode::plus) {
        if ((sigma & (sigma - 1)) != 0) throw Error(Errc::config, "build_scheme: PLUS mode needs sigma to be a power of two");
        const double c = std::pow(std::abs(lu.determinant()), 1.0 / static_cast<double>(G.rows()));
        sc.sigma_tilde = c;
        sc.Qc = lu.inverse() * c;
        sc.plus = plus_factorize(sc.Qc);
    }
    if (opt.center) {
        if (mode == ShapingMode::none)
            sc.offset = RVector::Constant(static_cast<Eigen::Index>(sc.dim()), 0.5 * static_cast<double>(sigma - 1));
        else
            sc.offset = mean_lattice_point(sc, opt.offset_samples);
    } else {
        sc.offset = RVector::Zero(static_cast<Eigen::Index>(sc.dim()));
    }
    return sc;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ShapingScheme& sc) {
    nlohmann::json j{{"schema", "latshape/scheme@1"},
                     {"mode", mode_name(sc.mode)},
                     {"sigma", sc.sigma},
                     {"real", sc.real},
                     {"G", cmatrix_to_json(sc.G)},
                     {"sigma_tilde", sc.sigma_tilde}};
    j["offset"] = std::vector<double>(sc.offset.data(), sc.offset.data() + sc.offset.size());
    if (sc.hnf) {
        j["Q"] = to_json(sc.hnf->Q);
        j["R"] = to_json(sc.hnf->hnf.R);
        j["V"] = to_json(sc.hnf->hnf.V);
        j["det_R"] = sc.hnf->volume.get_str();
    }
    if (sc.plus) {
        j["Q"] = cmatrix_to_json(sc.Qc);
        j["plus"] = to_json(*sc.plus);
    }
    return j;
}

inline ShapingScheme scheme_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", std::string()) != "latshape/scheme@1")
        throw Error(Errc::schema, "scheme: expected schema latshape/scheme@1");
    for (const char* key : {"mode", "sigma", "G", "offset"})
        if (!j.contains(key)) throw Error(Errc::schema, std::string("scheme: missing field '") + key + "'");
    ShapingScheme sc;
    sc.mode = parse_mode(j["mode"].get<std::string>());
    sc.sigma = j["sigma"].get<std::int64_t>();
    sc.real = j.value("real", false);
    sc.G = cmatrix_from_json(j["G"]);
    sc.sigma_tilde = j.value("sigma_tilde", 1.0);
    if (sc.sigma < 2 || sc.G.rows() != sc.G.cols()) throw Error(Errc::schema, "scheme: invalid sigma or G");
    sc.lattice_G = sc.real ? RMatrix(sc.G.real()) : expand_real(sc.G);
    const auto off = j["offset"].get<std::vector<double>>();
    if (off.size() != sc.dim()) throw Error(Errc::schema, "scheme: offset has the wrong length");
    sc.offset = Eigen::Map<const RVector>(off.data(), static_cast<Eigen::Index>(off.size()));
    if (sc.mode == ShapingMode::hnf) {
        if (!j.contains("Q") || !j.contains("R") || !j.contains("V")) throw Error(Errc::schema, "scheme: HNF mode needs Q, R and V");
        HnfCodec codec(exact_matrix_from_json(j["Q"]));
        if (codec.n != sc.dim()) throw Error(Errc::schema, "scheme: Q has the wrong size");
        if (!(codec.hnf.R == exact_matrix_from_json(j["R"])) || !(codec.hnf.V == exact_matrix_from_json(j["V"])))
            throw Error(Errc::schema, "scheme: stored R, V do not match the HNF of Q");
        if (codec.volume < sc.data_size()) throw Error(Errc::schema, "scheme: det Q is smaller than sigma^M");
        sc.hnf.emplace(std::move(codec));
    } else if (sc.mode == ShapingMode::plus) {
        if (!j.contains("Q") || !j.contains("plus")) throw Error(Errc::schema, "scheme: PLUS mode needs Q and plus");
        sc.Qc = cmatrix_from_json(j["Q"]);
        sc.plus = plus_factorization_from_json(j["plus"]);
        if ((sc.plus->product() - sc.Qc).cwiseAbs().maxCoeff() > 1e-9) throw Error(Errc::schema, "scheme: stored factors do not reproduce Q");
    }
    return sc;
}

// ---------------------------------------------------------------------------
// One scheme per code layer, with the empirical power normalization.

struct LayeredShaper {
    CodeDefinition code;
    std::vector<ShapingScheme> schemes;
    double scale = 1.0;

    std::size_t layer_dim() const { return schemes.front().dim(); }

    CMatrix codeword(const std::vector<LatticeVec>& lattice) const {
        std::vector<CVector> xs;
        xs.reserve(schemes.size());
        for (std::size_t i = 0; i < schemes.size(); ++i) xs.push_back(shape_to_signal(schemes[i], lattice[i]));
        return assemble_codeword(code, xs, scale);
    }

    // Random data words for every layer and their lattice points.
    std::pair<std::vector<LatticeVec>, std::vector<LatticeVec>> random_block(std::mt19937_64& rng) const {
        std::vector<LatticeVec> data, lattice;
        for (const auto& sc : schemes) {
            data.push_back(random_digits(rng, sc.dim(), sc.sigma));
            lattice.push_back(encode(sc, data.back()));
        }
        return {std::move(data), std::move(lattice)};
    }
};

inline double mean_codeword_power(const LayeredShaper& ls, std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng = stream_rng(seed, 0);
    double sum = 0.0;
    for (std::size_t t = 0; t < trials; ++t) sum += ls.codeword(ls.random_block(rng).second).squaredNorm();
    return sum / (static_cast<double>(trials) * static_cast<double>(ls.code.m * ls.code.l));
}

inline constexpr std::uint64_t normalization_seed = 0x6e6f726dULL;

inline LayeredShaper build_layered(const CodeDefinition& code, std::int64_t sigma, ShapingMode mode, SchemeOptions opt = {},
                                   std::size_t normalization_trials = 100000) {
    validate_code(code);
    LayeredShaper ls{code, {}, 1.0};
    for (const auto& layer : code.layers) ls.schemes.push_back(build_scheme(layer.G, sigma, mode, opt));
    if (normalization_trials > 0) ls.scale = 1.0 / std::sqrt(mean_codeword_power(ls, normalization_trials, normalization_seed));
    return ls;
}

}  // namespace latshape
