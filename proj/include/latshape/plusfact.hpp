#pragma once

// PLUS factorization Q = P * D_R * L * U * S0 and the integer-to-integer
// reversible maps built on elementary reversible matrices (TERM / SERM).
//
// Every map rounds real and imaginary parts independently with
// round-half-away-from-zero. The forward and inverse maps evaluate the
// rounded sums through the same helper, so they stay bit-identical.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latshape/error.hpp"

namespace latshape {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct GaussInt {
    std::int64_t re = 0;
    std::int64_t im = 0;

    constexpr GaussInt() = default;
    constexpr GaussInt(std::int64_t r, std::int64_t i = 0) : re(r), im(i) {}

    cplx to_complex() const { return {static_cast<double>(re), static_cast<double>(im)}; }
    constexpr GaussInt conj() const { return {re, -im}; }

    friend constexpr bool operator==(GaussInt a, GaussInt b) { return a.re == b.re && a.im == b.im; }
    friend constexpr GaussInt operator+(GaussInt a, GaussInt b) { return {a.re + b.re, a.im + b.im}; }
    friend constexpr GaussInt operator-(GaussInt a, GaussInt b) { return {a.re - b.re, a.im - b.im}; }
    friend constexpr GaussInt operator*(GaussInt a, GaussInt b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
};

using IntVec = std::vector<GaussInt>;

inline std::int64_t round_half_away(double v) { return std::llround(v); }

inline GaussInt round_components(cplx z) { return {round_half_away(z.real()), round_half_away(z.imag())}; }

inline bool is_unit(GaussInt u) { return std::abs(u.re) + std::abs(u.im) == 1; }

inline CVector to_cvector(const IntVec& v) {
    CVector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].to_complex();
    return out;
}

enum class TermKind { lower, upper, serm };

inline const char* term_kind_name(TermKind k) {
    switch (k) {
        case TermKind::lower: return "lower";
        case TermKind::upper: return "upper";
        case TermKind::serm: return "serm";
    }
    return "?";
}

// Triangular (TERM) or single-row (SERM) elementary reversible matrix. The
// diagonal holds units j_m in {+1, -1, +i, -i}; off-diagonal entries are
// arbitrary complex numbers confined to one triangle or to one row.
class TermFactor {
public:
    TermFactor(TermKind kind, CMatrix off_diagonal, std::vector<GaussInt> diagonal = {}, std::size_t row = 0)
        : kind_(kind), a_(std::move(off_diagonal)), diag_(std::move(diagonal)), row_(row) {
        const auto n = static_cast<std::size_t>(a_.rows());
        if (n == 0 || a_.cols() != a_.rows()) throw Error(Errc::dimension, "TERM factor must be square and non-empty");
        if (diag_.empty()) diag_.assign(n, GaussInt{1, 0});
        if (diag_.size() != n) throw Error(Errc::dimension, "TERM diagonal length mismatch");
        for (auto u : diag_)
            if (!is_unit(u)) throw Error(Errc::factorization, "TERM diagonal entries must be +-1 or +-i");
        if (kind_ == TermKind::serm && row_ >= n) throw Error(Errc::dimension, "SERM row out of range");
        for (std::size_t m = 0; m < n; ++m) {
            a_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                if (a_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) != cplx{} && !allowed(m, k))
                    throw Error(Errc::factorization, std::string("entry outside the ") + term_kind_name(kind_) + " pattern");
        }
    }

    static TermFactor identity(TermKind kind, std::size_t n, std::size_t row = 0) {
        return TermFactor(kind, CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), {}, row);
    }

    TermKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(a_.rows()); }
    std::size_t row() const noexcept { return row_; }
    const CMatrix& off_diagonal() const noexcept { return a_; }
    const std::vector<GaussInt>& diagonal() const noexcept { return diag_; }

    cplx coeff(std::size_t m, std::size_t n) const {
        return a_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    }

    bool is_unit_diagonal() const {
        return std::all_of(diag_.begin(), diag_.end(), [](GaussInt u) { return u == GaussInt{1, 0}; });
    }

    CMatrix matrix() const {
        CMatrix out = a_;
        for (std::size_t m = 0; m < size(); ++m)
            out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = diag_[m].to_complex();
        return out;
    }

    bool allowed(std::size_t m, std::size_t n) const {
        switch (kind_) {
            case TermKind::lower: return n < m;
            case TermKind::upper: return n > m;
            case TermKind::serm: return m == row_ && n != m;
        }
        return false;
    }

private:
    TermKind kind_;
    CMatrix a_;
    std::vector<GaussInt> diag_;
    std::size_t row_;
};

namespace detail {

// [sum_{n in pattern of row m} a_mn s_n], rounded per component.
inline GaussInt lifted_sum(const TermFactor& f, std::size_t m, const IntVec& s) {
    cplx acc{0.0, 0.0};
    const std::size_t n = f.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (!f.allowed(m, k)) continue;
        const cplx a = f.coeff(m, k);
        if (a == cplx{}) continue;
        acc += a * s[k].to_complex();
    }
    return round_components(acc);
}

inline void require_length(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got)
        throw Error(Errc::dimension, std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                                         std::to_string(got));
}

}  // namespace detail

inline IntVec term_forward(const TermFactor& f, const IntVec& s) {
    detail::require_length(f.size(), s.size(), "term_forward");
    IntVec y(s.size());
    for (std::size_t m = 0; m < s.size(); ++m) {
        const bool lifted = f.kind() != TermKind::serm || m == f.row();
        y[m] = f.diagonal()[m] * s[m];
        if (lifted) y[m] = y[m] + detail::lifted_sum(f, m, s);
    }
    return y;
}

inline IntVec term_inverse(const TermFactor& f, const IntVec& y) {
    detail::require_length(f.size(), y.size(), "term_inverse");
    const std::size_t n = y.size();
    IntVec s(n);
    // 1/j_m == conj(j_m) for a unit.
    auto undo = [&](std::size_t m) { s[m] = f.diagonal()[m].conj() * (y[m] - detail::lifted_sum(f, m, s)); };
    switch (f.kind()) {
        case TermKind::upper:
            for (std::size_t m = n; m-- > 0;) undo(m);
            break;
        case TermKind::lower:
            for (std::size_t m = 0; m < n; ++m) undo(m);
            break;
        case TermKind::serm:
            for (std::size_t m = 0; m < n; ++m)
                if (m != f.row()) s[m] = f.diagonal()[m].conj() * y[m];
            undo(f.row());
            break;
    }
    return s;
}

// Monomial matrix with unit entries: (P v)[r] = phase[r] * v[source[r]].
struct SignedPermutation {
    std::vector<std::size_t> source;
    std::vector<GaussInt> phase;

    static SignedPermutation identity(std::size_t n) {
        SignedPermutation p;
        p.source.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.source[i] = i;
        p.phase.assign(n, GaussInt{1, 0});
        return p;
    }

    std::size_t size() const noexcept { return source.size(); }

    IntVec apply(const IntVec& v) const {
        detail::require_length(size(), v.size(), "permutation");
        IntVec out(v.size());
        for (std::size_t r = 0; r < v.size(); ++r) out[r] = phase[r] * v[source[r]];
        return out;
    }

    IntVec apply_inverse(const IntVec& w) const {
        detail::require_length(size(), w.size(), "permutation");
        IntVec out(w.size());
        for (std::size_t r = 0; r < w.size(); ++r) out[source[r]] = phase[r].conj() * w[r];
        return out;
    }

    CMatrix matrix() const {
        const auto n = static_cast<Eigen::Index>(size());
        CMatrix m = CMatrix::Zero(n, n);
        for (std::size_t r = 0; r < size(); ++r)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(source[r])) = phase[r].to_complex();
        return m;
    }
};

// The three unit TERMs whose product is the real 2x2 rotation by theta:
// [[1,0],[t,1]] * [[1,-sin],[0,1]] * [[1,0],[t,1]], t = (1 - cos) / sin.
// Returned in product order (leftmost first).
inline std::vector<TermFactor> rotation_terms(double theta) {
    const double s = std::sin(theta);
    if (std::abs(s) < 1e-300) throw Error(Errc::factorization, "rotation by a multiple of pi has no lifting form");
    const double t = (1.0 - std::cos(theta)) / s;
    CMatrix lower = CMatrix::Zero(2, 2);
    lower(1, 0) = t;
    CMatrix upper = CMatrix::Zero(2, 2);
    upper(0, 1) = -s;
    return {TermFactor(TermKind::lower, lower), TermFactor(TermKind::upper, upper),
            TermFactor(TermKind::lower, lower)};
}

// diag(1, ..., 1, e^{i theta}) realised as a lifted rotation of the
// (re, im) pair of one component.
class PhaseRotation {
public:
    PhaseRotation(std::size_t index, double theta) : index_(index), theta_(theta), terms_(rotation_terms(theta)) {}

    std::size_t index() const noexcept { return index_; }
    double theta() const noexcept { return theta_; }
    const std::vector<TermFactor>& terms() const noexcept { return terms_; }

    IntVec forward(IntVec v) const {
        IntVec pair{GaussInt{v[index_].re}, GaussInt{v[index_].im}};
        for (std::size_t k = terms_.size(); k-- > 0;) pair = term_forward(terms_[k], pair);
        v[index_] = GaussInt{pair[0].re, pair[1].re};
        return v;
    }

    IntVec inverse(IntVec v) const {
        IntVec pair{GaussInt{v[index_].re}, GaussInt{v[index_].im}};
        for (const auto& t : terms_) pair = term_inverse(t, pair);
        v[index_] = GaussInt{pair[0].re, pair[1].re};
        return v;
    }

    // Worst-case |error| of the three rounded lifting steps on the rotated
    // component, in units of the per-step rounding error bound.
    double error_gain() const {
        const double t = terms_[0].coeff(1, 0).real();
        const double s = -terms_[1].coeff(0, 1).real();
        // steps (applied right to left): im += [t re]; re += [-s im]; im += [t re]
        const double e_re = std::abs(s) + 1.0;
        const double e_im = std::abs(1.0 - t * s) + std::abs(t) + 1.0;
        return std::hypot(e_re, e_im);
    }

private:
    std::size_t index_;
    double theta_;
    std::vector<TermFactor> terms_;
};

struct PlusFactorization {
    SignedPermutation P;
    std::optional<PhaseRotation> rotation;
    TermFactor L;
    TermFactor U;
    TermFactor S0;

    std::size_t size() const noexcept { return P.size(); }

    CMatrix product() const {
        CMatrix dr = CMatrix::Identity(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        if (rotation) {
            const auto k = static_cast<Eigen::Index>(rotation->index());
            dr(k, k) = std::polar(1.0, rotation->theta());
        }
        return P.matrix() * dr * L.matrix() * U.matrix() * S0.matrix();
    }

    // Componentwise bound on |plus_forward(s) - Q s|, propagating a rounding
    // error of at most `unit` (1/2 for real data, sqrt(2)/2 for complex) per
    // lifted component through the later stages.
    Eigen::VectorXd rounding_bound(bool complex_data) const {
        const double unit = complex_data ? std::sqrt(0.5) : 0.5;
        const auto n = static_cast<Eigen::Index>(size());
        auto lifted_rows = [&](const TermFactor& f) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            for (Eigen::Index m = 0; m < n; ++m)
                for (Eigen::Index k = 0; k < n; ++k)
                    if (f.off_diagonal()(m, k) != cplx{}) e(m) = unit;
            return e;
        };
        const Eigen::MatrixXd abs_l = L.matrix().cwiseAbs();
        const Eigen::MatrixXd abs_lu = (L.matrix() * U.matrix()).cwiseAbs();
        Eigen::VectorXd e = lifted_rows(L) + abs_l * lifted_rows(U) + abs_lu * lifted_rows(S0);
        if (rotation) e(static_cast<Eigen::Index>(rotation->index())) += 0.5 * rotation->error_gain();
        Eigen::VectorXd out(n);
        for (std::size_t r = 0; r < size(); ++r) out(static_cast<Eigen::Index>(r)) = e(static_cast<Eigen::Index>(P.source[r]));
        return out;
    }
};

// s~ = P[D_R[L[U[S0 s]]]]
inline IntVec plus_forward(const PlusFactorization& pf, const IntVec& s) {
    detail::require_length(pf.size(), s.size(), "plus_forward");
    IntVec v = term_forward(pf.S0, s);
    v = term_forward(pf.U, v);
    v = term_forward(pf.L, v);
    if (pf.rotation) v = pf.rotation->forward(std::move(v));
    return pf.P.apply(v);
}

inline IntVec plus_inverse(const PlusFactorization& pf, const IntVec& y) {
    detail::require_length(pf.size(), y.size(), "plus_inverse");
    IntVec v = pf.P.apply_inverse(y);
    if (pf.rotation) v = pf.rotation->inverse(std::move(v));
    v = term_inverse(pf.L, v);
    v = term_inverse(pf.U, v);
    return term_inverse(pf.S0, v);
}

struct PlusOptions {
    double det_tolerance = 1e-6;
    double pivot_tolerance = 1e-10;
};

// Factorizes a unit-modulus-determinant matrix. Rows are chosen greedily: at
// step k the row whose SERM coefficient s_k (forcing the k-th leading minor
// of Q S0^{-1} to 1) is smallest in modulus becomes pivot, ties going to the
// larger Schur pivot.
inline PlusFactorization plus_factorize(const CMatrix& q, PlusOptions opt = {}) {
    const Eigen::Index n = q.rows();
    if (n == 0 || q.cols() != n) throw Error(Errc::dimension, "plus_factorize: matrix must be square");
    const cplx d_in = q.fullPivLu().determinant();
    if (std::abs(std::abs(d_in) - 1.0) > opt.det_tolerance)
        throw Error(Errc::normalization, "plus_factorize: |det| = " + std::to_string(std::abs(d_in)) + ", expected 1");

    // Right-looking elimination on W = rows of Q in pivot order. Step k picks
    // a free row r, sets s_k so that W(r, k) - s_k W(r, last) = 1, applies the
    // same column update to every free row and eliminates column k.
    const Eigen::Index last = n - 1;
    CMatrix w = q;
    CMatrix lo = CMatrix::Identity(n, n), up = CMatrix::Zero(n, n);
    CVector serm = CVector::Zero(n);
    std::vector<Eigen::Index> order;
    std::vector<bool> used(static_cast<std::size_t>(n), false);

    for (Eigen::Index k = 0; k < last; ++k) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index r = 0; r < n; ++r)
            if (!used[static_cast<std::size_t>(r)]) rows.push_back(r);
        // Score: worst coefficient produced by this choice (s_k, the new L
        // column and the new U row).
        Eigen::Index best = -1;
        double best_score = std::numeric_limits<double>::infinity();
        double best_beta = 0.0;
        cplx best_s{};
        for (Eigen::Index r : rows) {
            const cplx alpha = w(r, k), beta = w(r, last);
            cplx s;
            if (std::abs(beta) > opt.pivot_tolerance)
                s = (alpha - 1.0) / beta;
            else if (std::abs(alpha - 1.0) <= opt.pivot_tolerance)
                s = 0.0;
            else
                continue;
            double score = std::abs(s);
            for (Eigen::Index j = k + 1; j < n; ++j) score = std::max(score, std::abs(w(r, j)));
            for (Eigen::Index i : rows)
                if (i != r) score = std::max(score, std::abs(w(i, k) - s * w(i, last)));
            if (score < best_score - 1e-12 || (std::abs(score - best_score) <= 1e-12 && std::abs(beta) > best_beta)) {
                best = r;
                best_score = score;
                best_beta = std::abs(beta);
                best_s = s;
            }
        }
        if (best < 0) throw Error(Errc::factorization, "plus_factorize: no admissible pivot at step " + std::to_string(k));
        order.push_back(best);
        used[static_cast<std::size_t>(best)] = true;
        serm(k) = best_s;
        for (Eigen::Index i : rows) w(i, k) -= best_s * w(i, last);
        for (Eigen::Index p = 0; p < k; ++p) up(p, k) -= best_s * up(p, last);
        w(best, k) = 1.0;
        for (Eigen::Index j = k + 1; j < n; ++j) up(k, j) = w(best, j);
        for (Eigen::Index i : rows) {
            if (i == best) continue;
            const cplx l = w(i, k);
            w(i, k) = 0.0;
            for (Eigen::Index j = k + 1; j < n; ++j) w(i, j) -= l * w(best, j);
            // L multipliers are stored against the original row index and
            // moved into pivot order once the order is complete.
            lo(i, k) = l;
        }
    }
    for (Eigen::Index r = 0; r < n; ++r)
        if (!used[static_cast<std::size_t>(r)]) order.push_back(r);
    const Eigen::Index tail = order.back();
    const cplx d0 = w(tail, last);

    // Split the determinant phase into a unit (folded into P) and a residual
    // rotation with |theta| <= pi/4.
    static const GaussInt units[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    GaussInt unit{1, 0};
    double theta = 0.0;
    {
        double best = std::numeric_limits<double>::infinity();
        for (GaussInt u : units) {
            const double t = std::arg(d0 / u.to_complex());
            if (std::abs(t) < best) {
                best = std::abs(t);
                unit = u;
                theta = t;
            }
        }
    }
    if (std::abs(theta) < 1e-14) theta = 0.0;
    if (std::abs(std::abs(d0) - 1.0) > 1e-6)
        throw Error(Errc::factorization, "plus_factorize: final pivot drifted from unit modulus");
    // Scaling the last row by c = 1/d0 scales its L multipliers by the same c.
    const cplx c = std::conj(unit.to_complex()) * std::polar(1.0 / std::abs(d0), -theta);
    {
        CMatrix perm_lo = CMatrix::Identity(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index r = order[static_cast<std::size_t>(i)];
            for (Eigen::Index k = 0; k < i; ++k) perm_lo(i, k) = lo(r, k);
        }
        perm_lo.row(last) *= c;
        perm_lo(last, last) = 1.0;
        lo = std::move(perm_lo);
    }
    lo.diagonal().setZero();
    up.diagonal().setZero();
    CMatrix s0 = CMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < last; ++j) s0(last, j) = serm(j);

    SignedPermutation p;
    p.source.assign(static_cast<std::size_t>(n), 0);
    p.phase.assign(static_cast<std::size_t>(n), GaussInt{1, 0});
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto r = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
        p.source[r] = static_cast<std::size_t>(k);
        if (k == last) p.phase[r] = unit;
    }
    std::optional<PhaseRotation> rot;
    if (theta != 0.0) rot.emplace(static_cast<std::size_t>(last), theta);
    return PlusFactorization{std::move(p), std::move(rot), TermFactor(TermKind::lower, lo), TermFactor(TermKind::upper, up),
                             TermFactor(TermKind::serm, s0, {}, static_cast<std::size_t>(last))};
}

// ---------------------------------------------------------------------------
// JSON: complex numbers are [re, im] pairs.

inline nlohmann::json complex_to_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

inline cplx complex_from_json(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
    throw Error(Errc::schema, "expected a number or an [re, im] pair");
}

inline nlohmann::json cmatrix_to_json(const CMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline CMatrix cmatrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(Errc::schema, "matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    CMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw Error(Errc::schema, "ragged matrix rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)]);
    }
    return m;
}

inline nlohmann::json gauss_to_json(GaussInt g) { return nlohmann::json::array({g.re, g.im}); }

inline GaussInt gauss_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return {j.get<std::int64_t>(), 0};
    if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer())
        return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
    throw Error(Errc::schema, "expected an integer or an [re, im] integer pair");
}

inline nlohmann::json to_json(const TermFactor& f) {
    nlohmann::json diag = nlohmann::json::array();
    for (auto u : f.diagonal()) diag.push_back(gauss_to_json(u));
    nlohmann::json j{{"kind", term_kind_name(f.kind())}, {"size", f.size()}, {"diagonal", diag},
                     {"entries", cmatrix_to_json(f.off_diagonal())}};
    if (f.kind() == TermKind::serm) j["row"] = f.row();
    return j;
}

inline TermFactor term_factor_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    TermKind k;
    if (kind == "lower")
        k = TermKind::lower;
    else if (kind == "upper")
        k = TermKind::upper;
    else if (kind == "serm")
        k = TermKind::serm;
    else
        throw Error(Errc::schema, "unknown TERM kind '" + kind + "'");
    std::vector<GaussInt> diag;
    for (const auto& u : j.at("diagonal")) diag.push_back(gauss_from_json(u));
    return TermFactor(k, cmatrix_from_json(j.at("entries")), std::move(diag), j.value("row", std::size_t{0}));
}

inline nlohmann::json to_json(const PlusFactorization& pf) {
    nlohmann::json phase = nlohmann::json::array();
    for (auto u : pf.P.phase) phase.push_back(gauss_to_json(u));
    nlohmann::json j{{"schema", "latshape/plus@1"},
                     {"size", pf.size()},
                     {"P", {{"source", pf.P.source}, {"phase", phase}}},
                     {"L", to_json(pf.L)},
                     {"U", to_json(pf.U)},
                     {"S0", to_json(pf.S0)}};
    if (pf.rotation)
        j["rotation"] = {{"index", pf.rotation->index()}, {"theta", pf.rotation->theta()}};
    else
        j["rotation"] = nullptr;
    return j;
}

inline PlusFactorization plus_factorization_from_json(const nlohmann::json& j) {
    SignedPermutation p;
    p.source = j.at("P").at("source").get<std::vector<std::size_t>>();
    for (const auto& u : j.at("P").at("phase")) p.phase.push_back(gauss_from_json(u));
    if (p.phase.size() != p.source.size()) throw Error(Errc::schema, "permutation phase/source length mismatch");
    std::vector<bool> seen(p.source.size(), false);
    for (auto s : p.source) {
        if (s >= seen.size() || seen[s]) throw Error(Errc::schema, "P.source is not a permutation");
        seen[s] = true;
    }
    std::optional<PhaseRotation> rot;
    if (j.contains("rotation") && !j["rotation"].is_null())
        rot.emplace(j["rotation"].at("index").get<std::size_t>(), j["rotation"].at("theta").get<double>());
    PlusFactorization pf{std::move(p), std::move(rot), term_factor_from_json(j.at("L")), term_factor_from_json(j.at("U")),
                         term_factor_from_json(j.at("S0"))};
    const std::size_t n = pf.size();
    if (pf.L.size() != n || pf.U.size() != n || pf.S0.size() != n)
        throw Error(Errc::schema, "factor sizes disagree");
    if (pf.L.kind() != TermKind::lower || pf.U.kind() != TermKind::upper || pf.S0.kind() != TermKind::serm)
        throw Error(Errc::schema, "factor kinds must be lower/upper/serm");
    return pf;
}

}  // namespace latshape
