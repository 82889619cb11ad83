#pragma once

// Exact integer linear algebra on arbitrary-precision integers (GMP).
// Nothing in here touches floating point.

#include <gmpxx.h>

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latshape/error.hpp"

namespace latshape {

using BigInt = mpz_class;
using BigRational = mpq_class;
using BigVector = std::vector<BigInt>;

class ExactIntMatrix {
public:
    ExactIntMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {
        if (rows == 0 || cols == 0) throw Error(Errc::dimension, "matrix must have at least one row and column");
    }

    ExactIntMatrix(std::initializer_list<std::initializer_list<long>> rows)
        : ExactIntMatrix(rows.size(), rows.size() ? rows.begin()->size() : 0) {
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != cols_) throw Error(Errc::dimension, "ragged matrix literal");
            std::size_t c = 0;
            for (long v : row) (*this)(r, c++) = v;
            ++r;
        }
    }

    static ExactIntMatrix identity(std::size_t n) {
        ExactIntMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }

    static ExactIntMatrix diagonal(const std::vector<long>& d) {
        ExactIntMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    BigInt& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const BigInt& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool is_lower_triangular() const {
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = r + 1; c < cols_; ++c)
                if ((*this)(r, c) != 0) return false;
        return true;
    }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
    }

    void swap_cols(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t r = 0; r < rows_; ++r) std::swap((*this)(r, a), (*this)(r, b));
    }

    friend bool operator==(const ExactIntMatrix& a, const ExactIntMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    friend ExactIntMatrix operator*(const ExactIntMatrix& a, const ExactIntMatrix& b) {
        if (a.cols_ != b.rows_) throw Error(Errc::dimension, "matrix product shape mismatch");
        ExactIntMatrix out(a.rows_, b.cols_);
        for (std::size_t r = 0; r < a.rows_; ++r)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const BigInt& ark = a(r, k);
                if (ark == 0) continue;
                for (std::size_t c = 0; c < b.cols_; ++c) out(r, c) += ark * b(k, c);
            }
        return out;
    }

    friend BigVector operator*(const ExactIntMatrix& a, const BigVector& v) {
        if (a.cols_ != v.size()) throw Error(Errc::dimension, "matrix-vector shape mismatch");
        BigVector out(a.rows_);
        for (std::size_t r = 0; r < a.rows_; ++r)
            for (std::size_t c = 0; c < a.cols_; ++c) out[r] += a(r, c) * v[c];
        return out;
    }

    friend std::ostream& operator<<(std::ostream& os, const ExactIntMatrix& m) {
        for (std::size_t r = 0; r < m.rows_; ++r) {
            os << (r ? " [" : "[[");
            for (std::size_t c = 0; c < m.cols_; ++c) os << (c ? ", " : "") << m(r, c).get_str();
            os << (r + 1 == m.rows_ ? "]]" : "]\n");
        }
        return os;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<BigInt> data_;
};

namespace detail {

inline void require_square(const ExactIntMatrix& m, const char* what) {
    if (!m.is_square()) throw Error(Errc::dimension, std::string(what) + ": matrix is not square");
}

}  // namespace detail

// Bareiss fraction-free elimination; every division is exact.
inline BigInt det(const ExactIntMatrix& m) {
    detail::require_square(m, "det");
    const std::size_t n = m.rows();
    ExactIntMatrix a = m;
    BigInt prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a(k, k) == 0) {
            std::size_t p = k + 1;
            while (p < n && a(p, k) == 0) ++p;
            if (p == n) return 0;
            a.swap_rows(k, p);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            for (std::size_t j = k + 1; j < n; ++j) {
                a(i, j) = a(i, j) * a(k, k) - a(i, k) * a(k, j);
                mpz_divexact(a(i, j).get_mpz_t(), a(i, j).get_mpz_t(), prev.get_mpz_t());
            }
            a(i, k) = 0;
        }
        prev = a(k, k);
    }
    BigInt d = a(n - 1, n - 1);
    return sign < 0 ? BigInt(-d) : d;
}

inline bool is_unimodular(const ExactIntMatrix& m) {
    detail::require_square(m, "is_unimodular");
    return abs(det(m)) == 1;
}

// Exact inverse as adj(m) / det(m).
struct Adjugate {
    ExactIntMatrix adj;
    BigInt det;
};

inline Adjugate adjugate(const ExactIntMatrix& m) {
    detail::require_square(m, "adjugate");
    const std::size_t n = m.rows();
    std::vector<BigRational> a(n * 2 * n);
    auto at = [&](std::size_t r, std::size_t c) -> BigRational& { return a[r * 2 * n + c]; };
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) at(r, c) = m(r, c);
        at(r, n + r) = 1;
    }
    BigRational d = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        while (p < n && at(p, k) == 0) ++p;
        if (p == n) throw Error(Errc::singular, "adjugate: matrix is singular");
        if (p != k) {
            for (std::size_t c = 0; c < 2 * n; ++c) std::swap(at(k, c), at(p, c));
            d = -d;
        }
        const BigRational piv = at(k, k);
        d *= piv;
        for (std::size_t c = k; c < 2 * n; ++c) at(k, c) /= piv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == k || at(r, k) == 0) continue;
            const BigRational f = at(r, k);
            for (std::size_t c = k; c < 2 * n; ++c) at(r, c) -= f * at(k, c);
        }
    }
    Adjugate out{ExactIntMatrix(n, n), d.get_num()};
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            BigRational v = at(r, n + c) * d;
            v.canonicalize();
            out.adj(r, c) = v.get_num();
        }
    return out;
}

// Q = R * V with R lower triangular (canonical: positive diagonal,
// 0 <= R[i][j] < R[i][i] for j < i) and V unimodular.
struct HnfDecomposition {
    ExactIntMatrix R;
    ExactIntMatrix V;
};

inline HnfDecomposition hnf_decompose(const ExactIntMatrix& q) {
    detail::require_square(q, "hnf_decompose");
    const std::size_t n = q.rows();
    ExactIntMatrix r = q;
    ExactIntMatrix v = ExactIntMatrix::identity(n);
    // Invariant: r * v == q. A column operation C on r is mirrored by C^-1 on v.
    BigInt g, x, y, a_g, b_g;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = n;
        for (std::size_t j = i; j < n; ++j) {
            if (r(i, j) == 0) continue;
            if (best == n || abs(r(i, j)) < abs(r(i, best))) best = j;
        }
        if (best == n) throw Error(Errc::singular, "hnf_decompose: matrix is singular");
        r.swap_cols(i, best);
        v.swap_rows(i, best);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (r(i, j) == 0) continue;
            const BigInt a = r(i, i);
            const BigInt b = r(i, j);
            mpz_gcdext(g.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
            mpz_divexact(a_g.get_mpz_t(), a.get_mpz_t(), g.get_mpz_t());
            mpz_divexact(b_g.get_mpz_t(), b.get_mpz_t(), g.get_mpz_t());
            // col_i <- x col_i + y col_j ; col_j <- -b/g col_i + a/g col_j
            for (std::size_t k = i; k < n; ++k) {
                const BigInt ci = r(k, i);
                const BigInt cj = r(k, j);
                r(k, i) = x * ci + y * cj;
                r(k, j) = a_g * cj - b_g * ci;
            }
            // row_i <- a/g row_i + b/g row_j ; row_j <- -y row_i + x row_j
            for (std::size_t k = 0; k < n; ++k) {
                const BigInt vi = v(i, k);
                const BigInt vj = v(j, k);
                v(i, k) = a_g * vi + b_g * vj;
                v(j, k) = x * vj - y * vi;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (r(i, i) < 0) {
            for (std::size_t k = i; k < n; ++k) r(k, i) = -r(k, i);
            for (std::size_t k = 0; k < n; ++k) v(i, k) = -v(i, k);
        }
        for (std::size_t j = 0; j < i; ++j) {
            BigInt qt;
            mpz_fdiv_q(qt.get_mpz_t(), r(i, j).get_mpz_t(), r(i, i).get_mpz_t());
            if (qt == 0) continue;
            // col_j <- col_j - qt col_i ; row_i <- row_i + qt row_j
            for (std::size_t k = i; k < n; ++k) r(k, j) -= qt * r(k, i);
            for (std::size_t k = 0; k < n; ++k) v(i, k) += qt * v(j, k);
        }
    }
    return {std::move(r), std::move(v)};
}

// {"rows": n, "cols": n, "data": [[...], ...]}; entries outside int64 are
// written as decimal strings.
inline nlohmann::json to_json(const ExactIntMatrix& m) {
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const BigInt& v = m(r, c);
            if (v.fits_slong_p())
                row.push_back(v.get_si());
            else
                row.push_back(v.get_str());
        }
        data.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline BigInt big_from_json(const nlohmann::json& j) {
    if (j.is_number_unsigned()) return BigInt(std::to_string(j.get<unsigned long long>()));
    if (j.is_number_integer()) return BigInt(std::to_string(j.get<long long>()));
    if (j.is_number_float()) {
        const double d = j.get<double>();
        if (d != static_cast<double>(static_cast<long long>(d))) throw Error(Errc::schema, "non-integer matrix entry");
        return BigInt(std::to_string(static_cast<long long>(d)));
    }
    if (j.is_string()) {
        BigInt v;
        if (v.set_str(j.get<std::string>(), 10) != 0) throw Error(Errc::schema, "malformed integer string");
        return v;
    }
    throw Error(Errc::schema, "matrix entry is not an integer");
}

inline ExactIntMatrix exact_matrix_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("data") || !j["data"].is_array())
        throw Error(Errc::schema, "matrix JSON needs a \"data\" array");
    const auto& data = j["data"];
    const std::size_t rows = data.size();
    if (rows == 0 || !data[0].is_array()) throw Error(Errc::schema, "matrix JSON has no rows");
    const std::size_t cols = data[0].size();
    if (j.contains("rows") && j["rows"].get<std::size_t>() != rows) throw Error(Errc::schema, "\"rows\" disagrees with data");
    if (j.contains("cols") && j["cols"].get<std::size_t>() != cols) throw Error(Errc::schema, "\"cols\" disagrees with data");
    ExactIntMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!data[r].is_array() || data[r].size() != cols) throw Error(Errc::schema, "ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = big_from_json(data[r][c]);
    }
    return m;
}

}  // namespace latshape
