#pragma once

// Maximum-entropy amplitude density under average power P and PAPR rho:
// f(r) = a r exp(-b r^2 / 2) on [0, sqrt(rho P)], phase uniform. With
// c = b rho P the two moment conditions reduce to
//   g(c) = 2/c - 1/(1 - exp(-c/2)) + 1 = 1/rho,
// which is strictly decreasing from 1 (c -> -inf) through 1/2 (c = 0) to 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "latshape/error.hpp"
#include "latshape/format.hpp"
#include "latshape/rng.hpp"

namespace latshape {

enum class DensityRegime { rho_gt_2, rho_eq_2, rho_lt_2 };

inline const char* regime_name(DensityRegime r) {
    switch (r) {
        case DensityRegime::rho_gt_2: return "rho_gt_2";
        case DensityRegime::rho_eq_2: return "rho_eq_2";
        case DensityRegime::rho_lt_2: return "rho_lt_2";
    }
    return "?";
}

// papr: E|r|^2 <= P and |r|^2 / E|r|^2 <= rho; for rho < 2 the power
//       constraint is active and b < 0.
// peak: E|r|^2 <= P and |r|^2 <= rho P; for rho < 2 the KKT condition b >= 0
//       leaves the linear density b = 0 with E|r|^2 = rho P / 2.
enum class DensityConstraint { papr, peak };

struct PeakDensity {
    double a = 0.0;
    double b = 0.0;
    double rho = 0.0;
    double P = 0.0;
    double c = 0.0;
    double log_a = 0.0;
    DensityRegime regime = DensityRegime::rho_eq_2;

    double support() const { return std::sqrt(rho * P); }
};

namespace detail {

// (1 - e^-x) / x
inline double phi1(double x) {
    if (std::abs(x) < 0.1) {
        double term = 1.0, sum = 0.0;
        for (int k = 1; k <= 20; ++k) {
            sum += term;
            term *= -x / (k + 1);
        }
        return sum;
    }
    return -std::expm1(-x) / x;
}

inline double log_phi1(double x) {
    if (x < -30.0) return -x + std::log1p(-std::exp(x)) - std::log(-x);
    return std::log(phi1(x));
}

// 2 (1 - (1 + x) e^-x) / x^2
inline double phi2(double x) {
    if (std::abs(x) < 0.1) {
        double sum = 0.0, fact = 2.0, pw = 1.0;  // k!, x^(k-2)
        for (int k = 2; k <= 22; ++k) {
            sum += ((k % 2 == 0) ? 2.0 : -2.0) * (k - 1) * pw / fact;
            pw *= x;
            fact *= k + 1;
        }
        return sum;
    }
    return 2.0 * (1.0 - (1.0 + x) * std::exp(-x)) / (x * x);
}

inline double log_phi2(double x) {
    // 1 - (1 + x) e^-x = e^-x (e^x - 1 - x)
    if (x < -30.0) return std::log(2.0) - x + std::log(std::expm1(x) - x) - 2.0 * std::log(-x);
    return std::log(phi2(x));
}

}  // namespace detail

// 1/rho as a function of c.
inline double inverse_rho_of_c(double c) {
    if (std::abs(c) < 1e-4) {
        const double c3 = c * c * c;
        return 0.5 - c / 24.0 + c3 / 5760.0 - c3 * c * c / 967680.0;
    }
    // 1 - 1/(1 - e^-x) = -1/(e^x - 1)
    return 2.0 / c - 1.0 / std::expm1(c / 2.0);
}

// Bisection on c in [-1e6, 1e13]; the wide bracket covers 1/rho in
// about (1e-12, 1 - 2e-6).
inline double solve_c(double rho) {
    const double target = 1.0 / rho;
    double lo = -1e6, hi = 1e13;
    const double f_lo = inverse_rho_of_c(lo) - target, f_hi = inverse_rho_of_c(hi) - target;
    if (!(f_lo > 0.0 && f_hi < 0.0)) throw Error(Errc::solver, "solve_density: bisection bracket does not contain the root");
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (inverse_rho_of_c(mid) - target > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline PeakDensity solve_density(double rho, double P, DensityConstraint constraint = DensityConstraint::papr) {
    if (!(P > 0.0) || !std::isfinite(P)) throw Error(Errc::config, "solve_density: P must be positive and finite");
    if (!(rho > 1.0)) throw Error(Errc::infeasible, "solve_density: PAPR constraint must exceed 1");
    PeakDensity d;
    d.rho = rho;
    d.P = P;
    d.regime = rho > 2.0 ? DensityRegime::rho_gt_2 : rho < 2.0 ? DensityRegime::rho_lt_2 : DensityRegime::rho_eq_2;
    if (rho == 2.0) {
        d.a = 1.0 / P;
        d.log_a = -std::log(P);
        return d;
    }
    if (rho < 2.0 && constraint == DensityConstraint::peak) {
        d.a = 2.0 / (rho * P);
        d.log_a = std::log(d.a);
        return d;
    }
    d.c = solve_c(rho);
    d.b = d.c / (rho * P);
    // normalization: a rho P / 2 * phi1(c / 2) = 1
    d.log_a = std::log(2.0 / (rho * P)) - detail::log_phi1(d.c / 2.0);
    d.a = std::exp(d.log_a);
    return d;
}

inline double density_pdf(const PeakDensity& d, double r) {
    if (r < 0.0 || r > d.support()) return 0.0;
    if (r == 0.0) return 0.0;
    return std::exp(d.log_a + std::log(r) - d.b * r * r / 2.0);
}

// Integral of f over the support, in closed form.
inline double density_mass(const PeakDensity& d) { return std::exp(d.log_a + detail::log_phi1(d.c / 2.0)) * d.rho * d.P / 2.0; }

inline double second_moment(const PeakDensity& d) {
    const double t = d.rho * d.P;
    return std::exp(d.log_a + detail::log_phi2(d.c / 2.0)) * t * t / 4.0;
}

struct DensityResiduals {
    double normalization = 0.0;  // (a/b)(1 - e^(-c/2)) - 1
    double moment = 0.0;         // 2 (a/b) c^-1 [1 - (1 + c/2) e^(-c/2)] - 1/rho
};

inline DensityResiduals residuals(const PeakDensity& d) {
    return {density_mass(d) - 1.0, second_moment(d) / (d.rho * d.P) - 1.0 / d.rho};
}

// Inverse of F(r) = (1 - e^(-b r^2 / 2)) / (1 - e^(-c/2)).
inline double sample_radius(const PeakDensity& d, double u) {
    const double t = d.rho * d.P;
    if (d.c == 0.0) return std::sqrt(u * t);  // linear density: F = r^2 / t
    const double x = d.c / 2.0;
    double l;  // log(1 - u (1 - e^-x))
    if (x < -30.0)
        l = -x + std::log(u + (1.0 - u) * std::exp(x));
    else
        l = std::log1p(u * std::expm1(-x));
    return std::sqrt(std::max(0.0, -(t / x) * l));
}

inline std::vector<double> sample_radii(const PeakDensity& d, std::mt19937_64& rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto& r : out) r = sample_radius(d, uniform_open0(rng));
    return out;
}

// Complex samples r e^(i theta) with theta uniform on [0, 2 pi).
inline std::vector<std::complex<double>> sample_symbols(const PeakDensity& d, std::mt19937_64& rng, std::size_t n) {
    std::vector<std::complex<double>> out(n);
    for (auto& x : out) {
        const double r = sample_radius(d, uniform_open0(rng));
        x = std::polar(r, 2.0 * std::numbers::pi * (1.0 - uniform_open0(rng)));
    }
    return out;
}

struct EntropyReport {
    double h_star = 0.0;  // nats
    double k = 0.0;       // h_star - log(pi e P)
};

inline EntropyReport entropy_and_k(const PeakDensity& d) {
    EntropyReport e;
    e.h_star = -d.log_a + d.b * d.P / 2.0 + std::log(2.0 * std::numbers::pi);
    e.k = e.h_star - std::log(std::numbers::pi * std::numbers::e * d.P);
    return e;
}

inline double unconstrained_entropy(double P) { return std::log(std::numbers::pi * std::numbers::e * P); }

struct BCurvePoint {
    double one_over_rho = 0.0;
    double bT = 0.0;  // b rho P / 2 = c / 2
};

// One row per 1/rho in the grid; throws if bT is not strictly decreasing.
inline std::vector<BCurvePoint> curve_b_vs_rho(const std::vector<double>& one_over_rho) {
    std::vector<BCurvePoint> out;
    for (double v : one_over_rho) {
        if (!(v > 0.0 && v < 1.0)) throw Error(Errc::config, "curve_b_vs_rho: 1/rho must lie in (0, 1)");
        const double rho = 1.0 / v;
        out.push_back({v, rho == 2.0 ? 0.0 : solve_density(rho, 1.0).c / 2.0});
        if (out.size() > 1) {
            const auto& p = out[out.size() - 2];
            const auto& q = out.back();
            if (!((q.one_over_rho - p.one_over_rho) * (q.bT - p.bT) < 0.0))
                throw Error(Errc::solver, "curve_b_vs_rho: bT is not strictly monotone in 1/rho");
        }
    }
    return out;
}

inline std::vector<double> default_inverse_rho_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 99; ++k) g.push_back(0.01 * k);
    return g;
}

struct HStarPoint {
    double P = 0.0;
    double h_star = 0.0;
    double rho = 0.0;  // +inf for the unconstrained case
};

inline std::vector<HStarPoint> curve_hstar(const std::vector<double>& powers, const std::vector<double>& rhos) {
    std::vector<HStarPoint> out;
    for (double rho : rhos)
        for (double P : powers) {
            const double h = std::isinf(rho) ? unconstrained_entropy(P) : entropy_and_k(solve_density(rho, P)).h_star;
            out.push_back({P, h, rho});
        }
    return out;
}

inline std::string b_curve_csv(const std::vector<BCurvePoint>& rows) {
    std::string out = csv_schema_line("latshape/density-b@1") + "one_over_rho,bT\n";
    for (const auto& r : rows) out += format_double(r.one_over_rho) + "," + format_double(r.bT) + "\n";
    return out;
}

inline std::string hstar_csv(const std::vector<HStarPoint>& rows) {
    std::string out = csv_schema_line("latshape/density-hstar@1") + "P,h_star,rho\n";
    for (const auto& r : rows) out += format_double(r.P) + "," + format_double(r.h_star) + "," + format_double(r.rho) + "\n";
    return out;
}

}  // namespace latshape
