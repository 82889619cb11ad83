#pragma once

// Quasi-static Rayleigh block channel Y = sqrt(SNR/m) H X + W, ML detection
// of the layered lattice point by Schnorr-Euchner sphere decoding, and
// codeword-error-probability sweeps.

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "latshape/error.hpp"
#include "latshape/format.hpp"
#include "latshape/rng.hpp"
#include "latshape/shaping.hpp"

namespace latshape {

inline double snr_linear(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

struct Transmission {
    std::vector<LatticeVec> data;
    std::vector<LatticeVec> lattice;
    CMatrix H;
    CMatrix X;
    CMatrix W;
    CMatrix Y;
};

inline CMatrix rayleigh_channel(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    CMatrix h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index c = 0; c < h.cols(); ++c)
        for (Eigen::Index r = 0; r < h.rows(); ++r) h(r, c) = complex_gaussian(rng);
    return h;
}

// Draws data, H and W in that order from `rng`. `receive` = 0 means n = m.
inline Transmission transmit(const LayeredShaper& ls, double snr_db, std::mt19937_64& rng, std::size_t receive = 0) {
    if (!std::isfinite(snr_db)) throw Error(Errc::config, "transmit: SNR must be finite");
    const std::size_t n = receive == 0 ? ls.code.m : receive;
    Transmission t;
    std::tie(t.data, t.lattice) = ls.random_block(rng);
    t.X = ls.codeword(t.lattice);
    t.H = rayleigh_channel(rng, n, ls.code.m);
    t.W = CMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ls.code.l));
    for (Eigen::Index c = 0; c < t.W.cols(); ++c)
        for (Eigen::Index r = 0; r < t.W.rows(); ++r) t.W(r, c) = complex_gaussian(rng);
    t.Y = std::sqrt(snr_linear(snr_db) / static_cast<double>(ls.code.m)) * t.H * t.X + t.W;
    return t;
}

// Column-major [Re vec(Y); Im vec(Y)].
inline RVector stack_real(const CMatrix& y) {
    const Eigen::Index n = y.size();
    RVector out(2 * n);
    for (Eigen::Index c = 0, k = 0; c < y.cols(); ++c)
        for (Eigen::Index r = 0; r < y.rows(); ++r, ++k) {
            out(k) = y(r, c).real();
            out(n + k) = y(r, c).imag();
        }
    return out;
}

// X(s) = X0 + sum_k s_k B_k over the concatenated layer lattice vectors.
struct CodewordBasis {
    CMatrix x0;
    std::vector<CMatrix> basis;
    std::vector<std::size_t> layer_start;
};

inline CodewordBasis codeword_basis(const LayeredShaper& ls) {
    CodewordBasis b;
    std::vector<LatticeVec> zero;
    for (const auto& sc : ls.schemes) zero.emplace_back(sc.dim(), 0);
    b.x0 = ls.codeword(zero);
    for (std::size_t p = 0; p < ls.schemes.size(); ++p) {
        b.layer_start.push_back(b.basis.size());
        for (std::size_t k = 0; k < ls.schemes[p].dim(); ++k) {
            auto unit = zero;
            unit[p][k] = 1;
            b.basis.push_back(ls.codeword(unit) - b.x0);
        }
    }
    b.layer_start.push_back(b.basis.size());
    return b;
}

struct DetectionResult {
    std::vector<LatticeVec> lattice;
    double metric = 0.0;
    std::uint64_t nodes = 0;
    bool exact_ml = false;
};

// lattice: nearest point of the whole lattice (unconstrained lattice decoding)
// box:     bounding box of the transmitted set, widened by `guard`
// strict:  only points of the transmitted set
enum class DecodeRegion { lattice, box, strict };

inline const char* region_name(DecodeRegion r) {
    switch (r) {
        case DecodeRegion::lattice: return "lattice";
        case DecodeRegion::box: return "box";
        case DecodeRegion::strict: return "strict";
    }
    return "?";
}

inline DecodeRegion parse_region(const std::string& s) {
    if (s == "lattice") return DecodeRegion::lattice;
    if (s == "box") return DecodeRegion::box;
    if (s == "strict") return DecodeRegion::strict;
    throw Error(Errc::config, "unknown decoding region '" + s + "' (expected lattice, box or strict)");
}

struct DecoderOptions {
    DecodeRegion region = DecodeRegion::box;
    std::int64_t guard = 1;
};

// Coordinate bound standing in for an unbounded search.
inline constexpr std::int64_t unbounded_extent = std::int64_t{1} << 40;

inline std::vector<LatticeVec> split_layers(const CodewordBasis& b, const std::vector<std::int64_t>& s) {
    std::vector<LatticeVec> out;
    for (std::size_t p = 0; p + 1 < b.layer_start.size(); ++p)
        out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(b.layer_start[p]), s.begin() + static_cast<std::ptrdiff_t>(b.layer_start[p + 1]));
    return out;
}

inline double received_metric(const CMatrix& y, const CMatrix& h, double snr_db, std::size_t m, const CMatrix& x) {
    return (y - std::sqrt(snr_linear(snr_db) / static_cast<double>(m)) * h * x).squaredNorm();
}

class SphereDecoder {
public:
    SphereDecoder(const LayeredShaper& ls, DecoderOptions opt = {}) : ls_(ls), opt_(opt), basis_(codeword_basis(ls)) {
        for (const auto& sc : ls.schemes) {
            auto [lo, hi] = lattice_box(sc);
            const std::int64_t g = opt.region == DecodeRegion::box ? opt.guard : 0;
            for (std::size_t i = 0; i < lo.size(); ++i) {
                lo_.push_back(opt.region == DecodeRegion::lattice ? -unbounded_extent : lo[i] - g);
                hi_.push_back(opt.region == DecodeRegion::lattice ? unbounded_extent : hi[i] + g);
            }
        }
    }

    const CodewordBasis& basis() const { return basis_; }
    const std::vector<std::int64_t>& box_lo() const { return lo_; }
    const std::vector<std::int64_t>& box_hi() const { return hi_; }

    DetectionResult decode(const CMatrix& y, const CMatrix& h, double snr_db) const {
        const double a = std::sqrt(snr_linear(snr_db) / static_cast<double>(ls_.code.m));
        const auto n = static_cast<Eigen::Index>(basis_.basis.size());
        const RVector t = stack_real(y - a * h * basis_.x0);
        RMatrix A(t.size(), n);
        for (Eigen::Index k = 0; k < n; ++k) A.col(k) = stack_real(a * h * basis_.basis[static_cast<std::size_t>(k)]);
        if (A.rows() < A.cols() || Eigen::ColPivHouseholderQR<RMatrix>(A).rank() < n)
            throw Error(Errc::rank_deficient, "sphere_decode: effective lattice matrix is rank deficient");
        Eigen::HouseholderQR<RMatrix> qr(A);
        const RMatrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
        const RVector z = (qr.householderQ().transpose() * t).head(n);

        Search s{R, z, lo_, hi_, std::vector<std::int64_t>(static_cast<std::size_t>(n)), {}, 0.0, false, 0};
        if (opt_.region == DecodeRegion::strict) s.accept = [this](const std::vector<std::int64_t>& v) { return in_region(v); };

        const auto babai = babai_point(R, z);
        const double babai_metric = (z - R * to_real(babai)).squaredNorm();
        const bool babai_ok = !s.accept || s.accept(babai);
        // An out-of-region Babai point only bounds the metric from below; grow
        // the radius geometrically until a pass finds an accepted point.
        double radius = babai_metric * (1.0 + 1e-9) + 1e-12;
        for (int pass = 0; !s.found; ++pass) {
            s.radius = pass < 64 ? radius : std::numeric_limits<double>::infinity();
            s.enumerate(static_cast<std::size_t>(n), 0.0);
            if (babai_ok || pass >= 64) break;
            radius = 2.0 * radius + 1.0;
        }
        if (!s.found) throw Error(Errc::solver, "sphere_decode: no lattice point in the search region");
        DetectionResult r;
        r.lattice = split_layers(basis_, s.best);
        r.metric = received_metric(y, h, snr_db, ls_.code.m, ls_.codeword(r.lattice));
        r.nodes = s.nodes;
        r.exact_ml = true;
        return r;
    }

    bool in_region(const std::vector<std::int64_t>& v) const {
        const auto parts = split_layers(basis_, v);
        for (std::size_t p = 0; p < parts.size(); ++p)
            if (!is_region_point(ls_.schemes[p], parts[p])) return false;
        return true;
    }

private:
    struct Search {
        const RMatrix& R;
        const RVector& z;
        const std::vector<std::int64_t>& lo;
        const std::vector<std::int64_t>& hi;
        std::vector<std::int64_t> cur;
        std::function<bool(const std::vector<std::int64_t>&)> accept;
        double radius = 0.0;
        bool found = false;
        std::uint64_t nodes = 0;
        std::vector<std::int64_t> best{};

        // Visits level i-1 given the coordinates above it and their distance.
        void enumerate(std::size_t i, double above) {
            const std::size_t k = i - 1;
            const auto ki = static_cast<Eigen::Index>(k);
            double c = z(ki);
            for (std::size_t j = k + 1; j < cur.size(); ++j) c -= R(ki, static_cast<Eigen::Index>(j)) * static_cast<double>(cur[j]);
            const double rkk = R(ki, ki);
            c /= rkk;
            // zig-zag around c inside [lo, hi]; ties go to the smaller |x|
            std::int64_t down = static_cast<std::int64_t>(std::floor(c));
            std::int64_t up = down + 1;
            if (down > hi[k]) {
                down = hi[k];
                up = hi[k] + 1;
            }
            if (up < lo[k]) {
                up = lo[k];
                down = lo[k] - 1;
            }
            while (down >= lo[k] || up <= hi[k]) {
                std::int64_t x;
                if (down < lo[k]) {
                    x = up++;
                } else if (up > hi[k]) {
                    x = down--;
                } else {
                    const double dd = c - static_cast<double>(down);
                    const double du = static_cast<double>(up) - c;
                    const bool take_down = dd < du || (dd == du && std::llabs(down) <= std::llabs(up));
                    x = take_down ? down-- : up++;
                }
                ++nodes;
                const double e = rkk * (static_cast<double>(x) - c);
                const double d = above + e * e;
                if (d > radius) break;
                cur[k] = x;
                if (k == 0) {
                    if (accept && !accept(cur)) continue;
                    if (!found || d < radius) {
                        best = cur;
                        radius = d;
                        found = true;
                    }
                } else {
                    enumerate(k, d);
                }
            }
        }
    };

    static RVector to_real(const std::vector<std::int64_t>& v) {
        RVector out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<double>(v[i]);
        return out;
    }

    std::vector<std::int64_t> babai_point(const RMatrix& R, const RVector& z) const {
        const std::size_t n = lo_.size();
        std::vector<std::int64_t> s(n);
        for (std::size_t k = n; k-- > 0;) {
            const auto ki = static_cast<Eigen::Index>(k);
            double c = z(ki);
            for (std::size_t j = k + 1; j < n; ++j) c -= R(ki, static_cast<Eigen::Index>(j)) * static_cast<double>(s[j]);
            c /= R(ki, ki);
            s[k] = std::clamp(static_cast<std::int64_t>(std::llround(c)), lo_[k], hi_[k]);
        }
        return s;
    }

    const LayeredShaper& ls_;
    DecoderOptions opt_;
    CodewordBasis basis_;
    std::vector<std::int64_t> lo_, hi_;
};

// Exhaustive minimum over every point of the decoder's search box (or of the
// transmitted set when strict), evaluated through the codeword map itself.
inline DetectionResult brute_force_decode(const LayeredShaper& ls, const SphereDecoder& dec, const CMatrix& y, const CMatrix& h, double snr_db,
                                          bool strict_region, std::uint64_t limit = 100000) {
    const auto& lo = dec.box_lo();
    const auto& hi = dec.box_hi();
    double count = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) count *= static_cast<double>(hi[i] - lo[i] + 1);
    if (count > static_cast<double>(limit)) throw Error(Errc::config, "brute_force_decode: candidate set too large");
    std::vector<std::int64_t> s = lo;
    DetectionResult best;
    best.metric = std::numeric_limits<double>::infinity();
    for (;;) {
        if (!strict_region || dec.in_region(s)) {
            const auto parts = split_layers(dec.basis(), s);
            const double m = received_metric(y, h, snr_db, ls.code.m, ls.codeword(parts));
            ++best.nodes;
            if (m < best.metric) {
                best.metric = m;
                best.lattice = parts;
            }
        }
        std::size_t i = 0;
        for (; i < s.size() && s[i] == hi[i]; ++i) s[i] = lo[i];
        if (i == s.size()) break;
        ++s[i];
    }
    best.exact_ml = true;
    return best;
}

// Data recovered from a detected point, or nothing when it lies outside the
// transmitted set.
inline std::optional<std::vector<LatticeVec>> detected_data(const LayeredShaper& ls, const std::vector<LatticeVec>& lattice) {
    std::vector<LatticeVec> out;
    try {
        for (std::size_t p = 0; p < lattice.size(); ++p) out.push_back(decode(ls.schemes[p], lattice[p]));
    } catch (const Error&) {
        return std::nullopt;
    }
    return out;
}

struct ConfidenceInterval {
    double low = 0.0;
    double high = 1.0;
};

// Two-sided Clopper-Pearson interval at level 1 - alpha.
inline ConfidenceInterval clopper_pearson(std::uint64_t errors, std::uint64_t trials, double alpha = 0.05) {
    if (trials == 0 || errors > trials) throw Error(Errc::config, "clopper_pearson: need 0 <= errors <= trials, trials > 0");
    const auto k = static_cast<double>(errors);
    const auto n = static_cast<double>(trials);
    ConfidenceInterval ci;
    ci.low = errors == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
    ci.high = errors == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
    return ci;
}

struct CepPoint {
    double snr_db = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t trials = 0;
    double cep = 0.0;
    ConfidenceInterval ci;
    std::uint64_t nodes = 0;
};

struct CepConfig {
    std::vector<double> snr_db;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    DecodeRegion region = DecodeRegion::lattice;
    std::size_t receive = 0;
};

inline constexpr std::size_t cep_chunk_blocks = 1024;

// Block b at SNR index i draws from stream_rng(seed, i * 2^32 + b / chunk),
// so shaped and unshaped runs with one seed see the same data, H and W.
inline std::vector<CepPoint> run_cep_sweep(const LayeredShaper& ls, const CepConfig& cfg) {
    if (cfg.trials == 0) throw Error(Errc::config, "cep: trials must be positive");
    if (cfg.snr_db.empty()) throw Error(Errc::config, "cep: empty SNR list");
    const SphereDecoder dec(ls, {cfg.region, 1});
    std::vector<CepPoint> curve;
    for (std::size_t i = 0; i < cfg.snr_db.size(); ++i) {
        const double snr = cfg.snr_db[i];
        const std::size_t chunks = static_cast<std::size_t>((cfg.trials + cep_chunk_blocks - 1) / cep_chunk_blocks);
        auto parts = run_chunks(chunks, cfg.workers, [&](std::size_t c) {
            std::mt19937_64 rng = stream_rng(cfg.seed, (static_cast<std::uint64_t>(i) << 32) + c);
            const std::uint64_t begin = c * cep_chunk_blocks;
            const std::uint64_t end = std::min<std::uint64_t>(cfg.trials, begin + cep_chunk_blocks);
            std::pair<std::uint64_t, std::uint64_t> acc{0, 0};
            for (std::uint64_t b = begin; b < end; ++b) {
                const Transmission t = transmit(ls, snr, rng, cfg.receive);
                const DetectionResult d = dec.decode(t.Y, t.H, snr);
                acc.second += d.nodes;
                const auto got = detected_data(ls, d.lattice);
                if (!got || *got != t.data) ++acc.first;
            }
            return acc;
        });
        CepPoint p;
        p.snr_db = snr;
        p.trials = cfg.trials;
        for (const auto& [e, nodes] : parts) {
            p.errors += e;
            p.nodes += nodes;
        }
        p.cep = static_cast<double>(p.errors) / static_cast<double>(p.trials);
        p.ci = clopper_pearson(p.errors, p.trials);
        curve.push_back(p);
    }
    return curve;
}

inline std::string cep_csv(const std::vector<CepPoint>& curve) {
    std::string out = csv_schema_line("latshape/cep@1") + "snr_db,cep,ci_low,ci_high,trials\n";
    for (const auto& p : curve)
        out += format_double(p.snr_db) + "," + format_double(p.cep) + "," + format_double(p.ci.low) + "," + format_double(p.ci.high) + "," +
               std::to_string(p.trials) + "\n";
    return out;
}

}  // namespace latshape
