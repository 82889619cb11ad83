#pragma once

// Per-symbol PAPR, |x|^2 / E|x|^2 on each antenna, its CCDF averaged over
// antennas, and the average-power cost of shaping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "latshape/error.hpp"
#include "latshape/rng.hpp"
#include "latshape/shaping.hpp"

namespace latshape {

inline double to_db(double v) { return 10.0 * std::log10(v); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

inline std::vector<double> papr_of(const std::vector<cplx>& x) {
    double sum = 0.0;
    for (const auto& v : x) sum += std::norm(v);
    if (x.empty() || sum == 0.0) throw Error(Errc::degenerate, "papr_of: zero mean power");
    const double mean = sum / static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::norm(x[i]) / mean;
    return out;
}

// 0, 0.1, ..., 10 dB
inline std::vector<double> default_threshold_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 100; ++k) g.push_back(k / 10.0);
    return g;
}

struct CcdfCurve {
    std::vector<double> thresholds_db;
    std::vector<std::vector<double>> per_antenna;  // [antenna][threshold]
    std::vector<double> probabilities;             // antenna average
    std::uint64_t samples = 0;                     // per antenna
};

// Collects |x|^2 per antenna. Partial accumulators merge by concatenation.
class PaprAccumulator {
public:
    PaprAccumulator() = default;
    explicit PaprAccumulator(std::size_t antennas) : power_(antennas) {}

    std::size_t antennas() const { return power_.size(); }
    std::uint64_t samples() const { return power_.empty() ? 0 : power_.front().size(); }

    void add(std::size_t antenna, cplx x) { power_.at(antenna).push_back(std::norm(x)); }

    void add_codeword(const CMatrix& x) {
        if (static_cast<std::size_t>(x.rows()) != power_.size()) throw Error(Errc::dimension, "PaprAccumulator: antenna count mismatch");
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) power_[static_cast<std::size_t>(r)].push_back(std::norm(x(r, c)));
    }

    void merge(const PaprAccumulator& other) {
        if (power_.empty()) power_.resize(other.power_.size());
        if (other.power_.size() != power_.size()) throw Error(Errc::dimension, "PaprAccumulator: antenna count mismatch");
        for (std::size_t a = 0; a < power_.size(); ++a) power_[a].insert(power_[a].end(), other.power_[a].begin(), other.power_[a].end());
    }

    double mean_power(std::size_t antenna) const {
        const auto& p = power_.at(antenna);
        double sum = 0.0;
        for (double v : p) sum += v;
        return sum / static_cast<double>(p.size());
    }

    // Sorted PAPR values (linear) of one antenna.
    std::vector<double> sorted_papr(std::size_t antenna) const {
        const double mean = mean_power(antenna);
        if (!(mean > 0.0)) throw Error(Errc::degenerate, "PaprAccumulator: zero mean power");
        std::vector<double> v = power_.at(antenna);
        for (double& x : v) x /= mean;
        std::sort(v.begin(), v.end());
        return v;
    }

    CcdfCurve ccdf(const std::vector<double>& thresholds_db = default_threshold_grid()) const {
        if (power_.empty() || samples() == 0) throw Error(Errc::degenerate, "ccdf: no samples");
        CcdfCurve c;
        c.thresholds_db = thresholds_db;
        c.samples = samples();
        c.probabilities.assign(thresholds_db.size(), 0.0);
        for (std::size_t a = 0; a < power_.size(); ++a) {
            const auto v = sorted_papr(a);
            std::vector<double> p(thresholds_db.size());
            for (std::size_t k = 0; k < thresholds_db.size(); ++k) {
                const auto above = v.end() - std::upper_bound(v.begin(), v.end(), from_db(thresholds_db[k]));
                p[k] = static_cast<double>(above) / static_cast<double>(v.size());
                c.probabilities[k] += p[k] / static_cast<double>(power_.size());
            }
            c.per_antenna.push_back(std::move(p));
        }
        return c;
    }

    // Smallest threshold (dB) at which the antenna-averaged CCDF is <= level.
    double crossing_db(double level) const {
        struct Item {
            double papr;
            double weight;
        };
        std::vector<Item> items;
        for (std::size_t a = 0; a < power_.size(); ++a) {
            const double w = 1.0 / (static_cast<double>(power_.size()) * static_cast<double>(power_[a].size()));
            for (double v : sorted_papr(a)) items.push_back({v, w});
        }
        std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.papr > y.papr; });
        double mass = 0.0;
        for (std::size_t k = 0; k < items.size(); ++k) {
            // CCDF just below items[k] includes items[0..k].
            if (mass + items[k].weight > level * (1.0 + 1e-12)) return to_db(items[k].papr);
            mass += items[k].weight;
        }
        return -std::numeric_limits<double>::infinity();
    }

    double max_papr() const {
        double m = 0.0;
        for (std::size_t a = 0; a < power_.size(); ++a) m = std::max(m, sorted_papr(a).back());
        return m;
    }

    double mean_papr() const {
        double s = 0.0;
        for (std::size_t a = 0; a < power_.size(); ++a) {
            const auto v = sorted_papr(a);
            double t = 0.0;
            for (double x : v) t += x;
            s += t / static_cast<double>(v.size());
        }
        return s / static_cast<double>(power_.size());
    }

private:
    std::vector<std::vector<double>> power_;
};

struct PaprRun {
    PaprAccumulator shaped;
    PaprAccumulator unshaped;  // same data through the unshaped reference
};

inline constexpr std::size_t papr_chunk_codewords = 4096;

// Transmits `symbols` complex symbols in total (rounded up to whole
// codewords). `reference`, if given, receives the same data unshaped.
inline PaprRun papr_experiment(const LayeredShaper& shaped, const LayeredShaper* reference, std::uint64_t symbols, std::uint64_t seed,
                               unsigned workers = 1) {
    const std::uint64_t per_codeword = shaped.code.m * shaped.code.l;
    const std::uint64_t codewords = (symbols + per_codeword - 1) / per_codeword;
    const std::size_t chunks = static_cast<std::size_t>((codewords + papr_chunk_codewords - 1) / papr_chunk_codewords);
    auto parts = run_chunks(chunks, workers, [&](std::size_t c) {
        PaprRun part{PaprAccumulator(shaped.code.m), PaprAccumulator(shaped.code.m)};
        std::mt19937_64 rng = stream_rng(seed, c);
        const std::uint64_t begin = c * papr_chunk_codewords;
        const std::uint64_t end = std::min<std::uint64_t>(codewords, begin + papr_chunk_codewords);
        for (std::uint64_t k = begin; k < end; ++k) {
            auto [data, lattice] = shaped.random_block(rng);
            part.shaped.add_codeword(shaped.codeword(lattice));
            if (reference) {
                std::vector<LatticeVec> ref;
                for (std::size_t i = 0; i < data.size(); ++i) ref.push_back(encode(reference->schemes[i], data[i]));
                part.unshaped.add_codeword(reference->codeword(ref));
            }
        }
        return part;
    });
    PaprRun out{PaprAccumulator(shaped.code.m), PaprAccumulator(shaped.code.m)};
    for (const auto& p : parts) {
        out.shaped.merge(p.shaped);
        if (reference) out.unshaped.merge(p.unshaped);
    }
    return out;
}

struct PowerReport {
    double avg_power_shaped = 0.0;
    double avg_power_unshaped = 0.0;
    double increase_percent = 0.0;
    std::uint64_t trials = 0;
};

inline nlohmann::json to_json(const PowerReport& r) {
    return {{"schema", "latshape/power@1"},
            {"avg_power_shaped", r.avg_power_shaped},
            {"avg_power_unshaped", r.avg_power_unshaped},
            {"increase_percent", r.increase_percent},
            {"trials", r.trials}};
}

// Paired mean |x|^2 of the shaped and unshaped (mode none, same G) signals
// over one data stream, before any power normalization.
inline PowerReport power_increase(const CodeDefinition& code, std::int64_t sigma, ShapingMode mode, std::uint64_t trials, std::uint64_t seed,
                                  SchemeOptions opt = {}, unsigned workers = 1) {
    if (trials == 0) throw Error(Errc::config, "power_increase: trials must be positive");
    const LayeredShaper shaped = build_layered(code, sigma, mode, opt, 0);
    const LayeredShaper plain = build_layered(code, sigma, ShapingMode::none, opt, 0);
    const std::size_t chunks = static_cast<std::size_t>((trials + papr_chunk_codewords - 1) / papr_chunk_codewords);
    auto parts = run_chunks(chunks, workers, [&](std::size_t c) {
        std::mt19937_64 rng = stream_rng(seed, c);
        const std::uint64_t begin = c * papr_chunk_codewords;
        const std::uint64_t end = std::min<std::uint64_t>(trials, begin + papr_chunk_codewords);
        std::pair<double, double> acc{0.0, 0.0};
        for (std::uint64_t k = begin; k < end; ++k) {
            auto [data, lattice] = shaped.random_block(rng);
            acc.first += shaped.codeword(lattice).squaredNorm();
            std::vector<LatticeVec> ref;
            for (std::size_t i = 0; i < data.size(); ++i) ref.push_back(encode(plain.schemes[i], data[i]));
            acc.second += plain.codeword(ref).squaredNorm();
        }
        return acc;
    });
    double s = 0.0, u = 0.0;
    for (const auto& p : parts) {
        s += p.first;
        u += p.second;
    }
    const double n = static_cast<double>(trials) * static_cast<double>(code.m * code.l);
    PowerReport r;
    r.avg_power_shaped = s / n;
    r.avg_power_unshaped = u / n;
    r.increase_percent = 100.0 * (r.avg_power_shaped / r.avg_power_unshaped - 1.0);
    r.trials = trials;
    return r;
}

}  // namespace latshape
