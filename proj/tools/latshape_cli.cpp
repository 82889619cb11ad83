// latshape: command-line front end. Data goes to stdout (or --out), logs and
// machine-readable errors to stderr.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latshape/exactmat.hpp"
#include "latshape/format.hpp"
#include "latshape/mimo_sim.hpp"
#include "latshape/papr_stats.hpp"
#include "latshape/peak_density.hpp"
#include "latshape/plusfact.hpp"
#include "latshape/shaping.hpp"
#include "latshape/stcode.hpp"

using namespace latshape;
using nlohmann::json;

namespace {

// A bad data word: `word` is the 0-based line of the word, `digit` the
// offending position inside it.
struct WordError : Error {
    WordError(std::size_t w, std::size_t d, const std::string& what) : Error(Errc::range, what), word(w), digit(d) {}
    std::size_t word;
    std::size_t digit;
};

std::string read_text(const std::string& path) {
    if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw Error(Errc::schema, "'" + path + "': " + e.what());
    }
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json big_to_json(const BigInt& v) {
    if (v.fits_slong_p()) return v.get_si();
    return v.get_str();
}

// Matrix files hold either a bare array of rows or {"data": rows}.
const json& matrix_rows(const json& j) { return j.is_object() && j.contains("data") ? j["data"] : j; }

// ---------------------------------------------------------------------------

int cmd_hnf(const std::string& in, const std::string& out) {
    const json j = read_json(in);
    const ExactIntMatrix q = exact_matrix_from_json(json{{"data", matrix_rows(j)}});
    const BigInt d = det(q);
    if (d == 0) throw Error(Errc::singular, "hnf: matrix is singular");
    const auto h = hnf_decompose(q);
    write_output(out, dump({{"schema", "latshape/hnf@1"},
                            {"n", q.rows()},
                            {"det", big_to_json(d)},
                            {"det_R", big_to_json(det(h.R))},
                            {"R", to_json(h.R)},
                            {"V", to_json(h.V)}}));
    return 0;
}

int cmd_plus(const std::string& in, const std::string& out) {
    const json j = read_json(in);
    const CMatrix q = cmatrix_from_json(matrix_rows(j));
    if (q.rows() != q.cols()) throw Error(Errc::dimension, "plus: matrix must be square");
    if (std::abs(q.fullPivLu().determinant()) < 1e-12) throw Error(Errc::singular, "plus: matrix is singular");
    const auto pf = plus_factorize(q);
    json r = to_json(pf);
    r["det"] = complex_to_json(q.fullPivLu().determinant());
    r["reconstruction_error"] = (pf.product() - q).cwiseAbs().maxCoeff();
    write_output(out, dump(r));
    return 0;
}

// ---------------------------------------------------------------------------

struct SchemeArgs {
    std::string code = "golden";
    std::string mode = "hnf";
    std::int64_t sigma = 8;
};

LayeredShaper make_shaper(const SchemeArgs& a, ShapingMode mode, std::size_t normalization_trials) {
    return build_layered(load_code(a.code), a.sigma, mode, {}, normalization_trials);
}

std::vector<std::vector<std::int64_t>> parse_words(const std::string& text) {
    std::vector<std::vector<std::int64_t>> words;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::vector<std::int64_t> w;
        std::string tok;
        while (fields >> tok) {
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) throw WordError(words.size(), w.size(), "not an integer: '" + tok + "'");
            w.push_back(v);
        }
        words.push_back(std::move(w));
    }
    return words;
}

std::vector<LatticeVec> split_word(const LayeredShaper& ls, const std::vector<std::int64_t>& w, std::size_t index) {
    const std::size_t per = ls.layer_dim();
    if (w.size() != per * ls.schemes.size())
        throw WordError(index, w.size(), "word has " + std::to_string(w.size()) + " entries, expected " + std::to_string(per * ls.schemes.size()));
    std::vector<LatticeVec> out;
    for (std::size_t p = 0; p < ls.schemes.size(); ++p)
        out.emplace_back(w.begin() + static_cast<std::ptrdiff_t>(p * per), w.begin() + static_cast<std::ptrdiff_t>((p + 1) * per));
    return out;
}

std::string join_word(const std::vector<LatticeVec>& parts) {
    std::string s;
    for (const auto& p : parts)
        for (auto v : p) {
            if (!s.empty()) s += ' ';
            s += std::to_string(v);
        }
    return s + "\n";
}

int cmd_shape(const SchemeArgs& a, const std::string& in, const std::string& out, const std::string& signal_out, bool inverse) {
    const LayeredShaper ls = make_shaper(a, parse_mode(a.mode), signal_out.empty() ? 0 : 100000);
    const auto words = parse_words(read_text(in));
    std::string text, signal;
    if (!signal_out.empty()) signal = csv_schema_line("latshape/signal@1") + "word,row,col,re,im\n";
    for (std::size_t k = 0; k < words.size(); ++k) {
        const auto parts = split_word(ls, words[k], k);
        std::vector<LatticeVec> res;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            try {
                res.push_back(inverse ? decode(ls.schemes[p], parts[p]) : encode(ls.schemes[p], parts[p]));
            } catch (const RangeError& e) {
                throw WordError(k, p * ls.layer_dim() + e.index(), std::string(e.what()));
            }
        }
        text += join_word(res);
        if (!signal_out.empty()) {
            const CMatrix x = ls.codeword(inverse ? parts : res);
            for (Eigen::Index r = 0; r < x.rows(); ++r)
                for (Eigen::Index c = 0; c < x.cols(); ++c)
                    signal += std::to_string(k) + "," + std::to_string(r) + "," + std::to_string(c) + "," + format_double(x(r, c).real()) + "," +
                              format_double(x(r, c).imag()) + "\n";
        }
    }
    write_output(out, text);
    if (!signal_out.empty()) write_output(signal_out, signal);
    return 0;
}

// ---------------------------------------------------------------------------

struct SimArgs {
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string out;
};

int cmd_papr(const SchemeArgs& a, const SimArgs& s, bool compare, const std::string& summary_path, std::vector<double> grid) {
    if (s.trials == 0) throw Error(Errc::config, "papr-ccdf: --trials must be at least 1");
    const ShapingMode mode = parse_mode(a.mode);
    const LayeredShaper shaped = make_shaper(a, mode, 100000);
    const LayeredShaper plain = make_shaper(a, ShapingMode::none, 100000);
    const PaprRun run = papr_experiment(shaped, compare ? &plain : nullptr, s.trials, s.seed, s.workers);
    if (grid.empty()) grid = default_threshold_grid();
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error(Errc::config, "papr-ccdf: --thresholds must be increasing");
    const CcdfCurve c = run.shaped.ccdf(grid);
    std::optional<CcdfCurve> u;
    if (compare) u = run.unshaped.ccdf(grid);
    const std::size_t m = c.per_antenna.size();
    std::string text = csv_schema_line("latshape/papr-ccdf@1") + "papr_db";
    for (std::size_t i = 0; i < m; ++i) text += ",ccdf_ant" + std::to_string(i);
    text += ",ccdf_avg";
    if (compare) {
        for (std::size_t i = 0; i < m; ++i) text += ",unshaped_ant" + std::to_string(i);
        text += ",unshaped_avg";
    }
    text += "\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        text += format_double(grid[k]);
        for (std::size_t i = 0; i < m; ++i) text += "," + format_double(c.per_antenna[i][k]);
        text += "," + format_double(c.probabilities[k]);
        if (compare) {
            for (std::size_t i = 0; i < m; ++i) text += "," + format_double(u->per_antenna[i][k]);
            text += "," + format_double(u->probabilities[k]);
        }
        text += "\n";
    }
    write_output(s.out, text);
    json summary{{"schema", "latshape/papr-summary@1"},
                 {"code", load_code(a.code).name},
                 {"mode", mode_name(mode)},
                 {"sigma", a.sigma},
                 {"symbols_per_antenna", c.samples},
                 {"seed", s.seed},
                 {"shaped", {{"crossing_db_1e-3", run.shaped.crossing_db(1e-3)}, {"mean_papr", run.shaped.mean_papr()}, {"max_papr_db", to_db(run.shaped.max_papr())}}}};
    if (compare) {
        summary["unshaped"] = {{"crossing_db_1e-3", run.unshaped.crossing_db(1e-3)},
                               {"mean_papr", run.unshaped.mean_papr()},
                               {"max_papr_db", to_db(run.unshaped.max_papr())}};
        summary["reduction_db_1e-3"] = run.unshaped.crossing_db(1e-3) - run.shaped.crossing_db(1e-3);
    }
    std::cerr << "papr-ccdf: shaped CCDF crosses 1e-3 at " << run.shaped.crossing_db(1e-3) << " dB";
    if (compare) std::cerr << ", unshaped at " << run.unshaped.crossing_db(1e-3) << " dB";
    std::cerr << "\n";
    if (!summary_path.empty()) write_output(summary_path, dump(summary));
    return 0;
}

int cmd_power(const SchemeArgs& a, const SimArgs& s) {
    if (s.trials == 0) throw Error(Errc::config, "power: --trials must be at least 1");
    const auto r = power_increase(load_code(a.code), a.sigma, parse_mode(a.mode), s.trials, s.seed, {}, s.workers);
    write_output(s.out, dump(to_json(r)));
    return 0;
}

int cmd_cep(const SchemeArgs& a, const SimArgs& s, const std::vector<double>& snr, DecodeRegion region) {
    CepConfig cfg;
    cfg.snr_db = snr;
    cfg.trials = s.trials;
    cfg.seed = s.seed;
    cfg.workers = s.workers;
    cfg.region = region;
    const LayeredShaper ls = make_shaper(a, parse_mode(a.mode), 100000);
    write_output(s.out, cep_csv(run_cep_sweep(ls, cfg)));
    return 0;
}

int cmd_density(double rho, double power, const std::string& constraint, const std::string& curve, const std::string& out) {
    if (curve == "b-rho") {
        write_output(out, b_curve_csv(curve_b_vs_rho(default_inverse_rho_grid())));
        return 0;
    }
    if (curve == "hstar") {
        std::vector<double> powers;
        for (int db = -10; db <= 20; ++db) powers.push_back(std::pow(10.0, db / 10.0));
        write_output(out, hstar_csv(curve_hstar(powers, {1.1, 2.0, 5.0, std::numeric_limits<double>::infinity()})));
        return 0;
    }
    if (!curve.empty()) throw Error(Errc::config, "density: --curve must be b-rho or hstar");
    if (constraint != "papr" && constraint != "peak") throw Error(Errc::config, "density: --constraint must be papr or peak");
    const auto d = solve_density(rho, power, constraint == "peak" ? DensityConstraint::peak : DensityConstraint::papr);
    const auto e = entropy_and_k(d);
    write_output(out, csv_schema_line("latshape/density@1") + "rho,P,a,b,c,regime,h_star,k\n" + format_double(d.rho) + "," + format_double(d.P) + "," +
                          format_double(d.a) + "," + format_double(d.b) + "," + format_double(d.c) + "," + regime_name(d.regime) + "," +
                          format_double(e.h_star) + "," + format_double(e.k) + "\n");
    return 0;
}

void emit_error(const std::string& code, const std::string& message, const json& extra = json::object()) {
    json j{{"schema", "latshape/error@1"}, {"code", code}, {"message", message}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::cerr << j.dump() << "\n";
}

// Fills options not given on the command line from a JSON config object.
template <class T>
void from_config(const json& cfg, CLI::App* sub, const std::string& key, const std::string& flag, T& target) {
    if (cfg.contains(key) && sub->count(flag) == 0) target = cfg[key].get<T>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latshape: approximate cubic shaping for lattice space-time codes"};
    app.require_subcommand(1);

    std::string in, out, config_path;
    SchemeArgs scheme;
    SimArgs sim;

    auto* hnf = app.add_subcommand("hnf", "Hermite normal form Q = R V of an integer matrix (JSON)");
    hnf->add_option("matrix", in, "matrix file: [[...], ...] or {\"data\": ...}")->required();
    hnf->add_option("--out", out, "output path (default stdout)");

    auto* plus = app.add_subcommand("plus", "PLUS factorization of a unit-determinant complex matrix (JSON)");
    plus->add_option("matrix", in, "matrix file: rows of numbers or [re, im] pairs")->required();
    plus->add_option("--out", out, "output path (default stdout)");

    auto add_scheme = [&](CLI::App* sub) {
        sub->add_option("--code", scheme.code, "code file, or 'golden'")->capture_default_str();
        sub->add_option("--mode", scheme.mode, "hnf | plus | none")->check(CLI::IsMember({"hnf", "plus", "none"}))->capture_default_str();
        sub->add_option("--sigma", scheme.sigma, "points per real dimension")->capture_default_str();
    };
    auto add_sim = [&](CLI::App* sub, const char* trials_help) {
        sub->add_option("--trials", sim.trials, trials_help);
        sub->add_option("--seed", sim.seed, "random seed");
        sub->add_option("--workers", sim.workers, "worker threads (results do not depend on it)")->capture_default_str();
        sub->add_option("--out", out, "output path (default stdout)");
        sub->add_option("--config", config_path, "JSON config; command-line flags take precedence");
    };

    std::string signal_out;
    in = "-";
    auto* shape = app.add_subcommand("shape", "data words (one per line) -> shaped lattice points");
    auto* unshape = app.add_subcommand("unshape", "shaped lattice points (one per line) -> data words");
    for (auto* sub : {shape, unshape}) {
        add_scheme(sub);
        sub->add_option("--in", in, "input path (default stdin)");
        sub->add_option("--out", out, "output path (default stdout)");
        sub->add_option("--signal", signal_out, "also write the normalized codewords as CSV");
    }

    bool compare = false;
    std::string summary;
    auto* papr = app.add_subcommand("papr-ccdf", "PAPR CCDF of shaped transmission");
    add_scheme(papr);
    add_sim(papr, "complex symbols to transmit in total");
    papr->add_flag("--compare", compare, "add the unshaped curve for the same data");
    papr->add_option("--summary", summary, "write crossing points and PAPR statistics as JSON");
    std::vector<double> thresholds;
    papr->add_option("--thresholds", thresholds, "PAPR grid in dB, comma separated (default 0, 0.1, ..., 10)")->delimiter(',');

    auto* power = app.add_subcommand("power", "average-power increase of shaping (JSON)");
    add_scheme(power);
    add_sim(power, "codewords");

    std::vector<double> snr;
    bool strict = false;
    auto* cep = app.add_subcommand("cep", "codeword error probability over a Rayleigh channel");
    add_scheme(cep);
    add_sim(cep, "blocks per SNR point");
    cep->add_option("--snr", snr, "SNR list in dB, comma separated")->delimiter(',');
    std::string region = "lattice";
    cep->add_flag("--strict-region", strict, "restrict detection to the transmitted set (same as --region strict)");
    cep->add_option("--region", region, "lattice | box | strict: set searched by the sphere decoder")->capture_default_str();

    double rho = 2.0, pw = 1.0;
    std::string constraint = "papr", curve;
    auto* density = app.add_subcommand("density", "PAPR-constrained maximum-entropy amplitude density");
    density->add_option("--rho", rho, "PAPR constraint (> 1)")->capture_default_str();
    density->add_option("--power", pw, "average power P")->capture_default_str();
    density->add_option("--constraint", constraint, "papr | peak")->capture_default_str();
    density->add_option("--curve", curve, "b-rho | hstar: emit a curve instead of one point");
    density->add_option("--out", out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("config", e.what());
        return 2;
    }

    try {
        if (*hnf) return cmd_hnf(in, out);
        if (*plus) return cmd_plus(in, out);
        if (*shape) return cmd_shape(scheme, in, out, signal_out, false);
        if (*unshape) return cmd_shape(scheme, in, out, signal_out, true);
        if (*density) return cmd_density(rho, pw, constraint, curve, out);

        CLI::App* sub = *papr ? papr : *power ? power : cep;
        if (!config_path.empty()) {
            const json cfg = read_json(config_path);
            if (!cfg.is_object()) throw Error(Errc::schema, "config must be a JSON object");
            from_config(cfg, sub, "code", "--code", scheme.code);
            from_config(cfg, sub, "mode", "--mode", scheme.mode);
            from_config(cfg, sub, "sigma", "--sigma", scheme.sigma);
            from_config(cfg, sub, "trials", "--trials", sim.trials);
            from_config(cfg, sub, "seed", "--seed", sim.seed);
            from_config(cfg, sub, "workers", "--workers", sim.workers);
            if (sub == papr) from_config(cfg, sub, "thresholds", "--thresholds", thresholds);
            if (sub == cep) {
                from_config(cfg, sub, "snr", "--snr", snr);
                from_config(cfg, sub, "strict_region", "--strict-region", strict);
                from_config(cfg, sub, "region", "--region", region);
            }
            parse_mode(scheme.mode);
        }
        const bool has_seed = sub->count("--seed") > 0 || (!config_path.empty() && read_json(config_path).contains("seed"));
        if (!has_seed) throw Error(Errc::config, std::string(sub->get_name()) + ": --seed is required");
        if (sim.trials == 0) throw Error(Errc::config, std::string(sub->get_name()) + ": --trials must be at least 1");
        sim.out = out;
        if (*papr) return cmd_papr(scheme, sim, compare, summary, thresholds);
        if (*power) return cmd_power(scheme, sim);
        return cmd_cep(scheme, sim, snr, strict ? DecodeRegion::strict : parse_region(region));
    } catch (const WordError& e) {
        emit_error(e.code_name(), e.what(), {{"word", e.word}, {"digit", e.digit}});
    } catch (const RangeError& e) {
        emit_error(e.code_name(), e.what(), {{"index", e.index()}});
    } catch (const Error& e) {
        emit_error(e.code_name(), e.what());
    } catch (const json::exception& e) {
        emit_error("schema", e.what());
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
    }
    return 2;
}
