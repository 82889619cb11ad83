#pragma once

// Layered space-time codes. Layer p of an m x m code occupies the nonzero
// positions of B^p, where B is the cyclic shift with B[i][(i-1) mod m] = 1,
// i.e. the cells (r, (r - p) mod m); its symbols are read row by row.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latshape/error.hpp"
#include "latshape/plusfact.hpp"

namespace latshape {

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

struct Position {
    std::size_t row;
    std::size_t col;
};

inline std::vector<Position> layer_positions(std::size_t m, std::size_t shift) {
    std::vector<Position> out;
    out.reserve(m);
    for (std::size_t r = 0; r < m; ++r) out.push_back({r, (r + m - shift % m) % m});
    return out;
}

struct Layer {
    std::size_t shift = 0;
    CMatrix G;
};

struct CodeDefinition {
    std::string name;
    std::size_t m = 0;
    std::size_t l = 0;
    std::vector<Layer> layers;
};

// Throws on overlapping or missing cells and on non-invertible generators.
inline void validate_code(const CodeDefinition& code) {
    if (code.m == 0) throw Error(Errc::schema, "code: m must be positive");
    if (code.l != code.m) throw Error(Errc::dimension, "code: only square m x m codewords are supported");
    std::vector<int> cover(code.m * code.l, 0);
    for (std::size_t i = 0; i < code.layers.size(); ++i) {
        const Layer& layer = code.layers[i];
        if (layer.shift >= code.m) throw Error(Errc::schema, "code: layer shift out of range");
        if (static_cast<std::size_t>(layer.G.rows()) != code.m || static_cast<std::size_t>(layer.G.cols()) != code.m)
            throw Error(Errc::dimension, "code: layer generator must be m x m");
        Eigen::FullPivLU<CMatrix> lu(layer.G);
        if (lu.rank() < layer.G.rows()) throw Error(Errc::singular, "code: layer " + std::to_string(i) + " generator is not invertible");
        for (const auto& p : layer_positions(code.m, layer.shift))
            if (++cover[p.row * code.l + p.col] > 1)
                throw Error(Errc::overlap, "code: layer " + std::to_string(i) + " overlaps cell (" + std::to_string(p.row) + ", " +
                                               std::to_string(p.col) + ")");
    }
    for (int c : cover)
        if (c == 0) throw Error(Errc::schema, "code: layers do not cover the codeword");
}

inline CodeDefinition golden_code() {
    const double s5 = std::sqrt(5.0);
    const double th = (1.0 + s5) / 2.0;
    const double th_c = (1.0 - s5) / 2.0;
    const cplx i1{0.0, 1.0};
    const cplx a = 1.0 + i1 - i1 * th;
    const cplx a_c = 1.0 + i1 - i1 * th_c;
    CMatrix g1(2, 2), g2(2, 2);
    g1 << a, a * th, a_c, a_c * th_c;
    g2 << a, a * th, i1 * a_c, i1 * a_c * th_c;
    g1 /= s5;
    g2 /= s5;
    return {"golden", 2, 2, {{0, g1}, {1, g2}}};
}

// Uncoded transmission: every layer is the identity.
inline CodeDefinition identity_code(std::size_t m) {
    CodeDefinition code{"identity", m, m, {}};
    for (std::size_t p = 0; p < m; ++p) code.layers.push_back({p, CMatrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))});
    return code;
}

inline nlohmann::json to_json(const CodeDefinition& code) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : code.layers) layers.push_back({{"shift", layer.shift}, {"G", cmatrix_to_json(layer.G)}});
    return {{"name", code.name}, {"m", code.m}, {"l", code.l}, {"layers", layers}};
}

inline CodeDefinition code_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::schema, "code: expected an object");
    for (const char* key : {"m", "l", "layers"})
        if (!j.contains(key)) throw Error(Errc::schema, std::string("code: missing field '") + key + "'");
    if (!j["m"].is_number_unsigned() || !j["l"].is_number_unsigned()) throw Error(Errc::schema, "code: m and l must be positive integers");
    if (!j["layers"].is_array()) throw Error(Errc::schema, "code: layers must be an array");
    CodeDefinition code;
    code.name = j.value("name", std::string("unnamed"));
    code.m = j["m"].get<std::size_t>();
    code.l = j["l"].get<std::size_t>();
    std::size_t index = 0;
    for (const auto& lj : j["layers"]) {
        if (!lj.is_object() || !lj.contains("G")) throw Error(Errc::schema, "code: each layer needs a G matrix");
        Layer layer;
        layer.shift = index;
        if (lj.contains("shift")) {
            if (!lj["shift"].is_number_unsigned()) throw Error(Errc::schema, "code: shift must be a nonnegative integer");
            layer.shift = lj["shift"].get<std::size_t>();
        }
        layer.G = cmatrix_from_json(lj["G"]);
        code.layers.push_back(std::move(layer));
        ++index;
    }
    validate_code(code);
    return code;
}

inline CodeDefinition load_code(const std::string& path) {
    if (path == "golden" || path == "builtin:golden") return golden_code();
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open code file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::schema, "code file '" + path + "': " + e.what());
    }
    return code_from_json(j);
}

// Real-isomorphic form [[Re G, -Im G], [Im G, Re G]].
inline RMatrix expand_real(const CMatrix& g) {
    const Eigen::Index r = g.rows(), c = g.cols();
    RMatrix out(2 * r, 2 * c);
    out.topLeftCorner(r, c) = g.real();
    out.topRightCorner(r, c) = -g.imag();
    out.bottomLeftCorner(r, c) = g.imag();
    out.bottomRightCorner(r, c) = g.real();
    return out;
}

// Stacked [Re s; Im s].
inline std::vector<std::int64_t> expand_real(const IntVec& s) {
    std::vector<std::int64_t> out(2 * s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = s[i].re;
        out[s.size() + i] = s[i].im;
    }
    return out;
}

inline IntVec collapse_real(const std::vector<std::int64_t>& v) {
    if (v.size() % 2 != 0) throw Error(Errc::dimension, "collapse_real: odd length");
    const std::size_t m = v.size() / 2;
    IntVec out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = {v[i], v[m + i]};
    return out;
}

// Places per-layer signal vectors on their cells and applies `scale`.
inline CMatrix assemble_codeword(const CodeDefinition& code, const std::vector<CVector>& layer_signals, double scale = 1.0) {
    if (layer_signals.size() != code.layers.size())
        throw Error(Errc::dimension, "assemble_codeword: expected one vector per layer");
    CMatrix x = CMatrix::Zero(static_cast<Eigen::Index>(code.m), static_cast<Eigen::Index>(code.l));
    for (std::size_t i = 0; i < code.layers.size(); ++i) {
        if (static_cast<std::size_t>(layer_signals[i].size()) != code.m)
            throw Error(Errc::dimension, "assemble_codeword: layer " + std::to_string(i) + " has the wrong length");
        const auto pos = layer_positions(code.m, code.layers[i].shift);
        for (std::size_t k = 0; k < pos.size(); ++k)
            x(static_cast<Eigen::Index>(pos[k].row), static_cast<Eigen::Index>(pos[k].col)) += scale * layer_signals[i](static_cast<Eigen::Index>(k));
    }
    return x;
}

}  // namespace latshape
