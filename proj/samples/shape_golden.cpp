// Shapes a few Golden-code data words with both mappings, prints the lattice
// points and the transmitted codeword, and maps them back.

#include <iostream>
#include <random>

#include "latshape/papr_stats.hpp"
#include "latshape/shaping.hpp"
#include "latshape/stcode.hpp"

using namespace latshape;

namespace {

void print(const char* label, const LatticeVec& v) {
    std::cout << "  " << label << ":";
    for (auto x : v) std::cout << ' ' << x;
    std::cout << '\n';
}

}  // namespace

int main() {
    const CodeDefinition code = golden_code();
    std::mt19937_64 rng(2024);

    for (ShapingMode mode : {ShapingMode::hnf, ShapingMode::plus}) {
        const LayeredShaper ls = build_layered(code, 8, mode);
        std::cout << mode_name(mode) << " (sigma~ = " << ls.schemes.front().sigma_tilde << ", scale = " << ls.scale << ")\n";
        for (int k = 0; k < 2; ++k) {
            const auto [data, lattice] = ls.random_block(rng);
            for (std::size_t p = 0; p < data.size(); ++p) {
                std::cout << " layer " << p << '\n';
                print("data   ", data[p]);
                print("shaped ", lattice[p]);
                print("decoded", decode(ls.schemes[p], lattice[p]));
            }
            const CMatrix x = ls.codeword(lattice);
            std::cout << " codeword\n" << x << "\n";
            const auto papr = papr_of(std::vector<cplx>(x.data(), x.data() + x.size()));
            std::cout << " symbol |x|^2 / mean:";
            for (double v : papr) std::cout << ' ' << v;
            std::cout << "\n\n";
        }
    }
}
