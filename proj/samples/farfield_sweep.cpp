// Write a toy displacement sweep the `farfield` subcommand can read: cos^n
// lobes that broaden and a Purcell profile that falls off with rho.
//
//   farfield_sweep DIR
//   qdtk farfield --na 0.65 --sweep-dir DIR --out DIR/result.csv

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "qdtk/farfield/collection.hpp"
#include "qdtk/farfield/io.hpp"

int main(int argc, char** argv) {
    using namespace qdtk::farfield;
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s DIR\n", argv[0]);
        return 2;
    }
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);
    std::ofstream sweep(dir / "sweep.csv");
    sweep << "rho_um,P_r,P_phi,farfield_r,farfield_phi\n";

    for (int i = 0; i <= 10; ++i) {
        const double rho = 0.03 * i;
        const double n = 2.0 / (1.0 + 3.0 * rho);  // lobe exponent
        const double fp = 1.0 + 17.1 * std::exp(-rho * rho / (2.0 * 0.1 * 0.1));
        const std::string tag = std::to_string(i);
        // 80 % of the emitted power goes up
        const double norm = 0.8 * fp * (n + 1.0) / (2.0 * std::numbers::pi);
        for (auto d : {Dipole::r, Dipole::phi}) {
            // two-fold azimuthal modulation for the phi dipole
            auto g = FarFieldGrid::sample(
                [&](double t, double ph) {
                    const double a = d == Dipole::r ? 1.0 : 1.0 + 0.2 * std::cos(2.0 * ph);
                    return a * norm * std::pow(std::cos(t), n);
                },
                91, 72);
            g.total_power = fp;
            g.dipole = d;
            g.rho_um = rho;
            write_farfield(g, dir / ("ff_" + std::string(to_string(d)) + tag + ".csv"));
        }
        sweep << rho << ',' << fp << ',' << fp << ",ff_r" << tag << ".csv,ff_phi" << tag << ".csv\n";
    }
    std::printf("wrote %s\n", (dir / "sweep.csv").c_str());
}
