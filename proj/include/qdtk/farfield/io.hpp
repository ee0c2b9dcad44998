#pragma once

// Far-field files: CSV whose header is `theta_deg,<phi_deg...>` and whose rows
// start with theta in degrees, plus a JSON sidecar {dipole, total_power, rho_um}.

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/farfield/collection.hpp"

namespace qdtk::farfield {

namespace detail {

inline std::vector<double> split_numbers(const std::string& line, const std::string& file, std::size_t no,
                                         std::size_t skip_first = 0) {
    std::vector<double> out;
    std::size_t pos = 0;
    std::size_t col = 0;
    while (pos <= line.size()) {
        auto end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string_view cell(line.data() + pos, end - pos);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r' || cell.back() == '\t')) cell.remove_suffix(1);
        if (col >= skip_first) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
                throw DataFormatError("line " + std::to_string(no) + ", column " + std::to_string(col + 1) +
                                          ": not a number '" + std::string(cell) + "'",
                                      file);
            }
            out.push_back(v);
        }
        ++col;
        pos = end + 1;
    }
    return out;
}

}  // namespace detail

inline std::filesystem::path farfield_sidecar(const std::filesystem::path& csv) {
    auto p = csv;
    return p.replace_extension(".json");
}

inline FarFieldGrid read_farfield(const std::filesystem::path& csv) {
    const std::string file = csv.string();
    std::ifstream in(csv);
    if (!in) throw DataFormatError("cannot open file", file);
    std::string line;
    if (!std::getline(in, line) || line.rfind("theta_deg", 0) != 0) {
        throw DataFormatError("header must start with theta_deg", file, "theta_deg");
    }
    constexpr double deg = std::numbers::pi / 180.0;
    FarFieldGrid g;
    for (double p : detail::split_numbers(line, file, 1, 1)) g.phi_rad.push_back(p * deg);
    std::vector<std::vector<double>> rows;
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty() || line == "\r") continue;
        auto v = detail::split_numbers(line, file, no);
        if (v.size() != g.phi_rad.size() + 1) {
            throw DataFormatError("line " + std::to_string(no) + ": expected " + std::to_string(g.phi_rad.size() + 1) +
                                      " columns, found " + std::to_string(v.size()),
                                  file);
        }
        g.theta_rad.push_back(v[0] * deg);
        rows.push_back(std::move(v));
    }
    g.power.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(g.phi_rad.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < g.phi_rad.size(); ++j) {
            g.power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j + 1];
        }
    }

    const auto side = farfield_sidecar(csv);
    std::ifstream sin(side);
    if (!sin) throw DataFormatError("missing JSON sidecar", side.string());
    try {
        const auto meta = nlohmann::json::parse(sin);
        g.dipole = parse_dipole(meta.at("dipole").get<std::string>());
        g.total_power = meta.at("total_power").get<double>();
        g.rho_um = meta.value("rho_um", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw DataFormatError(e.what(), side.string());
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), side.string());
    }
    try {
        g.validate();
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), file);
    }
    return g;
}

inline void write_farfield(const FarFieldGrid& g, const std::filesystem::path& csv) {
    g.validate();
    constexpr double deg = 180.0 / std::numbers::pi;
    {
        std::ofstream out(csv);
        if (!out) throw InputError("cannot write " + csv.string());
        out.precision(17);
        out << "theta_deg";
        for (double p : g.phi_rad) out << ',' << p * deg;
        out << '\n';
        for (std::size_t i = 0; i < g.theta_rad.size(); ++i) {
            out << g.theta_rad[i] * deg;
            for (Eigen::Index j = 0; j < g.power.cols(); ++j) out << ',' << g.power(static_cast<Eigen::Index>(i), j);
            out << '\n';
        }
    }
    std::ofstream side(farfield_sidecar(csv));
    side << nlohmann::json{{"dipole", to_string(g.dipole)}, {"total_power", g.total_power}, {"rho_um", g.rho_um}}.dump(2)
         << '\n';
}

}  // namespace qdtk::farfield
