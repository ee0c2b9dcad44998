#pragma once

// Histogram files: two-column CSV (tau_ps,counts) plus a JSON sidecar with
// the same stem holding bin_ps, period_ns, excitation and polarization.

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qdtk/errors.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::photon {

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    return p.replace_extension(".json");
}

inline void write_histogram(const CoincidenceHistogram& h, const std::filesystem::path& csv) {
    {
        std::ofstream out(csv);
        if (!out) throw InputError("cannot write " + csv.string());
        out << "tau_ps,counts\n";
        out.precision(17);
        for (std::size_t i = 0; i < h.size(); ++i) out << h.tau_ps[i] << ',' << h.counts[i] << '\n';
        if (!out) throw InputError("write failed for " + csv.string());
    }
    const nlohmann::json meta{{"bin_ps", h.bin_ps},
                              {"period_ns", h.period_ns},
                              {"excitation", to_string(h.excitation)},
                              {"polarization", to_string(h.polarization)}};
    std::ofstream side(sidecar_path(csv));
    if (!side) throw InputError("cannot write " + sidecar_path(csv).string());
    side << meta.dump(2) << '\n';
}

namespace detail {

inline double parse_number(std::string_view s, const std::string& file, const char* field, std::size_t line) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataFormatError("line " + std::to_string(line) + ": not a number '" + std::string(s) + "'", file, field);
    }
    return v;
}

}  // namespace detail

/// Reads a histogram and its sidecar, then validates it (`min_periods` laser
/// periods of half-span).
inline CoincidenceHistogram read_histogram(const std::filesystem::path& csv, double min_periods = 1.0) {
    const std::string file = csv.string();
    std::ifstream in(csv);
    if (!in) throw DataFormatError("cannot open file", file);
    CoincidenceHistogram h;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty() || line == "\r") continue;
        if (no == 1 && line.rfind("tau_ps", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataFormatError("line " + std::to_string(no) + ": expected two columns", file);
        const std::string_view sv(line);
        h.tau_ps.push_back(detail::parse_number(sv.substr(0, comma), file, "tau_ps", no));
        h.counts.push_back(detail::parse_number(sv.substr(comma + 1), file, "counts", no));
    }

    const auto side = sidecar_path(csv);
    std::ifstream sin(side);
    if (!sin) throw DataFormatError("missing JSON sidecar", side.string());
    try {
        const auto meta = nlohmann::json::parse(sin);
        h.bin_ps = meta.at("bin_ps").get<double>();
        h.period_ns = meta.at("period_ns").get<double>();
        h.excitation = parse_excitation(meta.value("excitation", std::string("off-resonant")));
        h.polarization = parse_polarization(meta.value("polarization", std::string("none")));
    } catch (const nlohmann::json::exception& e) {
        throw DataFormatError(e.what(), side.string());
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), side.string());
    }
    try {
        h.validate(min_periods);
    } catch (const DataFormatError& e) {
        throw DataFormatError(e.what(), file);
    }
    return h;
}

}  // namespace qdtk::photon
