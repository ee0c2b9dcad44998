#pragma once

// Image files: 16-bit binary PGM and plain CSV matrices. Both store the top
// image row first, so row 0 (the lower edge) is the last line on disk.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/image.hpp"

namespace qdtk::imaging {

namespace detail {

inline std::string pgm_token(std::istream& in, const std::string& file) {
    std::string tok;
    char ch = 0;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            tok.push_back(ch);
            break;
        }
    }
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) tok.push_back(ch);
    if (tok.empty()) throw DataFormatError("truncated PGM header", file, "header");
    return tok;
}

inline int parse_int(const std::string& tok, const std::string& file, const std::string& field) {
    int v = 0;
    const auto* end = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || p != end) throw DataFormatError("expected an integer, got '" + tok + "'", file, field);
    return v;
}

}  // namespace detail

inline void write_pgm(const PixelImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot open for writing", path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
    std::vector<unsigned char> row(2 * static_cast<std::size_t>(img.width()));
    for (int r = img.height() - 1; r >= 0; --r) {
        for (int c = 0; c < img.width(); ++c) {
            const double v = std::clamp(std::round(img(r, c)), 0.0, 65535.0);
            const auto u = static_cast<std::uint16_t>(v);
            row[2 * c] = static_cast<unsigned char>(u >> 8);
            row[2 * c + 1] = static_cast<unsigned char>(u & 0xff);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataFormatError("write failed", path.string());
}

inline PixelImage read_pgm(const std::filesystem::path& path, double pixel_pitch_um = 0.1,
                           double integration_time_s = 1.0) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError("cannot open", file);
    if (detail::pgm_token(in, file) != "P5") throw DataFormatError("not a binary PGM (P5)", file, "magic");
    const int w = detail::parse_int(detail::pgm_token(in, file), file, "width");
    const int h = detail::parse_int(detail::pgm_token(in, file), file, "height");
    const int maxval = detail::parse_int(detail::pgm_token(in, file), file, "maxval");
    if (w <= 0 || h <= 0) throw DataFormatError("non-positive dimensions", file, "width/height");
    if (maxval <= 0 || maxval > 65535) throw DataFormatError("maxval outside 1..65535", file, "maxval");
    const int bytes = maxval > 255 ? 2 : 1;
    PixelImage::Data data(h, w);
    std::vector<unsigned char> row(static_cast<std::size_t>(bytes) * w);
    for (int r = h - 1; r >= 0; --r) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (in.gcount() != static_cast<std::streamsize>(row.size())) {
            throw DataFormatError("truncated pixel data", file, "pixels");
        }
        for (int c = 0; c < w; ++c) {
            data(r, c) = bytes == 2 ? static_cast<double>((row[2 * c] << 8) | row[2 * c + 1]) : row[c];
        }
    }
    try {
        return PixelImage(std::move(data), pixel_pitch_um, integration_time_s);
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), file);
    }
}

inline void write_csv_matrix(const PixelImage& img, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataFormatError("cannot open for writing", path.string());
    out.precision(17);
    for (int r = img.height() - 1; r >= 0; --r) {
        for (int c = 0; c < img.width(); ++c) {
            if (c) out << ',';
            out << img(r, c);
        }
        out << '\n';
    }
    if (!out) throw DataFormatError("write failed", path.string());
}

inline PixelImage read_csv_matrix(const std::filesystem::path& path, double pixel_pitch_um = 0.1,
                                  double integration_time_s = 1.0) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw DataFormatError("cannot open", file);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw DataFormatError("non-numeric cell '" + cell + "'", file, "line " + std::to_string(lineno));
            }
        }
        if (!rows.empty() && vals.size() != rows.front().size()) {
            throw DataFormatError("ragged row", file, "line " + std::to_string(lineno));
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw DataFormatError("empty matrix", file);
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    PixelImage::Data data(h, w);
    for (int i = 0; i < h; ++i) {
        for (int c = 0; c < w; ++c) data(h - 1 - i, c) = rows[i][c];
    }
    try {
        return PixelImage(std::move(data), pixel_pitch_um, integration_time_s);
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), file);
    }
}

}  // namespace qdtk::imaging
