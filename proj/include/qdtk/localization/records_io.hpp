#pragma once

// Localization records as CSV rows, and the campaign summary computed from
// them (so a summary can be rebuilt from the CSV alone).

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/localization/pipeline.hpp"
#include "qdtk/numerics/stats.hpp"

namespace qdtk::localization {

struct RecordRow {
    std::string field;
    double x_um = 0.0;
    double y_um = 0.0;
    double dqh_nm = 0.0;
    double dqv_nm = 0.0;
    double dq_nm = 0.0;
    double dr_nm = 0.0;
    double snr_h = 0.0;
    double snr_v = 0.0;
    double fwhm_h_um = 0.0;
    double fwhm_v_um = 0.0;

    double mean_snr() const { return 0.5 * (snr_h + snr_v); }
};

inline constexpr const char* kRecordHeader = "field,x_um,y_um,dQh_nm,dQv_nm,dQ_nm,dR_nm,snr_h,snr_v,fwhm_h_um,fwhm_v_um";

inline RecordRow to_row(const LocalizationRecord& r) {
    return {r.field_id,          r.x.q_um,    r.y.q_um,    1e3 * r.x.dq_um, 1e3 * r.y.dq_um, 1e3 * r.dq_um,
            1e3 * r.dr_um,       r.snr_h(),   r.snr_v(),   r.fwhm_h_um(),   r.fwhm_v_um()};
}

inline void write_rows(const std::vector<RecordRow>& rows, std::ostream& out) {
    out.precision(10);
    out << kRecordHeader << '\n';
    for (const auto& r : rows) {
        if (r.field.find_first_of(",\n\"") != std::string::npos) {
            throw InputError("field id '" + r.field + "' contains a comma, quote or newline");
        }
        out << r.field << ',' << r.x_um << ',' << r.y_um << ',' << r.dqh_nm << ',' << r.dqv_nm << ',' << r.dq_nm << ','
            << r.dr_nm << ',' << r.snr_h << ',' << r.snr_v << ',' << r.fwhm_h_um << ',' << r.fwhm_v_um << '\n';
    }
}

inline std::vector<RecordRow> read_rows(const std::filesystem::path& csv) {
    const std::string file = csv.string();
    std::ifstream in(csv);
    if (!in) throw DataFormatError("cannot open", file);
    std::string line;
    if (!std::getline(in, line)) throw DataFormatError("empty file", file);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordHeader) throw DataFormatError("unexpected header", file, "header");
    static const char* names[] = {"field",  "x_um",  "y_um",  "dQh_nm",    "dQv_nm",   "dQ_nm",
                                  "dR_nm", "snr_h", "snr_v", "fwhm_h_um", "fwhm_v_um"};
    std::vector<RecordRow> rows;
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while (true) {
            const auto end = line.find(',', pos);
            cells.push_back(line.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (cells.size() != 11) {
            throw DataFormatError("line " + std::to_string(no) + ": expected 11 columns, found " +
                                      std::to_string(cells.size()),
                                  file);
        }
        double v[10];
        for (int k = 0; k < 10; ++k) {
            const auto& c = cells[static_cast<std::size_t>(k + 1)];
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v[k]);
            if (ec != std::errc{} || ptr != c.data() + c.size()) {
                throw DataFormatError("line " + std::to_string(no) + ": not a number '" + c + "'", file, names[k + 1]);
            }
        }
        rows.push_back({cells[0], v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
    }
    return rows;
}

namespace detail {

inline nlohmann::json spread(const std::vector<double>& v) {
    if (v.empty()) return nullptr;
    return {{"median", numerics::median(v)},
            {"p10", numerics::percentile(v, 10.0)},
            {"p90", numerics::percentile(v, 90.0)}};
}

}  // namespace detail

/// Medians and 10/90 percentiles of the budget terms, plus the same for the
/// brightest decile by mean SNR.
inline nlohmann::json summarize(const std::vector<RecordRow>& rows) {
    std::set<std::string> fields;
    std::vector<double> h, v, q, r, snr, fwhm;
    for (const auto& x : rows) {
        fields.insert(x.field);
        h.push_back(x.dqh_nm);
        v.push_back(x.dqv_nm);
        q.push_back(x.dq_nm);
        r.push_back(x.dr_nm);
        snr.push_back(x.mean_snr());
        fwhm.push_back(x.fwhm_h_um);
        fwhm.push_back(x.fwhm_v_um);
    }
    nlohmann::json s{{"fields", fields.size()},
                     {"records", rows.size()},
                     {"dQh_nm", detail::spread(h)},
                     {"dQv_nm", detail::spread(v)},
                     {"dQ_nm", detail::spread(q)},
                     {"dR_nm", detail::spread(r)},
                     {"snr", detail::spread(snr)},
                     {"fwhm_um", detail::spread(fwhm)}};
    if (!rows.empty()) {
        const double cut = numerics::percentile(snr, 90.0);
        std::vector<double> dh, dv, dq, dr;
        for (const auto& x : rows) {
            if (x.mean_snr() < cut) continue;
            dh.push_back(x.dqh_nm);
            dv.push_back(x.dqv_nm);
            dq.push_back(x.dq_nm);
            dr.push_back(x.dr_nm);
        }
        s["brightest_decile"] = {{"snr_threshold", cut},
                                 {"records", dq.size()},
                                 {"dQh_nm", numerics::median(dh)},
                                 {"dQv_nm", numerics::median(dv)},
                                 {"dQ_nm", numerics::median(dq)},
                                 {"dR_nm", numerics::median(dr)}};
    }
    return s;
}

}  // namespace qdtk::localization
