#pragma once

// Field metadata as a JSON sidecar next to the image: field size, alignment
// uncertainty, pixel pitch and, for synthetic fields, the ground truth.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "qdtk/errors.hpp"
#include "qdtk/imaging/synth.hpp"

namespace qdtk::imaging {

struct FieldMeta {
    double field_um = 50.0;
    double dc_nm = 40.0;
    double pixel_pitch_um = 0.1;
    double integration_time_s = 1.0;
    std::optional<std::uint64_t> seed;
    std::optional<GroundTruth> truth;
};

inline std::filesystem::path meta_sidecar(const std::filesystem::path& image) {
    auto p = image;
    return p.replace_extension(".json");
}

inline nlohmann::json truth_to_json(const GroundTruth& t) {
    nlohmann::json em = nlohmann::json::array();
    for (const auto& e : t.emitters) em.push_back({{"x_um", e.x_um}, {"y_um", e.y_um}, {"amplitude", e.amplitude}});
    return {{"field_um", t.field_um},         {"origin_x_um", t.origin_x_um},       {"origin_y_um", t.origin_y_um},
            {"rotation_deg", t.rotation_deg}, {"edge_amplitude", t.edge_amplitude}, {"emitters", em}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth t;
    t.field_um = j.at("field_um").get<double>();
    t.origin_x_um = j.value("origin_x_um", 0.0);
    t.origin_y_um = j.value("origin_y_um", 0.0);
    t.rotation_deg = j.value("rotation_deg", 0.0);
    t.edge_amplitude = j.value("edge_amplitude", 0.0);
    for (const auto& e : j.value("emitters", nlohmann::json::array())) {
        t.emitters.push_back({e.at("x_um").get<double>(), e.at("y_um").get<double>(), e.value("amplitude", 0.0)});
    }
    t.validate();
    return t;
}

inline nlohmann::json meta_to_json(const FieldMeta& m) {
    nlohmann::json j{{"F_um", m.field_um},
                     {"dC_nm", m.dc_nm},
                     {"pixel_pitch_um", m.pixel_pitch_um},
                     {"integration_time_s", m.integration_time_s}};
    if (m.seed) j["seed"] = *m.seed;
    if (m.truth) j["truth"] = truth_to_json(*m.truth);
    return j;
}

inline FieldMeta meta_from_json(const nlohmann::json& j, const std::string& file = {}) {
    FieldMeta m;
    std::string field = "F_um";
    try {
        m.field_um = j.at("F_um").get<double>();
        field = "dC_nm";
        m.dc_nm = j.at("dC_nm").get<double>();
        field = "pixel_pitch_um";
        m.pixel_pitch_um = j.value("pixel_pitch_um", m.pixel_pitch_um);
        field = "integration_time_s";
        m.integration_time_s = j.value("integration_time_s", m.integration_time_s);
        field = "seed";
        if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
        field = "truth";
        if (j.contains("truth")) m.truth = truth_from_json(j["truth"]);
    } catch (const nlohmann::json::exception& e) {
        throw DataFormatError(e.what(), file, field);
    } catch (const InputError& e) {
        throw DataFormatError(e.what(), file, field);
    }
    if (!(m.field_um > 0.0)) throw DataFormatError("field size must be positive", file, "F_um");
    if (!(m.dc_nm >= 0.0)) throw DataFormatError("alignment uncertainty must be non-negative", file, "dC_nm");
    if (!(m.pixel_pitch_um > 0.0)) throw DataFormatError("pixel pitch must be positive", file, "pixel_pitch_um");
    return m;
}

inline void write_meta(const FieldMeta& m, const std::filesystem::path& json) {
    std::ofstream out(json);
    if (!out) throw DataFormatError("cannot open for writing", json.string());
    out << meta_to_json(m).dump(2) << '\n';
}

inline FieldMeta read_meta(const std::filesystem::path& json) {
    std::ifstream in(json);
    if (!in) throw DataFormatError("cannot open", json.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataFormatError(e.what(), json.string());
    }
    return meta_from_json(j, json.string());
}

}  // namespace qdtk::imaging
