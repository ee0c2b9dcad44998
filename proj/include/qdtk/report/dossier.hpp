#pragma once

// Device dossier: JSON report fragments merged under one schema version.
// A fragment is an object with a "kind" and an optional "device".

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "qdtk/errors.hpp"
#include "qdtk/photon/histogram.hpp"

namespace qdtk::report {

inline constexpr std::string_view kDossierSchema = "qdtk.dossier/1";

// the five parts every device dossier is expected to carry
inline constexpr std::array<std::string_view, 5> kCoreSections{"localization", "purity", "indistinguishability",
                                                              "efficiency", "purcell"};

inline nlohmann::json to_json(const photon::Measured& m) { return {{"value", m.value}, {"sigma", m.sigma}}; }

inline nlohmann::json fragment(std::string_view kind, nlohmann::json body, std::string_view device = {}) {
    body["kind"] = kind;
    if (!device.empty()) body["device"] = device;
    return body;
}

/// Result does not depend on the order of `fragments`. Several fragments of
/// one kind are kept as an array in canonical order.
inline nlohmann::json assemble_dossier(std::vector<nlohmann::json> fragments, std::string device = {}) {
    for (const auto& f : fragments) {
        if (!f.is_object() || !f.contains("kind") || !f["kind"].is_string()) {
            throw InputError("report fragment without a string 'kind'");
        }
        if (f.contains("device")) {
            const auto d = f["device"].get<std::string>();
            if (device.empty()) {
                device = d;
            } else if (d != device) {
                throw InputError("fragments from different devices: '" + device + "' and '" + d + "'");
            }
        }
    }
    std::vector<std::pair<std::string, std::string>> keyed;
    for (const auto& f : fragments) keyed.emplace_back(f["kind"].get<std::string>(), f.dump());
    std::sort(keyed.begin(), keyed.end());
    keyed.erase(std::unique(keyed.begin(), keyed.end()), keyed.end());

    nlohmann::json sections = nlohmann::json::object();
    for (const auto& [kind, text] : keyed) {
        auto body = nlohmann::json::parse(text);
        body.erase("kind");
        body.erase("device");
        auto& s = sections[kind];
        if (s.is_null()) s = nlohmann::json::array();
        s.push_back(std::move(body));
    }
    for (auto& [kind, s] : sections.items()) {
        if (s.size() == 1) s = nlohmann::json(s.front());
    }
    nlohmann::json missing = nlohmann::json::array();
    for (auto k : kCoreSections) {
        if (!sections.contains(std::string(k))) missing.push_back(k);
    }
    return {{"schema_version", kDossierSchema},
            {"device", device},
            {"sections", sections},
            {"missing", missing},
            {"complete", missing.empty()}};
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataFormatError("cannot open", path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataFormatError(e.what(), path.string());
    }
}

}  // namespace qdtk::report
