// qdtk: command-line front end.
//
// Exit codes: 0 success, 1 failed self-test checks, 2 usage, 3 data format,
// 4 fit did not converge.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdtk/qdtk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using qdtk::report::to_json;

namespace {

enum ExitCode { kOk = 0, kChecksFailed = 1, kUsage = 2, kDataFormat = 3, kNoConvergence = 4 };

class UsageError : public qdtk::Error {
public:
    using Error::Error;
};

// ------------------------------------------------------------------ output

// Files are written into a hidden directory beside the target and renamed
// into place on commit, so readers never see a partial artifact.
class StagedOutput {
public:
    explicit StagedOutput(const fs::path& target) : target_(target) {
        parent_ = target.parent_path().empty() ? fs::path(".") : target.parent_path();
        fs::create_directories(parent_);
        dir_ = parent_ / ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    StagedOutput(const StagedOutput&) = delete;
    StagedOutput& operator=(const StagedOutput&) = delete;
    ~StagedOutput() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }

    fs::path path() const { return dir_ / target_.filename(); }

    void commit() {
        for (const auto& e : fs::directory_iterator(dir_)) fs::rename(e.path(), parent_ / e.path().filename());
    }

private:
    fs::path target_;
    fs::path parent_;
    fs::path dir_;
};

void write_text(const fs::path& target, const std::string& text) {
    StagedOutput s(target);
    {
        std::ofstream out(s.path());
        if (!out) throw qdtk::DataFormatError("cannot open for writing", target.string());
        out << text;
        if (!out) throw qdtk::DataFormatError("write failed", target.string());
    }
    s.commit();
}

// JSON to a file, or to stdout when no path is given
void emit_json(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text(out, j.dump(2) + "\n");
    }
}

json with_kind(std::string_view kind, json body, const std::string& device) {
    return qdtk::report::fragment(kind, std::move(body), device);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, bool& automatic) {
    automatic = !seed;
    if (seed) return *seed;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "auto seed: " << s << '\n';
    return s;
}

// ------------------------------------------------------------------ input

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

// Numeric CSV with a header line; `min_cols`..`max_cols` columns.
// Empty cells read as NaN when `allow_empty` is set.
Table read_table(const fs::path& path, std::size_t min_cols, std::size_t max_cols, bool allow_empty = false) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw qdtk::DataFormatError("cannot open", file);
    auto split = [](std::string line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            const auto a = c.find_first_not_of(" \t");
            const auto b = c.find_last_not_of(" \t");
            cells.push_back(a == std::string::npos ? std::string() : c.substr(a, b - a + 1));
        }
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw qdtk::DataFormatError("empty file", file);
    Table t;
    t.header = split(line);
    if (t.header.size() < min_cols || t.header.size() > max_cols) {
        throw qdtk::DataFormatError("expected " + std::to_string(min_cols) + " to " + std::to_string(max_cols) +
                                        " header columns, found " + std::to_string(t.header.size()),
                                    file, "header");
    }
    t.columns.resize(t.header.size());
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw qdtk::DataFormatError("line " + std::to_string(no) + ": expected " +
                                            std::to_string(t.header.size()) + " columns",
                                        file);
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            double v = 0.0;
            const auto& c = cells[k];
            if (c.empty() && allow_empty) {
                t.columns[k].push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{} || ptr != c.data() + c.size()) {
                throw qdtk::DataFormatError("line " + std::to_string(no) + ": not a number '" + c + "'", file,
                                            t.header[k]);
            }
            t.columns[k].push_back(v);
        }
    }
    if (t.columns.front().empty()) throw qdtk::DataFormatError("no data rows", file);
    return t;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& args, std::initializer_list<const char*> exts) {
    std::vector<fs::path> out;
    for (const auto& a : args) {
        const fs::path p(a);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto ext = e.path().extension().string();
                if (e.is_regular_file() && std::find(exts.begin(), exts.end(), ext) != exts.end()) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw qdtk::DataFormatError("no such file or directory", a);
        }
    }
    return out;
}

qdtk::imaging::PixelImage read_image(const fs::path& p, double pitch, double integration) {
    if (p.extension() == ".csv") return qdtk::imaging::read_csv_matrix(p, pitch, integration);
    return qdtk::imaging::read_pgm(p, pitch, integration);
}

// ------------------------------------------------------------------ config

// A campaign config is JSON. Its values become flags placed before the
// user's own, so flags given on the command line win.
struct ConfigFlags {
    std::vector<std::string> args;
};

void check_range(const json& c, const char* key, double lo, double hi, bool open_lo, const std::string& file) {
    if (!c.contains(key)) return;
    if (!c[key].is_number()) throw UsageError(file + ": field 'constants." + key + "': not a number");
    const double v = c[key].get<double>();
    const bool ok = (open_lo ? v > lo : v >= lo) && v < hi;
    if (!ok) throw UsageError(file + ": field 'constants." + key + "': value " + std::to_string(v) + " out of range");
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
}

ConfigFlags config_flags(const fs::path& path, const CLI::App& sub) {
    const std::string file = path.string();
    json cfg;
    try {
        cfg = qdtk::report::read_json(path);
    } catch (const qdtk::DataFormatError& e) {
        throw UsageError(e.what());
    }
    if (!cfg.is_object()) throw UsageError(file + ": config must be a JSON object");

    std::map<std::string, json> values;
    if (cfg.contains("paths")) {
        const auto& p = cfg["paths"];
        for (const char* key : {"images", "histograms", "farfield"}) {
            if (p.contains(key) && !fs::exists(p[key].get<std::string>())) {
                throw UsageError(file + ": field 'paths." + key + "': '" + p[key].get<std::string>() +
                                 "' does not exist");
            }
        }
        if (p.contains("images")) values["input-dir"] = p["images"];
        if (p.contains("farfield")) values["sweep-dir"] = p["farfield"];
        if (p.contains("histograms")) values["histogram-dir"] = p["histograms"];
        if (p.contains("output")) values["out-dir"] = p["output"];
    }
    if (cfg.contains("constants")) {
        const auto& c = cfg["constants"];
        check_range(c, "F_um", 0.0, 1e4, true, file);
        check_range(c, "dC_nm", 0.0, 1e4, false, file);
        check_range(c, "wavelength_um", 0.0, 100.0, true, file);
        check_range(c, "NA", 0.0, 1.0, true, file);
        check_range(c, "rep_rate_hz", 0.0, 1e12, true, file);
        const std::pair<const char*, const char*> map[] = {
            {"F_um", "field-um"}, {"dC_nm", "dc-nm"}, {"wavelength_um", "wavelength-um"}, {"NA", "na"}, {"rep_rate_hz", "rep-rate"}};
        for (const auto& [k, flag] : map) {
            if (c.contains(k)) values[flag] = c[k];
        }
    }
    if (cfg.contains("seed")) values["seed"] = cfg["seed"];
    if (cfg.contains(sub.get_name())) {
        for (const auto& [k, v] : cfg[sub.get_name()].items()) values[k] = v;
    }

    ConfigFlags out;
    for (const auto& [key, v] : values) {
        const auto* opt = sub.get_option_no_throw("--" + key);
        if (!opt) {
            // shared sections may name flags other subcommands use
            if (cfg.contains(sub.get_name()) && cfg[sub.get_name()].contains(key)) {
                throw UsageError(file + ": field '" + sub.get_name() + "." + key + "': no such option");
            }
            continue;
        }
        if (v.is_boolean()) {
            if (v.get<bool>()) out.args.push_back("--" + key);
        } else if (v.is_array()) {
            for (const auto& x : v) {
                out.args.push_back("--" + key);
                out.args.push_back(scalar_text(x));
            }
        } else {
            out.args.push_back("--" + key);
            out.args.push_back(scalar_text(v));
        }
    }
    return out;
}

// ------------------------------------------------------------------ subcommands

struct Global {
    unsigned jobs = qdtk::default_jobs();
    std::string config;
};

// synth-field ---------------------------------------------------------------

struct SynthFieldArgs {
    std::string out;
    std::string out_dir;
    int count = 1;
    std::optional<std::uint64_t> seed;
    int emitters = 7;
    double field_um = 50.0;
    double dc_nm = 40.0;
    double wavelength_um = 1.55;
    double na = 0.65;
    double broadening = 1.36;
    double snr_median = 10.0;
    bool fixed_snr = false;
    std::string format = "pgm";
};

int run_synth_field(const SynthFieldArgs& a, const Global& g) {
    if (a.out.empty() == a.out_dir.empty()) throw UsageError("give exactly one of --out and --out-dir");
    if (!a.out.empty() && a.count != 1) throw UsageError("--count needs --out-dir");
    bool automatic = false;
    const std::uint64_t seed0 = resolve_seed(a.seed, automatic);

    qdtk::imaging::CampaignPreset preset;
    preset.field_um = a.field_um;
    preset.emitters = a.emitters;
    preset.psf.wavelength_um = a.wavelength_um;
    preset.psf.na = a.na;
    preset.psf.broadening = a.broadening;
    preset.snr_median = a.snr_median;
    preset.random_snr = !a.fixed_snr;

    std::vector<fs::path> targets;
    if (!a.out.empty()) {
        targets.emplace_back(a.out);
    } else {
        for (int k = 0; k < a.count; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "field_%04d.%s", k, a.format.c_str());
            targets.push_back(fs::path(a.out_dir) / name);
        }
    }
    qdtk::parallel_for(targets.size(), g.jobs, [&](std::size_t k) {
        const std::uint64_t seed = seed0 + k;
        auto truth = qdtk::imaging::random_truth(preset, seed);
        qdtk::imaging::NoiseModel n = preset.noise;
        n.seed = seed;
        const auto field = qdtk::imaging::synthesize_field(truth, preset.psf, n, preset.geometry);

        qdtk::imaging::FieldMeta meta;
        meta.field_um = a.field_um;
        meta.dc_nm = a.dc_nm;
        meta.pixel_pitch_um = preset.geometry.pixel_pitch_um;
        meta.integration_time_s = preset.geometry.integration_time_s;
        meta.seed = seed;
        meta.truth = std::move(truth);

        StagedOutput s(targets[k]);
        if (targets[k].extension() == ".csv") {
            qdtk::imaging::write_csv_matrix(field.image, s.path());
        } else {
            qdtk::imaging::write_pgm(field.image, s.path());
        }
        auto j = qdtk::imaging::meta_to_json(meta);
        j["seed_auto"] = automatic;
        j["overlapping"] = field.overlapping;
        std::ofstream(qdtk::imaging::meta_sidecar(s.path())) << j.dump(2) << '\n';
        s.commit();
    });
    std::cout << "wrote " << targets.size() << " field(s), seeds " << seed0 << ".." << seed0 + targets.size() - 1
              << '\n';
    return kOk;
}

// localize ------------------------------------------------------------------

struct LocalizeArgs {
    std::vector<std::string> inputs;
    std::string input_dir;
    std::string out;
    std::string summary;
    std::string from_csv;
    std::string device;
    double field_um = 50.0;
    double dc_nm = 40.0;
    double pitch_um = 0.1;
    int section_width = 10;
    double expected_fwhm_um = 1.6;
};

json localization_fragment(const std::vector<qdtk::localization::RecordRow>& rows, const std::string& device) {
    return with_kind("localization", {{"summary", qdtk::localization::summarize(rows)}}, device);
}

fs::path summary_path(const LocalizeArgs& a, const fs::path& csv) {
    if (!a.summary.empty()) return a.summary;
    auto p = csv;
    return p.replace_extension(".summary.json");
}

int run_localize(const LocalizeArgs& a, const Global& g) {
    namespace loc = qdtk::localization;
    if (!a.from_csv.empty()) {
        const auto rows = loc::read_rows(a.from_csv);
        const auto frag = localization_fragment(rows, a.device);
        if (a.summary.empty()) {
            std::cout << frag.dump(2) << '\n';
        } else {
            write_text(a.summary, frag.dump(2) + "\n");
        }
        return kOk;
    }
    if (a.out.empty()) throw UsageError("--out is required unless --from-csv is given");
    auto args = a.inputs;
    if (!a.input_dir.empty()) args.push_back(a.input_dir);
    if (args.empty()) throw UsageError("no input images");
    const auto files = expand_inputs(args, {".pgm", ".csv"});
    if (files.empty()) throw UsageError("no .pgm or .csv images among the inputs");

    struct Slot {
        std::vector<loc::RecordRow> rows;
        std::vector<std::string> notes;
        int truth_hits = 0;
        int truth_trials = 0;
        std::string error;
    };
    std::vector<Slot> slots(files.size());
    qdtk::parallel_for(files.size(), g.jobs, [&](std::size_t i) {
        const auto& f = files[i];
        qdtk::imaging::FieldMeta meta;
        meta.field_um = a.field_um;
        meta.dc_nm = a.dc_nm;
        meta.pixel_pitch_um = a.pitch_um;
        const auto side = qdtk::imaging::meta_sidecar(f);
        if (fs::exists(side)) meta = qdtk::imaging::read_meta(side);
        const auto img = read_image(f, meta.pixel_pitch_um, meta.integration_time_s);

        loc::LocalizeConfig cfg;
        cfg.field_id = f.stem().string();
        cfg.section_width = a.section_width;
        cfg.expected_fwhm_um = a.expected_fwhm_um;
        auto& s = slots[i];
        try {
            const auto res = loc::localize_field(img, meta.field_um, 1e-3 * meta.dc_nm, cfg);
            for (const auto& r : res.records) s.rows.push_back(loc::to_row(r));
            s.notes = res.notes;
            if (meta.truth) {
                for (const auto& r : res.records) {
                    double best = 1e300;
                    for (const auto& e : meta.truth->emitters) {
                        best = std::min(best, std::hypot(r.x.q_um - e.x_um, r.y.q_um - e.y_um));
                    }
                    ++s.truth_trials;
                    s.truth_hits += best <= 2.0 * r.dq_um;
                }
            }
        } catch (const qdtk::DataFormatError&) {
            throw;
        } catch (const qdtk::Error& e) {
            s.error = e.what();
        }
    });

    std::vector<loc::RecordRow> rows;
    json fields = json::array();
    int hits = 0;
    int trials = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& s = slots[i];
        rows.insert(rows.end(), s.rows.begin(), s.rows.end());
        json f{{"file", files[i].string()}, {"records", s.rows.size()}, {"notes", s.notes}};
        if (!s.error.empty()) f["error"] = s.error;
        fields.push_back(f);
        hits += s.truth_hits;
        trials += s.truth_trials;
    }
    // records of all fields, brightest first within each field
    std::ostringstream csv;
    loc::write_rows(rows, csv);
    write_text(a.out, csv.str());

    auto frag = localization_fragment(rows, a.device);
    frag["fields"] = fields;
    frag["records_csv"] = a.out;
    if (trials > 0) {
        frag["truth_coverage_2dQ"] = static_cast<double>(hits) / trials;
    }
    write_text(summary_path(a, a.out), frag.dump(2) + "\n");
    std::cout << rows.size() << " records from " << files.size() << " field(s)\n";
    return kOk;
}

// synth-hist ----------------------------------------------------------------

struct SynthHistArgs {
    std::string model = "quasi-resonant";
    std::string pol = "co";
    int preset = 1;
    std::optional<double> g2;
    std::optional<double> counts;
    double bin_ps = 50.0;
    std::optional<double> half_span_ps;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int run_synth_hist(const SynthHistArgs& a, const Global&) {
    namespace ph = qdtk::photon;
    namespace pre = qdtk::photon::presets;
    bool automatic = false;
    ph::SynthOptions o;
    o.seed = resolve_seed(a.seed, automatic);
    o.bin_ps = a.bin_ps;
    auto pick = [&](std::size_t n) {
        if (a.preset < 0 || static_cast<std::size_t>(a.preset) >= n) {
            throw UsageError("--preset must lie in 0.." + std::to_string(n - 1) + " for " + a.model);
        }
        return static_cast<std::size_t>(a.preset);
    };
    ph::CoincidenceHistogram h;
    json params;
    if (a.model == "off-resonant") {
        const auto& c = pre::kOffResonant[pick(pre::kOffResonant.size())];
        o.half_span_ps = a.half_span_ps.value_or(80000.0);
        o.total_counts = a.counts.value_or(1e5);
        h = ph::synth_histogram(c.params, o);
        params = {{"preset", std::string(c.label)}};
    } else if (a.model == "quasi-resonant") {
        const auto& c = pre::kQuasiResonant[pick(pre::kQuasiResonant.size())];
        o.half_span_ps = a.half_span_ps.value_or(80000.0);
        o.total_counts = a.counts.value_or(pre::kQuasiTotalCounts);
        const double g2 = a.g2.value_or(c.g2_raw.value);
        h = ph::synth_histogram(pre::quasi_params(c, g2), o);
        params = {{"preset", std::string(c.label)}, {"g2_zero", g2}};
    } else if (a.model == "hom") {
        const auto& c = pre::kHom[pick(pre::kHom.size())];
        const auto pol = ph::parse_polarization(a.pol);
        if (pol == ph::Polarization::none) throw UsageError("--pol must be co or cross for hom");
        o.half_span_ps = a.half_span_ps.value_or(pre::kHomHalfSpanPs);
        o.total_counts = a.counts.value_or(pol == ph::Polarization::co ? c.total_co : c.total_cross);
        h = ph::synth_histogram(pol == ph::Polarization::co ? c.co : pre::hom_cross_params(c), pol, o);
        params = {{"preset", std::string(c.label)}};
    } else {
        throw UsageError("--model must be off-resonant, quasi-resonant or hom");
    }

    StagedOutput s(a.out);
    ph::write_histogram(h, s.path());
    const auto side = ph::sidecar_path(s.path());
    auto meta = qdtk::report::read_json(side);
    meta["seed"] = o.seed;
    meta["seed_auto"] = automatic;
    meta["total_counts"] = o.total_counts;
    meta["generator"] = params;
    std::ofstream(side) << meta.dump(2) << '\n';
    s.commit();
    std::cout << "wrote " << a.out << " (" << h.size() << " bins, seed " << o.seed << ")\n";
    return kOk;
}

// fit-g2 --------------------------------------------------------------------

struct FitG2Args {
    std::string input;
    std::string model = "auto";
    double window_ns = 6.0;
    std::string out;
    std::string device;
};

json off_resonant_json(const qdtk::photon::OffResonantG2& p, const qdtk::photon::OffResonantG2& s) {
    return {{"background", to_json({p.background, s.background})},
            {"center_scale", to_json({p.center_scale, s.center_scale})},
            {"side_height", to_json({p.side_height, s.side_height})},
            {"tau_dec_ps", to_json({p.tau_dec_ps, s.tau_dec_ps})},
            {"tau_cap_ps", to_json({p.tau_cap_ps, s.tau_cap_ps})},
            {"period_ns", to_json({p.period_ns, s.period_ns})}};
}

json quasi_json(const qdtk::photon::QuasiResonantG2& p, const qdtk::photon::QuasiResonantG2& s) {
    return {{"scale", to_json({p.scale, s.scale})},
            {"g2_zero", to_json({p.g2_zero, s.g2_zero})},
            {"tau_dec_ps", to_json({p.tau_dec_ps, s.tau_dec_ps})},
            {"period_ns", to_json({p.period_ns, s.period_ns})}};
}

template <class Fit>
void require_converged(const Fit& f, const std::string& file) {
    if (!f.converged) {
        throw qdtk::FitError(file + ": fit did not converge after " + std::to_string(f.iterations) + " iterations");
    }
}

int run_fit_g2(const FitG2Args& a, const Global&) {
    namespace ph = qdtk::photon;
    const auto h = ph::read_histogram(a.input, 1.0);
    ph::Excitation model = h.excitation;
    if (a.model != "auto") model = ph::parse_excitation(a.model);

    json body{{"input", a.input}, {"excitation", ph::to_string(model)}};
    if (model == ph::Excitation::off_resonant) {
        const auto f = ph::fit_g2_off_resonant(h);
        require_converged(f, a.input);
        body["params"] = off_resonant_json(f.params, f.sigma);
        body["g2_zero_fit"] = to_json(f.g2_zero);
        body["mean_residual"] = f.mean_residual;
        body["iterations"] = f.iterations;
        body["warnings"] = f.warnings;
    } else {
        const auto f = ph::fit_g2_quasi_resonant(h);
        require_converged(f, a.input);
        body["params"] = quasi_json(f.params, f.sigma);
        body["g2_zero_fit"] = to_json(f.g2_zero);
        body["mean_residual"] = f.mean_residual;
        body["iterations"] = f.iterations;
        body["warnings"] = f.warnings;
        try {
            const auto r = ph::g2_zero_raw(h, a.window_ns);
            body["g2_zero_raw"] = {{"value", r.value}, {"sigma", r.sigma}, {"side_peaks", r.side_peaks}};
        } catch (const qdtk::InputError& e) {
            body["g2_zero_raw"] = {{"error", e.what()}};
        }
    }
    try {
        const auto b = ph::blinking_check(h);
        body["blinking"] = {{"blinking", b.blinking}, {"decay_per_100", b.decay_per_100}, {"slope", b.slope}};
    } catch (const qdtk::InputError& e) {
        body["blinking"] = {{"error", e.what()}};
    }
    emit_json(with_kind("purity", body, a.device), a.out);
    return kOk;
}

// fit-hom -------------------------------------------------------------------

struct FitHomArgs {
    std::string co;
    std::string cross;
    std::string out;
    std::string device;
};

json hom_fit_json(const qdtk::photon::HomFit& f) {
    json a = json::array();
    json b = json::array();
    for (int k = 0; k < 5; ++k) {
        a.push_back(to_json(f.center_norm[static_cast<std::size_t>(k)]));
        b.push_back(to_json(f.outer_norm[static_cast<std::size_t>(k)]));
    }
    return {{"A", a},
            {"B", b},
            {"tau_ps", to_json({f.params.tau_ps, f.sigma.tau_ps})},
            {"coherence_ps", to_json({f.params.coherence_ps, f.sigma.coherence_ps})},
            {"v_ps", to_json({f.params.v_ps, f.sigma.v_ps})},
            {"mfr", f.mean_residual},
            {"iterations", f.iterations},
            {"warnings", f.warnings}};
}

int run_fit_hom(const FitHomArgs& a, const Global&) {
    namespace ph = qdtk::photon;
    const auto co = ph::read_histogram(a.co, 1.0);
    const auto cross = ph::read_histogram(a.cross, 1.0);
    const auto f = ph::fit_hom_pair(co, cross);
    const json body{{"co_input", a.co},
                    {"cross_input", a.cross},
                    {"visibility", to_json(f.visibility)},
                    {"post_selected_visibility", to_json(f.post_selected)},
                    {"g2_corrected", false},
                    {"co", hom_fit_json(f.co)},
                    {"cross", hom_fit_json(f.cross)}};
    emit_json(with_kind("indistinguishability", body, a.device), a.out);
    return kOk;
}

// lifetime ------------------------------------------------------------------

struct LifetimeArgs {
    std::string input;
    std::optional<double> start_ps;
    double start_offset_ps = 0.0;
    std::string role = "cavity";
    std::string out;
    std::string device;
};

int run_lifetime(const LifetimeArgs& a, const Global&) {
    const auto t = read_table(a.input, 2, 2);
    qdtk::photon::LifetimeOptions o;
    o.start_ps = a.start_ps;
    o.start_offset_ps = a.start_offset_ps;
    const auto f = qdtk::photon::fit_lifetime(t.columns[0], t.columns[1], o);
    const json body{{"input", a.input},
                    {"role", a.role},
                    {"tau_ns", to_json({1e-3 * f.tau_ps.value, 1e-3 * f.tau_ps.sigma})},
                    {"amplitude", to_json(f.amplitude)},
                    {"background", to_json(f.background)},
                    {"start_ps", f.start_ps},
                    {"iterations", f.iterations}};
    emit_json(with_kind("lifetime", body, a.device), a.out);
    return kOk;
}

// efficiency ----------------------------------------------------------------

struct EfficiencyArgs {
    double count_rate = 0.0;
    double count_rate_sigma = qdtk::metrics::kDefaultCountRateSigma;
    double rep_rate = 80e6;
    std::optional<double> setup_eta;
    double setup_sigma = 0.0;
    std::string chain;
    std::optional<double> g2;
    std::string out;
    std::string device;
};

qdtk::metrics::TransmissionChain read_chain(const fs::path& path) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw qdtk::DataFormatError("cannot open", file);
    std::string line;
    std::getline(in, line);
    if (line.rfind("name,transmission,sigma", 0) != 0) {
        throw qdtk::DataFormatError("header must be name,transmission,sigma", file, "header");
    }
    qdtk::metrics::TransmissionChain chain;
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty() || line == "\r") continue;
        const auto c2 = line.rfind(',');
        const auto c1 = c2 == std::string::npos ? std::string::npos : line.rfind(',', c2 - 1);
        if (c1 == std::string::npos) throw qdtk::DataFormatError("line " + std::to_string(no) + ": expected 3 columns", file);
        qdtk::metrics::ChainElement e;
        e.name = line.substr(0, c1);
        const std::string_view sv(line);
        e.transmission = qdtk::photon::detail::parse_number(sv.substr(c1 + 1, c2 - c1 - 1), file, "transmission", no);
        e.sigma = qdtk::photon::detail::parse_number(sv.substr(c2 + 1), file, "sigma", no);
        chain.push_back(e);
    }
    try {
        qdtk::metrics::validate(chain);
    } catch (const qdtk::InputError& e) {
        throw qdtk::DataFormatError(e.what(), file);
    }
    return chain;
}

int run_efficiency(const EfficiencyArgs& a, const Global&) {
    namespace m = qdtk::metrics;
    qdtk::photon::Measured setup;
    json chain_json = nullptr;
    if (a.setup_eta) {
        if (!a.chain.empty()) throw UsageError("give either --setup-eta or --chain, not both");
        setup = {*a.setup_eta, a.setup_sigma};
    } else {
        const auto chain = a.chain.empty() ? m::reference_setup() : read_chain(a.chain);
        setup = m::chain_efficiency(chain);
        chain_json = json::array();
        for (const auto& e : chain) {
            chain_json.push_back({{"name", e.name}, {"transmission", e.transmission}, {"sigma", e.sigma}});
        }
    }
    const auto r = m::extraction_efficiency(a.count_rate, a.rep_rate, setup, a.g2, a.count_rate_sigma);
    json body{{"eta", to_json(r.eta)},
              {"count_rate", to_json(r.count_rate)},
              {"rep_rate_hz", r.rep_rate_hz},
              {"setup", to_json(r.setup)},
              {"g2_correction", r.g2_correction},
              {"assumption", "unity internal quantum efficiency; eta is a lower limit"}};
    if (!chain_json.is_null()) body["chain"] = chain_json;
    emit_json(with_kind("efficiency", body, a.device), a.out);
    return kOk;
}

// purcell -------------------------------------------------------------------

struct PurcellArgs {
    std::optional<double> tau_cav_ns;
    double tau_cav_sigma_ns = 0.0;
    std::optional<double> tau_ref_ns;
    double tau_ref_sigma_ns = 0.0;
    std::string cav;
    std::string ref;
    std::string out;
    std::string device;
};

qdtk::photon::Measured lifetime_from(const std::string& file) {
    const auto j = qdtk::report::read_json(file);
    try {
        const auto& t = j.at("tau_ns");
        return {t.at("value").get<double>(), t.at("sigma").get<double>()};
    } catch (const json::exception& e) {
        throw qdtk::DataFormatError(e.what(), file, "tau_ns");
    }
}

int run_purcell(const PurcellArgs& a, const Global&) {
    auto pick = [](const std::optional<double>& v, double s, const std::string& file, const char* what) {
        if (v && !file.empty()) throw UsageError(std::string("give the ") + what + " lifetime as a value or a file, not both");
        if (v) return qdtk::photon::Measured{*v, s};
        if (!file.empty()) return lifetime_from(file);
        throw UsageError(std::string("missing ") + what + " lifetime");
    };
    const auto cav = pick(a.tau_cav_ns, a.tau_cav_sigma_ns, a.cav, "cavity");
    const auto ref = pick(a.tau_ref_ns, a.tau_ref_sigma_ns, a.ref, "reference");
    const auto f = qdtk::metrics::purcell_from_lifetimes(cav, ref);
    const json body{{"purcell", to_json(f)}, {"tau_cav_ns", to_json(cav)}, {"tau_ref_ns", to_json(ref)}};
    emit_json(with_kind("purcell", body, a.device), a.out);
    return kOk;
}

// modeq ---------------------------------------------------------------------

struct ModeqArgs {
    std::string input;
    std::string out;
    std::string device;
};

int run_modeq(const ModeqArgs& a, const Global&) {
    const auto t = read_table(a.input, 2, 3);
    const auto f = t.columns.size() == 3 ? qdtk::metrics::fit_lorentzian(t.columns[0], t.columns[1], t.columns[2])
                                         : qdtk::metrics::fit_lorentzian(t.columns[0], t.columns[1]);
    if (!f.converged) throw qdtk::FitError(a.input + ": Lorentzian fit did not converge");
    const json body{{"input", a.input},
                    {"center_nm", to_json(f.center_nm)},
                    {"fwhm_nm", to_json(f.fwhm_nm)},
                    {"height", to_json(f.height)},
                    {"background", to_json(f.background)},
                    {"q", to_json(f.q)}};
    emit_json(with_kind("cavity_mode", body, a.device), a.out);
    return kOk;
}

// arrhenius -----------------------------------------------------------------

struct ArrheniusArgs {
    std::string input;
    std::string out;
    std::string device;
};

int run_arrhenius(const ArrheniusArgs& a, const Global&) {
    const auto t = read_table(a.input, 2, 2);
    const auto f = qdtk::metrics::fit_arrhenius(t.columns[0], t.columns[1]);
    if (!f.converged) throw qdtk::FitError(a.input + ": Arrhenius fit did not converge");
    const json body{{"input", a.input},
                    {"i0", to_json(f.i0)},
                    {"b1", to_json(f.b1)},
                    {"e1_mev", to_json(f.e1_mev)},
                    {"b2", to_json(f.b2)},
                    {"e2_mev", to_json(f.e2_mev)},
                    {"single_process", f.single_process},
                    {"warnings", f.warnings}};
    emit_json(with_kind("arrhenius", body, a.device), a.out);
    return kOk;
}

// yield ---------------------------------------------------------------------

struct YieldArgs {
    double nf = 0.0;
    double mesa_um = 0.0;
    double field_um = 50.0;
    std::string out;
    std::string device;
};

int run_yield(const YieldArgs& a, const Global&) {
    const auto y = qdtk::metrics::random_yield(a.nf, a.mesa_um, a.field_um);
    char line[64];
    std::snprintf(line, sizeof line, "%.2f%%", 100.0 * y.value);
    std::cout << line << '\n';
    for (const auto& w : y.warnings) std::cerr << "warning: " << w << '\n';
    if (!a.out.empty()) {
        const json body{{"yield", y.value}, {"emitters", a.nf}, {"mesa_um", a.mesa_um}, {"field_um", a.field_um},
                        {"warnings", y.warnings}};
        emit_json(with_kind("yield", body, a.device), a.out);
    }
    return kOk;
}

// farfield ------------------------------------------------------------------

struct FarfieldArgs {
    double na = 0.0;
    std::string sweep_dir;
    std::string r;
    std::string phi;
    std::string from_csv;
    double bulk_power = 1.0;
    std::string out;
    std::string summary;
    std::string device;
};

// sweep.csv: rho_um,P_r,P_phi[,farfield_r,farfield_phi], file names relative
// to the sweep directory
std::vector<qdtk::farfield::SweepRow> read_sweep(const fs::path& dir) {
    const auto path = dir / "sweep.csv";
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw qdtk::DataFormatError("cannot open", file);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool grids = line == "rho_um,P_r,P_phi,farfield_r,farfield_phi";
    if (!grids && line != "rho_um,P_r,P_phi") {
        throw qdtk::DataFormatError("header must be rho_um,P_r,P_phi[,farfield_r,farfield_phi]", file, "header");
    }
    std::vector<qdtk::farfield::SweepRow> rows;
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (cells.size() != (grids ? 5u : 3u)) {
            throw qdtk::DataFormatError("line " + std::to_string(no) + ": wrong number of columns", file);
        }
        qdtk::farfield::SweepRow r;
        r.rho_um = qdtk::photon::detail::parse_number(cells[0], file, "rho_um", no);
        r.p_r = qdtk::photon::detail::parse_number(cells[1], file, "P_r", no);
        r.p_phi = qdtk::photon::detail::parse_number(cells[2], file, "P_phi", no);
        if (grids && !cells[3].empty()) {
            r.g_r = qdtk::farfield::read_farfield(dir / cells[3]);
            r.g_phi = qdtk::farfield::read_farfield(dir / cells[4]);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

int run_farfield(const FarfieldArgs& a, const Global& g) {
    namespace ff = qdtk::farfield;
    if (!a.r.empty() || !a.phi.empty()) {
        if (a.r.empty() || a.phi.empty()) throw UsageError("--r and --phi go together");
        const auto gr = ff::read_farfield(a.r);
        const auto gp = ff::read_farfield(a.phi);
        const double eta = ff::trion_extraction(gr, gp, a.na);
        std::printf("eta_CX(NA=%.3g) = %.4f\n", a.na, eta);
        if (!a.summary.empty()) {
            emit_json(with_kind("farfield", {{"na", a.na}, {"eta_CX", eta}, {"rho_um", gr.rho_um}}, a.device), a.summary);
        }
        return kOk;
    }

    std::vector<ff::SweepRow> rows;
    double bulk = a.bulk_power;
    if (!a.from_csv.empty()) {
        const auto t = read_table(a.from_csv, 3, 3, true);
        if (t.header[0] != "rho_um" || t.header[1] != "F_P") {
            throw qdtk::DataFormatError("header must be rho_um,F_P,eta_CX", a.from_csv, "header");
        }
        for (std::size_t i = 0; i < t.columns[0].size(); ++i) {
            rows.push_back({t.columns[0][i], t.columns[1][i], t.columns[1][i], std::nullopt, std::nullopt});
        }
        bulk = 1.0;
    } else {
        if (a.sweep_dir.empty()) throw UsageError("give --sweep-dir, --from-csv, or --r with --phi");
        rows = read_sweep(a.sweep_dir);
    }
    const auto res = ff::displacement_sweep(rows, a.na, bulk, g.jobs);

    std::ostringstream csv;
    csv.precision(10);
    csv << "rho_um,F_P,eta_CX\n";
    for (const auto& p : res.points) {
        csv << p.rho_um << ',' << p.purcell << ',';
        if (p.extraction) csv << *p.extraction;
        csv << '\n';
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        write_text(a.out, csv.str());
    }
    json body{{"na", a.na},
              {"points", res.points.size()},
              {"F_P_at_0", res.points.front().purcell},
              {"rho_half_um", res.rho_half_um ? json(*res.rho_half_um) : json(nullptr)}};
    if (res.points.front().extraction) body["eta_CX_at_0"] = *res.points.front().extraction;
    if (!a.summary.empty()) emit_json(with_kind("farfield", body, a.device), a.summary);
    return kOk;
}

// report --------------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string device;
    std::string out;
};

int run_report(const ReportArgs& a, const Global&) {
    if (a.inputs.empty()) throw UsageError("no report fragments given");
    std::vector<json> fragments;
    for (const auto& f : expand_inputs(a.inputs, {".json"})) {
        auto j = qdtk::report::read_json(f);
        if (!j.is_object() || !j.contains("kind")) throw qdtk::DataFormatError("not a report fragment", f.string(), "kind");
        fragments.push_back(std::move(j));
    }
    const auto d = qdtk::report::assemble_dossier(std::move(fragments), a.device);
    emit_json(d, a.out);
    return kOk;
}

// selftest ------------------------------------------------------------------

struct SelftestArgs {
    bool full = false;
    std::uint64_t seed = 1;
};

int run_selftest(const SelftestArgs& a, const Global& g) {
    namespace rp = qdtk::report;
    auto checks = rp::deterministic_checks();
    if (a.full) {
        const char* labels[] = {"V", "T2"};
        for (const auto& col : qdtk::photon::presets::kHom) {
            const auto r = rp::hom_recovery(col, 50, a.seed * 100000, g.jobs);
            for (int k = 0; k < 2; ++k) {
                const auto& c = k == 0 ? r.visibility : r.coherence;
                checks.push_back({"8", std::string(labels[k]) + " within 2 sigma, " + std::string(col.label),
                                  c.fraction(), 0.9, 0.0, c.fraction() >= 0.9});
            }
        }
        const auto raw = rp::raw_g2_recovery(3.2e-3, 50, a.seed * 100000 + 7, g.jobs);
        checks.push_back({"9", "raw g2(0) within 2 sigma", raw.coverage.fraction(), 0.9, 0.0, raw.coverage.fraction() >= 0.9});
        const auto c = rp::localization_campaign(100, a.seed * 100000 + 13, g.jobs);
        checks.push_back({"10", "median FWHM [um]", c.median_fwhm_um, 1.6, 0.2,
                          c.median_fwhm_um >= 1.4 && c.median_fwhm_um <= 1.8});
        checks.push_back({"10", "brightest-decile dQ median [nm]", c.decile_median_dq_nm, 100.0, 0.0,
                          c.decile_median_dq_nm <= 100.0});
        checks.push_back({"10", "2 dQ coverage", c.coverage_2d.fraction(), 0.9, 0.0, c.coverage_2d.fraction() >= 0.9});
    }
    int failed = 0;
    std::printf("%-6s %-46s %14s %10s  %s\n", "group", "check", "value", "target", "result");
    for (const auto& c : checks) {
        std::printf("%-6s %-46s %14.6g %10.6g  %s\n", c.group.c_str(), c.name.c_str(), c.value, c.target,
                    c.pass ? "PASS" : "FAIL");
        failed += !c.pass;
    }
    std::printf("%zu checks, %d failed\n", checks.size(), failed);
    return failed ? kChecksFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdtk: quantum-dot single-photon source characterization toolkit"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    Global g;
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config, "campaign config (JSON); command-line flags take precedence");

    SynthFieldArgs sf;
    auto* c_sf = app.add_subcommand("synth-field", "synthetic micro-PL map(s) with ground-truth sidecar");
    c_sf->add_option("--out", sf.out, "image path (.pgm or .csv)");
    c_sf->add_option("--out-dir", sf.out_dir, "directory for a batch of fields");
    c_sf->add_option("--count", sf.count, "fields in the batch")->check(CLI::PositiveNumber);
    c_sf->add_option("--seed", sf.seed, "first seed; recorded in the sidecar");
    c_sf->add_option("--emitters", sf.emitters, "emitters per field")->check(CLI::NonNegativeNumber);
    c_sf->add_option("--field-um", sf.field_um, "field size F");
    c_sf->add_option("--dc-nm", sf.dc_nm, "alignment uncertainty recorded for localization");
    c_sf->add_option("--wavelength-um", sf.wavelength_um);
    c_sf->add_option("--na", sf.na);
    c_sf->add_option("--broadening", sf.broadening, "spot width over the diffraction limit");
    c_sf->add_option("--snr-median", sf.snr_median);
    c_sf->add_flag("--fixed-snr", sf.fixed_snr, "every emitter at the reference SNR");
    c_sf->add_option("--format", sf.format, "batch image format")->check(CLI::IsMember({"pgm", "csv"}));

    LocalizeArgs lo;
    auto* c_lo = app.add_subcommand("localize", "localize emitters in micro-PL maps");
    c_lo->add_option("inputs", lo.inputs, "images or directories");
    c_lo->add_option("--input-dir", lo.input_dir);
    c_lo->add_option("--out", lo.out, "records CSV");
    c_lo->add_option("--summary", lo.summary, "campaign summary JSON (default <out>.summary.json)");
    c_lo->add_option("--from-csv", lo.from_csv, "rebuild the summary from an existing records CSV");
    c_lo->add_option("--field-um", lo.field_um, "field size when an image has no sidecar");
    c_lo->add_option("--dc-nm", lo.dc_nm, "alignment uncertainty when an image has no sidecar");
    c_lo->add_option("--pitch-um", lo.pitch_um, "pixel pitch when an image has no sidecar");
    c_lo->add_option("--section-width", lo.section_width)->check(CLI::PositiveNumber);
    c_lo->add_option("--expected-fwhm-um", lo.expected_fwhm_um);
    c_lo->add_option("--device", lo.device);

    SynthHistArgs sh;
    auto* c_sh = app.add_subcommand("synth-hist", "synthetic coincidence histogram from preset parameters");
    c_sh->add_option("--model", sh.model)->check(CLI::IsMember({"off-resonant", "quasi-resonant", "hom"}));
    c_sh->add_option("--pol", sh.pol, "hom polarization")->check(CLI::IsMember({"co", "cross"}));
    c_sh->add_option("--preset", sh.preset, "preset column index");
    c_sh->add_option("--g2", sh.g2, "quasi-resonant g2(0)");
    c_sh->add_option("--counts", sh.counts, "expected total counts");
    c_sh->add_option("--bin-ps", sh.bin_ps)->check(CLI::PositiveNumber);
    c_sh->add_option("--half-span-ps", sh.half_span_ps)->check(CLI::PositiveNumber);
    c_sh->add_option("--seed", sh.seed);
    c_sh->add_option("--out", sh.out, "histogram CSV")->required();

    FitG2Args fg;
    auto* c_fg = app.add_subcommand("fit-g2", "fit an autocorrelation histogram");
    c_fg->add_option("input", fg.input)->required();
    c_fg->add_option("--model", fg.model)->check(CLI::IsMember({"auto", "off-resonant", "quasi-resonant"}));
    c_fg->add_option("--window-ns", fg.window_ns, "raw g2 integration half-window");
    c_fg->add_option("--out", fg.out);
    c_fg->add_option("--device", fg.device);

    FitHomArgs fh;
    auto* c_fh = app.add_subcommand("fit-hom", "fit co- and cross-polarized HOM histograms");
    c_fh->add_option("--co", fh.co)->required();
    c_fh->add_option("--cross", fh.cross)->required();
    c_fh->add_option("--out", fh.out);
    c_fh->add_option("--device", fh.device);

    LifetimeArgs lt;
    auto* c_lt = app.add_subcommand("lifetime", "fit a single-exponential decay");
    c_lt->add_option("input", lt.input, "CSV t_ps,counts")->required();
    c_lt->add_option("--start-ps", lt.start_ps);
    c_lt->add_option("--start-offset-ps", lt.start_offset_ps);
    c_lt->add_option("--role", lt.role)->check(CLI::IsMember({"cavity", "reference"}));
    c_lt->add_option("--out", lt.out);
    c_lt->add_option("--device", lt.device);

    EfficiencyArgs ef;
    auto* c_ef = app.add_subcommand("efficiency", "photon extraction efficiency");
    c_ef->add_option("--count-rate", ef.count_rate, "detected counts per second")->required();
    c_ef->add_option("--count-rate-sigma", ef.count_rate_sigma);
    c_ef->add_option("--rep-rate", ef.rep_rate, "laser repetition rate, Hz");
    c_ef->add_option("--setup-eta", ef.setup_eta, "setup transmission (fraction)");
    c_ef->add_option("--setup-sigma", ef.setup_sigma);
    c_ef->add_option("--chain", ef.chain, "CSV name,transmission,sigma (default: reference setup)");
    c_ef->add_option("--g2", ef.g2, "g2(0) for the multi-photon correction");
    c_ef->add_option("--out", ef.out);
    c_ef->add_option("--device", ef.device);

    PurcellArgs pu;
    auto* c_pu = app.add_subcommand("purcell", "Purcell factor from lifetimes");
    c_pu->add_option("--tau-cav-ns", pu.tau_cav_ns);
    c_pu->add_option("--tau-cav-sigma-ns", pu.tau_cav_sigma_ns);
    c_pu->add_option("--tau-ref-ns", pu.tau_ref_ns);
    c_pu->add_option("--tau-ref-sigma-ns", pu.tau_ref_sigma_ns);
    c_pu->add_option("--cav", pu.cav, "lifetime report of the cavity emitter");
    c_pu->add_option("--ref", pu.ref, "lifetime report of the reference emitter");
    c_pu->add_option("--out", pu.out);
    c_pu->add_option("--device", pu.device);

    ModeqArgs mq;
    auto* c_mq = app.add_subcommand("modeq", "cavity-mode Q from a Lorentzian fit");
    c_mq->add_option("input", mq.input, "CSV wavelength_nm,intensity[,sigma]")->required();
    c_mq->add_option("--out", mq.out);
    c_mq->add_option("--device", mq.device);

    ArrheniusArgs ar;
    auto* c_ar = app.add_subcommand("arrhenius", "two-channel thermal quenching fit");
    c_ar->add_option("input", ar.input, "CSV T_K,intensity")->required();
    c_ar->add_option("--out", ar.out);
    c_ar->add_option("--device", ar.device);

    YieldArgs yi;
    auto* c_yi = app.add_subcommand("yield", "random-placement yield");
    c_yi->add_option("--nf", yi.nf, "emitters per field")->required();
    c_yi->add_option("--mesa-um", yi.mesa_um, "mesa diameter 2R0")->required();
    c_yi->add_option("--field-um", yi.field_um);
    c_yi->add_option("--out", yi.out);
    c_yi->add_option("--device", yi.device);

    FarfieldArgs ff;
    auto* c_ff = app.add_subcommand("farfield", "lens collection and displacement sweeps");
    c_ff->add_option("--na", ff.na)->required()->check(CLI::Range(0.0, 1.0));
    c_ff->add_option("--sweep-dir", ff.sweep_dir, "directory holding sweep.csv");
    c_ff->add_option("--r", ff.r, "radial-dipole far field");
    c_ff->add_option("--phi", ff.phi, "azimuthal-dipole far field");
    c_ff->add_option("--from-csv", ff.from_csv, "re-read a sweep result CSV");
    c_ff->add_option("--bulk-power", ff.bulk_power, "emitted power of the bulk reference");
    c_ff->add_option("--out", ff.out, "CSV rho_um,F_P,eta_CX");
    c_ff->add_option("--summary", ff.summary);
    c_ff->add_option("--device", ff.device);

    ReportArgs rp;
    auto* c_rp = app.add_subcommand("report", "merge report fragments into a device dossier");
    c_rp->add_option("inputs", rp.inputs, "fragment files or directories");
    c_rp->add_option("--device", rp.device);
    c_rp->add_option("--out", rp.out);

    SelftestArgs st;
    auto* c_st = app.add_subcommand("selftest", "reproduce reference numbers");
    c_st->add_flag("--full", st.full, "include the Monte Carlo reproductions");
    c_st->add_option("--seed", st.seed);

    // The config is injected in front of the subcommand's own flags.
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> final_args;
    try {
        std::string config;
        std::size_t sub_at = args.size();
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
            if (sub_at == args.size() && app.get_subcommand_no_throw(args[i])) sub_at = i;
        }
        final_args = args;
        if (!config.empty() && sub_at < args.size()) {
            const auto extra = config_flags(config, *app.get_subcommand(args[sub_at]));
            final_args.insert(final_args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1, extra.args.begin(),
                              extra.args.end());
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        std::reverse(final_args.begin(), final_args.end());
        app.parse(final_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*c_sf) return run_synth_field(sf, g);
        if (*c_lo) return run_localize(lo, g);
        if (*c_sh) return run_synth_hist(sh, g);
        if (*c_fg) return run_fit_g2(fg, g);
        if (*c_fh) return run_fit_hom(fh, g);
        if (*c_lt) return run_lifetime(lt, g);
        if (*c_ef) return run_efficiency(ef, g);
        if (*c_pu) return run_purcell(pu, g);
        if (*c_mq) return run_modeq(mq, g);
        if (*c_ar) return run_arrhenius(ar, g);
        if (*c_yi) return run_yield(yi, g);
        if (*c_ff) return run_farfield(ff, g);
        if (*c_rp) return run_report(rp, g);
        if (*c_st) return run_selftest(st, g);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const qdtk::DataFormatError& e) {
        std::cerr << "data format error: " << e.what() << '\n';
        return kDataFormat;
    } catch (const qdtk::FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const qdtk::InputError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsage;
}
