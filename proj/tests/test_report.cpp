#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "qdtk/imaging/campaign.hpp"
#include "qdtk/imaging/meta_io.hpp"
#include "qdtk/localization/records_io.hpp"
#include "qdtk/report/dossier.hpp"
#include "qdtk/report/monte_carlo.hpp"
#include "qdtk/report/reproductions.hpp"

using namespace qdtk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("qdtk_report_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d / name;
}

std::vector<json> sample_fragments() {
    return {report::fragment("purity", {{"g2", 0.003}}, "D1"),
            report::fragment("indistinguishability", {{"V", 0.19}}, "D1"),
            report::fragment("efficiency", {{"eta", 0.166}}),
            report::fragment("lifetime", {{"tau_ns", 0.40}, {"role", "cavity"}}, "D1"),
            report::fragment("lifetime", {{"tau_ns", 1.99}, {"role", "reference"}}, "D1"),
            report::fragment("purcell", {{"F", 5.0}}, "D1")};
}

}  // namespace

TEST(Dossier, IndependentOfFragmentOrder) {
    auto frags = sample_fragments();
    const auto ref = report::assemble_dossier(frags).dump();
    std::mt19937 rng(3);
    for (int k = 0; k < 30; ++k) {
        std::shuffle(frags.begin(), frags.end(), rng);
        EXPECT_EQ(report::assemble_dossier(frags).dump(), ref);
    }
}

TEST(Dossier, SectionsAndMissing) {
    const auto d = report::assemble_dossier(sample_fragments());
    EXPECT_EQ(d["schema_version"], "qdtk.dossier/1");
    EXPECT_EQ(d["device"], "D1");
    EXPECT_TRUE(d["sections"]["purity"].is_object());
    EXPECT_FALSE(d["sections"]["purity"].contains("kind"));
    ASSERT_TRUE(d["sections"]["lifetime"].is_array());
    EXPECT_EQ(d["sections"]["lifetime"].size(), 2u);
    EXPECT_EQ(d["missing"], json::array({"localization"}));
    EXPECT_FALSE(d["complete"].get<bool>());

    auto frags = sample_fragments();
    frags.push_back(report::fragment("localization", {{"dQ_nm", 80.1}}));
    frags.push_back(frags.front());  // exact duplicates collapse
    const auto full = report::assemble_dossier(frags);
    EXPECT_TRUE(full["complete"].get<bool>());
    EXPECT_TRUE(full["sections"]["purity"].is_object());
}

TEST(Dossier, Errors) {
    auto frags = sample_fragments();
    frags.push_back(report::fragment("purity", {{"g2", 0.1}}, "D2"));
    EXPECT_THROW(report::assemble_dossier(frags), InputError);
    EXPECT_THROW(report::assemble_dossier(sample_fragments(), "D9"), InputError);
    EXPECT_THROW(report::assemble_dossier({json{{"g2", 1}}}), InputError);
    EXPECT_THROW(report::read_json(scratch("absent.json")), DataFormatError);
    const auto bad = scratch("bad.json");
    std::ofstream(bad) << "{ not json";
    EXPECT_THROW(report::read_json(bad), DataFormatError);
}

TEST(Records, RoundTrip) {
    std::vector<localization::RecordRow> rows{
        {"f0", 12.5, 30.25, 53.2, 37.0, 80.1, 90.3, 30.0, 28.0, 1.55, 1.62},
        {"f1", -1.0, 0.0, 120.0, 65.8, 141.9, 147.4, 9.0, 11.0, 1.71, 1.49}};
    const auto p = scratch("rec.csv");
    {
        std::ofstream out(p);
        localization::write_rows(rows, out);
    }
    const auto back = localization::read_rows(p);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].field, rows[i].field);
        EXPECT_DOUBLE_EQ(back[i].x_um, rows[i].x_um);
        EXPECT_DOUBLE_EQ(back[i].dr_nm, rows[i].dr_nm);
        EXPECT_DOUBLE_EQ(back[i].fwhm_v_um, rows[i].fwhm_v_um);
    }
    const auto s = localization::summarize(back);
    EXPECT_EQ(s["fields"], 2);
    EXPECT_EQ(s["records"], 2);
    EXPECT_DOUBLE_EQ(s["dQ_nm"]["median"].get<double>(), 0.5 * (80.1 + 141.9));
    EXPECT_EQ(s["brightest_decile"]["records"], 1);
    EXPECT_DOUBLE_EQ(s["brightest_decile"]["dQ_nm"].get<double>(), 80.1);

    std::ostringstream bad;
    rows[0].field = "a,b";
    EXPECT_THROW(localization::write_rows(rows, bad), InputError);
}

TEST(Records, MalformedNamesColumn) {
    const auto p = scratch("bad_rec.csv");
    std::ofstream(p) << localization::kRecordHeader << "\nf0,1,2,3,4,5,6,x,8,9,10\n";
    try {
        localization::read_rows(p);
        FAIL() << "no throw";
    } catch (const DataFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("snr_h"), std::string::npos) << e.what();
    }
    std::ofstream(p) << "field,x\nf0,1\n";
    EXPECT_THROW(localization::read_rows(p), DataFormatError);
    std::ofstream(p) << localization::kRecordHeader << "\nf0,1,2\n";
    EXPECT_THROW(localization::read_rows(p), DataFormatError);
}

TEST(FieldMeta, RoundTripWithTruth) {
    imaging::CampaignPreset preset;
    imaging::FieldMeta m;
    m.field_um = 50.0;
    m.dc_nm = 40.0;
    m.seed = 77;
    m.truth = imaging::random_truth(preset, 77);
    const auto p = scratch("meta.json");
    imaging::write_meta(m, p);
    const auto back = imaging::read_meta(p);
    EXPECT_DOUBLE_EQ(back.field_um, 50.0);
    EXPECT_EQ(back.seed, 77u);
    ASSERT_TRUE(back.truth);
    ASSERT_EQ(back.truth->emitters.size(), m.truth->emitters.size());
    EXPECT_DOUBLE_EQ(back.truth->emitters[0].x_um, m.truth->emitters[0].x_um);
    EXPECT_DOUBLE_EQ(back.truth->rotation_deg, m.truth->rotation_deg);
    EXPECT_EQ(imaging::meta_sidecar("a/b/field.pgm"), fs::path("a/b/field.json"));
}

TEST(FieldMeta, ErrorsNameTheField) {
    auto check = [](const json& j, const std::string& field) {
        try {
            imaging::meta_from_json(j, "m.json");
            FAIL() << "no throw for " << j.dump();
        } catch (const DataFormatError& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    check({{"dC_nm", 40}}, "F_um");
    check({{"F_um", 50}}, "dC_nm");
    check({{"F_um", -5}, {"dC_nm", 40}}, "F_um");
    check({{"F_um", 50}, {"dC_nm", "x"}}, "dC_nm");
    check({{"F_um", 50}, {"dC_nm", 40}, {"truth", {{"emitters", json::array()}}}}, "truth");
}

TEST(Reproductions, ChecksAreLabelled) {
    const auto all = report::deterministic_checks();
    EXPECT_GT(all.size(), 30u);
    for (const auto& c : all) {
        EXPECT_FALSE(c.group.empty());
        EXPECT_FALSE(c.name.empty());
        EXPECT_TRUE(std::isfinite(c.value)) << c.name;
    }
    for (const char* g : {"1", "2", "3", "4", "5", "6", "7", "8", "11"}) {
        EXPECT_TRUE(std::any_of(all.begin(), all.end(), [&](const auto& c) { return c.group == g; })) << g;
    }
}

TEST(Reproductions, RoundingHelpers) {
    EXPECT_DOUBLE_EQ(report::detail::round_sig(0.50123, 3), 0.501);
    EXPECT_DOUBLE_EQ(report::detail::round_sig(1184.9, 3), 1180.0);
    EXPECT_TRUE(report::detail::printed("x", "n", 16.64, 16.6, 1).pass);
    EXPECT_FALSE(report::detail::printed("x", "n", 16.66, 16.6, 1).pass);
    EXPECT_NEAR(report::detail::simpson([](double x) { return x * x * x; }, 0.0, 2.0, 10), 4.0, 1e-12);
}

TEST(MonteCarlo, CoverageHelpers) {
    report::Coverage c;
    EXPECT_EQ(c.fraction(), 0.0);
    c = {9, 10};
    EXPECT_DOUBLE_EQ(c.fraction(), 0.9);
    EXPECT_TRUE(report::within_sigmas(1.0, 0.5, 2.0));
    EXPECT_FALSE(report::within_sigmas(1.0, 0.4, 2.0));
}

TEST(MonteCarlo, SeededRunsAreReproducible) {
    const auto a = report::raw_g2_recovery(3.2e-3, 4, 100, 2);
    const auto b = report::raw_g2_recovery(3.2e-3, 4, 100, 1);
    EXPECT_EQ(a.coverage.trials, 4);
    EXPECT_DOUBLE_EQ(a.median_value, b.median_value);
    const auto c = report::localization_campaign(2, 5, 2);
    const auto d = report::localization_campaign(2, 5, 1);
    EXPECT_EQ(c.records, d.records);
    EXPECT_DOUBLE_EQ(c.median_fwhm_um, d.median_fwhm_um);
    EXPECT_GT(c.matched, 0);
}
