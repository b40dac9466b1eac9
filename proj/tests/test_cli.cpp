#include "bpa/cli.hpp"
#include "bpa/directional.hpp"
#include "bpa/io.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace bpa;
namespace fs = std::filesystem;
namespace bt = bpa::testing;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run bpa_run(std::vector<std::string> args) {
    args.insert(args.begin(), "bpa");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("bpa_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_stain_image(const fs::path& path, int count, std::uint64_t seed) {
    bt::Rng rng(seed);
    auto img = image::make_color_image(700, 500, {0.95, 0.95, 0.93});
    for (int i = 0; i < count; ++i) {
        const double a = bt::uniform(rng, 10, 20);
        bt::paint(img,
                  bt::ConicEllipse(70.0 + 110.0 * (i % 6), 80.0 + 110.0 * (i / 6), a, bt::uniform(rng, 8, a),
                                   bt::uniform(rng, 0, kPi)),
                  40);
    }
    image::save_image(img, path);
}

// Two separated clusters of 6-ellipse patterns, written as ellipse tables.
void write_corpus(const fs::path& dir, int per_class) {
    bt::Rng rng(503);
    std::string labels = "pattern_id,mechanism,distance_cm,velocity_level\n";
    for (int c = 0; c < 2; ++c)
        for (int k = 0; k < per_class; ++k) {
            std::vector<Ellipse> es;
            const double spread = c == 0 ? 0.3 : 1.5;
            for (int i = 0; i < 8; ++i) {
                const double a = bt::uniform(rng, 3, 10);
                es.push_back(make_ellipse(bt::uniform(rng, 0, 500), bt::uniform(rng, 0, 500), a,
                                          a * (c == 0 ? bt::uniform(rng, 0.2, 0.5) : bt::uniform(rng, 0.6, 1.0)),
                                          bt::normal(rng, 1.0, spread)));
            }
            const std::string id = (c == 0 ? "g" : "i") + std::to_string(k);
            io::write_text(dir / "patterns" / (id + ".csv"), io::ellipse_csv(es));
            labels += id + ',' + (c == 0 ? "gunshot" : "impact") + ',' + std::to_string(30 * (k % 4)) + ",\n";
        }
    io::write_text(dir / "labels.csv", labels);
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(bpa_run({}).code == cli::kUsage);
    CHECK(bpa_run({"frobnicate"}).code == cli::kUsage);
    CHECK(bpa_run({"fit"}).code == cli::kUsage);
    CHECK(bpa_run({"--help"}).code == cli::kOk);
}

TEST_CASE("extract") {
    SUBCASE("empty directory") {
        const auto d = fresh_dir("empty");
        const auto r = bpa_run({"--out", (d / "o").string(), "extract", d.string()});
        CHECK(r.code == cli::kInput);
        CHECK(r.err.find("no input images") != std::string::npos);
    }
    SUBCASE("three synthetic images") {
        const auto d = fresh_dir("three");
        write_stain_image(d / "gunshot_a_30cm.png", 8, 1);
        write_stain_image(d / "impact_b.png", 12, 2);
        write_stain_image(d / "c.png", 3, 3);
        const auto o = d / "out";
        const auto r = bpa_run({"--out", o.string(), "extract", d.string()});
        REQUIRE(r.code == cli::kOk);
        for (const char* n : {"gunshot_a_30cm.csv", "impact_b.csv", "c.csv", "extraction_log.csv",
                              "extraction_summary.json", "manifest.json", "gunshot_a_30cm.json"})
            CHECK(fs::exists(o / n));
        CHECK(io::read_ellipse_csv(o / "gunshot_a_30cm.csv").size() == 8);
        CHECK(io::read_ellipse_csv(o / "impact_b.csv").size() == 12);
        const auto log = io::read_text(o / "extraction_log.csv");
        CHECK(log.find("c.png,3,0,0,3,rejected,TooFewEllipses") != std::string::npos);
        const auto summary = io::json::parse(io::read_text(o / "extraction_summary.json"));
        CHECK(summary["accepted"] == 2);
        CHECK(summary["accepted_by_mechanism"]["gunshot"] == 1);

        // Same inputs, second output directory: byte-identical files.
        const auto o2 = d / "out2";
        REQUIRE(bpa_run({"--out", o2.string(), "extract", d.string()}).code == cli::kOk);
        for (const auto& e : fs::directory_iterator(o))
            CHECK(io::read_text(e.path()) == io::read_text(o2 / e.path().filename()));
    }
    SUBCASE("bad pipeline option") {
        const auto d = fresh_dir("badopt");
        write_stain_image(d / "x.png", 6, 4);
        CHECK(bpa_run({"--out", d.string(), "extract", d.string(), "--downsample", "1"}).code == cli::kUsage);
    }
}

TEST_CASE("features") {
    const auto d = fresh_dir("features");
    std::string rows = "x,y,a,b,phi\n";
    for (int i = 0; i < 6; ++i) rows += std::to_string(10 * i) + ",5,4,2,30\n";
    io::write_text(d / "same.csv", rows);

    SUBCASE("identical ellipses saturate both circular features") {
        REQUIRE(bpa_run({"--out", d.string(), "--kind", "circular", "features", (d / "same.csv").string()}).code ==
                cli::kOk);
        const auto f = io::parse_features_csv(io::read_text(d / "features.csv"));
        REQUIRE(f.size() == 1);
        const double sat = io::rounded(directional::clamped_logit(0.0, 1e-6));
        CHECK(f[0].feature.f1 == sat);
        CHECK(f[0].feature.f2 == sat);
        CHECK(f[0].n_ellipses == 6);
    }
    SUBCASE("both kinds give two rows per pattern") {
        io::write_text(d / "other.csv", rows + "3,3,9,3,100\n");
        REQUIRE(bpa_run({"--out", d.string(), "features", d.string()}).code == cli::kOk);
        const auto f = io::parse_features_csv(io::read_text(d / "features.csv"));
        CHECK(f.size() == 4);
    }
    SUBCASE("directory scans skip other tables") {
        io::write_text(d / "extraction_log.csv", "image,regions,degenerate,filtered,ellipses,status,reason\n");
        REQUIRE(bpa_run({"--out", d.string(), "features", d.string()}).code == cli::kOk);
        REQUIRE(bpa_run({"--out", d.string(), "features", d.string()}).code == cli::kOk);
        CHECK(io::parse_features_csv(io::read_text(d / "features.csv")).size() == 2);
    }
    SUBCASE("malformed row") {
        io::write_text(d / "bad.csv", "x,y,a,b,phi\n1,1,3,2,10\n1,1,oops,2,10\n");
        const auto r = bpa_run({"--out", d.string(), "features", (d / "bad.csv").string()});
        CHECK(r.code == cli::kInput);
        CHECK(r.err.find("ParseError") != std::string::npos);
        CHECK(r.err.find("bad.csv:3") != std::string::npos);
    }
    SUBCASE("short patterns are skipped") {
        io::write_text(d / "short.csv", "x,y,a,b,phi\n1,1,3,2,10\n");
        const auto r = bpa_run({"--out", d.string(), "features", (d / "short.csv").string(), (d / "same.csv").string()});
        CHECK(r.code == cli::kOk);
        CHECK(r.err.find("short") != std::string::npos);
        CHECK(io::parse_features_csv(io::read_text(d / "features.csv")).size() == 2);
    }
}

TEST_CASE("fit, lr, loocv and report") {
    const auto d = fresh_dir("pipeline");
    write_corpus(d, 8);
    const auto o = d / "out";
    const std::string labels = (d / "labels.csv").string();
    REQUIRE(bpa_run({"--out", o.string(), "features", (d / "patterns").string(), "--labels", labels}).code == cli::kOk);
    const std::string feats = (o / "features.csv").string();

    REQUIRE(bpa_run({"--out", o.string(), "fit", feats, "--hypothesis", "gunshot"}).code == cli::kOk);
    REQUIRE(bpa_run({"--out", o.string(), "fit", feats, "--hypothesis", "impact"}).code == cli::kOk);
    const auto m = io::model_from_json(io::json::parse(io::read_text(o / "model_gunshot_circular.json")));
    CHECK(m.n_train == 8);
    CHECK(fs::exists(o / "model_impact_spherical.json"));
    CHECK(bpa_run({"--out", o.string(), "fit", feats, "--hypothesis", "nobody"}).code == cli::kInput);

    SUBCASE("identical models give LR 1 everywhere") {
        const auto g = (o / "model_gunshot_circular.json").string();
        REQUIRE(bpa_run({"--out", o.string(), "lr", feats, "--numerator", g, "--denominator", g}).code == cli::kOk);
        for (const auto& r : io::parse_lr_csv(io::read_text(o / "lr_circular.csv"))) CHECK(r.lr == 1.0);
        CHECK(bpa_run({"--out", o.string(), "lr", feats, "--numerator", g}).code == cli::kUsage);
        REQUIRE(bpa_run({"--out", o.string(), "lr", feats, "--numerator", g, "--alternatives",
                         (o / "model_impact_circular.json").string() + "," + g, "--weights", "1,0"})
                    .code == cli::kOk);
    }
    SUBCASE("loocv and report") {
        REQUIRE(bpa_run({"--out", o.string(), "loocv", feats}).code == cli::kOk);
        for (const char* n : {"report_circular.json", "report_spherical.json", "lr_circular.csv", "tippett_spherical.csv"})
            CHECK(fs::exists(o / n));
        const auto rep = io::json::parse(io::read_text(o / "report_circular.json"));
        CHECK(rep["n"] == 16);
        CHECK(rep.contains("confusion_threshold_1"));
        CHECK(rep.contains("condition_breakdown"));

        const auto o2 = d / "out_report";
        REQUIRE(bpa_run({"--out", o2.string(), "report", (o / "lr_circular.csv").string(), "--labels", labels}).code ==
                cli::kOk);
        const auto rep2 = io::json::parse(io::read_text(o2 / "report_circular.json"));
        CHECK(rep2["confusion_threshold_1"] == rep["confusion_threshold_1"]);
        CHECK(io::read_text(o2 / "tippett_circular.csv") == io::read_text(o / "tippett_circular.csv"));
    }
    SUBCASE("too few per class") {
        const auto small = fresh_dir("small");
        write_corpus(small, 3);
        REQUIRE(bpa_run({"--out", small.string(), "features", (small / "patterns").string(), "--labels",
                         (small / "labels.csv").string()})
                    .code == cli::kOk);
        const auto r = bpa_run({"--out", small.string(), "loocv", (small / "features.csv").string()});
        CHECK(r.code == cli::kInput);
        CHECK(r.err.find("InsufficientClassSize") != std::string::npos);
    }
}

#ifdef BPA_CLI_PATH
TEST_CASE("installed binary reports exit codes") {
    const auto d = fresh_dir("binary");
    const std::string cmd = std::string(BPA_CLI_PATH) + " --out " + (d / "o").string() + " extract " + d.string() +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == cli::kInput);
}
#endif
