#include "bpa/cli.hpp"

#include "bpa/directional.hpp"
#include "bpa/evaluation.hpp"
#include "bpa/image.hpp"
#include "bpa/io.hpp"
#include "bpa/likelihood.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

namespace bpa::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::string kind = "both";
    std::string thresholds;
};

struct Settings {
    image::PipelineConfig pipeline;
    directional::FeatureOptions features;
    evaluation::EvaluationConfig eval;
};

std::vector<FeatureKind> kinds_for(const std::string& kind) {
    if (kind == "both") return {FeatureKind::Circular, FeatureKind::Spherical};
    try {
        return {parse_feature_kind(kind)};
    } catch (const Error&) {
        throw Error(ErrorCode::Usage, "InvalidKind", "--kind must be circular, spherical or both");
    }
}

evaluation::TieRule parse_tie(const std::string& s) {
    if (s == "denominator") return evaluation::TieRule::FavorDenominator;
    if (s == "numerator") return evaluation::TieRule::FavorNumerator;
    throw Error(ErrorCode::Usage, "InvalidConfig", "tie must be 'denominator' or 'numerator'");
}

std::pair<double, double> parse_thresholds(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Usage, "InvalidThresholds", "--thresholds expects lo,hi");
    try {
        std::size_t used = 0;
        const std::string a = s.substr(0, comma), b = s.substr(comma + 1);
        const double lo = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(a);
        const double hi = std::stod(b, &used);
        if (used != b.size()) throw std::invalid_argument(b);
        if (!(lo > 0.0 && lo <= hi)) throw std::invalid_argument(s);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::Usage, "InvalidThresholds", "--thresholds expects two positive numbers lo<=hi");
    }
}

// Config file layout:
// {"pipeline": {...}, "features": {...}, "fit": {...}, "evaluation": {...}}
void apply_config_file(const json& j, Settings& s) {
    if (!j.is_object()) throw Error(ErrorCode::Usage, "InvalidConfig", "config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "pipeline") {
                io::apply_pipeline_config(v, s.pipeline);
            } else if (key == "features") {
                s.features.logit_eps = v.value("logit_eps", s.features.logit_eps);
                s.features.eigen_floor = v.value("eigen_floor", s.features.eigen_floor);
                s.features.normalize_scatter = v.value("normalize_scatter", s.features.normalize_scatter);
            } else if (key == "fit") {
                s.eval.fit.unbiased = v.value("unbiased", s.eval.fit.unbiased);
                s.eval.fit.ridge = v.value("ridge", s.eval.fit.ridge);
            } else if (key == "evaluation") {
                s.eval.hypotheses.h1 = v.value("h1", s.eval.hypotheses.h1);
                s.eval.hypotheses.h2 = v.value("h2", s.eval.hypotheses.h2);
                if (v.contains("tie")) s.eval.tie = parse_tie(v.at("tie").get<std::string>());
                s.eval.coverage = v.value("coverage", s.eval.coverage);
                s.eval.bucket_cm = v.value("bucket_cm", s.eval.bucket_cm);
                if (v.contains("thresholds")) {
                    const auto& t = v.at("thresholds");
                    if (!t.is_array() || t.size() != 2) {
                        throw Error(ErrorCode::Usage, "InvalidConfig", "evaluation.thresholds must be [lo, hi]");
                    }
                    s.eval.zone_lo = t[0].get<double>();
                    s.eval.zone_hi = t[1].get<double>();
                }
            } else {
                throw Error(ErrorCode::Usage, "InvalidConfig", "unknown config section '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Usage, "InvalidConfig", e.what());
    }
}

json settings_json(const Settings& s) {
    return json{
        {"pipeline", io::pipeline_config_json(s.pipeline)},
        {"features",
         {{"logit_eps", s.features.logit_eps},
          {"eigen_floor", s.features.eigen_floor},
          {"normalize_scatter", s.features.normalize_scatter}}},
        {"fit", {{"unbiased", s.eval.fit.unbiased}, {"ridge", s.eval.fit.ridge}}},
        {"evaluation",
         {{"h1", s.eval.hypotheses.h1},
          {"h2", s.eval.hypotheses.h2},
          {"tie", s.eval.tie == evaluation::TieRule::FavorDenominator ? "denominator" : "numerator"},
          {"coverage", s.eval.coverage},
          {"bucket_cm", s.eval.bucket_cm},
          {"thresholds", {s.eval.zone_lo, s.eval.zone_hi}}}},
    };
}

void write_manifest(const fs::path& out_dir, const std::string& command, const Settings& s, const GlobalOptions& g,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
    json digests = json::object();
    for (const auto& p : inputs) digests[p.generic_string()] = io::sha256_hex(io::read_text(p));
    const json config = settings_json(s);
    json m{
        {"tool", "bpa"},
        {"version", kToolVersion},
        {"command", command},
        {"kind", g.kind},
        {"seed", g.seed},
        {"config", config},
        {"config_sha256", io::sha256_hex(config.dump())},
        {"inputs", digests},
        {"outputs", outputs},
    };
    io::write_text(out_dir / "manifest.json", io::dump(m));
}

bool is_image(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> list_files(const fs::path& dir, bool (*keep)(const fs::path&)) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Input, "NotADirectory", dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && keep(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

// Directory scans pick up only files that look like ellipse tables.
bool is_ellipse_table(const fs::path& p) {
    if (!is_csv(p)) return false;
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    return header == "x,y,a,b,phi";
}

std::optional<io::LabelRow> resolve_labels(const std::string& id, const std::map<std::string, io::LabelRow>& sidecar) {
    if (auto it = sidecar.find(id); it != sidecar.end()) return it->second;
    return std::nullopt;
}

void apply_label_row(const io::LabelRow& row, PatternRecord& p) {
    if (!row.mechanism.empty()) p.mechanism = row.mechanism;
    if (row.distance_cm || row.velocity_level) {
        SourceMeta meta = p.source_meta.value_or(SourceMeta{});
        if (row.distance_cm) meta.distance_cm = row.distance_cm;
        if (row.velocity_level) meta.velocity_level = row.velocity_level;
        p.source_meta = meta;
    }
}

// Sidecar first, then metadata JSON already applied by load_pattern, then the
// file name.
void label_pattern(PatternRecord& p, const std::map<std::string, io::LabelRow>& sidecar) {
    if (auto row = resolve_labels(p.id, sidecar)) {
        apply_label_row(*row, p);
        return;
    }
    if (p.mechanism) return;
    if (auto guess = io::guess_labels_from_filename(p.id)) apply_label_row(*guess, p);
}

std::vector<io::FeatureRow> load_features(const fs::path& path) {
    return io::parse_features_csv(io::read_text(path), path);
}

std::vector<io::FeatureRow> rows_of_kind(const std::vector<io::FeatureRow>& rows, FeatureKind kind) {
    std::vector<io::FeatureRow> out;
    for (const auto& r : rows)
        if (r.feature.kind == kind) out.push_back(r);
    return out;
}

GaussianModel load_model(const fs::path& path) {
    try {
        return io::model_from_json(json::parse(io::read_text(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Input, "ParseError", path.string() + ": " + e.what());
    }
}

std::vector<evaluation::LabeledFeature> labeled_corpus(const std::vector<io::FeatureRow>& rows,
                                                       const std::map<std::string, io::LabelRow>& sidecar) {
    std::vector<evaluation::LabeledFeature> corpus;
    for (const auto& r : rows) {
        evaluation::LabeledFeature lf;
        lf.feature = r.feature;
        lf.label = r.mechanism;
        if (auto row = resolve_labels(r.feature.pattern_id, sidecar)) {
            if (!row->mechanism.empty()) lf.label = row->mechanism;
            if (row->distance_cm || row->velocity_level) lf.meta = SourceMeta{row->distance_cm, row->velocity_level};
        }
        if (lf.label.empty()) {
            throw Error(ErrorCode::Input, "UnknownLabel", "pattern '" + r.feature.pattern_id + "' has no mechanism label");
        }
        corpus.push_back(std::move(lf));
    }
    return corpus;
}

// ---------------------------------------------------------------------------

int cmd_extract(const std::string& images_dir, const std::string& labels_path, const Settings& s,
                const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    const fs::path out_dir = g.out_dir;
    const auto images = list_files(images_dir, is_image);
    if (images.empty()) {
        err << "no input images\n";
        return kInput;
    }
    std::map<std::string, io::LabelRow> sidecar;
    if (!labels_path.empty()) sidecar = io::read_labels_csv(labels_path);

    std::string log = "image,regions,degenerate,filtered,ellipses,status,reason\n";
    std::map<std::string, std::size_t> accepted_by_mechanism;
    std::size_t unreadable = 0, accepted = 0;
    std::vector<std::string> outputs;
    for (const auto& path : images) {
        const std::string id = path.stem().string();
        image::ColorImage img;
        try {
            img = image::load_image(path);
        } catch (const Error& e) {
            err << "skipping " << path.string() << ": " << e.what() << '\n';
            log += path.filename().string() + ",0,0,0,0,unreadable," + e.kind() + '\n';
            ++unreadable;
            continue;
        }
        auto res = image::extract_pattern_detailed(img, s.pipeline, id);
        label_pattern(res.pattern, sidecar);
        io::write_text(out_dir / (id + ".csv"), io::ellipse_csv(res.pattern.ellipses));
        outputs.push_back(id + ".csv");
        if (res.pattern.mechanism || res.pattern.source_meta) {
            io::write_text(out_dir / (id + ".json"), io::dump(io::pattern_metadata_json(res.pattern)));
            outputs.push_back(id + ".json");
        }

        const auto v = validate_pattern(res.pattern);
        const auto* rej = std::get_if<Rejection>(&v);
        log += path.filename().string() + ',' + std::to_string(res.regions_found) + ',' +
               std::to_string(res.regions_degenerate) + ',' + std::to_string(res.regions_filtered) + ',' +
               std::to_string(res.pattern.ellipses.size()) + ',' + (rej ? "rejected" : "accepted") + ',' +
               (rej ? rej->describe() : std::string()) + '\n';
        if (!rej) {
            ++accepted;
            ++accepted_by_mechanism[res.pattern.mechanism.value_or("unlabeled")];
        }
    }
    io::write_text(out_dir / "extraction_log.csv", log);
    outputs.push_back("extraction_log.csv");

    json summary{{"images", images.size()}, {"unreadable", unreadable}, {"accepted", accepted},
                 {"rejected", images.size() - unreadable - accepted}, {"accepted_by_mechanism", accepted_by_mechanism}};
    io::write_text(out_dir / "extraction_summary.json", io::dump(summary));
    outputs.push_back("extraction_summary.json");

    std::vector<fs::path> inputs = images;
    if (!labels_path.empty()) inputs.emplace_back(labels_path);
    write_manifest(out_dir, "extract", s, g, inputs, outputs);

    out << "images: " << images.size() << ", accepted patterns: " << accepted << '\n';
    for (const auto& [mech, n] : accepted_by_mechanism) out << "  " << mech << ": " << n << '\n';
    if (unreadable == images.size()) {
        err << "no image could be read\n";
        return kInput;
    }
    return kOk;
}

int cmd_features(const std::vector<std::string>& inputs, const std::string& labels_path, const Settings& s,
                 const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (auto& f : list_files(in, is_ellipse_table)) files.push_back(std::move(f));
        } else {
            files.emplace_back(in);
        }
    }
    if (files.empty()) {
        err << "no ellipse tables given\n";
        return kInput;
    }
    std::map<std::string, io::LabelRow> sidecar;
    if (!labels_path.empty()) sidecar = io::read_labels_csv(labels_path);

    const auto kinds = kinds_for(g.kind);
    std::vector<io::FeatureRow> rows;
    std::size_t rejected = 0;
    for (const auto& f : files) {
        PatternRecord p = io::load_pattern(f);
        label_pattern(p, sidecar);
        const auto v = validate_pattern(p);
        if (const auto* rej = std::get_if<Rejection>(&v)) {
            err << "rejected " << p.id << ": " << rej->describe() << '\n';
            ++rejected;
            continue;
        }
        const auto& vp = std::get<ValidatedPattern>(v);
        for (FeatureKind k : kinds) {
            rows.push_back({directional::compute_features(vp, k, s.features), vp.ellipses().size(),
                            vp.mechanism().value_or("")});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const io::FeatureRow& a, const io::FeatureRow& b) {
        if (a.feature.pattern_id != b.feature.pattern_id) return a.feature.pattern_id < b.feature.pattern_id;
        return a.feature.kind < b.feature.kind;
    });

    const fs::path out_dir = g.out_dir;
    io::write_text(out_dir / "features.csv", io::features_csv(rows));
    if (!labels_path.empty()) files.emplace_back(labels_path);
    write_manifest(out_dir, "features", s, g, files, {"features.csv"});
    out << "patterns: " << (files.size() - (labels_path.empty() ? 0 : 1)) << ", rejected: " << rejected
        << ", feature rows: " << rows.size() << '\n';
    return kOk;
}

int cmd_fit(const std::string& features_path, const std::string& hypothesis, const Settings& s,
            const GlobalOptions& g, std::ostream& out) {
    const auto all = load_features(features_path);
    std::vector<std::string> outputs;
    for (FeatureKind k : kinds_for(g.kind)) {
        std::vector<Vec2> train;
        for (const auto& r : rows_of_kind(all, k))
            if (r.mechanism == hypothesis) train.push_back(r.feature.values());
        const auto model = likelihood::fit_gaussian(train, k, hypothesis, s.eval.fit);
        const std::string name = "model_" + hypothesis + "_" + std::string(to_string(k)) + ".json";
        io::write_text(fs::path(g.out_dir) / name, io::dump(io::model_json(model)));
        outputs.push_back(name);
        out << name << ": n_train=" << model.n_train << (model.regularized ? " (regularized)" : "") << '\n';
    }
    write_manifest(g.out_dir, "fit", s, g, {features_path}, outputs);
    return kOk;
}

int cmd_lr(const std::string& features_path, const std::string& numerator, const std::string& denominator,
           const std::vector<std::string>& alternatives, const std::vector<double>& weights, const Settings& s,
           const GlobalOptions& g, std::ostream& out) {
    if (denominator.empty() == alternatives.empty()) {
        throw Error(ErrorCode::Usage, "Usage", "give exactly one of --denominator or --alternatives");
    }
    if (!weights.empty() && alternatives.empty()) {
        throw Error(ErrorCode::Usage, "Usage", "--weights only applies with --alternatives");
    }
    const auto main = load_model(numerator);
    std::vector<fs::path> inputs{features_path, numerator};
    likelihood::HypothesisSet alts;
    if (!denominator.empty()) {
        alts.models.push_back(load_model(denominator));
        inputs.emplace_back(denominator);
    } else {
        for (const auto& a : alternatives) {
            alts.models.push_back(load_model(a));
            inputs.emplace_back(a);
        }
        if (!weights.empty()) alts.priors = weights;
    }

    std::vector<likelihood::LRResult> results;
    for (const auto& r : rows_of_kind(load_features(features_path), main.kind)) {
        results.push_back(denominator.empty() ? likelihood::generalized_lr(r.feature, main, alts)
                                              : likelihood::likelihood_ratio(r.feature, main, alts.models.front()));
    }
    if (results.empty()) {
        throw Error(ErrorCode::Input, "NoRows", "no " + std::string(to_string(main.kind)) + " rows in " + features_path);
    }
    const std::string name = "lr_" + std::string(to_string(main.kind)) + ".csv";
    io::write_text(fs::path(g.out_dir) / name, io::lr_csv(results, main.kind));
    write_manifest(g.out_dir, "lr", s, g, inputs, {name});
    out << name << ": " << results.size() << " patterns\n";
    return kOk;
}

void write_report_files(const evaluation::EvaluationReport& r, const fs::path& out_dir,
                        std::vector<std::string>& outputs, std::ostream& out) {
    const std::string k(to_string(r.kind));
    io::write_text(out_dir / ("report_" + k + ".json"), io::dump(io::report_json(r)));
    io::write_text(out_dir / ("lr_" + k + ".csv"), io::lr_csv(r.results, r.kind));
    io::write_text(out_dir / ("tippett_" + k + ".csv"), io::tippett_csv(r.tippett));
    outputs.insert(outputs.end(), {"report_" + k + ".json", "lr_" + k + ".csv", "tippett_" + k + ".csv"});
    const auto& c = r.confusion_at_1.counts;
    out << k << ": n=" << r.results.size() << " error_rate=" << io::format_number(r.error_rate) << "  ["
        << r.hypotheses.h1 << ": " << c[0][0] << "/" << c[0][1] << ", " << r.hypotheses.h2 << ": " << c[1][0] << "/"
        << c[1][1] << "]\n";
}

int cmd_loocv(const std::string& features_path, const std::string& labels_path, const Settings& s,
              const GlobalOptions& g, std::ostream& out) {
    const auto all = load_features(features_path);
    std::map<std::string, io::LabelRow> sidecar;
    if (!labels_path.empty()) sidecar = io::read_labels_csv(labels_path);
    std::vector<std::string> outputs;
    bool any = false;
    for (FeatureKind k : kinds_for(g.kind)) {
        const auto rows = rows_of_kind(all, k);
        if (rows.empty() && g.kind == "both") continue;
        const auto report = evaluation::evaluate(labeled_corpus(rows, sidecar), s.eval);
        write_report_files(report, g.out_dir, outputs, out);
        any = true;
    }
    if (!any) throw Error(ErrorCode::Input, "NoRows", "no feature rows in " + features_path);
    std::vector<fs::path> inputs{features_path};
    if (!labels_path.empty()) inputs.emplace_back(labels_path);
    write_manifest(g.out_dir, "loocv", s, g, inputs, outputs);
    return kOk;
}

int cmd_report(const std::string& lr_path, const std::string& labels_path, const std::string& features_path,
               const Settings& s, const GlobalOptions& g, std::ostream& out) {
    if (labels_path.empty() && features_path.empty()) {
        throw Error(ErrorCode::Usage, "Usage", "report needs --labels or --features for ground truth");
    }
    const auto text = io::read_text(lr_path);
    const auto results = io::parse_lr_csv(text, lr_path);
    FeatureKind kind = FeatureKind::Circular;
    {
        // Kind column of the first row.
        const auto nl = text.find('\n');
        const auto rest = nl == std::string::npos ? std::string() : text.substr(nl + 1);
        const auto c1 = rest.find(','), c2 = rest.find(',', c1 + 1);
        if (c1 != std::string::npos && c2 != std::string::npos) kind = parse_feature_kind(rest.substr(c1 + 1, c2 - c1 - 1));
    }

    std::map<std::string, io::LabelRow> truth;
    if (!labels_path.empty()) truth = io::read_labels_csv(labels_path);
    if (!features_path.empty()) {
        for (const auto& r : load_features(features_path)) {
            if (!r.mechanism.empty() && !truth.count(r.feature.pattern_id)) truth[r.feature.pattern_id].mechanism = r.mechanism;
        }
    }
    std::vector<evaluation::LabeledFeature> corpus;
    for (const auto& r : results) {
        auto it = truth.find(r.pattern_id);
        if (it == truth.end() || it->second.mechanism.empty()) {
            throw Error(ErrorCode::Input, "UnknownLabel", "no ground truth for pattern '" + r.pattern_id + "'");
        }
        evaluation::LabeledFeature lf;
        lf.feature.pattern_id = r.pattern_id;
        lf.feature.kind = kind;
        lf.label = it->second.mechanism;
        if (it->second.distance_cm || it->second.velocity_level) {
            lf.meta = SourceMeta{it->second.distance_cm, it->second.velocity_level};
        }
        corpus.push_back(std::move(lf));
    }
    const auto report = evaluation::summarize(results, corpus, s.eval);
    std::vector<std::string> outputs;
    const std::string k(to_string(kind));
    io::write_text(fs::path(g.out_dir) / ("report_" + k + ".json"), io::dump(io::report_json(report)));
    io::write_text(fs::path(g.out_dir) / ("tippett_" + k + ".csv"), io::tippett_csv(report.tippett));
    outputs = {"report_" + k + ".json", "tippett_" + k + ".csv"};
    std::vector<fs::path> inputs{lr_path};
    if (!labels_path.empty()) inputs.emplace_back(labels_path);
    if (!features_path.empty()) inputs.emplace_back(features_path);
    write_manifest(g.out_dir, "report", s, g, inputs, outputs);
    out << k << ": n=" << results.size() << " error_rate=" << io::format_number(report.error_rate) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Likelihood ratios for bloodstain pattern mechanisms", "bpa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--seed", g.seed, "Seed for randomized utilities");
    app.add_option("--kind", g.kind, "circular, spherical or both");
    app.add_option("--thresholds", g.thresholds, "Intermediate zone bounds lo,hi");

    // Flag overrides for the pipeline config.
    std::optional<int> downsample, median, iterations, min_area;
    std::optional<double> jaccard_max, hausdorff_max;
    std::optional<std::string> element, jaccard_rule;

    auto* extract = app.add_subcommand("extract", "Image directory -> ellipse tables");
    std::string images_dir, labels_path;
    extract->add_option("images_dir", images_dir)->required();
    extract->add_option("--labels", labels_path, "Sidecar pattern_id,mechanism,distance_cm,velocity_level");
    extract->add_option("--downsample", downsample);
    extract->add_option("--median-window", median);
    extract->add_option("--morph-iterations", iterations);
    extract->add_option("--min-area", min_area);
    extract->add_option("--jaccard-max", jaccard_max);
    extract->add_option("--hausdorff-max", hausdorff_max);
    extract->add_option("--element", element, "cross or square");
    extract->add_option("--jaccard-rule", jaccard_rule, "dissimilarity or literal");

    auto* features = app.add_subcommand("features", "Ellipse tables -> features.csv");
    std::vector<std::string> feature_inputs;
    features->add_option("inputs", feature_inputs, "Ellipse CSV files or directories")->required();
    features->add_option("--labels", labels_path);

    auto* fit = app.add_subcommand("fit", "features.csv -> Gaussian model JSON");
    std::string features_path, hypothesis;
    fit->add_option("features", features_path)->required();
    fit->add_option("--hypothesis", hypothesis, "Mechanism label to fit")->required();

    auto* lr = app.add_subcommand("lr", "Score features against model files");
    std::string numerator, denominator;
    std::vector<std::string> alternatives;
    std::vector<double> weights;
    lr->add_option("features", features_path)->required();
    lr->add_option("--numerator", numerator)->required();
    lr->add_option("--denominator", denominator);
    lr->add_option("--alternatives", alternatives)->delimiter(',');
    lr->add_option("--weights", weights)->delimiter(',');

    auto* loocv = app.add_subcommand("loocv", "Leave-one-out evaluation report");
    std::string h1, h2;
    loocv->add_option("features", features_path)->required();
    loocv->add_option("--labels", labels_path);
    loocv->add_option("--h1", h1, "Numerator mechanism (default gunshot)");
    loocv->add_option("--h2", h2, "Denominator mechanism (default impact)");

    auto* report = app.add_subcommand("report", "Confusion matrices and Tippett data for an LR table");
    std::string lr_path;
    report->add_option("lr", lr_path)->required();
    report->add_option("--labels", labels_path);
    report->add_option("--features", features_path);
    report->add_option("--h1", h1);
    report->add_option("--h2", h2);

    for (auto* sub : {extract, features, fit, lr, loocv, report}) sub->fallthrough();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        Settings s;
        if (!g.config_path.empty()) {
            json j;
            try {
                j = json::parse(io::read_text(g.config_path));
            } catch (const json::parse_error& e) {
                throw Error(ErrorCode::Usage, "InvalidConfig", g.config_path + ": " + e.what());
            }
            apply_config_file(j, s);
        }
        if (downsample) s.pipeline.background_downsample_factor = *downsample;
        if (median) s.pipeline.median_window = *median;
        if (iterations) s.pipeline.morph_iterations = *iterations;
        if (min_area) s.pipeline.min_region_area_px = *min_area;
        if (jaccard_max) s.pipeline.jaccard_dissimilarity_max = *jaccard_max;
        if (hausdorff_max) s.pipeline.hausdorff_max_px = *hausdorff_max;
        if (element) io::apply_pipeline_config(json{{"structuring_element", *element}}, s.pipeline);
        if (jaccard_rule) io::apply_pipeline_config(json{{"jaccard_rule", *jaccard_rule}}, s.pipeline);
        s.pipeline.validate();
        if (!g.thresholds.empty()) std::tie(s.eval.zone_lo, s.eval.zone_hi) = parse_thresholds(g.thresholds);
        if (!h1.empty()) s.eval.hypotheses.h1 = h1;
        if (!h2.empty()) s.eval.hypotheses.h2 = h2;
        kinds_for(g.kind);

        if (*extract) return cmd_extract(images_dir, labels_path, s, g, out, err);
        if (*features) return cmd_features(feature_inputs, labels_path, s, g, out, err);
        if (*fit) return cmd_fit(features_path, hypothesis, s, g, out);
        if (*lr) return cmd_lr(features_path, numerator, denominator, alternatives, weights, s, g, out);
        if (*loocv) return cmd_loocv(features_path, labels_path, s, g, out);
        if (*report) return cmd_report(lr_path, labels_path, features_path, s, g, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.code()) {
        case ErrorCode::Usage: return kUsage;
        case ErrorCode::Input: return kInput;
        case ErrorCode::Numeric: return kNumeric;
        }
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    }
    return kUsage;
}

}  // namespace bpa::cli
