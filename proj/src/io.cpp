#include "bpa/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace bpa::io {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // also folds -0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

double rounded(double v) {
    if (!std::isfinite(v)) return v;
    const std::string s = format_number(v);
    double out = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
}

void parse_error(const fs::path& file, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::Input, "ParseError", file.string() + ":" + std::to_string(line) + ": " + what);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Input, "UnreadableFile", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Input, "UnwritableFile", "cannot write " + path.string());
    out << text;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> csv_lines(const std::string& text) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        out.emplace_back(no, line);
    }
    return out;
}

double parse_double(const std::string& field, const fs::path& file, std::size_t line, const char* name) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != last) {
        parse_error(file, line, std::string("field '") + name + "' is not a number: '" + field + "'");
    }
    return v;
}

void expect_header(const std::vector<std::pair<std::size_t, std::string>>& lines, const fs::path& file,
                   const std::vector<std::string>& header) {
    if (lines.empty()) parse_error(file, 1, "missing header");
    const auto got = split_csv(lines.front().second);
    if (got != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        parse_error(file, lines.front().first, "expected header '" + want + "'");
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::vector<Ellipse> parse_ellipse_csv(const std::string& text, const fs::path& origin) {
    const auto lines = csv_lines(text);
    expect_header(lines, origin, {"x", "y", "a", "b", "phi"});
    std::vector<Ellipse> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = split_csv(line);
        if (f.size() != 5) parse_error(origin, no, "expected 5 fields, got " + std::to_string(f.size()));
        const double x = parse_double(f[0], origin, no, "x");
        const double y = parse_double(f[1], origin, no, "y");
        const double a = parse_double(f[2], origin, no, "a");
        const double b = parse_double(f[3], origin, no, "b");
        const double phi = parse_double(f[4], origin, no, "phi");
        try {
            out.push_back(make_ellipse_deg(x, y, a, b, phi));
        } catch (const Error& e) {
            parse_error(origin, no, e.what());
        }
    }
    return out;
}

std::vector<Ellipse> read_ellipse_csv(const fs::path& path) {
    return parse_ellipse_csv(read_text(path), path);
}

std::string ellipse_csv(const std::vector<Ellipse>& ellipses) {
    std::string out = "x,y,a,b,phi\n";
    for (const auto& e : ellipses) {
        out += format_number(e.x) + ',' + format_number(e.y) + ',' + format_number(e.a) + ',' + format_number(e.b) +
               ',' + format_number(e.phi_deg()) + '\n';
    }
    return out;
}

json pattern_metadata_json(const PatternRecord& p) {
    json j;
    j["id"] = p.id;
    if (p.mechanism) j["mechanism"] = *p.mechanism;
    if (p.source_meta) {
        if (p.source_meta->distance_cm) j["distance_cm"] = rounded(*p.source_meta->distance_cm);
        if (p.source_meta->velocity_level) j["velocity_level"] = *p.source_meta->velocity_level;
    }
    return j;
}

void apply_pattern_metadata(const json& j, PatternRecord& p) {
    if (!j.is_object()) throw Error(ErrorCode::Input, "ParseError", "pattern metadata must be a JSON object");
    try {
        if (j.contains("id")) p.id = j.at("id").get<std::string>();
        if (j.contains("mechanism") && !j.at("mechanism").is_null()) p.mechanism = j.at("mechanism").get<std::string>();
        const bool has_d = j.contains("distance_cm") && !j.at("distance_cm").is_null();
        const bool has_v = j.contains("velocity_level") && !j.at("velocity_level").is_null();
        if (has_d || has_v) {
            SourceMeta meta = p.source_meta.value_or(SourceMeta{});
            if (has_d) meta.distance_cm = j.at("distance_cm").get<double>();
            if (has_v) {
                const auto& v = j.at("velocity_level");
                meta.velocity_level = v.is_string() ? v.get<std::string>() : v.dump();
            }
            p.source_meta = meta;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Input, "ParseError", std::string("pattern metadata: ") + e.what());
    }
}

std::map<std::string, LabelRow> parse_labels_csv(const std::string& text, const fs::path& origin) {
    const auto lines = csv_lines(text);
    expect_header(lines, origin, {"pattern_id", "mechanism", "distance_cm", "velocity_level"});
    std::map<std::string, LabelRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = split_csv(line);
        if (f.size() != 4) parse_error(origin, no, "expected 4 fields, got " + std::to_string(f.size()));
        if (f[0].empty()) parse_error(origin, no, "empty pattern_id");
        LabelRow row;
        row.mechanism = f[1];
        if (!f[2].empty()) row.distance_cm = parse_double(f[2], origin, no, "distance_cm");
        if (!f[3].empty()) row.velocity_level = f[3];
        if (!out.emplace(f[0], std::move(row)).second) parse_error(origin, no, "duplicate pattern_id '" + f[0] + "'");
    }
    return out;
}

std::map<std::string, LabelRow> read_labels_csv(const fs::path& path) {
    return parse_labels_csv(read_text(path), path);
}

std::optional<LabelRow> guess_labels_from_filename(const std::string& stem) {
    const std::string s = lower(stem);
    static const std::regex token_re("[a-z]+");
    LabelRow row;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), token_re); it != std::sregex_iterator(); ++it) {
        const std::string t = it->str();
        if (t == "gunshot" || t == "gun" || t == "gs" || t == "backspatter") row.mechanism = std::string(kGunshot);
        if (t == "impact" || t == "imp") row.mechanism = std::string(kImpact);
    }
    if (row.mechanism.empty()) return std::nullopt;
    static const std::regex dist_re("([0-9]+(?:\\.[0-9]+)?)\\s*cm");
    std::smatch m;
    if (std::regex_search(s, m, dist_re)) row.distance_cm = std::stod(m[1].str());
    return row;
}

PatternRecord load_pattern(const fs::path& csv_path) {
    PatternRecord p;
    p.id = csv_path.stem().string();
    p.ellipses = read_ellipse_csv(csv_path);
    fs::path meta = csv_path;
    meta.replace_extension(".json");
    if (fs::exists(meta)) {
        json j;
        try {
            j = json::parse(read_text(meta));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Input, "ParseError", meta.string() + ": " + e.what());
        }
        apply_pattern_metadata(j, p);
    }
    return p;
}

std::string features_csv(const std::vector<FeatureRow>& rows) {
    std::string out = "pattern_id,kind,f1,f2,n_ellipses,mechanism\n";
    for (const auto& r : rows) {
        out += r.feature.pattern_id + ',' + std::string(to_string(r.feature.kind)) + ',' + format_number(r.feature.f1) +
               ',' + format_number(r.feature.f2) + ',' + std::to_string(r.n_ellipses) + ',' + r.mechanism + '\n';
    }
    return out;
}

std::vector<FeatureRow> parse_features_csv(const std::string& text, const fs::path& origin) {
    const auto lines = csv_lines(text);
    expect_header(lines, origin, {"pattern_id", "kind", "f1", "f2", "n_ellipses", "mechanism"});
    std::vector<FeatureRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = split_csv(line);
        if (f.size() != 6) parse_error(origin, no, "expected 6 fields, got " + std::to_string(f.size()));
        FeatureRow row;
        row.feature.pattern_id = f[0];
        try {
            row.feature.kind = parse_feature_kind(f[1]);
        } catch (const Error&) {
            parse_error(origin, no, "unknown kind '" + f[1] + "'");
        }
        row.feature.f1 = parse_double(f[2], origin, no, "f1");
        row.feature.f2 = parse_double(f[3], origin, no, "f2");
        const double n = parse_double(f[4], origin, no, "n_ellipses");
        if (n < 0 || n != std::floor(n)) parse_error(origin, no, "n_ellipses must be a nonnegative integer");
        row.n_ellipses = static_cast<std::size_t>(n);
        row.mechanism = f[5];
        out.push_back(std::move(row));
    }
    return out;
}

json model_json(const GaussianModel& m) {
    return json{
        {"kind", std::string(to_string(m.kind))},
        {"hypothesis", m.hypothesis},
        {"mu", {rounded(m.mu(0)), rounded(m.mu(1))}},
        {"sigma", {{rounded(m.sigma(0, 0)), rounded(m.sigma(0, 1))}, {rounded(m.sigma(1, 0)), rounded(m.sigma(1, 1))}}},
        {"n_train", m.n_train},
        {"regularized", m.regularized},
    };
}

GaussianModel model_from_json(const json& j) {
    GaussianModel m;
    try {
        m.kind = parse_feature_kind(j.at("kind").get<std::string>());
        m.hypothesis = j.at("hypothesis").get<std::string>();
        const auto& mu = j.at("mu");
        const auto& sigma = j.at("sigma");
        if (mu.size() != 2 || sigma.size() != 2 || sigma[0].size() != 2 || sigma[1].size() != 2) {
            throw Error(ErrorCode::Input, "ParseError", "model mu must have 2 entries and sigma 2x2");
        }
        m.mu = Vec2(mu[0].get<double>(), mu[1].get<double>());
        m.sigma << sigma[0][0].get<double>(), sigma[0][1].get<double>(), sigma[1][0].get<double>(),
            sigma[1][1].get<double>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.regularized = j.value("regularized", false);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Input, "ParseError", std::string("model file: ") + e.what());
    }
    if (m.sigma(0, 1) != m.sigma(1, 0)) throw Error(ErrorCode::Input, "ParseError", "model sigma is not symmetric");
    return m;
}

std::string lr_csv(const std::vector<likelihood::LRResult>& results, FeatureKind kind) {
    std::string out = "pattern_id,kind,lr,log10_lr\n";
    for (const auto& r : results) {
        out += r.pattern_id + ',' + std::string(to_string(kind)) + ',' + format_number(r.lr) + ',' +
               format_number(r.log10_lr) + '\n';
    }
    return out;
}

std::vector<likelihood::LRResult> parse_lr_csv(const std::string& text, const fs::path& origin) {
    const auto lines = csv_lines(text);
    expect_header(lines, origin, {"pattern_id", "kind", "lr", "log10_lr"});
    std::vector<likelihood::LRResult> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = split_csv(line);
        if (f.size() != 4) parse_error(origin, no, "expected 4 fields, got " + std::to_string(f.size()));
        const double log10_lr = parse_double(f[3], origin, no, "log10_lr");
        out.push_back(likelihood::make_lr_result(f[0], log10_lr * std::log(10.0), {}, {}));
    }
    return out;
}

namespace {

json confidence_json(const evaluation::ConfidenceEllipse& e, const std::string& hypothesis) {
    return json{
        {"hypothesis", hypothesis},
        {"center", {rounded(e.center(0)), rounded(e.center(1))}},
        {"semi_major", rounded(e.semi_major)},
        {"semi_minor", rounded(e.semi_minor)},
        {"orientation_deg", rounded(rad_to_deg(e.orientation))},
    };
}

}  // namespace

json report_json(const evaluation::EvaluationReport& r) {
    json j;
    j["kind"] = std::string(to_string(r.kind));
    j["hypotheses"] = {{"h1", r.hypotheses.h1}, {"h2", r.hypotheses.h2}};
    json results = json::array();
    for (std::size_t i = 0; i < r.results.size(); ++i) {
        const auto& x = r.results[i];
        results.push_back({{"pattern_id", x.pattern_id},
                           {"label", i < r.labels.size() ? r.labels[i] : std::string()},
                           {"lr", rounded(x.lr)},
                           {"log10_lr", rounded(x.log10_lr)}});
    }
    j["results"] = std::move(results);
    j["n"] = r.results.size();

    const auto& c = r.confusion_at_1.counts;
    j["confusion_threshold_1"] = {
        {"columns", {"LR>1", "LR<1"}},
        {"rows", {r.hypotheses.h1, r.hypotheses.h2}},
        {"counts", {{c[0][0], c[0][1]}, {c[1][0], c[1][1]}}},
    };
    const auto& z = r.confusion_zone;
    const std::string lo = format_number(z.lo), hi = format_number(z.hi);
    j["confusion_zone"] = {
        {"lo", rounded(z.lo)},
        {"hi", rounded(z.hi)},
        {"columns", {"LR>" + hi, lo + "<=LR<=" + hi, "LR<" + lo}},
        {"rows", {r.hypotheses.h1, r.hypotheses.h2}},
        {"counts", {{z.counts[0][0], z.counts[0][1], z.counts[0][2]}, {z.counts[1][0], z.counts[1][1], z.counts[1][2]}}},
    };
    j["error_rate"] = rounded(r.error_rate);

    json tip = json::array();
    for (const auto& p : r.tippett.points) {
        tip.push_back({{"x", rounded(p.x)}, {"prop_h1_le", rounded(p.prop_h1_le)}, {"prop_h2_ge", rounded(p.prop_h2_ge)}});
    }
    j["tippett"] = std::move(tip);

    json models = json::array();
    json ellipses = json::array();
    for (std::size_t k = 0; k < r.models.size(); ++k) {
        models.push_back(model_json(r.models[k]));
        if (k < r.ellipses.size()) ellipses.push_back(confidence_json(r.ellipses[k], r.models[k].hypothesis));
    }
    j["models"] = std::move(models);
    j["confidence_ellipses"] = std::move(ellipses);

    json rows = json::array();
    for (const auto& b : r.breakdown) {
        rows.push_back({{"mechanism", b.mechanism},
                        {"velocity_level", b.velocity_level},
                        {"distance_bucket", b.distance_bucket},
                        {"total", b.total},
                        {"misclassified", b.misclassified}});
    }
    j["condition_breakdown"] = std::move(rows);
    return j;
}

std::string tippett_csv(const evaluation::TippettCurves& t) {
    std::string out = "x,prop_h1_le,prop_h2_ge\n";
    for (const auto& p : t.points) {
        out += format_number(p.x) + ',' + format_number(p.prop_h1_le) + ',' + format_number(p.prop_h2_ge) + '\n';
    }
    return out;
}

json pipeline_config_json(const image::PipelineConfig& cfg) {
    return json{
        {"background_downsample_factor", cfg.background_downsample_factor},
        {"median_window", cfg.median_window},
        {"morph_iterations", cfg.morph_iterations},
        {"jaccard_dissimilarity_max", rounded(cfg.jaccard_dissimilarity_max)},
        {"hausdorff_max_px", rounded(cfg.hausdorff_max_px)},
        {"min_region_area_px", cfg.min_region_area_px},
        {"structuring_element", cfg.element == image::StructuringElement::Cross3x3 ? "cross" : "square"},
        {"jaccard_rule", cfg.jaccard_rule == image::JaccardRule::Dissimilarity ? "dissimilarity" : "literal"},
    };
}

void apply_pipeline_config(const json& j, image::PipelineConfig& cfg) {
    if (!j.is_object()) throw Error(ErrorCode::Usage, "InvalidConfig", "pipeline config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "background_downsample_factor") cfg.background_downsample_factor = v.get<int>();
            else if (key == "median_window") cfg.median_window = v.get<int>();
            else if (key == "morph_iterations") cfg.morph_iterations = v.get<int>();
            else if (key == "jaccard_dissimilarity_max") cfg.jaccard_dissimilarity_max = v.get<double>();
            else if (key == "hausdorff_max_px") cfg.hausdorff_max_px = v.get<double>();
            else if (key == "min_region_area_px") cfg.min_region_area_px = v.get<int>();
            else if (key == "structuring_element") {
                const auto s = v.get<std::string>();
                if (s == "cross") cfg.element = image::StructuringElement::Cross3x3;
                else if (s == "square") cfg.element = image::StructuringElement::Square3x3;
                else throw Error(ErrorCode::Usage, "InvalidConfig", "structuring_element must be cross or square");
            } else if (key == "jaccard_rule") {
                const auto s = v.get<std::string>();
                if (s == "dissimilarity") cfg.jaccard_rule = image::JaccardRule::Dissimilarity;
                else if (s == "literal") cfg.jaccard_rule = image::JaccardRule::LiteralIndex;
                else throw Error(ErrorCode::Usage, "InvalidConfig", "jaccard_rule must be dissimilarity or literal");
            } else {
                throw Error(ErrorCode::Usage, "InvalidConfig", "unknown pipeline key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Usage, "InvalidConfig", e.what());
    }
    cfg.validate();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Numeric, "DigestFailure", "SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string dump(const json& j) {
    return j.dump(2) + '\n';
}

}  // namespace bpa::io
