#pragma once

#include "bpa/evaluation.hpp"
#include "bpa/image.hpp"
#include "bpa/likelihood.hpp"
#include "bpa/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Table and document formats shared by the CLI and the tests. All numbers are
// written with 9 significant digits, independent of the process locale.
namespace bpa::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v);
/// v rounded to the 9 significant digits format_number prints.
double rounded(double v);

/// Error{Input, "ParseError"} naming the file and 1-based line.
[[noreturn]] void parse_error(const fs::path& file, std::size_t line, const std::string& what);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Ellipse table: header `x,y,a,b,phi`, pixels and degrees.
std::vector<Ellipse> parse_ellipse_csv(const std::string& text, const fs::path& origin = "<memory>");
std::vector<Ellipse> read_ellipse_csv(const fs::path& path);
std::string ellipse_csv(const std::vector<Ellipse>& ellipses);

// Pattern metadata: {id, mechanism?, distance_cm?, velocity_level?}.
json pattern_metadata_json(const PatternRecord& p);
void apply_pattern_metadata(const json& j, PatternRecord& p);

/// One row of the labels sidecar `pattern_id,mechanism,distance_cm,velocity_level`.
struct LabelRow {
    std::string mechanism;
    std::optional<double> distance_cm;
    std::optional<std::string> velocity_level;
};

std::map<std::string, LabelRow> parse_labels_csv(const std::string& text, const fs::path& origin = "<memory>");
std::map<std::string, LabelRow> read_labels_csv(const fs::path& path);

/// Best-effort guess from file names such as "gunshot_handgun_30cm_03" or
/// "Impact-H2-120cm". Recognizes the mechanism words and a "<n>cm" token.
std::optional<LabelRow> guess_labels_from_filename(const std::string& stem);

/// Loads `<stem>.csv` plus an optional `<stem>.json` metadata file beside it.
PatternRecord load_pattern(const fs::path& csv_path);

// Features table: `pattern_id,kind,f1,f2,n_ellipses,mechanism`.
struct FeatureRow {
    FeatureVector feature;
    std::size_t n_ellipses = 0;
    std::string mechanism;  // empty when unlabeled
};

std::string features_csv(const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> parse_features_csv(const std::string& text, const fs::path& origin = "<memory>");

// Model file.
json model_json(const GaussianModel& m);
GaussianModel model_from_json(const json& j);

// LR table: `pattern_id,kind,lr,log10_lr`.
std::string lr_csv(const std::vector<likelihood::LRResult>& results, FeatureKind kind);
std::vector<likelihood::LRResult> parse_lr_csv(const std::string& text, const fs::path& origin = "<memory>");

json report_json(const evaluation::EvaluationReport& r);
// `x,prop_h1_le,prop_h2_ge`
std::string tippett_csv(const evaluation::TippettCurves& t);

json pipeline_config_json(const image::PipelineConfig& cfg);
/// Overlays the fields present in `j`; unknown keys are rejected.
void apply_pipeline_config(const json& j, image::PipelineConfig& cfg);

std::string sha256_hex(const std::string& bytes);

/// Canonical JSON text (sorted keys, rounded numbers) for hashing and diffs.
std::string dump(const json& j);

}  // namespace bpa::io
