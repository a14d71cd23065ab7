#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmp/eval.hpp"
#include "fmp/parser.hpp"
#include "fmp/sim.hpp"

namespace fmp {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr int kTraceFormatVersion = 1;
inline constexpr int kGroundTruthFormatVersion = 1;
inline constexpr int kModelSchema = 1;
inline constexpr std::uint32_t kFeatureDumpVersion = 1;

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Rounds to 9 significant digits, the precision of trace files.
double round9(double v);

/// JSON lines: a header record, then one record per frame
///   {"t", "agents": [{"pos", "pose", "gaze", "pointing"?}] x2, "objects": [{"pos", "cat", "id"}]}.
std::string format_trace(const WorldTrace& trace);
/// Direction vectors are renormalized after parsing. Throws DataError.
WorldTrace parse_trace(std::string_view text);
WorldTrace load_trace(const std::filesystem::path& path);

/// Header, an events block, then "mind frame object delta" lines for every
/// non-null cell; unlisted cells are null.
std::string format_ground_truth(const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view text);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Throws ConfigError when `j` is not an object or has keys outside `allowed`.
void require_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

ScenarioSpec scenario_from_json(const json& j);
ordered_json scenario_to_json(const ScenarioSpec& spec);
CorpusParams corpus_params_from_json(const json& j);
AttentionParams attention_from_json(const json& j);
TrainParams train_params_from_json(const json& j);

ordered_json model_to_json(const Model& model);
/// Throws ModelError on a schema or dimension mismatch.
Model model_from_json(const json& j);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

/// Sections: trace, parameters, energy, events, segments, beliefs (non-null
/// deltas), attention; keys in a fixed order.
ordered_json parse_graph_to_json(const ParseGraph& pg);

/// "mind frame object delta log_posterior" for every cell.
std::string format_beliefs(const BeliefInference& beliefs);

/// 16-byte header ("FMPF", version, rows, cols as little-endian u32) followed
/// by row-major little-endian float32 values.
std::string format_feature_dump(const FeatureMatrix& m);
FeatureMatrix parse_feature_dump(std::string_view bytes);

/// "start end" per line.
std::string format_segments(std::span<const Segment> segments);

/// Precision and F1 tables with minds as columns and methods as rows.
std::string format_report(std::span<const std::pair<std::string, MetricsReport>> rows);

std::string format_keyframes(std::span<const int> frames);

/// Score timeline with the selected frames marked.
std::string keyframe_svg(std::span<const double> scores, std::span<const int> selected);

/// Sorted "<id>" list of "<id>.trace.jsonl" files in a directory.
std::vector<std::string> list_trace_ids(const std::filesystem::path& dir);
std::filesystem::path trace_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path truth_path(const std::filesystem::path& dir, const std::string& id);

}  // namespace fmp
