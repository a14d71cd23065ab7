// fmp: simulate corpora, train, parse, evaluate and pick keyframes.

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fmp/error.hpp"
#include "fmp/eval.hpp"
#include "fmp/io.hpp"
#include "fmp/parallel.hpp"
#include "fmp/parser.hpp"
#include "fmp/sim.hpp"

namespace fs = std::filesystem;
using namespace fmp;

namespace {

constexpr std::uint64_t kDefaultSeed = 2024;

struct Options {
  std::string config;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string corpus;
  std::string model;
  std::string input;
  std::optional<int> k;
  std::optional<int> suppression;
  bool dump_features = false;
};

struct RunConfig {
  json root = json::object();
  std::uint64_t seed = kDefaultSeed;
  int jobs = 1;

  const json& block(const char* name) const {
    static const json empty = json::object();
    return root.contains(name) ? root.at(name) : empty;
  }
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

RunConfig load_config(const Options& opt) {
  RunConfig rc;
  if (!opt.config.empty()) {
    try {
      rc.root = json::parse(read_text_file(opt.config));
    } catch (const json::exception& e) {
      throw ConfigError(opt.config + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  require_keys(rc.root,
               {"seed", "jobs", "simulate", "attention", "segments", "beam", "train", "parse", "eval", "keyframes"},
               "config");
  require_keys(rc.block("simulate"), {"train", "test", "demo", "corpus", "scenarios"}, "simulate");
  require_keys(rc.block("segments"), {"window", "threshold", "coefficients"}, "segments");
  require_keys(rc.block("beam"), {"width", "max_merge"}, "beam");
  require_keys(rc.block("train"),
               {"corpus", "lambda_values", "max_theta1", "lambda4_values", "lambda9_values",
                "marginal_first_frame_only", "alpha", "classifier", "belief", "theta1_grid"},
               "train");
  require_keys(rc.block("parse"), {"model", "input"}, "parse");
  require_keys(rc.block("eval"), {"model", "corpus"}, "eval");
  require_keys(rc.block("keyframes"), {"model", "input", "k", "suppression"}, "keyframes");
  rc.seed = opt.seed ? *opt.seed : get_or<std::uint64_t>(rc.root, "seed", kDefaultSeed);
  rc.jobs = opt.jobs ? *opt.jobs : get_or<int>(rc.root, "jobs", 1);
  if (rc.jobs < 1) throw ConfigError("jobs must be at least 1");
  return rc;
}

std::string pick_path(const std::string& flag, const json& block, const char* key, const char* what) {
  const std::string p = flag.empty() ? get_or<std::string>(block, key, "") : flag;
  if (p.empty()) throw ConfigError("no " + std::string(what) + " given");
  return p;
}

struct TraceRef {
  std::string id;
  fs::path dir;
};

std::vector<TraceRef> resolve_inputs(const std::string& input) {
  const fs::path p(input);
  if (fs::is_directory(p)) {
    std::vector<TraceRef> out;
    for (const std::string& id : list_trace_ids(p)) out.push_back({id, p});
    if (out.empty()) throw DataError("no traces in " + input);
    return out;
  }
  const std::string name = p.filename().string();
  static constexpr std::string_view kSuffix = ".trace.jsonl";
  if (!fs::is_regular_file(p) || !name.ends_with(kSuffix)) throw DataError("input " + input + " is not a trace file");
  return {{name.substr(0, name.size() - kSuffix.size()), p.parent_path()}};
}

Model require_model(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ModelError("model file " + path + " does not exist");
  return load_model(path);
}

SegmentParams segment_params(const RunConfig& rc) {
  const json& s = rc.block("segments");
  SegmentParams p;
  p.window = get_or<int>(s, "window", p.window);
  p.coefficients = get_or<int>(s, "coefficients", p.coefficients);
  if (p.window < 2 || p.coefficients < 1) throw ConfigError("segments: window >= 2 and coefficients >= 1 required");
  return p;
}

BeamParams beam_params(const RunConfig& rc) {
  const json& b = rc.block("beam");
  BeamParams p;
  p.width = get_or<int>(b, "width", p.width);
  p.max_merge = get_or<int>(b, "max_merge", p.max_merge);
  if (p.width < 1 || p.max_merge < 1) throw ConfigError("beam: width and max_merge must be positive");
  return p;
}

int cmd_simulate(const Options& opt, const RunConfig& rc) {
  const json& s = rc.block("simulate");
  const int n_train = get_or<int>(s, "train", 62);
  const int n_test = get_or<int>(s, "test", 26);
  const int n_demo = get_or<int>(s, "demo", 2);
  if (n_train < 0 || n_test < 0 || n_demo < 0) throw ConfigError("simulate: counts must be non-negative");
  const CorpusParams corpus = corpus_params_from_json(s.contains("corpus") ? s.at("corpus") : json::object());
  const AttentionParams attention = attention_from_json(rc.block("attention"));

  struct Job {
    std::string split;
    std::string id;
    ScenarioSpec spec;
  };
  std::vector<Job> jobs;
  const auto add = [&](const std::string& split, int count, std::uint64_t stream, auto make) {
    for (int i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03d", split.c_str(), i);
      jobs.push_back({split, id, make(derive_seed(derive_seed(rc.seed, stream), static_cast<std::uint64_t>(i)))});
    }
  };
  add("train", n_train, 1, [&](std::uint64_t seed) { return random_scenario(seed, corpus); });
  add("test", n_test, 2, [&](std::uint64_t seed) { return random_scenario(seed, corpus); });
  add("demo", n_demo, 3, [&](std::uint64_t seed) { return false_belief_demo(seed, corpus.object_count); });
  if (s.contains("scenarios")) {
    int i = 0;
    for (const json& j : s.at("scenarios")) {
      char id[64];
      std::snprintf(id, sizeof id, "scenario_%03d", i++);
      jobs.push_back({"scenarios", id, scenario_from_json(j)});
    }
  }
  for (const Job& j : jobs) validate(j.spec);

  spdlog::info("simulating {} traces", jobs.size());
  const fs::path out(opt.out);
  parallel_for(jobs.size(), rc.jobs, [&](std::size_t i) {
    const Simulation sim = simulate(jobs[i].spec, attention);
    const fs::path dir = out / jobs[i].split;
    write_text_file(trace_path(dir, jobs[i].id), format_trace(sim.trace));
    write_text_file(truth_path(dir, jobs[i].id), format_ground_truth(sim.truth));
    write_text_file(dir / (jobs[i].id + ".scenario.json"), scenario_to_json(jobs[i].spec).dump(1) + "\n");
  });
  ordered_json manifest;
  manifest["seed"] = rc.seed;
  manifest["train"] = n_train;
  manifest["test"] = n_test;
  manifest["demo"] = n_demo;
  manifest["scenarios"] = s.contains("scenarios") ? s.at("scenarios").size() : 0;
  write_text_file(out / "manifest.json", manifest.dump(1) + "\n");
  spdlog::info("wrote corpus to {}", out.string());
  return 0;
}

struct LoadedCorpus {
  std::vector<std::string> ids;
  std::vector<WorldTrace> traces;
  std::vector<GroundTruth> truths;
};

LoadedCorpus load_corpus(const fs::path& dir, int jobs, bool with_truth) {
  LoadedCorpus c;
  c.ids = list_trace_ids(dir);
  if (c.ids.empty()) throw DataError("no traces in " + dir.string());
  c.traces.resize(c.ids.size());
  c.truths.resize(c.ids.size());
  parallel_for(c.ids.size(), jobs, [&](std::size_t i) {
    c.traces[i] = load_trace(trace_path(dir, c.ids[i]));
    if (with_truth) {
      c.truths[i] = load_ground_truth(truth_path(dir, c.ids[i]));
      if (c.truths[i].deltas.num_frames() != c.traces[i].length() ||
          c.truths[i].deltas.num_objects() != c.traces[i].object_count) {
        throw DataError(c.ids[i] + ": ground truth does not match its trace");
      }
      if (c.truths[i].events.empty()) throw DataError(c.ids[i] + ": ground truth has no event labels");
    }
  });
  return c;
}

std::string fmt_theta(const Theta& t) {
  const EventEnergyParams& e = t.events;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "lambda1=%g lambda2=%g lambda3=%g lambda5=%g lambda6=%g lambda7=%g lambda8=%g | lambda4=%g lambda9=%g",
                e.lambda1, e.lambda2, e.lambda3, e.lambda5, e.lambda6, e.lambda7, e.lambda8, t.beliefs.lambda4,
                t.beliefs.lambda9);
  return buf;
}

int cmd_train(const Options& opt, const RunConfig& rc) {
  const json& t = rc.block("train");
  const std::string corpus_dir = pick_path(opt.corpus, t, "corpus", "training corpus");
  FitConfig cfg;
  cfg.seed = rc.seed;
  cfg.jobs = rc.jobs;
  cfg.attention = attention_from_json(rc.block("attention"));
  const SegmentParams sp = segment_params(rc);
  cfg.window = sp.window;
  cfg.coefficients = sp.coefficients;
  if (rc.block("segments").contains("threshold")) cfg.threshold = get_or<double>(rc.block("segments"), "threshold", 0.0);
  cfg.beam = beam_params(rc);
  cfg.lambda_values = get_or(t, "lambda_values", cfg.lambda_values);
  cfg.max_theta1 = get_or(t, "max_theta1", cfg.max_theta1);
  cfg.lambda4_values = get_or(t, "lambda4_values", cfg.lambda4_values);
  cfg.lambda9_values = get_or(t, "lambda9_values", cfg.lambda9_values);
  cfg.marginal_first_frame_only = get_or(t, "marginal_first_frame_only", false);
  cfg.alpha = get_or(t, "alpha", cfg.alpha);
  if (!(cfg.alpha > 0.0)) throw ConfigError("train: alpha must be positive");
  if (t.contains("classifier")) cfg.classifier_training = train_params_from_json(t.at("classifier"));
  if (t.contains("belief")) cfg.belief_training = train_params_from_json(t.at("belief"));
  if (t.contains("theta1_grid")) {
    for (const json& row : t.at("theta1_grid")) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != 7) throw ConfigError("train.theta1_grid rows need 7 weights");
      cfg.theta1_grid.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    }
  }
  // Grids are checked before any work starts.
  (void)theta1_grid(cfg);
  (void)theta2_grid(cfg);

  const LoadedCorpus corpus = load_corpus(corpus_dir, rc.jobs, true);
  std::vector<TrainingTrace> items;
  for (std::size_t i = 0; i < corpus.ids.size(); ++i) items.push_back({corpus.ids[i], &corpus.traces[i], &corpus.truths[i]});
  spdlog::info("fitting on {} traces", items.size());
  const FitResult fr = fit(items, cfg);
  const Model& m = fr.model;

  const fs::path out(opt.out);
  save_model(out / "model.json", m);
  const std::vector<EventEnergyParams> g1 = theta1_grid(cfg);
  const std::vector<BeliefEnergyParams> g2 = theta2_grid(cfg);
  ordered_json learn;
  ordered_json l1 = ordered_json::array();
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const EventEnergyParams& e = g1[i];
    l1.push_back({e.lambda1, e.lambda2, e.lambda3, e.lambda5, e.lambda6, e.lambda7, e.lambda8, fr.l1_per_theta1[i]});
  }
  ordered_json l2 = ordered_json::array();
  for (std::size_t i = 0; i < g2.size(); ++i) {
    l2.push_back({g2[i].lambda4, g2[i].lambda9, fr.l2_per_theta2[i], fr.log_loss_per_theta2[i]});
  }
  learn["theta1"] = l1;
  learn["theta2"] = l2;
  write_text_file(out / "learning.json", learn.dump(1) + "\n");

  char buf[512];
  std::string report;
  std::snprintf(buf, sizeof buf, "traces %zu\nsegment threshold %.9g\n", items.size(), m.segments.threshold);
  report += buf;
  std::snprintf(buf, sizeof buf, "theta1 candidates %zu\ntheta2 candidates %zu\n", m.theta1_grid_size,
                m.theta2_grid_size);
  report += buf;
  report += "theta* " + fmt_theta(m.theta) + "\n";
  std::snprintf(buf, sizeof buf, "L1* %.9g\nL2* %.9g\n", m.l1, m.l2);
  report += buf;
  write_text_file(out / "learning_report.txt", report);
  spdlog::info("L1*={:.4f} L2*={:.4f}", m.l1, m.l2);
  return 0;
}

int cmd_parse(const Options& opt, const RunConfig& rc) {
  const json& p = rc.block("parse");
  const std::string model_path = pick_path(opt.model, p, "model", "model file");
  const std::string input = pick_path(opt.input, p, "input", "input trace or directory");
  const Model model = require_model(model_path);
  const std::vector<TraceRef> refs = resolve_inputs(input);
  const fs::path out(opt.out);
  parallel_for(refs.size(), rc.jobs, [&](std::size_t i) {
    const WorldTrace trace = load_trace(trace_path(refs[i].dir, refs[i].id));
    const TraceFeatures features = extract_trace_features(trace, model.attention);
    const ParseGraph pg = parse(trace, features, model, refs[i].id);
    write_text_file(out / (refs[i].id + ".pg.json"), parse_graph_to_json(pg).dump(1) + "\n");
    write_text_file(out / (refs[i].id + ".beliefs.txt"), format_beliefs(pg.beliefs));
    write_text_file(out / (refs[i].id + ".segments.txt"), format_segments(pg.segments));
    if (opt.dump_features) write_text_file(out / (refs[i].id + ".features.bin"), format_feature_dump(features.phi));
  });
  spdlog::info("parsed {} traces", refs.size());
  return 0;
}

ordered_json metrics_json(const MetricsReport& r) {
  ordered_json j;
  ordered_json minds;
  for (std::size_t m = 0; m < r.minds.size(); ++m) {
    const MindMetrics& mm = r.minds[m];
    ordered_json mj;
    mj["precision"] = mm.macro_precision;
    mj["recall"] = mm.macro_recall;
    mj["f1"] = mm.macro_f1;
    json conf = json::array();
    for (const auto& row : mm.confusion) conf.push_back(row);
    mj["confusion"] = conf;
    minds[std::string(to_string(kMinds[m]))] = mj;
  }
  j["minds"] = minds;
  j["mean_precision"] = r.mean_precision;
  j["mean_f1"] = r.mean_f1;
  return j;
}

int cmd_eval(const Options& opt, const RunConfig& rc) {
  const json& e = rc.block("eval");
  const std::string model_path = pick_path(opt.model, e, "model", "model file");
  const std::string corpus_dir = pick_path(opt.corpus, e, "corpus", "test corpus");
  const Model model = require_model(model_path);
  const LoadedCorpus corpus = load_corpus(corpus_dir, rc.jobs, true);
  const std::size_t n = corpus.ids.size();
  std::vector<BeliefTable> predicted(n);
  std::vector<double> event_errors(n);
  parallel_for(n, rc.jobs, [&](std::size_t i) {
    const ParseGraph pg = parse(corpus.traces[i], model, corpus.ids[i]);
    predicted[i] = pg.beliefs.deltas;
    event_errors[i] = event_frame_error(pg.events, corpus.truths[i].events);
  });
  MetricsAccumulator full;
  MetricsAccumulator chance;
  double wrong = 0.0;
  long long frames = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const BeliefTable& truth = corpus.truths[i].deltas;
    full.add(predicted[i], truth);
    chance.add(chance_baseline(truth.num_frames(), truth.num_objects(), derive_seed(rc.seed, i)), truth);
    wrong += event_errors[i] * corpus.traces[i].length();
    frames += corpus.traces[i].length();
  }
  const std::vector<std::pair<std::string, MetricsReport>> rows = {{"Chance", chance.report()},
                                                                   {"Full", full.report()}};
  std::string report = format_report(rows);
  char buf[128];
  std::snprintf(buf, sizeof buf, "\nevent frame error %.4f over %lld frames in %zu traces\n",
                frames > 0 ? wrong / static_cast<double>(frames) : 0.0, frames, n);
  report += buf;
  const fs::path out(opt.out);
  write_text_file(out / "report.txt", report);
  ordered_json j;
  j["traces"] = n;
  j["frames"] = frames;
  j["event_frame_error"] = frames > 0 ? wrong / static_cast<double>(frames) : 0.0;
  j["chance"] = metrics_json(rows[0].second);
  j["full"] = metrics_json(rows[1].second);
  write_text_file(out / "metrics.json", j.dump(1) + "\n");
  spdlog::info("mean F1 full {:.4f} chance {:.4f}", rows[1].second.mean_f1, rows[0].second.mean_f1);
  return 0;
}

int cmd_keyframes(const Options& opt, const RunConfig& rc) {
  const json& kb = rc.block("keyframes");
  const std::string model_path = pick_path(opt.model, kb, "model", "model file");
  const std::string input = pick_path(opt.input, kb, "input", "input trace or directory");
  const int k = opt.k ? *opt.k : get_or<int>(kb, "k", 10);
  const int w = opt.suppression ? *opt.suppression : get_or<int>(kb, "suppression", kDefaultSuppression);
  if (k < 0 || w < 0) throw ConfigError("keyframes: k and suppression must be non-negative");
  const Model model = require_model(model_path);
  const std::vector<TraceRef> refs = resolve_inputs(input);
  const fs::path out(opt.out);
  parallel_for(refs.size(), rc.jobs, [&](std::size_t i) {
    const WorldTrace trace = load_trace(trace_path(refs[i].dir, refs[i].id));
    const ParseGraph pg = parse(trace, model, refs[i].id);
    const std::vector<double> scores = keyframe_scores(pg.beliefs);
    const KeyframeSelection sel = select_keyframes(scores, k, w);
    if (sel.incomplete) spdlog::warn("{}: only {} keyframes survive suppression", refs[i].id, sel.frames.size());
    write_text_file(out / (refs[i].id + ".keyframes.txt"), format_keyframes(sel.frames));
    write_text_file(out / (refs[i].id + ".scores.svg"), keyframe_svg(scores, sel.frames));
  });
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fmp");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("FMP_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Five-minds parser: communication events and belief dynamics from two-agent traces"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--jobs", opt.jobs, "worker threads");
  app.add_option("--seed", opt.seed, "overrides the configured seed");
  app.add_option("--out", opt.out, "output directory");

  auto* sim = app.add_subcommand("simulate", "write a seeded train/test/demo corpus");
  auto* train = app.add_subcommand("train", "fit priors, classifiers and energy weights");
  train->add_option("--corpus", opt.corpus, "training corpus directory");
  auto* parse_cmd = app.add_subcommand("parse", "write parse graphs for traces");
  parse_cmd->add_option("--model", opt.model, "model file");
  parse_cmd->add_option("--input", opt.input, "trace file or directory");
  parse_cmd->add_flag("--features", opt.dump_features, "also write binary feature dumps");
  auto* eval = app.add_subcommand("eval", "score belief dynamics against ground truth");
  eval->add_option("--model", opt.model, "model file");
  eval->add_option("--corpus", opt.corpus, "test corpus directory");
  auto* kf = app.add_subcommand("keyframes", "rank frames by predicted belief changes");
  kf->add_option("--model", opt.model, "model file");
  kf->add_option("--input", opt.input, "trace file or directory");
  kf->add_option("--k", opt.k, "number of keyframes");
  kf->add_option("--suppression", opt.suppression, "minimum distance between keyframes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    const RunConfig rc = load_config(opt);
    if (sim->parsed()) return cmd_simulate(opt, rc);
    if (train->parsed()) return cmd_train(opt, rc);
    if (parse_cmd->parsed()) return cmd_parse(opt, rc);
    if (eval->parsed()) return cmd_eval(opt, rc);
    if (kf->parsed()) return cmd_keyframes(opt, rc);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 5;
  }
  return 5;
}
