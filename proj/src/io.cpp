#include "fmp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fmp/error.hpp"

namespace fmp {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json vec_json(const Vec3& v) { return json::array({round9(v.x), round9(v.y), round9(v.z)}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = nl + 1;
  }
  return out;
}

template <typename T, std::size_t N>
json array_json(const std::array<T, N>& a) {
  json out = json::array();
  for (const T& v : a) out.push_back(v);
  return out;
}

json matrix_json(const Matrix3& m) {
  json out = json::array();
  for (const auto& row : m) out.push_back(array_json(row));
  return out;
}

template <std::size_t R, std::size_t C>
void read_matrix(const json& j, std::array<std::array<double, C>, R>& m) {
  if (!j.is_array() || j.size() != R) throw ModelError("matrix has the wrong number of rows");
  for (std::size_t r = 0; r < R; ++r) {
    if (!j[r].is_array() || j[r].size() != C) throw ModelError("matrix has the wrong number of columns");
    for (std::size_t c = 0; c < C; ++c) m[r][c] = j[r][c].get<double>();
  }
}

template <std::size_t N>
void read_array(const json& j, std::array<double, N>& a) {
  if (!j.is_array() || j.size() != N) throw ModelError("array has the wrong length");
  for (std::size_t i = 0; i < N; ++i) a[i] = j[i].get<double>();
}

ordered_json softmax_json(const SoftmaxRegression& m) {
  ordered_json j;
  j["classes"] = m.classes();
  j["dim"] = m.dim();
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["mean"] = m.mean;
  j["scale"] = m.scale;
  return j;
}

SoftmaxRegression softmax_from(const json& j, int classes, int dim, std::string_view what) {
  require_keys(j, {"classes", "dim", "weights", "bias", "mean", "scale"}, what);
  if (j.at("classes").get<int>() != classes || j.at("dim").get<int>() != dim) {
    throw ModelError(std::string(what) + ": dimensions do not match this build");
  }
  SoftmaxRegression m(classes, dim);
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<std::vector<double>>();
  m.mean = j.at("mean").get<std::vector<double>>();
  m.scale = j.at("scale").get<std::vector<double>>();
  const auto c = static_cast<std::size_t>(classes);
  const auto d = static_cast<std::size_t>(dim);
  if (m.weights.size() != c * d || m.bias.size() != c || m.mean.size() != d || m.scale.size() != d) {
    throw ModelError(std::string(what) + ": parameter sizes are inconsistent");
  }
  return m;
}

ordered_json event_theta_json(const EventEnergyParams& p) {
  ordered_json j;
  j["lambda1"] = p.lambda1;
  j["lambda2"] = p.lambda2;
  j["lambda3"] = p.lambda3;
  j["lambda5"] = p.lambda5;
  j["lambda6"] = p.lambda6;
  j["lambda7"] = p.lambda7;
  j["lambda8"] = p.lambda8;
  return j;
}

ordered_json theta_json(const Theta& t) {
  ordered_json j;
  j["events"] = event_theta_json(t.events);
  j["beliefs"] = {{"lambda4", t.beliefs.lambda4},
                  {"lambda9", t.beliefs.lambda9},
                  {"marginal_first_frame_only", t.beliefs.marginal_first_frame_only}};
  return j;
}

Theta theta_from(const json& j) {
  require_keys(j, {"events", "beliefs"}, "theta");
  const json& e = j.at("events");
  require_keys(e, {"lambda1", "lambda2", "lambda3", "lambda5", "lambda6", "lambda7", "lambda8"}, "theta.events");
  const json& b = j.at("beliefs");
  require_keys(b, {"lambda4", "lambda9", "marginal_first_frame_only"}, "theta.beliefs");
  Theta t;
  t.events = {e.at("lambda1").get<double>(), e.at("lambda2").get<double>(), e.at("lambda3").get<double>(),
              e.at("lambda5").get<double>(), e.at("lambda6").get<double>(), e.at("lambda7").get<double>(),
              e.at("lambda8").get<double>()};
  t.beliefs = {b.at("lambda4").get<double>(), b.at("lambda9").get<double>(),
               b.at("marginal_first_frame_only").get<bool>()};
  return t;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed for " + path.string());
}

double round9(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(fmt("%.9g", v).c_str(), nullptr);
}

std::string format_trace(const WorldTrace& trace) {
  std::string out;
  ordered_json header;
  header["format"] = "fmp-trace";
  header["version"] = kTraceFormatVersion;
  header["frame_rate"] = trace.frame_rate;
  header["joints"] = trace.joint_count;
  header["object_count"] = trace.object_count;
  json occ = json::array();
  for (const Box& b : trace.occluders) occ.push_back({{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}});
  header["occluders"] = occ;
  out += header.dump() + "\n";
  for (const WorldFrame& f : trace.frames) {
    ordered_json rec;
    rec["t"] = f.t;
    ordered_json agents = ordered_json::array();
    for (const AgentState& a : f.agents) {
      ordered_json aj;
      aj["pos"] = vec_json(a.position);
      json pose = json::array();
      for (const Vec3& p : a.pose) pose.push_back(vec_json(p));
      aj["pose"] = pose;
      aj["gaze"] = vec_json(a.gaze);
      if (a.pointing) aj["pointing"] = vec_json(*a.pointing);
      agents.push_back(aj);
    }
    rec["agents"] = agents;
    ordered_json objects = ordered_json::array();
    for (const ObjectState& o : f.objects) {
      ordered_json oj;
      oj["pos"] = vec_json(o.position);
      oj["cat"] = std::string(to_string(o.category));
      oj["id"] = o.object_id;
      objects.push_back(oj);
    }
    rec["objects"] = objects;
    out += rec.dump() + "\n";
  }
  return out;
}

WorldTrace parse_trace(std::string_view text) {
  const std::vector<std::string_view> lines = split_lines(text);
  WorldTrace trace;
  bool have_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    try {
      const json j = json::parse(lines[ln]);
      if (!have_header) {
        require_keys(j, {"format", "version", "frame_rate", "joints", "object_count", "occluders"}, "trace header");
        if (j.at("format") != "fmp-trace" || j.at("version").get<int>() != kTraceFormatVersion) {
          throw DataError("unsupported trace format");
        }
        trace.frame_rate = j.at("frame_rate").get<double>();
        trace.joint_count = j.at("joints").get<int>();
        trace.object_count = j.at("object_count").get<int>();
        for (const json& b : j.at("occluders")) trace.occluders.push_back({vec_from(b.at("lo")), vec_from(b.at("hi"))});
        have_header = true;
        continue;
      }
      require_keys(j, {"t", "agents", "objects"}, "trace frame");
      WorldFrame f;
      f.t = j.at("t").get<int>();
      const json& agents = j.at("agents");
      if (!agents.is_array() || agents.size() != 2) throw DataError("a frame needs exactly 2 agents");
      for (std::size_t a = 0; a < 2; ++a) {
        const json& aj = agents[a];
        require_keys(aj, {"pos", "pose", "gaze", "pointing"}, "agent");
        AgentState& s = f.agents[a];
        s.position = vec_from(aj.at("pos"));
        for (const json& p : aj.at("pose")) s.pose.push_back(vec_from(p));
        s.gaze = normalized(vec_from(aj.at("gaze")));
        if (aj.contains("pointing")) s.pointing = normalized(vec_from(aj.at("pointing")));
      }
      for (const json& oj : j.at("objects")) {
        require_keys(oj, {"pos", "cat", "id"}, "object");
        f.objects.push_back({vec_from(oj.at("pos")), parse_category(oj.at("cat").get<std::string>()),
                             oj.at("id").get<int>()});
      }
      trace.frames.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw DataError("trace line " + std::to_string(ln + 1) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DataError("trace line " + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  if (!have_header) throw DataError("trace file is empty");
  validate(trace);
  return trace;
}

WorldTrace load_trace(const fs::path& path) {
  try {
    return parse_trace(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_ground_truth(const GroundTruth& truth) {
  std::ostringstream out;
  out << "# fmp-ground-truth " << kGroundTruthFormatVersion << "\n";
  out << "frames " << truth.deltas.num_frames() << " objects " << truth.deltas.num_objects() << "\n";
  out << "events " << truth.events.size() << "\n";
  for (const ScriptedEvent& e : truth.events) {
    out << short_name(e.label) << ' ' << e.start << ' ' << e.end << ' ' << e.false_belief_order << ' ' << e.hide_frame
        << ' ' << e.discovery_frame << ' ' << e.victim << ' ';
    if (e.objects.empty()) out << '-';
    for (std::size_t i = 0; i < e.objects.size(); ++i) out << (i ? "," : "") << e.objects[i];
    out << "\n";
  }
  out << "deltas\n";
  for (MindId m : kMinds) {
    for (int t = 0; t < truth.deltas.num_frames(); ++t) {
      for (int o = 0; o < truth.deltas.num_objects(); ++o) {
        const BeliefDelta d = truth.deltas.at(m, t, o);
        if (d != BeliefDelta::Null) out << to_string(m) << ' ' << t << ' ' << o << ' ' << to_string(d) << "\n";
      }
    }
  }
  return out.str();
}

GroundTruth parse_ground_truth(std::string_view text) {
  std::istringstream in{std::string(text)};
  GroundTruth gt;
  std::string word;
  int version = 0;
  if (!(in >> word) || word != "#" || !(in >> word) || word != "fmp-ground-truth" || !(in >> version) ||
      version != kGroundTruthFormatVersion) {
    throw DataError("not a ground-truth file");
  }
  int frames = 0;
  int objects = 0;
  std::size_t count = 0;
  std::string k1, k2, k3;
  if (!(in >> k1 >> frames >> k2 >> objects >> k3 >> count) || k1 != "frames" || k2 != "objects" || k3 != "events" ||
      frames < 0 || objects < 0) {
    throw DataError("malformed ground-truth header");
  }
  try {
    for (std::size_t i = 0; i < count; ++i) {
      ScriptedEvent e;
      std::string label, objs;
      if (!(in >> label >> e.start >> e.end >> e.false_belief_order >> e.hide_frame >> e.discovery_frame >> e.victim >>
            objs)) {
        throw DataError("malformed ground-truth event");
      }
      e.label = parse_event_label(label);
      if (objs != "-") {
        std::istringstream os(objs);
        std::string item;
        while (std::getline(os, item, ',')) e.objects.push_back(std::stoi(item));
      }
      gt.events.push_back(std::move(e));
    }
    if (!(in >> word) || word != "deltas") throw DataError("missing deltas block");
    gt.deltas = BeliefTable(frames, objects);
    std::string mind, delta;
    int t = 0;
    int o = 0;
    while (in >> mind >> t >> o >> delta) {
      if (t < 0 || t >= frames || o < 0 || o >= objects) throw DataError("delta cell out of range");
      gt.deltas.at(parse_mind(mind), t, o) = parse_delta(delta);
    }
    if (!in.eof()) throw DataError("malformed delta line");
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed ground truth: ") + e.what());
  }
  int frame = 0;
  for (const ScriptedEvent& e : gt.events) {
    if (e.start != frame || e.end <= e.start) throw DataError("ground-truth events must partition the trace");
    frame = e.end;
  }
  if (!gt.events.empty() && frame != frames) throw DataError("ground-truth events must cover the trace");
  return gt;
}

GroundTruth load_ground_truth(const fs::path& path) {
  try {
    return parse_ground_truth(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void require_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

ScenarioSpec scenario_from_json(const json& j) {
  try {
    require_keys(j, {"script", "room", "object_count", "seed", "min_segment_length", "joint_count", "frame_rate"},
                 "scenario");
    ScenarioSpec s;
    for (const json& e : j.at("script")) {
      require_keys(e, {"kind", "duration", "objects", "false_belief_order", "start"}, "scenario.script");
      ScriptEntry entry;
      entry.kind = parse_event_label(e.at("kind").get<std::string>());
      entry.duration = e.at("duration").get<int>();
      if (e.contains("objects")) entry.objects = e.at("objects").get<std::vector<int>>();
      if (e.contains("false_belief_order")) entry.false_belief_order = e.at("false_belief_order").get<int>();
      if (e.contains("start")) entry.start = e.at("start").get<int>();
      s.script.push_back(std::move(entry));
    }
    if (j.contains("room")) {
      require_keys(j.at("room"), {"lo", "hi"}, "scenario.room");
      s.room = {vec_from(j.at("room").at("lo")), vec_from(j.at("room").at("hi"))};
    }
    if (j.contains("object_count")) s.object_count = j.at("object_count").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("min_segment_length")) s.min_segment_length = j.at("min_segment_length").get<int>();
    if (j.contains("joint_count")) s.joint_count = j.at("joint_count").get<int>();
    if (j.contains("frame_rate")) s.frame_rate = j.at("frame_rate").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

ordered_json scenario_to_json(const ScenarioSpec& spec) {
  ordered_json j;
  ordered_json script = ordered_json::array();
  for (const ScriptEntry& e : spec.script) {
    ordered_json ej;
    ej["kind"] = std::string(short_name(e.kind));
    ej["duration"] = e.duration;
    ej["objects"] = e.objects;
    ej["false_belief_order"] = e.false_belief_order;
    if (e.start) ej["start"] = *e.start;
    script.push_back(ej);
  }
  j["script"] = script;
  j["room"] = {{"lo", {spec.room.lo.x, spec.room.lo.y, spec.room.lo.z}},
               {"hi", {spec.room.hi.x, spec.room.hi.y, spec.room.hi.z}}};
  j["object_count"] = spec.object_count;
  j["seed"] = spec.seed;
  j["min_segment_length"] = spec.min_segment_length;
  j["joint_count"] = spec.joint_count;
  j["frame_rate"] = spec.frame_rate;
  return j;
}

CorpusParams corpus_params_from_json(const json& j) {
  try {
    require_keys(j, {"object_count", "min_events", "max_events", "min_duration", "max_duration", "first_order_rate",
                     "second_order_rate"},
                 "corpus");
    CorpusParams p;
    if (j.contains("object_count")) p.object_count = j.at("object_count").get<int>();
    if (j.contains("min_events")) p.min_events = j.at("min_events").get<int>();
    if (j.contains("max_events")) p.max_events = j.at("max_events").get<int>();
    if (j.contains("min_duration")) p.min_duration = j.at("min_duration").get<int>();
    if (j.contains("max_duration")) p.max_duration = j.at("max_duration").get<int>();
    if (j.contains("first_order_rate")) p.first_order_rate = j.at("first_order_rate").get<double>();
    if (j.contains("second_order_rate")) p.second_order_rate = j.at("second_order_rate").get<double>();
    if (p.object_count < 1 || p.min_events < 1 || p.max_events < p.min_events || p.min_duration < 1 ||
        p.max_duration < p.min_duration) {
      throw ConfigError("corpus: inconsistent ranges");
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corpus: ") + e.what());
  }
}

AttentionParams attention_from_json(const json& j) {
  try {
    require_keys(j, {"gaze_half_angle_deg", "gaze_range", "pointing_half_angle_deg", "pointing_range"}, "attention");
    AttentionParams p;
    if (j.contains("gaze_half_angle_deg")) p.gaze_half_angle = degrees(j.at("gaze_half_angle_deg").get<double>());
    if (j.contains("gaze_range")) p.gaze_range = j.at("gaze_range").get<double>();
    if (j.contains("pointing_half_angle_deg")) {
      p.pointing_half_angle = degrees(j.at("pointing_half_angle_deg").get<double>());
    }
    if (j.contains("pointing_range")) p.pointing_range = j.at("pointing_range").get<double>();
    if (!(p.gaze_half_angle > 0.0) || !(p.gaze_range > 0.0) || !(p.pointing_half_angle > 0.0) ||
        !(p.pointing_range > 0.0)) {
      throw ConfigError("attention: angles and ranges must be positive");
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("attention: ") + e.what());
  }
}

TrainParams train_params_from_json(const json& j) {
  try {
    require_keys(j, {"learning_rate", "l2", "max_epochs", "tolerance"}, "training");
    TrainParams p;
    if (j.contains("learning_rate")) p.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("l2")) p.l2 = j.at("l2").get<double>();
    if (j.contains("max_epochs")) p.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("tolerance")) p.tolerance = j.at("tolerance").get<double>();
    if (!(p.learning_rate > 0.0) || p.l2 < 0.0 || p.max_epochs < 1) throw ConfigError("training: invalid values");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
}

ordered_json model_to_json(const Model& m) {
  ordered_json j;
  j["schema"] = kModelSchema;
  ordered_json labels;
  labels["events"] = json::array();
  for (EventLabel e : kEventLabels) labels["events"].push_back(std::string(to_string(e)));
  labels["deltas"] = json::array();
  for (BeliefDelta d : kDeltas) labels["deltas"].push_back(std::string(to_string(d)));
  labels["minds"] = json::array();
  for (MindId mind : kMinds) labels["minds"].push_back(std::string(to_string(mind)));
  j["labels"] = labels;
  j["dimensions"] = {{"descriptor", descriptor_dimension()}, {"likelihood_features", likelihood_feature_dimension()}};
  j["attention"] = {{"gaze_half_angle", m.attention.gaze_half_angle},
                    {"gaze_range", m.attention.gaze_range},
                    {"pointing_half_angle", m.attention.pointing_half_angle},
                    {"pointing_range", m.attention.pointing_range}};
  j["segments"] = {{"window", m.segments.window},
                   {"threshold", m.segments.threshold},
                   {"coefficients", m.segments.coefficients}};
  j["beam"] = {{"width", m.beam.width}, {"max_merge", m.beam.max_merge}};
  j["theta"] = theta_json(m.theta);
  ordered_json fit;
  fit["l1"] = m.l1;
  fit["l2"] = m.l2;
  fit["theta1_grid_size"] = m.theta1_grid_size;
  fit["theta2_grid_size"] = m.theta2_grid_size;
  j["fit"] = fit;
  ordered_json ep;
  ep["alpha"] = m.priors.alpha;
  ep["trans"] = matrix_json(m.priors.trans);
  ep["occ"] = matrix_json(m.priors.occ);
  ep["trans_counts"] = matrix_json(m.priors.trans_counts);
  ep["occ_counts"] = matrix_json(m.priors.occ_counts);
  j["event_priors"] = ep;
  j["event_classifier"] = softmax_json(m.classifier.model);
  ordered_json bp;
  bp["alpha"] = m.beliefs.prior.alpha;
  ordered_json tables = ordered_json::array();
  for (MindId mind : kMinds) {
    ordered_json per_mind = ordered_json::array();
    for (EventLabel e : kEventLabels) {
      const BeliefPriorTable& t = m.beliefs.prior.at(mind, e);
      ordered_json tj;
      json trans = json::array();
      json counts = json::array();
      for (std::size_t r = 0; r < t.trans.size(); ++r) {
        trans.push_back(array_json(t.trans[r]));
        counts.push_back(array_json(t.trans_counts[r]));
      }
      tj["trans"] = trans;
      tj["marginal"] = array_json(t.marginal);
      tj["trans_counts"] = counts;
      tj["marginal_counts"] = array_json(t.marginal_counts);
      per_mind.push_back(tj);
    }
    tables.push_back(per_mind);
  }
  bp["tables"] = tables;
  j["belief_prior"] = bp;
  ordered_json lik = ordered_json::array();
  for (const SoftmaxRegression& s : m.beliefs.likelihood.minds) lik.push_back(softmax_json(s));
  j["belief_likelihood"] = lik;
  return j;
}

Model model_from_json(const json& j) {
  try {
    require_keys(j, {"schema", "labels", "dimensions", "attention", "segments", "beam", "theta", "fit", "event_priors",
                     "event_classifier", "belief_prior", "belief_likelihood"},
                 "model");
    if (j.at("schema").get<int>() != kModelSchema) throw ModelError("unsupported model schema");
    const json& dims = j.at("dimensions");
    if (dims.at("descriptor").get<int>() != descriptor_dimension() ||
        dims.at("likelihood_features").get<int>() != likelihood_feature_dimension()) {
      throw ModelError("model feature dimensions do not match this build");
    }
    const json& labels = j.at("labels");
    for (std::size_t i = 0; i < kEventLabels.size(); ++i) {
      if (labels.at("events").at(i) != to_string(kEventLabels[i])) throw ModelError("event label order differs");
    }
    for (std::size_t i = 0; i < kDeltas.size(); ++i) {
      if (labels.at("deltas").at(i) != to_string(kDeltas[i])) throw ModelError("delta order differs");
    }
    Model m;
    const json& a = j.at("attention");
    m.attention = {a.at("gaze_half_angle").get<double>(), a.at("gaze_range").get<double>(),
                   a.at("pointing_half_angle").get<double>(), a.at("pointing_range").get<double>()};
    const json& s = j.at("segments");
    m.segments = {s.at("window").get<int>(), s.at("threshold").get<double>(), s.at("coefficients").get<int>()};
    m.beam = {j.at("beam").at("width").get<int>(), j.at("beam").at("max_merge").get<int>()};
    m.theta = theta_from(j.at("theta"));
    const json& fit = j.at("fit");
    m.l1 = fit.at("l1").get<double>();
    m.l2 = fit.at("l2").get<double>();
    m.theta1_grid_size = fit.at("theta1_grid_size").get<std::size_t>();
    m.theta2_grid_size = fit.at("theta2_grid_size").get<std::size_t>();
    const json& ep = j.at("event_priors");
    m.priors.alpha = ep.at("alpha").get<double>();
    read_matrix(ep.at("trans"), m.priors.trans);
    read_matrix(ep.at("occ"), m.priors.occ);
    read_matrix(ep.at("trans_counts"), m.priors.trans_counts);
    read_matrix(ep.at("occ_counts"), m.priors.occ_counts);
    m.classifier.model = softmax_from(j.at("event_classifier"), kNumEventLabels, descriptor_dimension(),
                                      "event_classifier");
    const json& bp = j.at("belief_prior");
    m.beliefs.prior.alpha = bp.at("alpha").get<double>();
    const json& tables = bp.at("tables");
    if (!tables.is_array() || tables.size() != kNumMinds) throw ModelError("belief prior needs one entry per mind");
    for (std::size_t mi = 0; mi < kNumMinds; ++mi) {
      if (!tables[mi].is_array() || tables[mi].size() != kNumEventLabels) {
        throw ModelError("belief prior needs one table per event label");
      }
      for (std::size_t e = 0; e < kNumEventLabels; ++e) {
        const json& tj = tables[mi][e];
        BeliefPriorTable& t = m.beliefs.prior.tables[mi][e];
        read_matrix(tj.at("trans"), t.trans);
        read_array(tj.at("marginal"), t.marginal);
        read_matrix(tj.at("trans_counts"), t.trans_counts);
        read_array(tj.at("marginal_counts"), t.marginal_counts);
      }
    }
    const json& lik = j.at("belief_likelihood");
    if (!lik.is_array() || lik.size() != kNumMinds) throw ModelError("belief likelihood needs one model per mind");
    for (std::size_t mi = 0; mi < kNumMinds; ++mi) {
      m.beliefs.likelihood.minds[mi] =
          softmax_from(lik[mi], kNumDeltas, likelihood_feature_dimension(), "belief_likelihood");
    }
    if (m.segments.window < 2 || m.segments.coefficients < 1 || m.beam.width < 1 || m.beam.max_merge < 1) {
      throw ModelError("model search parameters are invalid");
    }
    return m;
  } catch (const json::exception& e) {
    throw ModelError(std::string("model: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelError(std::string("model: ") + e.what());
  }
}

void save_model(const fs::path& path, const Model& model) { write_text_file(path, model_to_json(model).dump(1) + "\n"); }

Model load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

ordered_json parse_graph_to_json(const ParseGraph& pg) {
  ordered_json j;
  j["trace"] = {{"id", pg.trace_id}, {"length", pg.length}, {"objects", pg.object_count}};
  j["parameters"] = theta_json(pg.theta);
  ordered_json e;
  e["aggregation"] = pg.energy.aggregation;
  e["event_prior"] = pg.energy.event_prior;
  e["belief_prior"] = pg.energy.belief_prior;
  e["composition"] = pg.energy.composition;
  e["classification"] = pg.energy.classification;
  e["belief_likelihood"] = pg.energy.belief_likelihood;
  e["total"] = pg.energy.total;
  j["energy"] = e;
  ordered_json events = ordered_json::array();
  for (const Event& ev : pg.events) {
    ordered_json ej;
    ej["label"] = std::string(short_name(ev.label));
    ej["start"] = ev.start;
    ej["end"] = ev.end;
    ej["segments"] = {ev.first_segment, ev.end_segment};
    events.push_back(ej);
  }
  j["events"] = events;
  json segs = json::array();
  for (const Segment& s : pg.segments) segs.push_back({s.start, s.end});
  j["segments"] = segs;
  json deltas = json::array();
  const BeliefTable& b = pg.beliefs.deltas;
  for (MindId m : kMinds) {
    for (int t = 0; t < b.num_frames(); ++t) {
      for (int o = 0; o < b.num_objects(); ++o) {
        if (b.at(m, t, o) != BeliefDelta::Null) {
          deltas.push_back({std::string(to_string(m)), t, o, std::string(to_string(b.at(m, t, o)))});
        }
      }
    }
  }
  ordered_json beliefs;
  beliefs["non_null"] = deltas.size();
  beliefs["deltas"] = deltas;
  j["beliefs"] = beliefs;
  json att = json::array();
  for (std::size_t t = 0; t < pg.graphs.size(); ++t) {
    for (const AttentionEdge& edge : pg.graphs[t].edges) {
      att.push_back({t, edge.source, edge.target, edge.channel == Channel::Gaze ? "gaze" : "point"});
    }
  }
  j["attention"] = att;
  return j;
}

std::string format_beliefs(const BeliefInference& beliefs) {
  std::string out;
  const BeliefTable& b = beliefs.deltas;
  const bool have_posterior = !beliefs.posterior.empty();
  char buf[96];
  for (MindId m : kMinds) {
    for (int t = 0; t < b.num_frames(); ++t) {
      for (int o = 0; o < b.num_objects(); ++o) {
        const BeliefDelta d = b.at(m, t, o);
        out += std::string(to_string(m)) + ' ' + std::to_string(t) + ' ' + std::to_string(o) + ' ' +
               std::string(to_string(d));
        if (have_posterior) {
          const double p = beliefs.at(m, t, o)[static_cast<std::size_t>(index(d))];
          std::snprintf(buf, sizeof buf, " %.6g", p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
          out += buf;
        }
        out += '\n';
      }
    }
  }
  return out;
}

std::string format_feature_dump(const FeatureMatrix& m) {
  std::string out = "FMPF";
  put_u32(out, kFeatureDumpVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

FeatureMatrix parse_feature_dump(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "FMPF") throw DataError("not a feature dump");
  if (get_u32(bytes, 4) != kFeatureDumpVersion) throw DataError("unsupported feature dump version");
  const auto rows = get_u32(bytes, 8);
  const auto cols = get_u32(bytes, 12);
  if (bytes.size() != 16 + 4 * static_cast<std::size_t>(rows) * cols) throw DataError("feature dump size mismatch");
  FeatureMatrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 16 + 4 * i)));
  }
  return m;
}

std::string format_segments(std::span<const Segment> segments) {
  std::string out;
  for (const Segment& s : segments) out += std::to_string(s.start) + ' ' + std::to_string(s.end) + '\n';
  return out;
}

std::string format_report(std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::string out;
  char buf[64];
  const auto table = [&](const char* title, auto pick, auto avg) {
    out += title;
    out += '\n';
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), "method");
    out += buf;
    for (MindId m : kMinds) {
      std::snprintf(buf, sizeof buf, " %7s", std::string(to_string(m)).c_str());
      out += buf;
    }
    out += "     avg\n";
    for (const auto& [name, report] : rows) {
      std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), name.c_str());
      out += buf;
      for (const MindMetrics& mm : report.minds) {
        std::snprintf(buf, sizeof buf, " %7.4f", pick(mm));
        out += buf;
      }
      std::snprintf(buf, sizeof buf, " %7.4f\n", avg(report));
      out += buf;
    }
  };
  table("precision (macro over occur, disappear, update, null)",
        [](const MindMetrics& m) { return m.macro_precision; }, [](const MetricsReport& r) { return r.mean_precision; });
  out += '\n';
  table("f1 (macro over occur, disappear, update, null)", [](const MindMetrics& m) { return m.macro_f1; },
        [](const MetricsReport& r) { return r.mean_f1; });
  return out;
}

std::string format_keyframes(std::span<const int> frames) {
  std::string out;
  for (int f : frames) out += std::to_string(f) + '\n';
  return out;
}

std::string keyframe_svg(std::span<const double> scores, std::span<const int> selected) {
  constexpr double kW = 800.0;
  constexpr double kH = 200.0;
  constexpr double kPad = 10.0;
  double peak = 0.0;
  for (double s : scores) peak = std::max(peak, s);
  if (peak <= 0.0) peak = 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(scores.size()) - 1.0);
  const auto x = [&](double t) { return kPad + (kW - 2 * kPad) * t / n; };
  const auto y = [&](double s) { return kH - kPad - (kH - 2 * kPad) * s / peak; };
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"200\" viewBox=\"0 0 800 200\">\n";
  out += "<rect width=\"800\" height=\"200\" fill=\"white\"/>\n";
  for (int f : selected) {
    out += "<line x1=\"" + fmt("%.2f", x(f)) + "\" y1=\"" + fmt("%.2f", kPad) + "\" x2=\"" + fmt("%.2f", x(f)) +
           "\" y2=\"" + fmt("%.2f", kH - kPad) + "\" stroke=\"#d62728\" stroke-width=\"1\"/>\n";
  }
  out += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t) out += ' ';
    out += fmt("%.2f", x(static_cast<double>(t))) + "," + fmt("%.2f", y(scores[t]));
  }
  out += "\"/>\n</svg>\n";
  return out;
}

std::vector<std::string> list_trace_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory " + dir.string() + " does not exist");
  static constexpr std::string_view kSuffix = ".trace.jsonl";
  std::vector<std::string> ids;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      ids.push_back(name.substr(0, name.size() - kSuffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

fs::path trace_path(const fs::path& dir, const std::string& id) { return dir / (id + ".trace.jsonl"); }
fs::path truth_path(const fs::path& dir, const std::string& id) { return dir / (id + ".gt.txt"); }

}  // namespace fmp
