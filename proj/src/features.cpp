#include "fmp/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fmp {

int feature_dimension(int joint_count, int object_count) {
  return 2 * (3 * joint_count + 2 * object_count + 3) + 3 * joint_count + 1 + 4;
}

FrameFeatures extract_frame_features(const WorldFrame& frame, std::span<const Box> occluders,
                                     const AttentionParams& params) {
  FrameFeatures f;
  f.joint_count = static_cast<int>(frame.agents[0].pose.size());
  f.object_count = static_cast<int>(frame.objects.size());
  f.values.reserve(static_cast<std::size_t>(feature_dimension(f.joint_count, f.object_count)));
  const int n = f.object_count;

  for (int a = 0; a < 2; ++a) {
    const AgentState& s = frame.agents[static_cast<std::size_t>(a)];
    f.gaze[static_cast<std::size_t>(a)] = gaze_target(frame, a, occluders, params);
    f.pointing[static_cast<std::size_t>(a)] = pointing_target(frame, a, occluders, params);
    for (const Vec3& j : s.pose) {
      f.values.push_back(j.x);
      f.values.push_back(j.y);
      f.values.push_back(j.z);
    }
    for (const ObjectState& o : frame.objects) {
      f.values.push_back(std::min(distance(s.left_hand(), o.position), distance(s.right_hand(), o.position)));
    }
    const TargetHit& hit = f.gaze[static_cast<std::size_t>(a)];
    std::vector<double> onehot(static_cast<std::size_t>(n + 2), 0.0);
    if (hit.entity < 0) {
      onehot[0] = 1.0;
    } else if (is_agent_entity(hit.entity)) {
      onehot[1] = 1.0;
    } else {
      onehot[static_cast<std::size_t>(hit.entity)] = 1.0;  // object j sits at 2 + j
    }
    f.values.insert(f.values.end(), onehot.begin(), onehot.end());
    f.values.push_back(hit.entity < 0 ? std::numbers::pi : hit.offset);
  }

  const AgentState& a0 = frame.agents[0];
  const AgentState& a1 = frame.agents[1];
  for (std::size_t j = 0; j < a0.pose.size(); ++j) {
    const Vec3 d = a1.pose[j] - a0.pose[j];
    f.values.push_back(d.x);
    f.values.push_back(d.y);
    f.values.push_back(d.z);
  }
  f.values.push_back(angle_between(a0.gaze, a1.gaze));
  f.values.push_back(distance(a0.left_hand(), a1.left_hand()));
  f.values.push_back(distance(a0.left_hand(), a1.right_hand()));
  f.values.push_back(distance(a0.right_hand(), a1.left_hand()));
  f.values.push_back(distance(a0.right_hand(), a1.right_hand()));
  return f;
}

bool AttentionGraph::has_edge(int source, int target, Channel channel) const {
  return std::any_of(edges.begin(), edges.end(), [&](const AttentionEdge& e) {
    return e.source == source && e.target == target && e.channel == channel;
  });
}

int AttentionGraph::gaze_target(int agent) const {
  for (const AttentionEdge& e : edges) {
    if (e.source == agent && e.channel == Channel::Gaze) return e.target;
  }
  return -1;
}

AttentionGraph build_attention_graph(const WorldFrame& frame, const FrameFeatures& features) {
  AttentionGraph g;
  g.num_entities = kNumAgents + static_cast<int>(frame.objects.size());
  for (int a = 0; a < 2; ++a) {
    const int gt = features.gaze[static_cast<std::size_t>(a)].entity;
    if (gt >= 0 && gt != a) g.edges.push_back({a, gt, Channel::Gaze});
  }
  for (int a = 0; a < 2; ++a) {
    const int pt = features.pointing[static_cast<std::size_t>(a)].entity;
    if (pt >= 0 && pt != a) g.edges.push_back({a, pt, Channel::Pointing});
  }
  return g;
}

TraceFeatures extract_trace_features(const WorldTrace& trace, const AttentionParams& params) {
  TraceFeatures out;
  const int T = trace.length();
  out.phi = FeatureMatrix(T, feature_dimension(trace.joint_count, trace.object_count));
  out.descriptors = FeatureMatrix(T, descriptor_row_dimension());
  out.graphs.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const WorldFrame& frame = trace.frames[static_cast<std::size_t>(t)];
    const FrameFeatures f = extract_frame_features(frame, trace.occluders, params);
    if (static_cast<int>(f.values.size()) != out.phi.cols) {
      throw std::invalid_argument("frame " + std::to_string(t) + " has an inconsistent feature dimension");
    }
    std::copy(f.values.begin(), f.values.end(), out.phi.row(t).begin());
    out.graphs[static_cast<std::size_t>(t)] = build_attention_graph(frame, f);
    descriptor_row(f, out.graphs[static_cast<std::size_t>(t)], out.descriptors.row(t));
  }
  return out;
}

std::vector<double> haar_transform(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0 || !std::has_single_bit(n)) throw std::invalid_argument("Haar transform needs a power-of-two length");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> out(n);
  std::vector<double> tmp(n);
  const double r = 1.0 / std::numbers::sqrt2;
  for (std::size_t len = n; len > 1; len /= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      tmp[i] = (a[2 * i] + a[2 * i + 1]) * r;
      out[half + i] = (a[2 * i] - a[2 * i + 1]) * r;
    }
    std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(half), a.begin());
  }
  out[0] = a[0];
  return out;
}

std::vector<double> haar_inverse(std::span<const double> c) {
  const std::size_t n = c.size();
  if (n == 0 || !std::has_single_bit(n)) throw std::invalid_argument("Haar transform needs a power-of-two length");
  std::vector<double> a(n);
  std::vector<double> tmp(n);
  a[0] = c[0];
  const double r = 1.0 / std::numbers::sqrt2;
  for (std::size_t half = 1; half < n; half *= 2) {
    for (std::size_t i = 0; i < half; ++i) {
      tmp[2 * i] = (a[i] + c[half + i]) * r;
      tmp[2 * i + 1] = (a[i] - c[half + i]) * r;
    }
    std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(2 * half), a.begin());
  }
  return a;
}

std::vector<double> resample(std::span<const double> x, int n) {
  if (x.empty() || n <= 0) throw std::invalid_argument("resample needs a non-empty input and a positive length");
  const auto L = static_cast<long long>(x.size());
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // floor((i + 0.5) L / n) in exact integer arithmetic
    const long long idx = std::min(L - 1, ((2LL * i + 1) * L) / (2LL * n));
    out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(idx)];
  }
  return out;
}

std::vector<double> wavelet_summary(const FeatureMatrix& stream, int begin, int end, int coefficients) {
  const int L = end - begin;
  if (L < 2) throw std::invalid_argument("wavelet summary needs a window of at least 2 frames");
  if (begin < 0 || end > stream.rows) throw std::out_of_range("wavelet summary window outside the stream");
  if (coefficients < 1) throw std::invalid_argument("wavelet summary needs at least one coefficient");
  const int n = static_cast<int>(std::bit_ceil(static_cast<unsigned>(L)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto K = static_cast<std::size_t>(coefficients);
  std::vector<double> out(static_cast<std::size_t>(stream.cols) * K, 0.0);
  std::vector<double> channel(static_cast<std::size_t>(L));
  for (int c = 0; c < stream.cols; ++c) {
    for (int t = 0; t < L; ++t) channel[static_cast<std::size_t>(t)] = stream.at(begin + t, c);
    const std::vector<double> coef = haar_transform(resample(channel, n));
    for (std::size_t k = 0; k < K && k < coef.size(); ++k) {
      out[static_cast<std::size_t>(c) * K + k] = coef[k] * scale;
    }
  }
  return out;
}

double feature_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("feature_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

constexpr int kPerAgent = 6;
constexpr int kShared = 8;
constexpr double kNoObjectDistance = 3.0;

}  // namespace

int descriptor_row_dimension() { return 2 * kPerAgent + kShared; }
int descriptor_dimension() { return 2 * kPerAgent + kShared; }

void descriptor_row(const FrameFeatures& f, const AttentionGraph& g, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const int t0 = g.gaze_target(0);
  const int t1 = g.gaze_target(1);
  for (int a = 0; a < 2; ++a) {
    double* row = out.data() + a * kPerAgent;
    const int target = a == 0 ? t0 : t1;
    row[0] = target < 0 ? 1.0 : 0.0;
    row[1] = is_agent_entity(target) ? 1.0 : 0.0;
    row[2] = target >= kNumAgents ? 1.0 : 0.0;
    row[3] = (target < 0 ? std::numbers::pi : f.gaze[static_cast<std::size_t>(a)].offset) / std::numbers::pi;
    double nearest = kNoObjectDistance;
    const auto unary = f.unary(a);
    for (int o = 0; o < f.object_count; ++o) {
      nearest = std::min(nearest, unary[static_cast<std::size_t>(3 * f.joint_count + o)]);
    }
    row[4] = nearest;
    row[5] = f.pointing[static_cast<std::size_t>(a)].entity >= 0 ? 1.0 : 0.0;
  }
  double* shared = out.data() + 2 * kPerAgent;
  const bool looks01 = t0 == 1;
  const bool looks10 = t1 == 0;
  const bool obj0 = t0 >= kNumAgents;
  const bool obj1 = t1 >= kNumAgents;
  int pointing_edges = 0;
  for (const AttentionEdge& e : g.edges) pointing_edges += e.channel == Channel::Pointing ? 1 : 0;
  shared[0] = (looks01 ? 0.5 : 0.0) + (looks10 ? 0.5 : 0.0);
  shared[1] = looks01 && looks10 ? 1.0 : 0.0;
  shared[2] = obj0 && t0 == t1 ? 1.0 : 0.0;
  shared[3] = (looks01 && obj1) || (looks10 && obj0) ? 1.0 : 0.0;
  shared[4] = 0.5 * pointing_edges;
  shared[5] = f.pairwise()[static_cast<std::size_t>(3 * f.joint_count)] / std::numbers::pi;
  shared[6] = obj0 && obj1 && t0 != t1 ? 1.0 : 0.0;
  shared[7] = t0 < 0 && t1 < 0 ? 1.0 : 0.0;
}

std::vector<double> fold_descriptor(std::span<const double> row_mean) {
  std::vector<double> d(static_cast<std::size_t>(descriptor_dimension()));
  for (int k = 0; k < kPerAgent; ++k) {
    const double a = row_mean[static_cast<std::size_t>(k)];
    const double b = row_mean[static_cast<std::size_t>(kPerAgent + k)];
    d[static_cast<std::size_t>(k)] = 0.5 * (a + b);
    d[static_cast<std::size_t>(kPerAgent + k)] = std::abs(a - b);
  }
  for (int k = 0; k < kShared; ++k) {
    d[static_cast<std::size_t>(2 * kPerAgent + k)] = row_mean[static_cast<std::size_t>(2 * kPerAgent + k)];
  }
  return d;
}

std::vector<double> event_descriptor(const FeatureMatrix& rows, int begin, int end) {
  if (end <= begin) throw std::invalid_argument("event descriptor needs a non-empty span");
  std::vector<double> mean(static_cast<std::size_t>(rows.cols), 0.0);
  for (int t = begin; t < end; ++t) {
    for (int c = 0; c < rows.cols; ++c) mean[static_cast<std::size_t>(c)] += rows.at(t, c);
  }
  for (double& v : mean) v /= static_cast<double>(end - begin);
  return fold_descriptor(mean);
}

}  // namespace fmp
