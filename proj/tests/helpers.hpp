#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fmp/beliefs.hpp"
#include "fmp/events.hpp"
#include "fmp/features.hpp"
#include "fmp/random.hpp"
#include "fmp/segments.hpp"
#include "fmp/world.hpp"

namespace fmp::test {

/// Upright agent with the head at `head`; hands slightly in front.
inline AgentState make_agent(const Vec3& head, const Vec3& gaze) {
  AgentState a;
  a.position = {head.x, head.y, 0.0};
  a.pose = {head,
            {head.x - 0.25, head.y + 0.1, head.z - 0.6},
            {head.x + 0.25, head.y + 0.1, head.z - 0.6},
            {head.x, head.y, head.z - 0.4},
            {head.x - 0.1, head.y, 0.05},
            {head.x + 0.1, head.y, 0.05}};
  a.gaze = normalized(gaze);
  return a;
}

inline WorldFrame make_frame(int t, const AgentState& a0, const AgentState& a1, const std::vector<Vec3>& objects) {
  WorldFrame f;
  f.t = t;
  f.agents = {a0, a1};
  for (std::size_t j = 0; j < objects.size(); ++j) {
    f.objects.push_back({objects[j], ObjectCategory::Cup, static_cast<int>(j)});
  }
  return f;
}

inline WorldTrace make_trace(std::vector<WorldFrame> frames) {
  WorldTrace tr;
  tr.object_count = frames.empty() ? 0 : static_cast<int>(frames[0].objects.size());
  tr.frames = std::move(frames);
  return tr;
}

inline FeatureMatrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  FeatureMatrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

/// Priors fitted on random label sequences.
inline EventPriors random_priors(Rng& rng) {
  std::vector<std::vector<EventLabel>> seqs;
  const int n = rng.uniform_int(1, 6);
  for (int i = 0; i < n; ++i) {
    std::vector<EventLabel> s;
    const int len = rng.uniform_int(1, 7);
    for (int j = 0; j < len; ++j) s.push_back(static_cast<EventLabel>(rng.uniform_int(0, 2)));
    seqs.push_back(std::move(s));
  }
  return fit_priors(seqs, 1.0);
}

inline EventClassifier random_classifier(Rng& rng) {
  const int d = descriptor_dimension();
  SoftmaxRegression m(kNumEventLabels, d);
  for (double& w : m.weights) w = rng.uniform(-1.5, 1.5);
  for (double& b : m.bias) b = rng.uniform(-0.5, 0.5);
  m.mean.assign(static_cast<std::size_t>(d), 0.0);
  m.scale.assign(static_cast<std::size_t>(d), 1.0);
  return {m};
}

inline double random_lambda(Rng& rng) {
  static constexpr double kValues[] = {0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  return kValues[rng.uniform_int(0, 5)];
}

inline EventEnergyParams random_theta1(Rng& rng) {
  return {random_lambda(rng), random_lambda(rng), random_lambda(rng), random_lambda(rng),
          random_lambda(rng), random_lambda(rng), random_lambda(rng)};
}

/// Random parse instance: a feature stream made of noisy plateaus, random
/// descriptor rows, and a contiguous segment list of `segments` pieces.
struct ParseInstance {
  TraceFeatures features;
  std::vector<Segment> segments;
  EventPriors priors;
  EventClassifier classifier;
};

inline ParseInstance random_instance(Rng& rng, int segments, int cols = 4) {
  ParseInstance inst;
  int t = 0;
  for (int s = 0; s < segments; ++s) {
    const int len = rng.uniform_int(2, 9);
    Segment seg;
    seg.start = t;
    seg.end = t + len;
    inst.segments.push_back(seg);
    t += len;
  }
  inst.features.phi = FeatureMatrix(t, cols);
  for (const Segment& seg : inst.segments) {
    std::vector<double> level(static_cast<std::size_t>(cols));
    for (double& v : level) v = rng.uniform(-2.0, 2.0);
    for (int f = seg.start; f < seg.end; ++f) {
      for (int c = 0; c < cols; ++c) inst.features.phi.at(f, c) = level[static_cast<std::size_t>(c)] + rng.normal(0.0, 0.3);
    }
  }
  inst.features.descriptors = random_matrix(t, descriptor_row_dimension(), rng, 0.0, 1.0);
  inst.priors = random_priors(rng);
  inst.classifier = random_classifier(rng);
  return inst;
}

inline std::size_t slot(BeliefDelta d) { return static_cast<std::size_t>(index(d)); }

/// Random prior table with the state-machine zeros in place.
inline BeliefPriorTable random_table(Rng& rng, MindId mind, EventLabel label) {
  BeliefPriorTable t;
  for (int r = 0; r < kNumPriorRows; ++r) {
    double total = 0.0;
    for (BeliefDelta d : kDeltas) {
      const double v = prior_supported(mind, label, static_cast<PriorRow>(r), d) ? rng.uniform(0.05, 1.0) : 0.0;
      t.trans[static_cast<std::size_t>(r)][slot(d)] = v;
      total += v;
    }
    for (double& v : t.trans[static_cast<std::size_t>(r)]) v /= total;
  }
  double total = 0.0;
  for (BeliefDelta d : kDeltas) {
    t.marginal[slot(d)] = marginal_supported(mind, label, d) ? rng.uniform(0.05, 1.0) : 0.0;
    total += t.marginal[slot(d)];
  }
  for (double& v : t.marginal) v /= total;
  return t;
}

inline ChainProblem random_chain(Rng& rng, const BeliefPriorTable* table, int length) {
  ChainProblem c;
  c.prior = table;
  c.tracked_at_start = rng.bernoulli(0.5);
  c.loglik.resize(static_cast<std::size_t>(length));
  for (auto& frame : c.loglik) {
    for (auto& hist : frame) {
      for (double& v : hist) v = std::log(rng.uniform(0.01, 1.0));
    }
  }
  return c;
}

/// Straight-line score: replays tracking and the (last non-null, occurred)
/// history by hand.
inline double reference_score(const ChainProblem& c, const std::vector<BeliefDelta>& seq, const BeliefEnergyParams& p) {
  bool tracked = c.tracked_at_start;
  int last = 0;
  bool occurred = false;
  double s = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const BeliefDelta d = seq[t];
    if (d == BeliefDelta::Occur && tracked) return -std::numeric_limits<double>::infinity();
    if ((d == BeliefDelta::Update || d == BeliefDelta::Disappear) && !tracked) return -std::numeric_limits<double>::infinity();
    const double marg = c.prior->marginal[slot(d)];
    if (t > 0) {
      const BeliefDelta prev = seq[t - 1];
      int row = index(prev);
      if (prev == BeliefDelta::Null) row = tracked ? 3 : 4;
      const double tp = c.prior->trans[static_cast<std::size_t>(row)][slot(d)];
      if (tp == 0.0) return -std::numeric_limits<double>::infinity();
      s += p.lambda4 * std::log(tp);
    }
    if (t == 0 || !p.marginal_first_frame_only) {
      if (marg == 0.0) return -std::numeric_limits<double>::infinity();
      s += p.lambda4 * std::log(marg);
    }
    s += p.lambda9 * c.loglik[t][static_cast<std::size_t>(last * 2 + (occurred ? 1 : 0))][slot(d)];
    if (d != BeliefDelta::Null) last = index(d) + 1;
    occurred = occurred || d == BeliefDelta::Occur;
    if (d == BeliefDelta::Occur || d == BeliefDelta::Update) tracked = true;
    if (d == BeliefDelta::Disappear) tracked = false;
  }
  return s;
}

inline std::vector<BeliefDelta> decode(long code, int length) {
  std::vector<BeliefDelta> seq(static_cast<std::size_t>(length));
  for (int t = length - 1; t >= 0; --t) {
    seq[static_cast<std::size_t>(t)] = static_cast<BeliefDelta>(code % 4);
    code /= 4;
  }
  return seq;
}

}  // namespace fmp::test
