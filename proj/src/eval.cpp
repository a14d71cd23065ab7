#include "fmp/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fmp/error.hpp"
#include "fmp/random.hpp"

namespace fmp {

MindMetrics metrics_from_confusion(const Confusion& c) {
  MindMetrics m;
  m.confusion = c;
  for (std::size_t k = 0; k < kNumDeltas; ++k) {
    long long tp = c[k][k];
    long long predicted = 0;
    long long actual = 0;
    for (std::size_t j = 0; j < kNumDeltas; ++j) {
      predicted += c[j][k];
      actual += c[k][j];
    }
    ClassScores& s = m.classes[k];
    s.support = actual;
    s.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.macro_precision += s.precision / kNumDeltas;
    m.macro_recall += s.recall / kNumDeltas;
    m.macro_f1 += s.f1 / kNumDeltas;
  }
  return m;
}

void MetricsAccumulator::add(const BeliefTable& predicted, const BeliefTable& truth) {
  if (predicted.num_frames() != truth.num_frames() || predicted.num_objects() != truth.num_objects()) {
    throw DataError("predicted and ground-truth belief tables have different keys");
  }
  for (MindId m : kMinds) {
    for (int t = 0; t < truth.num_frames(); ++t) {
      for (int o = 0; o < truth.num_objects(); ++o) add(m, truth.at(m, t, o), predicted.at(m, t, o));
    }
  }
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  for (std::size_t m = 0; m < kNumMinds; ++m) {
    r.minds[m] = metrics_from_confusion(confusion_[m]);
    r.mean_precision += r.minds[m].macro_precision / kNumMinds;
    r.mean_f1 += r.minds[m].macro_f1 / kNumMinds;
  }
  return r;
}

MetricsReport macro_metrics(const BeliefTable& predicted, const BeliefTable& truth) {
  MetricsAccumulator acc;
  acc.add(predicted, truth);
  return acc.report();
}

BeliefTable chance_baseline(int frames, int objects, std::uint64_t seed) {
  Rng rng(seed);
  BeliefTable out(frames, objects);
  for (MindId m : kMinds) {
    for (int t = 0; t < frames; ++t) {
      for (int o = 0; o < objects; ++o) out.at(m, t, o) = static_cast<BeliefDelta>(rng.uniform_int(0, kNumDeltas - 1));
    }
  }
  return out;
}

std::vector<double> keyframe_scores(const BeliefInference& beliefs) {
  const int T = beliefs.deltas.num_frames();
  const int N = beliefs.deltas.num_objects();
  std::vector<double> score(static_cast<std::size_t>(T), 0.0);
  if (beliefs.posterior.empty()) return score;
  for (MindId m : kMinds) {
    for (int t = 0; t < T; ++t) {
      for (int o = 0; o < N; ++o) {
        const auto p = beliefs.at(m, t, o);
        score[static_cast<std::size_t>(t)] += static_cast<double>(p[0]) + static_cast<double>(p[1]);
      }
    }
  }
  return score;
}

KeyframeSelection select_keyframes(std::span<const double> scores, int k, int w) {
  if (k < 1) throw std::invalid_argument("keyframe count must be at least 1");
  if (w < 0) throw std::invalid_argument("suppression window must be non-negative");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  KeyframeSelection out;
  for (int f : order) {
    if (static_cast<int>(out.frames.size()) == k) break;
    const bool suppressed = std::any_of(out.frames.begin(), out.frames.end(), [&](int g) { return std::abs(g - f) < w; });
    if (!suppressed) out.frames.push_back(f);
  }
  out.incomplete = static_cast<int>(out.frames.size()) < k;
  return out;
}

}  // namespace fmp
