#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fmp/beliefs.hpp"
#include "fmp/labels.hpp"
#include "fmp/mind.hpp"

namespace fmp {

using Confusion = std::array<std::array<long long, kNumDeltas>, kNumDeltas>;  // [truth][predicted]

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
};

struct MindMetrics {
  Confusion confusion{};
  std::array<ClassScores, kNumDeltas> classes{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

struct MetricsReport {
  std::array<MindMetrics, kNumMinds> minds{};
  double mean_precision = 0.0;  // over minds
  double mean_f1 = 0.0;
};

/// Per-class scores from a confusion matrix. Undefined ratios count as 0.
MindMetrics metrics_from_confusion(const Confusion& c);

/// Accumulates confusion matrices over many (mind, frame, object) keys.
class MetricsAccumulator {
 public:
  /// Throws DataError when the two tables do not share keys.
  void add(const BeliefTable& predicted, const BeliefTable& truth);
  void add(MindId mind, BeliefDelta truth, BeliefDelta predicted) {
    ++confusion_[static_cast<std::size_t>(index(mind))][static_cast<std::size_t>(index(truth))]
                [static_cast<std::size_t>(index(predicted))];
  }
  MetricsReport report() const;

 private:
  std::array<Confusion, kNumMinds> confusion_{};
};

MetricsReport macro_metrics(const BeliefTable& predicted, const BeliefTable& truth);

/// Uniform random deltas over the same keys, seeded.
BeliefTable chance_baseline(int frames, int objects, std::uint64_t seed);

/// Per-frame sum over minds and objects of p(occur) + p(disappear).
std::vector<double> keyframe_scores(const BeliefInference& beliefs);

struct KeyframeSelection {
  std::vector<int> frames;  // in selection order
  bool incomplete = false;  // fewer than k frames survived suppression
};

inline constexpr int kDefaultSuppression = 15;

/// Greedy top-k with non-maximum suppression: after picking frame f, frames g
/// with |g - f| < w are excluded. Ties go to the earlier frame.
KeyframeSelection select_keyframes(std::span<const double> scores, int k, int w = kDefaultSuppression);

}  // namespace fmp
