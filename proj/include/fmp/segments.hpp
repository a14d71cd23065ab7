#pragma once

#include <span>
#include <vector>

#include "fmp/features.hpp"

namespace fmp {

/// Interactive segment [start, end) with its wavelet summary.
struct Segment {
  int start = 0;
  int end = 0;
  std::vector<double> summary;
  double mean_step_distance = 0.0;

  int length() const { return end - start; }
};

struct SegmentParams {
  int window = 10;
  double threshold = 0.0;  // tau_s: merge while the closest adjacent pair is nearer than this
  int coefficients = kDefaultSummaryCoefficients;
};

/// Fixed windows of `window` frames; the last window absorbs a short tail.
std::vector<std::pair<int, int>> initial_windows(int length, int window);

/// Bottom-up merging of adjacent windows. At every step the adjacent pair
/// with the smallest summary distance is merged (leftmost pair on ties) as
/// long as that distance is below the threshold. The result covers [0, T).
/// Throws std::invalid_argument for streams shorter than 2 frames.
std::vector<Segment> propose_segments(const FeatureMatrix& stream, const SegmentParams& params);

/// Median distance between the summaries of adjacent initial windows over a
/// set of streams; the default merge threshold.
double median_adjacent_window_distance(std::span<const FeatureMatrix* const> streams, const SegmentParams& params);

/// Mean of D(phi_t, phi_t+1) over the steps inside [begin, end); 0 for a single frame.
double mean_step_distance(const FeatureMatrix& stream, int begin, int end);

}  // namespace fmp
