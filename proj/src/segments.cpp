#include "fmp/segments.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fmp {

std::vector<std::pair<int, int>> initial_windows(int length, int window) {
  if (window < 1) throw std::invalid_argument("segment window must be positive");
  std::vector<std::pair<int, int>> out;
  const int count = std::max(1, length / window);
  for (int i = 0; i < count; ++i) {
    out.emplace_back(i * window, i + 1 == count ? length : (i + 1) * window);
  }
  return out;
}

double mean_step_distance(const FeatureMatrix& stream, int begin, int end) {
  if (end - begin < 2) return 0.0;
  double s = 0.0;
  for (int t = begin; t + 1 < end; ++t) s += feature_distance(stream.row(t), stream.row(t + 1));
  return s / static_cast<double>(end - begin - 1);
}

namespace {

Segment make_segment(const FeatureMatrix& stream, int begin, int end, int coefficients) {
  return {begin, end, wavelet_summary(stream, begin, end, coefficients), mean_step_distance(stream, begin, end)};
}

}  // namespace

std::vector<Segment> propose_segments(const FeatureMatrix& stream, const SegmentParams& params) {
  if (stream.rows < 2) throw std::invalid_argument("segment proposal needs at least 2 frames");
  std::vector<Segment> segs;
  for (const auto& [b, e] : initial_windows(stream.rows, params.window)) {
    segs.push_back(make_segment(stream, b, e, params.coefficients));
  }
  std::vector<double> gap;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) gap.push_back(feature_distance(segs[i].summary, segs[i + 1].summary));

  while (!gap.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gap.size(); ++i) {
      if (gap[i] < gap[best]) best = i;
    }
    if (!(gap[best] < params.threshold)) break;
    segs[best] = make_segment(stream, segs[best].start, segs[best + 1].end, params.coefficients);
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    gap.erase(gap.begin() + static_cast<std::ptrdiff_t>(best));
    if (best > 0) gap[best - 1] = feature_distance(segs[best - 1].summary, segs[best].summary);
    if (best < gap.size()) gap[best] = feature_distance(segs[best].summary, segs[best + 1].summary);
  }
  return segs;
}

double median_adjacent_window_distance(std::span<const FeatureMatrix* const> streams, const SegmentParams& params) {
  std::vector<double> d;
  for (const FeatureMatrix* s : streams) {
    if (s->rows < 2) continue;
    const auto windows = initial_windows(s->rows, params.window);
    std::vector<double> prev;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      std::vector<double> cur = wavelet_summary(*s, windows[i].first, windows[i].second, params.coefficients);
      if (i > 0) d.push_back(feature_distance(prev, cur));
      prev = std::move(cur);
    }
  }
  if (d.empty()) throw std::invalid_argument("no adjacent windows to estimate the merge threshold from");
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(d.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace fmp
