#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fmp/attention.hpp"
#include "fmp/world.hpp"

namespace fmp {

/// Per-frame feature vector. Layout, for J joints and N objects:
///   for each agent: pose (3J), min hand-object distance per object (N),
///     gaze target one-hot over {none, other agent, object 0..N-1} (N+2),
///     gaze angular offset (1, pi when there is no target);
///   pairwise: pose of agent 1 relative to agent 0 per joint (3J),
///     angle between the two gaze directions (1),
///     hand-hand distances l0-l1, l0-r1, r0-l1, r0-r1 (4).
struct FrameFeatures {
  std::vector<double> values;
  std::array<TargetHit, 2> gaze;
  std::array<TargetHit, 2> pointing;
  int joint_count = 0;
  int object_count = 0;

  std::size_t unary_size() const { return static_cast<std::size_t>(3 * joint_count + 2 * object_count + 3); }
  std::size_t pairwise_offset() const { return 2 * unary_size(); }
  std::span<const double> unary(int agent) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(agent) * unary_size(), unary_size());
  }
  std::span<const double> pairwise() const { return std::span<const double>(values).subspan(pairwise_offset()); }
};

int feature_dimension(int joint_count, int object_count);

FrameFeatures extract_frame_features(const WorldFrame& frame, std::span<const Box> occluders,
                                     const AttentionParams& params = {});

enum class Channel : std::uint8_t { Gaze = 0, Pointing = 1 };

struct AttentionEdge {
  int source = 0;
  int target = 0;
  Channel channel = Channel::Gaze;
  bool operator==(const AttentionEdge&) const = default;
};

/// Directed attention among the 2 + N entities of one frame.
struct AttentionGraph {
  int num_entities = 2;
  std::vector<AttentionEdge> edges;

  bool has_edge(int source, int target, Channel channel) const;
  /// Gaze target of an agent, -1 if none.
  int gaze_target(int agent) const;
  bool mutual_gaze() const { return gaze_target(0) == 1 && gaze_target(1) == 0; }
};

AttentionGraph build_attention_graph(const WorldFrame& frame, const FrameFeatures& features);

/// Row-major T x D matrix of per-frame vectors.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  std::span<double> row(int i) { return std::span<double>(data).subspan(static_cast<std::size_t>(i) * cols, cols); }
  std::span<const double> row(int i) const {
    return std::span<const double>(data).subspan(static_cast<std::size_t>(i) * cols, cols);
  }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Everything the parser consumes from a trace.
struct TraceFeatures {
  FeatureMatrix phi;
  std::vector<AttentionGraph> graphs;
  FeatureMatrix descriptors;  // per-frame rows of the event descriptor, see descriptor_dimension
};

TraceFeatures extract_trace_features(const WorldTrace& trace, const AttentionParams& params = {});

/// Orthonormal Haar transform of a length-2^k signal. Output order:
/// scaling coefficient, then detail bands from coarsest to finest.
std::vector<double> haar_transform(std::span<const double> x);
std::vector<double> haar_inverse(std::span<const double> c);

/// Nearest-neighbour resampling to n samples: sample i takes x[floor((i + 0.5) L / n)].
std::vector<double> resample(std::span<const double> x, int n);

inline constexpr int kDefaultSummaryCoefficients = 8;

/// psi(window): per channel, resample rows [begin, end) to the next power of
/// two n, Haar-transform, keep the first K coefficients divided by sqrt(n)
/// (zero-padded when n < K). A constant channel c maps to (c, 0, ..., 0).
/// Channels are concatenated, so the result has cols * K entries.
std::vector<double> wavelet_summary(const FeatureMatrix& stream, int begin, int end,
                                    int coefficients = kDefaultSummaryCoefficients);

/// Euclidean distance; throws std::invalid_argument on a dimension mismatch.
double feature_distance(std::span<const double> a, std::span<const double> b);

/// Event descriptor: an object-count-independent, agent-symmetric summary of
/// a span used by the event classifier. Per-frame rows hold the agent-indexed
/// quantities; `event_descriptor` averages them over the span and folds the
/// two agents into their mean and absolute difference.
int descriptor_row_dimension();
int descriptor_dimension();
void descriptor_row(const FrameFeatures& f, const AttentionGraph& g, std::span<double> out);
std::vector<double> event_descriptor(const FeatureMatrix& rows, int begin, int end);
/// Folds a window mean of descriptor rows into the descriptor.
std::vector<double> fold_descriptor(std::span<const double> row_mean);

}  // namespace fmp
