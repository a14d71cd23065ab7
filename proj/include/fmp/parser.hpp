#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmp/beliefs.hpp"
#include "fmp/events.hpp"
#include "fmp/features.hpp"
#include "fmp/segments.hpp"
#include "fmp/sim.hpp"

namespace fmp {

/// An event of a parse: a label over the contiguous segments [first_segment, end_segment).
struct Event {
  EventLabel label = EventLabel::NoCommunication;
  int start = 0;
  int end = 0;
  int first_segment = 0;
  int end_segment = 0;

  EventSpan span() const { return {label, start, end}; }
  bool operator==(const Event&) const = default;
};

struct BeamParams {
  int width = 5;      // n
  int max_merge = 3;  // m: an event merges 1..m segments
};

/// Lazily computed per-span quantities of one segmented trace: within-event
/// step sums, wavelet summaries, classifier log-probabilities and pairwise
/// summary distances. Not thread-safe; use one cache per thread.
class SpanCache {
 public:
  SpanCache(const TraceFeatures& features, std::span<const Segment> segments, const EventClassifier& classifier,
            int coefficients = kDefaultSummaryCoefficients);

  int num_segments() const { return static_cast<int>(bounds_.size()) - 1; }
  int trace_length() const { return bounds_.back(); }
  int frame_start(int first) const { return bounds_[static_cast<std::size_t>(first)]; }
  int frame_end(int end_segment) const { return bounds_[static_cast<std::size_t>(end_segment)]; }

  /// (1 / T_j) * sum of D(phi_t, phi_t+1) over the span's steps.
  double within(int first, int end);
  const std::vector<double>& summary(int first, int end);
  double log_prob(int first, int end, EventLabel label);
  double summary_distance(int a_first, int a_end, int b_first, int b_end);

 private:
  std::size_t span_id(int first, int end) const {
    return static_cast<std::size_t>(first) * bounds_.size() + static_cast<std::size_t>(end);
  }

  const TraceFeatures& features_;
  const EventClassifier& classifier_;
  int coefficients_;
  std::vector<int> bounds_;
  std::vector<double> step_prefix_;
  std::vector<double> descriptor_prefix_;
  std::unordered_map<std::size_t, std::vector<double>> summaries_;
  std::unordered_map<std::size_t, std::array<double, kNumEventLabels>> log_probs_;
  std::unordered_map<std::uint64_t, double> distances_;
};

struct EventTermBreakdown {
  double aggregation = 0.0;
  double prior = 0.0;
  double composition = 0.0;
  double classification = 0.0;
  double total() const { return aggregation + prior + composition + classification; }
};

/// Event-level energy of a labeled segmentation (aggregation, event prior,
/// composition and classification terms).
EventTermBreakdown sequence_energy(SpanCache& cache, std::span<const Event> events, const EventPriors& priors,
                                   const EventEnergyParams& theta);

struct SearchResult {
  std::vector<Event> events;
  double energy = 0.0;
  std::size_t candidates = 0;  // complete parses scored
};

/// Strict preference used by both searches: lower energy (relative tolerance
/// 1e-9), then fewer events, then lexicographically smaller labels, then spans.
bool parse_preferred(double energy_a, std::span<const Event> a, double energy_b, std::span<const Event> b);

/// DP beam search over segmentations. Hypotheses are segmentation prefixes,
/// ranked by the energy the prefix would have as a complete parse. A
/// completed segmentation is labeled exactly and all completed hypotheses are
/// folded into the single best one. The result is the best over passes of
/// width 1..n, so widening the beam never returns a worse parse.
SearchResult beam_search_events(SpanCache& cache, const EventPriors& priors, const EventEnergyParams& theta,
                                const BeamParams& beam);

inline constexpr int kExhaustiveSegmentLimit = 12;

/// Enumerates every contiguous grouping and labeling. Throws
/// std::invalid_argument above kExhaustiveSegmentLimit segments.
SearchResult exhaustive_parse(SpanCache& cache, const EventPriors& priors, const EventEnergyParams& theta);

/// Minimum-energy labeling of a fixed segmentation, given by segment end
/// positions; ties resolve to the lexicographically smallest labels.
std::vector<Event> best_labeling(SpanCache& cache, std::span<const int> cuts, const EventPriors& priors,
                                 const EventEnergyParams& theta);

struct Theta {
  EventEnergyParams events;
  BeliefEnergyParams beliefs;
  bool operator==(const Theta&) const = default;
};

/// Everything a parse needs.
struct Model {
  AttentionParams attention;
  SegmentParams segments;
  BeamParams beam;
  EventPriors priors;
  EventClassifier classifier;
  BeliefModel beliefs;
  Theta theta;
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t theta1_grid_size = 0;
  std::size_t theta2_grid_size = 0;
};

struct EnergyBreakdown {
  double aggregation = 0.0;           // prior: fragmentation
  double event_prior = 0.0;           // prior: transitions and co-occurrence
  double belief_prior = 0.0;          // prior: belief dynamics
  double composition = 0.0;           // likelihood: segment composition
  double classification = 0.0;        // likelihood: event classification
  double belief_likelihood = 0.0;     // likelihood: belief dynamics
  double total = 0.0;

  double sum() const {
    return aggregation + event_prior + belief_prior + composition + classification + belief_likelihood;
  }
};

struct ParseGraph {
  std::string trace_id;
  int length = 0;
  int object_count = 0;
  std::vector<Event> events;
  std::vector<Segment> segments;
  std::vector<AttentionGraph> graphs;
  BeliefInference beliefs;
  EnergyBreakdown energy;
  Theta theta;
};

/// Recomputes every energy term of a parse graph from its layers.
/// Throws DataError when events do not partition the trace.
EnergyBreakdown total_energy(const ParseGraph& pg, SpanCache& cache, const Model& model, const Theta& theta);

std::vector<EventSpan> spans_of(std::span<const Event> events);

/// Checks that events are sorted, disjoint, covering [0, length) and agree
/// with the segment list. Throws DataError otherwise.
void check_partition(std::span<const Event> events, std::span<const Segment> segments, int length);

ParseGraph parse(const WorldTrace& trace, const Model& model, const std::string& trace_id = "trace");
ParseGraph parse(const WorldTrace& trace, const TraceFeatures& features, const Model& model,
                 const std::string& trace_id = "trace");

struct TrainingTrace {
  std::string id;
  const WorldTrace* trace = nullptr;
  const GroundTruth* truth = nullptr;
};

struct FitConfig {
  std::vector<double> lambda_values{0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  std::size_t max_theta1 = 500;
  std::vector<double> lambda4_values{0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  std::vector<double> lambda9_values{0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  /// Explicit grids override the value lists when non-empty.
  std::vector<EventEnergyParams> theta1_grid;
  std::vector<BeliefEnergyParams> theta2_grid;
  bool marginal_first_frame_only = false;
  std::uint64_t seed = 0;
  AttentionParams attention;
  int window = 10;
  std::optional<double> threshold;  // tau_s; default: median adjacent-window distance
  int coefficients = kDefaultSummaryCoefficients;
  BeamParams beam;
  double alpha = 1.0;
  TrainParams classifier_training{};
  TrainParams belief_training{};
  int jobs = 1;
};

/// Theta1 grid: the Cartesian product of the value list over the seven
/// weights, subsampled with the seed to at most `max_theta1` entries kept in
/// grid order.
std::vector<EventEnergyParams> theta1_grid(const FitConfig& config);
std::vector<BeliefEnergyParams> theta2_grid(const FitConfig& config);

struct FitResult {
  Model model;
  std::vector<double> l1_per_theta1;
  std::vector<double> l2_per_theta2;
  /// Mean -log posterior of the true deltas, for the entries tied at the
  /// minimum of l2_per_theta2; NaN elsewhere.
  std::vector<double> log_loss_per_theta2;
};

/// Frame-level event misclassification rate.
double event_frame_error(std::span<const Event> predicted, std::span<const ScriptedEvent> truth);

FitResult fit(std::span<const TrainingTrace> corpus, const FitConfig& config);

}  // namespace fmp
