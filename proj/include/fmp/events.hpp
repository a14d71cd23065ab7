#pragma once

#include <array>
#include <span>
#include <vector>

#include "fmp/features.hpp"
#include "fmp/labels.hpp"
#include "fmp/softmax.hpp"

namespace fmp {

/// A labeled [start, end) frame interval.
struct EventSpan {
  EventLabel label = EventLabel::NoCommunication;
  int start = 0;
  int end = 0;
  int length() const { return end - start; }
  bool operator==(const EventSpan&) const = default;
};

using Matrix3 = std::array<std::array<double, kNumEventLabels>, kNumEventLabels>;

/// Event transition and co-occurrence frequencies. `occ` is symmetric and its
/// six unordered cells sum to one.
struct EventPriors {
  Matrix3 trans{};
  Matrix3 occ{};
  Matrix3 trans_counts{};  // raw consecutive-pair counts
  Matrix3 occ_counts{};    // raw unordered-pair counts, stored in the upper triangle
  double alpha = 1.0;
};

/// Counts consecutive pairs and unordered within-trace pairs, then applies
/// Laplace smoothing. Throws DataError for an empty corpus.
EventPriors fit_priors(std::span<const std::vector<EventLabel>> sequences, double alpha = 1.0);

/// Softmax over event descriptors (see event_descriptor).
struct EventClassifier {
  SoftmaxRegression model;
};

struct LabeledDescriptor {
  std::vector<double> descriptor;
  EventLabel label = EventLabel::NoCommunication;
  double weight = 1.0;
};

/// Throws DataError when any label has no example.
EventClassifier train_event_classifier(std::span<const LabeledDescriptor> examples, const TrainParams& params = {});

/// log p(e | descriptor); the additive constant of the classification energy is dropped.
double event_log_likelihood(const EventClassifier& classifier, std::span<const double> descriptor, EventLabel label);

struct EventEnergyParams {
  double lambda1 = 1.0;  // aggregation
  double lambda2 = 1.0;  // transition prior
  double lambda3 = 1.0;  // co-occurrence prior
  double lambda5 = 1.0;  // within-event similarity
  double lambda6 = 1.0;  // distinctness of consecutive events
  double lambda7 = 1.0;  // distinctness of co-occurring events
  double lambda8 = 1.0;  // classification
  bool operator==(const EventEnergyParams&) const = default;
};

/// lambda1 * N / T.
double aggregation_energy(int num_events, int trace_length, double lambda1);

/// lambda2 * mean(-log trans) over consecutive pairs + lambda3 * mean(-log occ)
/// over all unordered pairs. Empty pair sets contribute 0.
double event_prior_energy(std::span<const EventLabel> labels, const EventPriors& priors, double lambda2,
                          double lambda3);

/// What the composition energy needs from one event: its length, the sum of
/// successive-frame distances inside it, and the wavelet summary of its frames.
struct EventSpanTerms {
  int frames = 0;
  double step_sum = 0.0;
  std::vector<double> summary;
};

/// lambda5 / N * sum_j step_sum_j / T_j
///   - lambda6 * mean D(psi_i, psi_i+1) over consecutive events
///   - lambda7 * mean D(psi_i, psi_j) over all unordered pairs.
double composition_energy(std::span<const EventSpanTerms> events, double lambda5, double lambda6, double lambda7);

/// Same, computed from the frame stream and [start, end) spans.
double composition_energy(const FeatureMatrix& phi, std::span<const std::pair<int, int>> spans, double lambda5,
                          double lambda6, double lambda7, int coefficients = kDefaultSummaryCoefficients);

/// -lambda8 / N * sum_j log p(e_j | span_j).
double classification_energy(std::span<const double> log_probs, double lambda8);

}  // namespace fmp
