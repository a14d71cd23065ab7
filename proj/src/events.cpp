#include "fmp/events.hpp"

#include <cmath>

#include "fmp/error.hpp"

namespace fmp {

EventPriors fit_priors(std::span<const std::vector<EventLabel>> sequences, double alpha) {
  EventPriors p;
  p.alpha = alpha;
  bool any = false;
  for (const auto& seq : sequences) {
    any = any || !seq.empty();
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      p.trans_counts[static_cast<std::size_t>(index(seq[i]))][static_cast<std::size_t>(index(seq[i + 1]))] += 1.0;
    }
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t j = i + 1; j < seq.size(); ++j) {
        const auto a = static_cast<std::size_t>(std::min(index(seq[i]), index(seq[j])));
        const auto b = static_cast<std::size_t>(std::max(index(seq[i]), index(seq[j])));
        p.occ_counts[a][b] += 1.0;
      }
    }
  }
  if (!any) throw DataError("cannot fit event priors on an empty corpus");

  for (std::size_t a = 0; a < 3; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < 3; ++b) row += p.trans_counts[a][b] + alpha;
    for (std::size_t b = 0; b < 3; ++b) p.trans[a][b] = (p.trans_counts[a][b] + alpha) / row;
  }
  double total = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a; b < 3; ++b) total += p.occ_counts[a][b] + alpha;
  }
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a; b < 3; ++b) {
      p.occ[a][b] = p.occ[b][a] = (p.occ_counts[a][b] + alpha) / total;
    }
  }
  return p;
}

EventClassifier train_event_classifier(std::span<const LabeledDescriptor> examples, const TrainParams& params) {
  std::array<bool, kNumEventLabels> seen{};
  Dataset data;
  data.dim = descriptor_dimension();
  for (const LabeledDescriptor& e : examples) {
    seen[static_cast<std::size_t>(index(e.label))] = true;
    data.add(e.descriptor, index(e.label), e.weight);
  }
  for (EventLabel l : kEventLabels) {
    if (!seen[static_cast<std::size_t>(index(l))]) {
      throw DataError("no training example for event label " + std::string(to_string(l)));
    }
  }
  return {SoftmaxRegression::train(data, kNumEventLabels, params)};
}

double event_log_likelihood(const EventClassifier& classifier, std::span<const double> descriptor, EventLabel label) {
  return classifier.model.log_probs(descriptor)[static_cast<std::size_t>(index(label))];
}

double aggregation_energy(int num_events, int trace_length, double lambda1) {
  return lambda1 * static_cast<double>(num_events) / static_cast<double>(trace_length);
}

double event_prior_energy(std::span<const EventLabel> labels, const EventPriors& priors, double lambda2,
                          double lambda3) {
  const std::size_t n = labels.size();
  if (n < 2) return 0.0;
  double trans = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    trans -= std::log(priors.trans[static_cast<std::size_t>(index(labels[i]))][static_cast<std::size_t>(index(labels[i + 1]))]);
  }
  double occ = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      occ -= std::log(priors.occ[static_cast<std::size_t>(index(labels[i]))][static_cast<std::size_t>(index(labels[j]))]);
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return lambda2 * trans / static_cast<double>(n - 1) + lambda3 * occ / pairs;
}

double composition_energy(std::span<const EventSpanTerms> events, double lambda5, double lambda6, double lambda7) {
  const std::size_t n = events.size();
  if (n == 0) return 0.0;
  double within = 0.0;
  for (const EventSpanTerms& e : events) within += e.step_sum / static_cast<double>(e.frames);
  double energy = lambda5 * within / static_cast<double>(n);
  if (n < 2) return energy;
  double consecutive = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) consecutive += feature_distance(events[i].summary, events[i + 1].summary);
  double all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all += feature_distance(events[i].summary, events[j].summary);
  }
  energy -= lambda6 * consecutive / static_cast<double>(n - 1);
  energy -= lambda7 * all / static_cast<double>(n * (n - 1) / 2);
  return energy;
}

double composition_energy(const FeatureMatrix& phi, std::span<const std::pair<int, int>> spans, double lambda5,
                          double lambda6, double lambda7, int coefficients) {
  std::vector<EventSpanTerms> terms;
  for (const auto& [b, e] : spans) {
    EventSpanTerms t;
    t.frames = e - b;
    for (int f = b; f + 1 < e; ++f) t.step_sum += feature_distance(phi.row(f), phi.row(f + 1));
    t.summary = wavelet_summary(phi, b, e, coefficients);
    terms.push_back(std::move(t));
  }
  return composition_energy(terms, lambda5, lambda6, lambda7);
}

double classification_energy(std::span<const double> log_probs, double lambda8) {
  if (log_probs.empty()) return 0.0;
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return -lambda8 * s / static_cast<double>(log_probs.size());
}

}  // namespace fmp
