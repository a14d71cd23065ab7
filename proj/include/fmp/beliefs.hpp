#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fmp/attention.hpp"
#include "fmp/events.hpp"
#include "fmp/features.hpp"
#include "fmp/mind.hpp"
#include "fmp/softmax.hpp"
#include "fmp/world.hpp"

namespace fmp {

/// Rows of a transition table: the previous delta, with null split by
/// whether the object is tracked after it.
enum class PriorRow : std::uint8_t { Occur = 0, Disappear = 1, Update = 2, NullTracked = 3, NullUntracked = 4 };
inline constexpr int kNumPriorRows = 5;

PriorRow prior_row(BeliefDelta previous, bool tracked);
bool row_tracked(PriorRow row);

/// Whether the prior may put mass on `next` after `row`. Besides the state
/// machine, the common mind only changes inside joint attention.
bool prior_supported(MindId mind, EventLabel label, PriorRow row, BeliefDelta next);
bool marginal_supported(MindId mind, EventLabel label, BeliefDelta delta);

struct BeliefPriorTable {
  std::array<std::array<double, kNumDeltas>, kNumPriorRows> trans{};
  std::array<double, kNumDeltas> marginal{};
  std::array<std::array<double, kNumDeltas>, kNumPriorRows> trans_counts{};
  std::array<double, kNumDeltas> marginal_counts{};
};

struct BeliefPrior {
  std::array<std::array<BeliefPriorTable, kNumEventLabels>, kNumMinds> tables{};
  double alpha = 1.0;

  const BeliefPriorTable& at(MindId m, EventLabel e) const {
    return tables[static_cast<std::size_t>(index(m))][static_cast<std::size_t>(index(e))];
  }
};

/// One annotated trace: event spans partitioning it and the frame-level deltas.
struct BeliefCorpusItem {
  std::span<const EventSpan> events;
  const BeliefTable* deltas = nullptr;
};

/// Counts transitions between consecutive frames of the same event and
/// per-frame marginals, per (mind, event label), smoothed over the supported
/// cells only. Throws DataError on a transition the state machine forbids.
BeliefPrior fit_belief_prior(std::span<const BeliefCorpusItem> corpus, double alpha = 1.0);

/// Tracking status of every (mind, frame, object) before the frame's delta is
/// applied, replaying the table from an all-untracked start. Throws
/// StateMachineError on an illegal delta.
std::vector<std::uint8_t> replay_tracking(const BeliefTable& deltas);

/// Observation evidence per (mind, frame, object).
enum EvidenceBit : std::uint8_t {
  kAttended = 1,   // relevant attention edges point at the object
  kInView = 2,     // the mind's observation rule covers the object
  kChanged = 4,    // in view, away from where this mind last saw it
  kVacated = 8,    // last-seen location in view, object not there
};

class EvidenceTable {
 public:
  EvidenceTable() = default;
  EvidenceTable(int frames, int objects)
      : frames_(frames), objects_(objects), bits_(static_cast<std::size_t>(kNumMinds) * frames * objects, 0) {}
  std::uint8_t& at(MindId m, int t, int o) { return bits_[offset(m, t, o)]; }
  std::uint8_t at(MindId m, int t, int o) const { return bits_[offset(m, t, o)]; }
  int num_frames() const { return frames_; }
  int num_objects() const { return objects_; }

 private:
  std::size_t offset(MindId m, int t, int o) const {
    return (static_cast<std::size_t>(index(m)) * frames_ + static_cast<std::size_t>(t)) * objects_ +
           static_cast<std::size_t>(o);
  }
  int frames_ = 0;
  int objects_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Evidence for every mind under a given event sequence (the common mind's
/// view depends on the labels). `events` must partition the trace.
EvidenceTable compute_evidence(const WorldTrace& trace, std::span<const AttentionGraph> graphs,
                               std::span<const EventSpan> events, const AttentionParams& params = {});

/// Within-event history: last non-null delta (none, occur, disappear,
/// update) and whether an occur has happened. Encoded as last * 2 + occurred.
inline constexpr int kNumHistories = 8;
constexpr int history_code(int last, bool occurred) { return last * 2 + (occurred ? 1 : 0); }
constexpr int history_last(int code) { return code / 2; }
constexpr bool history_occurred(int code) { return (code & 1) != 0; }
/// History after appending `d`.
constexpr int history_push(int code, BeliefDelta d) {
  const int last = d == BeliefDelta::Null ? history_last(code) : index(d) + 1;
  return history_code(last, history_occurred(code) || d == BeliefDelta::Occur);
}
/// Tracking status implied by a history and the status at event start.
constexpr bool history_tracked(int code, bool tracked_at_start) {
  const int last = history_last(code);
  if (last == 0) return tracked_at_start;
  return last == index(BeliefDelta::Occur) + 1 || last == index(BeliefDelta::Update) + 1;
}

int likelihood_feature_dimension();
/// Likelihood input: event label one-hot, evidence bits, tracking flags,
/// last non-null one-hot, occurred flag, and three evidence-by-status products.
void likelihood_features(EventLabel label, std::uint8_t evidence, bool tracked_at_start, int history,
                         std::span<double> out);

/// One softmax over the four deltas per mind.
struct BeliefLikelihood {
  std::array<SoftmaxRegression, kNumMinds> minds;
};

std::array<double, kNumDeltas> belief_log_likelihood(const BeliefLikelihood& model, MindId mind, EventLabel label,
                                                      std::uint8_t evidence, bool tracked_at_start, int history);

struct BeliefTrainingItem {
  std::span<const EventSpan> events;
  const BeliefTable* deltas = nullptr;
  const EvidenceTable* evidence = nullptr;
};

/// Fits the per-mind likelihoods on ground-truth histories. Identical inputs
/// are folded into weighted rows, so training cost does not grow with corpus size.
BeliefLikelihood train_belief_likelihood(std::span<const BeliefTrainingItem> corpus, const TrainParams& params = {});

struct BeliefEnergyParams {
  double lambda4 = 1.0;  // prior weight
  double lambda9 = 1.0;  // likelihood weight
  bool marginal_first_frame_only = false;
  bool operator==(const BeliefEnergyParams&) const = default;
};

/// Inputs of one (mind, object) chain inside one event.
struct ChainProblem {
  const BeliefPriorTable* prior = nullptr;
  /// loglik[t][history][delta]
  std::vector<std::array<std::array<double, kNumDeltas>, kNumHistories>> loglik;
  bool tracked_at_start = false;
};

/// Score of one delta sequence; -inf when it is illegal or has zero prior.
double chain_score(const ChainProblem& chain, std::span<const BeliefDelta> deltas, const BeliefEnergyParams& params);

struct ChainResult {
  std::vector<BeliefDelta> deltas;
  double score = 0.0;
};

/// Exact MAP over the chain; among equal scores the lexicographically
/// smallest delta sequence wins.
ChainResult viterbi_chain(const ChainProblem& chain, const BeliefEnergyParams& params);

/// Per-frame posterior marginals of the delta under the same potentials.
std::vector<std::array<double, kNumDeltas>> chain_marginals(const ChainProblem& chain, const BeliefEnergyParams& params);

/// Prior and likelihood log terms of a sequence, for the energy breakdown.
struct ChainTerms {
  double log_prior = 0.0;
  double log_likelihood = 0.0;
};
ChainTerms chain_terms(const ChainProblem& chain, std::span<const BeliefDelta> deltas, const BeliefEnergyParams& params);

struct BeliefModel {
  BeliefPrior prior;
  BeliefLikelihood likelihood;
};

struct BeliefInference {
  BeliefTable deltas;
  /// posterior[((mind * T) + t) * N + o][delta]
  std::vector<std::array<float, kNumDeltas>> posterior;
  /// Per event: summed log prior and log likelihood over all chains.
  std::vector<ChainTerms> event_terms;

  std::array<float, kNumDeltas> at(MindId m, int t, int o) const {
    return posterior[(static_cast<std::size_t>(index(m)) * deltas.num_frames() + static_cast<std::size_t>(t)) *
                         deltas.num_objects() + static_cast<std::size_t>(o)];
  }
};

using LogLikTable = std::vector<std::array<std::array<double, kNumDeltas>, kNumHistories>>;

/// Likelihood tables of every chain of every event, for both possible
/// tracking states at event start. They do not depend on the energy weights,
/// so one preparation serves a whole weight grid.
struct PreparedChains {
  std::vector<EventSpan> events;
  int frames = 0;
  int objects = 0;
  /// tables[(event * kNumMinds + mind) * objects + object][tracked_at_start]
  std::vector<std::array<LogLikTable, 2>> tables;
};

PreparedChains prepare_chains(std::span<const EventSpan> events, const EvidenceTable& evidence,
                              const BeliefLikelihood& likelihood);

BeliefInference infer_belief_dynamics(const PreparedChains& chains, const BeliefPrior& prior,
                                      const BeliefEnergyParams& params, bool with_posterior = true);

/// Runs every (mind, object) chain event by event, carrying each chain's
/// tracking status across event boundaries.
BeliefInference infer_belief_dynamics(std::span<const EventSpan> events, const EvidenceTable& evidence,
                                      const BeliefModel& model, const BeliefEnergyParams& params,
                                      bool with_posterior = true);

}  // namespace fmp
