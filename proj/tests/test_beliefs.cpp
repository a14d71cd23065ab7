#include <doctest.h>

#include <cmath>
#include <limits>

#include "fmp/beliefs.hpp"
#include "fmp/error.hpp"
#include "fmp/sim.hpp"
#include "helpers.hpp"

using namespace fmp;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t at(BeliefDelta d) { return static_cast<std::size_t>(index(d)); }
using test::decode;
using test::random_chain;
using test::random_table;
using test::reference_score;

std::size_t row(PriorRow r) { return static_cast<std::size_t>(r); }

std::vector<EventSpan> spans_of(const std::vector<ScriptedEvent>& events) {
  std::vector<EventSpan> out;
  for (const ScriptedEvent& e : events) out.push_back({e.label, e.start, e.end});
  return out;
}

struct SimCorpus {
  std::vector<Simulation> sims;
  std::vector<std::vector<EventSpan>> spans;
  std::vector<TraceFeatures> features;
  std::vector<EvidenceTable> evidence;
};

SimCorpus make_corpus(int count, std::uint64_t seed) {
  SimCorpus c;
  for (int i = 0; i < count; ++i) {
    c.sims.push_back(simulate(random_scenario(derive_seed(seed, static_cast<std::uint64_t>(i)), {})));
    c.spans.push_back(spans_of(c.sims.back().truth.events));
    c.features.push_back(extract_trace_features(c.sims.back().trace));
    c.evidence.push_back(compute_evidence(c.sims.back().trace, c.features.back().graphs, c.spans.back()));
  }
  return c;
}

}  // namespace

TEST_CASE("prior hard zeros") {
  const SimCorpus c = make_corpus(6, 1);
  std::vector<BeliefCorpusItem> items;
  for (std::size_t i = 0; i < c.sims.size(); ++i) items.push_back({c.spans[i], &c.sims[i].truth.deltas});
  const BeliefPrior prior = fit_belief_prior(items);
  for (MindId m : kMinds) {
    for (EventLabel e : kEventLabels) {
      const BeliefPriorTable& t = prior.at(m, e);
      CHECK(t.trans[row(PriorRow::Occur)][at(BeliefDelta::Occur)] == 0.0);
      CHECK(t.trans[row(PriorRow::Update)][at(BeliefDelta::Occur)] == 0.0);
      CHECK(t.trans[row(PriorRow::NullUntracked)][at(BeliefDelta::Update)] == 0.0);
      CHECK(t.trans[row(PriorRow::NullUntracked)][at(BeliefDelta::Disappear)] == 0.0);
      CHECK(t.trans[row(PriorRow::Disappear)][at(BeliefDelta::Update)] == 0.0);
      for (const auto& row : t.trans) {
        double s = 0.0;
        for (double v : row) s += v;
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
      if (m == MindId::MC && e != EventLabel::JointAttention) {
        CHECK(t.marginal[at(BeliefDelta::Null)] == 1.0);
      }
    }
  }
}

TEST_CASE("prior matches an independent counting oracle") {
  const SimCorpus c = make_corpus(8, 2);
  std::vector<BeliefCorpusItem> items;
  for (std::size_t i = 0; i < c.sims.size(); ++i) items.push_back({c.spans[i], &c.sims[i].truth.deltas});
  const double alpha = 0.5;
  const BeliefPrior prior = fit_belief_prior(items, alpha);

  double trans[kNumMinds][3][5][4] = {};
  double marg[kNumMinds][3][4] = {};
  for (std::size_t i = 0; i < c.sims.size(); ++i) {
    const BeliefTable& d = c.sims[i].truth.deltas;
    for (MindId m : kMinds) {
      for (int o = 0; o < d.num_objects(); ++o) {
        bool tracked = false;
        std::vector<bool> before(static_cast<std::size_t>(d.num_frames()) + 1);
        for (int t = 0; t < d.num_frames(); ++t) {
          before[static_cast<std::size_t>(t)] = tracked;
          const BeliefDelta x = d.at(m, t, o);
          if (x == BeliefDelta::Occur || x == BeliefDelta::Update) tracked = true;
          if (x == BeliefDelta::Disappear) tracked = false;
        }
        for (const EventSpan& ev : c.spans[i]) {
          for (int t = ev.start; t < ev.end; ++t) {
            const BeliefDelta x = d.at(m, t, o);
            marg[index(m)][index(ev.label)][index(x)] += 1;
            if (t + 1 < ev.end) {
              int row = index(x);
              if (x == BeliefDelta::Null) row = before[static_cast<std::size_t>(t + 1)] ? 3 : 4;
              trans[index(m)][index(ev.label)][row][index(d.at(m, t + 1, o))] += 1;
            }
          }
        }
      }
    }
  }
  for (MindId m : kMinds) {
    for (EventLabel e : kEventLabels) {
      const BeliefPriorTable& t = prior.at(m, e);
      for (int r = 0; r < 5; ++r) {
        double total = 0.0;
        for (BeliefDelta d : kDeltas) {
          if (prior_supported(m, e, static_cast<PriorRow>(r), d)) total += trans[index(m)][index(e)][r][index(d)] + alpha;
        }
        for (BeliefDelta d : kDeltas) {
          const double want = prior_supported(m, e, static_cast<PriorRow>(r), d)
                                  ? (trans[index(m)][index(e)][r][index(d)] + alpha) / total
                                  : 0.0;
          CHECK(std::abs(t.trans[static_cast<std::size_t>(r)][at(d)] - want) < 1e-12);
        }
      }
      double total = 0.0;
      for (BeliefDelta d : kDeltas) {
        if (marginal_supported(m, e, d)) total += marg[index(m)][index(e)][index(d)] + alpha;
      }
      for (BeliefDelta d : kDeltas) {
        const double want = marginal_supported(m, e, d) ? (marg[index(m)][index(e)][index(d)] + alpha) / total : 0.0;
        CHECK(std::abs(t.marginal[at(d)] - want) < 1e-12);
      }
    }
  }
}

TEST_CASE("illegal corpus transitions are rejected") {
  BeliefTable d(4, 1);
  d.at(MindId::M1, 1, 0) = BeliefDelta::Occur;
  d.at(MindId::M1, 2, 0) = BeliefDelta::Occur;
  const std::vector<EventSpan> events{{EventLabel::NoCommunication, 0, 4}};
  const std::vector<BeliefCorpusItem> items{{events, &d}};
  CHECK_THROWS_AS(fit_belief_prior(items), DataError);
  CHECK_THROWS_AS(replay_tracking(d), StateMachineError);

  BeliefTable common(4, 1);
  common.at(MindId::MC, 1, 0) = BeliefDelta::Occur;
  const std::vector<BeliefCorpusItem> bad_mc{{events, &common}};
  CHECK_THROWS_AS(fit_belief_prior(bad_mc), DataError);
}

TEST_CASE("history encoding") {
  int h = 0;
  CHECK_FALSE(history_tracked(h, false));
  CHECK(history_tracked(h, true));
  h = history_push(h, BeliefDelta::Occur);
  CHECK(history_occurred(h));
  CHECK(history_tracked(h, false));
  h = history_push(h, BeliefDelta::Null);
  CHECK(history_last(h) == index(BeliefDelta::Occur) + 1);
  h = history_push(h, BeliefDelta::Disappear);
  CHECK(history_occurred(h));
  CHECK_FALSE(history_tracked(h, true));
}

TEST_CASE("belief log likelihood") {
  SUBCASE("zero weights give log(1/4)") {
    BeliefLikelihood model;
    const int d = likelihood_feature_dimension();
    for (SoftmaxRegression& m : model.minds) {
      m = SoftmaxRegression(kNumDeltas, d);
      m.mean.assign(static_cast<std::size_t>(d), 0.0);
      m.scale.assign(static_cast<std::size_t>(d), 1.0);
    }
    for (MindId m : kMinds) {
      const auto lp = belief_log_likelihood(model, m, EventLabel::JointAttention, kAttended | kInView, true, 3);
      for (double v : lp) CHECK(v == doctest::Approx(std::log(0.25)));
    }
  }
  SUBCASE("trained model is normalized") {
    const SimCorpus c = make_corpus(4, 3);
    std::vector<BeliefTrainingItem> items;
    for (std::size_t i = 0; i < c.sims.size(); ++i) items.push_back({c.spans[i], &c.sims[i].truth.deltas, &c.evidence[i]});
    const BeliefLikelihood model = train_belief_likelihood(items);
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      const auto m = static_cast<MindId>(rng.uniform_int(0, 4));
      const auto e = static_cast<EventLabel>(rng.uniform_int(0, 2));
      const auto lp = belief_log_likelihood(model, m, e, static_cast<std::uint8_t>(rng.uniform_int(0, 15)),
                                            rng.bernoulli(0.5), rng.uniform_int(0, kNumHistories - 1));
      double s = 0.0;
      for (double v : lp) s += std::exp(v);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    // Seeing the object makes an occur more likely for the agents' own minds.
    for (MindId m : {MindId::M1, MindId::M2}) {
      for (EventLabel e : kEventLabels) {
        const auto unseen = belief_log_likelihood(model, m, e, 0, false, 0);
        const auto seen = belief_log_likelihood(model, m, e, kInView | kAttended, false, 0);
        CHECK(seen[at(BeliefDelta::Occur)] > unseen[at(BeliefDelta::Occur)]);
      }
    }
  }
}

TEST_CASE("Viterbi equals exhaustive enumeration on short chains") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mind = static_cast<MindId>(rng.uniform_int(0, 4));
    const auto label = static_cast<EventLabel>(rng.uniform_int(0, 2));
    const BeliefPriorTable table = random_table(rng, mind, label);
    const int length = rng.uniform_int(1, 8);
    const ChainProblem chain = random_chain(rng, &table, length);
    BeliefEnergyParams p;
    p.lambda4 = test::random_lambda(rng);
    p.lambda9 = test::random_lambda(rng);
    p.marginal_first_frame_only = trial % 3 == 0;

    double best = kNegInf;
    std::vector<BeliefDelta> best_seq;
    int score_mismatches = 0;
    long total = 1;
    for (int i = 0; i < length; ++i) total *= 4;
    for (long code = 0; code < total; ++code) {
      const auto seq = decode(code, length);
      const double s = reference_score(chain, seq, p);
      const double got = chain_score(chain, seq, p);
      if (!(got == s || std::abs(got - s) <= 1e-12 * (1.0 + std::abs(s)))) ++score_mismatches;
      best = std::max(best, s);
    }
    // Lexicographically smallest sequence within rounding of the maximum.
    const double tol = 1e-10 * (1.0 + std::abs(best));
    for (long code = 0; code < total; ++code) {
      const auto seq = decode(code, length);
      if (reference_score(chain, seq, p) >= best - tol) {
        best_seq = seq;
        break;
      }
    }
    const ChainResult r = viterbi_chain(chain, p);
    INFO("trial " << trial);
    CHECK(score_mismatches == 0);
    CHECK(r.score == doctest::Approx(best).epsilon(1e-12));
    if (p.lambda4 != 0.0 || p.lambda9 != 0.0) {
      CHECK(r.deltas == best_seq);
    }
  }
}

TEST_CASE("posterior marginals match brute force and normalize") {
  Rng rng(62);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mind = static_cast<MindId>(rng.uniform_int(0, 4));
    const auto label = static_cast<EventLabel>(rng.uniform_int(0, 2));
    const BeliefPriorTable table = random_table(rng, mind, label);
    const int length = rng.uniform_int(1, 6);
    const ChainProblem chain = random_chain(rng, &table, length);
    const BeliefEnergyParams p{1.0, 1.0, false};
    std::vector<std::array<double, 4>> want(static_cast<std::size_t>(length), std::array<double, 4>{});
    double z = 0.0;
    long total = 1;
    for (int i = 0; i < length; ++i) total *= 4;
    for (long code = 0; code < total; ++code) {
      const auto seq = decode(code, length);
      const double w = std::exp(reference_score(chain, seq, p));
      z += w;
      for (int t = 0; t < length; ++t) want[static_cast<std::size_t>(t)][at(seq[static_cast<std::size_t>(t)])] += w;
    }
    const auto got = chain_marginals(chain, p);
    REQUIRE(got.size() == want.size());
    for (std::size_t t = 0; t < got.size(); ++t) {
      double s = 0.0;
      for (std::size_t d = 0; d < 4; ++d) {
        CHECK(std::abs(got[t][d] - want[t][d] / z) < 1e-9);
        s += got[t][d];
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("null-dominant prior without evidence gives an all-null chain") {
  BeliefPriorTable t;
  for (auto& row : t.trans) row = {0.01, 0.01, 0.01, 0.97};
  t.trans[row(PriorRow::Occur)][at(BeliefDelta::Occur)] = 0.0;
  t.trans[row(PriorRow::Update)][at(BeliefDelta::Occur)] = 0.0;
  t.trans[row(PriorRow::NullUntracked)] = {0.03, 0.0, 0.0, 0.97};
  t.trans[row(PriorRow::Disappear)] = {0.03, 0.0, 0.0, 0.97};
  t.marginal = {0.01, 0.01, 0.01, 0.97};
  ChainProblem c;
  c.prior = &t;
  c.loglik.assign(20, {});
  for (auto& frame : c.loglik) {
    for (auto& h : frame) h = {std::log(0.1), std::log(0.1), std::log(0.1), std::log(0.7)};
  }
  for (bool tracked : {false, true}) {
    c.tracked_at_start = tracked;
    const ChainResult r = viterbi_chain(c, {});
    CHECK(r.deltas == std::vector<BeliefDelta>(20, BeliefDelta::Null));
  }
}

TEST_CASE("inference on simulated traces is legal and keeps the common mind null outside joint attention") {
  const SimCorpus train = make_corpus(12, 7);
  std::vector<BeliefCorpusItem> prior_items;
  std::vector<BeliefTrainingItem> lik_items;
  for (std::size_t i = 0; i < train.sims.size(); ++i) {
    prior_items.push_back({train.spans[i], &train.sims[i].truth.deltas});
    lik_items.push_back({train.spans[i], &train.sims[i].truth.deltas, &train.evidence[i]});
  }
  const BeliefModel model{fit_belief_prior(prior_items), train_belief_likelihood(lik_items)};
  const SimCorpus test = make_corpus(4, 8);
  for (std::size_t i = 0; i < test.sims.size(); ++i) {
    const BeliefInference inf = infer_belief_dynamics(test.spans[i], test.evidence[i], model, {});
    CHECK_NOTHROW(replay_tracking(inf.deltas));
    for (const EventSpan& ev : test.spans[i]) {
      if (ev.label == EventLabel::JointAttention) continue;
      for (int t = ev.start; t < ev.end; ++t) {
        for (int o = 0; o < inf.deltas.num_objects(); ++o) CHECK(inf.deltas.at(MindId::MC, t, o) == BeliefDelta::Null);
      }
    }
    for (std::size_t k = 0; k < inf.posterior.size(); ++k) {
      double s = 0.0;
      for (float v : inf.posterior[k]) s += v;
      CHECK(std::abs(s - 1.0) < 1e-5);
    }
    // Deterministic.
    const BeliefInference again = infer_belief_dynamics(test.spans[i], test.evidence[i], model, {});
    CHECK(again.deltas == inf.deltas);
  }
}
