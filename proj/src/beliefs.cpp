#include "fmp/beliefs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "fmp/error.hpp"
#include "fmp/observation.hpp"

namespace fmp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t u(int i) { return static_cast<std::size_t>(i); }

}  // namespace

PriorRow prior_row(BeliefDelta previous, bool tracked) {
  switch (previous) {
    case BeliefDelta::Occur: return PriorRow::Occur;
    case BeliefDelta::Disappear: return PriorRow::Disappear;
    case BeliefDelta::Update: return PriorRow::Update;
    case BeliefDelta::Null: return tracked ? PriorRow::NullTracked : PriorRow::NullUntracked;
  }
  return PriorRow::NullUntracked;
}

bool row_tracked(PriorRow row) { return row != PriorRow::Disappear && row != PriorRow::NullUntracked; }

bool marginal_supported(MindId mind, EventLabel label, BeliefDelta delta) {
  if (mind == MindId::MC && label != EventLabel::JointAttention) return delta == BeliefDelta::Null;
  return true;
}

bool prior_supported(MindId mind, EventLabel label, PriorRow row, BeliefDelta next) {
  return delta_legal(row_tracked(row), next) && marginal_supported(mind, label, next);
}

std::vector<std::uint8_t> replay_tracking(const BeliefTable& deltas) {
  const int T = deltas.num_frames();
  const int N = deltas.num_objects();
  std::vector<std::uint8_t> tracked(static_cast<std::size_t>(kNumMinds) * T * N, 0);
  for (MindId m : kMinds) {
    for (int o = 0; o < N; ++o) {
      bool tr = false;
      for (int t = 0; t < T; ++t) {
        tracked[(u(index(m)) * u(T) + u(t)) * u(N) + u(o)] = tr ? 1 : 0;
        const BeliefDelta d = deltas.at(m, t, o);
        if (!delta_legal(tr, d)) {
          throw StateMachineError("illegal delta " + std::string(to_string(d)) + " for mind " +
                                  std::string(to_string(m)) + ", frame " + std::to_string(t) + ", object " +
                                  std::to_string(o));
        }
        tr = tracked_after(tr, d);
      }
    }
  }
  return tracked;
}

BeliefPrior fit_belief_prior(std::span<const BeliefCorpusItem> corpus, double alpha) {
  BeliefPrior prior;
  prior.alpha = alpha;
  for (const BeliefCorpusItem& item : corpus) {
    const BeliefTable& d = *item.deltas;
    const int T = d.num_frames();
    const int N = d.num_objects();
    std::vector<std::uint8_t> tracked;
    try {
      tracked = replay_tracking(d);
    } catch (const StateMachineError& e) {
      throw DataError(std::string("belief corpus contains an illegal transition: ") + e.what());
    }
    for (const EventSpan& ev : item.events) {
      for (MindId m : kMinds) {
        BeliefPriorTable& tab = prior.tables[u(index(m))][u(index(ev.label))];
        for (int o = 0; o < N; ++o) {
          for (int t = ev.start; t < ev.end; ++t) {
            const BeliefDelta cur = d.at(m, t, o);
            if (!marginal_supported(m, ev.label, cur)) {
              throw DataError("belief corpus has a common-mind change outside joint attention at frame " +
                              std::to_string(t));
            }
            tab.marginal_counts[u(index(cur))] += 1.0;
            if (t + 1 < ev.end) {
              const bool tr_after = tracked[(u(index(m)) * u(T) + u(t + 1)) * u(N) + u(o)] != 0;
              const PriorRow row = prior_row(cur, tr_after);
              tab.trans_counts[u(static_cast<int>(row))][u(index(d.at(m, t + 1, o)))] += 1.0;
            }
          }
        }
      }
    }
  }
  for (MindId m : kMinds) {
    for (EventLabel e : kEventLabels) {
      BeliefPriorTable& tab = prior.tables[u(index(m))][u(index(e))];
      for (int r = 0; r < kNumPriorRows; ++r) {
        double total = 0.0;
        for (BeliefDelta next : kDeltas) {
          if (prior_supported(m, e, static_cast<PriorRow>(r), next)) total += tab.trans_counts[u(r)][u(index(next))] + alpha;
        }
        for (BeliefDelta next : kDeltas) {
          tab.trans[u(r)][u(index(next))] = prior_supported(m, e, static_cast<PriorRow>(r), next)
                                                ? (tab.trans_counts[u(r)][u(index(next))] + alpha) / total
                                                : 0.0;
        }
      }
      double total = 0.0;
      for (BeliefDelta d : kDeltas) {
        if (marginal_supported(m, e, d)) total += tab.marginal_counts[u(index(d))] + alpha;
      }
      for (BeliefDelta d : kDeltas) {
        tab.marginal[u(index(d))] = marginal_supported(m, e, d) ? (tab.marginal_counts[u(index(d))] + alpha) / total : 0.0;
      }
    }
  }
  return prior;
}

EvidenceTable compute_evidence(const WorldTrace& trace, std::span<const AttentionGraph> graphs,
                               std::span<const EventSpan> events, const AttentionParams& params) {
  const int T = trace.length();
  const int N = trace.object_count;
  EvidenceTable ev(T, N);
  std::array<std::vector<std::optional<Vec3>>, kNumMinds> memory;
  for (auto& m : memory) m.assign(u(N), std::nullopt);
  std::size_t j = 0;
  EventContext ctx;
  for (int t = 0; t < T; ++t) {
    while (j < events.size() && events[j].end <= t) ++j;
    if (j == events.size()) throw DataError("events do not cover frame " + std::to_string(t));
    if (events[j].start == t) ctx = EventContext{events[j].label, false};
    const WorldFrame& frame = trace.frames[u(t)];
    const AttentionGraph& g = graphs[u(t)];
    const FrameAttention att = FrameAttention::from_targets(g.gaze_target(0), g.gaze_target(1));
    ctx.mutual_seen = ctx.mutual_seen || att.mutual_gaze;
    const auto edge = [&](int a, int target) {
      return g.has_edge(a, target, Channel::Gaze) || g.has_edge(a, target, Channel::Pointing);
    };
    for (int o = 0; o < N; ++o) {
      const int ent = object_entity(o);
      const bool e0 = edge(0, ent);
      const bool e1 = edge(1, ent);
      const std::array<bool, kNumMinds> attended = {e0, e1, g.has_edge(0, 1, Channel::Gaze) && e1,
                                                    g.has_edge(1, 0, Channel::Gaze) && e0,
                                                    ctx.label == EventLabel::JointAttention && ctx.mutual_seen && e0 && e1};
      const Vec3 p = frame.objects[u(o)].position;
      for (MindId m : kMinds) {
        std::uint8_t bits = attended[u(index(m))] ? kAttended : 0;
        const bool seen = mind_sees(m, frame, att, ctx, trace.occluders, params, p);
        std::optional<Vec3>& mem = memory[u(index(m))][u(o)];
        if (seen) {
          bits |= kInView;
          if (mem && distance(p, *mem) > kLocationTolerance) bits |= kChanged;
          mem = p;
        } else if (mem && distance(p, *mem) > kLocationTolerance &&
                   mind_sees(m, frame, att, ctx, trace.occluders, params, *mem)) {
          bits |= kVacated;
        }
        ev.at(m, t, o) = bits;
      }
    }
  }
  return ev;
}

int likelihood_feature_dimension() { return 17; }

void likelihood_features(EventLabel label, std::uint8_t evidence, bool tracked_at_start, int history,
                         std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  out[u(index(label))] = 1.0;
  const bool attended = (evidence & kAttended) != 0;
  const bool in_view = (evidence & kInView) != 0;
  const bool changed = (evidence & kChanged) != 0;
  const bool vacated = (evidence & kVacated) != 0;
  const bool tracked = history_tracked(history, tracked_at_start);
  out[3] = attended ? 1.0 : 0.0;
  out[4] = in_view ? 1.0 : 0.0;
  out[5] = changed ? 1.0 : 0.0;
  out[6] = vacated ? 1.0 : 0.0;
  out[7] = tracked_at_start ? 1.0 : 0.0;
  out[8] = tracked ? 1.0 : 0.0;
  out[u(9 + history_last(history))] = 1.0;
  out[13] = history_occurred(history) ? 1.0 : 0.0;
  out[14] = in_view && !tracked ? 1.0 : 0.0;
  out[15] = changed && tracked ? 1.0 : 0.0;
  out[16] = vacated && tracked ? 1.0 : 0.0;
}

std::array<double, kNumDeltas> belief_log_likelihood(const BeliefLikelihood& model, MindId mind, EventLabel label,
                                                      std::uint8_t evidence, bool tracked_at_start, int history) {
  std::array<double, 17> x{};
  likelihood_features(label, evidence, tracked_at_start, history, x);
  std::array<double, kNumDeltas> out{};
  model.minds[u(index(mind))].log_probs(x, out);
  return out;
}

BeliefLikelihood train_belief_likelihood(std::span<const BeliefTrainingItem> corpus, const TrainParams& params) {
  // key: label, evidence, tracked_at_start, history, delta
  std::array<std::map<std::array<int, 5>, double>, kNumMinds> counts;
  for (const BeliefTrainingItem& item : corpus) {
    const BeliefTable& d = *item.deltas;
    const int T = d.num_frames();
    const int N = d.num_objects();
    const std::vector<std::uint8_t> tracked = replay_tracking(d);
    for (const EventSpan& ev : item.events) {
      for (MindId m : kMinds) {
        for (int o = 0; o < N; ++o) {
          const bool tas = tracked[(u(index(m)) * u(T) + u(ev.start)) * u(N) + u(o)] != 0;
          int h = 0;
          for (int t = ev.start; t < ev.end; ++t) {
            const BeliefDelta delta = d.at(m, t, o);
            counts[u(index(m))][{index(ev.label), item.evidence->at(m, t, o), tas ? 1 : 0, h, index(delta)}] += 1.0;
            h = history_push(h, delta);
          }
        }
      }
    }
  }
  BeliefLikelihood model;
  const int D = likelihood_feature_dimension();
  for (MindId m : kMinds) {
    Dataset data;
    data.dim = D;
    std::vector<double> x(u(D));
    for (const auto& [k, w] : counts[u(index(m))]) {
      likelihood_features(static_cast<EventLabel>(k[0]), static_cast<std::uint8_t>(k[1]), k[2] != 0, k[3], x);
      data.add(x, k[4], w);
    }
    if (data.size() == 0) {
      model.minds[u(index(m))] = SoftmaxRegression(kNumDeltas, D);
    } else {
      model.minds[u(index(m))] = SoftmaxRegression::train(data, kNumDeltas, params);
    }
  }
  return model;
}

namespace {

/// Lattice state after a frame: the frame's delta and the history including it.
constexpr int kStates = kNumDeltas * kNumHistories;
constexpr int state_code(BeliefDelta d, int h) { return index(d) * kNumHistories + h; }
constexpr BeliefDelta state_delta(int s) { return static_cast<BeliefDelta>(s / kNumHistories); }
constexpr int state_history(int s) { return s % kNumHistories; }

double initial_score(const ChainProblem& c, BeliefDelta d, const BeliefEnergyParams& p) {
  if (!delta_legal(c.tracked_at_start, d)) return kNegInf;
  const double mp = c.prior->marginal[u(index(d))];
  if (mp <= 0.0) return kNegInf;
  return p.lambda9 * c.loglik[0][0][u(index(d))] + p.lambda4 * std::log(mp);
}

double step_score(const ChainProblem& c, int t, int s, BeliefDelta d, const BeliefEnergyParams& p) {
  const int h = state_history(s);
  const bool tracked = history_tracked(h, c.tracked_at_start);
  if (!delta_legal(tracked, d)) return kNegInf;
  const double tp = c.prior->trans[u(static_cast<int>(prior_row(state_delta(s), tracked)))][u(index(d))];
  if (tp <= 0.0) return kNegInf;
  double v = p.lambda9 * c.loglik[u(t)][u(h)][u(index(d))] + p.lambda4 * std::log(tp);
  if (!p.marginal_first_frame_only) {
    const double mp = c.prior->marginal[u(index(d))];
    if (mp <= 0.0) return kNegInf;
    v += p.lambda4 * std::log(mp);
  }
  return v;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double chain_score(const ChainProblem& chain, std::span<const BeliefDelta> deltas, const BeliefEnergyParams& params) {
  if (deltas.empty()) return 0.0;
  double score = initial_score(chain, deltas[0], params);
  int s = state_code(deltas[0], history_push(0, deltas[0]));
  for (std::size_t t = 1; t < deltas.size() && score != kNegInf; ++t) {
    score += step_score(chain, static_cast<int>(t), s, deltas[t], params);
    s = state_code(deltas[t], history_push(state_history(s), deltas[t]));
  }
  return score;
}

ChainTerms chain_terms(const ChainProblem& chain, std::span<const BeliefDelta> deltas, const BeliefEnergyParams& params) {
  ChainTerms out;
  int h = 0;
  for (std::size_t t = 0; t < deltas.size(); ++t) {
    const BeliefDelta d = deltas[t];
    out.log_likelihood += chain.loglik[t][u(h)][u(index(d))];
    if (t == 0 || !params.marginal_first_frame_only) out.log_prior += std::log(chain.prior->marginal[u(index(d))]);
    if (t > 0) {
      const BeliefDelta prev = deltas[t - 1];
      const bool tracked = history_tracked(h, chain.tracked_at_start);
      out.log_prior += std::log(chain.prior->trans[u(static_cast<int>(prior_row(prev, tracked)))][u(index(d))]);
    }
    h = history_push(h, d);
  }
  return out;
}

ChainResult viterbi_chain(const ChainProblem& chain, const BeliefEnergyParams& params) {
  const int T = static_cast<int>(chain.loglik.size());
  ChainResult out;
  if (T == 0) return out;
  // value[t][s]: best score of frames t+1..T-1 given state s after frame t
  std::vector<std::array<double, kStates>> value(u(T));
  value[u(T - 1)].fill(0.0);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < kStates; ++s) {
      double best = kNegInf;
      for (BeliefDelta d : kDeltas) {
        const double step = step_score(chain, t + 1, s, d, params);
        if (step == kNegInf) continue;
        const double v = step + value[u(t + 1)][u(state_code(d, history_push(state_history(s), d)))];
        best = std::max(best, v);
      }
      value[u(t)][u(s)] = best;
    }
  }
  const auto pick = [&](auto&& score_of) {
    std::array<double, kNumDeltas> cand{};
    double best = kNegInf;
    for (BeliefDelta d : kDeltas) {
      cand[u(index(d))] = score_of(d);
      best = std::max(best, cand[u(index(d))]);
    }
    const double tol = 1e-10 * (1.0 + std::abs(best));
    for (BeliefDelta d : kDeltas) {
      if (cand[u(index(d))] != kNegInf && cand[u(index(d))] >= best - tol) return d;
    }
    return BeliefDelta::Null;
  };
  int s = 0;
  for (int t = 0; t < T; ++t) {
    const BeliefDelta d = pick([&](BeliefDelta d) {
      const double step = t == 0 ? initial_score(chain, d, params) : step_score(chain, t, s, d, params);
      if (step == kNegInf) return kNegInf;
      const int h = t == 0 ? history_push(0, d) : history_push(state_history(s), d);
      return step + value[u(t)][u(state_code(d, h))];
    });
    out.deltas.push_back(d);
    s = state_code(d, t == 0 ? history_push(0, d) : history_push(state_history(s), d));
  }
  out.score = chain_score(chain, out.deltas, params);
  return out;
}

std::vector<std::array<double, kNumDeltas>> chain_marginals(const ChainProblem& chain, const BeliefEnergyParams& params) {
  const int T = static_cast<int>(chain.loglik.size());
  std::vector<std::array<double, kNumDeltas>> out(u(T));
  if (T == 0) return out;
  std::vector<std::array<double, kStates>> alpha(u(T));
  std::vector<std::array<double, kStates>> beta(u(T));
  for (auto& a : alpha) a.fill(kNegInf);
  for (BeliefDelta d : kDeltas) {
    const double v = initial_score(chain, d, params);
    if (v != kNegInf) alpha[0][u(state_code(d, history_push(0, d)))] = v;
  }
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < kStates; ++s) {
      if (alpha[u(t - 1)][u(s)] == kNegInf) continue;
      for (BeliefDelta d : kDeltas) {
        const double step = step_score(chain, t, s, d, params);
        if (step == kNegInf) continue;
        double& dst = alpha[u(t)][u(state_code(d, history_push(state_history(s), d)))];
        dst = log_add(dst, alpha[u(t - 1)][u(s)] + step);
      }
    }
  }
  beta[u(T - 1)].fill(0.0);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < kStates; ++s) {
      double acc = kNegInf;
      for (BeliefDelta d : kDeltas) {
        const double step = step_score(chain, t + 1, s, d, params);
        if (step == kNegInf) continue;
        acc = log_add(acc, step + beta[u(t + 1)][u(state_code(d, history_push(state_history(s), d)))]);
      }
      beta[u(t)][u(s)] = acc;
    }
  }
  double logz = kNegInf;
  for (int s = 0; s < kStates; ++s) logz = log_add(logz, alpha[0][u(s)] + beta[0][u(s)]);
  for (int t = 0; t < T; ++t) {
    out[u(t)].fill(0.0);
    for (int s = 0; s < kStates; ++s) {
      const double lp = alpha[u(t)][u(s)] + beta[u(t)][u(s)];
      if (lp == kNegInf) continue;
      out[u(t)][u(index(state_delta(s)))] += std::exp(lp - logz);
    }
  }
  return out;
}

PreparedChains prepare_chains(std::span<const EventSpan> events, const EvidenceTable& evidence,
                              const BeliefLikelihood& likelihood) {
  PreparedChains out;
  out.events.assign(events.begin(), events.end());
  out.frames = evidence.num_frames();
  out.objects = evidence.num_objects();
  const int N = out.objects;
  out.tables.resize(events.size() * kNumMinds * u(N));
  for (std::size_t j = 0; j < events.size(); ++j) {
    const EventSpan& ev = events[j];
    for (MindId m : kMinds) {
      for (int o = 0; o < N; ++o) {
        auto& pair = out.tables[(j * kNumMinds + u(index(m))) * u(N) + u(o)];
        for (int tas = 0; tas < 2; ++tas) {
          LogLikTable& tab = pair[u(tas)];
          tab.resize(u(ev.length()));
          for (int t = ev.start; t < ev.end; ++t) {
            for (int h = 0; h < kNumHistories; ++h) {
              tab[u(t - ev.start)][u(h)] = belief_log_likelihood(likelihood, m, ev.label, evidence.at(m, t, o), tas != 0, h);
            }
          }
        }
      }
    }
  }
  return out;
}

BeliefInference infer_belief_dynamics(const PreparedChains& chains, const BeliefPrior& prior,
                                      const BeliefEnergyParams& params, bool with_posterior) {
  const int T = chains.frames;
  const int N = chains.objects;
  BeliefInference out;
  out.deltas = BeliefTable(T, N);
  if (with_posterior) {
    out.posterior.assign(static_cast<std::size_t>(kNumMinds) * u(T) * u(N), {0.0f, 0.0f, 0.0f, 1.0f});
  }
  std::vector<bool> tracked(static_cast<std::size_t>(kNumMinds) * u(N), false);
  ChainProblem chain;
  for (std::size_t j = 0; j < chains.events.size(); ++j) {
    const EventSpan& ev = chains.events[j];
    ChainTerms terms;
    for (MindId m : kMinds) {
      chain.prior = &prior.at(m, ev.label);
      for (int o = 0; o < N; ++o) {
        const std::size_t key = u(index(m)) * u(N) + u(o);
        chain.tracked_at_start = tracked[key];
        chain.loglik = chains.tables[(j * kNumMinds + u(index(m))) * u(N) + u(o)][chain.tracked_at_start ? 1 : 0];
        const ChainResult best = viterbi_chain(chain, params);
        int h = 0;
        for (int t = ev.start; t < ev.end; ++t) {
          const BeliefDelta d = best.deltas[u(t - ev.start)];
          out.deltas.at(m, t, o) = d;
          h = history_push(h, d);
        }
        tracked[key] = history_tracked(h, chain.tracked_at_start);
        const ChainTerms ct = chain_terms(chain, best.deltas, params);
        terms.log_prior += ct.log_prior;
        terms.log_likelihood += ct.log_likelihood;
        if (with_posterior) {
          const auto marg = chain_marginals(chain, params);
          for (int t = ev.start; t < ev.end; ++t) {
            auto& cell = out.posterior[(u(index(m)) * u(T) + u(t)) * u(N) + u(o)];
            for (int d = 0; d < kNumDeltas; ++d) cell[u(d)] = static_cast<float>(marg[u(t - ev.start)][u(d)]);
          }
        }
      }
    }
    out.event_terms.push_back(terms);
  }
  return out;
}

BeliefInference infer_belief_dynamics(std::span<const EventSpan> events, const EvidenceTable& evidence,
                                      const BeliefModel& model, const BeliefEnergyParams& params,
                                      bool with_posterior) {
  return infer_belief_dynamics(prepare_chains(events, evidence, model.likelihood), model.prior, params, with_posterior);
}

}  // namespace fmp
