#include "fmp/parser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "fmp/error.hpp"
#include "fmp/eval.hpp"
#include "fmp/parallel.hpp"
#include "fmp/random.hpp"

namespace fmp {

namespace {

std::size_t u(int i) { return static_cast<std::size_t>(i); }

}  // namespace

SpanCache::SpanCache(const TraceFeatures& features, std::span<const Segment> segments,
                     const EventClassifier& classifier, int coefficients)
    : features_(features), classifier_(classifier), coefficients_(coefficients) {
  if (segments.empty()) throw std::invalid_argument("span cache needs at least one segment");
  bounds_.push_back(0);
  for (const Segment& s : segments) {
    if (s.start != bounds_.back() || s.end <= s.start) throw DataError("segments do not partition the trace");
    bounds_.push_back(s.end);
  }
  const FeatureMatrix& phi = features.phi;
  if (bounds_.back() != phi.rows) throw DataError("segments do not cover the trace");
  if (bounds_.size() > 65535) throw std::invalid_argument("too many segments");
  step_prefix_.assign(u(phi.rows), 0.0);
  for (int t = 1; t < phi.rows; ++t) {
    step_prefix_[u(t)] = step_prefix_[u(t - 1)] + feature_distance(phi.row(t - 1), phi.row(t));
  }
  const FeatureMatrix& d = features.descriptors;
  descriptor_prefix_.assign(u(d.rows + 1) * u(d.cols), 0.0);
  for (int t = 0; t < d.rows; ++t) {
    for (int c = 0; c < d.cols; ++c) {
      descriptor_prefix_[u(t + 1) * u(d.cols) + u(c)] = descriptor_prefix_[u(t) * u(d.cols) + u(c)] + d.at(t, c);
    }
  }
}

double SpanCache::within(int first, int end) {
  const int b = frame_start(first);
  const int e = frame_end(end);
  return (step_prefix_[u(e - 1)] - step_prefix_[u(b)]) / static_cast<double>(e - b);
}

const std::vector<double>& SpanCache::summary(int first, int end) {
  const std::size_t id = span_id(first, end);
  auto it = summaries_.find(id);
  if (it == summaries_.end()) {
    it = summaries_.emplace(id, wavelet_summary(features_.phi, frame_start(first), frame_end(end), coefficients_)).first;
  }
  return it->second;
}

double SpanCache::log_prob(int first, int end, EventLabel label) {
  const std::size_t id = span_id(first, end);
  auto it = log_probs_.find(id);
  if (it == log_probs_.end()) {
    const int b = frame_start(first);
    const int e = frame_end(end);
    const auto cols = u(features_.descriptors.cols);
    std::vector<double> mean(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] = (descriptor_prefix_[u(e) * cols + c] - descriptor_prefix_[u(b) * cols + c]) / static_cast<double>(e - b);
    }
    std::array<double, kNumEventLabels> lp{};
    classifier_.model.log_probs(fold_descriptor(mean), lp);
    it = log_probs_.emplace(id, lp).first;
  }
  return it->second[u(index(label))];
}

double SpanCache::summary_distance(int a_first, int a_end, int b_first, int b_end) {
  if (std::make_pair(b_first, b_end) < std::make_pair(a_first, a_end)) {
    std::swap(a_first, b_first);
    std::swap(a_end, b_end);
  }
  const std::uint64_t key = (static_cast<std::uint64_t>(a_first) << 48) | (static_cast<std::uint64_t>(a_end) << 32) |
                            (static_cast<std::uint64_t>(b_first) << 16) | static_cast<std::uint64_t>(b_end);
  auto it = distances_.find(key);
  if (it != distances_.end()) return it->second;
  const double d = feature_distance(summary(a_first, a_end), summary(b_first, b_end));
  distances_.emplace(key, d);
  return d;
}

EventTermBreakdown sequence_energy(SpanCache& cache, std::span<const Event> events, const EventPriors& priors,
                                   const EventEnergyParams& theta) {
  EventTermBreakdown out;
  const std::size_t n = events.size();
  if (n == 0) return out;
  out.aggregation = aggregation_energy(static_cast<int>(n), cache.trace_length(), theta.lambda1);
  std::vector<EventLabel> labels;
  for (const Event& e : events) labels.push_back(e.label);
  out.prior = event_prior_energy(labels, priors, theta.lambda2, theta.lambda3);

  double within = 0.0;
  for (const Event& e : events) within += cache.within(e.first_segment, e.end_segment);
  out.composition = theta.lambda5 * within / static_cast<double>(n);
  if (n >= 2) {
    double consecutive = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      consecutive += cache.summary_distance(events[i].first_segment, events[i].end_segment, events[i + 1].first_segment,
                                            events[i + 1].end_segment);
    }
    double all = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        all += cache.summary_distance(events[i].first_segment, events[i].end_segment, events[j].first_segment,
                                      events[j].end_segment);
      }
    }
    out.composition -= theta.lambda6 * consecutive / static_cast<double>(n - 1);
    out.composition -= theta.lambda7 * all / static_cast<double>(n * (n - 1) / 2);
  }
  std::vector<double> lp;
  for (const Event& e : events) lp.push_back(cache.log_prob(e.first_segment, e.end_segment, e.label));
  out.classification = classification_energy(lp, theta.lambda8);
  return out;
}

namespace {

bool label_less(std::span<const EventLabel> a, std::span<const EventLabel> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Shared ordering: energy with a relative tolerance, then event count,
/// labels, and segment boundaries.
bool preferred(double ea, std::span<const EventLabel> la, std::span<const int> ca, double eb,
               std::span<const EventLabel> lb, std::span<const int> cb) {
  const double tol = 1e-9 * std::max({1.0, std::abs(ea), std::abs(eb)});
  if (ea < eb - tol) return true;
  if (eb < ea - tol) return false;
  if (la.size() != lb.size()) return la.size() < lb.size();
  if (!std::equal(la.begin(), la.end(), lb.begin())) return label_less(la, lb);
  return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
}

std::vector<EventLabel> labels_of(std::span<const Event> events) {
  std::vector<EventLabel> out;
  for (const Event& e : events) out.push_back(e.label);
  return out;
}

std::vector<int> cuts_of(std::span<const Event> events) {
  std::vector<int> out;
  for (const Event& e : events) out.push_back(e.end_segment);
  return out;
}

std::vector<Event> make_events(SpanCache& cache, std::span<const int> cuts, std::span<const EventLabel> labels) {
  std::vector<Event> out;
  int first = 0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    out.push_back({labels[i], cache.frame_start(first), cache.frame_end(cuts[i]), first, cuts[i]});
    first = cuts[i];
  }
  return out;
}

/// -log p_occ summed over all unordered pairs of a label histogram.
double occurrence_cost(const EventPriors& priors, int c0, int c1, int c2) {
  const std::array<int, 3> c{c0, c1, c2};
  double s = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    s -= static_cast<double>(c[a]) * static_cast<double>(c[a] - 1) / 2.0 * std::log(priors.occ[a][a]);
    for (std::size_t b = a + 1; b < 3; ++b) s -= static_cast<double>(c[a] * c[b]) * std::log(priors.occ[a][b]);
  }
  return s;
}

}  // namespace

bool parse_preferred(double energy_a, std::span<const Event> a, double energy_b, std::span<const Event> b) {
  return preferred(energy_a, labels_of(a), cuts_of(a), energy_b, labels_of(b), cuts_of(b));
}

std::vector<Event> best_labeling(SpanCache& cache, std::span<const int> cuts, const EventPriors& priors,
                                 const EventEnergyParams& theta) {
  const int n = static_cast<int>(cuts.size());
  const double pairs = n >= 2 ? static_cast<double>(n) * (n - 1) / 2.0 : 1.0;
  const double wt = n >= 2 ? theta.lambda2 / static_cast<double>(n - 1) : 0.0;
  const double wo = n >= 2 ? theta.lambda3 / pairs : 0.0;
  const double wc = theta.lambda8 / static_cast<double>(n);

  std::vector<std::array<double, 3>> unary(u(n));
  int first = 0;
  for (int i = 0; i < n; ++i) {
    for (EventLabel l : kEventLabels) unary[u(i)][u(index(l))] = -wc * cache.log_prob(first, cuts[u(i)], l);
    first = cuts[u(i)];
  }
  std::array<std::array<double, 3>, 3> trans{};
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) trans[a][b] = -wt * std::log(priors.trans[a][b]);
  }

  // value(i, last, c0, c1): best cost of labeling events i..n-1 given the
  // label of event i-1 and the histogram of events 0..i-1.
  const auto hist_index = [](int i, int c0, int c1) {
    // histograms with c0 + c1 <= i, enumerated by c0 then c1
    return static_cast<std::size_t>(c0 * (i + 1) - c0 * (c0 - 1) / 2 + c1);
  };
  const auto hist_count = [](int i) { return static_cast<std::size_t>((i + 1) * (i + 2) / 2); };
  std::vector<std::vector<double>> value(u(n + 1));
  for (int i = 0; i <= n; ++i) value[u(i)].assign(3 * hist_count(i), 0.0);
  for (int c0 = 0; c0 <= n; ++c0) {
    for (int c1 = 0; c0 + c1 <= n; ++c1) {
      const double occ = wo * occurrence_cost(priors, c0, c1, n - c0 - c1);
      for (int last = 0; last < 3; ++last) value[u(n)][u(last) * hist_count(n) + hist_index(n, c0, c1)] = occ;
    }
  }
  const auto step_cost = [&](int i, int last, int c0, int c1, int l) {
    const int d0 = c0 + (l == 0 ? 1 : 0);
    const int d1 = c1 + (l == 1 ? 1 : 0);
    double v = unary[u(i)][u(l)] + value[u(i + 1)][u(l) * hist_count(i + 1) + hist_index(i + 1, d0, d1)];
    if (i > 0) v += trans[u(last)][u(l)];
    return v;
  };
  for (int i = n - 1; i >= 0; --i) {
    for (int c0 = 0; c0 <= i; ++c0) {
      for (int c1 = 0; c0 + c1 <= i; ++c1) {
        for (int last = 0; last < 3; ++last) {
          double best = std::numeric_limits<double>::infinity();
          for (int l = 0; l < 3; ++l) best = std::min(best, step_cost(i, last, c0, c1, l));
          value[u(i)][u(last) * hist_count(i) + hist_index(i, c0, c1)] = best;
        }
      }
    }
  }
  std::vector<EventLabel> labels;
  int last = 0;
  int c0 = 0;
  int c1 = 0;
  for (int i = 0; i < n; ++i) {
    std::array<double, 3> cost{};
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l < 3; ++l) {
      cost[u(l)] = step_cost(i, last, c0, c1, l);
      best = std::min(best, cost[u(l)]);
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    int pick = 0;
    while (cost[u(pick)] > best + tol) ++pick;
    labels.push_back(static_cast<EventLabel>(pick));
    c0 += pick == 0 ? 1 : 0;
    c1 += pick == 1 ? 1 : 0;
    last = pick;
  }
  return make_events(cache, cuts, labels);
}

namespace {

struct Cell {
  bool valid = false;
  std::vector<EventLabel> labels;
  double trans_cost = 0.0;  // sum of -log p_trans
  std::array<int, 3> hist{};
  double log_prob = 0.0;
};

struct Hypothesis {
  std::vector<int> cuts;
  double within = 0.0;
  double consecutive = 0.0;
  double all_pairs = 0.0;
  std::array<Cell, 3> cells;
  bool complete = false;
  std::vector<Event> events;  // complete hypotheses only
  double energy = 0.0;        // rank energy
  std::vector<EventLabel> rank_labels;

  int position() const { return cuts.empty() ? 0 : cuts.back(); }
};

/// Energy the prefix would have if it were the whole parse.
double prefix_energy(const Hypothesis& h, const Cell& c, const EventPriors& priors, const EventEnergyParams& th,
                     int trace_length) {
  const auto n = static_cast<double>(h.cuts.size());
  double e = th.lambda1 * n / trace_length + th.lambda5 * h.within / n - th.lambda8 * c.log_prob / n;
  if (h.cuts.size() >= 2) {
    const double pairs = n * (n - 1) / 2.0;
    e += th.lambda2 * c.trans_cost / (n - 1) + th.lambda3 * occurrence_cost(priors, c.hist[0], c.hist[1], c.hist[2]) / pairs;
    e -= th.lambda6 * h.consecutive / (n - 1) + th.lambda7 * h.all_pairs / pairs;
  }
  return e;
}

bool hyp_preferred(const Hypothesis& a, const Hypothesis& b) {
  return preferred(a.energy, a.rank_labels, a.cuts, b.energy, b.rank_labels, b.cuts);
}

/// One beam pass of fixed width; returns the best completed parse.
SearchResult beam_pass(SpanCache& cache, const EventPriors& priors, const EventEnergyParams& theta, int width,
                       const BeamParams& beam) {
  const int K = cache.num_segments();
  const int T = cache.trace_length();
  SearchResult result;

  const auto extend = [&](const Hypothesis& h, int k) {
    Hypothesis nh;
    const int first = h.position();
    const int end = first + k;
    nh.cuts = h.cuts;
    nh.cuts.push_back(end);
    nh.within = h.within + cache.within(first, end);
    nh.consecutive = h.consecutive;
    nh.all_pairs = h.all_pairs;
    int prev_first = 0;
    for (std::size_t i = 0; i < h.cuts.size(); ++i) {
      const double d = cache.summary_distance(prev_first, h.cuts[i], first, end);
      nh.all_pairs += d;
      if (i + 1 == h.cuts.size()) nh.consecutive += d;
      prev_first = h.cuts[i];
    }
    if (end == K) {
      nh.complete = true;
      nh.events = best_labeling(cache, nh.cuts, priors, theta);
      nh.energy = sequence_energy(cache, nh.events, priors, theta).total();
      nh.rank_labels = labels_of(nh.events);
      ++result.candidates;
      return nh;
    }
    bool have_rank = false;
    for (EventLabel l : kEventLabels) {
      const double lp = cache.log_prob(first, end, l);
      Cell best;
      double best_energy = 0.0;
      const auto consider = [&](const Cell* prev) {
        Cell c;
        c.valid = true;
        if (prev) {
          c.labels = prev->labels;
          c.trans_cost = prev->trans_cost -
                         std::log(priors.trans[u(index(prev->labels.back()))][u(index(l))]);
          c.hist = prev->hist;
          c.log_prob = prev->log_prob;
        }
        c.labels.push_back(l);
        ++c.hist[u(index(l))];
        c.log_prob += lp;
        const double e = prefix_energy(nh, c, priors, theta, T);
        if (!best.valid || e < best_energy) {
          best = std::move(c);
          best_energy = e;
        }
      };
      if (h.cuts.empty()) {
        consider(nullptr);
      } else {
        for (const Cell& prev : h.cells) {
          if (prev.valid) consider(&prev);
        }
      }
      if (!have_rank || preferred(best_energy, best.labels, nh.cuts, nh.energy, nh.rank_labels, nh.cuts)) {
        nh.energy = best_energy;
        nh.rank_labels = best.labels;
        have_rank = true;
      }
      nh.cells[u(index(l))] = std::move(best);
    }
    return nh;
  };

  // The best completed parse is kept outside the beam as well, so pruning
  // never loses it.
  std::optional<Hypothesis> best;
  const auto fold = [&](const Hypothesis& h) {
    if (!best || hyp_preferred(h, *best)) best = h;
  };
  std::vector<Hypothesis> B(1);
  while (true) {
    std::vector<Hypothesis> next;
    std::optional<Hypothesis> done;  // completed entries recombine into one
    const auto keep_done = [&](Hypothesis h) {
      if (!done || hyp_preferred(h, *done)) done = std::move(h);
    };
    bool extended = false;
    for (Hypothesis& h : B) {
      if (h.complete) {
        keep_done(std::move(h));
        continue;
      }
      extended = true;
      for (int k = 1; k <= beam.max_merge && h.position() + k <= K; ++k) {
        Hypothesis nh = extend(h, k);
        if (nh.complete) {
          fold(nh);
          keep_done(std::move(nh));
        } else {
          next.push_back(std::move(nh));
        }
      }
    }
    if (!extended) break;
    if (done) next.push_back(std::move(*done));
    // Best(B', n) by repeated selection, so the result does not depend on
    // the order candidates were produced in.
    std::vector<Hypothesis> kept;
    std::vector<bool> taken(next.size(), false);
    for (int r = 0; r < width && kept.size() < next.size(); ++r) {
      std::size_t pick = next.size();
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (!taken[i] && (pick == next.size() || hyp_preferred(next[i], next[pick]))) pick = i;
      }
      taken[pick] = true;
      kept.push_back(std::move(next[pick]));
    }
    B = std::move(kept);
  }
  if (!best) throw std::logic_error("beam search ended without a complete parse");
  result.events = best->events;
  result.energy = best->energy;
  return result;
}

}  // namespace

SearchResult beam_search_events(SpanCache& cache, const EventPriors& priors, const EventEnergyParams& theta,
                                const BeamParams& beam) {
  if (beam.width < 1 || beam.max_merge < 1) throw std::invalid_argument("beam width and merge span must be positive");
  // A single pass of width n can prune what a narrower pass keeps; folding
  // the passes 1..n makes the result monotone in n.
  SearchResult out = beam_pass(cache, priors, theta, 1, beam);
  for (int w = 2; w <= beam.width; ++w) {
    SearchResult r = beam_pass(cache, priors, theta, w, beam);
    out.candidates += r.candidates;
    if (parse_preferred(r.energy, r.events, out.energy, out.events)) {
      r.candidates = out.candidates;
      out = std::move(r);
    }
  }
  return out;
}

SearchResult exhaustive_parse(SpanCache& cache, const EventPriors& priors, const EventEnergyParams& theta) {
  const int K = cache.num_segments();
  if (K > kExhaustiveSegmentLimit) {
    throw std::invalid_argument("exhaustive parse is limited to " + std::to_string(kExhaustiveSegmentLimit) + " segments");
  }
  SearchResult best;
  bool have = false;
  const std::uint32_t compositions = 1u << (K - 1);
  for (std::uint32_t mask = 0; mask < compositions; ++mask) {
    std::vector<int> cuts;
    for (int g = 1; g < K; ++g) {
      if (mask & (1u << (g - 1))) cuts.push_back(g);
    }
    cuts.push_back(K);
    const std::size_t n = cuts.size();
    std::size_t labelings = 1;
    for (std::size_t i = 0; i < n; ++i) labelings *= 3;
    std::vector<EventLabel> labels(n, EventLabel::NoCommunication);
    for (std::size_t code = 0; code < labelings; ++code) {
      std::size_t c = code;
      for (std::size_t i = n; i-- > 0;) {
        labels[i] = static_cast<EventLabel>(c % 3);
        c /= 3;
      }
      std::vector<Event> events = make_events(cache, cuts, labels);
      const double e = sequence_energy(cache, events, priors, theta).total();
      ++best.candidates;
      if (!have || parse_preferred(e, events, best.energy, best.events)) {
        best.events = std::move(events);
        best.energy = e;
        have = true;
      }
    }
  }
  return best;
}

std::vector<EventSpan> spans_of(std::span<const Event> events) {
  std::vector<EventSpan> out;
  for (const Event& e : events) out.push_back(e.span());
  return out;
}

void check_partition(std::span<const Event> events, std::span<const Segment> segments, int length) {
  int frame = 0;
  int seg = 0;
  for (const Event& e : events) {
    if (e.start != frame || e.end <= e.start) throw DataError("events are not sorted, disjoint and covering");
    if (e.first_segment != seg || e.end_segment <= e.first_segment ||
        e.end_segment > static_cast<int>(segments.size())) {
      throw DataError("event segment indices are not contiguous");
    }
    if (segments[u(e.first_segment)].start != e.start || segments[u(e.end_segment - 1)].end != e.end) {
      throw DataError("event span disagrees with its segments");
    }
    frame = e.end;
    seg = e.end_segment;
  }
  if (frame != length || seg != static_cast<int>(segments.size())) throw DataError("events do not cover the trace");
}

EnergyBreakdown total_energy(const ParseGraph& pg, SpanCache& cache, const Model& model, const Theta& theta) {
  check_partition(pg.events, pg.segments, pg.length);
  if (pg.beliefs.event_terms.size() != pg.events.size()) throw DataError("belief layer does not match the events");
  EnergyBreakdown out;
  const EventTermBreakdown ev = sequence_energy(cache, pg.events, model.priors, theta.events);
  out.aggregation = ev.aggregation;
  out.event_prior = ev.prior;
  out.composition = ev.composition;
  out.classification = ev.classification;
  double prior = 0.0;
  double lik = 0.0;
  for (std::size_t j = 0; j < pg.events.size(); ++j) {
    prior += pg.beliefs.event_terms[j].log_prior;
    lik += pg.beliefs.event_terms[j].log_likelihood / static_cast<double>(pg.events[j].end - pg.events[j].start);
  }
  out.belief_prior = -theta.beliefs.lambda4 * prior;
  out.belief_likelihood = -theta.beliefs.lambda9 * lik / static_cast<double>(pg.events.size());
  out.total = out.sum();
  return out;
}

ParseGraph parse(const WorldTrace& trace, const Model& model, const std::string& trace_id) {
  return parse(trace, extract_trace_features(trace, model.attention), model, trace_id);
}

ParseGraph parse(const WorldTrace& trace, const TraceFeatures& features, const Model& model,
                 const std::string& trace_id) {
  if (trace.length() < 2) throw DataError("cannot parse a trace shorter than 2 frames");
  ParseGraph pg;
  pg.trace_id = trace_id;
  pg.length = trace.length();
  pg.object_count = trace.object_count;
  pg.theta = model.theta;
  pg.segments = propose_segments(features.phi, model.segments);
  SpanCache cache(features, pg.segments, model.classifier, model.segments.coefficients);
  pg.events = beam_search_events(cache, model.priors, model.theta.events, model.beam).events;
  check_partition(pg.events, pg.segments, pg.length);
  pg.graphs = features.graphs;
  const std::vector<EventSpan> spans = spans_of(pg.events);
  const EvidenceTable evidence = compute_evidence(trace, features.graphs, spans, model.attention);
  pg.beliefs = infer_belief_dynamics(spans, evidence, model.beliefs, model.theta.beliefs, true);
  pg.energy = total_energy(pg, cache, model, model.theta);
  return pg;
}

std::vector<EventEnergyParams> theta1_grid(const FitConfig& config) {
  if (!config.theta1_grid.empty()) return config.theta1_grid;
  const std::vector<double>& v = config.lambda_values;
  if (v.empty() || config.max_theta1 == 0) throw ConfigError("the lambda grid is empty");
  std::uint64_t total = 1;
  for (int i = 0; i < 7; ++i) total *= v.size();
  std::vector<std::uint64_t> picks;
  if (total <= config.max_theta1) {
    for (std::uint64_t i = 0; i < total; ++i) picks.push_back(i);
  } else {
    // Floyd's sampling of max_theta1 distinct grid indices.
    Rng rng(config.seed);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - config.max_theta1; j < total; ++j) {
      const std::uint64_t t = rng.next() % (j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    picks.assign(chosen.begin(), chosen.end());
  }
  std::vector<EventEnergyParams> grid;
  for (std::uint64_t code : picks) {
    std::array<double, 7> l{};
    for (int i = 6; i >= 0; --i) {
      l[u(i)] = v[code % v.size()];
      code /= v.size();
    }
    grid.push_back({l[0], l[1], l[2], l[3], l[4], l[5], l[6]});
  }
  return grid;
}

std::vector<BeliefEnergyParams> theta2_grid(const FitConfig& config) {
  if (!config.theta2_grid.empty()) return config.theta2_grid;
  if (config.lambda4_values.empty() || config.lambda9_values.empty()) throw ConfigError("the belief weight grid is empty");
  std::vector<BeliefEnergyParams> grid;
  for (double l4 : config.lambda4_values) {
    for (double l9 : config.lambda9_values) grid.push_back({l4, l9, config.marginal_first_frame_only});
  }
  return grid;
}

namespace {

constexpr double kLogLossFloor = 1e-12;

long long frame_mismatches(std::span<const Event> predicted, std::span<const ScriptedEvent> truth) {
  long long wrong = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  int t = 0;
  while (i < predicted.size() && j < truth.size()) {
    const int end = std::min(predicted[i].end, truth[j].end);
    if (predicted[i].label != truth[j].label) wrong += end - t;
    t = end;
    if (predicted[i].end == end) ++i;
    if (truth[j].end == end) ++j;
  }
  return wrong;
}

EventLabel majority_label(std::span<const ScriptedEvent> truth, int begin, int end) {
  std::array<int, kNumEventLabels> votes{};
  for (const ScriptedEvent& e : truth) {
    const int overlap = std::min(end, e.end) - std::max(begin, e.start);
    if (overlap > 0) votes[u(index(e.label))] += overlap;
  }
  return static_cast<EventLabel>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

double event_frame_error(std::span<const Event> predicted, std::span<const ScriptedEvent> truth) {
  if (truth.empty()) return 0.0;
  return static_cast<double>(frame_mismatches(predicted, truth)) / static_cast<double>(truth.back().end);
}

FitResult fit(std::span<const TrainingTrace> corpus, const FitConfig& config) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  if (config.window < 2) throw ConfigError("segment window must be at least 2 frames");
  const std::vector<EventEnergyParams> grid1 = theta1_grid(config);
  const std::vector<BeliefEnergyParams> grid2 = theta2_grid(config);
  if (grid1.empty() || grid2.empty()) throw ConfigError("parameter grids must be non-empty");

  const std::size_t n = corpus.size();
  std::vector<TraceFeatures> features(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    if (corpus[i].trace->length() < 2) throw DataError("training trace " + corpus[i].id + " is too short");
    features[i] = extract_trace_features(*corpus[i].trace, config.attention);
  });

  FitResult out;
  Model& model = out.model;
  model.attention = config.attention;
  model.beam = config.beam;
  model.segments.window = config.window;
  model.segments.coefficients = config.coefficients;
  if (config.threshold) {
    model.segments.threshold = *config.threshold;
  } else {
    std::vector<const FeatureMatrix*> streams;
    for (const TraceFeatures& f : features) streams.push_back(&f.phi);
    model.segments.threshold = median_adjacent_window_distance(streams, model.segments);
  }
  std::vector<std::vector<Segment>> segments(n);
  parallel_for(n, config.jobs, [&](std::size_t i) { segments[i] = propose_segments(features[i].phi, model.segments); });

  std::vector<std::vector<EventLabel>> sequences;
  std::vector<LabeledDescriptor> examples;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<EventLabel> seq;
    for (const ScriptedEvent& e : corpus[i].truth->events) {
      seq.push_back(e.label);
      examples.push_back({event_descriptor(features[i].descriptors, e.start, e.end), e.label, 1.0});
    }
    for (const Segment& s : segments[i]) {
      examples.push_back({event_descriptor(features[i].descriptors, s.start, s.end),
                          majority_label(corpus[i].truth->events, s.start, s.end), 1.0});
    }
    sequences.push_back(std::move(seq));
  }
  model.priors = fit_priors(sequences, config.alpha);
  model.classifier = train_event_classifier(examples, config.classifier_training);

  // Stage 1: event weights.
  std::vector<std::vector<long long>> wrong(n, std::vector<long long>(grid1.size(), 0));
  std::vector<std::vector<Event>> predicted(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    SpanCache cache(features[i], segments[i], model.classifier, model.segments.coefficients);
    for (std::size_t g = 0; g < grid1.size(); ++g) {
      const SearchResult r = beam_search_events(cache, model.priors, grid1[g], model.beam);
      wrong[i][g] = frame_mismatches(r.events, corpus[i].truth->events);
    }
  });
  long long frames = 0;
  for (std::size_t i = 0; i < n; ++i) frames += corpus[i].trace->length();
  std::size_t best1 = 0;
  out.l1_per_theta1.assign(grid1.size(), 0.0);
  for (std::size_t g = 0; g < grid1.size(); ++g) {
    long long w = 0;
    for (std::size_t i = 0; i < n; ++i) w += wrong[i][g];
    out.l1_per_theta1[g] = static_cast<double>(w) / static_cast<double>(frames);
    if (out.l1_per_theta1[g] < out.l1_per_theta1[best1]) best1 = g;
  }
  model.theta.events = grid1[best1];
  model.l1 = out.l1_per_theta1[best1];
  model.theta1_grid_size = grid1.size();

  // Stage 2: belief model and weights.
  std::vector<std::vector<EventSpan>> truth_spans(n);
  std::vector<EvidenceTable> truth_evidence(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    for (const ScriptedEvent& e : corpus[i].truth->events) truth_spans[i].push_back({e.label, e.start, e.end});
    truth_evidence[i] = compute_evidence(*corpus[i].trace, features[i].graphs, truth_spans[i], config.attention);
  });
  std::vector<BeliefCorpusItem> prior_items;
  std::vector<BeliefTrainingItem> lik_items;
  for (std::size_t i = 0; i < n; ++i) {
    prior_items.push_back({truth_spans[i], &corpus[i].truth->deltas});
    lik_items.push_back({truth_spans[i], &corpus[i].truth->deltas, &truth_evidence[i]});
  }
  model.beliefs.prior = fit_belief_prior(prior_items, config.alpha);
  model.beliefs.likelihood = train_belief_likelihood(lik_items, config.belief_training);

  std::vector<PreparedChains> chains(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    SpanCache cache(features[i], segments[i], model.classifier, model.segments.coefficients);
    predicted[i] = beam_search_events(cache, model.priors, model.theta.events, model.beam).events;
    const std::vector<EventSpan> spans = spans_of(predicted[i]);
    const EvidenceTable ev = compute_evidence(*corpus[i].trace, features[i].graphs, spans, config.attention);
    chains[i] = prepare_chains(spans, ev, model.beliefs.likelihood);
  });
  out.l2_per_theta2.assign(grid2.size(), 0.0);
  parallel_for(grid2.size(), config.jobs, [&](std::size_t g) {
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const BeliefInference inf = infer_belief_dynamics(chains[i], model.beliefs.prior, grid2[g], false);
      acc.add(inf.deltas, corpus[i].truth->deltas);
    }
    out.l2_per_theta2[g] = 1.0 - acc.report().mean_f1;
  });
  std::size_t best2 = 0;
  for (std::size_t g = 1; g < grid2.size(); ++g) {
    if (out.l2_per_theta2[g] < out.l2_per_theta2[best2]) best2 = g;
  }
  // Rescaling the weights leaves the decoded deltas unchanged, so the loss
  // ties along whole rays of the grid. Ties go to the weights whose posterior
  // gives the true deltas the lowest log loss.
  std::vector<std::size_t> tied;
  for (std::size_t g = 0; g < grid2.size(); ++g) {
    if (out.l2_per_theta2[g] == out.l2_per_theta2[best2]) tied.push_back(g);
  }
  out.log_loss_per_theta2.assign(grid2.size(), std::numeric_limits<double>::quiet_NaN());
  if (tied.size() > 1) {
    parallel_for(tied.size(), config.jobs, [&](std::size_t k) {
      const std::size_t g = tied[k];
      double loss = 0.0;
      double cells = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const BeliefInference inf = infer_belief_dynamics(chains[i], model.beliefs.prior, grid2[g], true);
        const BeliefTable& truth = corpus[i].truth->deltas;
        for (MindId m : kMinds) {
          for (int t = 0; t < truth.num_frames(); ++t) {
            for (int o = 0; o < truth.num_objects(); ++o) {
              const double p = inf.at(m, t, o)[static_cast<std::size_t>(index(truth.at(m, t, o)))];
              loss -= std::log(std::max(p, kLogLossFloor));
              cells += 1.0;
            }
          }
        }
      }
      out.log_loss_per_theta2[g] = cells > 0.0 ? loss / cells : 0.0;
    });
    best2 = tied.front();
    for (std::size_t g : tied) {
      if (out.log_loss_per_theta2[g] < out.log_loss_per_theta2[best2]) best2 = g;
    }
  }
  model.theta.beliefs = grid2[best2];
  model.l2 = out.l2_per_theta2[best2];
  model.theta2_grid_size = grid2.size();
  return out;
}

}  // namespace fmp
