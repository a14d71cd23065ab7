#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fmp/features.hpp"
#include "fmp/sim.hpp"
#include "helpers.hpp"

using namespace fmp;

namespace {

Vec3 rotate_z(const Vec3& v, double a) {
  return {v.x * std::cos(a) - v.y * std::sin(a), v.x * std::sin(a) + v.y * std::cos(a), v.z};
}

/// Straight-line reference of the gaze rule without occluders: inside the
/// cone and range, smallest offset, then nearer, then lower id.
TargetHit reference_gaze(const WorldFrame& f, int agent, const AttentionParams& p) {
  const AgentState& a = f.agents[static_cast<std::size_t>(agent)];
  TargetHit best;
  const int entities = 2 + static_cast<int>(f.objects.size());
  for (int e = 0; e < entities; ++e) {
    if (e == agent) continue;
    const Vec3 pos = e < 2 ? f.agents[static_cast<std::size_t>(e)].head() : f.objects[static_cast<std::size_t>(e - 2)].position;
    const Vec3 d = pos - a.head();
    const double dist = norm(d);
    if (dist > p.gaze_range || dist == 0.0) continue;
    const double ang = std::acos(std::clamp(dot(d, a.gaze) / dist, -1.0, 1.0));
    if (ang > p.gaze_half_angle) continue;
    if (best.entity < 0 || ang < best.offset || (ang == best.offset && dist < best.distance)) {
      best = {e, ang, dist};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("feature dimension for six joints is 4N + 65") {
  for (int n = 0; n < 8; ++n) CHECK(feature_dimension(6, n) == 4 * n + 65);
}

TEST_CASE("object on the gaze ray is the target with zero offset") {
  const WorldFrame f = test::make_frame(0, test::make_agent({0, 0, 1.6}, {1, 0, 0}),
                                        test::make_agent({0, 3, 1.6}, {0, 1, 0}), {{2, 0, 1.6}});
  const TargetHit hit = gaze_target(f, 0, {}, {});
  CHECK(hit.entity == object_entity(0));
  CHECK(hit.offset == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hit.distance == doctest::Approx(2.0));
}

TEST_CASE("of two objects in the cone the smaller offset wins") {
  const Vec3 head{0, 0, 1.6};
  const Vec3 o3 = head + rotate_z({2.5, 0, 0}, degrees(3.0));
  const Vec3 o8 = head + rotate_z({1.5, 0, 0}, degrees(-8.0));
  const WorldFrame f = test::make_frame(0, test::make_agent(head, {1, 0, 0}), test::make_agent({0, 3, 1.6}, {0, 1, 0}),
                                        {o8, o3});
  const TargetHit hit = gaze_target(f, 0, {}, {});
  CHECK(hit.entity == object_entity(1));
  CHECK(hit.offset == doctest::Approx(degrees(3.0)));
}

TEST_CASE("frame features match a hand-computed reference") {
  Rng rng(404);
  const AttentionParams p;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 h0{rng.uniform(1, 2), rng.uniform(1, 2), 1.6};
    const Vec3 h1{rng.uniform(3, 4), rng.uniform(1, 2), 1.6};
    std::vector<Vec3> objects;
    for (int j = 0; j < 3; ++j) objects.push_back({rng.uniform(1, 4), rng.uniform(2.5, 3.5), rng.uniform(0.5, 1.6)});
    // Agent 0 looks roughly at object `trial % 3`, agent 1 at random.
    const Vec3 g0 = normalized(objects[static_cast<std::size_t>(trial % 3)] - h0 + Vec3{rng.normal(0, 0.1), 0, 0});
    const Vec3 g1 = normalized({rng.normal(), rng.normal(), rng.normal()});
    const WorldFrame f = test::make_frame(0, test::make_agent(h0, g0), test::make_agent(h1, g1), objects);
    const FrameFeatures ff = extract_frame_features(f, {}, p);

    std::vector<double> ref;
    for (int a = 0; a < 2; ++a) {
      const AgentState& s = f.agents[static_cast<std::size_t>(a)];
      for (const Vec3& j : s.pose) ref.insert(ref.end(), {j.x, j.y, j.z});
      for (const Vec3& o : objects) ref.push_back(std::min(norm(o - s.pose[1]), norm(o - s.pose[2])));
      const TargetHit hit = reference_gaze(f, a, p);
      std::vector<double> onehot(5, 0.0);
      onehot[static_cast<std::size_t>(hit.entity < 0 ? 0 : (hit.entity < 2 ? 1 : hit.entity))] = 1.0;
      ref.insert(ref.end(), onehot.begin(), onehot.end());
      ref.push_back(hit.entity < 0 ? std::numbers::pi : hit.offset);
    }
    for (std::size_t j = 0; j < 6; ++j) {
      const Vec3 d = f.agents[1].pose[j] - f.agents[0].pose[j];
      ref.insert(ref.end(), {d.x, d.y, d.z});
    }
    ref.push_back(std::acos(std::clamp(dot(g0, g1), -1.0, 1.0)));
    const auto& A = f.agents[0].pose;
    const auto& B = f.agents[1].pose;
    ref.insert(ref.end(), {norm(A[1] - B[1]), norm(A[1] - B[2]), norm(A[2] - B[1]), norm(A[2] - B[2])});

    REQUIRE(ff.values.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      INFO("entry " << i);
      CHECK(ff.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention graph edges") {
  SUBCASE("both agents gaze at the same object") {
    const Vec3 obj{3, 3, 1.0};
    const Vec3 h0{2, 1, 1.6};
    const Vec3 h1{4, 1, 1.6};
    const WorldFrame f = test::make_frame(0, test::make_agent(h0, obj - h0), test::make_agent(h1, obj - h1),
                                          {{0.5, 4.5, 0.2}, obj});
    const AttentionGraph g = build_attention_graph(f, extract_frame_features(f, {}));
    CHECK(g.edges.size() == 2);
    CHECK(g.has_edge(0, object_entity(1), Channel::Gaze));
    CHECK(g.has_edge(1, object_entity(1), Channel::Gaze));
  }
  SUBCASE("a follows b who looks at object 0") {
    const Vec3 obj{4, 3, 1.0};
    const Vec3 h0{2, 1, 1.6};
    const Vec3 h1{4, 1, 1.6};
    const WorldFrame f = test::make_frame(0, test::make_agent(h0, h1 - h0), test::make_agent(h1, obj - h1), {obj});
    const AttentionGraph g = build_attention_graph(f, extract_frame_features(f, {}));
    CHECK(g.edges.size() == 2);
    CHECK(g.has_edge(0, 1, Channel::Gaze));
    CHECK(g.has_edge(1, object_entity(0), Channel::Gaze));
    CHECK_FALSE(g.mutual_gaze());
  }
  SUBCASE("nothing in any cone") {
    const WorldFrame f = test::make_frame(0, test::make_agent({2, 1, 1.6}, {0, -1, 0}),
                                          test::make_agent({4, 1, 1.6}, {0, -1, 0}), {{3, 3, 1}});
    CHECK(build_attention_graph(f, extract_frame_features(f, {})).edges.empty());
  }
  SUBCASE("pointing adds a pointing edge") {
    const Vec3 obj{4, 3, 1.0};
    AgentState a0 = test::make_agent({2, 1, 1.6}, {0, -1, 0});
    a0.pointing = normalized(obj - a0.right_hand());
    const WorldFrame f = test::make_frame(0, a0, test::make_agent({4, 1, 1.6}, {0, -1, 0}), {obj});
    const AttentionGraph g = build_attention_graph(f, extract_frame_features(f, {}));
    CHECK(g.edges.size() == 1);
    CHECK(g.has_edge(0, object_entity(0), Channel::Pointing));
  }
}

TEST_CASE("graph edges come from agents and are never self-edges") {
  const Simulation sim = simulate(random_scenario(8, {}));
  const TraceFeatures tf = extract_trace_features(sim.trace);
  for (const AttentionGraph& g : tf.graphs) {
    int gaze_edges[2] = {0, 0};
    for (const AttentionEdge& e : g.edges) {
      CHECK(is_agent_entity(e.source));
      CHECK(e.source != e.target);
      if (e.channel == Channel::Gaze) ++gaze_edges[e.source];
    }
    CHECK(gaze_edges[0] <= 1);
    CHECK(gaze_edges[1] <= 1);
  }
}

TEST_CASE("pairwise features are translation invariant") {
  const Simulation sim = simulate(random_scenario(21, {}));
  const Vec3 shift{0.37, -0.21, 0.05};
  for (int t = 0; t < sim.trace.length(); t += 7) {
    WorldFrame f = sim.trace.frames[static_cast<std::size_t>(t)];
    const FrameFeatures a = extract_frame_features(f, {});
    for (AgentState& ag : f.agents) {
      ag.position += shift;
      for (Vec3& j : ag.pose) j += shift;
    }
    for (ObjectState& o : f.objects) o.position += shift;
    const FrameFeatures b = extract_frame_features(f, {});
    const auto pa = a.pairwise();
    const auto pb = b.pairwise();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-9));
  }
}

TEST_CASE("tiny perturbations do not change the attention graph away from cone boundaries") {
  const Simulation sim = simulate(random_scenario(33, {}));
  const AttentionParams p;
  Rng rng(5);
  int compared = 0;
  for (const WorldFrame& f0 : sim.trace.frames) {
    WorldFrame f = f0;
    for (ObjectState& o : f.objects) o.position += Vec3{rng.uniform(-5e-7, 5e-7), rng.uniform(-5e-7, 5e-7), 0};
    bool near_boundary = false;
    // Skip frames near a cone edge or near an offset tie between two candidates.
    for (int a = 0; a < 2; ++a) {
      const AgentState& s = f0.agents[static_cast<std::size_t>(a)];
      std::vector<double> inside;
      for (int e = 0; e < 2 + static_cast<int>(f0.objects.size()); ++e) {
        if (e == a) continue;
        const double ang = angle_between(s.gaze, entity_position(f0, e) - s.head());
        if (std::abs(ang - p.gaze_half_angle) < 1e-5) near_boundary = true;
        if (ang <= p.gaze_half_angle) inside.push_back(ang);
        if (s.pointing) {
          const double pa = angle_between(*s.pointing, entity_position(f0, e) - s.right_hand());
          if (std::abs(pa - p.pointing_half_angle) < 1e-5) near_boundary = true;
        }
      }
      for (std::size_t i = 0; i < inside.size(); ++i) {
        for (std::size_t j = i + 1; j < inside.size(); ++j) {
          if (std::abs(inside[i] - inside[j]) < 1e-5) near_boundary = true;
        }
      }
    }
    if (near_boundary) continue;
    ++compared;
    const AttentionGraph g0 = build_attention_graph(f0, extract_frame_features(f0, sim.trace.occluders, p));
    const AttentionGraph g1 = build_attention_graph(f, extract_frame_features(f, sim.trace.occluders, p));
    CHECK(g0.edges == g1.edges);
  }
  CHECK(compared > 100);
}

TEST_CASE("Haar transform") {
  SUBCASE("step signal of length 8") {
    const std::vector<double> x{0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<double> c = haar_transform(x);
    // approx = 4 / sqrt(8), coarsest detail = (0 - 4) / sqrt(8), all finer details 0
    const std::vector<double> want{std::sqrt(2.0), -std::sqrt(2.0), 0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < 8; ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-15));
  }
  SUBCASE("ramp of length 4") {
    const std::vector<double> c = haar_transform(std::vector<double>{1, 2, 3, 4});
    CHECK(c[0] == doctest::Approx(5.0));
    CHECK(c[1] == doctest::Approx(-2.0));
    CHECK(c[2] == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(c[3] == doctest::Approx(-1.0 / std::sqrt(2.0)));
  }
  SUBCASE("energy and round trip") {
    Rng rng(9);
    for (int n : {1, 2, 4, 16, 64}) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (double& v : x) v = rng.normal();
      const std::vector<double> c = haar_transform(x);
      double ex = 0.0;
      double ec = 0.0;
      for (int i = 0; i < n; ++i) {
        ex += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        ec += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
      }
      CHECK(std::abs(ex - ec) < 1e-9);
      const std::vector<double> back = haar_inverse(c);
      for (int i = 0; i < n; ++i) CHECK(std::abs(back[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) < 1e-12);
    }
  }
  SUBCASE("non-dyadic lengths are rejected") {
    CHECK_THROWS_AS(haar_transform(std::vector<double>{1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(haar_transform(std::vector<double>{}), std::invalid_argument);
  }
}

TEST_CASE("nearest-neighbour resampling") {
  const std::vector<double> x{10, 11, 12, 13, 14};
  CHECK(resample(x, 8) == std::vector<double>{10, 10, 11, 12, 12, 13, 14, 14});
  CHECK(resample(x, 5) == x);
  CHECK(resample(std::vector<double>{7}, 4) == std::vector<double>{7, 7, 7, 7});
}

TEST_CASE("wavelet summary") {
  SUBCASE("constant channel maps to (c, 0, ..., 0)") {
    for (int len : {2, 5, 8, 13, 40}) {
      FeatureMatrix m(len, 2);
      for (int t = 0; t < len; ++t) {
        m.at(t, 0) = 3.0;
        m.at(t, 1) = -1.5;
      }
      const std::vector<double> s = wavelet_summary(m, 0, len);
      REQUIRE(s.size() == 16);
      CHECK(s[0] == doctest::Approx(3.0));
      CHECK(s[8] == doctest::Approx(-1.5));
      for (std::size_t k = 1; k < 8; ++k) {
        CHECK(std::abs(s[k]) < 1e-12);
        CHECK(std::abs(s[8 + k]) < 1e-12);
      }
    }
  }
  SUBCASE("step window") {
    FeatureMatrix m(8, 1);
    for (int t = 4; t < 8; ++t) m.at(t, 0) = 1.0;
    const std::vector<double> s = wavelet_summary(m, 0, 8);
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(-0.5));
    for (std::size_t k = 2; k < 8; ++k) CHECK(std::abs(s[k]) < 1e-15);
  }
  SUBCASE("linearity") {
    Rng rng(12);
    const FeatureMatrix m = test::random_matrix(23, 3, rng);
    FeatureMatrix m2 = m;
    for (double& v : m2.data) v *= -2.5;
    const std::vector<double> a = wavelet_summary(m, 2, 21);
    const std::vector<double> b = wavelet_summary(m2, 2, 21);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(-2.5 * a[i]).epsilon(1e-12));
  }
  SUBCASE("length independent of duration, short windows rejected") {
    Rng rng(13);
    const FeatureMatrix m = test::random_matrix(50, 4, rng);
    CHECK(wavelet_summary(m, 0, 3).size() == wavelet_summary(m, 0, 50).size());
    CHECK_THROWS_AS(wavelet_summary(m, 4, 5), std::invalid_argument);
  }
}

TEST_CASE("feature distance") {
  CHECK(feature_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
  CHECK(feature_distance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(feature_distance(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(10), b(10), c(10);
    for (std::size_t i = 0; i < 10; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
      c[i] = rng.normal();
    }
    long double s = 0.0L;
    for (std::size_t i = 0; i < 10; ++i) s += static_cast<long double>(a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(feature_distance(a, b) - static_cast<double>(std::sqrt(s))) < 1e-12);
    CHECK(feature_distance(a, b) == feature_distance(b, a));
    CHECK(feature_distance(a, c) <= feature_distance(a, b) + feature_distance(b, c) + 1e-12);
  }
}

TEST_CASE("event descriptor is a folded window mean") {
  Rng rng(3);
  const FeatureMatrix rows = test::random_matrix(30, descriptor_row_dimension(), rng, 0, 1);
  const std::vector<double> d = event_descriptor(rows, 5, 17);
  CHECK(static_cast<int>(d.size()) == descriptor_dimension());
  std::vector<double> mean(static_cast<std::size_t>(rows.cols), 0.0);
  for (int t = 5; t < 17; ++t) {
    for (int c = 0; c < rows.cols; ++c) mean[static_cast<std::size_t>(c)] += rows.at(t, c) / 12.0;
  }
  const std::vector<double> f = fold_descriptor(mean);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(f[i] == doctest::Approx((mean[i] + mean[6 + i]) / 2));
    CHECK(f[6 + i] == doctest::Approx(std::abs(mean[i] - mean[6 + i])));
  }
  for (std::size_t i = 12; i < 20; ++i) CHECK(f[i] == doctest::Approx(mean[i]));
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(f[i]).epsilon(1e-12));
}
