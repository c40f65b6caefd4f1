#include "generators.hpp"

#include "locrobust/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace locrobust;
using namespace locrobust::metrics;

namespace {

VptGridSpec small_grid() {
  VptGridSpec g;
  g.xy_step = 1.0;
  g.xy_extent = 3.0;
  g.heading_step = 0.1;
  g.heading_extent = 0.2;
  return g;
}

// Noise-free frame of every map feature within `range` of `pose`.
FeatureFrame observe(const FeatureMap& map, const Pose2D& pose, double range = 12.0) {
  FeatureFrame f;
  f.true_pose = pose;
  const Pose2D to_local = inverse(pose);
  for (const auto& m : map.features()) {
    const Vec2 local = transform_point(to_local, m.position);
    if (local.norm() <= range) f.observations.push_back({m.cls, local, m.id});
  }
  return f;
}

FeatureMap random_map(std::mt19937_64& g, int n, double box) {
  std::vector<MapFeature> feats;
  for (int i = 0; i < n; ++i) {
    feats.push_back({i, i % 2 ? FeatureClass::Corner : FeatureClass::Pole,
                     Vec2(testgen::uniform(g, -box, box), testgen::uniform(g, -box, box))});
  }
  return FeatureMap(feats);
}

std::size_t naive_count(const VptBoundary& b, int slice) {
  std::size_t n = 0;
  const int h = b.xy_half();
  for (int ix = -h; ix <= h; ++ix) {
    for (int iy = -h; iy <= h; ++iy) {
      int ok = 0;
      for (int ih = -slice; ih <= slice; ++ih) ok += b.valid(ix, iy, ih) ? 1 : 0;
      if (ok == 2 * slice + 1) ++n;
    }
  }
  return n;
}

std::vector<double> random_events(std::mt19937_64& g, double length, int n) {
  std::vector<double> e;
  for (int i = 0; i < n; ++i) e.push_back(testgen::uniform(g, 0.0, length));
  return e;
}

}  // namespace

// --- VPT -------------------------------------------------------------------

TEST_CASE("grid spec validation and lattice shape") {
  VptGridSpec g = small_grid();
  CHECK(g.xy_half() == 3);
  CHECK(g.heading_half() == 2);
  const VptBoundary b(12.0, Pose2D(), g);
  CHECK(b.cell_count() == 7 * 7 * 5);
  CHECK_THROWS_AS(b.valid(4, 0, 0), std::out_of_range);
  g.xy_extent = 0.5;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = small_grid();
  g.heading_step = 0.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  // Default grid: 1 m and 0.1 rad.
  const VptGridSpec d;
  CHECK(d.xy_step == 1.0);
  CHECK(d.heading_step == doctest::Approx(0.1));
}

TEST_CASE("vpt_radius examples") {
  VptBoundary b(0.0, Pose2D(), small_grid());
  CHECK(vpt_radius(b, 0.1) == 0.0);
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = -1; iy <= 1; ++iy) {
      for (int ih = -2; ih <= 2; ++ih) b.set_valid(ix, iy, ih, true);
    }
  }
  CHECK(vpt_radius(b, 0.1) == doctest::Approx(3.0));
  CHECK(vpt_radius(b, 0.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(vpt_radius(b, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(vpt_radius(b, 0.3), std::invalid_argument);

  // One cell valid at zero heading only: counted without a slice, not with one.
  b.set_valid(3, 3, 0, true);
  CHECK(vpt_radius(b, 0.0) == doctest::Approx(std::sqrt(10.0)));
  CHECK(vpt_radius(b, 0.1) == doctest::Approx(3.0));
  CHECK(vpt_radius(b, 0.1, SliceRule::AnyHeading) == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("vpt_radius matches a naive counter and shrinks with the slice") {
  auto g = testgen::rng(41);
  for (int c = 0; c < 300; ++c) {
    VptGridSpec spec;
    spec.xy_step = testgen::uniform(g, 0.25, 2.0);
    spec.xy_extent = spec.xy_step * testgen::uniform_int(g, 1, 6);
    spec.heading_step = 0.1;
    spec.heading_extent = 0.1 * testgen::uniform_int(g, 1, 4);
    VptBoundary b(0.0, Pose2D(), spec);
    const double p = testgen::uniform(g, 0.0, 1.0);
    const int hx = b.xy_half();
    const int hh = b.heading_half();
    for (int ix = -hx; ix <= hx; ++ix) {
      for (int iy = -hx; iy <= hx; ++iy) {
        for (int ih = -hh; ih <= hh; ++ih) b.set_valid(ix, iy, ih, testgen::uniform(g, 0.0, 1.0) < p);
      }
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= hh; ++s) {
      const double r = vpt_radius(b, s * 0.1);
      CHECK(r == doctest::Approx(std::sqrt(static_cast<double>(naive_count(b, s)) * spec.xy_step * spec.xy_step)));
      CHECK(r <= prev);
      prev = r;
    }
  }
}

TEST_CASE("vpt_evaluate on an empty frame is all invalid") {
  const FeatureMap map({{1, FeatureClass::Pole, Vec2(3, 0)}});
  FeatureFrame f;
  f.true_pose = Pose2D();
  const auto b = vpt_evaluate(f, map, Pose2D(), small_grid(), {}, {});
  CHECK(vpt_radius(b, 0.0) == 0.0);
  CHECK_FALSE(b.zero_offset_valid());
}

TEST_CASE("vpt_evaluate: exact prior is valid in a dense constellation") {
  auto g = testgen::rng(42);
  for (int c = 0; c < 20; ++c) {
    const auto map = random_map(g, 40, 15.0);
    const Pose2D truth(testgen::uniform(g, -3, 3), testgen::uniform(g, -3, 3), testgen::uniform(g, -kPi, kPi));
    const auto frame = observe(map, truth);
    if (frame.observations.size() < 6) continue;
    const auto b = vpt_evaluate(frame, map, truth, small_grid(), {}, {});
    CHECK(b.zero_offset_valid());
    CHECK(vpt_radius(b, 0.1) > 0.0);
  }
}

TEST_CASE("square of poles: a quarter-turn prior converges to the symmetric wrong pose") {
  const FeatureMap map({{0, FeatureClass::Pole, Vec2(3, 3)},
                        {1, FeatureClass::Pole, Vec2(-3, 3)},
                        {2, FeatureClass::Pole, Vec2(-3, -3)},
                        {3, FeatureClass::Pole, Vec2(3, -3)}});
  const Pose2D truth;
  const auto frame = observe(map, truth);
  REQUIRE(frame.observations.size() == 4);
  // Rotating the frame a quarter turn about the centre maps every pole onto
  // another pole, so the iteration is already at a zero-residual fixed point.
  const auto m = matcher::icp_match(Pose2D(0, 0, kPi / 2), frame, map, {});
  REQUIRE(m.converged);
  CHECK(m.rms < 1e-9);
  CHECK(std::abs(angle_diff(m.pose.heading(), kPi / 2)) < 1e-9);
  CHECK(m.pose.position().norm() < 1e-9);

  VptGridSpec grid;
  grid.xy_step = 1.0;
  grid.xy_extent = 1.0;
  grid.heading_step = kPi / 2;
  grid.heading_extent = kPi / 2;
  const auto b = vpt_evaluate(frame, map, truth, grid, {}, {});
  CHECK(b.zero_offset_valid());
  CHECK_FALSE(b.valid(0, 0, 1));
  CHECK_FALSE(b.valid(0, 0, -1));
}

TEST_CASE("radius is invariant under mirroring the constellation") {
  auto g = testgen::rng(43);
  for (int c = 0; c < 10; ++c) {
    const auto map = random_map(g, 30, 12.0);
    std::vector<MapFeature> mirrored = map.features();
    for (auto& f : mirrored) f.position.y() = -f.position.y();
    const FeatureMap mirror_map(mirrored);
    const Pose2D truth;
    const auto a = vpt_evaluate(observe(map, truth), map, truth, small_grid(), {}, {});
    const auto b = vpt_evaluate(observe(mirror_map, truth), mirror_map, truth, small_grid(), {}, {});
    for (int ix = -3; ix <= 3; ++ix) {
      for (int iy = -3; iy <= 3; ++iy) {
        for (int ih = -2; ih <= 2; ++ih) CHECK(a.valid(ix, iy, ih) == b.valid(ix, -iy, -ih));
      }
    }
    CHECK(vpt_radius(a, 0.1) == vpt_radius(b, 0.1));
    CHECK(vpt_radius(a, 0.2) == vpt_radius(b, 0.2));
  }
}

TEST_CASE("vpt_evaluate does not depend on the thread count") {
  auto g = testgen::rng(44);
  const auto map = random_map(g, 40, 15.0);
  const Pose2D truth(1.0, -2.0, 0.4);
  auto frame = observe(map, truth);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (auto& o : frame.observations) o.point += Vec2(noise(g), noise(g));
  const auto a = vpt_evaluate(frame, map, truth, small_grid(), {}, {}, 1, 5.0);
  const auto b = vpt_evaluate(frame, map, truth, small_grid(), {}, {}, 3, 5.0);
  const auto c = vpt_evaluate(frame, map, truth, small_grid(), {}, {}, 8, 5.0);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a.arc_length() == 5.0);
}

TEST_CASE("vpt window aggregates") {
  const std::vector<double> arcs{0.5, 1.0, 2.0, 7.0, 8.0, 13.0};
  const std::vector<double> radii{0.0, 2.0, 4.0, 5.0, 5.0, 0.0};
  const auto w = vpt_windows(arcs, radii, 6.0);
  REQUIRE(w.size() == 3);
  CHECK(w[0].interval.begin == 0.0);
  CHECK(w[0].interval.end == 6.0);
  CHECK(w[0].span_min == 2.0);
  CHECK(w[0].span_max == 4.0);
  CHECK(w[0].median == 3.0);
  CHECK(w[0].frames == 3);
  CHECK(w[1].span_min == 5.0);
  CHECK(w[1].span_max == 5.0);
  CHECK(w[1].median == 5.0);
  CHECK(w[2].interval.begin == 12.0);
  CHECK(w[2].median == 0.0);
  CHECK(w[2].span_max == 0.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({}) == 0.0);
}

TEST_CASE("vpt_profile radii and ordering") {
  auto g = testgen::rng(45);
  const auto map = random_map(g, 80, 30.0);
  std::vector<LocatedFrame> frames;
  for (int i = 0; i < 5; ++i) {
    const Pose2D p(-10.0 + 5.0 * i, 0.0, 0.0);
    frames.push_back({5.0 * i, observe(map, p)});
  }
  VptProfileConfig cfg;
  cfg.grid = small_grid();
  const auto prof = vpt_profile(frames, map, cfg, {}, 2);
  REQUIRE(prof.radii.size() == 5);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto b = vpt_evaluate(frames[i].frame, map, *frames[i].frame.true_pose, cfg.grid, {}, cfg.tolerance);
    CHECK(prof.radii[i] == vpt_radius(b, cfg.theta_slice));
    CHECK(prof.arc_lengths[i] == frames[i].arc_length);
  }
  std::swap(frames[0], frames[1]);
  CHECK_THROWS_AS(vpt_profile(frames, map, cfg, {}), std::invalid_argument);
  frames = {{0.0, FeatureFrame{}}};
  CHECK_THROWS_AS(vpt_profile(frames, map, cfg, {}), std::invalid_argument);
}

// --- PAU -------------------------------------------------------------------

TEST_CASE("PAU: nine windows, three without updates") {
  const std::vector<double> events{1.5, 4.5, 6.5};
  const std::vector<double> l{2.0};
  const auto c = pau_curve(events, 10.0, l, 1.0);
  CHECK(pau_start_count(10.0, 2.0, 1.0) == 9);
  CHECK(c.probabilities[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("PAU trivial curves") {
  const auto lengths = length_grid(0.5, 10.0, 0.5);
  REQUIRE(lengths.size() == 20);
  const std::vector<double> none;
  for (double p : pau_curve(none, 100.0, lengths, 0.5).probabilities) CHECK(p == 1.0);
  std::vector<double> dense;
  for (int k = 0; k <= 400; ++k) dense.push_back(0.25 + 0.25 * k);
  for (double p : pau_curve(dense, 100.0, lengths, 0.5).probabilities) CHECK(p == 0.0);
}

TEST_CASE("PAU windows are open intervals") {
  const std::vector<double> l{1.0};
  // The event sits exactly on window endpoints for every start.
  const std::vector<double> at_ends{3.0};
  const auto c = pau_curve(at_ends, 10.0, l, 1.0);
  CHECK(c.probabilities[0] == 1.0);
  const std::vector<double> inside{3.5};
  CHECK(pau_curve(inside, 10.0, l, 1.0).probabilities[0] == doctest::Approx(9.0 / 10.0));
}

TEST_CASE("PAU wrap option lets windows cross the loop seam") {
  const std::vector<double> events{0.5};
  const std::vector<double> l{2.0};
  const auto open = pau_curve(events, 10.0, l, 1.0);
  PauOptions wrap;
  wrap.wrap = true;
  const auto closed = pau_curve(events, 10.0, l, 1.0, wrap);
  CHECK(pau_start_count(10.0, 2.0, 1.0, true) == 10);
  CHECK(open.probabilities[0] == doctest::Approx(8.0 / 9.0));
  // Starts 0 and 9 (window (9, 11) reaches 0.5 after the seam) are covered.
  CHECK(closed.probabilities[0] == doctest::Approx(8.0 / 10.0));
}

TEST_CASE("PAU input errors") {
  const std::vector<double> none;
  const std::vector<double> too_long{20.0};
  CHECK_THROWS_AS(pau_curve(none, 10.0, too_long, 1.0), std::invalid_argument);
  const std::vector<double> unsorted{2.0, 1.0};
  CHECK_THROWS_AS(pau_curve(none, 10.0, unsorted, 1.0), std::invalid_argument);
  const std::vector<double> ok{1.0};
  CHECK_THROWS_AS(pau_curve(none, 10.0, ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pau_curve(none, 10.0, std::vector<double>{}, 1.0), std::invalid_argument);
}

TEST_CASE("PAU counts accepted events only") {
  using filter::UpdateEvent;
  const std::vector<UpdateEvent> ev{{0.0, 2.5, filter::UpdateSource::Icp, false}, {0.0, 6.5, filter::UpdateSource::Icp, true}};
  const std::vector<double> l{2.0};
  const std::vector<double> arcs{6.5};
  CHECK(pau_curve(ev, 10.0, l, 1.0).probabilities == pau_curve(arcs, 10.0, l, 1.0).probabilities);
}

TEST_CASE("PAU curves are non-increasing and dominated by supersets") {
  auto g = testgen::rng(46);
  for (int c = 0; c < 300; ++c) {
    const double length = testgen::uniform(g, 20.0, 300.0);
    const double stride = testgen::uniform(g, 0.1, 2.0);
    const auto lengths = length_grid(stride, std::min(30.0, 0.5 * length), testgen::uniform(g, 0.2, 2.0));
    auto a = random_events(g, length, testgen::uniform_int(g, 0, 60));
    auto b = a;
    const auto extra = random_events(g, length, testgen::uniform_int(g, 1, 20));
    b.insert(b.end(), extra.begin(), extra.end());
    const auto pa = pau_curve(a, length, lengths, stride);
    const auto pb = pau_curve(b, length, lengths, stride);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      CHECK(pa.probabilities[i] >= 0.0);
      CHECK(pa.probabilities[i] <= 1.0);
      CHECK(pb.probabilities[i] <= pa.probabilities[i]);
      if (i > 0) {
        CHECK(pa.probabilities[i] <= pa.probabilities[i - 1]);
        CHECK(pb.probabilities[i] <= pb.probabilities[i - 1]);
      }
    }
    if (lengths.size() >= 2) CHECK(pau_area_between(pa, pb) >= 0.0);
  }
}

TEST_CASE("pau_cutoff examples") {
  PauCurve c;
  c.lengths = {1.0, 4.0, 6.0};
  c.probabilities = {0.5, 0.05, 0.01};
  CHECK(pau_cutoff(c, 0.05) == 4.0);
  c.probabilities = {1.0, 1.0, 1.0};
  CHECK_FALSE(pau_cutoff(c, 0.05).has_value());
  c.probabilities = {0.0, 0.0, 0.0};
  CHECK(pau_cutoff(c, 0.05) == 1.0);
  CHECK_THROWS_AS(pau_cutoff(c, 1.0), std::invalid_argument);
}

TEST_CASE("pau_area examples") {
  PauCurve c;
  c.lengths = {0.0, 2.5, 5.0, 10.0};
  c.probabilities = {1.0, 1.0, 1.0, 1.0};
  CHECK(pau_area(c) == doctest::Approx(10.0));
  PauCurve z = c;
  z.probabilities = {0.0, 0.0, 0.0, 0.0};
  CHECK(pau_area(z) == 0.0);
  CHECK(pau_area_between(c, z) == doctest::Approx(10.0));
  PauCurve other = z;
  other.lengths = {0.0, 1.0, 5.0, 10.0};
  CHECK_THROWS_AS(pau_area_between(c, other), std::invalid_argument);
  PauCurve one;
  one.lengths = {1.0};
  one.probabilities = {1.0};
  CHECK_THROWS_AS(pau_area(one), std::invalid_argument);
  // Trapezoid on a ramp.
  PauCurve ramp;
  ramp.lengths = {0.0, 1.0};
  ramp.probabilities = {1.0, 0.0};
  CHECK(pau_area(ramp) == doctest::Approx(0.5));
}

TEST_CASE("length_grid") {
  const auto g = length_grid(0.5, 2.0, 0.5);
  CHECK(g == std::vector<double>{0.5, 1.0, 1.5, 2.0});
  CHECK(length_grid(0.1, 30.0, 0.1).size() == 300);
  CHECK_THROWS_AS(length_grid(0.0, 1.0, 0.0), std::invalid_argument);
}

// --- Robustness margin ------------------------------------------------------

TEST_CASE("margin: radius above bound everywhere") {
  ArcSeries r{{0.0, 50.0, 100.0}, {10.0, 10.0, 10.0}};
  ArcSeries b{{0.0, 100.0}, {2.0, 2.0}};
  const auto m = robustness_margin(r, b, 1.0);
  REQUIRE(m.arc.size() == 101);
  for (double v : m.margin) CHECK(v == doctest::Approx(8.0));
  CHECK(m.flagged_intervals.empty());
}

TEST_CASE("margin: zero-radius zone is flagged") {
  ArcSeries r;
  for (int s = 0; s <= 100; ++s) {
    r.arc.push_back(s);
    r.value.push_back(s >= 40 && s <= 60 ? 0.0 : 5.0);
  }
  ArcSeries b{{0.0, 100.0}, {0.2, 1.0}};
  const auto m = robustness_margin(r, b, 1.0);
  REQUIRE(m.flagged_intervals.size() == 1);
  CHECK(m.flagged_intervals[0].begin == doctest::Approx(39.5));
  CHECK(m.flagged_intervals[0].end == doctest::Approx(60.5));
  CHECK(flagged_coverage(m, {40.0, 60.0}) == doctest::Approx(20.0));
  CHECK(flagged_coverage(m, {0.0, 10.0}) == 0.0);
  CHECK(m.bound[50] == doctest::Approx(0.6));
}

TEST_CASE("margin: flagged exactly when radius <= bound") {
  auto g = testgen::rng(47);
  for (int c = 0; c < 100; ++c) {
    ArcSeries r;
    ArcSeries b;
    for (int k = 0; k <= 60; ++k) {
      r.arc.push_back(k * 2.0);
      r.value.push_back(testgen::uniform(g, 0.0, 1.0) < 0.3 ? 0.0 : testgen::uniform(g, 0.0, 5.0));
      b.arc.push_back(k * 2.0 + testgen::uniform(g, -0.5, 0.5));
      b.value.push_back(testgen::uniform(g, 0.0, 3.0));
    }
    std::sort(b.arc.begin(), b.arc.end());
    const auto m = robustness_margin(r, b, 0.5);
    double total = 0.0;
    for (std::size_t i = 0; i < m.arc.size(); ++i) {
      CHECK(m.margin[i] == m.radius[i] - m.bound[i]);
      CHECK((m.flagged[i] != 0) == (m.margin[i] <= 0.0));
      if (i > 0) CHECK(m.arc[i] - m.arc[i - 1] == doctest::Approx(0.5));
    }
    for (const auto& iv : m.flagged_intervals) {
      CHECK(iv.end > iv.begin);
      total += iv.length();
    }
    CHECK(total <= m.arc.back() - m.arc.front() + 0.5 + 1e-9);
  }
}

TEST_CASE("margin input errors") {
  ArcSeries r{{0.0, 10.0}, {1.0, 1.0}};
  ArcSeries b{{20.0, 30.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(robustness_margin(r, b), std::invalid_argument);
  CHECK_THROWS_AS(robustness_margin(r, ArcSeries{}), std::invalid_argument);
  CHECK_THROWS_AS(robustness_margin(r, r, 0.0), std::invalid_argument);
}

TEST_CASE("position bound series keeps the last state per arc length") {
  filter::StateLogEntry a;
  a.arc_length = 0.0;
  a.state.covariance = filter::Vec3(1.0, 4.0, 0.0).asDiagonal();
  filter::StateLogEntry b = a;
  b.arc_length = 1.0;
  filter::StateLogEntry c = b;
  c.state.covariance = filter::Vec3(0.25, 0.01, 0.0).asDiagonal();
  const std::vector<filter::StateLogEntry> states{a, b, c};
  const auto s = position_bound_series(states);
  REQUIRE(s.arc.size() == 2);
  CHECK(s.value[0] == doctest::Approx(1.96 * 2.0));
  CHECK(s.value[1] == doctest::Approx(1.96 * 0.5));
}
