#include "generators.hpp"

#include "locrobust/core.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace locrobust;

namespace {

void check_pose(const Pose2D& a, const Pose2D& b, double tol = 1e-9) {
  CHECK(std::abs(a.easting() - b.easting()) <= tol);
  CHECK(std::abs(a.northing() - b.northing()) <= tol);
  CHECK(std::abs(angle_diff(a.heading(), b.heading())) <= tol);
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == kPi);
  CHECK(wrap_angle(kPi) == kPi);
  CHECK(wrap_angle(-3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(kTwoPi + 0.25) == doctest::Approx(0.25));
  CHECK_THROWS_AS(wrap_angle(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(wrap_angle(std::numeric_limits<double>::infinity()), std::domain_error);

  auto g = testgen::rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double t = testgen::uniform(g, -100.0, 100.0);
    const double w = wrap_angle(t);
    REQUIRE(w > -kPi);
    REQUIRE(w <= kPi);
    // Same angle modulo 2 pi.
    CHECK(std::abs(std::remainder(w - t, kTwoPi)) < 1e-9);
  }
}

TEST_CASE("angle_diff takes the short way across the seam") {
  CHECK(angle_diff(3.1, -3.1) == doctest::Approx(6.2 - kTwoPi));
  CHECK(std::abs(angle_diff(-3.1, 3.1)) < 0.1);
}

TEST_CASE("pose constructor wraps heading") {
  const Pose2D p(1.0, 2.0, 5 * kPi);
  CHECK(p.heading() == doctest::Approx(kPi));
  CHECK(Pose2D(0, 0, -kPi).heading() == kPi);
}

TEST_CASE("compose examples") {
  const Pose2D p(3.0, -2.0, 0.7);
  check_pose(compose(Pose2D::identity(), p), p);
  check_pose(compose(p, Pose2D::identity()), p);
  check_pose(compose(Pose2D(0, 0, kPi / 2), Pose2D(1, 0, 0)), Pose2D(0, 1, kPi / 2));
}

TEST_CASE("group properties on random poses") {
  auto g = testgen::rng(2);
  for (int i = 0; i < 500; ++i) {
    const Pose2D a = testgen::pose(g);
    const Pose2D b = testgen::pose(g);
    const Pose2D c = testgen::pose(g);
    check_pose(compose(a, inverse(a)), Pose2D::identity());
    check_pose(compose(inverse(a), a), Pose2D::identity());
    check_pose(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9);
    check_pose(compose(a, between(a, b)), b, 1e-9);
    const Pose2D ab = compose(a, b);
    REQUIRE(ab.heading() > -kPi);
    REQUIRE(ab.heading() <= kPi);
  }
}

TEST_CASE("transform_frame_to_global examples") {
  FeatureFrame f;
  f.observations.push_back({FeatureClass::Corner, Vec2(3, 4), std::nullopt});
  auto out = transform_frame_to_global(Pose2D::identity(), f);
  CHECK(out[0].point.isApprox(Vec2(3, 4)));
  CHECK(out[0].cls == FeatureClass::Corner);
  out = transform_frame_to_global(Pose2D(10, 0, 0), f);
  CHECK(out[0].point.isApprox(Vec2(13, 4)));
  f.observations[0].point = Vec2(1, 0);
  out = transform_frame_to_global(Pose2D(0, 0, kPi), f);
  CHECK((out[0].point - Vec2(-1, 0)).norm() < 1e-12);
}

TEST_CASE("feature class names") {
  CHECK(to_string(FeatureClass::Pole) == "pole");
  CHECK(parse_feature_class("corner") == FeatureClass::Corner);
  CHECK_THROWS_AS(parse_feature_class("tree"), std::invalid_argument);
}

TEST_CASE("feature map validates and answers nearest queries exactly") {
  CHECK_THROWS_AS(FeatureMap({{1, FeatureClass::Pole, Vec2(0, 0)}, {1, FeatureClass::Pole, Vec2(1, 0)}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(FeatureMap({{1, FeatureClass::Pole, Vec2(std::nan(""), 0)}}), std::invalid_argument);

  auto g = testgen::rng(3);
  std::vector<MapFeature> feats;
  for (int i = 0; i < 300; ++i) {
    feats.push_back({i, i % 3 == 0 ? FeatureClass::Corner : FeatureClass::Pole,
                     Vec2(testgen::uniform(g, -60, 60), testgen::uniform(g, -60, 60))});
  }
  const FeatureMap map(feats);
  CHECK(map.count(FeatureClass::Corner) + map.count(FeatureClass::Pole) == 300);
  for (int q = 0; q < 1000; ++q) {
    const Vec2 p(testgen::uniform(g, -70, 70), testgen::uniform(g, -70, 70));
    const auto cls = q % 2 ? FeatureClass::Pole : FeatureClass::Corner;
    const double radius = testgen::uniform(g, 0.5, 12.0);
    // Linear scan reference.
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (feats[i].cls != cls) continue;
      const double d = (feats[i].position - p).norm();
      if (d <= radius && d < best_d) {
        best_d = d;
        best = i;
      }
    }
    REQUIRE(map.nearest(cls, p, radius) == best);
  }

  const std::vector<FeatureClass> poles{FeatureClass::Pole};
  const auto only = map.restricted_to(poles);
  CHECK(only.count(FeatureClass::Corner) == 0);
  CHECK(only.count(FeatureClass::Pole) == map.count(FeatureClass::Pole));
}

TEST_CASE("nearest breaks distance ties by lowest index") {
  const FeatureMap map({{5, FeatureClass::Pole, Vec2(1, 0)}, {2, FeatureClass::Pole, Vec2(-1, 0)}});
  CHECK(map.nearest(FeatureClass::Pole, Vec2(0, 0), 2.0) == std::size_t{0});
  CHECK_FALSE(map.nearest(FeatureClass::Corner, Vec2(0, 0), 2.0).has_value());
  CHECK_FALSE(map.nearest(FeatureClass::Pole, Vec2(0, 0), 0.5).has_value());
}

TEST_CASE("trajectory arc length is the sum of planar segment lengths") {
  auto g = testgen::rng(4);
  std::vector<double> t;
  std::vector<Pose2D> poses;
  double expected = 0.0;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i * 0.5);
    Pose2D p(testgen::uniform(g, -5, 5), testgen::uniform(g, -5, 5), testgen::uniform(g, -3, 3));
    if (i % 10 == 3) p = Pose2D(poses.back().position(), p.heading());  // turn on the spot
    if (!poses.empty()) expected += (p.position() - poses.back().position()).norm();
    poses.push_back(p);
  }
  const auto traj = Trajectory::from_poses(t, poses);
  CHECK(traj.front().arc_length == 0.0);
  CHECK(traj.length() == doctest::Approx(expected).epsilon(1e-12));
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj.samples()[i].arc_length >= traj.samples()[i - 1].arc_length);
  CHECK(traj.samples()[3].arc_length == traj.samples()[2].arc_length);

  const std::vector<double> bad_t{0.0, 0.0};
  const std::vector<Pose2D> two{Pose2D(), Pose2D(1, 0, 0)};
  CHECK_THROWS_AS(Trajectory::from_poses(bad_t, two), std::invalid_argument);
}

TEST_CASE("trajectory interpolation") {
  const std::vector<double> t{0.0, 1.0, 2.0};
  const std::vector<Pose2D> p{Pose2D(0, 0, 3.0), Pose2D(10, 0, -3.0), Pose2D(10, 10, 0.0)};
  const auto traj = Trajectory::from_poses(t, p);
  const Pose2D mid = traj.pose_at_arc(5.0);
  CHECK(mid.easting() == doctest::Approx(5.0));
  // Shortest-path heading interpolation goes through pi, not through 0.
  CHECK(std::abs(mid.heading()) == doctest::Approx(kPi));
  CHECK(traj.arc_at_time(1.5) == doctest::Approx(15.0));
  CHECK(traj.pose_at_time(-1.0) == traj.front().pose);
  CHECK(traj.pose_at_arc(1e6) == traj.back().pose);
}

TEST_CASE("arc intervals") {
  const ArcInterval a{0, 10};
  const ArcInterval b{5, 20};
  CHECK(overlap_length(a, b) == 5.0);
  CHECK(overlap_length(a, {11, 12}) == 0.0);
  CHECK(a.contains(10.0));
  CHECK(b.length() == 15.0);
}
