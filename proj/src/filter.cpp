#include "locrobust/filter.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <string>

namespace locrobust::filter {

namespace {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

// Index of the heading component in every filter-side vector.
constexpr int kHeading = 2;

template <int N>
struct SigmaWeights {
  double lambda;
  double mean0;
  double cov0;
  double rest;
};

template <int N>
SigmaWeights<N> make_weights(const UkfParams& p) {
  const double n = N;
  const double lambda = p.alpha * p.alpha * (n + p.kappa) - n;
  const double mean0 = lambda / (n + lambda);
  return {lambda, mean0, mean0 + (1.0 - p.alpha * p.alpha + p.beta), 0.5 / (n + lambda)};
}

// Symmetric square root of a PSD matrix; negative round-off eigenvalues are
// clipped so singular covariances still produce valid sigma points.
template <int N>
Mat<N> psd_sqrt(const Mat<N>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<N>> eig(m);
  const Vec<N> roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

template <int N>
std::array<Vec<N>, 2 * N + 1> sigma_points(const Vec<N>& mean, const Mat<N>& cov, double lambda) {
  const Mat<N> root = psd_sqrt<N>((static_cast<double>(N) + lambda) * cov);
  std::array<Vec<N>, 2 * N + 1> pts;
  pts[0] = mean;
  for (int i = 0; i < N; ++i) {
    pts[1 + i] = mean + root.col(i);
    pts[1 + N + i] = mean - root.col(i);
  }
  return pts;
}

// Weighted mean of 3-vectors (easting, northing, heading), computed as an
// offset from the central point; heading uses the unit-vector mean.
template <std::size_t K>
Vec3 weighted_state_mean(const std::array<Vec3, K>& pts, double w0, double w) {
  Vec2 offset = Vec2::Zero();
  double s = 0.0;
  double c = w0;
  for (std::size_t i = 1; i < K; ++i) {
    offset += w * (pts[i].template head<2>() - pts[0].template head<2>());
    const double d = angle_diff(pts[i](kHeading), pts[0](kHeading));
    s += w * std::sin(d);
    c += w * std::cos(d);
  }
  // A negative central weight can flip the resultant once the heading spread
  // is wide; the outer points alone then give the direction.
  if (!(c > 0.0)) {
    s = 0.0;
    c = 0.0;
    for (std::size_t i = 1; i < K; ++i) {
      const double d = angle_diff(pts[i](kHeading), pts[0](kHeading));
      s += std::sin(d);
      c += std::cos(d);
    }
  }
  Vec3 mean;
  mean.template head<2>() = pts[0].template head<2>() + offset;
  mean(kHeading) = wrap_angle(pts[0](kHeading) + std::atan2(s, c));
  return mean;
}

Vec3 state_residual(const Vec3& a, const Vec3& b) {
  Vec3 r = a - b;
  r(kHeading) = angle_diff(a(kHeading), b(kHeading));
  return r;
}

Vec3 to_vec(const Pose2D& p) { return {p.easting(), p.northing(), p.heading()}; }
Pose2D to_pose(const Vec3& v) { return {v(0), v(1), v(2)}; }

template <int N>
Mat<N> symmetrised(const Mat<N>& m) {
  return 0.5 * (m + m.transpose());
}

template <int N>
bool nearly_singular(const Mat<N>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<N>> eig(m);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  return !(hi > 0.0) || lo <= 1e-14 * hi;
}

void require_psd(const Mat3& cov, const char* who) {
  if (!cov.allFinite() || !is_psd(cov)) {
    throw std::invalid_argument(std::string(who) + ": covariance is not positive semi-definite");
  }
}

struct InitialFix {
  Pose2D pose;
  double baseline = 0.0;
};

std::optional<InitialFix> find_initial_fix(std::span<const GpsReading> readings, double speed_threshold) {
  for (std::size_t i = readings.size(); i-- > 1;) {
    const auto& a = readings[i - 1];
    const auto& b = readings[i];
    const double dt = b.timestamp - a.timestamp;
    if (!(dt > 0.0)) continue;
    const double de = b.easting - a.easting;
    const double dn = b.northing - a.northing;
    const double dist = std::hypot(de, dn);
    if (dist / dt > speed_threshold) return InitialFix{Pose2D(b.easting, b.northing, std::atan2(dn, de)), dist};
  }
  return std::nullopt;
}

}  // namespace

double min_eigenvalue(const Mat3& covariance) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(symmetrised<3>(covariance), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool is_psd(const Mat3& covariance, double tol) {
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, covariance.cwiseAbs().maxCoeff())) {
    return false;
  }
  return min_eigenvalue(covariance) >= -tol;
}

FilterState predict(const FilterState& state, const OdometryIncrement& odom, const ProcessNoise& noise,
                    const UkfParams& params) {
  require_psd(state.covariance, "predict");
  if (odom.timestamp < state.timestamp) throw std::invalid_argument("predict: odometry older than state");

  constexpr int kAug = 5;
  const double travelled = std::abs(odom.distance);
  Vec<kAug> mean = Vec<kAug>::Zero();
  mean.head<3>() = to_vec(state.pose);
  Mat<kAug> cov = Mat<kAug>::Zero();
  cov.topLeftCorner<3, 3>() = state.covariance;
  cov(3, 3) = noise.distance_sigma * noise.distance_sigma * travelled;
  cov(4, 4) = noise.heading_sigma * noise.heading_sigma * travelled;

  const auto w = make_weights<kAug>(params);
  const auto chi = sigma_points<kAug>(mean, cov, w.lambda);
  std::array<Vec3, 2 * kAug + 1> moved;
  for (std::size_t i = 0; i < chi.size(); ++i) {
    const auto& x = chi[i];
    const double d = odom.distance + x(3);
    const double dh = odom.heading_change + x(4);
    const double mid = x(kHeading) + 0.5 * dh;
    moved[i] = Vec3(x(0) + d * std::cos(mid), x(1) + d * std::sin(mid), wrap_angle(x(kHeading) + dh));
  }

  const Vec3 predicted = weighted_state_mean(moved, w.mean0, w.rest);
  Mat3 out_cov = Mat3::Zero();
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const Vec3 r = state_residual(moved[i], predicted);
    out_cov += (i == 0 ? w.cov0 : w.rest) * r * r.transpose();
  }
  return {to_pose(predicted), symmetrised<3>(out_cov), odom.timestamp};
}

UpdateOutcome update_pose(const FilterState& state, const Pose2D& observation, const Mat3& observation_cov,
                          double gate, const UkfParams& params) {
  require_psd(state.covariance, "update_pose");
  require_psd(observation_cov, "update_pose (observation)");
  UpdateOutcome out{state, UpdateStatus::Rejected, 0.0, Vec3::Zero()};

  const auto w = make_weights<3>(params);
  const auto chi = sigma_points<3>(to_vec(state.pose), state.covariance, w.lambda);
  const Vec3 z_mean = weighted_state_mean(chi, w.mean0, w.rest);
  Mat3 s = observation_cov;
  for (std::size_t i = 0; i < chi.size(); ++i) {
    const Vec3 r = state_residual(chi[i], z_mean);
    s += (i == 0 ? w.cov0 : w.rest) * r * r.transpose();
  }
  s = symmetrised<3>(s);
  // The observation model is the identity, so the state/observation cross
  // covariance equals the sigma-point covariance of the state.
  const Mat3 cross = s - observation_cov;

  out.innovation = state_residual(to_vec(observation), z_mean);
  if (nearly_singular<3>(s)) {
    out.status = UpdateStatus::Singular;
    return out;
  }
  const Eigen::LDLT<Mat3> solver(s);
  out.mahalanobis2 = out.innovation.dot(solver.solve(out.innovation));
  if (!(out.mahalanobis2 <= gate)) return out;

  const Mat3 gain = solver.solve(cross.transpose()).transpose();
  Vec3 posterior = z_mean + gain * out.innovation;
  posterior(kHeading) = wrap_angle(posterior(kHeading));
  out.state.pose = to_pose(posterior);
  out.state.covariance = symmetrised<3>(state.covariance - gain * s * gain.transpose());
  out.status = UpdateStatus::Accepted;
  return out;
}

UpdateOutcome update_position(const FilterState& state, const Vec2& observation, const Mat2& observation_cov,
                              double gate, const UkfParams& params) {
  require_psd(state.covariance, "update_position");
  UpdateOutcome out{state, UpdateStatus::Rejected, 0.0, Vec3::Zero()};

  const auto w = make_weights<3>(params);
  const auto chi = sigma_points<3>(to_vec(state.pose), state.covariance, w.lambda);
  const Vec3 x_mean = weighted_state_mean(chi, w.mean0, w.rest);
  const Vec2 z_mean = x_mean.head<2>();
  Mat2 s = observation_cov;
  Eigen::Matrix<double, 3, 2> cross = Eigen::Matrix<double, 3, 2>::Zero();
  for (std::size_t i = 0; i < chi.size(); ++i) {
    const double wi = i == 0 ? w.cov0 : w.rest;
    const Vec3 rx = state_residual(chi[i], x_mean);
    const Vec2 rz = chi[i].head<2>() - z_mean;
    s += wi * rz * rz.transpose();
    cross += wi * rx * rz.transpose();
  }
  s = symmetrised<2>(s);

  const Vec2 innovation = observation - z_mean;
  out.innovation.head<2>() = innovation;
  if (nearly_singular<2>(s)) {
    out.status = UpdateStatus::Singular;
    return out;
  }
  const Eigen::LDLT<Mat2> solver(s);
  out.mahalanobis2 = innovation.dot(solver.solve(innovation));
  if (!(out.mahalanobis2 <= gate)) return out;

  const Eigen::Matrix<double, 3, 2> gain = solver.solve(cross.transpose()).transpose();
  Vec3 posterior = x_mean + gain * innovation;
  posterior(kHeading) = wrap_angle(posterior(kHeading));
  out.state.pose = to_pose(posterior);
  out.state.covariance = symmetrised<3>(state.covariance - gain * s * gain.transpose());
  out.status = UpdateStatus::Accepted;
  return out;
}

std::optional<Pose2D> gps_initialise(std::span<const GpsReading> readings, double speed_threshold) {
  if (auto fix = find_initial_fix(readings, speed_threshold)) return fix->pose;
  return std::nullopt;
}

std::string_view to_string(StrategyMode mode) {
  switch (mode) {
    case StrategyMode::DeadReckoning:
      return "DeadReckoning";
    case StrategyMode::Gps:
      return "Gps";
    case StrategyMode::Pole:
      return "Pole";
    case StrategyMode::PoleCorner:
      return "PoleCorner";
  }
  return "unknown";
}

StrategyMode parse_strategy_mode(std::string_view text) {
  for (auto m : {StrategyMode::DeadReckoning, StrategyMode::Gps, StrategyMode::Pole, StrategyMode::PoleCorner}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

double chi_square_quantile(int dof, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi_square_quantile: p must be in (0, 1)");
  if (dof == 2) return -2.0 * std::log1p(-p);
  if (dof != 3) throw std::invalid_argument("chi_square_quantile: only 2 or 3 degrees of freedom");
  auto cdf = [](double x) { return std::erf(std::sqrt(x / 2.0)) - std::sqrt(2.0 * x / kPi) * std::exp(-x / 2.0); };
  double lo = 0.0;
  double hi = 200.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

StrategyConfig StrategyConfig::preset(StrategyMode mode) {
  StrategyConfig cfg;
  cfg.mode = mode;
  cfg.gps_used_after_init = mode == StrategyMode::Gps;
  return cfg;
}

std::vector<FeatureClass> StrategyConfig::matched_classes() const {
  switch (mode) {
    case StrategyMode::Pole:
      return {FeatureClass::Pole};
    case StrategyMode::PoleCorner:
      return {FeatureClass::Pole, FeatureClass::Corner};
    default:
      return {};
  }
}

std::string_view to_string(UpdateSource source) {
  switch (source) {
    case UpdateSource::None:
      return "none";
    case UpdateSource::Gps:
      return "gps";
    case UpdateSource::Icp:
      return "icp";
  }
  return "unknown";
}

UpdateSource parse_update_source(std::string_view text) {
  for (auto s : {UpdateSource::None, UpdateSource::Gps, UpdateSource::Icp}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown update source '" + std::string(text) + "'");
}

StrategyRun run_strategy(const sim::Dataset& dataset, const FeatureMap& map, const StrategyConfig& strategy,
                         const matcher::IcpConfig& icp_cfg) {
  icp_cfg.validate();
  const auto classes = strategy.matched_classes();
  const FeatureMap matched_map = strategy.uses_icp() ? map.restricted_to(classes) : FeatureMap{};
  const double gps_var = strategy.gps_sigma * strategy.gps_sigma;
  const Mat2 gps_cov = Mat2::Identity() * gps_var;
  const Mat3 icp_cov = Vec3(strategy.icp_position_sigma * strategy.icp_position_sigma,
                            strategy.icp_position_sigma * strategy.icp_position_sigma,
                            strategy.icp_heading_sigma * strategy.icp_heading_sigma)
                           .asDiagonal();

  StrategyRun run;
  std::optional<FilterState> state;
  std::vector<GpsReading> seen;
  double arc = 0.0;
  bool features_active = false;
  UpdateSource last = UpdateSource::None;
  auto log_state = [&]() { run.states.push_back({state->timestamp, arc, *state, last}); };

  const auto& odom = dataset.odometry;
  const auto& gps = dataset.gps_readings;
  const auto& frames = dataset.feature_frames;
  std::size_t io = 0, ig = 0, iframe = 0;
  constexpr double kNever = std::numeric_limits<double>::infinity();
  while (io < odom.size() || ig < gps.size() || iframe < frames.size()) {
    const double to = io < odom.size() ? odom[io].timestamp : kNever;
    const double tg = ig < gps.size() ? gps[ig].timestamp : kNever;
    const double tf = iframe < frames.size() ? frames[iframe].timestamp : kNever;

    // Same-time events apply odometry first, then GPS, then lidar.
    if (to <= tg && to <= tf) {
      const auto& inc = odom[io++];
      arc += std::abs(inc.distance);
      if (state) {
        state = predict(*state, inc, strategy.process, strategy.ukf);
        log_state();
      }
    } else if (tg <= tf) {
      const auto& fix = gps[ig++];
      seen.push_back(fix);
      if (!state) {
        if (auto init = find_initial_fix(seen, strategy.gps_speed_threshold)) {
          const double heading_sigma = std::min(kPi, std::sqrt(2.0) * strategy.gps_sigma / init->baseline);
          FilterState s;
          s.pose = init->pose;
          s.timestamp = fix.timestamp;
          s.covariance = Vec3(gps_var, gps_var, heading_sigma * heading_sigma).asDiagonal();
          state = s;
          log_state();
        }
        continue;
      }
      const bool use_gps = strategy.mode == StrategyMode::Gps ||
                           (strategy.uses_icp() && !features_active) ||
                           (strategy.gps_used_after_init && strategy.mode != StrategyMode::DeadReckoning);
      if (!use_gps) continue;
      const auto outcome = update_position(*state, Vec2(fix.easting, fix.northing), gps_cov,
                                           strategy.gps_gate_threshold, strategy.ukf);
      run.events.push_back({fix.timestamp, arc, UpdateSource::Gps, outcome.accepted()});
      if (outcome.accepted()) {
        state = outcome.state;
        state->timestamp = fix.timestamp;
        last = UpdateSource::Gps;
        log_state();
      }
    } else {
      const auto& frame = frames[iframe++];
      if (!state || !strategy.uses_icp()) continue;
      const FeatureFrame matched = frame.restricted_to(classes);
      const auto match = matcher::icp_match(state->pose, matched, matched_map, icp_cfg);
      if (!match.converged) continue;
      if (!features_active) {
        features_active = true;
        run.feature_init_time = frame.timestamp;
      }
      const auto outcome = update_pose(*state, match.pose, icp_cov, strategy.gate_threshold, strategy.ukf);
      run.events.push_back({frame.timestamp, arc, UpdateSource::Icp, outcome.accepted()});
      if (outcome.accepted()) {
        state = outcome.state;
        state->timestamp = frame.timestamp;
        last = UpdateSource::Icp;
        log_state();
      }
    }
  }
  if (!state) throw InitialisationError("run_strategy: GPS never provided an initialisation pair above the speed threshold");
  return run;
}

std::vector<UpdateEvent> accepted_events(std::span<const UpdateEvent> events) {
  std::vector<UpdateEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out), [](const UpdateEvent& e) { return e.accepted; });
  return out;
}

std::vector<ConfidenceBound> confidence_bound(std::span<const StateLogEntry> states) {
  std::vector<ConfidenceBound> out;
  out.reserve(states.size());
  for (const auto& e : states) {
    const auto& p = e.state.covariance;
    out.push_back({kBound95 * std::sqrt(std::max(0.0, p(0, 0))), kBound95 * std::sqrt(std::max(0.0, p(1, 1))),
                   kBound95 * std::sqrt(std::max(0.0, p(2, 2)))});
  }
  return out;
}

}  // namespace locrobust::filter
