#pragma once

#include "locrobust/core.hpp"
#include "locrobust/matcher.hpp"
#include "locrobust/sim.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace locrobust::filter {

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// State over (easting, northing, heading).
struct FilterState {
  Pose2D pose;
  Mat3 covariance = Mat3::Zero();
  double timestamp = 0.0;
};

/// Scaled unscented transform parameters.
struct UkfParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
};

/// Odometry noise; variances grow linearly with distance travelled,
/// var = sigma^2 * |distance|.
struct ProcessNoise {
  double distance_sigma = 0.02;  // m / sqrt(m)
  double heading_sigma = 0.003;  // rad / sqrt(m)
};

double min_eigenvalue(const Mat3& covariance);
bool is_psd(const Mat3& covariance, double tol = 1e-10);

/// Unscented prediction through x' = x + d cos(h + dh/2), y' = y + d sin(h + dh/2),
/// h' = h + dh, with the odometry noise carried as augmented state.
/// Throws std::invalid_argument for a non-PSD covariance or an increment
/// older than the state.
FilterState predict(const FilterState& state, const OdometryIncrement& odom, const ProcessNoise& noise,
                    const UkfParams& params = {});

enum class UpdateStatus { Accepted, Rejected, Singular };

struct UpdateOutcome {
  FilterState state;
  UpdateStatus status = UpdateStatus::Rejected;
  double mahalanobis2 = 0.0;
  Vec3 innovation = Vec3::Zero();  // heading component wrapped; zero z for position-only updates

  bool accepted() const { return status == UpdateStatus::Accepted; }
};

/// Full-pose observation update with chi-square gating on the squared
/// Mahalanobis distance of the innovation. A rejected or singular update
/// returns the input state unchanged.
UpdateOutcome update_pose(const FilterState& state, const Pose2D& observation, const Mat3& observation_cov,
                          double gate, const UkfParams& params = {});

/// Position-only variant used for GPS fixes.
UpdateOutcome update_position(const FilterState& state, const Vec2& observation, const Mat2& observation_cov,
                              double gate, const UkfParams& params = {});

/// Pose from the latest consecutive pair of fixes whose implied speed exceeds
/// `speed_threshold`: heading = atan2(dN, dE), position = the later fix.
std::optional<Pose2D> gps_initialise(std::span<const GpsReading> readings, double speed_threshold);

enum class StrategyMode { DeadReckoning, Gps, Pole, PoleCorner };

std::string_view to_string(StrategyMode mode);
StrategyMode parse_strategy_mode(std::string_view text);

/// Chi-square quantile for `dof` degrees of freedom at probability p (dof 2 or 3).
double chi_square_quantile(int dof, double p);

struct StrategyConfig {
  StrategyMode mode = StrategyMode::PoleCorner;
  bool gps_used_after_init = false;
  double gate_threshold = chi_square_quantile(3, 0.997);      // 3-DoF pose updates
  double gps_gate_threshold = chi_square_quantile(2, 0.997);  // 2-DoF GPS fixes
  ProcessNoise process;
  double gps_sigma = 2.0;
  double icp_position_sigma = 0.1;
  double icp_heading_sigma = 0.01;
  double gps_speed_threshold = 0.5;
  UkfParams ukf;

  /// Preset for one of the four strategies; GPS stays in use after
  /// initialisation only for the Gps strategy.
  static StrategyConfig preset(StrategyMode mode);
  bool uses_icp() const { return mode == StrategyMode::Pole || mode == StrategyMode::PoleCorner; }
  std::vector<FeatureClass> matched_classes() const;
};

enum class UpdateSource { None, Gps, Icp };
std::string_view to_string(UpdateSource source);
UpdateSource parse_update_source(std::string_view text);

struct UpdateEvent {
  double timestamp = 0.0;
  double arc_length = 0.0;
  UpdateSource source = UpdateSource::Gps;
  bool accepted = false;
};

struct StateLogEntry {
  double timestamp = 0.0;
  double arc_length = 0.0;  // odometry-integrated distance since the start of the run
  FilterState state;
  UpdateSource last_update = UpdateSource::None;
};

struct StrategyRun {
  std::vector<StateLogEntry> states;
  std::vector<UpdateEvent> events;
  /// Time at which ICP took over from GPS (feature strategies only).
  std::optional<double> feature_init_time;
};

class InitialisationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Replays `dataset` through the filter. The state log gets one entry after
/// every prediction and every accepted update. Throws InitialisationError
/// when no GPS pair ever qualifies for initialisation.
StrategyRun run_strategy(const sim::Dataset& dataset, const FeatureMap& map, const StrategyConfig& strategy,
                         const matcher::IcpConfig& icp_cfg);

std::vector<UpdateEvent> accepted_events(std::span<const UpdateEvent> events);

struct ConfidenceBound {
  double easting = 0.0;
  double northing = 0.0;
  double heading = 0.0;

  /// Position bound used when comparing against VPT radii.
  double position() const { return std::max(easting, northing); }
};

inline constexpr double kBound95 = 1.96;

/// 1.96 * sqrt(diag(covariance)) for every state.
std::vector<ConfidenceBound> confidence_bound(std::span<const StateLogEntry> states);

}  // namespace locrobust::filter
