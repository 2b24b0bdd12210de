#pragma once

// Forward dynamics models and observation functions for the two tuning
// scenarios: a ball dropped onto a flat plane, and a planar two-link arm
// carrying a payload around a circular end-effector path.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "tunenet/types.hpp"

namespace tunenet::sim {

inline constexpr double kGravity = 9.81;
inline constexpr double kBallRadius = 0.5;
inline constexpr double kFrameRate = 60.0;
inline constexpr std::size_t kEpisodeFrames = 400;

/// Fixed-rate time series of simulator states. Ball frames hold the xyz
/// position of the ball center (m); arm frames hold joint torques (N*m).
struct Rollout {
  double dt = 0.0;
  std::vector<std::vector<double>> frames;

  std::size_t size() const { return frames.size(); }
  std::size_t dim() const { return frames.empty() ? 0 : frames.front().size(); }
  /// Throws DimensionError when frames are empty, ragged, or dt <= 0.
  void validate() const;
};

/// Fixed-length multi-channel signal derived from a rollout.
struct Observation {
  std::vector<std::vector<double>> channels;
  double sample_rate = kFrameRate;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
  std::size_t flat_size() const { return num_channels() * length(); }
  /// Channel-major concatenation.
  std::vector<double> flatten() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Bouncing ball

struct BallParams {
  double cor = 0.5;
  double drop_height = 4.5;
};

enum class BallIntegrator {
  /// Closed-form ballistic flight per substep with the exact contact time
  /// solved inside the substep.
  exact_ballistic,
  /// Semi-implicit Euler per substep, contact time interpolated linearly.
  semi_implicit_euler,
};

struct BallOptions {
  std::size_t substeps = 4;
  BallIntegrator integrator = BallIntegrator::exact_ballistic;
  double radius = kBallRadius;
  /// Rebound speeds below this settle the ball on the plane (m/s).
  double rest_speed = 1e-3;
};

struct BounceEvent {
  double time = 0.0;
  double impact_speed = 0.0;
  double rebound_speed = 0.0;
};

/// A ball rollout together with its contact history. apexes[0] is the drop
/// height; apexes[k] is the center apex of the flight following bounce k.
struct BallTrace {
  Rollout rollout;
  std::vector<BounceEvent> bounces;
  std::vector<double> apexes;
  /// Time at which the ball settled; negative if still bouncing at the end.
  double rest_time = -1.0;
};

Rollout simulate_ball(const BallParams& params, double dt, std::size_t n_frames,
                      const BallOptions& options = {});

BallTrace trace_ball(const BallParams& params, double dt, std::size_t n_frames,
                     const BallOptions& options = {});

// ---------------------------------------------------------------------------
// Planar two-link arm

struct ArmGeometry {
  double link1_length = 0.4;
  double link2_length = 0.4;
  double link1_mass = 2.0;
  double link2_mass = 1.0;
};

struct ArmParams {
  double payload_mass = 0.0;
};

/// End-effector circle p(t) = center + radius * (cos(w t), sin(w t)) in the
/// vertical plane of the arm (gravity along -y).
struct TrajectorySpec {
  double duration = 5.0;
  double center_x = 0.4;
  double center_y = 0.0;
  double radius = 0.2;
  double angular_rate = 1.2;
};

struct JointState {
  std::array<double, 2> q{};
  std::array<double, 2> qd{};
  std::array<double, 2> qdd{};
};

/// Closed-form inverse kinematics for position, velocity and acceleration.
/// Always selects the elbow-up branch (elbow above the base-to-target line);
/// collinear configurations resolve toward positive q2.
JointState arm_inverse_kinematics(const ArmGeometry& geom, std::array<double, 2> pos,
                                  std::array<double, 2> vel, std::array<double, 2> acc);

/// Joint torques for uniform-rod links plus a point payload at the tip.
std::array<double, 2> arm_inverse_dynamics(const ArmGeometry& geom, double payload_mass,
                                           const JointState& state);

/// Tip position of the forward kinematics.
std::array<double, 2> arm_forward_kinematics(const ArmGeometry& geom, std::array<double, 2> q);

Rollout simulate_arm(const ArmParams& params, const TrajectorySpec& traj, double dt,
                     const ArmGeometry& geom = {});

// ---------------------------------------------------------------------------
// Observation functions

Observation observe_identity(const Rollout& rollout, double sample_rate = 0.0);

struct CameraConfig {
  double focal_px = 600.0;
  double image_height_px = 480.0;
  double noise_px = 0.5;
  Interval distance{5.0, 10.0};
  Interval elevation{5.0, 8.0};
  std::array<double, 3> look_at{0.0, 0.0, 2.0};
};

struct CameraPose {
  std::array<double, 3> position{};
  std::array<double, 3> look_at{};
};

CameraPose sample_camera(Seed camera_seed, const CameraConfig& config = {});

/// Normalized image row of a world point under a pinhole camera (0 = top row).
double project_row(const CameraPose& pose, const CameraConfig& config,
                   const std::array<double, 3>& point);

/// One-channel synthetic tracker output: normalized vertical pixel
/// coordinate of the ball center under a randomized camera, plus pixel noise.
Observation observe_projected(const Rollout& rollout, Seed camera_seed,
                              const CameraConfig& config = {});

/// Columnar CSV: header "t,<name0>,<name1>,...", one row per frame.
void write_rollout_csv(const Rollout& rollout, std::ostream& out,
                       const std::vector<std::string>& channel_names = {});

}  // namespace tunenet::sim
