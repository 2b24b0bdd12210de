#pragma once

// Planar bounce shot: a ball is released above an inclined ramp, bounces
// once, and should pass through a hoop further down the slope.
//
// Coordinates are relative to the impact point of the ball center on the
// ramp. The ramp descends toward +x at `incline` radians; the ball falls
// straight down onto it. On impact the normal velocity component is scaled
// by -cor and the tangential component is kept.

#include <array>
#include <cstddef>
#include <vector>

#include "tunenet/types.hpp"

namespace tunenet::shot {

struct BounceShotSpec {
  double incline = 0.7853981633974483;
  double hoop_x = 1.5;
  double hoop_y = -1.5;
  double hoop_radius = 0.12;
  /// Release height of the ball center above the impact point.
  Interval heights{0.4, 2.4};
  std::size_t n_candidates = 100;
  /// Length of ramp surface below the impact point; touching it again ends
  /// the shot.
  double ramp_length = 0.3;

  void validate() const;
};

enum class FlightModel {
  /// Closed-form projectile motion.
  exact,
  /// Semi-implicit Euler at a fixed step; stands in for the held-out world.
  semi_implicit_euler,
};

struct ShotOutcome {
  /// Closest approach of the ball center to the hoop center.
  double miss = 0.0;
  /// The ball left the ramp and descended through the hoop's height.
  bool reached = false;
  bool success = false;
};

struct ShotPlan {
  double height = 0.0;
  ShotOutcome predicted;
  /// False when no candidate reached the hoop; height is then a best effort.
  bool reached = false;
};

/// Velocity of the ball center just after the bounce.
std::array<double, 2> rebound_velocity(double cor, double height, double incline);

ShotOutcome simulate_shot(double cor, double height, const BounceShotSpec& spec,
                          FlightModel model = FlightModel::exact, double step = 1.0 / 240.0);

/// Evaluates n_candidates uniformly spaced heights with the given COR and
/// returns the one whose flight passes closest to the hoop center.
ShotPlan plan_bounce_shot(double cor, const BounceShotSpec& spec);

/// Release height whose exact projectile path passes through the hoop
/// center; NaN when no positive height exists.
double perfect_shot_height(double cor, const BounceShotSpec& spec);

/// Candidate heights, endpoints included.
std::vector<double> candidate_heights(const BounceShotSpec& spec);

}  // namespace tunenet::shot
