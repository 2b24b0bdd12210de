#include "tunenet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "tunenet/format.hpp"
#include "tunenet/errors.hpp"

namespace tunenet::sim {

void Rollout::validate() const {
  if (!(dt > 0.0)) throw DimensionError("rollout dt must be positive");
  if (frames.empty()) throw DimensionError("rollout has no frames");
  const std::size_t d = frames.front().size();
  for (const auto& f : frames) {
    if (f.size() != d) throw DimensionError("rollout frames have inconsistent dimension");
  }
}

std::vector<double> Observation::flatten() const {
  std::vector<double> flat;
  flat.reserve(flat_size());
  for (const auto& ch : channels) flat.insert(flat.end(), ch.begin(), ch.end());
  return flat;
}

void Observation::validate() const {
  if (channels.empty()) throw DimensionError("observation has no channels");
  const std::size_t n = channels.front().size();
  if (n < 2) throw DimensionError("observation needs at least two samples");
  for (const auto& ch : channels) {
    if (ch.size() != n) throw DimensionError("observation channels differ in length");
  }
}

// ---------------------------------------------------------------------------
// Ball

namespace {

struct BallState {
  double z = 0.0;
  double v = 0.0;
  double t = 0.0;
  bool resting = false;
};

class BallStepper {
 public:
  BallStepper(double cor, const BallOptions& opt, BallTrace* trace)
      : cor_(cor), opt_(opt), trace_(trace) {}

  void substep(BallState& s, double h) const {
    if (opt_.integrator == BallIntegrator::exact_ballistic) {
      exact(s, h);
    } else {
      semi_implicit(s, h);
    }
  }

 private:
  // Time until the ballistic center path next reaches the contact height.
  static double time_to_contact(double gap, double v) {
    if (gap <= 0.0 && v <= 0.0) return 0.0;
    const double root = std::sqrt(v * v + 2.0 * kGravity * std::max(gap, 0.0));
    if (v <= 0.0) return 2.0 * std::max(gap, 0.0) / (root - v);
    return (v + root) / kGravity;
  }

  void bounce(BallState& s, double impact_velocity) const {
    const double rebound = -cor_ * impact_velocity;
    s.z = opt_.radius;
    if (trace_) trace_->bounces.push_back({s.t, -impact_velocity, rebound});
    if (rebound < opt_.rest_speed) {
      s.v = 0.0;
      s.resting = true;
      if (trace_ && trace_->rest_time < 0.0) trace_->rest_time = s.t;
    } else {
      s.v = rebound;
      if (trace_) {
        const double apex = opt_.integrator == BallIntegrator::exact_ballistic
                                ? opt_.radius + rebound * rebound / (2.0 * kGravity)
                                : opt_.radius;
        trace_->apexes.push_back(apex);
      }
    }
  }

  void exact(BallState& s, double h) const {
    double remaining = h;
    while (remaining > 0.0) {
      if (s.resting) {
        s.z = opt_.radius;
        s.v = 0.0;
        s.t += remaining;
        return;
      }
      const double hit = time_to_contact(s.z - opt_.radius, s.v);
      if (hit > remaining) {
        s.z += s.v * remaining - 0.5 * kGravity * remaining * remaining;
        s.v -= kGravity * remaining;
        s.z = std::max(s.z, opt_.radius);
        s.t += remaining;
        return;
      }
      const double impact = s.v - kGravity * hit;
      s.t += hit;
      remaining -= hit;
      bounce(s, impact);
    }
  }

  void semi_implicit(BallState& s, double h) const {
    if (s.resting) {
      s.t += h;
      return;
    }
    s.v -= kGravity * h;
    const double z_next = s.z + s.v * h;
    if (z_next < opt_.radius && s.v < 0.0) {
      const double tau = std::clamp((s.z - opt_.radius) / (-s.v), 0.0, h);
      const double t_end = s.t + h;
      s.t += tau;
      bounce(s, s.v);
      s.z = opt_.radius + s.v * (h - tau);
      s.t = t_end;
    } else {
      s.z = z_next;
      s.t += h;
    }
    if (trace_ && !trace_->apexes.empty() && !s.resting) {
      trace_->apexes.back() = std::max(trace_->apexes.back(), s.z);
    }
  }

  double cor_;
  const BallOptions& opt_;
  BallTrace* trace_;
};

BallTrace run_ball(const BallParams& params, double dt, std::size_t n_frames,
                   const BallOptions& options, bool keep_trace) {
  if (n_frames < 1) throw ParameterDomainError("simulate_ball: n_frames must be >= 1");
  if (!(dt > 0.0)) throw ParameterDomainError("simulate_ball: dt must be positive");
  if (options.substeps < 1) throw ParameterDomainError("simulate_ball: substeps must be >= 1");
  if (!std::isfinite(params.cor)) throw ParameterDomainError("simulate_ball: cor is not finite");
  if (!(params.drop_height > options.radius)) {
    throw ParameterDomainError("simulate_ball: drop height must exceed the ball radius");
  }
  const double cor = std::clamp(params.cor, 0.0, 1.0);

  BallTrace trace;
  trace.apexes.push_back(params.drop_height);
  BallStepper stepper(cor, options, keep_trace ? &trace : nullptr);

  BallState state{params.drop_height, 0.0, 0.0, false};
  const double h = dt / static_cast<double>(options.substeps);
  trace.rollout.dt = dt;
  trace.rollout.frames.reserve(n_frames);
  trace.rollout.frames.push_back({0.0, 0.0, state.z});
  for (std::size_t k = 1; k < n_frames; ++k) {
    for (std::size_t i = 0; i < options.substeps; ++i) stepper.substep(state, h);
    trace.rollout.frames.push_back({0.0, 0.0, state.z});
  }
  return trace;
}

}  // namespace

Rollout simulate_ball(const BallParams& params, double dt, std::size_t n_frames,
                      const BallOptions& options) {
  return run_ball(params, dt, n_frames, options, false).rollout;
}

BallTrace trace_ball(const BallParams& params, double dt, std::size_t n_frames,
                     const BallOptions& options) {
  return run_ball(params, dt, n_frames, options, true);
}

// ---------------------------------------------------------------------------
// Arm

std::array<double, 2> arm_forward_kinematics(const ArmGeometry& g, std::array<double, 2> q) {
  const double q12 = q[0] + q[1];
  return {g.link1_length * std::cos(q[0]) + g.link2_length * std::cos(q12),
          g.link1_length * std::sin(q[0]) + g.link2_length * std::sin(q12)};
}

JointState arm_inverse_kinematics(const ArmGeometry& g, std::array<double, 2> pos,
                                  std::array<double, 2> vel, std::array<double, 2> acc) {
  const double l1 = g.link1_length;
  const double l2 = g.link2_length;
  const double r2 = pos[0] * pos[0] + pos[1] * pos[1];
  const double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (!(std::abs(c2) <= 1.0)) {
    throw TrajectoryInfeasibleError("target point lies outside the arm workspace");
  }
  // Elbow-up: the elbow sits above the base-to-target line, i.e. q2 <= 0.
  double s2 = -std::sqrt(std::max(0.0, 1.0 - c2 * c2));
  if (s2 == 0.0) s2 = 0.0;  // collinear tie resolves toward +q2 (drops -0.0)
  if (std::abs(s2) < 1e-9) {
    throw TrajectoryInfeasibleError("target point is at a kinematic singularity");
  }

  JointState st;
  st.q[1] = std::atan2(s2, c2);
  st.q[0] = std::atan2(pos[1], pos[0]) - std::atan2(l2 * s2, l1 + l2 * c2);

  const double s1 = std::sin(st.q[0]), c1 = std::cos(st.q[0]);
  const double s12 = std::sin(st.q[0] + st.q[1]), c12 = std::cos(st.q[0] + st.q[1]);
  const double j11 = -l1 * s1 - l2 * s12, j12 = -l2 * s12;
  const double j21 = l1 * c1 + l2 * c12, j22 = l2 * c12;
  const double det = j11 * j22 - j12 * j21;
  auto solve = [&](double bx, double by) -> std::array<double, 2> {
    return {(j22 * bx - j12 * by) / det, (-j21 * bx + j11 * by) / det};
  };

  st.qd = solve(vel[0], vel[1]);
  const double w1 = st.qd[0], w12 = st.qd[0] + st.qd[1];
  const double jdot_qd_x = -l1 * c1 * w1 * w1 - l2 * c12 * w12 * w12;
  const double jdot_qd_y = -l1 * s1 * w1 * w1 - l2 * s12 * w12 * w12;
  st.qdd = solve(acc[0] - jdot_qd_x, acc[1] - jdot_qd_y);
  return st;
}

std::array<double, 2> arm_inverse_dynamics(const ArmGeometry& g, double payload_mass,
                                           const JointState& st) {
  const double l1 = g.link1_length, l2 = g.link2_length;
  const double m1 = g.link1_mass, m2 = g.link2_mass;
  const double lc1 = 0.5 * l1, lc2 = 0.5 * l2;
  const double i1 = m1 * l1 * l1 / 12.0, i2 = m2 * l2 * l2 / 12.0;

  const auto& q = st.q;
  const auto& qd = st.qd;
  const auto& qdd = st.qdd;
  const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
  const double c1 = std::cos(q[0]), c12 = std::cos(q[0] + q[1]);

  const double m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
  const double m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
  const double m22 = i2 + m2 * lc2 * lc2;
  const double h = m2 * l1 * lc2 * s2;

  std::array<double, 2> tau{
      m11 * qdd[0] + m12 * qdd[1] - h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]) +
          (m1 * lc1 + m2 * l1) * kGravity * c1 + m2 * lc2 * kGravity * c12,
      m12 * qdd[0] + m22 * qdd[1] + h * qd[0] * qd[0] + m2 * lc2 * kGravity * c12};

  if (payload_mass != 0.0) {
    // Point payload at the tip: tau += J^T * m * (a_tip + g e_y).
    const double s1 = std::sin(q[0]), s12 = std::sin(q[0] + q[1]);
    const double j11 = -l1 * s1 - l2 * s12, j12 = -l2 * s12;
    const double j21 = l1 * c1 + l2 * c12, j22 = l2 * c12;
    const double w1 = qd[0], w12 = qd[0] + qd[1];
    const double ax = j11 * qdd[0] + j12 * qdd[1] - l1 * c1 * w1 * w1 - l2 * c12 * w12 * w12;
    const double ay = j21 * qdd[0] + j22 * qdd[1] - l1 * s1 * w1 * w1 - l2 * s12 * w12 * w12;
    const double fx = payload_mass * ax;
    const double fy = payload_mass * (ay + kGravity);
    tau[0] += j11 * fx + j21 * fy;
    tau[1] += j12 * fx + j22 * fy;
  }
  return tau;
}

Rollout simulate_arm(const ArmParams& params, const TrajectorySpec& traj, double dt,
                     const ArmGeometry& geom) {
  if (!(params.payload_mass >= 0.0)) {
    throw ParameterDomainError("simulate_arm: payload mass must be non-negative");
  }
  if (!(dt > 0.0)) throw ParameterDomainError("simulate_arm: dt must be positive");
  if (!(traj.duration > 0.0) || !(traj.radius > 0.0)) {
    throw ParameterDomainError("simulate_arm: duration and radius must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(traj.duration / dt));
  if (n < 1) throw ParameterDomainError("simulate_arm: duration shorter than one frame");

  Rollout out;
  out.dt = dt;
  out.frames.reserve(n);
  const double w = traj.angular_rate;
  const double r = traj.radius;
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = w * static_cast<double>(k) * dt;
    const double c = std::cos(phase), s = std::sin(phase);
    const std::array<double, 2> pos{traj.center_x + r * c, traj.center_y + r * s};
    const std::array<double, 2> vel{-r * w * s, r * w * c};
    const std::array<double, 2> acc{-r * w * w * c, -r * w * w * s};
    const JointState st = arm_inverse_kinematics(geom, pos, vel, acc);
    const auto tau = arm_inverse_dynamics(geom, params.payload_mass, st);
    out.frames.push_back({tau[0], tau[1]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observations

Observation observe_identity(const Rollout& rollout, double sample_rate) {
  rollout.validate();
  Observation obs;
  obs.sample_rate = sample_rate > 0.0 ? sample_rate : 1.0 / rollout.dt;
  obs.channels.assign(rollout.dim(), std::vector<double>(rollout.size()));
  for (std::size_t t = 0; t < rollout.size(); ++t) {
    for (std::size_t c = 0; c < rollout.dim(); ++c) obs.channels[c][t] = rollout.frames[t][c];
  }
  return obs;
}

CameraPose sample_camera(Seed camera_seed, const CameraConfig& config) {
  std::mt19937_64 rng(mix_seed(camera_seed, 0));
  std::uniform_real_distribution<double> dist(config.distance.lo, config.distance.hi);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> elev(config.elevation.lo, config.elevation.hi);
  const double r = dist(rng);
  const double theta = angle(rng);
  const double z = elev(rng);
  return {{r * std::cos(theta), r * std::sin(theta), z}, config.look_at};
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

}  // namespace

double project_row(const CameraPose& pose, const CameraConfig& config, const Vec3& point) {
  const Vec3 forward = normalized(sub(pose.look_at, pose.position));
  const Vec3 right = normalized(cross(forward, {0.0, 0.0, 1.0}));
  const Vec3 up = cross(right, forward);
  const Vec3 d = sub(point, pose.position);
  const double depth = dot(d, forward);
  const double row = 0.5 * config.image_height_px - config.focal_px * dot(d, up) / depth;
  return row / config.image_height_px;
}

Observation observe_projected(const Rollout& rollout, Seed camera_seed,
                              const CameraConfig& config) {
  rollout.validate();
  if (rollout.dim() != 3) throw DimensionError("observe_projected expects 3D ball positions");
  const CameraPose pose = sample_camera(camera_seed, config);
  std::mt19937_64 rng(mix_seed(camera_seed, 1));
  std::normal_distribution<double> noise(0.0, config.noise_px);

  Observation obs;
  obs.sample_rate = 1.0 / rollout.dt;
  obs.channels.assign(1, std::vector<double>(rollout.size()));
  for (std::size_t t = 0; t < rollout.size(); ++t) {
    const auto& f = rollout.frames[t];
    double row = project_row(pose, config, {f[0], f[1], f[2]});
    if (config.noise_px > 0.0) row += noise(rng) / config.image_height_px;
    obs.channels[0][t] = std::clamp(row, 0.0, 1.0);
  }
  return obs;
}

void write_rollout_csv(const Rollout& rollout, std::ostream& out,
                       const std::vector<std::string>& channel_names) {
  rollout.validate();
  out << "t";
  for (std::size_t c = 0; c < rollout.dim(); ++c) {
    out << ',' << (c < channel_names.size() ? channel_names[c] : "c" + std::to_string(c));
  }
  out << '\n';
  for (std::size_t k = 0; k < rollout.size(); ++k) {
    out << format_double(static_cast<double>(k) * rollout.dt);
    for (double v : rollout.frames[k]) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace tunenet::sim
