#include "tunenet/bounce_shot.hpp"

#include <cmath>
#include <limits>

#include "tunenet/errors.hpp"
#include "tunenet/sim.hpp"

namespace tunenet::shot {

void BounceShotSpec::validate() const {
  if (!(incline > 0.0 && incline < 1.5707963267948966)) {
    throw ParameterDomainError("bounce shot: incline must lie in (0, pi/2)");
  }
  if (!(hoop_radius > 0.0)) throw ParameterDomainError("bounce shot: hoop radius must be positive");
  if (!(hoop_x > 0.0)) throw ParameterDomainError("bounce shot: hoop must lie down the slope");
  if (!(heights.lo > 0.0) || heights.hi < heights.lo) {
    throw ParameterDomainError("bounce shot: invalid candidate height range");
  }
  if (n_candidates < 1) throw ParameterDomainError("bounce shot: need at least one candidate");
  if (!(ramp_length >= 0.0)) throw ParameterDomainError("bounce shot: negative ramp length");
}

std::array<double, 2> rebound_velocity(double cor, double height, double incline) {
  const double u = std::sqrt(2.0 * sim::kGravity * height);
  const double s = std::sin(incline);
  const double c = std::cos(incline);
  return {u * s * c * (1.0 + cor), u * (cor * c * c - s * s)};
}

namespace {

double distance_to_segment(double ax, double ay, double bx, double by, double px, double py) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return std::hypot(ax + t * dx - px, ay + t * dy - py);
}

ShotOutcome exact_flight(const std::array<double, 2>& v, const BounceShotSpec& spec) {
  const double g = sim::kGravity;
  const double slope = std::tan(spec.incline);
  const double ramp_end_x = spec.ramp_length * std::cos(spec.incline);

  // Height above the ramp line is (vy + vx*slope) t - g t^2 / 2.
  const double lift = v[1] + v[0] * slope;
  const double t_ramp = lift > 0.0 ? 2.0 * lift / g : 0.0;
  const bool hits_ramp = v[0] * t_ramp <= ramp_end_x;

  // Flight ends one meter below the hoop, or on the ramp.
  const double drop = 1.0 - spec.hoop_y;
  const double t_floor = (v[1] + std::sqrt(v[1] * v[1] + 2.0 * g * drop)) / g;
  const double t_end = hits_ramp ? t_ramp : t_floor;

  auto dist2 = [&](double t) {
    const double x = v[0] * t - spec.hoop_x;
    const double y = v[1] * t - 0.5 * g * t * t - spec.hoop_y;
    return x * x + y * y;
  };

  ShotOutcome out;
  if (t_end <= 0.0) {
    out.miss = std::sqrt(dist2(0.0));
    return out;
  }
  const std::size_t n = 2000;
  const double h = t_end / static_cast<double>(n);
  std::size_t best = 0;
  double best_d = dist2(0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double d = dist2(h * static_cast<double>(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  // Golden-section refinement inside the bracketing samples.
  double a = h * static_cast<double>(best == 0 ? 0 : best - 1);
  double b = h * static_cast<double>(best == n ? n : best + 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  for (int it = 0; it < 80; ++it) {
    if (dist2(c) < dist2(d)) b = d;
    else a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  out.miss = std::sqrt(std::min(best_d, dist2(0.5 * (a + b))));
  out.reached = !hits_ramp;
  return out;
}

ShotOutcome euler_flight(const std::array<double, 2>& v0, const BounceShotSpec& spec, double step) {
  if (!(step > 0.0)) throw ParameterDomainError("bounce shot: step must be positive");
  const double g = sim::kGravity;
  const double slope = std::tan(spec.incline);
  const double ramp_end_x = spec.ramp_length * std::cos(spec.incline);
  const double floor_y = spec.hoop_y - 1.0;

  double x = 0.0, y = 0.0, vx = v0[0], vy = v0[1];
  ShotOutcome out;
  out.miss = std::hypot(spec.hoop_x, spec.hoop_y);
  for (std::size_t i = 0; i < 1000000; ++i) {
    vy -= g * step;
    const double nx = x + vx * step;
    const double ny = y + vy * step;
    out.miss = std::min(out.miss, distance_to_segment(x, y, nx, ny, spec.hoop_x, spec.hoop_y));
    x = nx;
    y = ny;
    if (x <= ramp_end_x && y + x * slope < 0.0) return out;
    if (y < floor_y) {
      out.reached = true;
      return out;
    }
  }
  return out;
}

}  // namespace

ShotOutcome simulate_shot(double cor, double height, const BounceShotSpec& spec, FlightModel model,
                          double step) {
  spec.validate();
  if (!(height > 0.0)) throw ParameterDomainError("bounce shot: release height must be positive");
  const double e = cor < 0.0 ? 0.0 : (cor > 1.0 ? 1.0 : cor);
  const auto v = rebound_velocity(e, height, spec.incline);
  ShotOutcome out = model == FlightModel::exact ? exact_flight(v, spec) : euler_flight(v, spec, step);
  out.success = out.reached && out.miss <= spec.hoop_radius;
  return out;
}

std::vector<double> candidate_heights(const BounceShotSpec& spec) {
  std::vector<double> h(spec.n_candidates);
  if (spec.n_candidates == 1) {
    h[0] = spec.heights.mid();
    return h;
  }
  const double step = spec.heights.width() / static_cast<double>(spec.n_candidates - 1);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = spec.heights.lo + step * static_cast<double>(i);
  h.back() = spec.heights.hi;
  return h;
}

ShotPlan plan_bounce_shot(double cor, const BounceShotSpec& spec) {
  spec.validate();
  ShotPlan plan;
  double best_any = std::numeric_limits<double>::infinity();
  double best_reached = std::numeric_limits<double>::infinity();
  for (double h : candidate_heights(spec)) {
    const ShotOutcome o = simulate_shot(cor, h, spec);
    if (o.reached && o.miss < best_reached) {
      best_reached = o.miss;
      plan.height = h;
      plan.predicted = o;
      plan.reached = true;
    }
    if (!plan.reached && o.miss < best_any) {
      best_any = o.miss;
      plan.height = h;
      plan.predicted = o;
    }
  }
  return plan;
}

double perfect_shot_height(double cor, const BounceShotSpec& spec) {
  const double s = std::sin(spec.incline);
  const double c = std::cos(spec.incline);
  const double e = cor;
  const double k = (e * c * c - s * s) / (s * c * (1.0 + e));
  const double denom = 4.0 * s * s * c * c * (1.0 + e) * (1.0 + e) * (spec.hoop_x * k - spec.hoop_y);
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return spec.hoop_x * spec.hoop_x / denom;
}

}  // namespace tunenet::shot
