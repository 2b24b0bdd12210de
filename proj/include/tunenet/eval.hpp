#pragma once

// Metrics and table/curve writers shared by the experiment drivers.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "tunenet/sim.hpp"
#include "tunenet/types.hpp"

namespace tunenet::eval {

struct TrajectoryError {
  /// Mean Euclidean position error over all frames, in centimeters.
  double mae_cm = 0.0;
  /// mae relative to the target's mean displacement from its initial
  /// position, in percent.
  double pct = 0.0;
  /// Mean target displacement from its initial position, in centimeters.
  double normalizer_cm = 0.0;
};

/// Requires equal frame counts and dt.
TrajectoryError trajectory_error(const sim::Rollout& proposed, const sim::Rollout& target);

/// Pools per-episode errors over all runs and timesteps (ratio of means).
TrajectoryError pool_errors(const std::vector<TrajectoryError>& errors);

/// Mean absolute error over all samples and parameter components.
double parameter_mae(const std::vector<ParamVector>& estimates,
                     const std::vector<ParamVector>& targets);

/// Mean of |estimate - target| / |target| in percent.
double parameter_pct(const std::vector<ParamVector>& estimates,
                     const std::vector<ParamVector>& targets);

struct MetricsRow {
  std::string method;
  std::string dataset;
  std::size_t K = 0;
  std::size_t rollouts = 0;
  double param_mae = 0.0;
  double param_pct = 0.0;
  double trans_err_cm = 0.0;
  double trans_err_pct = 0.0;
};

/// One row per method: method,val_mae,test_mae,test_pct.
void write_table1_csv(const std::vector<MetricsRow>& rows, const std::string& val_dataset,
                      const std::string& test_dataset, std::ostream& out);

/// Wide layout: one row per method, one column per (dataset, K).
void write_table2_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& datasets,
                      const std::vector<std::size_t>& ks, std::ostream& out);

/// method,trans_err_pct,trans_err_cm
void write_table3_csv(const std::vector<MetricsRow>& rows, std::ostream& out);

/// Long layout with every MetricsRow field.
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);

struct TracePoint {
  std::string method;
  std::string dataset;
  std::size_t episode = 0;
  std::size_t iteration = 0;
  std::size_t rollouts = 0;
  ParamVector estimate;
  ParamVector target;
  /// NaN when the method does not evaluate a discrepancy.
  double discrepancy = 0.0;
};

/// method,dataset,episode,iteration,rollouts,estimate_i...,target_i...,abs_error,discrepancy
void write_trace_csv(const std::vector<TracePoint>& trace, std::ostream& out);

struct CurvePoint {
  std::string method;
  std::string dataset;
  std::size_t rollouts = 0;
  double mean_mae = 0.0;
};

/// method,dataset,rollouts,mean_mae
void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out);

/// Small standalone SVG line chart, one panel per dataset.
void write_curve_svg(const std::vector<CurvePoint>& curve, std::ostream& out);

/// Round-trip number text for CSV cells; NaN prints as an empty cell.
std::string cell(double v);

}  // namespace tunenet::eval
