#include "tunenet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <ostream>

#include "tunenet/errors.hpp"
#include "tunenet/format.hpp"

namespace tunenet::eval {

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

TrajectoryError trajectory_error(const sim::Rollout& proposed, const sim::Rollout& target) {
  proposed.validate();
  target.validate();
  if (proposed.size() != target.size() || proposed.dim() != target.dim()) {
    throw DimensionError("trajectory_error: rollouts differ in length or dimension");
  }
  if (std::abs(proposed.dt - target.dt) > 1e-12 * std::abs(target.dt)) {
    throw DimensionError("trajectory_error: rollouts differ in time step");
  }
  double err = 0.0;
  double disp = 0.0;
  const auto& origin = target.frames.front();
  for (std::size_t t = 0; t < target.size(); ++t) {
    double e2 = 0.0, d2 = 0.0;
    for (std::size_t c = 0; c < target.dim(); ++c) {
      const double e = proposed.frames[t][c] - target.frames[t][c];
      const double d = target.frames[t][c] - origin[c];
      e2 += e * e;
      d2 += d * d;
    }
    err += std::sqrt(e2);
    disp += std::sqrt(d2);
  }
  const double n = static_cast<double>(target.size());
  TrajectoryError out;
  out.mae_cm = 100.0 * err / n;
  out.normalizer_cm = 100.0 * disp / n;
  out.pct = out.normalizer_cm > 0.0 ? 100.0 * out.mae_cm / out.normalizer_cm
                                     : (out.mae_cm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return out;
}

TrajectoryError pool_errors(const std::vector<TrajectoryError>& errors) {
  if (errors.empty()) throw DimensionError("pool_errors: no episodes");
  TrajectoryError out;
  for (const auto& e : errors) {
    out.mae_cm += e.mae_cm;
    out.normalizer_cm += e.normalizer_cm;
  }
  out.mae_cm /= static_cast<double>(errors.size());
  out.normalizer_cm /= static_cast<double>(errors.size());
  out.pct = out.normalizer_cm > 0.0 ? 100.0 * out.mae_cm / out.normalizer_cm : 0.0;
  return out;
}

double parameter_mae(const std::vector<ParamVector>& estimates, const std::vector<ParamVector>& targets) {
  if (estimates.size() != targets.size() || estimates.empty()) {
    throw DimensionError("parameter_mae: estimate and target counts differ or are empty");
  }
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].size() != targets[i].size()) throw DimensionError("parameter_mae: dimension mismatch");
    for (std::size_t d = 0; d < targets[i].size(); ++d, ++n) s += std::abs(estimates[i][d] - targets[i][d]);
  }
  return s / static_cast<double>(n);
}

double parameter_pct(const std::vector<ParamVector>& estimates, const std::vector<ParamVector>& targets) {
  if (estimates.size() != targets.size() || estimates.empty()) {
    throw DimensionError("parameter_pct: estimate and target counts differ or are empty");
  }
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    for (std::size_t d = 0; d < targets[i].size(); ++d, ++n) {
      s += 100.0 * std::abs(estimates[i][d] - targets[i][d]) / std::abs(targets[i][d]);
    }
  }
  return s / static_cast<double>(n);
}

namespace {

// Methods in first-appearance order.
std::vector<std::string> method_order(const std::vector<MetricsRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  return out;
}

const MetricsRow* find_row(const std::vector<MetricsRow>& rows, const std::string& method,
                           const std::string& dataset, std::size_t k, bool match_k) {
  for (const auto& r : rows)
    if (r.method == method && r.dataset == dataset && (!match_k || r.K == k)) return &r;
  return nullptr;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

void write_table1_csv(const std::vector<MetricsRow>& rows, const std::string& val_dataset,
                      const std::string& test_dataset, std::ostream& out) {
  out << "method,val_mae,test_mae,test_pct\n";
  for (const auto& m : method_order(rows)) {
    const MetricsRow* v = find_row(rows, m, val_dataset, 0, false);
    const MetricsRow* t = find_row(rows, m, test_dataset, 0, false);
    out << quoted(m) << ',' << (v ? cell(v->param_mae) : "") << ',' << (t ? cell(t->param_mae) : "")
        << ',' << (t ? cell(t->param_pct) : "") << '\n';
  }
}

void write_table2_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& datasets,
                      const std::vector<std::size_t>& ks, std::ostream& out) {
  out << "method";
  for (const auto& d : datasets)
    for (auto k : ks) out << ',' << d << "_k" << k;
  out << '\n';
  for (const auto& m : method_order(rows)) {
    out << quoted(m);
    for (const auto& d : datasets)
      for (auto k : ks) {
        const MetricsRow* r = find_row(rows, m, d, k, true);
        out << ',' << (r ? cell(r->param_mae) : "");
      }
    out << '\n';
  }
}

void write_table3_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "method,trans_err_pct,trans_err_cm\n";
  for (const auto& r : rows) out << quoted(r.method) << ',' << cell(r.trans_err_pct) << ',' << cell(r.trans_err_cm) << '\n';
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "method,dataset,K,rollouts,param_mae,param_pct,trans_err_cm,trans_err_pct\n";
  for (const auto& r : rows) {
    out << quoted(r.method) << ',' << r.dataset << ',' << r.K << ',' << r.rollouts << ','
        << cell(r.param_mae) << ',' << cell(r.param_pct) << ',' << cell(r.trans_err_cm) << ','
        << cell(r.trans_err_pct) << '\n';
  }
}

void write_trace_csv(const std::vector<TracePoint>& trace, std::ostream& out) {
  const std::size_t dim = trace.empty() ? 1 : trace.front().target.size();
  out << "method,dataset,episode,iteration,rollouts";
  for (std::size_t d = 0; d < dim; ++d) out << ",estimate_" << d;
  for (std::size_t d = 0; d < dim; ++d) out << ",target_" << d;
  out << ",abs_error,discrepancy\n";
  for (const auto& p : trace) {
    if (p.estimate.size() != dim || p.target.size() != dim) {
      throw DimensionError("write_trace_csv: inconsistent parameter dimension");
    }
    out << quoted(p.method) << ',' << p.dataset << ',' << p.episode << ',' << p.iteration << ','
        << p.rollouts;
    double err = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      out << ',' << cell(p.estimate[d]);
      err += std::abs(p.estimate[d] - p.target[d]);
    }
    for (std::size_t d = 0; d < dim; ++d) out << ',' << cell(p.target[d]);
    out << ',' << cell(err / static_cast<double>(dim)) << ',' << cell(p.discrepancy) << '\n';
  }
}

void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "method,dataset,rollouts,mean_mae\n";
  for (const auto& p : curve) {
    out << quoted(p.method) << ',' << p.dataset << ',' << p.rollouts << ',' << cell(p.mean_mae) << '\n';
  }
}

void write_curve_svg(const std::vector<CurvePoint>& curve, std::ostream& out) {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  for (const auto& p : curve) {
    if (std::find(datasets.begin(), datasets.end(), p.dataset) == datasets.end()) datasets.push_back(p.dataset);
    if (std::find(methods.begin(), methods.end(), p.method) == methods.end()) methods.push_back(p.method);
  }
  const double pw = 420, ph = 300, margin = 50;
  const double width = pw * static_cast<double>(std::max<std::size_t>(1, datasets.size()));
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(ph + 40) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const double ox = pw * static_cast<double>(di);
    double xmax = 1.0, ymax = 0.0;
    for (const auto& p : curve)
      if (p.dataset == datasets[di]) {
        xmax = std::max(xmax, static_cast<double>(p.rollouts));
        if (std::isfinite(p.mean_mae)) ymax = std::max(ymax, p.mean_mae);
      }
    if (ymax <= 0.0) ymax = 1.0;
    auto sx = [&](double x) { return ox + margin + (pw - 1.5 * margin) * x / xmax; };
    auto sy = [&](double y) { return ph - margin + 20 - (ph - 1.5 * margin) * y / ymax; };
    out << "<text x=\"" << num(ox + pw / 2) << "\" y=\"16\" text-anchor=\"middle\">" << datasets[di] << "</text>\n";
    out << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(sx(xmax)) << "\" y2=\""
        << num(sy(0)) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(sx(0)) << "\" y2=\""
        << num(sy(ymax)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(sx(xmax)) << "\" y=\"" << num(sy(0) + 14) << "\" text-anchor=\"end\">rollouts "
        << num(xmax) << "</text>\n";
    out << "<text x=\"" << num(sx(0) - 4) << "\" y=\"" << num(sy(ymax)) << "\" text-anchor=\"end\">"
        << num(ymax) << "</text>\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::string pts;
      for (const auto& p : curve)
        if (p.dataset == datasets[di] && p.method == methods[mi] && std::isfinite(p.mean_mae)) {
          pts += num(sx(static_cast<double>(p.rollouts))) + "," + num(sy(p.mean_mae)) + " ";
        }
      if (pts.empty()) continue;
      const char* color = colors[mi % 6];
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts << "\"/>\n";
      out << "<text x=\"" << num(sx(xmax) - 90) << "\" y=\"" << num(40 + 14 * static_cast<double>(mi))
          << "\" fill=\"" << color << "\">" << methods[mi] << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace tunenet::eval
