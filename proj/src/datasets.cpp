#include "tunenet/datasets.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "parallel.hpp"
#include "tunenet/errors.hpp"
#include "tunenet/format.hpp"
#include "tunenet/json_io.hpp"

namespace tunenet::data {

std::string to_string(Scenario s) { return s == Scenario::ball ? "ball" : "arm"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "ball") return Scenario::ball;
  if (s == "arm") return Scenario::arm;
  throw ParameterDomainError("unknown scenario '" + s + "'");
}

std::string to_string(ObservationKind k) {
  return k == ObservationKind::identity ? "identity" : "projected";
}

ObservationKind observation_kind_from_string(const std::string& s) {
  if (s == "identity") return ObservationKind::identity;
  if (s == "projected") return ObservationKind::projected;
  throw ParameterDomainError("unknown observation kind '" + s + "'");
}

void DatasetSpec::validate() const {
  if (proposed_range.empty()) throw ParameterDomainError("dataset spec: no parameters");
  if (proposed_range.size() != target_range.size()) {
    throw ParameterDomainError("dataset spec: proposed and target ranges differ in dimension");
  }
  for (std::size_t i = 0; i < proposed_range.size(); ++i) {
    if (!(proposed_range[i].hi > proposed_range[i].lo) || !(target_range[i].hi > target_range[i].lo)) {
      throw ParameterDomainError("dataset spec: degenerate parameter range");
    }
  }
  if (!(rate > 0.0)) throw ParameterDomainError("dataset spec: rate must be positive");
  if (scenario == Scenario::ball) {
    if (param_dim() != 1) throw ParameterDomainError("ball scenario tunes exactly one parameter");
    if (frames < 2) throw ParameterDomainError("dataset spec: frames must be >= 2");
    if (!(drop_height.lo > sim::kBallRadius) || drop_height.hi < drop_height.lo) {
      throw ParameterDomainError("dataset spec: invalid drop height range");
    }
  } else {
    if (param_dim() != 1) throw ParameterDomainError("arm scenario tunes exactly one parameter");
    if (proposed_observation != ObservationKind::identity ||
        target_observation != ObservationKind::identity) {
      throw ParameterDomainError("arm scenario supports identity observations only");
    }
  }
}

sim::Rollout scenario_rollout(const DatasetSpec& spec, const ParamVector& zeta,
                              const Episode& episode) {
  if (zeta.size() != spec.param_dim()) throw DimensionError("scenario_rollout: wrong parameter dimension");
  const double dt = 1.0 / spec.rate;
  if (spec.scenario == Scenario::ball) {
    return sim::simulate_ball({zeta[0], episode.drop_height}, dt, spec.frames);
  }
  return sim::simulate_arm({zeta[0]}, spec.trajectory, dt);
}

sim::Observation scenario_observation(const DatasetSpec& spec, const ParamVector& zeta,
                                      const Episode& episode, ObservationKind kind) {
  const sim::Rollout r = scenario_rollout(spec, zeta, episode);
  if (kind == ObservationKind::projected) return sim::observe_projected(r, episode.camera_seed);
  return sim::observe_identity(r, spec.rate);
}

Simulator proposed_simulator(const DatasetSpec& spec, const Episode& episode) {
  return [spec, episode](const ParamVector& zeta) {
    return scenario_observation(spec, zeta, episode, spec.proposed_observation);
  };
}

bool PairSample::operator==(const PairSample& o) const {
  auto same_obs = [](const sim::Observation& a, const sim::Observation& b) {
    return a.channels == b.channels && a.sample_rate == b.sample_rate;
  };
  return zeta_p == o.zeta_p && zeta_t == o.zeta_t && delta == o.delta &&
         drop_height == o.drop_height && camera_seed == o.camera_seed && same_obs(o_p, o.o_p) &&
         same_obs(o_t, o.o_t);
}

bool Dataset::operator==(const Dataset& o) const {
  return train == o.train && val == o.val && test == o.test &&
         nlohmann::json(spec) == nlohmann::json(o.spec);
}

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_observation(sim::Observation& obs) {
  for (auto& ch : obs.channels)
    for (double& v : ch) v = to_f32(v);
}

Seed camera_seed_for(Seed dataset_seed, std::size_t index) {
  return mix_seed(dataset_seed ^ 0xC0FFEE5EEDULL, index);
}

void finish_delta(PairSample& s) {
  s.delta.resize(s.zeta_p.size());
  for (std::size_t i = 0; i < s.zeta_p.size(); ++i) s.delta[i] = s.zeta_t[i] - s.zeta_p[i];
}

PairSample make_pair(const DatasetSpec& spec, std::size_t index) {
  std::mt19937_64 rng(mix_seed(spec.seed, index));
  PairSample s;
  for (const auto& r : spec.proposed_range) {
    s.zeta_p.push_back(to_f32(std::uniform_real_distribution<double>(r.lo, r.hi)(rng)));
  }
  for (const auto& r : spec.target_range) {
    s.zeta_t.push_back(to_f32(std::uniform_real_distribution<double>(r.lo, r.hi)(rng)));
  }
  if (spec.scenario == Scenario::ball) {
    s.drop_height = to_f32(
        std::uniform_real_distribution<double>(spec.drop_height.lo, spec.drop_height.hi)(rng));
  }
  s.camera_seed = camera_seed_for(spec.seed, index);
  finish_delta(s);
  const Episode ep{s.drop_height, s.camera_seed};
  s.o_p = scenario_observation(spec, s.zeta_p, ep, spec.proposed_observation);
  s.o_t = scenario_observation(spec, s.zeta_t, ep, spec.target_observation);
  round_observation(s.o_p);
  round_observation(s.o_t);
  return s;
}

}  // namespace

Dataset generate_pairs(const DatasetSpec& spec) {
  spec.validate();
  std::vector<PairSample> all(spec.total());
  detail::parallel_for(all.size(), [&](std::size_t i) {
    try {
      all[i] = make_pair(spec, i);
    } catch (const std::exception& e) {
      throw IndexedError(i, std::string("generate_pairs: simulation failed: ") + e.what());
    }
  });
  Dataset ds;
  ds.spec = spec;
  auto it = std::make_move_iterator(all.begin());
  ds.train.assign(it, it + static_cast<std::ptrdiff_t>(spec.n_train));
  it += static_cast<std::ptrdiff_t>(spec.n_train);
  ds.val.assign(it, it + static_cast<std::ptrdiff_t>(spec.n_val));
  it += static_cast<std::ptrdiff_t>(spec.n_val);
  ds.test.assign(it, it + static_cast<std::ptrdiff_t>(spec.n_test));
  return ds;
}

Histogram residual_histogram(const std::vector<PairSample>& samples, std::size_t bins,
                             Interval range, bool absolute) {
  if (bins < 1) throw ParameterDomainError("residual_histogram: bins must be >= 1");
  if (!(range.hi > range.lo)) throw ParameterDomainError("residual_histogram: degenerate range");
  Histogram h;
  h.range = range;
  h.counts.assign(bins, 0);
  for (const auto& s : samples) {
    if (s.delta.empty()) continue;
    const double x = absolute ? std::abs(s.delta[0]) : s.delta[0];
    if (x < range.lo || x > range.hi) continue;
    auto b = static_cast<std::size_t>((x - range.lo) / range.width() * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
    ++h.total;
  }
  h.density.resize(bins);
  const double norm = samples.empty() ? 0.0 : 1.0 / (static_cast<double>(samples.size()) * h.bin_width());
  for (std::size_t b = 0; b < bins; ++b) h.density[b] = static_cast<double>(h.counts[b]) * norm;
  return h;
}

ParamVector mean_residual(const std::vector<PairSample>& samples) {
  if (samples.empty()) return {};
  ParamVector m(samples.front().delta.size(), 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += s.delta[i];
  for (double& v : m) v /= static_cast<double>(samples.size());
  return m;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'T', 'N', 'D', 'S'};

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  unsigned char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
}

template <class UInt>
UInt get_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw FormatError("dataset file truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

void put_f32(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

double get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

struct SideShape {
  std::size_t channels = 0;
  std::size_t length = 0;
  double rate = 0.0;
};

SideShape side_shape(const Dataset& ds, bool proposed) {
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    if (!split->empty()) {
      const auto& o = proposed ? split->front().o_p : split->front().o_t;
      return {o.num_channels(), o.length(), o.sample_rate};
    }
  }
  return {};
}

void put_observation(std::ostream& out, const sim::Observation& obs, const SideShape& shape) {
  if (obs.num_channels() != shape.channels || obs.length() != shape.length) {
    throw DimensionError("write_dataset: samples differ in observation shape");
  }
  for (const auto& ch : obs.channels)
    for (double v : ch) put_f32(out, v);
}

sim::Observation get_observation(std::istream& in, const SideShape& shape) {
  sim::Observation obs;
  obs.sample_rate = shape.rate;
  obs.channels.assign(shape.channels, std::vector<double>(shape.length));
  for (auto& ch : obs.channels)
    for (double& v : ch) v = get_f32(in);
  return obs;
}

}  // namespace

void write_dataset(const Dataset& ds, std::ostream& out) {
  const SideShape p = side_shape(ds, true);
  const SideShape t = side_shape(ds, false);
  nlohmann::json header;
  header["format"] = "tunenet-dataset";
  header["version"] = kDatasetFormatVersion;
  header["spec"] = ds.spec;
  header["seed"] = ds.spec.seed;
  header["counts"] = {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}};
  header["param_dim"] = ds.spec.param_dim();
  header["o_p"] = {{"channels", p.channels}, {"length", p.length}, {"sample_rate", p.rate}};
  header["o_t"] = {{"channels", t.channels}, {"length", t.length}, {"sample_rate", t.rate}};
  const std::string text = header.dump();

  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kDatasetFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const auto& s : *split) {
      for (double v : s.zeta_p) put_f32(out, v);
      for (double v : s.zeta_t) put_f32(out, v);
      put_f32(out, s.drop_height);
      put_observation(out, s.o_p, p);
      put_observation(out, s.o_t, t);
    }
  }
  if (!out) throw FormatError("failed to write dataset");
}

Dataset read_dataset(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a tunenet dataset file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kDatasetFormatVersion) {
    throw FormatError("unsupported dataset format version " + std::to_string(version) +
                      " (expected " + std::to_string(kDatasetFormatVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(in);
  if (header_len > (1ULL << 26)) throw FormatError("dataset header length is implausible");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw FormatError("dataset header truncated");
  }

  Dataset ds;
  SideShape p, t;
  std::size_t counts[3];
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("version").get<std::uint32_t>() != version) {
      throw FormatError("dataset header version disagrees with file version");
    }
    ds.spec = header.at("spec").get<DatasetSpec>();
    counts[0] = header.at("counts").at("train").get<std::size_t>();
    counts[1] = header.at("counts").at("val").get<std::size_t>();
    counts[2] = header.at("counts").at("test").get<std::size_t>();
    for (auto [side, shape] : {std::pair{"o_p", &p}, std::pair{"o_t", &t}}) {
      const auto& j = header.at(side);
      *shape = {j.at("channels").get<std::size_t>(), j.at("length").get<std::size_t>(),
                j.at("sample_rate").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt dataset header: ") + e.what());
  }

  const std::size_t pdim = ds.spec.param_dim();
  std::size_t index = 0;
  for (auto [split, count] : {std::pair{&ds.train, counts[0]}, std::pair{&ds.val, counts[1]},
                              std::pair{&ds.test, counts[2]}}) {
    split->reserve(count);
    for (std::size_t i = 0; i < count; ++i, ++index) {
      PairSample s;
      s.zeta_p.resize(pdim);
      s.zeta_t.resize(pdim);
      for (double& v : s.zeta_p) v = get_f32(in);
      for (double& v : s.zeta_t) v = get_f32(in);
      s.drop_height = get_f32(in);
      s.camera_seed = camera_seed_for(ds.spec.seed, index);
      s.o_p = get_observation(in, p);
      s.o_t = get_observation(in, t);
      finish_delta(s);
      split->push_back(std::move(s));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after dataset payload");
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_dataset(dataset, out);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing dataset file " + path);
  return read_dataset(in);
}

void export_dataset_csv(const Dataset& ds, std::ostream& out, bool with_observations) {
  const std::size_t pdim = ds.spec.param_dim();
  out << "split,index,drop_height";
  for (const char* name : {"zeta_p", "zeta_t", "delta"})
    for (std::size_t d = 0; d < pdim; ++d) out << ',' << name << d;
  out << '\n';
  const std::pair<const char*, const std::vector<PairSample>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& [name, split] : splits) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      const auto& s = (*split)[i];
      out << name << ',' << i << ',' << format_double(s.drop_height);
      for (const auto* v : {&s.zeta_p, &s.zeta_t, &s.delta})
        for (double x : *v) out << ',' << format_double(x);
      out << '\n';
    }
  }
  if (!with_observations) return;
  out << "\nsplit,index,side,channel,frame,value\n";
  for (const auto& [name, split] : splits) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      const auto& s = (*split)[i];
      for (auto [side, obs] : {std::pair{"p", &s.o_p}, std::pair{"t", &s.o_t}}) {
        for (std::size_t c = 0; c < obs->num_channels(); ++c)
          for (std::size_t f = 0; f < obs->length(); ++f)
            out << name << ',' << i << ',' << side << ',' << c << ',' << f << ','
                << format_double(obs->channels[c][f]) << '\n';
      }
    }
  }
}

}  // namespace tunenet::data
