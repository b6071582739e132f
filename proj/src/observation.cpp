#include "picsb/observation.hpp"

#include <cmath>
#include <numeric>

#include "picsb/errors.hpp"

namespace picsb {

Regime parse_regime(const std::string& s) {
  if (s == "R1" || s == "r1") return Regime::R1;
  if (s == "R2" || s == "r2") return Regime::R2;
  if (s == "R3" || s == "r3") return Regime::R3;
  throw ConfigError("unknown regime '" + s + "' (expected R1, R2 or R3)");
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::R1:
      return "R1";
    case Regime::R2:
      return "R2";
    case Regime::R3:
      return "R3";
  }
  return "?";
}

std::size_t ObservationSet::count() const {
  std::size_t c = 0;
  for (double m : mask.values()) c += m != 0.0 ? 1 : 0;
  return c;
}

std::size_t MaskGeometry::frames() const { return frame_axis ? dims.at(*frame_axis) : 1; }

std::size_t MaskGeometry::spatial_points() const { return dims_product(dims) / frames(); }

std::size_t MaskGeometry::flat_index(std::size_t f, std::size_t p) const {
  if (!frame_axis) return p;
  // Strides of the frame axis and of the flattened remaining axes.
  const std::size_t ax = *frame_axis;
  std::size_t inner = 1;
  for (std::size_t a = ax + 1; a < dims.size(); ++a) inner *= dims[a];
  const std::size_t outer_idx = p / inner;
  const std::size_t inner_idx = p % inner;
  return (outer_idx * dims[ax] + f) * inner + inner_idx;
}

namespace {

std::vector<std::size_t> draw_subset(std::size_t n, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

Field sample_mask(Regime regime, double ratio, const MaskGeometry& geometry, RngStream& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("observation ratio must lie in (0, 1]");
  if (geometry.frame_axis && *geometry.frame_axis >= geometry.dims.size()) {
    throw ConfigError("frame axis out of range");
  }
  const std::size_t frames = geometry.frames();
  const std::size_t n = geometry.spatial_points();
  if (frames == 0 || n == 0) throw ConfigError("mask geometry has no points");
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));

  Field mask(geometry.dims);
  auto mark = [&](std::size_t f, const std::vector<std::size_t>& pts) {
    for (auto p : pts) mask[geometry.flat_index(f, p)] = 1.0;
  };
  switch (regime) {
    case Regime::R1:
      for (std::size_t f = 0; f < frames; ++f) mark(f, draw_subset(n, k, rng));
      break;
    case Regime::R2: {
      const auto pts = draw_subset(n, k, rng);
      for (std::size_t f = 0; f < frames; ++f) mark(f, pts);
      break;
    }
    case Regime::R3: {
      RngStream global(rng.seed(), hash_label("regime-R3-global-sensors"));
      const auto pts = draw_subset(n, k, global);
      for (std::size_t f = 0; f < frames; ++f) mark(f, pts);
      break;
    }
  }
  return mask;
}

ObservationSet observe(const Field& x, const Field& mask) {
  if (!x.same_shape(mask)) throw ConfigError("observe: mask dims differ from state dims");
  Field values(x.dims(), x.axis_tags());
  for (std::size_t i = 0; i < x.size(); ++i) values[i] = mask[i] != 0.0 ? x[i] : 0.0;
  return ObservationSet{mask, std::move(values)};
}

Field project(const Field& x, const ObservationSet& obs) {
  if (!x.same_shape(obs.mask)) {
    throw ConfigError("project: dims " + dims_string(x.dims()) + " vs mask " + dims_string(obs.mask.dims()));
  }
  Field out = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (obs.mask[i] != 0.0) out[i] = obs.values[i];
  return out;
}

ObservationSet perturb_observations(const ObservationSet& obs, double alpha, double data_std, RngStream& rng) {
  if (alpha < 0.0) throw ConfigError("noise level alpha must be >= 0");
  ObservationSet out = obs;
  if (alpha == 0.0) return out;
  const double sigma = alpha * data_std;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (out.mask[i] != 0.0) out.values[i] += sigma * rng.normal();
  }
  return out;
}

double observation_misfit(const Field& x, const ObservationSet& obs) {
  if (!x.same_shape(obs.mask)) throw ConfigError("observation_misfit: dims mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (obs.mask[i] != 0.0) {
      const double d = x[i] - obs.values[i];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

}  // namespace picsb
