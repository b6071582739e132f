#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "picsb/field.hpp"
#include "picsb/rng.hpp"

namespace picsb {

enum class Regime { R1, R2, R3 };

Regime parse_regime(const std::string& s);
std::string to_string(Regime r);

/// Binary mask M plus observed values y laid out on the state grid.
struct ObservationSet {
  Field mask;
  Field values;

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  const Dims& dims() const { return mask.dims(); }
};

/// Splits a state layout into frames of spatial points.
struct MaskGeometry {
  Dims dims;
  /// Axis holding physical time frames; none for steady problems.
  std::optional<std::size_t> frame_axis;

  std::size_t frames() const;
  std::size_t spatial_points() const;
  /// Flat state index of spatial point `p` in frame `f`.
  std::size_t flat_index(std::size_t f, std::size_t p) const;
};

/// Samples round(ratio * spatial_points) locations per frame without
/// replacement. R1 redraws per frame; R2 draws once and replicates across
/// frames; R3 derives its stream from the seed alone, so every sample drawn
/// under one dataset seed gets the same sensors.
Field sample_mask(Regime regime, double ratio, const MaskGeometry& geometry, RngStream& rng);

/// values = mask * x.
ObservationSet observe(const Field& x, const Field& mask);

/// M * y + (1 - M) * x.
Field project(const Field& x, const ObservationSet& obs);

/// Adds N(0, (alpha * data_std)^2) to observed entries only.
ObservationSet perturb_observations(const ObservationSet& obs, double alpha, double data_std, RngStream& rng);

/// || M * (x - y) ||_2.
double observation_misfit(const Field& x, const ObservationSet& obs);

}  // namespace picsb
