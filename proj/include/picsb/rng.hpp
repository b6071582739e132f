#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace picsb {

/// Counter-based random stream keyed by (seed, stream_id).
///
/// Draw k of a stream is a pure function of (seed, stream_id, k), so streams
/// can be forked and consumed in any order without sequencing constraints.
/// A single stream is not thread-safe; fork one per worker instead.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  /// Child stream determined by (seed, stream_id, label); independent of how
  /// many values the parent has already produced.
  RngStream fork(std::string_view label) const;
  RngStream fork(std::string_view label, std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open0();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  std::vector<double> normals(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.seed_ == b.seed_ && a.stream_id_ == b.stream_id_ && a.counter_ == b.counter_;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

RngStream rng_fork(const RngStream& parent, std::string_view label);

std::uint64_t hash_label(std::string_view label);

}  // namespace picsb
