#include "picsb/rng.hpp"

#include <cmath>
#include <numbers>

namespace picsb {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x9E3779B97F4A7C15ULL));
}

}  // namespace

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(combine(mix64(seed), stream_id)) {}

RngStream RngStream::fork(std::string_view label) const {
  return RngStream(seed_, combine(stream_id_, hash_label(label)));
}

RngStream RngStream::fork(std::string_view label, std::uint64_t index) const {
  return RngStream(seed_, combine(combine(stream_id_, hash_label(label)), index));
}

std::uint64_t RngStream::next_u64() {
  // Two rounds of the splitmix finalizer over (key, counter).
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open0();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

std::vector<double> RngStream::normals(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = normal();
  return out;
}

RngStream rng_fork(const RngStream& parent, std::string_view label) { return parent.fork(label); }

}  // namespace picsb
