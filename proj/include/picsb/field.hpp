#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace picsb {

using Dims = std::vector<std::size_t>;
using Tags = std::vector<std::string>;

std::size_t dims_product(const Dims& dims);
std::string dims_string(const Dims& dims);

/// Dense row-major real field on a regular grid (last axis fastest).
///
/// Axis order is [frame,] row, column for 2D benchmarks and [space, time]
/// for Burgers space-time fields. Axis tags are informational only and are
/// not part of the on-disk format.
class Field {
 public:
  Field() = default;
  explicit Field(Dims dims, std::vector<std::string> axis_tags = {});
  Field(Dims dims, std::vector<double> values, std::vector<std::string> axis_tags = {});

  static Field filled(const Dims& dims, double value);
  static Field zeros_like(const Field& other);

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }
  std::vector<double>& data() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double& at(std::size_t i, std::size_t j) { return values_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * dims_[1] + j]; }
  double& at(std::size_t f, std::size_t i, std::size_t j) {
    return values_[(f * dims_[1] + i) * dims_[2] + j];
  }
  double at(std::size_t f, std::size_t i, std::size_t j) const {
    return values_[(f * dims_[1] + i) * dims_[2] + j];
  }

  const std::vector<std::string>& axis_tags() const { return tags_; }
  void set_axis_tags(std::vector<std::string> tags);

  bool same_shape(const Field& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

  /// Bit-exact comparison of dims and values.
  bool bit_equal(const Field& other) const;

  friend bool operator==(const Field& a, const Field& b) { return a.bit_equal(b); }

 private:
  Dims dims_;
  std::vector<double> values_;
  std::vector<std::string> tags_;
};

/// Writes the FGRD0001 container: magic, u32 rank, u32 dims, f64 values (all
/// little-endian). The write goes through a temporary file and a rename.
void field_write(const Field& field, const std::filesystem::path& path);

/// Reads and validates an FGRD0001 file.
Field field_read(const std::filesystem::path& path);

/// Called with the path of every field_read; used for data-access audits.
using FieldReadObserver = std::function<void(const std::filesystem::path&)>;
void set_field_read_observer(FieldReadObserver observer);

/// Serializes into an in-memory FGRD byte buffer (same layout as the file).
std::vector<unsigned char> field_encode(const Field& field);
Field field_decode(std::span<const unsigned char> bytes, const std::string& origin = "<memory>");

/// Writes bytes to `path` atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

/// FNV-1a 64-bit digest rendered as 16 hex digits; used for manifest checksums.
std::string checksum_hex(std::span<const unsigned char> bytes);
std::string file_checksum(const std::filesystem::path& path);

// Small elementwise helpers used across modules.
double field_l2(const Field& f);
double field_mean(const Field& f);
double field_std(const Field& f);
double field_max_abs(const Field& f);

}  // namespace picsb
