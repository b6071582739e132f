#include "picsb/field.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "picsb/errors.hpp"

namespace picsb {

namespace {

constexpr char kMagic[8] = {'F', 'G', 'R', 'D', '0', '0', '0', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFu));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

}  // namespace

std::size_t dims_product(const Dims& dims) {
  std::size_t n = dims.empty() ? 0 : 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

Field::Field(Dims dims, std::vector<std::string> axis_tags)
    : dims_(std::move(dims)), values_(dims_product(dims_), 0.0), tags_(std::move(axis_tags)) {}

Field::Field(Dims dims, std::vector<double> values, std::vector<std::string> axis_tags)
    : dims_(std::move(dims)), values_(std::move(values)), tags_(std::move(axis_tags)) {
  if (values_.size() != dims_product(dims_)) {
    throw ConfigError("field value count " + std::to_string(values_.size()) +
                      " does not match dims " + dims_string(dims_));
  }
}

Field Field::filled(const Dims& dims, double value) {
  Field f(dims);
  std::fill(f.values_.begin(), f.values_.end(), value);
  return f;
}

Field Field::zeros_like(const Field& other) { return Field(other.dims_, other.tags_); }

void Field::set_axis_tags(std::vector<std::string> tags) { tags_ = std::move(tags); }

bool Field::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Field::bit_equal(const Field& other) const {
  if (dims_ != other.dims_) return false;
  return values_.empty() ||
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

std::vector<unsigned char> field_encode(const Field& field) {
  if (field.rank() == 0) throw ConfigError("empty dims");
  if (!field.all_finite()) throw NumericalError("refusing to serialize non-finite field values");
  std::vector<unsigned char> out(8);
  out.reserve(12 + 4 * field.rank() + 8 * field.size());
  std::memcpy(out.data(), kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(field.rank()));
  for (auto d : field.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : field.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Field field_decode(std::span<const unsigned char> bytes, const std::string& origin) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoError(origin + ": not an FGRD file");
  }
  const std::uint32_t rank = get_u32(bytes.data() + 8);
  if (rank == 0) throw IoError(origin + ": empty dims");
  const std::size_t header = 12 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) throw IoError(origin + ": size mismatch (truncated header)");
  Dims dims(rank);
  for (std::uint32_t r = 0; r < rank; ++r) dims[r] = get_u32(bytes.data() + 12 + 4 * r);
  const std::size_t count = dims_product(dims);
  if (bytes.size() != header + 8 * count) {
    throw IoError(origin + ": size mismatch (dims " + dims_string(dims) + " need " +
                  std::to_string(count) + " values, payload holds " +
                  std::to_string((bytes.size() - header) / 8) + ")");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<double>(get_u64(bytes.data() + header + 8 * i));
  }
  return Field(std::move(dims), std::move(values));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path.string() + ": cannot open for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": rename failed: " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open for reading");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void field_write(const Field& field, const std::filesystem::path& path) {
  write_file_atomic(path, field_encode(field));
}

namespace {
FieldReadObserver& read_observer() {
  static FieldReadObserver obs;
  return obs;
}
}  // namespace

void set_field_read_observer(FieldReadObserver observer) { read_observer() = std::move(observer); }

Field field_read(const std::filesystem::path& path) {
  if (read_observer()) read_observer()(path);
  return field_decode(read_file_bytes(path), path.string());
}

std::string checksum_hex(std::span<const unsigned char> bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) { return checksum_hex(read_file_bytes(path)); }

double field_l2(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s);
}

double field_mean(const Field& f) {
  if (f.empty()) return 0.0;
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double field_std(const Field& f) {
  if (f.empty()) return 0.0;
  const double m = field_mean(f);
  double s = 0.0;
  for (double v : f.values()) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(f.size()));
}

double field_max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace picsb
