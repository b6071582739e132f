#include "picsb/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

#include "picsb/errors.hpp"

namespace picsb {

namespace {

using Rgb = std::array<unsigned char, 3>;

// Piecewise-linear colormaps on [0, 1].
constexpr std::array<std::array<double, 3>, 5> kSequential{{
    {0.267, 0.005, 0.329}, {0.229, 0.322, 0.546}, {0.128, 0.567, 0.551}, {0.369, 0.789, 0.383}, {0.993, 0.906, 0.144}}};
constexpr std::array<std::array<double, 3>, 3> kDiverging{{{0.230, 0.299, 0.754}, {0.865, 0.865, 0.865}, {0.706, 0.016, 0.150}}};

template <std::size_t N>
Rgb lookup(const std::array<std::array<double, 3>, N>& map, double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * static_cast<double>(N - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), N - 2);
  const double w = pos - static_cast<double>(i);
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = static_cast<unsigned char>(std::lround(255.0 * ((1 - w) * map[i][k] + w * map[i + 1][k])));
  return c;
}

struct Range {
  double lo, hi;
};

Range range_of(const std::vector<Field>& slices, bool symmetric) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& f : slices)
    for (double v : f.values())
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = hi = 0.0;
  if (symmetric) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    return {-m, m};
  }
  return {lo, hi};
}

void write_png(const std::filesystem::path& path, std::size_t w, std::size_t h, const std::vector<unsigned char>& rgb) {
  const auto tmp = path.string() + ".tmp";
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(tmp.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + tmp);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r) png_write_row(png, rgb.data() + r * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();
  std::filesystem::rename(tmp, path);
}

void render(const std::vector<Field>& slices, const PlotOptions& opt, const std::filesystem::path& out) {
  if (slices.empty()) throw ConfigError("plot: nothing to draw");
  if (opt.scale == 0) throw ConfigError("plot: scale must be >= 1");
  const std::size_t rows = slices[0].dims()[0], cols = slices[0].dims()[1];
  for (const auto& s : slices)
    if (s.dims() != slices[0].dims()) throw ConfigError("plot: panels differ in dims");
  const Range rg = range_of(slices, opt.symmetric);
  const std::size_t gap = slices.size() > 1 ? opt.scale : 0;
  const std::size_t pw = cols * opt.scale;
  const std::size_t w = slices.size() * pw + (slices.size() - 1) * gap, h = rows * opt.scale;
  std::vector<unsigned char> rgb(w * h * 3, 255);
  for (std::size_t p = 0; p < slices.size(); ++p) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double v = slices[p].at(i, j);
        const double t = rg.hi > rg.lo ? (v - rg.lo) / (rg.hi - rg.lo) : 0.5;
        const Rgb c = opt.symmetric ? lookup(kDiverging, t) : lookup(kSequential, t);
        for (std::size_t a = 0; a < opt.scale; ++a)
          for (std::size_t b = 0; b < opt.scale; ++b) {
            const std::size_t x = p * (pw + gap) + j * opt.scale + b, y = i * opt.scale + a;
            std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>((y * w + x) * 3));
          }
      }
  }
  write_png(out, w, h, rgb);
}

}  // namespace

Field plot_slice(const Field& f, std::optional<std::size_t> frame) {
  if (f.rank() == 2) {
    if (frame && *frame != 0) throw ConfigError("plot: frame " + std::to_string(*frame) + " out of range for a 2D field");
    return f;
  }
  if (f.rank() != 3) throw ConfigError("plot: expected a 2D or 3D field, got " + dims_string(f.dims()));
  const std::size_t nf = f.dims()[0], n = f.dims()[1], m = f.dims()[2];
  const std::size_t k = frame.value_or(nf - 1);
  if (k >= nf) throw ConfigError("plot: frame " + std::to_string(k) + " out of range [0, " + std::to_string(nf - 1) + "]");
  Field out({n, m}, Tags{"row", "col"});
  std::copy_n(f.values().begin() + static_cast<std::ptrdiff_t>(k * n * m), n * m, out.values().begin());
  return out;
}

void plot_field(const Field& f, const PlotOptions& opt, const std::filesystem::path& out_png) {
  render({plot_slice(f, opt.frame)}, opt, out_png);
}

void plot_side_by_side(const std::vector<Field>& fields, const PlotOptions& opt, const std::filesystem::path& out_png) {
  std::vector<Field> s;
  for (const auto& f : fields) s.push_back(plot_slice(f, opt.frame));
  render(s, opt, out_png);
}

Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw IoError("cannot read PNG " + path.string());
  img.format = PNG_FORMAT_RGB;
  Image out;
  out.width = img.width;
  out.height = img.height;
  out.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string());
  }
  return out;
}

}  // namespace picsb
