#include "picsb/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "picsb/errors.hpp"

namespace picsb {

namespace {

constexpr char kCkptMagic[8] = {'P', 'C', 'K', 'P', '0', '0', '0', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
std::uint64_t get_uint(std::span<const unsigned char> b, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::vector<ParamEntry> param_layout(const NetConfig& cfg) {
  cfg.validate();
  std::vector<ParamEntry> out;
  std::size_t off = 0;
  auto add = [&](std::string name, ad::Shape shape) {
    out.push_back(ParamEntry{std::move(name), off, shape});
    off += ad::shape_size(shape);
  };
  const std::size_t k = cfg.kernel;
  add("time.w1", {cfg.time_hidden, 1});
  add("time.b1", {cfg.time_hidden});
  add("time.w2", {cfg.d_cond, cfg.time_hidden});
  add("time.b2", {cfg.d_cond});
  std::size_t cin = cfg.in_channels;
  for (std::size_t e = 0; e < cfg.enc.size(); ++e) {
    const std::string p = "enc" + std::to_string(e);
    add(p + ".conv.w", {cfg.enc[e], cin, k, k});
    add(p + ".conv.b", {cfg.enc[e]});
    add(p + ".adain.w", {2 * cfg.enc[e], cfg.d_cond});
    add(p + ".adain.b", {2 * cfg.enc[e]});
    cin = cfg.enc[e];
  }
  const std::size_t levels = cfg.enc.size();
  for (std::size_t d = 0; d < levels; ++d) {
    const std::string p = "dec" + std::to_string(d);
    const std::size_t in = d == 0 ? cfg.enc[levels - 1] : cfg.dec[d - 1] + cfg.enc[levels - 1 - d];
    add(p + ".w", {cfg.dec[d], in, k, k});
    add(p + ".b", {cfg.dec[d]});
  }
  add("final.w", {cfg.in_channels, cfg.dec[levels - 1], k, k});
  add("final.b", {cfg.in_channels});
  return out;
}

std::size_t param_count(const NetConfig& cfg) {
  const auto layout = param_layout(cfg);
  return layout.back().offset + layout.back().size();
}

const ParamEntry& NetParams::entry(const std::string& name) const {
  for (const auto& e : layout)
    if (e.name == name) return e;
  throw ConfigError("unknown parameter '" + name + "'");
}

std::span<const double> NetParams::view(const std::string& name) const {
  const auto& e = entry(name);
  return std::span<const double>(flat).subspan(e.offset, e.size());
}

std::span<double> NetParams::view(const std::string& name) {
  const auto& e = entry(name);
  return std::span<double>(flat).subspan(e.offset, e.size());
}

std::vector<std::vector<double>> NetParams::to_tensors() const {
  std::vector<std::vector<double>> out;
  for (const auto& e : layout) {
    auto v = view(e.name);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

NetParams NetParams::from_tensors(const NetConfig& cfg, const std::vector<std::vector<double>>& tensors) {
  NetParams p = zero_params(cfg);
  if (tensors.size() != p.layout.size()) throw ConfigError("from_tensors: tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].size() != p.layout[i].size()) throw ConfigError("from_tensors: size mismatch for " + p.layout[i].name);
    std::copy(tensors[i].begin(), tensors[i].end(), p.flat.begin() + static_cast<std::ptrdiff_t>(p.layout[i].offset));
  }
  return p;
}

NetParams zero_params(const NetConfig& cfg) {
  NetParams p;
  p.config = cfg;
  p.layout = param_layout(cfg);
  p.flat.assign(p.layout.back().offset + p.layout.back().size(), 0.0);
  return p;
}

NetParams init_params(const NetConfig& cfg, RngStream& rng) {
  NetParams p = zero_params(cfg);
  for (const auto& e : p.layout) {
    auto v = p.view(e.name);
    const bool bias = e.shape.size() == 1;
    if (bias) {
      // AdaIN bias: first half is gamma (starts at 1), second half beta.
      if (e.name.ends_with(".adain.b"))
        for (std::size_t i = 0; i < v.size() / 2; ++i) v[i] = 1.0;
      continue;
    }
    std::size_t fan_in = 1, fan_out = e.shape[0];
    for (std::size_t a = 1; a < e.shape.size(); ++a) fan_in *= e.shape[a];
    if (e.shape.size() == 4) fan_out *= e.shape[2] * e.shape[3];
    const double bound = xavier_bound(fan_in, fan_out);
    for (auto& x : v) x = rng.uniform(-bound, bound);
  }
  return p;
}

ad::Padding parse_padding(const std::string& s) {
  if (s == "circular") return ad::Padding::circular;
  if (s == "reflect") return ad::Padding::reflect;
  if (s == "zero") return ad::Padding::zero;
  throw ConfigError("unknown padding '" + s + "'");
}

NetView::NetView(const NetParams& params, ad::Var flat) : params_(&params), flat_(flat) {
  if (flat.size() != params.flat.size()) throw ConfigError("NetView: flat size does not match layout");
}

ad::Var NetView::get(const std::string& name) const {
  const auto& e = params_->entry(name);
  return ad::slice(flat_, e.offset, e.shape);
}

ad::Var time_embed(const NetView& net, double tau) {
  ad::Tape* t = net.get("time.b1").tape();
  ad::Var x = t->constant({1}, {tau});
  ad::Var h = ad::silu(ad::linear(x, net.get("time.w1"), net.get("time.b1")));
  return ad::linear(h, net.get("time.w2"), net.get("time.b2"));
}

std::vector<double> time_embed(double tau, const NetParams& params) {
  ad::Tape tape;
  ad::Var flat = tape.constant({params.flat.size()}, params.flat);
  NetView view(params, flat);
  ad::Var c = time_embed(view, tau);
  return {c.value().begin(), c.value().end()};
}

ad::Var adain(ad::Var x, ad::Var cond, ad::Var w, ad::Var b, double eps) {
  const std::size_t c = x.shape().at(0);
  if (w.shape().size() != 2 || w.shape()[0] != 2 * c || w.shape()[1] != cond.size()) {
    throw ConfigError("adain: channel mismatch (x has " + std::to_string(c) + " channels)");
  }
  ad::Var gb = ad::linear(cond, w, b);
  ad::Var gamma = ad::slice(gb, 0, {c});
  ad::Var beta = ad::slice(gb, c, {c});
  return ad::channel_affine(ad::instance_norm(x, eps), gamma, beta);
}

ad::Var net_forward(const NetView& net, ad::Var x, double tau) {
  const NetConfig& cfg = net.config();
  const auto& s = x.shape();
  const std::size_t levels = cfg.enc.size();
  const std::size_t div = std::size_t{1} << (levels - 1);
  if (s.size() != 3 || s[0] != cfg.in_channels) {
    throw ConfigError("net_forward: expected input [" + std::to_string(cfg.in_channels) + ", H, W]");
  }
  if (s[1] % div != 0 || s[2] % div != 0) {
    throw ConfigError("net_forward: spatial dims must be divisible by " + std::to_string(div));
  }
  const ad::Padding pad = parse_padding(cfg.padding);
  ad::Var cond = time_embed(net, tau);

  std::vector<ad::Var> skips;
  ad::Var h = x;
  for (std::size_t e = 0; e < levels; ++e) {
    const std::string p = "enc" + std::to_string(e);
    h = ad::conv2d(h, net.get(p + ".conv.w"), net.get(p + ".conv.b"), e == 0 ? 1 : 2, pad);
    h = ad::silu(adain(h, cond, net.get(p + ".adain.w"), net.get(p + ".adain.b"), cfg.norm_eps));
    skips.push_back(h);
  }
  h = ad::silu(ad::conv2d(h, net.get("dec0.w"), net.get("dec0.b"), 1, pad));
  for (std::size_t d = 1; d < levels; ++d) {
    const std::string p = "dec" + std::to_string(d);
    h = ad::concat0({ad::upsample2x(h), skips[levels - 1 - d]});
    h = ad::silu(ad::conv2d(h, net.get(p + ".w"), net.get(p + ".b"), 1, pad));
  }
  return ad::conv2d(h, net.get("final.w"), net.get("final.b"), 1, pad);
}

Field net_apply(const NetParams& params, const Field& x, double tau) {
  ad::Tape tape;
  ad::Var flat = tape.constant({params.flat.size()}, params.flat);
  NetView view(params, flat);
  ad::Shape shape;
  if (x.rank() == 2) {
    shape = {1, x.dims()[0], x.dims()[1]};
  } else if (x.rank() == 3) {
    shape = {x.dims()[0], x.dims()[1], x.dims()[2]};
  } else {
    throw ConfigError("net_apply: expected a 2D or 3D field");
  }
  ad::Var in = tape.constant(shape, x.data());
  ad::Var out = net_forward(view, in, tau);
  return Field(x.dims(), std::vector<double>(out.value().begin(), out.value().end()), x.axis_tags());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["net"] = nlohmann::json::parse(net_config_to_json(ckpt.params.config));
  header["step"] = ckpt.step;
  header["rng"] = {{"seed", ckpt.rng_seed}, {"stream_id", ckpt.rng_stream}, {"counter", ckpt.rng_counter}};
  header["extra"] = nlohmann::json::parse(ckpt.extra);
  const std::string text = header.dump();
  for (double v : ckpt.params.flat)
    if (!std::isfinite(v)) throw NumericalError("checkpoint " + path.string() + ": non-finite parameter");
  std::vector<unsigned char> out(kCkptMagic, kCkptMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put_u64(out, ckpt.params.flat.size());
  for (double v : ckpt.params.flat) put_u64(out, std::bit_cast<std::uint64_t>(v));
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::span<const unsigned char> b(bytes);
  if (b.size() < 12 || std::memcmp(b.data(), kCkptMagic, 8) != 0) {
    throw IoError(path.string() + ": not a checkpoint file");
  }
  const std::size_t hlen = get_uint(b, 8, 4);
  if (b.size() < 12 + hlen + 8) throw IoError(path.string() + ": size mismatch");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(b.begin() + 12, b.begin() + static_cast<std::ptrdiff_t>(12 + hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad checkpoint header: " + e.what());
  }
  const std::size_t count = get_uint(b, 12 + hlen, 8);
  if (b.size() != 12 + hlen + 8 + 8 * count) throw IoError(path.string() + ": size mismatch");
  Checkpoint c;
  c.params = zero_params(net_config_from_json(header.at("net").dump()));
  if (c.params.flat.size() != count) throw IoError(path.string() + ": parameter count does not match its config");
  for (std::size_t i = 0; i < count; ++i) c.params.flat[i] = std::bit_cast<double>(get_uint(b, 12 + hlen + 8 + 8 * i, 8));
  c.step = header.value("step", std::uint64_t{0});
  c.rng_seed = header["rng"].value("seed", std::uint64_t{0});
  c.rng_stream = header["rng"].value("stream_id", std::uint64_t{0});
  c.rng_counter = header["rng"].value("counter", std::uint64_t{0});
  c.extra = header.value("extra", nlohmann::json::object()).dump();
  return c;
}

}  // namespace picsb
