#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "picsb/ad.hpp"
#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/rng.hpp"

namespace picsb {

/// One named parameter tensor inside the flat vector.
struct ParamEntry {
  std::string name;
  std::size_t offset;
  ad::Shape shape;
  std::size_t size() const { return ad::shape_size(shape); }
};

/// Parameter layout of the velocity network. Order: time MLP (W1, b1, W2,
/// b2), per encoder block (conv W, conv b, AdaIN W, AdaIN b), per decoder
/// block (W, b), final conv (W, b).
std::vector<ParamEntry> param_layout(const NetConfig& cfg);
std::size_t param_count(const NetConfig& cfg);

/// Network weights held as one flat vector plus its layout.
struct NetParams {
  NetConfig config;
  std::vector<double> flat;
  std::vector<ParamEntry> layout;

  const ParamEntry& entry(const std::string& name) const;
  std::span<const double> view(const std::string& name) const;
  std::span<double> view(const std::string& name);

  /// Tensor-by-tensor copy in layout order (inverse of from_tensors).
  std::vector<std::vector<double>> to_tensors() const;
  static NetParams from_tensors(const NetConfig& cfg, const std::vector<std::vector<double>>& tensors);
};

NetParams zero_params(const NetConfig& cfg);
/// Xavier-uniform weights, zero biases, AdaIN maps with gamma-bias 1.
NetParams init_params(const NetConfig& cfg, RngStream& rng);

ad::Padding parse_padding(const std::string& s);

/// Parameter tensors sliced out of a flat tape variable.
class NetView {
 public:
  NetView(const NetParams& params, ad::Var flat);
  ad::Var get(const std::string& name) const;
  const NetConfig& config() const { return params_->config; }

 private:
  const NetParams* params_;
  ad::Var flat_;
};

/// cond = W2 silu(W1 tau + b1) + b2.
ad::Var time_embed(const NetView& net, double tau);
std::vector<double> time_embed(double tau, const NetParams& params);

/// gamma * IN(x) + beta with (gamma, beta) = Linear(cond).
ad::Var adain(ad::Var x, ad::Var cond, ad::Var w, ad::Var b, double eps);

/// Velocity v(x, tau) for x: [in_channels, H, W] with H, W divisible by
/// 2^(levels - 1).
ad::Var net_forward(const NetView& net, ad::Var x, double tau);

/// Convenience evaluation on a Field (no gradients). Burgers/Darcy fields
/// [H, W] are treated as one channel.
Field net_apply(const NetParams& params, const Field& x, double tau);

// ---- checkpoints -------------------------------------------------------------
struct Checkpoint {
  NetParams params;
  std::uint64_t step = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream = 0;
  std::uint64_t rng_counter = 0;
  /// Free-form JSON object text (e.g. model kind, normalization constants).
  std::string extra = "{}";
};

/// "PCKP0001", u32 header length, JSON header, u64 count, f64 values (LE).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace picsb
