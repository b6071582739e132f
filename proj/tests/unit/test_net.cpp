#include "doctest.h"
#include "helpers.hpp"
#include "picsb/bridge.hpp"
#include "picsb/errors.hpp"
#include "picsb/net.hpp"
#include "picsb/trainer.hpp"

using namespace picsb;

namespace {

NetConfig tiny() {
  NetConfig c;
  c.enc = {4, 8};
  c.dec = {8, 4};
  return c;
}

}  // namespace

TEST_CASE("net: parameter count of the tiny config") {
  // time 16+16+128+8, enc0 36+4+64+8, enc1 288+8+128+16, dec0 576+8, dec1 432+4, final 36+1
  CHECK(param_count(tiny()) == 1777);
  const auto p = zero_params(tiny());
  CHECK(p.flat.size() == 1777);
  CHECK(NetParams::from_tensors(p.config, p.to_tensors()).flat == p.flat);
}

TEST_CASE("net: init is deterministic in the stream") {
  RngStream a(1, 0), b(1, 0), c(2, 0);
  CHECK(init_params(tiny(), a).flat == init_params(tiny(), b).flat);
  RngStream a2(1, 0);
  CHECK(init_params(tiny(), a2).flat != init_params(tiny(), c).flat);
}

TEST_CASE("net: adain with zero condition is plain instance norm") {
  RngStream r(3, 0);
  NetParams p = init_params(tiny(), r);
  ad::Tape t;
  ad::Var flat = t.constant({p.flat.size()}, p.flat);
  NetView v(p, flat);
  // Large variance keeps the epsilon shift of the std below 1e-6.
  const Field xf = test::random_field({4, 8, 8}, 4, 100.0);
  ad::Var x = t.constant({4, 8, 8}, {xf.values().begin(), xf.values().end()});
  ad::Var cond = t.constant({8}, std::vector<double>(8, 0.0));
  ad::Var y = adain(x, cond, v.get("enc0.adain.w"), v.get("enc0.adain.b"), 1e-5);
  ad::Var in = ad::instance_norm(x, 1e-5);
  for (std::size_t k = 0; k < xf.size(); ++k) CHECK(y.value()[k] == doctest::Approx(in.value()[k]).epsilon(1e-14));
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, s = 0;
    for (std::size_t k = 0; k < 64; ++k) m += in.value()[c * 64 + k];
    m /= 64;
    for (std::size_t k = 0; k < 64; ++k) s += std::pow(in.value()[c * 64 + k] - m, 2);
    CHECK(std::abs(m) < 1e-12);
    CHECK(std::sqrt(s / 64) == doctest::Approx(1.0).epsilon(1e-6));
  }
  ad::Var constant = t.constant({4, 8, 8}, std::vector<double>(256, 3.0));
  for (double v2 : ad::instance_norm(constant, 1e-5).value()) CHECK(v2 == 0.0);
}

TEST_CASE("net: time embedding shape and derivative") {
  RngStream r(5, 0);
  const NetParams p = init_params(NetConfig{}, r);
  const auto e = time_embed(0.3, p);
  CHECK(e.size() == 8);
  CHECK(e == time_embed(0.3, p));
  // Tape derivative of sum(w . cond) with respect to tau through finite differences.
  const double h = 1e-6;
  const auto ep = time_embed(0.3 + h, p), em = time_embed(0.3 - h, p);
  const auto ep2 = time_embed(0.3 + 2 * h, p), em2 = time_embed(0.3 - 2 * h, p);
  for (std::size_t k = 0; k < 8; ++k) {
    const double d1 = (ep[k] - em[k]) / (2 * h);
    const double d2 = (-ep2[k] + 8 * ep[k] - 8 * em[k] + em2[k]) / (12 * h);
    CHECK(std::abs(d1 - d2) <= 1e-5 * std::max(1e-3, std::abs(d2)));
  }
}

TEST_CASE("net: shape contract and zero output from zero params") {
  RngStream r(6, 0);
  const NetParams p = init_params(tiny(), r);
  for (std::size_t n : {8, 16, 32}) CHECK(net_apply(p, test::random_field({n, n}, n), 0.5).dims() == Dims{n, n});
  CHECK(field_max_abs(net_apply(zero_params(tiny()), test::random_field({16, 16}, 1), 0.2)) == 0.0);
  CHECK_THROWS_AS(net_apply(p, test::random_field({2, 8, 8}, 1), 0.2), ConfigError);
}

TEST_CASE("net: translation equivariance under circular padding") {
  RngStream r(7, 0);
  const NetParams p = init_params(tiny(), r);
  const std::size_t n = 16;
  const Field x = test::random_field({n, n}, 2);
  Field xs({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) xs[i * n + (j + 2) % n] = x[i * n + j];
  const Field y = net_apply(p, x, 0.4), ys = net_apply(p, xs, 0.4);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(ys[i * n + (j + 2) % n] - y[i * n + j]) < 1e-10);
}

TEST_CASE("grad: analytic cases") {
  RngStream r(8, 0);
  const NetParams p = init_params(tiny(), r);
  ad::Tape t;
  ad::Var flat = t.leaf({p.flat.size()}, p.flat);
  ad::Var loss = ad::scale(ad::sum_squares(flat), 0.5);
  t.backward(loss);
  CHECK(t.grad(flat) == p.flat);
  ad::Tape t2;
  ad::Var f2 = t2.leaf({p.flat.size()}, p.flat);
  ad::Var c = ad::add(ad::scale(ad::sum(f2), 0.0), t2.constant_scalar(3.0));
  t2.backward(c);
  for (double g : t2.grad(f2)) CHECK(g == 0.0);
}

TEST_CASE("grad: projection blocks observed coordinates") {
  ad::Tape t;
  const Field x0 = test::random_field({6}, 1);
  ad::Var x = t.leaf({6}, {x0.values().begin(), x0.values().end()});
  const std::vector<double> mask{1, 0, 1, 0, 0, 1}, y{5, 0, 6, 0, 0, 7};
  ad::Var l = ad::sum_squares(ad::project(x, mask, y));
  t.backward(l);
  const auto g = t.grad(x);
  for (std::size_t k = 0; k < 6; ++k) CHECK(g[k] == (mask[k] != 0.0 ? 0.0 : 2 * x0[k]));
}

TEST_CASE("grad: residual training loss passes finite differences") {
  for (std::uint64_t s : {0u, 1u}) {
    const auto rep = gradcheck_burgers_toy(s, 20);
    CHECK(rep.probes.size() == 20);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("checkpoint: bit-exact reload") {
  const auto dir = test::temp_dir("ckpt");
  RngStream r(9, 0);
  Checkpoint c{init_params(tiny(), r), 42, 1, 2, 3, R"({"kind":"picsb"})"};
  save_checkpoint(c, dir / "a.ckpt");
  const Checkpoint d = load_checkpoint(dir / "a.ckpt");
  CHECK(d.params.flat == c.params.flat);
  CHECK(d.step == 42);
  CHECK(d.rng_counter == 3);
  CHECK(d.params.config.enc == tiny().enc);
  CHECK(d.extra == c.extra);
}
