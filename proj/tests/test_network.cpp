#include <catch2/catch_amalgamated.hpp>

#include "rpcnet/net/checkpoint.hpp"
#include "rpcnet/net/network.hpp"
#include "rpcnet/net/train.hpp"

#include <cstdio>

using namespace rpcnet;
using Catch::Approx;

namespace {

net::SubNetworkConfig tiny_config(int ie = 12, int ia = 6, int outputs = 1) {
  auto c = net::SubNetworkConfig::from_rule(ie, ia, outputs);
  return c;
}

template <typename S>
net::Mat<S> random_mat(int r, int c, net::Rng& rng, double scale = 1.0) {
  net::Mat<S> m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = static_cast<S>(rng.uniform(-scale, scale));
  return m;
}

}  // namespace

TEST_CASE("width rule reproduces the published anchors") {
  auto c = net::SubNetworkConfig::from_rule(1536, 192);
  CHECK(c.emg_hidden == 512);   // W_E = I_E / 3
  CHECK(c.angle_hidden == 64);  // I_A / 3
  CHECK(c.angle_out == 24);
  CHECK(c.merged() == 536);     // merged branch outputs
  CHECK(c.root_hidden() == 134);

  auto b = net::SubNetworkConfig::from_rule(1536, 0);
  CHECK_FALSE(b.has_angle_branch());
  CHECK(b.merged() == 512);
}

TEST_CASE("forward pass basics") {
  net::Rng rng(11);
  auto cfg = tiny_config();
  auto sub = net::SubNetwork<double>::random(cfg, rng);

  SECTION("all-zero parameters give zero output for any input") {
    for (auto& l : sub.layers) {
      if (l.w.size()) l.w.setZero();
      if (l.b.size()) l.b.setZero();
    }
    auto emg = random_mat<double>(cfg.emg_input, 3, rng);
    auto ang = random_mat<double>(cfg.angle_input, 3, rng);
    auto out = sub.forward(emg, ang);
    REQUIRE(out.rows() == 1);
    REQUIRE(out.cols() == 3);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("zero input propagates the biases through the rectifiers") {
    // hand-computable 3-neuron instance: one unit per layer
    net::SubNetworkConfig c1;
    c1.emg_input = 1; c1.emg_hidden = 1; c1.angle_input = 0;
    c1.angle_hidden = 0; c1.angle_out = 0; c1.outputs = 1;
    auto n1 = net::SubNetwork<double>::random(c1, rng);
    for (auto& l : n1.layers)
      if (l.w.size()) l.w.setConstant(2.0);
    n1.layers[net::kEmg0].b.setConstant(0.5);
    n1.layers[net::kEmg1].b.setConstant(-0.25);
    n1.layers[net::kRoot0].b.setConstant(0.125);
    n1.layers[net::kRoot1].b.setConstant(-3.0);
    net::Mat<double> x = net::Mat<double>::Zero(1, 1);
    net::Mat<double> empty(0, 1);
    // relu(0.5*... ) chain: h0 = relu(0+0.5)=0.5; h1 = relu(2*0.5-0.25)=0.75;
    // r0 = relu(2*0.75+0.125)=1.625; out = 2*1.625-3 = 0.25
    auto out = n1.forward(x, empty);
    REQUIRE(out(0, 0) == Approx(0.25).margin(1e-12));
  }

  SECTION("identical inputs give bit-identical outputs across calls") {
    auto emg = random_mat<double>(cfg.emg_input, 5, rng);
    auto ang = random_mat<double>(cfg.angle_input, 5, rng);
    auto o1 = sub.forward(emg, ang);
    auto o2 = sub.forward(emg, ang);
    for (int i = 0; i < o1.cols(); ++i) REQUIRE(o1(0, i) == o2(0, i));
  }

  SECTION("shape mismatch is a contract violation") {
    auto emg = random_mat<double>(cfg.emg_input + 1, 1, rng);
    auto ang = random_mat<double>(cfg.angle_input, 1, rng);
    REQUIRE_THROWS_AS(sub.forward(emg, ang), ContractError);
  }
}

namespace {

// finite differences are only valid away from the rectifier kinks: demand a
// margin on every pre-activation before checking
bool kink_free(const net::SubNetwork<double>& sub, const net::Mat<double>& emg,
               const net::Mat<double>& ang, double margin) {
  auto pre_ok = [&](const net::Mat<double>& z) {
    return (z.cwiseAbs().array() > margin).all();
  };
  const auto& L = sub.layers;
  net::Mat<double> z0 = (L[net::kEmg0].w * emg).colwise() + L[net::kEmg0].b;
  if (!pre_ok(z0)) return false;
  net::Mat<double> h0 = z0.cwiseMax(0.0);
  net::Mat<double> z1 = (L[net::kEmg1].w * h0).colwise() + L[net::kEmg1].b;
  if (!pre_ok(z1)) return false;
  net::Mat<double> merged(sub.cfg.merged(), emg.cols());
  merged.topRows(sub.cfg.emg_hidden) = z1.cwiseMax(0.0);
  if (sub.cfg.has_angle_branch()) {
    net::Mat<double> za0 = (L[net::kAngle0].w * ang).colwise() + L[net::kAngle0].b;
    if (!pre_ok(za0)) return false;
    net::Mat<double> za1 =
        (L[net::kAngle1].w * za0.cwiseMax(0.0)).colwise() + L[net::kAngle1].b;
    if (!pre_ok(za1)) return false;
    merged.bottomRows(sub.cfg.angle_out) = za1.cwiseMax(0.0);
  }
  net::Mat<double> zr = (L[net::kRoot0].w * merged).colwise() + L[net::kRoot0].b;
  return pre_ok(zr);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  net::Rng rng(123);
  for (int trial = 0; trial < 8; ++trial) {
    const int ie = 6 + static_cast<int>(rng.below(12));
    const int ia = (trial % 3 == 0) ? 0 : 3 * (1 + static_cast<int>(rng.below(4)));
    const int outputs = (trial % 4 == 0) ? 3 : 1;
    auto cfg = net::SubNetworkConfig::from_rule(ie, ia, outputs);
    auto sub = net::SubNetwork<double>::random(cfg, rng);
    const int batch = 4;
    net::Mat<double> emg, ang, tgt;
    do {
      emg = random_mat<double>(cfg.emg_input, batch, rng);
      ang = random_mat<double>(cfg.angle_input, batch, rng);
      tgt = random_mat<double>(outputs, batch, rng);
    } while (!kink_free(sub, emg, ang, 1e-3));

    auto grads = sub.loss_gradients(emg, ang, tgt);

    auto loss_at = [&]() {
      auto out = sub.forward(emg, ang);
      return (out - tgt).squaredNorm() / static_cast<double>(out.size());
    };
    const double h = 1e-5;
    double max_rel = 0;
    for (int li = 0; li < net::kLayerSlots; ++li) {
      if (!sub.has_layer(li)) continue;
      auto& layer = sub.layers[li];
      for (int k = 0; k < std::min<long>(layer.w.size(), 25); ++k) {
        const long idx = (layer.w.size() * k) / std::min<long>(layer.w.size(), 25);
        double& p = layer.w.data()[idx];
        const double saved = p;
        p = saved + h;
        const double lp = loss_at();
        p = saved - h;
        const double lm = loss_at();
        p = saved;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads[li].w.data()[idx];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - an) / denom);
      }
      for (int k = 0; k < layer.b.size(); ++k) {
        double& p = layer.b[k];
        const double saved = p;
        p = saved + h;
        const double lp = loss_at();
        p = saved - h;
        const double lm = loss_at();
        p = saved;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads[li].b[k];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - an) / denom);
      }
    }
    REQUIRE(max_rel < 1e-4);
  }
}

TEST_CASE("Adam optimizer semantics") {
  net::Rng rng(9);
  auto cfg = tiny_config(9, 6);
  net::TrainingConfig tcfg;

  SECTION("first step matches the closed form -lr * g / (|g| + eps)") {
    auto sub = net::SubNetwork<double>::random(cfg, rng);
    auto before = sub;
    auto adam = net::AdamState<double>::for_network(sub);
    auto emg = random_mat<double>(cfg.emg_input, 2, rng);
    auto ang = random_mat<double>(cfg.angle_input, 2, rng);
    auto tgt = random_mat<double>(1, 2, rng);
    auto grads = sub.loss_gradients(emg, ang, tgt);
    net::backward_and_step(sub, adam, emg, ang, tgt, tcfg);
    for (int li = 0; li < net::kLayerSlots; ++li) {
      if (!sub.has_layer(li)) continue;
      for (long k = 0; k < sub.layers[li].w.size(); ++k) {
        const double g = grads[li].w.data()[k];
        const double want = -tcfg.learning_rate * g / (std::abs(g) + tcfg.epsilon);
        const double got = sub.layers[li].w.data()[k] - before.layers[li].w.data()[k];
        REQUIRE(got == Approx(want).margin(1e-12));
      }
    }
  }

  SECTION("zero gradient leaves parameters unchanged") {
    auto sub = net::SubNetwork<double>::random(cfg, rng);
    // saturate the output to the target so the loss gradient is exactly 0
    for (auto& l : sub.layers) {
      if (l.w.size()) l.w.setZero();
      if (l.b.size()) l.b.setZero();
    }
    auto before = sub;
    auto adam = net::AdamState<double>::for_network(sub);
    auto emg = random_mat<double>(cfg.emg_input, 2, rng);
    auto ang = random_mat<double>(cfg.angle_input, 2, rng);
    net::Mat<double> tgt = net::Mat<double>::Zero(1, 2);  // matches the zero output
    net::backward_and_step(sub, adam, emg, ang, tgt, tcfg);
    for (int li = 0; li < net::kLayerSlots; ++li) {
      if (!sub.has_layer(li)) continue;
      for (long k = 0; k < sub.layers[li].w.size(); ++k)
        REQUIRE(sub.layers[li].w.data()[k] == before.layers[li].w.data()[k]);
    }
  }

  SECTION("fused tiled update equals the explicit-gradient update") {
    auto sub1 = net::SubNetwork<double>::random(cfg, rng);
    auto sub2 = sub1;
    auto adam1 = net::AdamState<double>::for_network(sub1);
    auto adam2 = net::AdamState<double>::for_network(sub2);
    auto emg = random_mat<double>(cfg.emg_input, 3, rng);
    auto ang = random_mat<double>(cfg.angle_input, 3, rng);
    auto tgt = random_mat<double>(1, 3, rng);

    net::backward_and_step(sub1, adam1, emg, ang, tgt, net::TrainingConfig{});

    auto grads = sub2.loss_gradients(emg, ang, tgt);
    net::FusedAdamUpdater<double> upd(net::TrainingConfig{}, 64, 3);
    adam2.step = 1;
    upd.begin_step(1);
    for (int li = 0; li < net::kLayerSlots; ++li)
      if (sub2.has_layer(li))
        upd.update_explicit(sub2.layers[li], adam2.layers[li], grads[li]);

    for (int li = 0; li < net::kLayerSlots; ++li) {
      if (!sub1.has_layer(li)) continue;
      for (long k = 0; k < sub1.layers[li].w.size(); ++k)
        REQUIRE(sub1.layers[li].w.data()[k] ==
                Approx(sub2.layers[li].w.data()[k]).margin(1e-14).epsilon(1e-12));
    }
  }

  SECTION("non-finite loss aborts with a numeric error") {
    auto sub = net::SubNetwork<double>::random(cfg, rng);
    auto adam = net::AdamState<double>::for_network(sub);
    auto emg = random_mat<double>(cfg.emg_input, 2, rng);
    emg(0, 0) = std::numeric_limits<double>::infinity();
    auto ang = random_mat<double>(cfg.angle_input, 2, rng);
    auto tgt = random_mat<double>(1, 2, rng);
    REQUIRE_THROWS_AS(net::backward_and_step(sub, adam, emg, ang, tgt, tcfg),
                      NumericError);
  }
}

TEST_CASE("variant factory") {
  net::RpcNetConfig base;

  SECTION("electrode subset B1 keeps rows 1-2: I_E = 16 x 32 = 512") {
    auto cfg = net::make_variant(base, {"full", 0, "", "B1"});
    CHECK(cfg.channels() == 32);
    CHECK(cfg.emg_input() == 512);
    for (int ch : cfg.channel_map) CHECK(ch < 32);  // rows 1-2 are channels 0..31
  }

  SECTION("width code E-5 forces W_E = 192") {
    auto cfg = net::make_variant(base, {"full", 0, "E-5", ""});
    CHECK(cfg.subnet().emg_hidden == 192);
    auto e1 = net::make_variant(base, {"full", 0, "E-1", ""});
    CHECK(e1.subnet().emg_hidden == 384);
  }

  SECTION("input length 0.4 s keeps 8 EMG samples: I_E = 768") {
    auto cfg = net::make_variant(base, {"full", 0.4, "", ""});
    CHECK(cfg.window.history == 32);
    CHECK(cfg.window.emg_samples() == 8);
    CHECK(cfg.emg_input() == 768);
    CHECK(cfg.angle_input() == 4 * 24);
  }

  SECTION("unknown codes raise config errors") {
    CHECK_THROWS_AS(net::make_variant(base, {"full", 0, "E-9", ""}), ConfigError);
    CHECK_THROWS_AS(net::make_variant(base, {"full", 0, "", "Z9"}), ConfigError);
    CHECK_THROWS_AS(net::make_variant(base, {"nope", 0, "", ""}), ConfigError);
    CHECK_THROWS_AS(net::make_variant(base, {"full", 7.5, "", ""}), ConfigError);
  }

  SECTION("monolithic variants have one 24-output network") {
    auto cfg_i = net::make_variant(base, {"I", 0, "", ""});
    CHECK(cfg_i.network_count() == 1);
    CHECK(cfg_i.subnet().outputs == 24);
    CHECK(cfg_i.subnet().emg_hidden == 512);

    auto cfg_w = net::make_variant(base, {"W", 0, "", ""});
    CHECK(cfg_w.subnet().emg_hidden == 2560);  // widths x5
    CHECK(cfg_w.subnet().angle_out == 120);
    CHECK(cfg_w.subnet().root_hidden() == 670);

    auto cfg_ib = net::make_variant(base, {"I-B", 0, "", ""});
    CHECK_FALSE(cfg_ib.subnet().has_angle_branch());
  }

  SECTION("forward multiply count grows strictly with I_E at the width rule") {
    long prev = 0;
    for (double len : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
      auto cfg = net::make_variant(base, {"full", len, "", ""});
      auto model = net::RpcNet<float>::random(cfg, 1);
      REQUIRE(model.multiply_count() > prev);
      prev = model.multiply_count();
    }
  }

  SECTION("a 32-electrode variant costs at most a third of the full multiplies") {
    auto full = net::RpcNet<float>::random(base, 1);
    auto b1 = net::RpcNet<float>::random(net::make_variant(base, {"full", 0, "", "B1"}), 1);
    CHECK(static_cast<double>(b1.multiply_count()) <=
          static_cast<double>(full.multiply_count()) / 3.0);
  }
}

TEST_CASE("18 electrode subsets plus the original grid") {
  CHECK(net::electrode_subset_codes().size() == 18);
  for (const auto& code : net::electrode_subset_codes()) {
    auto chans = net::electrode_subset(code);
    CHECK(!chans.empty());
    for (int c : chans) {
      CHECK(c >= 0);
      CHECK(c < 96);
    }
  }
  CHECK(net::electrode_subset("A1").size() == 64);
  CHECK(net::electrode_subset("C4").size() == 16);
  CHECK(net::electrode_subset("D1").size() == 48);
  CHECK(net::electrode_subset("F3").size() == 24);
}

TEST_CASE("checkpoint round trip is bit-exact in float32") {
  net::RpcNetConfig cfg = net::make_variant({}, {"full", 0.2, "", "C2"});
  auto model = net::RpcNet<float>::random(cfg, 77);
  const std::string path = "ckpt_roundtrip_test.rpcn";
  net::save_checkpoint(model, path);
  auto loaded = net::load_checkpoint<float>(path);
  REQUIRE(loaded.nets.size() == model.nets.size());
  CHECK(loaded.cfg.window.history == cfg.window.history);
  CHECK(loaded.cfg.channel_map == cfg.channel_map);
  for (size_t n = 0; n < model.nets.size(); ++n)
    for (int li = 0; li < net::kLayerSlots; ++li) {
      if (!model.nets[n].has_layer(li)) continue;
      for (long k = 0; k < model.nets[n].layers[li].w.size(); ++k)
        REQUIRE(model.nets[n].layers[li].w.data()[k] ==
                loaded.nets[n].layers[li].w.data()[k]);
    }
  std::remove(path.c_str());

  SECTION("truncated checkpoint fails loudly") {
    net::save_checkpoint(model, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    REQUIRE_THROWS_AS(net::load_checkpoint<float>(path), DataFormatError);
    std::remove(path.c_str());
  }
}
