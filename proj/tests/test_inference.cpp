#include <catch2/catch_amalgamated.hpp>

#include "rpcnet/io/synthetic.hpp"
#include "rpcnet/net/infer.hpp"
#include "rpcnet/experiment/runner.hpp"

using namespace rpcnet;
using Catch::Approx;

namespace {

sig::ProcessedEmg random_envelope(long l, uint64_t seed, int channels = 96) {
  sig::ProcessedEmg emg;
  emg.envelope.resize(channels, l);
  net::Rng rng(seed);
  for (long i = 0; i < emg.envelope.size(); ++i)
    emg.envelope.data()[i] = static_cast<float>(rng.uniform(0.0, 0.6));
  return emg;
}

}  // namespace

TEST_CASE("recursive inference basics") {
  auto cfg = net::make_variant({}, {"full", 0.2, "", "C1"});
  auto model = net::RpcNet<float>::random(cfg, 11);

  SECTION("output length is envelope length minus the history") {
    auto emg = random_envelope(500, 3);
    auto out = net::infer_recursive(model, emg);
    REQUIRE(out.rows() == 24);
    REQUIRE(out.cols() == 500 - cfg.window.history);
  }

  SECTION("envelope shorter than one window is an input error") {
    auto emg = random_envelope(cfg.window.history, 3);
    REQUIRE_THROWS_AS(net::infer_recursive(model, emg), InputError);
  }

  SECTION("identical options give bit-identical outputs") {
    auto emg = random_envelope(300, 9);
    auto a = net::infer_recursive(model, emg);
    auto b = net::infer_recursive(model, emg);
    for (long k = 0; k < a.size(); ++k) REQUIRE(a.data()[k] == b.data()[k]);
  }

  SECTION("chunking is an implementation detail up to float rounding") {
    auto emg = random_envelope(300, 9);
    net::RecursionOptions o1, o2;
    o1.chunk = 2048;
    o2.chunk = 17;
    auto a = net::infer_recursive(model, emg, o1);
    auto b = net::infer_recursive(model, emg, o2);
    for (long k = 0; k < a.size(); ++k)
      REQUIRE(a.data()[k] == Approx(b.data()[k]).margin(1e-4));
  }
}

TEST_CASE("-B variants never read the seed history") {
  auto cfg = net::make_variant({}, {"B", 0.2, "", "C1"});
  auto model = net::RpcNet<float>::random(cfg, 21);
  auto emg = random_envelope(400, 4);

  Eigen::MatrixXf truth = Eigen::MatrixXf::Constant(24, 400, 0.31f);
  net::RecursionOptions rest_seed;
  net::RecursionOptions gt_seed;
  gt_seed.seed = net::RecursionOptions::Seed::GroundTruth;
  gt_seed.truth = &truth;

  auto a = net::infer_recursive(model, emg, rest_seed);
  auto b = net::infer_recursive(model, emg, gt_seed);
  for (long k = 0; k < a.size(); ++k) REQUIRE(a.data()[k] == b.data()[k]);
}

TEST_CASE("identity-on-history network: recursion equals teacher forcing") {
  // network that copies the newest angle-history sample to its output
  net::RpcNetConfig cfg;  // full variant, 96 channels, history 64
  auto model = net::RpcNet<float>::random(cfg, 0);
  const auto& sc = model.nets[0].cfg;
  for (int j = 0; j < 24; ++j) {
    auto& sub = model.nets[j];
    for (auto& l : sub.layers) {
      if (l.w.size()) l.w.setZero();
      if (l.b.size()) l.b.setZero();
    }
    // angle branch: hidden unit i carries history channel i of the newest
    // strided sample (window position 7 of 8)
    for (int i = 0; i < 24; ++i) {
      sub.layers[net::kAngle0].w(i, 7 * 24 + i) = 1.0f;
      sub.layers[net::kAngle1].w(i, i) = 1.0f;
    }
    // root: pick angle-branch channel j (after the 512 EMG units)
    sub.layers[net::kRoot0].w(0, sc.emg_hidden + j) = 1.0f;
    sub.layers[net::kRoot1].w(0, 0) = 1.0f;
  }

  // period-8 signal: y(t) == y(t-8), so an exact one-step-back predictor
  // reproduces the recording in closed loop
  const long l = 300;
  Eigen::MatrixXf truth(24, l);
  for (long t = 0; t < l; ++t)
    for (int j = 0; j < 24; ++j)
      truth(j, t) = 0.4f + 0.05f * static_cast<float>((t % 8) == (j % 8));

  auto emg = random_envelope(l, 5);
  net::RecursionOptions opt;
  opt.seed = net::RecursionOptions::Seed::GroundTruth;
  opt.truth = &truth;
  auto closed_loop = net::infer_recursive(model, emg, opt);

  // teacher-forced forward passes over recorded windows
  sig::WindowSpec w;
  for (long t = 64; t < l; ++t) {
    net::Vec<float> ang(cfg.angle_input());
    sig::gather_angle_window(truth, t, w, ang.data());
    net::Vec<float> ev(cfg.emg_input());
    net::gather_emg_mapped(emg.envelope, t, w, cfg.channel_map, ev.data());
    auto out = model.forward(ev, ang);
    for (int j = 0; j < 24; ++j) {
      REQUIRE(closed_loop(j, t - 64) == out[j]);          // recursion == forcing
      REQUIRE(out[j] == truth(j, t));                     // both == the recording
    }
  }
}

TEST_CASE("closed-loop stability on a trained network over a 450 s trial") {
  auto model = kin::KinematicModel::standard();
  auto cfg = net::make_variant({}, {"full", 0.2, "", "C1"});

  io::SyntheticSpec spec;
  spec.duration_s = 60.0;
  spec.seed = 500;
  auto train0 = plan::preprocess_trial(io::generate_synthetic_trial(spec, model), model);
  spec.seed = 501;
  auto train1 = plan::preprocess_trial(io::generate_synthetic_trial(spec, model), model);
  spec.duration_s = 450.0;
  spec.seed = 502;
  auto test = plan::preprocess_trial(io::generate_synthetic_trial(spec, model), model);

  std::vector<net::TrialView> views = {
      {&train0.emg.envelope, &train0.angles.trajectories},
      {&train1.emg.envelope, &train1.angles.trajectories}};

  int stable = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto rpc = net::RpcNet<float>::random(cfg, seed);
    net::TrainingConfig tcfg;
    tcfg.seed = seed;
    net::train(rpc, views, tcfg);
    auto out = net::infer_recursive(rpc, test.emg);
    if (out.minCoeff() > -0.5f && out.maxCoeff() < 1.5f) ++stable;
  }
  CHECK(stable == 10);
}

TEST_CASE("smoothing and projection") {
  auto model = kin::KinematicModel::standard();

  SECTION("constant input passes with unity DC gain after the transient") {
    Eigen::MatrixXf raw = Eigen::MatrixXf::Constant(24, 1500, 0.625f);
    auto proj = net::smooth_and_project(raw, model);
    REQUIRE(proj.filtered.cols() == 1500);
    CHECK(proj.filtered(5, 1499) == Approx(0.625).margin(1e-5));
  }

  SECTION("a constant rest-pose stream projects to the rest-pose fingertips") {
    Eigen::MatrixXf raw = Eigen::MatrixXf::Constant(24, 1200, 0.625f);
    auto proj = net::smooth_and_project(raw, model);
    kin::JointAngles rest;
    rest.values = model.rest_angles;
    auto expect = kin::forward_kinematics(model, rest);
    for (int tip : kin::kFingertipMarkers)
      CHECK((proj.poses.back().markers[tip] - expect.markers[tip]).norm() < 1e-2);
  }
}
