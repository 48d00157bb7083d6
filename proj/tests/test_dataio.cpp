#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "rpcnet/io/container.hpp"
#include "rpcnet/io/processed.hpp"
#include "rpcnet/io/synthetic.hpp"
#include "rpcnet/metrics/scores.hpp"

using namespace rpcnet;
using Catch::Approx;

namespace {

io::TrialRecord small_trial(uint64_t seed, double dur = 6.0) {
  io::SyntheticSpec spec;
  spec.duration_s = dur;
  spec.seed = seed;
  return io::generate_synthetic_trial(spec, kin::KinematicModel::standard());
}

}  // namespace

TEST_CASE("trial container round trip is bit-identical") {
  auto t = small_trial(10);
  const std::string path = "trial_roundtrip.rpct";
  io::save_trial(t, path);
  auto u = io::load_trial(path);
  REQUIRE(u.emg.samples.rows() == t.emg.samples.rows());
  REQUIRE(u.emg.samples.cols() == t.emg.samples.cols());
  for (long k = 0; k < t.emg.samples.size(); ++k)
    REQUIRE(u.emg.samples.data()[k] == t.emg.samples.data()[k]);
  REQUIRE(u.markers.size() == t.markers.size());
  for (size_t i = 0; i < t.markers.size(); ++i) {
    REQUIRE(u.markers[i].validity == t.markers[i].validity);
    for (int m = 0; m < kin::kNumMarkers; ++m)
      REQUIRE(u.markers[i].markers[m] == t.markers[i].markers[m]);
  }
  CHECK(u.subject_id == t.subject_id);
  std::remove(path.c_str());
}

TEST_CASE("container failure modes are distinct") {
  auto t = small_trial(11, 4.0);
  const std::string path = "trial_badcases.rpct";
  io::save_trial(t, path);

  SECTION("truncated file: corrupt-container error, no partial record") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 1200));
    out.close();
    REQUIRE_THROWS_AS(io::load_trial(path), DataFormatError);
  }

  SECTION("wrong channel count names the expected 96") {
    // rewrite the header with a forged channel count
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const std::string needle = "\"channels\":96";
    auto posn = bytes.find(needle);
    REQUIRE(posn != std::string::npos);
    bytes.replace(posn, needle.size(), "\"channels\":95");
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    try {
      io::load_trial(path);
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      CHECK(std::string(e.what()).find("95") != std::string::npos);
      CHECK(std::string(e.what()).find("96") != std::string::npos);
    }
  }

  SECTION("future format version fails loudly") {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    const uint32_t future = 999;
    f.write(reinterpret_cast<const char*>(&future), 4);
    f.close();
    REQUIRE_THROWS_AS(io::load_trial(path), DataFormatError);
  }

  SECTION("bad magic is reported as corrupt") {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("NOPE", 4);
    f.close();
    REQUIRE_THROWS_AS(io::load_trial(path), DataFormatError);
  }
  std::remove(path.c_str());
}

TEST_CASE("synthetic generator invariants") {
  auto model = kin::KinematicModel::standard();

  SECTION("deterministic given the seed") {
    auto a = small_trial(42), b = small_trial(42);
    for (long k = 0; k < a.emg.samples.size(); ++k)
      REQUIRE(a.emg.samples.data()[k] == b.emg.samples.data()[k]);
    for (size_t i = 0; i < a.markers.size(); ++i)
      for (int m = 0; m < kin::kNumMarkers; ++m)
        REQUIRE(a.markers[i].markers[m] == b.markers[i].markers[m]);
  }

  SECTION("zero-motion spec gives a constant marker stream and noise-floor EMG") {
    io::SyntheticSpec spec;
    spec.duration_s = 4.0;
    spec.seed = 7;
    spec.excursion_min_deg = 0;
    spec.excursion_max_deg = 0;
    spec.jitter_deg = 0;
    auto t = io::generate_synthetic_trial(spec, model);
    for (size_t i = 1; i < t.markers.size(); ++i)
      for (int m = 0; m < kin::kNumMarkers; ++m)
        REQUIRE((t.markers[i].markers[m] - t.markers[0].markers[m]).norm() < 1e-12);
    auto env = sig::emg_postprocess(t.emg);
    // envelope stays near the base activation, far below drive levels
    CHECK(env.envelope.mean() < 2.0 * spec.base_activation);
  }

  SECTION("generated trials pass the loaded-trial validation") {
    auto t = small_trial(3);
    REQUIRE_NOTHROW(t.validate());
  }

  SECTION("every DoF is exercised within a schedule cycle") {
    io::SyntheticSpec spec;
    spec.duration_s = 3.0 + 18 * 8.0 + 8.0;  // one full pose-class cycle
    spec.seed = 9;
    auto model2 = kin::KinematicModel::standard();
    net::Rng rng = net::Rng::stream(spec.seed, 0x5eedull);
    auto theta = io::synthesize_trajectory(spec, model2, rng);
    for (int d = 0; d < kin::kNumDofs; ++d) {
      const double span = theta.row(d).maxCoeff() - theta.row(d).minCoeff();
      REQUIRE(span > 5.0);  // degrees
    }
  }

  SECTION("markers are exactly consistent with the generating angles") {
    auto t = small_trial(12);
    // the IK round trip on generated markers is limited only by the solver
    auto res = kin::inverse_kinematics(model, t.markers[150]);
    CHECK(res.approximation_error_mm < 0.5);
  }
}

TEST_CASE("ridge regression decodability oracle") {
  // the synthetic task must be linearly learnable before any network test
  // depends on it: ridge from the 96-channel envelope to the normalized
  // angles, fitted on 70% and scored on the held-out 30%
  auto model = kin::KinematicModel::standard();
  io::SyntheticSpec spec;
  spec.duration_s = 160.0;
  spec.seed = 77;
  auto trial = io::generate_synthetic_trial(spec, model);
  auto emg = sig::emg_postprocess(trial.emg);
  auto ang = sig::position_postprocess(trial.markers, model, emg.length(),
                                       trial.emg.params);

  const long l = emg.length();
  const long ntr = l * 7 / 10;
  const int c = 96;
  Eigen::MatrixXd x = emg.envelope.cast<double>().transpose();  // l x 96
  Eigen::MatrixXd xtr(ntr, c + 1), xte(l - ntr, c + 1);
  xtr << x.topRows(ntr), Eigen::VectorXd::Ones(ntr);
  xte << x.bottomRows(l - ntr), Eigen::VectorXd::Ones(l - ntr);
  Eigen::MatrixXd y = ang.trajectories.cast<double>().transpose();  // l x 24

  Eigen::MatrixXd gram = xtr.transpose() * xtr +
                         1e-3 * Eigen::MatrixXd::Identity(c + 1, c + 1);
  Eigen::MatrixXd w = gram.ldlt().solve(xtr.transpose() * y.topRows(ntr));
  Eigen::MatrixXd pred = xte * w;
  Eigen::MatrixXd ref = y.bottomRows(l - ntr);

  double mpcc = 0;
  for (int j = 0; j < 24; ++j)
    mpcc += stats::pcc(ref.col(j), pred.col(j));
  mpcc /= 24.0;
  INFO("held-out ridge MPCC = " << mpcc);
  CHECK(mpcc > 0.6);
}

TEST_CASE("processed container round trip") {
  auto model = kin::KinematicModel::standard();
  auto trial = small_trial(21);
  auto processed = plan::preprocess_trial(trial, model);
  const std::string path = "processed_roundtrip.rpcd";
  io::save_processed(processed, model, path);
  auto lp = io::load_processed(path);
  REQUIRE(lp.trial.emg.length() == processed.emg.length());
  for (long k = 0; k < processed.emg.envelope.size(); ++k)
    REQUIRE(lp.trial.emg.envelope.data()[k] == processed.emg.envelope.data()[k]);
  for (long k = 0; k < processed.angles.trajectories.size(); ++k)
    REQUIRE(lp.trial.angles.trajectories.data()[k] ==
            processed.angles.trajectories.data()[k]);
  REQUIRE(lp.trial.poses.size() == processed.poses.size());
  for (size_t i = 0; i < processed.poses.size(); i += 37)
    for (int m = 0; m < kin::kNumMarkers; ++m)
      REQUIRE(lp.trial.poses[i].markers[m] == processed.poses[i].markers[m]);
  CHECK((lp.model.rest_angles - model.rest_angles).cwiseAbs().maxCoeff() < 1e-12);
  std::remove(path.c_str());
}
