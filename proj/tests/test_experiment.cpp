#include <catch2/catch_amalgamated.hpp>

#include "rpcnet/experiment/runner.hpp"
#include "rpcnet/io/synthetic.hpp"

using namespace rpcnet;
using Catch::Approx;

namespace {

plan::ProcessedTrial processed_trial(double dur, uint64_t seed,
                                     const kin::KinematicModel& model) {
  io::SyntheticSpec spec;
  spec.duration_s = dur;
  spec.seed = seed;
  return plan::preprocess_trial(io::generate_synthetic_trial(spec, model), model);
}

}  // namespace

TEST_CASE("oracle evaluation gives MPCC = 1 and MD = 0") {
  auto model = kin::KinematicModel::standard();
  auto test = processed_trial(20.0, 9, model);
  auto r = plan::evaluate_oracle(test, model);
  CHECK(r.scores.mpcc == Approx(1.0).margin(1e-9));
  CHECK(r.scores.md == 0.0);
  CHECK(r.rest_baseline_md > 1.0);  // moving hand is far from the rest pose
}

TEST_CASE("trained small variant evaluates end to end") {
  auto model = kin::KinematicModel::standard();
  auto t0 = processed_trial(40.0, 50, model);
  auto t1 = processed_trial(40.0, 51, model);
  auto test = processed_trial(40.0, 52, model);

  auto cfg = net::make_variant({}, {"full", 0.2, "", "B1"});
  net::TrainingConfig tcfg;
  tcfg.seed = 4;
  auto [rpc, tr] = plan::train_variant<float>(cfg, {&t0, &t1}, tcfg);
  REQUIRE(tr.epoch_loss.size() == 3);

  auto r = plan::evaluate_net(rpc, test, model);
  CHECK(r.samples == test.emg.length() - cfg.window.history);
  CHECK(r.scores.md > 0.0);
  CHECK(std::abs(r.scores.mpcc) <= 1.0);
  CHECK(r.scores.wfd_series.size() == static_cast<size_t>(r.samples));
}

TEST_CASE("seeded test-trial selection is reproducible and in range") {
  plan::ExperimentPlan p;
  p.subjects = {"S0", "S1", "S2"};
  p.trials_per_subject = 6;
  p.seed = 11;
  for (const auto& s : p.subjects) {
    const int a = plan::pick_test_trial(p, s);
    const int b = plan::pick_test_trial(p, s);
    REQUIRE(a == b);
    REQUIRE(a >= 0);
    REQUIRE(a < 6);
  }
  p.test_trial = 4;
  CHECK(plan::pick_test_trial(p, "S1") == 4);
}

TEST_CASE("plan validation catches bad variant codes") {
  plan::ExperimentPlan p;
  p.subjects = {"S0"};
  p.variants = {{"full", 0, "E-7", ""}};
  REQUIRE_THROWS_AS(p.validate(), ConfigError);
  p.variants = {{"full", 0, "", "B1"}};
  REQUIRE_NOTHROW(p.validate());
}

TEST_CASE("caption-style statistic lines carry (statistic, p) pairs") {
  stats::TTestResult t{-2.31, 0.041, 4};
  auto line = plan::t_test_line("MD", "full", "B", stats::Tail::Less, t);
  CHECK(line.find("t(4)=") != std::string::npos);
  CHECK(line.find("p=") != std::string::npos);
  CHECK(line.find("H0: full >= B") != std::string::npos);

  stats::WilcoxonResult w;
  w.w = 786;
  w.p = 8.8e-9;
  auto wl = plan::wilcoxon_line("MD", "full", "B", stats::Tail::Less, w);
  CHECK(wl.find("W=786.0") != std::string::npos);
  CHECK(wl.find("p=8.8e-09") != std::string::npos);

  stats::RegressionResult r;
  r.beta1 = -17.362;
  r.se = 2.2;
  r.t = -8.0;
  r.p = 2.4e-12;
  r.r2 = 0.40;
  r.adj_r2 = 0.40;
  auto rl = plan::regression_line("MD", "mm/s", r);
  CHECK(rl.find("beta1=") != std::string::npos);
  CHECK(rl.find("SE=") != std::string::npos);
  CHECK(rl.find("R2=") != std::string::npos);
  CHECK(rl.find("adjR2=") != std::string::npos);

  stats::SignTestResult s;
  s.positive = 225;
  s.p = 4.5e-2;
  auto sl = plan::sign_test_line("MD", "full", "B", stats::Tail::Less, s);
  CHECK(sl.find("S=225") != std::string::npos);
  CHECK(sl.find("p=4.5e-02") != std::string::npos);
}

TEST_CASE("variant slugs are unambiguous") {
  CHECK(plan::variant_slug({"full", 0, "", ""}) == "full");
  CHECK(plan::variant_slug({"B", 0, "", ""}) == "B");
  CHECK(plan::variant_slug({"full", 0.4, "", ""}) == "full_len0.4");
  CHECK(plan::variant_slug({"B", 0, "E-3", ""}) == "B_E-3");
  CHECK(plan::variant_slug({"full", 0, "", "C5"}) == "full_C5");
  CHECK(plan::variant_slug({"I-B", 0, "", ""}) == "I-B");
}
