// rpcnet: batch workbench for the EMG-to-hand-position pipeline.
//
// Subcommands: synth, preprocess, train, evaluate, ablate, bench.
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "rpcnet/experiment/plan.hpp"
#include "rpcnet/experiment/runner.hpp"
#include "rpcnet/io/csv.hpp"
#include "rpcnet/io/processed.hpp"
#include "rpcnet/io/synthetic.hpp"
#include "rpcnet/metrics/bench.hpp"

namespace fs = std::filesystem;
using namespace rpcnet;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

plan::ExperimentPlan load_plan(const GlobalOpts& g) {
  if (g.config.empty()) throw InputError("missing --config <plan.json>");
  std::ifstream in(g.config);
  if (!in) throw InputError("cannot open plan: " + g.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("bad plan file " + g.config + ": " + e.what());
  }
  auto p = j.get<plan::ExperimentPlan>();
  if (g.seed_set) p.seed = g.seed;
  if (!g.out.empty()) p.out_dir = g.out;
  p.validate();
  return p;
}

std::string trial_path(const std::string& dir, const std::string& subject, int trial,
                       const char* ext) {
  return dir + "/" + subject + "_T" + std::to_string(trial) + ext;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const json& config, const std::vector<std::string>& artifacts,
                    const json& extra = json::object()) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config_hash"] = plan::config_hash(config);
  m["config"] = config;
  m["artifacts"] = artifacts;
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(out_dir + "/manifest_" + command + ".json");
  out << m.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_synth(const GlobalOpts& g, int subjects, int trials, double duration,
              double noise, double marker_noise) {
  if (g.out.empty()) throw InputError("synth: missing --out directory");
  fs::create_directories(g.out);
  auto model = kin::KinematicModel::standard();
  std::vector<std::string> artifacts;
  for (int s = 0; s < subjects; ++s) {
    for (int t = 0; t < trials; ++t) {
      io::SyntheticSpec spec;
      spec.duration_s = duration;
      spec.noise_level = noise;
      spec.marker_noise_mm = marker_noise;
      spec.seed = net::Rng::stream(g.seed, (static_cast<uint64_t>(s) << 20) + t).next_u64();
      const std::string sid = "S" + std::to_string(s);
      auto trial = io::generate_synthetic_trial(spec, model, sid, "T" + std::to_string(t),
                                                io::TrialRole::Train);
      const std::string path = trial_path(g.out, sid, t, ".rpct");
      io::save_trial(trial, path);
      artifacts.push_back(path);
      std::cout << "wrote " << path << " (" << duration << " s)\n";
    }
  }
  json cfg = {{"subjects", subjects}, {"trials", trials}, {"duration_s", duration},
              {"noise", noise},       {"seed", g.seed},   {"marker_noise_mm", marker_noise}};
  write_manifest(g.out, "synth", cfg, artifacts);
  return 0;
}

int cmd_preprocess(const GlobalOpts& g, const std::string& data_dir) {
  if (g.out.empty()) throw InputError("preprocess: missing --out directory");
  fs::create_directories(g.out);

  // group trial files by subject
  std::map<std::string, std::vector<fs::path>> by_subject;
  for (const auto& e : fs::directory_iterator(data_dir))
    if (e.path().extension() == ".rpct") {
      const std::string stem = e.path().stem().string();
      by_subject[stem.substr(0, stem.find("_T"))].push_back(e.path());
    }
  if (by_subject.empty()) throw InputError("preprocess: no .rpct trials in " + data_dir);

  std::vector<std::string> artifacts;
  json lengths = json::object();
  for (auto& [subject, paths] : by_subject) {
    std::sort(paths.begin(), paths.end());
    auto first = io::load_trial(paths.front().string());
    auto model = plan::calibrated_model(kin::KinematicModel::standard(), first);
    for (const auto& p : paths) {
      auto trial = (p == paths.front()) ? std::move(first) : io::load_trial(p.string());
      auto processed = plan::preprocess_trial(trial, model);
      const std::string outp = g.out + "/" + p.stem().string() + ".rpcd";
      io::save_processed(processed, model, outp);
      artifacts.push_back(outp);
      lengths[p.stem().string()] = {{"length", processed.emg.length()},
                                    {"over_unity", processed.emg.over_unity},
                                    {"ik_failures", processed.angles.ik_failures}};
      std::cout << p.stem().string() << ": l=" << processed.emg.length()
                << " over_unity=" << processed.emg.over_unity
                << " ik_failures=" << processed.angles.ik_failures << "\n";
    }
  }
  json cfg = {{"data_dir", data_dir}};
  write_manifest(g.out, "preprocess", cfg, artifacts, {{"lengths", lengths}});
  return 0;
}

struct SubjectSet {
  std::string id;
  kin::KinematicModel model;
  std::vector<plan::ProcessedTrial> trials;  // all of them
  int test_index = 0;

  std::vector<const plan::ProcessedTrial*> train_views() const {
    std::vector<const plan::ProcessedTrial*> v;
    for (size_t i = 0; i < trials.size(); ++i)
      if (static_cast<int>(i) != test_index) v.push_back(&trials[i]);
    return v;
  }
};

SubjectSet load_subject(const plan::ExperimentPlan& p, const std::string& subject) {
  SubjectSet s;
  s.id = subject;
  s.test_index = plan::pick_test_trial(p, subject);
  for (int t = 0; t < p.trials_per_subject; ++t) {
    auto lp = io::load_processed(trial_path(p.dataset_dir, subject, t, ".rpcd"));
    s.model = lp.model;
    s.trials.push_back(std::move(lp.trial));
  }
  return s;
}

std::string checkpoint_path(const plan::ExperimentPlan& p, const std::string& subject,
                            const net::VariantRequest& req) {
  return p.out_dir + "/" + subject + "_" + plan::variant_slug(req) + ".rpcn";
}

int cmd_train(const GlobalOpts& g) {
  auto p = load_plan(g);
  fs::create_directories(p.out_dir);
  std::vector<std::string> artifacts;
  json split = json::object();
  for (const auto& subject : p.subjects) {
    auto s = load_subject(p, subject);
    split[subject] = s.test_index;
    for (const auto& req : p.variants) {
      net::RpcNetConfig cfg = net::make_variant(net::RpcNetConfig{}, req);
      net::TrainingConfig tcfg;
      tcfg.seed = net::Rng::stream(p.seed, std::hash<std::string>{}(subject)).next_u64();
      auto [model_net, result] = plan::train_variant<float>(cfg, s.train_views(), tcfg);
      const std::string ck = checkpoint_path(p, subject, req);
      net::save_checkpoint(model_net, ck);
      artifacts.push_back(ck);

      const std::string lc = p.out_dir + "/loss_" + subject + "_" +
                             plan::variant_slug(req) + ".csv";
      io::CsvWriter csv(lc);
      csv.header({"epoch", "net", "loss"});
      for (size_t e = 0; e < result.epoch_loss_per_net.size(); ++e) {
        for (size_t n = 0; n < result.epoch_loss_per_net[e].size(); ++n)
          csv.row(e, n, result.epoch_loss_per_net[e][n]);
        csv.row(e, "mean", result.epoch_loss[e]);
      }
      artifacts.push_back(lc);
      std::cout << subject << " " << plan::variant_slug(req) << ": "
                << result.steps << " steps, epoch losses";
      for (double l : result.epoch_loss) std::cout << " " << l;
      std::cout << "\n";
    }
  }
  write_manifest(p.out_dir, "train", json(p), artifacts, {{"test_trials", split}});
  return 0;
}

void write_scores_table(const std::string& base, const json& config,
                        const std::vector<std::pair<std::string, plan::EvaluationResult>>& rows) {
  io::CsvWriter csv(base + ".csv");
  csv.header({"subject", "md_mm", "md_t1", "md_t2", "md_med", "mpcc_pct", "mpcc_t1",
              "mpcc_t2", "mpcc_med", "umd_mm", "rest_baseline_md_mm", "samples"});
  json jrows = json::array();
  for (const auto& [subject, r] : rows) {
    const auto& s = r.scores;
    csv.row(subject, s.md, s.wfd_summary.t1, s.wfd_summary.t2, s.wfd_summary.median,
            100.0 * s.mpcc, 100.0 * s.pcc_summary.t1, 100.0 * s.pcc_summary.t2,
            100.0 * s.pcc_summary.median, s.umd_mean, r.rest_baseline_md, r.samples);
    jrows.push_back({{"subject", subject},
                     {"MD", s.md},
                     {"MD_T1", s.wfd_summary.t1},
                     {"MD_T2", s.wfd_summary.t2},
                     {"MD_Med", s.wfd_summary.median},
                     {"MPCC", 100.0 * s.mpcc},
                     {"MPCC_T1", 100.0 * s.pcc_summary.t1},
                     {"MPCC_T2", 100.0 * s.pcc_summary.t2},
                     {"MPCC_Med", 100.0 * s.pcc_summary.median},
                     {"UMD", s.umd_mean},
                     {"rest_baseline_MD", r.rest_baseline_md}});
  }
  json out = {{"config", config}, {"rows", jrows}};
  std::ofstream js(base + ".json");
  js << out.dump(2) << "\n";
}

int cmd_evaluate(const GlobalOpts& g, bool oracle) {
  auto p = load_plan(g);
  fs::create_directories(p.out_dir);
  std::vector<std::string> artifacts;
  for (const auto& req : p.variants) {
    std::vector<std::pair<std::string, plan::EvaluationResult>> rows;
    for (const auto& subject : p.subjects) {
      auto s = load_subject(p, subject);
      const auto& test = s.trials[s.test_index];
      plan::EvaluationResult r;
      if (oracle) {
        r = plan::evaluate_oracle(test, s.model);
      } else {
        auto model_net = net::load_checkpoint<float>(checkpoint_path(p, subject, req));
        r = plan::evaluate_net(model_net, test, s.model);
      }
      std::cout << subject << " " << plan::variant_slug(req) << ": MD=" << r.scores.md
                << " mm, MPCC=" << 100.0 * r.scores.mpcc << " %\n";
      rows.emplace_back(subject, std::move(r));
    }
    const std::string base = p.out_dir + "/scores_" +
                             (oracle ? "oracle" : plan::variant_slug(req));
    write_scores_table(base, json(p), rows);
    artifacts.push_back(base + ".csv");
    artifacts.push_back(base + ".json");
    if (oracle) break;  // oracle scores do not depend on the variant
  }
  write_manifest(p.out_dir, "evaluate", json(p), artifacts);
  return 0;
}

// ---------------------------------------------------------------------------
// ablation sweeps

struct ConditionScore {
  std::string subject, condition;
  double x = 0;  // numeric condition value where applicable (input length)
  double md = 0, mpcc = 0;
};

std::vector<ConditionScore> run_conditions(const plan::ExperimentPlan& p,
                                           const std::vector<net::VariantRequest>& reqs,
                                           const std::vector<double>& xs,
                                           io::CsvWriter& csv) {
  std::vector<ConditionScore> all;
  for (const auto& subject : p.subjects) {
    auto s = load_subject(p, subject);
    const auto& test = s.trials[s.test_index];
    auto train_views = s.train_views();
    for (size_t c = 0; c < reqs.size(); ++c) {
      net::RpcNetConfig cfg = net::make_variant(net::RpcNetConfig{}, reqs[c]);
      net::TrainingConfig tcfg;
      tcfg.seed = net::Rng::stream(p.seed, std::hash<std::string>{}(subject) + c).next_u64();
      auto [model_net, tr] = plan::train_variant<float>(cfg, train_views, tcfg);
      auto r = plan::evaluate_net(model_net, test, s.model);
      ConditionScore cs{subject, plan::variant_slug(reqs[c]), xs.empty() ? 0.0 : xs[c],
                        r.scores.md, r.scores.mpcc};
      csv.row(cs.subject, cs.condition, cs.x, cs.md, 100.0 * cs.mpcc);
      std::cout << "  " << subject << " " << cs.condition << ": MD=" << cs.md
                << " MPCC=" << 100.0 * cs.mpcc << "\n";
      all.push_back(cs);
    }
  }
  return all;
}

int cmd_ablate(const GlobalOpts& g, const std::string& sweep) {
  auto p = load_plan(g);
  fs::create_directories(p.out_dir);
  const std::string score_path = p.out_dir + "/scores_sweep_" + sweep + ".csv";
  const std::string stats_path = p.out_dir + "/stats_" + sweep + ".txt";
  io::CsvWriter csv(score_path);
  csv.header({"subject", "condition", "x", "md_mm", "mpcc_pct"});
  std::ofstream stats(stats_path);
  auto pick = [](const std::vector<ConditionScore>& v, const std::string& cond,
                 bool mpcc) {
    std::vector<double> out;
    for (const auto& c : v)
      if (c.condition == cond) out.push_back(mpcc ? c.mpcc : c.md);
    return out;
  };

  if (sweep == "previous-state") {
    auto scores = run_conditions(p, {{"full"}, {"B"}}, {}, csv);
    auto md_f = pick(scores, "full", false), md_b = pick(scores, "B", false);
    auto pc_f = pick(scores, "full", true), pc_b = pick(scores, "B", true);
    stats << plan::t_test_line("MD", "full", "B", stats::Tail::Less,
                               stats::paired_t_one_sided(md_f, md_b, stats::Tail::Less))
          << "\n";
    stats << plan::t_test_line("MPCC", "full", "B", stats::Tail::Greater,
                               stats::paired_t_one_sided(pc_f, pc_b, stats::Tail::Greater))
          << "\n";
  } else if (sweep == "input-length") {
    std::vector<net::VariantRequest> reqs;
    std::vector<double> xs;
    std::vector<ConditionScore> full_all, b_all;
    for (const char* var : {"full", "B"}) {
      reqs.clear();
      xs.clear();
      for (double len : {0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1}) {
        net::VariantRequest r;
        r.variant = var;
        r.input_length_s = len;
        reqs.push_back(r);
        xs.push_back(len);
      }
      auto scores = run_conditions(p, reqs, xs, csv);
      auto& dst = std::string(var) == "full" ? full_all : b_all;
      dst = scores;
      std::vector<double> x, md, pc;
      for (const auto& c : scores) {
        x.push_back(c.x);
        md.push_back(c.md);
        pc.push_back(c.mpcc);
      }
      stats << "[" << var << "] "
            << plan::regression_line("MD", "mm/s", stats::linreg_slope_test(x, md)) << "\n";
      stats << "[" << var << "] "
            << plan::regression_line("MPCC", "1/s", stats::linreg_slope_test(x, pc)) << "\n";
    }
    // coupled full-vs-B observations across subjects x lengths
    std::vector<double> md_f, md_b, pc_f, pc_b;
    for (size_t i = 0; i < full_all.size(); ++i) {
      md_f.push_back(full_all[i].md);
      md_b.push_back(b_all[i].md);
      pc_f.push_back(full_all[i].mpcc);
      pc_b.push_back(b_all[i].mpcc);
    }
    stats << plan::wilcoxon_line("MD", "full", "B", stats::Tail::Less,
                                 stats::wilcoxon_signed_rank_one_sided(md_f, md_b,
                                                                       stats::Tail::Less))
          << "\n";
    stats << plan::wilcoxon_line(
                 "MPCC", "full", "B", stats::Tail::Greater,
                 stats::wilcoxon_signed_rank_one_sided(pc_f, pc_b, stats::Tail::Greater))
          << "\n";
  } else if (sweep == "width") {
    std::vector<ConditionScore> full_all, b_all;
    for (const char* var : {"full", "B"}) {
      std::vector<net::VariantRequest> reqs;
      net::VariantRequest orig;
      orig.variant = var;
      reqs.push_back(orig);
      for (const char* code : {"E-1", "E-2", "E-3", "E-4", "E-5"}) {
        net::VariantRequest r;
        r.variant = var;
        r.width_code = code;
        reqs.push_back(r);
      }
      auto scores = run_conditions(p, reqs, {}, csv);
      (std::string(var) == "full" ? full_all : b_all) = scores;
    }
    std::vector<double> md_f, md_b, pc_f, pc_b;
    for (size_t i = 0; i < full_all.size(); ++i) {
      md_f.push_back(full_all[i].md);
      md_b.push_back(b_all[i].md);
      pc_f.push_back(full_all[i].mpcc);
      pc_b.push_back(b_all[i].mpcc);
    }
    stats << plan::wilcoxon_line("MD", "full", "B", stats::Tail::Less,
                                 stats::wilcoxon_signed_rank_one_sided(md_f, md_b,
                                                                       stats::Tail::Less))
          << "\n";
    stats << plan::wilcoxon_line(
                 "MPCC", "full", "B", stats::Tail::Greater,
                 stats::wilcoxon_signed_rank_one_sided(pc_f, pc_b, stats::Tail::Greater))
          << "\n";
  } else if (sweep == "electrodes") {
    std::vector<net::VariantRequest> reqs;
    net::VariantRequest orig;
    orig.variant = "full";
    reqs.push_back(orig);
    for (const auto& code : net::electrode_subset_codes()) {
      net::VariantRequest r;
      r.variant = "full";
      r.electrode_code = code;
      reqs.push_back(r);
    }
    run_conditions(p, reqs, {}, csv);
    stats << "electrode sweep: " << reqs.size() << " conditions (original + "
          << net::electrode_subset_codes().size() << " subsets)\n";
  } else if (sweep == "monolithic") {
    std::vector<ConditionScore> with_angle, without_angle;
    for (bool b_side : {false, true}) {
      std::vector<net::VariantRequest> reqs(3);
      reqs[0].variant = b_side ? "B" : "full";
      reqs[1].variant = b_side ? "I-B" : "I";
      reqs[2].variant = b_side ? "W-B" : "W";
      auto scores = run_conditions(p, reqs, {}, csv);
      (b_side ? without_angle : with_angle) = scores;
      const std::string base = reqs[0].variant;
      for (int alt = 1; alt <= 2; ++alt) {
        auto md_a = pick(scores, plan::variant_slug(reqs[0]), false);
        auto md_x = pick(scores, plan::variant_slug(reqs[alt]), false);
        auto pc_a = pick(scores, plan::variant_slug(reqs[0]), true);
        auto pc_x = pick(scores, plan::variant_slug(reqs[alt]), true);
        stats << plan::t_test_line("MD", base, reqs[alt].variant, stats::Tail::Less,
                                   stats::paired_t_one_sided(md_a, md_x, stats::Tail::Less))
              << "\n";
        stats << plan::t_test_line(
                     "MPCC", base, reqs[alt].variant, stats::Tail::Greater,
                     stats::paired_t_one_sided(pc_a, pc_x, stats::Tail::Greater))
              << "\n";
      }
    }
    std::vector<double> md_f, md_b, pc_f, pc_b;
    for (size_t i = 0; i < with_angle.size(); ++i) {
      md_f.push_back(with_angle[i].md);
      md_b.push_back(without_angle[i].md);
      pc_f.push_back(with_angle[i].mpcc);
      pc_b.push_back(without_angle[i].mpcc);
    }
    stats << plan::sign_test_line("MD", "full", "B", stats::Tail::Less,
                                  stats::sign_test_one_sided(md_f, md_b, stats::Tail::Less))
          << "\n";
    stats << plan::sign_test_line(
                 "MPCC", "full", "B", stats::Tail::Greater,
                 stats::sign_test_one_sided(pc_f, pc_b, stats::Tail::Greater))
          << "\n";
  } else {
    throw InputError("unknown sweep: " + sweep +
                     " (previous-state|input-length|width|electrodes|monolithic)");
  }
  write_manifest(p.out_dir, "ablate_" + sweep, json(p), {score_path, stats_path});
  std::cout << "wrote " << score_path << " and " << stats_path << "\n";
  return 0;
}

int cmd_bench(const GlobalOpts& g, const std::string& checkpoint, long iterations) {
  auto model_net = net::load_checkpoint<float>(checkpoint);
  auto report = stats::measure_inference_time(model_net, iterations);
  std::cout << "inference time: " << report.mean_ms << " ms +- " << report.std_ms
            << " ms over " << report.iterations << " iterations\n"
            << "multiplies per forward pass: " << model_net.multiply_count() << "\n"
            << "hardware: " << report.hardware << "\n";
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    json j = {{"mean_ms", report.mean_ms},
              {"std_ms", report.std_ms},
              {"iterations", report.iterations},
              {"multiplies", model_net.multiply_count()},
              {"hardware", report.hardware},
              {"checkpoint", checkpoint}};
    std::ofstream out(g.out + "/bench.json");
    out << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RPC-Net workbench: EMG-to-hand-position pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "experiment plan (JSON)");
  app.add_option("--out", g.out, "output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "global seed");
  app.add_option("--threads", g.threads, "worker threads (default: all cores)");

  auto* synth = app.add_subcommand("synth", "generate synthetic trials");
  int s_subjects = 1, s_trials = 6;
  double s_duration = 450.0, s_noise = 0.2, s_marker_noise = 0.0;
  synth->add_option("--subjects", s_subjects, "number of subjects");
  synth->add_option("--trials", s_trials, "trials per subject");
  synth->add_option("--duration", s_duration, "trial duration in seconds");
  synth->add_option("--noise", s_noise, "EMG noise level (fraction of signal RMS)");
  synth->add_option("--marker-noise", s_marker_noise, "marker noise (mm)");

  auto* prep = app.add_subcommand("preprocess", "post-process raw trials");
  std::string data_dir;
  prep->add_option("--data", data_dir, "directory with .rpct trials")->required();

  app.add_subcommand("train", "train the networks of a plan");

  auto* eval = app.add_subcommand("evaluate", "score trained networks on test trials");
  bool oracle = false;
  eval->add_flag("--oracle", oracle, "score the ground truth against itself");

  auto* abl = app.add_subcommand("ablate", "run an ablation sweep plus statistics");
  std::string sweep = "previous-state";
  abl->add_option("--sweep", sweep,
                  "previous-state|input-length|width|electrodes|monolithic");

  auto* bench = app.add_subcommand("bench", "measure inference time of a checkpoint");
  std::string checkpoint;
  long iterations = 100000;
  bench->add_option("--checkpoint", checkpoint, "trained .rpcn file")->required();
  bench->add_option("--iterations", iterations, "forward passes to time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 0;
  }
  g.seed_set = seed_opt->count() > 0;
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (synth->parsed())
      return cmd_synth(g, s_subjects, s_trials, s_duration, s_noise, s_marker_noise);
    if (prep->parsed()) return cmd_preprocess(g, data_dir);
    if (app.get_subcommand("train")->parsed()) return cmd_train(g);
    if (eval->parsed()) return cmd_evaluate(g, oracle);
    if (abl->parsed()) return cmd_ablate(g, sweep);
    if (bench->parsed()) return cmd_bench(g, checkpoint, iterations);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
