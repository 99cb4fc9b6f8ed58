// adaproj: command line driver for the anomaly detection experiments.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error, 3 data error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "adaproj/config.hpp"
#include "adaproj/dataset.hpp"
#include "adaproj/error.hpp"
#include "adaproj/experiment.hpp"
#include "adaproj/report.hpp"

namespace fs = std::filesystem;
using namespace adaproj;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Options {
  fs::path config;
  fs::path out = "adaproj_out";
  std::uint64_t seed_offset = 0;
  std::optional<std::string> loss;
  std::optional<int> subspace_dim;
  std::optional<fs::path> scores;
};

// Timestamps live only in the log file so result files stay reproducible.
class RunLog {
 public:
  explicit RunLog(const fs::path& dir) {
    fs::create_directories(dir);
    file_.open(dir / "adaproj.log", std::ios::app);
  }
  void operator()(const std::string& message) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    file_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << message << '\n';
    file_.flush();
    std::cerr << message << '\n';
  }

 private:
  std::ofstream file_;
};

ExperimentConfig load(const Options& opt) {
  if (opt.config.empty()) throw Error(ErrorKind::ConfigInvalid, "--config is required");
  ExperimentConfig c = load_config(opt.config);
  c.seed += opt.seed_offset;
  if (opt.loss) c.loss_head = parse_loss_head(*opt.loss);
  if (opt.subspace_dim) c.subspace_dim = *opt.subspace_dim;
  validate(c);
  return c;
}

std::string seed_file(const std::string& stem, std::uint64_t seed, const std::string& ext) {
  return stem + "_seed_" + std::to_string(seed) + ext;
}

void save_config_copy(const fs::path& dir, const ExperimentConfig& c) {
  std::ofstream(dir / "config.resolved") << render_config(c);
}

int cmd_synth(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = generate_synthetic(c.synthetic);
  write_dataset(opt.out, data);
  log("synth: wrote " + std::to_string(data.clips.size()) + " clips to " + (opt.out / "manifest.csv").string());
  return 0;
}

int cmd_train(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = load_dataset(c);
  fs::create_directories(opt.out / "models");
  save_config_copy(opt.out, c);
  std::vector<TrialResult> history;
  for (int i = 0; i < c.trials; ++i) {
    const std::uint64_t seed = trial_seed(c, i);
    const TrainResult r = train_trial(c, data, seed);
    save_model(opt.out / "models" / seed_file("model", seed, ".adpj"), r.params);
    TrialResult t;
    t.seed = seed;
    t.epoch_losses = r.epoch_losses;
    history.push_back(std::move(t));
    log("train: seed " + std::to_string(seed) + " final loss " + std::to_string(r.epoch_losses.back()));
  }
  report::write_loss_history(opt.out / "loss_history.csv", history);
  return 0;
}

int cmd_score(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = load_dataset(c);
  fs::create_directories(opt.out / "scorers");
  std::vector<std::vector<ScoredSample>> all;
  for (int i = 0; i < c.trials; ++i) {
    const std::uint64_t seed = trial_seed(c, i);
    const ModelParams params = load_model(opt.out / "models" / seed_file("model", seed, ".adpj"));
    const ScoringOutput s = score_trial(c, data, params, seed);
    for (const ScorerModel& m : s.scorers) {
      save_scorer(opt.out / "scorers" / seed_file("scorer_" + m.section, seed, ".km"), m);
    }
    report::write_scores(opt.out / seed_file("scores", seed, ".csv"), s.scores);
    all.push_back(s.scores);
    log("score: seed " + std::to_string(seed) + " scored " + std::to_string(s.scores.size()) + " clips");
  }
  report::write_scores(opt.out / "scores_ensemble.csv", ensemble_scores(all));
  return 0;
}

int cmd_eval(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  if (opt.scores) {
    const TrialResult t = evaluate_scores(c, report::read_scores(*opt.scores));
    report::write_results(opt.out / "results.csv", t.sections);
    report::write_domain_results(opt.out / "results_by_domain.csv", t.by_domain);
    log("eval: official score " + std::to_string(t.official));
    return 0;
  }
  std::vector<TrialResult> trials;
  for (int i = 0; i < c.trials; ++i) {
    const std::uint64_t seed = trial_seed(c, i);
    TrialResult t = evaluate_scores(c, report::read_scores(opt.out / seed_file("scores", seed, ".csv")));
    t.seed = seed;
    report::write_trial(opt.out, t);
    trials.push_back(std::move(t));
  }
  const ExperimentResult r = aggregate_trials(c, std::move(trials));
  report::write_aggregate(opt.out / "aggregate.csv", r);
  report::write_results(opt.out / "results_ensemble.csv", r.ensemble.sections);
  log("eval: official score mean " + std::to_string(r.official.mean) + " std " + std::to_string(r.official.std));
  return 0;
}

int cmd_run(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = load_dataset(c);
  save_config_copy(opt.out, c);
  const ExperimentResult r = run_experiment(c, data, &opt.out);
  log("run: " + std::string(to_string(c.loss_head)) + " official score mean " + std::to_string(r.official.mean) +
      " std " + std::to_string(r.official.std));
  return 0;
}

int cmd_compare(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = load_dataset(c);
  save_config_copy(opt.out, c);
  for (const ExperimentResult& r : compare_losses(c, data, &opt.out)) {
    log("compare: " + std::string(to_string(r.head)) + " official score mean " + std::to_string(r.official.mean));
  }
  return 0;
}

int cmd_sweep(const Options& opt) {
  const ExperimentConfig c = load(opt);
  RunLog log(opt.out);
  const Dataset data = load_dataset(c);
  save_config_copy(opt.out, c);
  for (const SweepRow& row : sweep_subspace_dim(c, data, c.sweep_dims, &opt.out)) {
    log("sweep: J=" + std::to_string(row.subspace_dim) + " official score mean " + std::to_string(row.official.mean));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaProj anomalous sound detection experiments"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Experiment config (key = value lines)")->required();
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--seed-offset", opt.seed_offset, "Added to the configured base seed");
    sub->add_option("--loss", opt.loss, "Loss head override")
        ->check(CLI::IsMember({"compactness", "compactness_cce", "adacos", "subcluster_adacos", "adaproj"}));
    sub->add_option("--subspace-dim", opt.subspace_dim, "AdaProj subspace dimension override");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"synth", "Write a synthetic dataset (manifest.csv + feature blobs)", cmd_synth},
      {"train", "Train one model per trial seed", cmd_train},
      {"score", "Fit the backend and score the test split with trained models", cmd_score},
      {"eval", "Compute AUC / pAUC / official score from score files", cmd_eval},
      {"run", "train + score + eval in one go", cmd_run},
      {"compare", "Run all five loss heads and write comparison.csv", cmd_compare},
      {"sweep", "Sweep the AdaProj subspace dimension and write sweep.csv", cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub);
    if (std::string_view(cmd.name) == "synth") {
      sub->footer(
          "Generator keys (config, defaults): synth_sections 6, synth_latent_dim 8, synth_spectrogram_dim 64,\n"
          "synth_spectrum_dim 64, synth_train_source 100, synth_train_target 10, synth_test_per_domain 25,\n"
          "synth_latent_scale 1, synth_section_offset 1, synth_noise 0.1, synth_perturbation 0.5,\n"
          "synth_domain_shift 1, synth_anomaly cross_section (or isotropic), synth_seed 0.");
    }
    if (std::string_view(cmd.name) == "eval") {
      sub->add_option("--scores", opt.scores, "Evaluate this score CSV instead of per-seed files");
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->run(opt);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_config_error() ? kExitConfig : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
