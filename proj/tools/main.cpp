#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "dypol/diffnum/checkpoint.hpp"
#include "dypol/harness/pipelines.hpp"

namespace fs = std::filesystem;
using namespace dypol;

namespace {

harness::ExperimentConfig load_cfg(const std::string& path,
                                   std::optional<long long> seed_override) {
  harness::ExperimentConfig cfg = harness::load_config(path);
  if (seed_override) {
    cfg.seed = static_cast<std::uint64_t>(*seed_override);
    cfg.env.seed = cfg.seed;
  }
  return cfg;
}

void write_curve(const Vec& curve, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  f << "episode,reward\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, curve[i]);
    f << buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamics-conditioned policy transfer toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, model_path, policy_path,
      sysid_path;
  std::optional<long long> seed;
  int episodes = -1;
  int n_seeds = 3;
  Vec k_values{0.0, 0.5, 1.0};
  Vec ranges{0.05, 0.10, 0.20, 0.30};

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "experiment TOML")->required();
    if (needs_out) cmd->add_option("--out", out_path, "output directory")->required();
    cmd->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* train_policy = app.add_subcommand("train-policy",
                                              "dynamics-randomized PPO training");
  add_common(train_policy);

  CLI::App* collect = app.add_subcommand(
      "collect-offpolicy", "random-policy rollouts for estimator training");
  add_common(collect);
  collect->add_option("--episodes", episodes, "episodes per environment");

  CLI::App* train_sysid_cmd =
      app.add_subcommand("train-sysid", "variational dynamics estimator training");
  train_sysid_cmd->add_option("--data", data_path, "JSONL directory")->required();
  add_common(train_sysid_cmd);

  CLI::App* estimate_cmd =
      app.add_subcommand("estimate", "posterior over dynamics from rollouts");
  estimate_cmd->add_option("--model", model_path, "estimator directory")->required();
  estimate_cmd->add_option("--data", data_path, "episodes JSONL")->required();
  estimate_cmd->add_option("--out", out_path, "posterior JSON path")->required();

  CLI::App* zero_shot = app.add_subcommand(
      "evaluate-zero-shot", "no-update transfer evaluation on unseen dynamics");
  add_common(zero_shot);
  zero_shot->add_option("--policy", policy_path, "policy checkpoint dir")->required();
  zero_shot->add_option("--sysid", sysid_path, "estimator checkpoint dir")->required();

  CLI::App* finetune_cmd =
      app.add_subcommand("finetune", "continue PPO in one test environment");
  add_common(finetune_cmd);
  finetune_cmd->add_option("--policy", policy_path)->required();
  finetune_cmd->add_option("--sysid", sysid_path)->required();
  finetune_cmd->add_option("--episodes", episodes, "fine-tuning episodes");

  CLI::App* ablate = app.add_subcommand("ablate", "regularizer ablation table");
  add_common(ablate);
  ablate->add_option("--seeds", n_seeds, "seeds per variant");

  CLI::App* sweep = app.add_subcommand("sweep-ranges",
                                       "train+eval across randomization ranges");
  add_common(sweep);
  sweep->add_option("--seeds", n_seeds);
  sweep->add_option("--ranges", ranges, "randomization fractions");

  CLI::App* noise = app.add_subcommand("noise-eval",
                                       "motor-noise adaptation comparison");
  add_common(noise);
  noise->add_option("--seeds", n_seeds);
  noise->add_option("--k-values", k_values, "noise multipliers");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_policy) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      fs::create_directories(out_path);
      std::vector<ppo::IterStats> curve;
      harness::train_policy_pipeline(cfg, cfg.seed, fs::path(out_path), &curve);
      std::cout << "trained " << curve.size() << " iterations; final mean reward "
                << (curve.empty() ? 0.0 : curve.back().mean_reward) << '\n';
    } else if (*collect) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      fs::create_directories(out_path);
      const int per_env =
          episodes > 0 ? episodes : cfg.sysid.episodes_per_env;
      harness::SysidData data;
      {
        harness::ExperimentConfig c = cfg;
        c.sysid.episodes_per_env = per_env;
        data = harness::collect_sysid_data(c, cfg.seed);
      }
      char name[64];
      for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        std::snprintf(name, sizeof(name), "env_%03zu.jsonl", e + 1);
        core::write_episodes_jsonl(data.episodes[e], fs::path(out_path) / name);
      }
      std::cout << "wrote " << data.episodes.size() << " environment files to "
                << out_path << '\n';
    } else if (*train_sysid_cmd) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      std::vector<std::vector<core::Chunk>> datasets;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(data_path)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& file : files) {
        std::vector<core::Chunk> chunks;
        for (const core::Episode& ep : core::read_episodes_jsonl(file)) {
          auto cs = core::chunk_episode(ep, cfg.sysid.T);
          chunks.insert(chunks.end(), cs.begin(), cs.end());
        }
        datasets.push_back(std::move(chunks));
      }
      if (datasets.empty()) throw std::runtime_error("no .jsonl files in " + data_path);
      Vec losses;
      harness::SysidBundle bundle =
          harness::train_sysid_from_datasets(cfg, datasets, cfg.seed, &losses);
      fs::create_directories(out_path);
      bundle.model.save(out_path, bundle.params);
      write_curve(losses, fs::path(out_path) / "loss_curve.csv");
      std::cout << "trained estimator on " << datasets.size()
                << " environments; final loss "
                << (losses.empty() ? 0.0 : losses.back()) << '\n';
    } else if (*estimate_cmd) {
      diffnum::ParamStore params;
      sysid::EstimatorModel model = sysid::EstimatorModel::load(model_path, &params);
      std::vector<core::Episode> episodes_data = core::read_episodes_jsonl(data_path);
      sysid::PosteriorEstimate est = model.estimate_raw(params, episodes_data);
      nlohmann::json j;
      j["mean"] = est.posterior.mean;
      j["std"] = est.posterior.std;
      j["k_used"] = est.k_used;
      j["clamped_dims"] = est.clamped_dims;
      std::ofstream f(out_path);
      if (!f) throw std::runtime_error("cannot write " + out_path);
      f << j.dump(2) << '\n';
      std::cout << "posterior over " << est.posterior.mean.size()
                << " dims from " << est.k_used << " chunks\n";
    } else if (*zero_shot) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      harness::PolicyBundle policy = harness::load_policy(policy_path);
      diffnum::ParamStore sp;
      sysid::EstimatorModel model = sysid::EstimatorModel::load(sysid_path, &sp);
      harness::SysidBundle sysid_bundle{std::move(model), std::move(sp)};
      harness::EvalReport report =
          harness::evaluate_zero_shot(cfg, policy, sysid_bundle, cfg.seed);
      fs::create_directories(out_path);
      harness::write_eval_csv(report, fs::path(out_path) / "metrics.csv");
      harness::write_eval_json(report, fs::path(out_path) / "report.json");
      std::cout << "zero-shot " << report.mean_zero_shot << " oracle "
                << report.mean_oracle << " base " << report.mean_base << " over "
                << report.n_evaluated << " test envs\n";
    } else if (*finetune_cmd) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      harness::PolicyBundle policy = harness::load_policy(policy_path);
      diffnum::ParamStore sp;
      sysid::EstimatorModel model = sysid::EstimatorModel::load(sysid_path, &sp);
      harness::SysidBundle sysid_bundle{std::move(model), std::move(sp)};
      core::SeededRng dyn_rng =
          core::derive_stream(cfg.seed, core::streams::kDynTest, 424242);
      envs::EnvSpec test_env = cfg.env;
      test_env.dynamics = core::sample_dynamics(cfg.env.dynamics,
                                                cfg.env.dynamics.range_frac, dyn_rng);
      const int n = episodes >= 0 ? episodes : cfg.eval.finetune_episodes;
      harness::FinetuneResult res =
          harness::finetune(cfg, policy, sysid_bundle, test_env, n, cfg.seed);
      fs::create_directories(out_path);
      write_curve(res.curve, fs::path(out_path) / "finetune_curve.csv");
      diffnum::save_checkpoint(res.params, fs::path(out_path) / "finetuned");
      std::cout << "fine-tuned for " << n << " episodes; zero-shot "
                << (res.curve.empty() ? 0.0 : res.curve.front()) << " final "
                << (res.curve.empty() ? 0.0 : res.curve.back()) << '\n';
    } else if (*ablate) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      auto rows = harness::run_ablation_suite(cfg, n_seeds);
      fs::create_directories(out_path);
      harness::write_ablation_csv(rows, fs::path(out_path) / "ablation.csv");
      for (const auto& r : rows) {
        std::cout << r.variant << ": " << r.mean_zero_shot << " +- "
                  << r.std_zero_shot << '\n';
      }
    } else if (*sweep) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      auto rows = harness::run_range_sweep(cfg, ranges, n_seeds);
      fs::create_directories(out_path);
      harness::write_sweep_csv(rows, fs::path(out_path) / "range_sweep.csv");
      for (const auto& r : rows) {
        std::cout << "range " << r.range << ": full " << r.full_mean << " ff "
                  << r.ff_mean << '\n';
      }
    } else if (*noise) {
      harness::ExperimentConfig cfg = load_cfg(config_path, seed);
      auto rows = harness::run_noise_eval(cfg, k_values, n_seeds);
      fs::create_directories(out_path);
      harness::write_noise_csv(rows, fs::path(out_path) / "noise_eval.csv");
      for (const auto& r : rows) {
        std::cout << r.scenario << " K=" << r.K << ": noise " << r.noise_mean
                  << " nonoise " << r.nonoise_mean << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
