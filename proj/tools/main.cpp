#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "composenet/errors.hpp"
#include "composenet/harness.hpp"

namespace {

using namespace composenet;

struct VerbArgs {
  std::string config_path;
  std::optional<uint64_t> seed_override;
};

ExperimentConfig load_with_override(const VerbArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_path);
  if (args.seed_override) cfg.train.seed = *args.seed_override;
  return cfg;
}

void add_common(CLI::App* sub, VerbArgs& args) {
  sub->add_option("--config", args.config_path, "JSON experiment config")->required();
  sub->add_option("--seed", args.seed_override, "override train.seed");
}

void print_artifacts(const RunArtifacts& a) {
  std::cout << "steps: " << a.steps << "\n";
  std::cout << "final mean return: " << a.final_eval.mean_return
            << "  mean length: " << a.final_eval.mean_length << "\n";
  std::cout << "checkpoint: " << a.checkpoint_prefix << ".json/.bin\n";
  for (const std::string& p : a.metrics_paths) std::cout << "metrics: " << p << "\n";
}

void expect_method(const ExperimentConfig& cfg, std::initializer_list<Method> allowed,
                   const std::string& verb) {
  for (Method m : allowed)
    if (cfg.method == m) return;
  std::string names;
  for (Method m : allowed) names += (names.empty() ? "" : ", ") + std::string(to_string(m));
  throw ConfigError("verb '" + verb + "' expects method in {" + names + "}, config has '" +
                    to_string(cfg.method) + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ComposeNet: compositional skill policies in a collect/evade gridworld"};
  app.require_subcommand(1);

  VerbArgs args;

  CLI::App* train_skills_cmd =
      app.add_subcommand("train-skills", "jointly pre-train all six skills");
  add_common(train_skills_cmd, args);
  CLI::App* train_cmd =
      app.add_subcommand("train", "train one method on one composed task");
  add_common(train_cmd, args);
  CLI::App* transfer_train_cmd = app.add_subcommand(
      "transfer-train", "train one composition layer across several tasks of one type");
  add_common(transfer_train_cmd, args);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a task");
  add_common(eval_cmd, args);
  CLI::App* zero_shot_cmd = app.add_subcommand(
      "zero-shot", "evaluate a transfer-initialized (or random) tree without training");
  add_common(zero_shot_cmd, args);
  CLI::App* ablate_skills_cmd =
      app.add_subcommand("ablate-skills", "train a composition over substituted skills");
  add_common(ablate_skills_cmd, args);
  CLI::App* ablate_policy_cmd = app.add_subcommand(
      "ablate-policy", "train a fresh policy layer on one frozen trunk (no composition)");
  add_common(ablate_policy_cmd, args);
  CLI::App* plot_cmd = app.add_subcommand("plot", "render metrics files to an SVG chart");
  add_common(plot_cmd, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train_skills_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      expect_method(cfg, {Method::Skills}, "train-skills");
      print_artifacts(run(cfg));
    } else if (train_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      expect_method(cfg, {Method::ComposeNet, Method::Scratch, Method::MetaController},
                    "train");
      print_artifacts(run(cfg));
    } else if (transfer_train_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      expect_method(cfg, {Method::ComposeNet}, "transfer-train");
      if (cfg.tasks.size() < 2)
        throw ConfigError("transfer-train expects 'tasks' with at least two entries");
      print_artifacts(run(cfg));
    } else if (eval_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      const ZeroShotResult r = eval_checkpoint_on_task(cfg);
      std::cout << "mean return: " << r.mean_return << "  mean length: " << r.mean_length
                << "\n";
    } else if (zero_shot_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      const ZeroShotResult r = zero_shot_eval(cfg);
      std::cout << "zero-shot mean return: " << r.mean_return
                << "  mean length: " << r.mean_length << "\n";
    } else if (ablate_skills_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      expect_method(cfg, {Method::AblationWrongSkills}, "ablate-skills");
      print_artifacts(run(cfg));
    } else if (ablate_policy_cmd->parsed()) {
      ExperimentConfig cfg = load_with_override(args);
      expect_method(cfg, {Method::AblationPolicyRetrain}, "ablate-policy");
      print_artifacts(run(cfg));
    } else if (plot_cmd->parsed()) {
      run_plot(load_plot_config(args.config_path));
    }
  } catch (const MissingPrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return static_cast<int>(ExitCode::MissingPrerequisite);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::NumericFailure);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::BadConfig);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::BadConfig);
  }
  return static_cast<int>(ExitCode::Ok);
}
