#pragma once

#include <optional>
#include <string>
#include <vector>

#include "composenet/baselines.hpp"
#include "composenet/checkpoint.hpp"
#include "composenet/metrics.hpp"
#include "composenet/plot.hpp"
#include "composenet/trainer.hpp"

namespace composenet {

enum class Method {
  Skills,
  ComposeNet,
  Scratch,
  MetaController,
  AblationWrongSkills,
  AblationPolicyRetrain,
};
const char* to_string(Method m);
Method method_from_string(const std::string& s);

// One config file = one run. Parsed and validated fully (unknown keys
// rejected, tasks compiled, method-specific requirements checked) before any
// training starts.
struct ExperimentConfig {
  int version = 1;
  std::string name;
  Method method = Method::ComposeNet;
  std::vector<std::string> tasks;  // 1 for single-task; >=2 for multitask; empty for skills
  TrainConfig train;
  std::string skills_checkpoint;                // prefix
  std::vector<std::string> transfer_checkpoints;  // prefixes
  std::string eval_checkpoint;                  // prefix (eval / zero-shot verbs)
  std::vector<std::string> substitute_skills;   // ablation_wrong_skills: slot order
  std::string retrain_trunk;                    // ablation_policy_retrain
  int trace_episodes = 0;
  std::string out_dir = "out";
  std::string config_hash;  // FNV-1a of the canonicalized document

  TaskSpec task_spec(size_t i = 0) const;  // compiled view of tasks[i]
};

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& source_name);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunArtifacts {
  std::string checkpoint_prefix;
  std::vector<std::string> metrics_paths;
  EvalResult final_eval;
  long long steps = 0;
};

// Dispatches to the right training path, wires metrics/checkpoint/trace
// outputs under out_dir and verifies prerequisites before any environment
// step. All randomness derives from the config seed.
RunArtifacts run(const ExperimentConfig& cfg);

struct ZeroShotResult {
  float mean_return = 0.0f;
  float mean_length = 0.0f;
};

// Greedy evaluation with zero gradient updates. Either evaluates
// `eval_checkpoint` directly, or assembles a tree from skills_checkpoint +
// transfer_checkpoints (random-init composition layers when no transfer
// checkpoints are given).
ZeroShotResult zero_shot_eval(const ExperimentConfig& cfg);

// Greedy evaluation of a finished checkpoint on the config task.
ZeroShotResult eval_checkpoint_on_task(const ExperimentConfig& cfg);

// The node-path transfer map used for transfer-initialized trees: flat
// targets take the (same-template) source root; hierarchies take the
// while-source at the root and the inner-template source at the inner node.
TransferInit make_transfer_init(const TaskSpec& target,
                                const std::vector<const LoadedCheckpoint*>& sources);

// --- plotting ------------------------------------------------------------

struct PlotConfig {
  std::string output;
  std::string title;
  std::string y_axis = "return";  // "return" | "length"
  struct Series {
    std::string label;
    std::vector<std::string> files;
  };
  std::vector<Series> series;
};

PlotConfig load_plot_config(const std::string& path);
void run_plot(const PlotConfig& cfg);

}  // namespace composenet
