#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "composenet/gridworld.hpp"
#include "composenet/params.hpp"
#include "composenet/tape.hpp"
#include "composenet/tasklang.hpp"

namespace composenet {

enum class SkillId : int {
  CollectR = 0,
  CollectG = 1,
  CollectB = 2,
  EvadeR = 3,
  EvadeG = 4,
  EvadeB = 5,
};
inline constexpr std::array<SkillId, 6> kAllSkills = {
    SkillId::CollectR, SkillId::CollectG, SkillId::CollectB,
    SkillId::EvadeR,   SkillId::EvadeG,   SkillId::EvadeB};

const char* to_string(SkillId s);  // "collect_r", ...
SkillId skill_from_string(const std::string& name);
SkillId collect_skill(Color c);
SkillId evade_skill(Color c);
bool is_collect(SkillId s);
Color skill_color(SkillId s);
// The single-skill task this skill is trained on ("F r", "G !r", ...).
TaskSpec skill_task(SkillId s);

// Network dimensions, fixed by the architecture: flattened 15x15 input,
// two 128-wide hidden layers, 128-wide skill-state embedding, 4 actions.
struct ModelDims {
  static constexpr int kInput = GridConfig::kCells;
  static constexpr int kHidden = 128;
  static constexpr int kEmbedding = 128;
  static constexpr int kActions = kNumActions;
};

// Parameter-name scheme (normative for checkpoints and transfer):
//   trunk.<skill>.fcN.{weight,bias}   N in 1..3
//   policy.{weight,bias}
//   comp.<node-path>.{weight,bias}    node-path: root, root.1, root.2
//   value.<task>.{weight,bias}
std::string trunk_layer_name(SkillId s, int layer);          // "trunk.collect_r.fc1"
inline const char* kPolicyLayerName = "policy";
std::string comp_layer_name(const std::string& node_path);   // "comp.root"
std::string value_head_name(const std::string& task_slug);   // "value.collect_r"

// Uniform fan-in initialization: W ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
Tensor init_dense_weight(int out, int in, Rng& rng);
void add_dense_params(ParamSet& params, const std::string& layer, int out, int in, Rng& rng);

void add_trunk_params(ParamSet& params, SkillId s, Rng& rng);
void add_policy_params(ParamSet& params, Rng& rng);
void add_value_head_params(ParamSet& params, const std::string& task_slug, Rng& rng);
void add_comp_params(ParamSet& params, const std::string& node_path, Rng& rng);

// All six trunks + the shared policy layer + one value head per skill.
ParamSet init_skill_params(uint64_t seed);

// Binary composition tree: leaves are skill trunks, internal nodes are
// composition layers. The root embedding feeds the shared policy layer and a
// per-task value head.
struct CompositionTree {
  struct Node {
    std::optional<SkillId> skill;  // set iff leaf
    std::unique_ptr<Node> slot1;
    std::unique_ptr<Node> slot2;
    std::string path;  // "root", "root.1", "root.2"
    bool is_leaf() const { return skill.has_value(); }
  };
  Node root;

  std::vector<SkillId> leaves() const;             // slot order
  std::vector<std::string> comp_paths() const;     // internal nodes, outermost first
  int depth() const;
};

// Template wiring. Until nodes put the evade side in slot 1 and the collect
// side in slot 2; symmetric templates use the canonical slot order already
// fixed by compile_task.
CompositionTree build_tree(const TaskSpec& spec);
CompositionTree leaf_tree(SkillId s);
// A tree with the same shape as build_tree(spec) but the given leaves, for
// wrong-skill ablations.
CompositionTree substituted_tree(const TaskSpec& spec, const std::vector<SkillId>& leaves);

// Forward passes (no tape; used for acting and evaluation).
Tensor trunk_forward(const ParamSet& params, const Observation& obs, SkillId s);
Tensor policy_forward(const ParamSet& params, const Tensor& embedding);  // probs[4]
Tensor compose_forward(const ParamSet& params, const std::string& node_path, const Tensor& e1,
                       const Tensor& e2);

struct PolicyValue {
  Tensor probs;        // [4]
  float value = 0.0f;  // 0 when no value head requested
};
// Bottom-up tree evaluation: leaves -> trunk, internal -> composition layer,
// root -> policy layer (+ value head when `value_slug` is non-empty).
PolicyValue tree_forward(const ParamSet& params, const Observation& obs,
                         const CompositionTree& tree, const std::string& value_slug = "");

// Taped variant for training.
struct TapedPolicyValue {
  Tape::NodeId logits = -1;
  Tape::NodeId value = -1;  // scalar node
};
TapedPolicyValue tree_forward_taped(Tape& tape, const Observation& obs,
                                    const CompositionTree& tree, const std::string& value_slug);

}  // namespace composenet
