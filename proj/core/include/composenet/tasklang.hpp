#pragma once

#include <array>
#include <string>
#include <vector>

#include "composenet/gridworld.hpp"

namespace composenet {

enum class FormulaKind { Prop, Not, And, Or, Until, Eventually, Always };

// AST of the task fragment over propositions r, g, b. Value type; children
// are owned. The same tree drives role assignment, the reward monitor, and
// the composition-tree template.
class Formula {
public:
  static Formula prop(Color c);
  static Formula negate(Formula f);
  static Formula conj(Formula a, Formula b);
  static Formula disj(Formula a, Formula b);
  static Formula until(Formula a, Formula b);
  static Formula eventually(Formula f);
  static Formula always(Formula f);

  FormulaKind kind() const { return kind_; }
  Color color() const;               // Prop only
  const Formula& child() const;      // unary
  const Formula& left() const;       // binary
  const Formula& right() const;      // binary

  bool operator==(const Formula& other) const;

  // Surface syntax: atoms r|g|b; ! & | U F G; parenthesized as needed so the
  // result reparses to an equal tree.
  std::string str() const;

private:
  Formula(FormulaKind k, Color c, std::vector<Formula> kids)
      : kind_(k), color_(c), kids_(std::move(kids)) {}

  FormulaKind kind_;
  Color color_ = Color::Red;
  std::vector<Formula> kids_;
};

// Parses the ASCII grammar: atoms r|g|b; operators ! (highest), G/F, &, |,
// U (lowest, right-associative); parentheses. Syntax errors carry the
// character position.
Formula parse_formula(const std::string& text);

enum class TemplateKind {
  CollectSkill,  // F p
  EvadeSkill,    // G !p
  While,         // !p U q
  OrTask,        // F p | F q
  AndEvade,      // G !p & G !q
  Then,          // F (p & F q): collect p first, then q
  HierAndUntil,  // (!p & !q) U s
  HierUntilOr,   // !p U (s | t)
};
const char* to_string(TemplateKind k);
bool is_hierarchy(TemplateKind k);

enum class RewardMode { Goal, Survival };

// Compiled task: roles for the environment, reward mode for the monitor and
// ordered skill slots for the composition-tree template. Symmetric slots
// (OrTask, AndEvade and the AndEvade pair inside HierAndUntil) are
// canonicalized to color order r < g < b; Then keeps temporal order.
struct TaskSpec {
  Formula formula;
  TemplateKind template_kind;
  RewardMode reward_mode;
  std::array<Role, 3> roles;
  std::vector<Color> targets;  // collect colors, slot order
  std::vector<Color> enemies;  // enemy colors, slot order

  Role role(Color c) const { return roles[static_cast<size_t>(c)]; }
  GridConfig grid_config() const;
  // Stable identifier, e.g. "collect_r", "while_g_b", "then_r_g",
  // "andwhile_g_b_r"; used for value-head parameter names and file names.
  std::string slug() const;
};

TaskSpec compile_task(const Formula& f);
TaskSpec compile_task(const std::string& text);

enum class MonitorStatus { Running, Success, Failure };

struct MonitorState {
  std::array<bool, 3> collected_latch{};
  MonitorStatus status = MonitorStatus::Running;
  bool done = false;
};

struct MonitorOutcome {
  float reward = 0.0f;
  bool done = false;
};

// Advances the reward monitor one tick.
// Goal mode: +1/done on completion; -1/done on an enemy collision before
// completion; 0/done the tick the task becomes unsatisfiable (second-ordered
// object collected first in a then-task); 0/done on truncation.
// Survival mode: +0.01 per tick survived; collision -> 0/done; truncation ->
// +0.01/done. Completion outranks a same-tick collision (until is strict on
// its left side). UsageError once done.
MonitorOutcome monitor_step(MonitorState& m, const TaskSpec& spec, const EventSet& ev,
                            bool truncated);

// --- finite-trace oracle -------------------------------------------------

enum class TraceVerdict { Satisfied, Violated, Undetermined };
const char* to_string(TraceVerdict v);

// Instantaneous events at one tick. Collection events are one-shot per
// episode (an object can never be collected twice); collisions may repeat.
struct TickProps {
  std::array<bool, 3> collected{};
  std::array<bool, 3> collided{};
};

// Direct recursive three-valued evaluation over a finite trace, independent
// of monitor_step. Violated means no valid continuation of the trace can
// satisfy the formula (valid continuations never replay a spent collection
// event). Supported-shape formulas only.
TraceVerdict brute_force_satisfies(const Formula& f, const std::vector<TickProps>& trace);

}  // namespace composenet
