#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "composenet/rng.hpp"
#include "composenet/tensor.hpp"

namespace composenet {

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kNumActions = 4;
const char* to_string(Action a);

enum class Color : int { Red = 0, Green = 1, Blue = 2 };
inline constexpr std::array<Color, 3> kColors = {Color::Red, Color::Green, Color::Blue};
const char* to_string(Color c);
char color_letter(Color c);  // 'r', 'g', 'b'

enum class Role : int { Target = 0, Enemy = 1, Bystander = 2 };
const char* to_string(Role r);

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Non-wrapping Manhattan distance (objects cannot teleport).
int manhattan(Cell a, Cell b);

struct GridConfig {
  static constexpr int kSize = 15;
  static constexpr int kCells = kSize * kSize;
  int max_steps = 100;
  int min_enemy_spawn_distance = 4;
  std::array<Role, 3> roles = {Role::Bystander, Role::Bystander, Role::Bystander};

  Role role(Color c) const { return roles[static_cast<size_t>(c)]; }
};

struct ObjectState {
  Cell cell;
  bool alive = true;
};

struct WorldState {
  Cell agent;
  std::array<ObjectState, 3> objects;  // indexed by Color
  int step_count = 0;
  Rng rng;  // consumed at reset only; carried so a state fully determines a run

  const ObjectState& object(Color c) const { return objects[static_cast<size_t>(c)]; }
  ObjectState& object(Color c) { return objects[static_cast<size_t>(c)]; }
};

// 15x15 grayscale image, row-major, values from the fixed palette:
// empty 0.0, red 0.3, green 0.5, blue 0.7, agent 1.0.
// Draw priority on overlap: agent > red > green > blue.
inline constexpr float kAgentIntensity = 1.0f;
inline constexpr std::array<float, 3> kObjectIntensity = {0.3f, 0.5f, 0.7f};

struct Observation {
  std::array<float, GridConfig::kCells> pixels{};
  float at(int row, int col) const { return pixels[row * GridConfig::kSize + col]; }
  Tensor to_tensor() const;  // shape {225}
};

struct EventSet {
  std::array<bool, 3> collected{};  // target collected this tick
  std::array<bool, 3> colliding{};  // alive object on the agent's cell after the tick
  bool collected_of(Color c) const { return collected[static_cast<size_t>(c)]; }
  bool colliding_of(Color c) const { return colliding[static_cast<size_t>(c)]; }
  bool any() const;
};

struct BfsResult {
  int distance = 0;
  Action first_step = Action::Up;  // meaningful only when distance > 0
};

// Shortest 4-connected path on the bounded grid (no wrapping). first_step is
// the first move of the lexicographically smallest shortest path under the
// action order Up < Down < Left < Right.
BfsResult bfs_distance_and_step(Cell origin, Cell goal);

// Uniform random placement on distinct cells; every enemy-role object at
// Manhattan distance >= min_enemy_spawn_distance from the agent; retried
// until the constraints hold.
WorldState reset_world(const GridConfig& cfg, uint64_t seed);

// Moves the agent one cell (coordinates wrap mod 15 for the agent only) and
// collects any alive target on the destination cell.
void agent_move(const GridConfig& cfg, WorldState& st, Action a, EventSet& ev);

// Each alive enemy advances one cell along its shortest path to the agent,
// in color order red, green, blue. Enemies may share cells.
void enemy_step(const GridConfig& cfg, WorldState& st);

Observation render(const WorldState& st);

struct StepResult {
  Observation obs;
  EventSet events;
  bool truncated = false;
};

// One environment tick: agent_move -> collection events -> enemy_step ->
// collision events -> step_count+1. truncated once step_count reaches
// max_steps.
StepResult world_step(const GridConfig& cfg, WorldState& st, Action a);

// One line per tick for the trace dump: step, agent cell, per-object
// (cell, alive, role), events.
std::string trace_line(const GridConfig& cfg, const WorldState& st, const EventSet& ev);

// Stateful convenience wrapper owning config + state; guards against
// stepping past truncation.
class GridWorld {
public:
  GridWorld(GridConfig cfg, uint64_t seed) : cfg_(cfg) { reset(seed); }

  void reset(uint64_t seed) {
    st_ = reset_world(cfg_, seed);
    truncated_ = false;
  }

  StepResult step(Action a);

  Observation render() const { return composenet::render(st_); }
  const WorldState& state() const { return st_; }
  void set_state(const WorldState& st) {
    st_ = st;
    truncated_ = st.step_count >= cfg_.max_steps;
  }
  const GridConfig& config() const { return cfg_; }
  bool truncated() const { return truncated_; }

private:
  GridConfig cfg_;
  WorldState st_;
  bool truncated_ = false;
};

}  // namespace composenet
