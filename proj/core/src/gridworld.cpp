#include "composenet/gridworld.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

constexpr int kSize = GridConfig::kSize;

struct Delta {
  int drow, dcol;
};
// Indexed by Action: Up, Down, Left, Right.
constexpr std::array<Delta, 4> kDeltas = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

int cell_index(Cell c) { return c.row * kSize + c.col; }

bool in_bounds(int row, int col) {
  return row >= 0 && row < kSize && col >= 0 && col < kSize;
}

}  // namespace

const char* to_string(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
  }
  return "?";
}

const char* to_string(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
  }
  return "?";
}

char color_letter(Color c) {
  switch (c) {
    case Color::Red: return 'r';
    case Color::Green: return 'g';
    case Color::Blue: return 'b';
  }
  return '?';
}

const char* to_string(Role r) {
  switch (r) {
    case Role::Target: return "target";
    case Role::Enemy: return "enemy";
    case Role::Bystander: return "bystander";
  }
  return "?";
}

int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

bool EventSet::any() const {
  for (int i = 0; i < 3; ++i)
    if (collected[static_cast<size_t>(i)] || colliding[static_cast<size_t>(i)]) return true;
  return false;
}

Tensor Observation::to_tensor() const {
  return Tensor({GridConfig::kCells},
                std::vector<float>(pixels.begin(), pixels.end()));
}

namespace {

// Distance field to `goal` over the bounded grid, 4-connected, no wrap.
void fill_distance_field(Cell goal, std::array<int16_t, GridConfig::kCells>& dist) {
  dist.fill(-1);
  std::array<int16_t, GridConfig::kCells> queue;
  int head = 0, tail = 0;
  dist[static_cast<size_t>(cell_index(goal))] = 0;
  queue[static_cast<size_t>(tail++)] = static_cast<int16_t>(cell_index(goal));
  while (head < tail) {
    const int idx = queue[static_cast<size_t>(head++)];
    const int row = idx / kSize, col = idx % kSize;
    const int16_t d = dist[static_cast<size_t>(idx)];
    for (const Delta& dl : kDeltas) {
      const int nr = row + dl.drow, nc = col + dl.dcol;
      if (!in_bounds(nr, nc)) continue;
      const int nidx = nr * kSize + nc;
      if (dist[static_cast<size_t>(nidx)] >= 0) continue;
      dist[static_cast<size_t>(nidx)] = static_cast<int16_t>(d + 1);
      queue[static_cast<size_t>(tail++)] = static_cast<int16_t>(nidx);
    }
  }
}

Action first_step_from_field(Cell origin, const std::array<int16_t, GridConfig::kCells>& dist) {
  const int d0 = dist[static_cast<size_t>(cell_index(origin))];
  for (int a = 0; a < kNumActions; ++a) {
    const int nr = origin.row + kDeltas[static_cast<size_t>(a)].drow;
    const int nc = origin.col + kDeltas[static_cast<size_t>(a)].dcol;
    if (!in_bounds(nr, nc)) continue;
    if (dist[static_cast<size_t>(nr * kSize + nc)] == d0 - 1) return static_cast<Action>(a);
  }
  return Action::Up;  // unreachable on a connected grid with d0 > 0
}

}  // namespace

BfsResult bfs_distance_and_step(Cell origin, Cell goal) {
  if (!in_bounds(origin.row, origin.col) || !in_bounds(goal.row, goal.col))
    throw ConfigError("bfs_distance_and_step: cell out of bounds");
  std::array<int16_t, GridConfig::kCells> dist;
  fill_distance_field(goal, dist);
  BfsResult res;
  res.distance = dist[static_cast<size_t>(cell_index(origin))];
  if (res.distance > 0) res.first_step = first_step_from_field(origin, dist);
  return res;
}

WorldState reset_world(const GridConfig& cfg, uint64_t seed) {
  WorldState st;
  st.rng = Rng(seed);
  st.step_count = 0;
  while (true) {
    std::array<Cell, 4> cells;  // agent + 3 objects
    bool distinct = true;
    for (int k = 0; k < 4; ++k) {
      cells[static_cast<size_t>(k)] = {st.rng.uniform_int(kSize), st.rng.uniform_int(kSize)};
      for (int j = 0; j < k; ++j)
        if (cells[static_cast<size_t>(j)] == cells[static_cast<size_t>(k)]) distinct = false;
    }
    if (!distinct) continue;
    bool spawn_ok = true;
    for (Color c : kColors) {
      if (cfg.role(c) == Role::Enemy &&
          manhattan(cells[0], cells[static_cast<size_t>(c) + 1]) < cfg.min_enemy_spawn_distance)
        spawn_ok = false;
    }
    if (!spawn_ok) continue;
    st.agent = cells[0];
    for (Color c : kColors)
      st.object(c) = ObjectState{cells[static_cast<size_t>(c) + 1], true};
    return st;
  }
}

void agent_move(const GridConfig& cfg, WorldState& st, Action a, EventSet& ev) {
  const Delta d = kDeltas[static_cast<size_t>(a)];
  // The agent teleports across the map: coordinates wrap mod 15.
  st.agent.row = (st.agent.row + d.drow + kSize) % kSize;
  st.agent.col = (st.agent.col + d.dcol + kSize) % kSize;
  for (Color c : kColors) {
    ObjectState& obj = st.object(c);
    if (cfg.role(c) == Role::Target && obj.alive && obj.cell == st.agent) {
      obj.alive = false;
      ev.collected[static_cast<size_t>(c)] = true;
    }
  }
}

void enemy_step(const GridConfig& cfg, WorldState& st) {
  std::array<int16_t, GridConfig::kCells> dist;
  fill_distance_field(st.agent, dist);
  for (Color c : kColors) {  // red, green, blue order
    if (cfg.role(c) != Role::Enemy) continue;
    ObjectState& obj = st.object(c);
    if (!obj.alive) continue;
    if (obj.cell == st.agent) continue;
    const Action step = first_step_from_field(obj.cell, dist);
    obj.cell.row += kDeltas[static_cast<size_t>(step)].drow;
    obj.cell.col += kDeltas[static_cast<size_t>(step)].dcol;
  }
}

Observation render(const WorldState& st) {
  Observation obs;
  // Low priority first so higher priority overwrites: blue, green, red, agent.
  for (int c = 2; c >= 0; --c) {
    const ObjectState& obj = st.objects[static_cast<size_t>(c)];
    if (!obj.alive) continue;
    obs.pixels[static_cast<size_t>(cell_index(obj.cell))] =
        kObjectIntensity[static_cast<size_t>(c)];
  }
  obs.pixels[static_cast<size_t>(cell_index(st.agent))] = kAgentIntensity;
  return obs;
}

StepResult world_step(const GridConfig& cfg, WorldState& st, Action a) {
  if (st.step_count >= cfg.max_steps)
    throw UsageError("world_step: episode already truncated");
  StepResult out;
  agent_move(cfg, st, a, out.events);
  enemy_step(cfg, st);
  for (Color c : kColors) {
    const ObjectState& obj = st.object(c);
    if (obj.alive && obj.cell == st.agent)
      out.events.colliding[static_cast<size_t>(c)] = true;
  }
  st.step_count += 1;
  out.truncated = st.step_count >= cfg.max_steps;
  out.obs = render(st);
  return out;
}

std::string trace_line(const GridConfig& cfg, const WorldState& st, const EventSet& ev) {
  std::ostringstream os;
  os << "step=" << st.step_count << " agent=(" << st.agent.row << "," << st.agent.col << ")";
  for (Color c : kColors) {
    const ObjectState& obj = st.object(c);
    os << " " << to_string(c) << "=(" << obj.cell.row << "," << obj.cell.col << ","
       << (obj.alive ? "alive" : "dead") << "," << to_string(cfg.role(c)) << ")";
  }
  os << " events=";
  bool first = true;
  for (Color c : kColors) {
    if (ev.collected_of(c)) {
      os << (first ? "" : ";") << "collected:" << color_letter(c);
      first = false;
    }
  }
  for (Color c : kColors) {
    if (ev.colliding_of(c)) {
      os << (first ? "" : ";") << "colliding:" << color_letter(c);
      first = false;
    }
  }
  if (first) os << "-";
  return os.str();
}

StepResult GridWorld::step(Action a) {
  if (truncated_) throw UsageError("GridWorld::step: episode already truncated");
  StepResult r = world_step(cfg_, st_, a);
  truncated_ = r.truncated;
  return r;
}

}  // namespace composenet
