#include "egomind/route.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace egomind::route {

namespace {

// 0 = +x, 1 = +y, 2 = -x, 3 = -y; +1 is a left (counter-clockwise) turn.
constexpr std::array<int, 4> kDx = {1, 0, -1, 0};
constexpr std::array<int, 4> kDy = {0, 1, 0, -1};

enum class Action { Forward, TurnLeft, TurnRight, TurnAround };

int snap_direction(Point from, Point to) {
  double dx = to.x - from.x;
  double dy = to.y - from.y;
  if (std::abs(dx) >= std::abs(dy)) return dx >= 0 ? 0 : 2;
  return dy >= 0 ? 1 : 3;
}

}  // namespace

bool Footprint::contains(Point p) const {
  return std::abs(p.x - x) < width / 2 && std::abs(p.y - y) < depth / 2;
}

std::optional<std::vector<std::string>> plan_route(const RouteRequest& req) {
  const int cols = std::max(1, static_cast<int>(std::floor(req.room_width / req.cell)));
  const int rows = std::max(1, static_cast<int>(std::floor(req.room_depth / req.cell)));
  auto cell_of = [&](Point p) {
    int cx = std::clamp(static_cast<int>(std::floor(p.x / req.cell)), 0, cols - 1);
    int cy = std::clamp(static_cast<int>(std::floor(p.y / req.cell)), 0, rows - 1);
    return cy * cols + cx;
  };

  std::vector<char> blocked(static_cast<std::size_t>(cols * rows), 0);
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) {
      Point centre{(cx + 0.5) * req.cell, (cy + 0.5) * req.cell};
      for (const auto& fp : req.obstacles) {
        if (fp.contains(centre)) {
          blocked[static_cast<std::size_t>(cy * cols + cx)] = 1;
          break;
        }
      }
    }
  }
  const int start = cell_of(req.start);
  const int goal = cell_of(req.goal);
  blocked[static_cast<std::size_t>(start)] = 0;
  blocked[static_cast<std::size_t>(goal)] = 0;

  // Dijkstra over (cell, direction) with lexicographic (steps, turns) cost.
  using Cost = std::pair<int, int>;
  constexpr Cost kInf{std::numeric_limits<int>::max(), 0};
  const std::size_t n_states = static_cast<std::size_t>(cols * rows * 4);
  std::vector<Cost> best(n_states, kInf);
  std::vector<int> parent(n_states, -1);
  std::vector<Action> via(n_states, Action::Forward);

  using Entry = std::tuple<int, int, int>;  // steps, turns, state
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int start_state = start * 4 + snap_direction(req.start, req.facing);
  best[static_cast<std::size_t>(start_state)] = {0, 0};
  open.emplace(0, 0, start_state);

  while (!open.empty()) {
    auto [steps, turns, state] = open.top();
    open.pop();
    if (Cost{steps, turns} != best[static_cast<std::size_t>(state)]) continue;
    const int cell = state / 4;
    const int dir = state % 4;

    auto relax = [&](int next, Cost c, Action a) {
      auto& b = best[static_cast<std::size_t>(next)];
      if (c < b) {
        b = c;
        parent[static_cast<std::size_t>(next)] = state;
        via[static_cast<std::size_t>(next)] = a;
        open.emplace(c.first, c.second, next);
      }
    };

    int cx = cell % cols + kDx[static_cast<std::size_t>(dir)];
    int cy = cell / cols + kDy[static_cast<std::size_t>(dir)];
    if (cx >= 0 && cx < cols && cy >= 0 && cy < rows &&
        !blocked[static_cast<std::size_t>(cy * cols + cx)]) {
      relax((cy * cols + cx) * 4 + dir, {steps + 1, turns}, Action::Forward);
    }
    relax(cell * 4 + (dir + 1) % 4, {steps, turns + 1}, Action::TurnLeft);
    relax(cell * 4 + (dir + 3) % 4, {steps, turns + 1}, Action::TurnRight);
    relax(cell * 4 + (dir + 2) % 4, {steps, turns + 1}, Action::TurnAround);
  }

  int end = -1;
  for (int d = 0; d < 4; ++d) {
    int s = goal * 4 + d;
    if (best[static_cast<std::size_t>(s)] == kInf) continue;
    if (end < 0 || best[static_cast<std::size_t>(s)] < best[static_cast<std::size_t>(end)]) end = s;
  }
  if (end < 0) return std::nullopt;

  std::vector<Action> actions;
  for (int s = end; s != start_state; s = parent[static_cast<std::size_t>(s)]) {
    actions.push_back(via[static_cast<std::size_t>(s)]);
  }
  std::reverse(actions.begin(), actions.end());

  std::vector<std::string> out;
  for (Action a : actions) {
    switch (a) {
      case Action::Forward:
        if (out.empty() || out.back() != "go straight") out.emplace_back("go straight");
        break;
      case Action::TurnLeft: out.emplace_back("turn left"); break;
      case Action::TurnRight: out.emplace_back("turn right"); break;
      case Action::TurnAround: out.emplace_back("turn around"); break;
    }
  }
  return out;
}

std::string join_actions(const std::vector<std::string>& actions) {
  if (actions.empty()) return "stay";
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += ", ";
    out += actions[i];
  }
  return out;
}

}  // namespace egomind::route
