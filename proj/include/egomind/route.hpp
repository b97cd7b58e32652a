#pragma once

#include <optional>
#include <string>
#include <vector>

namespace egomind::route {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned footprint, centre plus full extents.
struct Footprint {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double depth = 0.0;

  bool contains(Point p) const;
};

struct RouteRequest {
  double room_width = 0.0;
  double room_depth = 0.0;
  double cell = 0.5;
  std::vector<Footprint> obstacles;
  Point start;
  Point facing;  // initial heading points from start towards here
  Point goal;
};

// Turn-by-turn plan on a 4-connected occupancy grid. Cells whose centre lies
// inside an obstacle are blocked; the start and goal cells are always free.
// The plan minimises grid steps first and turns second. Returns actions such as
// {"turn left", "go straight", "turn right", "go straight"}, or nullopt if the
// goal cannot be reached.
std::optional<std::vector<std::string>> plan_route(const RouteRequest& request);

std::string join_actions(const std::vector<std::string>& actions);

}  // namespace egomind::route
