// Copyright 2026 The Trajplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trajplan/envs/envs.h"

namespace trajplan {
namespace {

using Point = std::array<double, 2>;

double F32(double x) { return static_cast<double>(static_cast<float>(x)); }

double Distance(Point a, Point b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

Point Lerp(Point a, Point b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
}

double CellCenter(int index) {
  return (index + 0.5) / FourRooms::kGrid;
}

// Door cells and the free cells on either side of them.
struct Door {
  int col;
  int row;
  bool horizontal_passage;  // crossed by moving along x
};

constexpr Door kDoors[] = {{5, 2, true}, {5, 9, true}, {1, 5, false},
                           {8, 6, false}};

// Parameter interval {t : lo <= t <= hi} with optionally open ends.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool lo_closed = true;
  bool hi_closed = true;

  void Raise(double v, bool closed) {
    if (v > lo || (v == lo && !closed)) {
      lo = v;
      lo_closed = closed;
    }
  }
  void Lower(double v, bool closed) {
    if (v < hi || (v == hi && !closed)) {
      hi = v;
      hi_closed = closed;
    }
  }
  // Restricts to t with a <= p + t d < b; false if that set is empty.
  bool Clip(double p, double d, double a, double b) {
    if (d == 0.0) return p >= a && p < b;
    if (d > 0.0) {
      Raise((a - p) / d, true);
      Lower((b - p) / d, false);
    } else {
      Raise((b - p) / d, false);
      Lower((a - p) / d, true);
    }
    return true;
  }
  bool Empty() const { return lo > hi || (lo == hi && !(lo_closed && hi_closed)); }
};

// Largest t in [0, 1] with the segment from -> from + t (to - from) free.
double LastFreeFraction(Point from, Point to) {
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (FourRooms::SegmentFree(from, Lerp(from, to, mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace

// Wall cells merged into half-open rectangles [x0, x1) x [y0, y1). Rectangles
// on the outer edge extend past 1 so the closed boundary x = 1 (or y = 1)
// counts as wall there too.
const std::vector<FourRooms::Rect>& FourRooms::WallRects() {
  static const std::vector<Rect> rects = [] {
    auto edge = [](int i) {
      return i == kGrid ? 2.0 : static_cast<double>(i) / kGrid;
    };
    auto cells = [&](int c0, int c1, int r0, int r1) {
      return Rect{edge(c0), edge(c1 + 1), edge(r0), edge(r1 + 1)};
    };
    return std::vector<Rect>{cells(5, 5, 0, 1),  cells(5, 5, 3, 8),
                             cells(5, 5, 10, 10), cells(0, 0, 5, 5),
                             cells(2, 4, 5, 5),  cells(6, 7, 6, 6),
                             cells(9, 10, 6, 6)};
  }();
  return rects;
}

FourRooms::FourRooms(std::array<double, 2> goal) : goal_(goal) {
  if (!IsFree(goal[0], goal[1])) {
    throw std::invalid_argument("goal (" + std::to_string(goal[0]) + ", " +
                                std::to_string(goal[1]) +
                                ") is inside a wall");
  }
}

bool FourRooms::IsWallCell(int col, int row) {
  if (col == 5) return row != 2 && row != 9;
  if (row == 5 && col < 5) return col != 1;
  if (row == 6 && col > 5) return col != 8;
  return false;
}

bool FourRooms::IsFree(double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) return false;
  for (const Rect& r : WallRects()) {
    if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1) return false;
  }
  return true;
}

bool FourRooms::SegmentFree(std::array<double, 2> a, std::array<double, 2> b) {
  // the unit square is convex, so checking the endpoints suffices there
  if (!IsFree(a[0], a[1]) || !IsFree(b[0], b[1])) return false;
  for (const Rect& r : WallRects()) {
    Interval t;  // [0, 1]
    if (!t.Clip(a[0], b[0] - a[0], r.x0, r.x1) ||
        !t.Clip(a[1], b[1] - a[1], r.y0, r.y1)) {
      continue;
    }
    if (!t.Empty()) return false;
  }
  return true;
}

std::array<double, 2> FourRooms::SampleFreePoint(Rng& rng) {
  for (;;) {
    const double x = F32(rng.Uniform());
    const double y = F32(rng.Uniform());
    if (IsFree(x, y)) return {x, y};
  }
}

std::array<double, 2> FourRooms::Move(std::array<double, 2> from,
                                      std::array<double, 2> displacement) {
  const Point target = {from[0] + displacement[0], from[1] + displacement[1]};
  if (SegmentFree(from, target)) return target;
  // advance until contact, then slide the remainder along x and then y
  const double t = LastFreeFraction(from, target);
  Point p = Lerp(from, target, t);
  for (int axis = 0; axis < 2; ++axis) {
    Point slide = p;
    slide[axis] += (1.0 - t) * displacement[axis];
    p = Lerp(p, slide, LastFreeFraction(p, slide));
  }
  return p;
}

std::vector<double> FourRooms::NormalizeAction(
    std::span<const double> action) const {
  if (action.size() != 2) {
    throw std::invalid_argument("four rooms action has 2 dims, got " +
                                std::to_string(action.size()));
  }
  std::vector<double> out(2);
  for (int i = 0; i < 2; ++i) {
    if (std::isnan(action[i])) throw std::invalid_argument("NaN action");
    out[i] = F32(std::clamp(action[i], -kMaxDisplacement, kMaxDisplacement));
  }
  return out;
}

StepResult FourRooms::Step(std::span<const double> state,
                           std::span<const double> action, Rng&) const {
  if (state.size() != 2 || !IsFree(state[0], state[1])) {
    throw std::invalid_argument("four rooms state must be a free 2-d point");
  }
  const std::vector<double> a = NormalizeAction(action);
  const Point from = {state[0], state[1]};
  const Point exact = Move(from, {a[0], a[1]});
  Point to = {F32(exact[0]), F32(exact[1])};
  // rounding can cross onto a wall face; step back toward `from` one float
  // at a time, and stay put if that does not help
  for (int i = 0; i < 4 && !IsFree(to[0], to[1]); ++i) {
    for (int k = 0; k < 2; ++k) {
      if (to[k] != from[k]) {
        to[k] = std::nextafter(static_cast<float>(to[k]),
                               static_cast<float>(from[k]));
      }
    }
  }
  if (!IsFree(to[0], to[1])) to = from;
  StepResult out;
  out.state = {to[0], to[1]};
  out.done = IsTerminal(out.state);
  out.reward = out.done ? 1.0 : 0.0;
  return out;
}

bool FourRooms::IsTerminal(std::span<const double> state) const {
  return Distance({state[0], state[1]}, goal_) <= kGoalRadius;
}

std::vector<double> FourRooms::SampleStart(Rng& rng) const {
  const Point p = SampleFreePoint(rng);
  return {p[0], p[1]};
}

std::vector<double> FourRooms::SampleRandomAction(Rng& rng) const {
  return {F32(rng.Uniform(-kMaxDisplacement, kMaxDisplacement)),
          F32(rng.Uniform(-kMaxDisplacement, kMaxDisplacement))};
}

nlohmann::json FourRooms::Describe() const {
  nlohmann::json doors = nlohmann::json::array();
  for (const Door& d : kDoors) doors.push_back({d.col, d.row});
  return {{"id", id()},
          {"grid", kGrid},
          {"max_displacement", kMaxDisplacement},
          {"goal_radius", kGoalRadius},
          {"max_steps", kMaxSteps},
          {"walls", "col 5; row 5 cols 0-4; row 6 cols 6-10"},
          {"doors", doors},
          {"goal", {goal_[0], goal_[1]}}};
}

std::vector<std::array<double, 2>> FourRoomsPath(std::array<double, 2> from,
                                                 std::array<double, 2> to) {
  if (!FourRooms::IsFree(from[0], from[1]) || !FourRooms::IsFree(to[0], to[1])) {
    throw std::runtime_error("path endpoints must lie in free space");
  }
  std::vector<Point> nodes = {from, to};
  for (const Door& d : kDoors) {
    const double cx = CellCenter(d.col);
    const double cy = CellCenter(d.row);
    const double dx = d.horizontal_passage ? 1.0 / FourRooms::kGrid : 0.0;
    const double dy = d.horizontal_passage ? 0.0 : 1.0 / FourRooms::kGrid;
    nodes.push_back({cx - dx, cy - dy});
    nodes.push_back({cx, cy});
    nodes.push_back({cx + dx, cy + dy});
  }
  const size_t n = nodes.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<bool> done(n, false);
  dist[0] = 0.0;
  for (size_t iter = 0; iter < n; ++iter) {
    int u = -1;
    for (size_t i = 0; i < n; ++i) {
      if (!done[i] && (u < 0 || dist[i] < dist[u])) u = static_cast<int>(i);
    }
    if (u < 0 || std::isinf(dist[u])) break;
    done[u] = true;
    if (u == 1) break;
    for (size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      const double w = Distance(nodes[u], nodes[v]);
      if (dist[u] + w < dist[v] && FourRooms::SegmentFree(nodes[u], nodes[v])) {
        dist[v] = dist[u] + w;
        parent[v] = u;
      }
    }
  }
  if (std::isinf(dist[1])) throw std::runtime_error("goal is unreachable");
  std::vector<Point> path;
  for (int v = 1; v >= 0; v = parent[v]) path.push_back(nodes[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace trajplan
