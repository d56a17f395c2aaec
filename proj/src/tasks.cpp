// SPDX-License-Identifier: Apache-2.0
#include "robopilot/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <regex>
#include <set>

namespace robopilot {

namespace {

using Point = std::array<double, 2>;

// Goal points keep this distance from every object so placements never
// collide, even once other blocks have been moved onto their own goals.
constexpr double kGoalClearance = 0.07;
// Comparisons an instruction hinges on (nearest, left-of, ...) must differ by
// at least this much, so observations rounded to the millimetre agree.
constexpr double kComparisonMargin = 0.005;
constexpr double kLineSpacing = 0.08;
constexpr double kCorner = 0.21;
constexpr double kGoalRegion = 0.20;
constexpr double kHalfInner = 0.06;

const char* const kColorRe = "([a-z]+)";
const char* const kNumRe = "(-?\\d+\\.\\d+)";

std::string point_text(const Point& p) { return fmt::format("({:.2f}, {:.2f})", p[0], p[1]); }

double to_num(const std::string& s) {
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += sep;
    }
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.push_back(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) {
      break;
    }
    pos = next + sep.size();
  }
  return out;
}

std::vector<const ObservedObject*> objects_of(const Observation& obs, ObjectKind kind) {
  std::vector<const ObservedObject*> out;
  for (const auto& o : obs.objects) {
    if (o.kind == kind) {
      out.push_back(&o);
    }
  }
  return out;
}

std::vector<std::string> colors_of(const Observation& obs, ObjectKind kind) {
  std::vector<std::string> out;
  for (const auto* o : objects_of(obs, kind)) {
    out.push_back(o->color);
  }
  return out;
}

const ObservedObject* find_obj(const Observation& obs, ObjectKind kind, const std::string& color) {
  for (const auto& o : obs.objects) {
    if (o.kind == kind && o.color == color) {
      return &o;
    }
  }
  return nullptr;
}

template <typename T>
void shuffle(std::vector<T>& v, SceneRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

template <typename T>
const T& pick(const std::vector<T>& v, SceneRng& rng) {
  return v[rng.below(v.size())];
}

Vec3 table_pose(const Point& p) { return Vec3{p[0], p[1], kTableBlockZ}; }

bool point_free(const Observation& obs, const Point& p, const std::vector<Point>& taken = {},
                const std::optional<ObjectId>& exclude = std::nullopt) {
  const Vec3 q = table_pose(p);
  for (const auto& o : obs.objects) {
    if (exclude && o.id == *exclude) {
      continue;
    }
    if (horizontal_distance(o.pose, q) < kGoalClearance) {
      return false;
    }
  }
  return std::all_of(taken.begin(), taken.end(), [&](const Point& t) { return std::hypot(t[0] - p[0], t[1] - p[1]) >= kGoalClearance; });
}

// Grid points (1 cm) inside the rectangle, in a deterministic order.
std::vector<Point> grid(double xlo, double xhi, double ylo, double yhi) {
  std::vector<Point> out;
  for (int i = static_cast<int>(std::lround(xlo * 100)); i <= static_cast<int>(std::lround(xhi * 100)); ++i) {
    for (int j = static_cast<int>(std::lround(ylo * 100)); j <= static_cast<int>(std::lround(yhi * 100)); ++j) {
      out.push_back(Point{i / 100.0, j / 100.0});
    }
  }
  return out;
}

// Picks `count` free grid points in the rectangle, mutually separated.
std::optional<std::vector<Point>> free_points(const Observation& obs, std::size_t count, SceneRng& rng, double xlo = -kGoalRegion,
                                              double xhi = kGoalRegion, double ylo = -kGoalRegion, double yhi = kGoalRegion) {
  auto candidates = grid(xlo, xhi, ylo, yhi);
  shuffle(candidates, rng);
  std::vector<Point> chosen;
  for (const auto& c : candidates) {
    if (chosen.size() == count) {
      break;
    }
    if (point_free(obs, c, chosen)) {
      chosen.push_back(c);
    }
  }
  if (chosen.size() < count) {
    return std::nullopt;
  }
  return chosen;
}

Interpretation infeasible(std::string reason) {
  Interpretation out;
  out.feasible = false;
  out.infeasible_reason = std::move(reason);
  return out;
}

struct Ref {
  ObjectKind kind;
  std::string color;
};

// First referenced object missing from the observation, as a reason string.
std::optional<std::string> missing(const Observation& obs, const std::vector<Ref>& refs) {
  for (const auto& r : refs) {
    if (find_obj(obs, r.kind, r.color) == nullptr) {
      return fmt::format("the scene has no {} {}", r.color, to_string(r.kind));
    }
  }
  return std::nullopt;
}

Move into_bowl(const Observation& obs, const std::string& block, const std::string& bowl) {
  const auto* b = find_obj(obs, ObjectKind::Bowl, bowl);
  return Move{block_id(block), b->id, Vec3{b->pose.x, b->pose.y, kBowlInteriorZ}};
}

Move onto(const std::string& block, const std::string& base) { return Move{block_id(block), block_id(base), Vec3{}}; }

Move to_point(const std::string& block, const Point& p) { return Move{block_id(block), std::nullopt, table_pose(p)}; }

Interpretation with_moves(const Observation& obs, std::vector<Move> moves, std::string calculation = "") {
  Interpretation out;
  out.moves = std::move(moves);
  out.goal = goal_from_moves(out.moves, obs);
  if (calculation.empty()) {
    for (const auto& m : out.moves) {
      if (!m.base) {
        calculation += fmt::format("target of {} = ({:.3f}, {:.3f}, {:.3f})\n", m.object.str(), m.position.x, m.position.y, m.position.z);
      }
    }
  }
  out.calculation = calculation.empty() ? "No calculation required." : calculation;
  while (!out.calculation.empty() && out.calculation.back() == '\n') {
    out.calculation.pop_back();
  }
  return out;
}

std::optional<std::smatch> match(const std::regex& re, const std::string& text) {
  std::smatch m;
  if (std::regex_match(text, m, re)) {
    return m;
  }
  return std::nullopt;
}

double dist_to(const Observation& obs, const std::string& block, const std::string& bowl) {
  return distance(find_obj(obs, ObjectKind::Block, block)->pose, find_obj(obs, ObjectKind::Bowl, bowl)->pose);
}

// Blocks sorted by distance to the bowl (stable on observation order).
std::vector<std::pair<double, std::string>> ranked_blocks(const Observation& obs, const std::string& bowl) {
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto* b : objects_of(obs, ObjectKind::Block)) {
    ranked.emplace_back(dist_to(obs, b->color, bowl), b->color);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return ranked;
}

std::string distance_table(const std::vector<std::pair<double, std::string>>& ranked, const std::string& bowl) {
  std::string out;
  for (const auto& [d, c] : ranked) {
    out += fmt::format("distance({}, {}) = {:.3f} m\n", block_id(c).str(), bowl_id(bowl).str(), d);
  }
  return out;
}

const std::vector<std::string>& ordinals() {
  static const std::vector<std::string> words = {"", "first", "second", "third", "fourth"};
  return words;
}

// Corner names and their coordinates; "top" is +y, "left" is -x.
const std::vector<std::pair<std::string, Point>>& corners() {
  static const std::vector<std::pair<std::string, Point>> c = {
      {"top-left", {-kCorner, kCorner}},
      {"top-right", {kCorner, kCorner}},
      {"bottom-left", {-kCorner, -kCorner}},
      {"bottom-right", {kCorner, -kCorner}},
  };
  return c;
}

std::optional<Point> corner_point(const std::string& name) {
  for (const auto& [n, p] : corners()) {
    if (n == name) {
      return p;
    }
  }
  return std::nullopt;
}

std::string corner_name(const Point& p) {
  for (const auto& [n, c] : corners()) {
    if (c == p) {
      return n;
    }
  }
  return "?";
}

std::vector<Ref> block_refs(const std::vector<std::string>& colors) {
  std::vector<Ref> refs;
  for (const auto& c : colors) {
    refs.push_back({ObjectKind::Block, c});
  }
  return refs;
}

// Catalog entries ----------------------------------------------------------

TaskDef sm_block_in_bowl() {
  TaskDef d;
  d.id = "sm_block_in_bowl";
  d.group = TaskGroup::SM;
  d.labeled_difficulty = 1.0;
  d.summary = "Put one block into a named bowl.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = {pick(colors_of(obs, ObjectKind::Block), rng), pick(colors_of(obs, ObjectKind::Bowl), rng)};
    return p;
  };
  d.render = [](const TaskParams& p) { return fmt::format("Put the {} block in the {} bowl.", p.colors[0], p.colors[1]); };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Put the {} block in the {} bowl\\.$", kColorRe, kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, {{ObjectKind::Block, p.colors[0]}, {ObjectKind::Bowl, p.colors[1]}})) {
      return infeasible(*why);
    }
    return with_moves(obs, {into_bowl(obs, p.colors[0], p.colors[1])});
  };
  return d;
}

TaskDef sm_block_to_position() {
  TaskDef d;
  d.id = "sm_block_to_position";
  d.group = TaskGroup::SM;
  d.labeled_difficulty = 1.5;
  d.summary = "Move one block to given table coordinates.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = {pick(colors_of(obs, ObjectKind::Block), rng)};
    const auto pts = free_points(obs, 1, rng);
    if (!pts) {
      return std::nullopt;
    }
    p.points = *pts;
    return p;
  };
  d.render = [](const TaskParams& p) { return fmt::format("Move the {} block to {}.", p.colors[0], point_text(p.points[0])); };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Move the {} block to \\({}, {}\\)\\.$", kColorRe, kNumRe, kNumRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1]};
    p.points = {Point{to_num((*m)[2]), to_num((*m)[3])}};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    return with_moves(obs, {to_point(p.colors[0], p.points[0])});
  };
  return d;
}

TaskDef sa_line() {
  TaskDef d;
  d.id = "sa_line";
  d.group = TaskGroup::SA;
  d.labeled_difficulty = 2.0;
  d.summary = "Arrange all blocks in a line with fixed spacing.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    const double span = kLineSpacing * static_cast<double>(p.colors.size() - 1);
    std::vector<std::pair<Point, int>> valid;
    for (int axis = 0; axis < 2; ++axis) {
      for (const auto& start : grid(-kGoalRegion, kGoalRegion, -kGoalRegion, kGoalRegion)) {
        std::vector<Point> pts;
        bool ok = true;
        for (std::size_t i = 0; i < p.colors.size() && ok; ++i) {
          Point q = start;
          q[static_cast<std::size_t>(axis)] += kLineSpacing * static_cast<double>(i);
          ok = q[static_cast<std::size_t>(axis)] <= kGoalRegion + 1e-9 && point_free(obs, q);
          pts.push_back(q);
        }
        if (ok && start[static_cast<std::size_t>(axis)] + span <= kGoalRegion + 1e-9) {
          valid.emplace_back(start, axis);
        }
      }
    }
    if (valid.empty()) {
      return std::nullopt;
    }
    const auto& [start, axis] = pick(valid, rng);
    p.points = {start};
    p.variant = axis;
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Arrange all the blocks in a line starting at {} along the {} axis, 0.08 m apart, in this order: {}.",
                       point_text(p.points[0]), p.variant == 0 ? "x" : "y", join(p.colors, ", "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format(
        "^Arrange all the blocks in a line starting at \\({}, {}\\) along the (x|y) axis, 0\\.08 m apart, in this order: ([a-z, ]+)\\.$",
        kNumRe, kNumRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.points = {Point{to_num((*m)[1]), to_num((*m)[2])}};
    p.variant = (*m)[3] == "x" ? 0 : 1;
    p.colors = split((*m)[4], ", ");
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      // Recompute from integer centimetres so parsed and sampled lines agree bit for bit.
      Point q = p.points[0];
      const auto axis = static_cast<std::size_t>(p.variant);
      q[axis] = static_cast<double>(std::lround(q[axis] * 100) + 8 * static_cast<long>(i)) / 100.0;
      moves.push_back(to_point(p.colors[i], q));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef sa_corners() {
  TaskDef d;
  d.id = "sa_corners";
  d.group = TaskGroup::SA;
  d.labeled_difficulty = 2.5;
  d.summary = "Place blocks into named table corners.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    std::vector<Point> free;
    for (const auto& [name, pt] : corners()) {
      if (point_free(obs, pt)) {
        free.push_back(pt);
      }
    }
    if (free.empty()) {
      return std::nullopt;
    }
    shuffle(free, rng);
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    const auto k = std::min(free.size(), p.colors.size());
    p.colors.resize(k);
    free.resize(k);
    p.points = free;
    return p;
  };
  d.render = [](const TaskParams& p) {
    std::vector<std::string> clauses;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      clauses.push_back(fmt::format("the {} block in the {} corner", p.colors[i], corner_name(p.points[i])));
    }
    return fmt::format("Place blocks in the corners of the table: {}.", join(clauses, ", "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re("^Place blocks in the corners of the table: (.+)\\.$");
    static const std::regex clause_re(fmt::format("^the {} block in the (top-left|top-right|bottom-left|bottom-right) corner$", kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    for (const auto& clause : split((*m)[1], ", ")) {
      const auto c = match(clause_re, clause);
      if (!c) {
        return std::nullopt;
      }
      p.colors.push_back((*c)[1]);
      p.points.push_back(*corner_point((*c)[2]));
    }
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      moves.push_back(to_point(p.colors[i], p.points[i]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef sa_halves() {
  TaskDef d;
  d.id = "sa_halves";
  d.group = TaskGroup::SA;
  d.labeled_difficulty = 2.5;
  d.summary = "Move the blocks of one table half to the other half at given spots.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    std::vector<std::string> left;
    std::vector<std::string> right;
    for (const auto* b : objects_of(obs, ObjectKind::Block)) {
      (b->pose.x < 0 ? left : right).push_back(b->color);
    }
    p.variant = left.empty() ? 1 : 0;
    p.colors = p.variant == 0 ? left : right;
    const auto pts = p.variant == 0 ? free_points(obs, p.colors.size(), rng, kHalfInner, kGoalRegion)
                                    : free_points(obs, p.colors.size(), rng, -kGoalRegion, -kHalfInner);
    if (!pts) {
      return std::nullopt;
    }
    p.points = *pts;
    return p;
  };
  d.render = [](const TaskParams& p) {
    std::vector<std::string> clauses;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      clauses.push_back(fmt::format("the {} block to {}", p.colors[i], point_text(p.points[i])));
    }
    return fmt::format("Move every block on the {} half of the table to the {} half: {}.", p.variant == 0 ? "left" : "right",
                       p.variant == 0 ? "right" : "left", join(clauses, "; "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re("^Move every block on the (left|right) half of the table to the (left|right) half: (.+)\\.$");
    static const std::regex clause_re(fmt::format("^the {} block to \\({}, {}\\)$", kColorRe, kNumRe, kNumRe));
    const auto m = match(re, text);
    if (!m || (*m)[1] == (*m)[2]) {
      return std::nullopt;
    }
    TaskParams p;
    p.variant = (*m)[1] == "left" ? 0 : 1;
    for (const auto& clause : split((*m)[3], "; ")) {
      const auto c = match(clause_re, clause);
      if (!c) {
        return std::nullopt;
      }
      p.colors.push_back((*c)[1]);
      p.points.push_back(Point{to_num((*c)[2]), to_num((*c)[3])});
    }
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      moves.push_back(to_point(p.colors[i], p.points[i]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef ss_stack_all() {
  TaskDef d;
  d.id = "ss_stack_all";
  d.group = TaskGroup::SS;
  d.labeled_difficulty = 3.0;
  d.summary = "Stack every other block on a named base block in a given order.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    return p;
  };
  d.render = [](const TaskParams& p) {
    const std::vector<std::string> rest(p.colors.begin() + 1, p.colors.end());
    return fmt::format("Stack all the other blocks on top of the {} block, from the bottom up: {}.", p.colors[0], join(rest, ", "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Stack all the other blocks on top of the {} block, from the bottom up: ([a-z, ]+)\\.$", kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1]};
    for (auto& c : split((*m)[2], ", ")) {
      p.colors.push_back(std::move(c));
    }
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves;
    for (std::size_t i = 1; i < p.colors.size(); ++i) {
      moves.push_back(onto(p.colors[i], p.colors[i - 1]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef ss_color_order() {
  TaskDef d;
  d.id = "ss_color_order";
  d.group = TaskGroup::SS;
  d.labeled_difficulty = 3.5;
  d.summary = "Stack all blocks in palette order on the first one.";
  d.sample = [](const Observation&, SceneRng&) -> std::optional<TaskParams> { return TaskParams{}; };
  d.render = [](const TaskParams&) {
    return fmt::format(
        "Stack all the blocks into one tower in rainbow order ({}), with the earliest color at the bottom and the bottom block left "
        "where it is.",
        join(palette(), ", "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::string expected = [] {
      return fmt::format(
          "Stack all the blocks into one tower in rainbow order ({}), with the earliest color at the bottom and the bottom block "
          "left where it is.",
          join(palette(), ", "));
    }();
    if (text != expected) {
      return std::nullopt;
    }
    return TaskParams{};
  };
  d.resolve = [](const TaskParams&, const Observation& obs) {
    auto colors = colors_of(obs, ObjectKind::Block);
    std::sort(colors.begin(), colors.end(), [](const auto& a, const auto& b) { return palette_index(a) < palette_index(b); });
    std::vector<Move> moves;
    for (std::size_t i = 1; i < colors.size(); ++i) {
      moves.push_back(onto(colors[i], colors[i - 1]));
    }
    return with_moves(obs, std::move(moves), fmt::format("rainbow order of present blocks: {}", join(colors, ", ")));
  };
  return d;
}

Interpretation match_same_color(const Observation& obs) {
  std::vector<Move> moves;
  for (const auto* b : objects_of(obs, ObjectKind::Block)) {
    if (find_obj(obs, ObjectKind::Bowl, b->color) != nullptr) {
      moves.push_back(into_bowl(obs, b->color, b->color));
    }
  }
  return with_moves(obs, std::move(moves));
}

TaskDef pm_matching() {
  TaskDef d;
  d.id = "pm_matching";
  d.group = TaskGroup::PM;
  d.labeled_difficulty = 1.5;
  d.summary = "Put every block into the bowl of its own color.";
  d.sample = [](const Observation&, SceneRng&) -> std::optional<TaskParams> { return TaskParams{}; };
  d.render = [](const TaskParams&) { return std::string("Put each block in the bowl of the same color."); };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    if (text != "Put each block in the bowl of the same color.") {
      return std::nullopt;
    }
    return TaskParams{};
  };
  d.resolve = [](const TaskParams&, const Observation& obs) { return match_same_color(obs); };
  return d;
}

TaskDef pm_cross() {
  TaskDef d;
  d.id = "pm_cross";
  d.group = TaskGroup::PM;
  d.labeled_difficulty = 2.0;
  d.summary = "Put every block into the bowl of the next color in a cycle.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Put each block in the bowl of the next color in this cycle: {} -> {}.", join(p.colors, " -> "), p.colors.front());
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re("^Put each block in the bowl of the next color in this cycle: ([a-z >-]+)\\.$");
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    auto colors = split((*m)[1], " -> ");
    if (colors.size() < 3 || colors.front() != colors.back()) {
      return std::nullopt;
    }
    colors.pop_back();
    TaskParams p;
    p.colors = std::move(colors);
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    std::vector<Ref> refs = block_refs(p.colors);
    for (const auto& c : p.colors) {
      refs.push_back({ObjectKind::Bowl, c});
    }
    if (auto why = missing(obs, refs)) {
      return infeasible(*why);
    }
    std::vector<Move> moves;
    for (std::size_t i = 0; i < p.colors.size(); ++i) {
      moves.push_back(into_bowl(obs, p.colors[i], p.colors[(i + 1) % p.colors.size()]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef pm_named() {
  TaskDef d;
  d.id = "pm_named";
  d.group = TaskGroup::PM;
  d.labeled_difficulty = 2.0;
  d.summary = "Put two named blocks into two named bowls.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    auto blocks = colors_of(obs, ObjectKind::Block);
    auto bowls = colors_of(obs, ObjectKind::Bowl);
    shuffle(blocks, rng);
    shuffle(bowls, rng);
    TaskParams p;
    p.colors = {blocks[0], bowls[0], blocks[1], bowls[1]};
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Put the {} block in the {} bowl and the {} block in the {} bowl.", p.colors[0], p.colors[1], p.colors[2],
                       p.colors[3]);
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(
        fmt::format("^Put the {} block in the {} bowl and the {} block in the {} bowl\\.$", kColorRe, kColorRe, kColorRe, kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2], (*m)[3], (*m)[4]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, {{ObjectKind::Block, p.colors[0]},
                                 {ObjectKind::Bowl, p.colors[1]},
                                 {ObjectKind::Block, p.colors[2]},
                                 {ObjectKind::Bowl, p.colors[3]}})) {
      return infeasible(*why);
    }
    return with_moves(obs, {into_bowl(obs, p.colors[0], p.colors[1]), into_bowl(obs, p.colors[2], p.colors[3])});
  };
  return d;
}

TaskDef sr_closest() {
  TaskDef d;
  d.id = "sr_closest";
  d.group = TaskGroup::SR;
  d.labeled_difficulty = 4.0;
  d.summary = "Put the block closest to a bowl into that bowl.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    auto bowls = colors_of(obs, ObjectKind::Bowl);
    shuffle(bowls, rng);
    for (const auto& w : bowls) {
      const auto ranked = ranked_blocks(obs, w);
      if (ranked[1].first - ranked[0].first >= kComparisonMargin) {
        TaskParams p;
        p.colors = {w};
        return p;
      }
    }
    return std::nullopt;
  };
  d.render = [](const TaskParams& p) { return fmt::format("Put the block closest to the {} bowl into that bowl.", p.colors[0]); };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Put the block closest to the {} bowl into that bowl\\.$", kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, {{ObjectKind::Bowl, p.colors[0]}})) {
      return infeasible(*why);
    }
    const auto ranked = ranked_blocks(obs, p.colors[0]);
    if (ranked.empty()) {
      return infeasible("the scene has no blocks");
    }
    return with_moves(obs, {into_bowl(obs, ranked[0].second, p.colors[0])},
                      distance_table(ranked, p.colors[0]) + fmt::format("closest: {}", block_id(ranked[0].second).str()));
  };
  return d;
}

TaskDef sr_midpoint() {
  TaskDef d;
  d.id = "sr_midpoint";
  d.group = TaskGroup::SR;
  d.labeled_difficulty = 4.0;
  d.summary = "Move a block to the midpoint between two other objects.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    struct Choice {
      const ObservedObject* moved;
      const ObservedObject* a;
      const ObservedObject* b;
    };
    std::vector<Choice> valid;
    for (const auto* m : objects_of(obs, ObjectKind::Block)) {
      for (const auto& a : obs.objects) {
        for (const auto& b : obs.objects) {
          if (&a == m || &b == m || &a >= &b) {
            continue;
          }
          const Point mid{(a.pose.x + b.pose.x) / 2.0, (a.pose.y + b.pose.y) / 2.0};
          if (std::abs(mid[0]) <= kGoalRegion && std::abs(mid[1]) <= kGoalRegion && point_free(obs, mid, {}, m->id)) {
            valid.push_back({m, &a, &b});
          }
        }
      }
    }
    if (valid.empty()) {
      return std::nullopt;
    }
    auto c = pick(valid, rng);
    if (rng.below(2) == 1) {
      std::swap(c.a, c.b);
    }
    TaskParams p;
    p.colors = {c.moved->color, c.a->color, c.b->color};
    p.variant = (c.a->kind == ObjectKind::Bowl ? 1 : 0) | (c.b->kind == ObjectKind::Bowl ? 2 : 0);
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Move the {} block to the midpoint between the {} {} and the {} {}.", p.colors[0], p.colors[1],
                       (p.variant & 1) != 0 ? "bowl" : "block", p.colors[2], (p.variant & 2) != 0 ? "bowl" : "block");
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Move the {} block to the midpoint between the {} (block|bowl) and the {} (block|bowl)\\.$",
                                           kColorRe, kColorRe, kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2], (*m)[4]};
    p.variant = ((*m)[3] == "bowl" ? 1 : 0) | ((*m)[5] == "bowl" ? 2 : 0);
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    const ObjectKind ka = (p.variant & 1) != 0 ? ObjectKind::Bowl : ObjectKind::Block;
    const ObjectKind kb = (p.variant & 2) != 0 ? ObjectKind::Bowl : ObjectKind::Block;
    if (auto why = missing(obs, {{ObjectKind::Block, p.colors[0]}, {ka, p.colors[1]}, {kb, p.colors[2]}})) {
      return infeasible(*why);
    }
    const auto* a = find_obj(obs, ka, p.colors[1]);
    const auto* b = find_obj(obs, kb, p.colors[2]);
    const Point mid{(a->pose.x + b->pose.x) / 2.0, (a->pose.y + b->pose.y) / 2.0};
    return with_moves(obs, {to_point(p.colors[0], mid)},
                      fmt::format("{} at ({:.3f}, {:.3f}), {} at ({:.3f}, {:.3f})\nmidpoint = ({:.3f}, {:.3f})", a->id.str(), a->pose.x,
                                  a->pose.y, b->id.str(), b->pose.x, b->pose.y, mid[0], mid[1]));
  };
  return d;
}

TaskDef sr_kth() {
  TaskDef d;
  d.id = "sr_kth_nearest";
  d.group = TaskGroup::SR;
  d.labeled_difficulty = 4.5;
  d.summary = "Put the k-th nearest block to a bowl into that bowl.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    std::vector<TaskParams> valid;
    for (const auto& w : colors_of(obs, ObjectKind::Bowl)) {
      const auto ranked = ranked_blocks(obs, w);
      for (std::size_t k = 2; k <= ranked.size(); ++k) {
        const bool below = ranked[k - 1].first - ranked[k - 2].first >= kComparisonMargin;
        const bool above = k == ranked.size() || ranked[k].first - ranked[k - 1].first >= kComparisonMargin;
        if (below && above) {
          TaskParams p;
          p.colors = {w};
          p.k = static_cast<int>(k);
          valid.push_back(p);
        }
      }
    }
    if (valid.empty()) {
      return std::nullopt;
    }
    return pick(valid, rng);
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Put the {} closest block to the {} bowl into that bowl.", ordinals()[static_cast<std::size_t>(p.k)], p.colors[0]);
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Put the (second|third|fourth) closest block to the {} bowl into that bowl\\.$", kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[2]};
    const auto& words = ordinals();
    p.k = static_cast<int>(std::find(words.begin(), words.end(), (*m)[1].str()) - words.begin());
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, {{ObjectKind::Bowl, p.colors[0]}})) {
      return infeasible(*why);
    }
    const auto ranked = ranked_blocks(obs, p.colors[0]);
    if (static_cast<int>(ranked.size()) < p.k) {
      return infeasible(fmt::format("the scene has fewer than {} blocks", p.k));
    }
    const auto& chosen = ranked[static_cast<std::size_t>(p.k - 1)].second;
    return with_moves(obs, {into_bowl(obs, chosen, p.colors[0])},
                      distance_table(ranked, p.colors[0]) + fmt::format("rank {}: {}", p.k, block_id(chosen).str()));
  };
  return d;
}

TaskDef cr_if_else() {
  TaskDef d;
  d.id = "cr_if_else";
  d.group = TaskGroup::CR;
  d.labeled_difficulty = 4.0;
  d.summary = "Branch on which of two blocks is closer to a bowl.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    std::vector<TaskParams> valid;
    const auto blocks = colors_of(obs, ObjectKind::Block);
    for (const auto& a : blocks) {
      for (const auto& b : blocks) {
        for (const auto& w : colors_of(obs, ObjectKind::Bowl)) {
          if (a != b && std::abs(dist_to(obs, a, w) - dist_to(obs, b, w)) >= kComparisonMargin) {
            TaskParams p;
            p.colors = {a, w, b};
            valid.push_back(p);
          }
        }
      }
    }
    if (valid.empty()) {
      return std::nullopt;
    }
    return pick(valid, rng);
  };
  d.render = [](const TaskParams& p) {
    const auto& [a, w, b] = std::tie(p.colors[0], p.colors[1], p.colors[2]);
    return fmt::format(
        "If the {0} block is closer to the {1} bowl than the {2} block is, put the {0} block in the {1} bowl; otherwise put the {2} "
        "block in the {1} bowl.",
        a, w, b);
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(
        "^If the ([a-z]+) block is closer to the ([a-z]+) bowl than the ([a-z]+) block is, put the \\1 block in the \\2 bowl; "
        "otherwise put the \\3 block in the \\2 bowl\\.$");
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2], (*m)[3]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    const auto& [a, w, b] = std::tie(p.colors[0], p.colors[1], p.colors[2]);
    if (auto why = missing(obs, {{ObjectKind::Block, a}, {ObjectKind::Bowl, w}, {ObjectKind::Block, b}})) {
      return infeasible(*why);
    }
    const double da = dist_to(obs, a, w);
    const double db = dist_to(obs, b, w);
    const bool cond = da < db;
    return with_moves(obs, {into_bowl(obs, cond ? a : b, w)},
                      fmt::format("distance({}, {}) = {:.3f} m\ndistance({}, {}) = {:.3f} m\ncondition is {}", block_id(a).str(),
                                  bowl_id(w).str(), da, block_id(b).str(), bowl_id(w).str(), db, cond ? "true" : "false"));
  };
  return d;
}

TaskDef cr_chain() {
  TaskDef d;
  d.id = "cr_chain";
  d.group = TaskGroup::CR;
  d.labeled_difficulty = 4.5;
  d.summary = "Two chained conditions over left-of and closer-to relations.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    std::vector<TaskParams> valid;
    const auto blocks = colors_of(obs, ObjectKind::Block);
    for (const auto& a : blocks) {
      for (const auto& b : blocks) {
        for (const auto& w : colors_of(obs, ObjectKind::Bowl)) {
          if (a == b) {
            continue;
          }
          const double dx = find_obj(obs, ObjectKind::Block, a)->pose.x - find_obj(obs, ObjectKind::Block, b)->pose.x;
          if (std::abs(dx) >= kComparisonMargin && std::abs(dist_to(obs, a, w) - dist_to(obs, b, w)) >= kComparisonMargin) {
            TaskParams p;
            p.colors = {a, b, w};
            valid.push_back(p);
          }
        }
      }
    }
    if (valid.empty()) {
      return std::nullopt;
    }
    return pick(valid, rng);
  };
  d.render = [](const TaskParams& p) {
    const auto& [a, b, w] = std::tie(p.colors[0], p.colors[1], p.colors[2]);
    return fmt::format(
        "If the {0} block is left of the {1} block, stack the {0} block on the {1} block; otherwise, if the {0} block is closer to "
        "the {2} bowl than the {1} block is, put the {0} block in the {2} bowl; otherwise put the {1} block in the {2} bowl.",
        a, b, w);
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(
        "^If the ([a-z]+) block is left of the ([a-z]+) block, stack the \\1 block on the \\2 block; otherwise, if the \\1 block is "
        "closer to the ([a-z]+) bowl than the \\2 block is, put the \\1 block in the \\3 bowl; otherwise put the \\2 block in the \\3 "
        "bowl\\.$");
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2], (*m)[3]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    const auto& [a, b, w] = std::tie(p.colors[0], p.colors[1], p.colors[2]);
    if (auto why = missing(obs, {{ObjectKind::Block, a}, {ObjectKind::Block, b}, {ObjectKind::Bowl, w}})) {
      return infeasible(*why);
    }
    const double ax = find_obj(obs, ObjectKind::Block, a)->pose.x;
    const double bx = find_obj(obs, ObjectKind::Block, b)->pose.x;
    std::string calc = fmt::format("x({}) = {:.3f}, x({}) = {:.3f}: left-of is {}", block_id(a).str(), ax, block_id(b).str(), bx,
                                   ax < bx ? "true" : "false");
    if (ax < bx) {
      return with_moves(obs, {onto(a, b)}, calc);
    }
    const double da = dist_to(obs, a, w);
    const double db = dist_to(obs, b, w);
    calc += fmt::format("\ndistance({}, {}) = {:.3f} m\ndistance({}, {}) = {:.3f} m\ncloser-to is {}", block_id(a).str(),
                        bowl_id(w).str(), da, block_id(b).str(), bowl_id(w).str(), db, da < db ? "true" : "false");
    return with_moves(obs, {into_bowl(obs, da < db ? a : b, w)}, calc);
  };
  return d;
}

TaskDef sp_first_then() {
  TaskDef d;
  d.id = "sp_first_then_finally";
  d.group = TaskGroup::SP;
  d.labeled_difficulty = 2.0;
  d.summary = "Ordered first / then / finally instructions.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    auto blocks = colors_of(obs, ObjectKind::Block);
    shuffle(blocks, rng);
    const auto pts = free_points(obs, 1, rng);
    if (!pts) {
      return std::nullopt;
    }
    TaskParams p;
    p.points = *pts;
    p.colors = {blocks[0], blocks[1]};
    if (blocks.size() >= 3) {
      p.colors.push_back(blocks[2]);
      p.colors.push_back(pick(colors_of(obs, ObjectKind::Bowl), rng));
    }
    return p;
  };
  d.render = [](const TaskParams& p) {
    std::string out = fmt::format("First move the {0} block to {1}, then stack the {2} block on the {0} block", p.colors[0],
                                  point_text(p.points[0]), p.colors[1]);
    if (p.colors.size() == 4) {
      out += fmt::format(", and finally put the {} block in the {} bowl", p.colors[2], p.colors[3]);
    }
    return out + ".";
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format(
        "^First move the ([a-z]+) block to \\({}, {}\\), then stack the ([a-z]+) block on the \\1 block(?:, and finally put the "
        "([a-z]+) block in the ([a-z]+) bowl)?\\.$",
        kNumRe, kNumRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.points = {Point{to_num((*m)[2]), to_num((*m)[3])}};
    p.colors = {(*m)[1], (*m)[4]};
    if ((*m)[5].matched) {
      p.colors.push_back((*m)[5]);
      p.colors.push_back((*m)[6]);
    }
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    std::vector<Ref> refs = {{ObjectKind::Block, p.colors[0]}, {ObjectKind::Block, p.colors[1]}};
    if (p.colors.size() == 4) {
      refs.push_back({ObjectKind::Block, p.colors[2]});
      refs.push_back({ObjectKind::Bowl, p.colors[3]});
    }
    if (auto why = missing(obs, refs)) {
      return infeasible(*why);
    }
    std::vector<Move> moves = {to_point(p.colors[0], p.points[0]), onto(p.colors[1], p.colors[0])};
    if (p.colors.size() == 4) {
      moves.push_back(into_bowl(obs, p.colors[2], p.colors[3]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef sp_interleaved() {
  TaskDef d;
  d.id = "sp_interleaved";
  d.group = TaskGroup::SP;
  d.labeled_difficulty = 2.5;
  d.summary = "Interleaved move-then-stack sequence.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    const auto pts = free_points(obs, p.colors.size() >= 3 ? 2 : 1, rng);
    if (!pts) {
      return std::nullopt;
    }
    p.points = *pts;
    return p;
  };
  d.render = [](const TaskParams& p) {
    std::string out =
        fmt::format("Move the {} block to {} and stack the {} block on it", p.colors[0], point_text(p.points[0]), p.colors[1]);
    if (p.colors.size() >= 3) {
      out += fmt::format(", then move the {} block to {}", p.colors[2], point_text(p.points[1]));
      if (p.colors.size() >= 4) {
        out += fmt::format(" and stack the {} block on it", p.colors[3]);
      }
    }
    return out + ".";
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format(
        "^Move the ([a-z]+) block to \\({0}, {0}\\) and stack the ([a-z]+) block on it(?:, then move the ([a-z]+) block to \\({0}, "
        "{0}\\)(?: and stack the ([a-z]+) block on it)?)?\\.$",
        kNumRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[4]};
    p.points = {Point{to_num((*m)[2]), to_num((*m)[3])}};
    if ((*m)[5].matched) {
      p.colors.push_back((*m)[5]);
      p.points.push_back(Point{to_num((*m)[6]), to_num((*m)[7])});
      if ((*m)[8].matched) {
        p.colors.push_back((*m)[8]);
      }
    }
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves = {to_point(p.colors[0], p.points[0]), onto(p.colors[1], p.colors[0])};
    if (p.colors.size() >= 3) {
      moves.push_back(to_point(p.colors[2], p.points[1]));
    }
    if (p.colors.size() >= 4) {
      moves.push_back(onto(p.colors[3], p.colors[2]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

TaskDef fr_absent() {
  TaskDef d;
  d.id = "fr_absent_color";
  d.group = TaskGroup::FR;
  d.labeled_difficulty = 2.5;
  d.feasibility_label = Feasibility::Infeasible;
  d.summary = "Instruction names a block color that is not in the scene.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    std::vector<std::string> absent;
    for (const auto& c : palette()) {
      if (find_obj(obs, ObjectKind::Block, c) == nullptr && find_obj(obs, ObjectKind::Bowl, c) == nullptr) {
        absent.push_back(c);
      }
    }
    if (absent.empty()) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {pick(absent, rng), pick(colors_of(obs, ObjectKind::Block), rng)};
    return p;
  };
  d.render = [](const TaskParams& p) { return fmt::format("Place the {} block on top of the {} block.", p.colors[0], p.colors[1]); };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Place the {} block on top of the {} block\\.$", kColorRe, kColorRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.colors = {(*m)[1], (*m)[2]};
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    return with_moves(obs, {onto(p.colors[0], p.colors[1])});
  };
  return d;
}

TaskDef lr_sm() {
  static const std::vector<std::string> templates = {
      "Could you grab the {} cube and drop it into the {} dish?",
      "I need the {} block sitting inside the {} bowl, please.",
      "Take the {} cube and set it down in the {} container.",
  };
  TaskDef d;
  d.id = "lr_paraphrase_sm";
  d.group = TaskGroup::LR;
  d.labeled_difficulty = 1.5;
  d.summary = "Paraphrases of putting one block into a bowl.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = {pick(colors_of(obs, ObjectKind::Block), rng), pick(colors_of(obs, ObjectKind::Bowl), rng)};
    p.variant = static_cast<int>(rng.below(templates.size()));
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format(fmt::runtime(templates[static_cast<std::size_t>(p.variant)]), p.colors[0], p.colors[1]);
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::vector<std::regex> res = {
        std::regex("^Could you grab the ([a-z]+) cube and drop it into the ([a-z]+) dish\\?$"),
        std::regex("^I need the ([a-z]+) block sitting inside the ([a-z]+) bowl, please\\.$"),
        std::regex("^Take the ([a-z]+) cube and set it down in the ([a-z]+) container\\.$"),
    };
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (const auto m = match(res[i], text)) {
        TaskParams p;
        p.colors = {(*m)[1], (*m)[2]};
        p.variant = static_cast<int>(i);
        return p;
      }
    }
    return std::nullopt;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, {{ObjectKind::Block, p.colors[0]}, {ObjectKind::Bowl, p.colors[1]}})) {
      return infeasible(*why);
    }
    return with_moves(obs, {into_bowl(obs, p.colors[0], p.colors[1])});
  };
  return d;
}

TaskDef lr_pm() {
  static const std::vector<std::string> templates = {
      "Match every cube with the dish that shares its colour.",
      "Each block should end up in the bowl whose color is the same as its own.",
      "Sort the cubes into the containers that have matching colors.",
  };
  TaskDef d;
  d.id = "lr_paraphrase_pm";
  d.group = TaskGroup::LR;
  d.labeled_difficulty = 1.5;
  d.summary = "Paraphrases of same-color matching.";
  d.sample = [](const Observation&, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.variant = static_cast<int>(rng.below(templates.size()));
    return p;
  };
  d.render = [](const TaskParams& p) { return templates[static_cast<std::size_t>(p.variant)]; };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    const auto it = std::find(templates.begin(), templates.end(), text);
    if (it == templates.end()) {
      return std::nullopt;
    }
    TaskParams p;
    p.variant = static_cast<int>(it - templates.begin());
    return p;
  };
  d.resolve = [](const TaskParams&, const Observation& obs) { return match_same_color(obs); };
  return d;
}

TaskDef er_stack() {
  TaskDef d;
  d.id = "er_stack_recovery";
  d.group = TaskGroup::ER;
  d.labeled_difficulty = 3.5;
  d.failure_override = FailureProfile{0.3, 0.05};
  d.summary = "Build a tower from all blocks while grasps fail at random.";
  d.sample = [](const Observation& obs, SceneRng& rng) -> std::optional<TaskParams> {
    TaskParams p;
    p.colors = colors_of(obs, ObjectKind::Block);
    shuffle(p.colors, rng);
    const auto pts = free_points(obs, 1, rng);
    if (!pts) {
      return std::nullopt;
    }
    p.points = *pts;
    return p;
  };
  d.render = [](const TaskParams& p) {
    return fmt::format("Build a tower at {} from all the blocks, bottom to top: {}.", point_text(p.points[0]), join(p.colors, ", "));
  };
  d.parse = [](const std::string& text) -> std::optional<TaskParams> {
    static const std::regex re(fmt::format("^Build a tower at \\({}, {}\\) from all the blocks, bottom to top: ([a-z, ]+)\\.$", kNumRe, kNumRe));
    const auto m = match(re, text);
    if (!m) {
      return std::nullopt;
    }
    TaskParams p;
    p.points = {Point{to_num((*m)[1]), to_num((*m)[2])}};
    p.colors = split((*m)[3], ", ");
    return p;
  };
  d.resolve = [](const TaskParams& p, const Observation& obs) {
    if (auto why = missing(obs, block_refs(p.colors))) {
      return infeasible(*why);
    }
    std::vector<Move> moves = {to_point(p.colors[0], p.points[0])};
    for (std::size_t i = 1; i < p.colors.size(); ++i) {
      moves.push_back(onto(p.colors[i], p.colors[i - 1]));
    }
    return with_moves(obs, std::move(moves));
  };
  return d;
}

}  // namespace

std::string_view to_string(TaskGroup group) {
  switch (group) {
    case TaskGroup::SM: return "SM";
    case TaskGroup::SA: return "SA";
    case TaskGroup::SS: return "SS";
    case TaskGroup::PM: return "PM";
    case TaskGroup::SR: return "SR";
    case TaskGroup::CR: return "CR";
    case TaskGroup::SP: return "SP";
    case TaskGroup::FR: return "FR";
    case TaskGroup::LR: return "LR";
    case TaskGroup::ER: return "ER";
  }
  return "?";
}

std::string_view group_display_name(TaskGroup group) {
  switch (group) {
    case TaskGroup::SM: return "Simple Manipulation";
    case TaskGroup::SA: return "Spatial Allocation";
    case TaskGroup::SS: return "Stable Stacking";
    case TaskGroup::PM: return "Perceptual Matching";
    case TaskGroup::SR: return "Spatial Reasoning";
    case TaskGroup::CR: return "Conditional Reasoning";
    case TaskGroup::SP: return "Sequential Planning";
    case TaskGroup::FR: return "Feasibility Recognition";
    case TaskGroup::LR: return "Linguistic Robustness";
    case TaskGroup::ER: return "Error Recovery";
  }
  return "?";
}

std::optional<TaskGroup> parse_task_group(std::string_view text) {
  for (const auto g : kAllGroups) {
    if (to_string(g) == text) {
      return g;
    }
  }
  return std::nullopt;
}

bool is_canonical(TaskGroup group) {
  return group == TaskGroup::SM || group == TaskGroup::SA || group == TaskGroup::SS || group == TaskGroup::PM || group == TaskGroup::SR;
}

std::string_view to_string(Feasibility feasibility) { return feasibility == Feasibility::Feasible ? "feasible" : "infeasible"; }

const std::vector<TaskDef>& build_catalog() {
  static const std::vector<TaskDef> catalog = {
      sm_block_in_bowl(), sm_block_to_position(), sa_line(),        sa_corners(),    sa_halves(),      ss_stack_all(),
      ss_color_order(),   pm_matching(),          pm_cross(),       pm_named(),      sr_closest(),     sr_midpoint(),
      sr_kth(),           cr_if_else(),           cr_chain(),       sp_first_then(), sp_interleaved(), fr_absent(),
      lr_sm(),            lr_pm(),                er_stack(),
  };
  return catalog;
}

const TaskDef* find_task(std::string_view id) {
  const auto& catalog = build_catalog();
  const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const TaskDef& d) { return d.id == id; });
  return it == catalog.end() ? nullptr : &*it;
}

double scale_difficulty(double base, int n_pairs) { return std::clamp(base + 0.5 * (n_pairs - 3), 1.0, 5.0); }

GoalSpec goal_from_moves(const std::vector<Move>& moves, const Observation& observation) {
  std::map<ObjectId, Vec3> poses;
  std::map<ObjectId, ObjectKind> kinds;
  for (const auto& o : observation.objects) {
    poses[o.id] = o.pose;
    kinds[o.id] = o.kind;
  }
  GoalSpec goal;
  for (const auto& m : moves) {
    Vec3 target = m.position;
    if (m.base) {
      const Vec3 base = poses.at(*m.base);
      target = kinds.at(*m.base) == ObjectKind::Bowl ? Vec3{base.x, base.y, kBowlInteriorZ} : Vec3{base.x, base.y, base.z + kBlockEdge};
    }
    poses[m.object] = target;
    goal.targets[m.object] = target;
  }
  return goal;
}

std::vector<Move> order_bottom_up(const std::vector<Move>& moves) {
  std::vector<Move> ordered;
  std::vector<bool> done(moves.size(), false);
  std::set<ObjectId> moved_objects;
  for (const auto& m : moves) {
    moved_objects.insert(m.object);
  }
  std::set<ObjectId> placed;
  while (ordered.size() < moves.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (done[i]) {
        continue;
      }
      const auto& m = moves[i];
      if (m.base && moved_objects.contains(*m.base) && !placed.contains(*m.base)) {
        continue;
      }
      ordered.push_back(m);
      placed.insert(m.object);
      done[i] = true;
      progressed = true;
      break;
    }
    if (!progressed) {
      // Cyclic dependencies: keep the remaining moves in their given order.
      for (std::size_t i = 0; i < moves.size(); ++i) {
        if (!done[i]) {
          ordered.push_back(moves[i]);
          done[i] = true;
        }
      }
    }
  }
  return ordered;
}

TaskInstance instantiate_task(const TaskDef& def, const SceneState& scene, std::uint64_t goal_seed) {
  const Observation obs = observe(scene, 0.0);
  SceneRng rng(goal_seed);
  const auto params = def.sample(obs, rng);
  if (!params) {
    throw ScenarioIncompatible(fmt::format("scenario incompatible: {} cannot be posed on this scene", def.id));
  }
  auto interp = def.resolve(*params, obs);
  if (def.feasibility_label == Feasibility::Feasible && !interp.feasible) {
    throw ScenarioIncompatible(fmt::format("scenario incompatible: {} ({})", def.id, interp.infeasible_reason));
  }
  // A goal the initial scene already meets would score a do-nothing agent.
  if (interp.feasible && !interp.goal.targets.empty() && evaluate(scene, interp.goal).pass) {
    throw ScenarioIncompatible(fmt::format("scenario incompatible: {} is already satisfied", def.id));
  }
  const int n_pairs = static_cast<int>(objects_of(obs, ObjectKind::Block).size());
  TaskInstance inst;
  inst.task_id = def.id;
  inst.group = def.group;
  inst.instruction = def.render(*params);
  inst.params = *params;
  inst.goal = interp.goal;
  inst.reference_moves = interp.moves;
  inst.feasibility_label = def.feasibility_label;
  inst.failure = def.failure_override.value_or(FailureProfile{});
  inst.labeled_difficulty = def.labeled_difficulty;
  inst.scaled_difficulty = scale_difficulty(def.labeled_difficulty, n_pairs);
  inst.n_pairs = n_pairs;
  inst.goal_seed = goal_seed;
  return inst;
}

std::optional<Interpretation> interpret_instruction(const std::string& instruction, const Observation& observation) {
  for (const auto& def : build_catalog()) {
    if (const auto params = def.parse(instruction)) {
      auto interp = def.resolve(*params, observation);
      interp.task_id = def.id;
      return interp;
    }
  }
  return std::nullopt;
}

EvaluationResult evaluate(const SceneState& final_scene, const GoalSpec& goal, double delta) {
  EvaluationResult result;
  for (const auto& [id, target] : goal.targets) {
    const RigidObject* obj = final_scene.find(id);
    if (obj == nullptr) {
      throw EvaluationError(fmt::format("unknown goal object {}", id.str()));
    }
    const double d = distance(obj->pose, target);
    result.distances[id] = d;
    if (!(d <= delta + kDistanceEpsilon)) {
      result.pass = false;
    }
  }
  return result;
}

FeasibilityVerdict evaluate_feasibility(FinishStatus predicted, Feasibility label, int movement_calls) {
  FeasibilityVerdict v;
  v.pass = label == Feasibility::Infeasible ? predicted == FinishStatus::Infeasible : predicted != FinishStatus::Infeasible;
  v.redundant_actions = label == Feasibility::Infeasible ? movement_calls : 0;
  return v;
}

}  // namespace robopilot
