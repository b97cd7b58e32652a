#include "egomind/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>

#include "egomind/errors.hpp"
#include "egomind/route.hpp"

namespace egomind::sim {

namespace {

using graph::Rotation;
using graph::Translation;
constexpr double kPi = std::numbers::pi;
constexpr double kQuantumTol = 1e-6;
constexpr double kGeomEps = 1e-9;

// Portable uniform draws: std::uniform_real_distribution is implementation
// defined, generated scenes must be identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool coin() { return (engine_() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

double normalize_angle(double a) {
  a = std::remainder(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  return a;
}

std::pair<int, int> translation_steps(Translation t) {
  switch (t) {
    case Translation::None: return {0, 0};
    case Translation::Forward: return {1, 0};
    case Translation::Backward: return {-1, 0};
    case Translation::Left: return {0, 1};
    case Translation::Right: return {0, -1};
    case Translation::ForwardLeft: return {1, 1};
    case Translation::ForwardRight: return {1, -1};
    case Translation::BackwardLeft: return {-1, 1};
    case Translation::BackwardRight: return {-1, -1};
  }
  return {0, 0};
}

double rotation_angle(Rotation r, const SimConfig& cfg) {
  switch (r) {
    case Rotation::None: return 0.0;
    case Rotation::TurnLeft: return cfg.turn_quantum;
    case Rotation::TurnRight: return -cfg.turn_quantum;
    case Rotation::TurnAround: return kPi;
  }
  return 0.0;
}

bool inside_walls(const Scene& s, double x, double y, double margin) {
  return x >= margin && x <= s.room.width - margin && y >= margin && y <= s.room.depth - margin;
}

graph::ObjectNode node_for(const PlacedObject& o, int frame) {
  return graph::ObjectNode{o.id, o.category, o.attributes, frame, {frame}};
}

bool uniquely_referable(const Scene& s, const PlacedObject& o) {
  for (const auto& p : s.objects) {
    if (p.id == o.id || p.category != o.category) continue;
    if (std::includes(p.attributes.begin(), p.attributes.end(), o.attributes.begin(),
                      o.attributes.end())) {
      return false;
    }
  }
  return true;
}

bool ref_matches(const PlacedObject& o, const ObjectRef& ref) {
  return o.category == ref.category &&
         std::includes(o.attributes.begin(), o.attributes.end(), ref.attributes.begin(),
                       ref.attributes.end());
}

const PlacedObject& resolve_in_scene(const Scene& s, const ObjectRef& ref) {
  const PlacedObject* hit = nullptr;
  for (const auto& o : s.objects) {
    if (!ref_matches(o, ref)) continue;
    if (hit != nullptr) {
      throw ProvenanceError("'" + ref.label() + "' is ambiguous in scene " + s.scene_id);
    }
    hit = &o;
  }
  if (hit == nullptr) throw ProvenanceError("'" + ref.label() + "' is not in scene " + s.scene_id);
  return *hit;
}

double centre_distance(const PlacedObject& a, const PlacedObject& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Signed angle of c about the ray a -> b, counter-clockwise positive.
double direction_angle(const PlacedObject& a, const PlacedObject& b, const PlacedObject& c) {
  const double fx = b.x - a.x, fy = b.y - a.y;
  const double qx = c.x - a.x, qy = c.y - a.y;
  return std::atan2(fx * qy - fy * qx, fx * qx + fy * qy);
}

std::string direction_label(const PlacedObject& a, const PlacedObject& b, const PlacedObject& c,
                            bool four_way) {
  const double fx = b.x - a.x, fy = b.y - a.y;
  const double qx = c.x - a.x, qy = c.y - a.y;
  const double cross = fx * qy - fy * qx;
  const double dot = fx * qx + fy * qy;
  std::string side = cross > 0 ? "left" : "right";
  if (!four_way) return side;
  return (dot > 0 ? "front-" : "back-") + side;
}

std::optional<std::vector<std::string>> scene_route(const Scene& s, const PlacedObject& start,
                                                    const PlacedObject& facing,
                                                    const PlacedObject& goal,
                                                    const SimConfig& cfg) {
  route::RouteRequest req;
  req.room_width = s.room.width;
  req.room_depth = s.room.depth;
  req.cell = cfg.grid_cell;
  for (const auto& o : s.objects) {
    if (o.id == start.id || o.id == goal.id) continue;
    req.obstacles.push_back({o.x, o.y, o.width, o.depth});
  }
  req.start = {start.x, start.y};
  req.facing = {facing.x, facing.y};
  req.goal = {goal.x, goal.y};
  return route::plan_route(req);
}

char letter(std::size_t i) { return static_cast<char>('A' + i); }

std::vector<Option> letter_options(const std::vector<std::string>& texts) {
  std::vector<Option> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({letter(i), texts[i]});
  return out;
}

char letter_of(const std::vector<Option>& options, const std::string& text) {
  for (const auto& o : options) {
    if (o.text == text) return o.letter;
  }
  throw ProvenanceError("no option reads '" + text + "'");
}

std::string join_labels(const std::vector<const PlacedObject*>& objs) {
  std::string out;
  for (const auto* o : objs) out += (out.empty() ? "" : ", ") + o->ref().label();
  return out;
}

// --- question generators ------------------------------------------------------

struct GenContext {
  const Scene& scene;
  const std::vector<CameraPose>& trajectory;
  const SimConfig& cfg;
  std::map<std::string, int> first_seen;
  std::vector<const PlacedObject*> referable;  // visible and uniquely referable
};

std::string question_id(const GenContext& g, TaskType t, std::size_t k) {
  return g.scene.scene_id + "-" + std::string(to_string(t)) + "-" + std::to_string(k);
}

void gen_object_count(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  std::map<std::string, std::pair<int, int>> counts;  // category -> (total, visible)
  for (const auto& o : g.scene.objects) {
    auto& c = counts[o.category];
    ++c.first;
    c.second += g.first_seen.contains(o.id) ? 1 : 0;
  }
  std::vector<std::string> eligible;
  for (const auto& [cat, c] : counts) {
    if (c.first == c.second) eligible.push_back(cat);
  }
  rng.shuffle(eligible);
  // Prefer categories with several instances.
  std::stable_sort(eligible.begin(), eligible.end(), [&](const auto& a, const auto& b) {
    return (counts[a].first > 1) > (counts[b].first > 1);
  });
  for (std::size_t k = 0; k < eligible.size() && static_cast<int>(k) < g.cfg.questions_per_family; ++k) {
    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::ObjectCount, k);
    q.task_type = TaskType::ObjectCount;
    q.explicit_targets = {ObjectRef{eligible[k], {}}};
    q.text = "How many " + eligible[k] + "(s) are in this room?";
    q.ground_truth = Answer::number(counts[eligible[k]].first);
    out.push_back(std::move(q));
  }
}

void gen_absolute_distance(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  const auto& u = g.referable;
  if (u.size() < 2) return;
  std::set<std::pair<std::string, std::string>> used;
  for (int attempt = 0; attempt < 50 && static_cast<int>(used.size()) < g.cfg.questions_per_family; ++attempt) {
    const auto* a = u[rng.index(u.size())];
    const auto* b = u[rng.index(u.size())];
    if (a == b || used.contains({a->id, b->id}) || used.contains({b->id, a->id})) continue;
    used.insert({a->id, b->id});
    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::AbsoluteDistance, used.size() - 1);
    q.task_type = TaskType::AbsoluteDistance;
    q.explicit_targets = {a->ref(), b->ref()};
    q.text = "What is the distance between the centres of the " + a->ref().label() + " and the " +
             b->ref().label() + " (in meters)?";
    q.ground_truth = Answer::number(centre_distance(*a, *b), "m");
    out.push_back(std::move(q));
  }
}

void gen_object_size(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  auto pool = g.referable;
  rng.shuffle(pool);
  for (std::size_t k = 0; k < pool.size() && static_cast<int>(k) < g.cfg.questions_per_family; ++k) {
    const auto* o = pool[k];
    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::ObjectSize, k);
    q.task_type = TaskType::ObjectSize;
    q.explicit_targets = {o->ref()};
    q.text = "What is the length of the longest dimension (width, depth or height) of the " +
             o->ref().label() + " (in meters)?";
    q.ground_truth = Answer::number(std::max({o->width, o->depth, o->height}), "m");
    out.push_back(std::move(q));
  }
}

void gen_room_size(GenContext& g, Rng&, std::vector<StructuredQuestion>& out) {
  StructuredQuestion q;
  q.question_id = question_id(g, TaskType::RoomSize, 0);
  q.task_type = TaskType::RoomSize;
  q.text = "What is the size of this room (in square meters)?";
  q.ground_truth = Answer::number(g.scene.room.width * g.scene.room.depth, "m^2");
  out.push_back(std::move(q));
}

void gen_relative_distance(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  const auto& u = g.referable;
  if (u.size() < 3) return;
  const std::size_t n_opts = std::min<std::size_t>(4, u.size() - 1);
  std::set<std::string> used_anchors;
  int made = 0;
  for (int attempt = 0; attempt < 60 && made < g.cfg.questions_per_family; ++attempt) {
    auto pool = u;
    rng.shuffle(pool);
    const auto* anchor = pool[0];
    if (used_anchors.contains(anchor->id)) continue;
    std::vector<const PlacedObject*> opts(pool.begin() + 1, pool.begin() + 1 + static_cast<long>(n_opts));
    const bool farthest = rng.coin();
    std::vector<double> d;
    for (const auto* o : opts) d.push_back(centre_distance(*anchor, *o));
    auto sorted = d;
    std::sort(sorted.begin(), sorted.end());
    const double margin = farthest ? sorted[sorted.size() - 1] - sorted[sorted.size() - 2]
                                   : sorted[1] - sorted[0];
    if (margin < 0.15) continue;
    used_anchors.insert(anchor->id);

    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::RelativeDistance, static_cast<std::size_t>(made++));
    q.task_type = TaskType::RelativeDistance;
    q.variant = farthest ? "farthest" : "closest";
    q.explicit_targets.push_back(anchor->ref());
    std::vector<std::string> texts;
    std::size_t best = 0;
    for (std::size_t i = 0; i < opts.size(); ++i) {
      q.explicit_targets.push_back(opts[i]->ref());
      texts.push_back(opts[i]->ref().label());
      if (farthest ? d[i] > d[best] : d[i] < d[best]) best = i;
    }
    q.options = letter_options(texts);
    q.text = "Measuring between object centres, which of these objects is " + q.variant +
             " to the " + anchor->ref().label() + "?";
    q.ground_truth = Answer::choice(letter(best));
    out.push_back(std::move(q));
  }
}

void gen_relative_direction(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  const auto& u = g.referable;
  if (u.size() < 3) return;
  constexpr double kBoundary = 10.0 * kPi / 180.0;
  std::set<std::string> used;
  int made = 0;
  for (int attempt = 0; attempt < 100 && made < g.cfg.questions_per_family; ++attempt) {
    auto pool = u;
    rng.shuffle(pool);
    const auto *a = pool[0], *b = pool[1], *c = pool[2];
    const std::string key = a->id + "|" + b->id + "|" + c->id;
    if (used.contains(key)) continue;
    if (centre_distance(*a, *b) < 0.5 || centre_distance(*a, *c) < 0.5) continue;
    const bool four_way = rng.coin();
    const double theta = direction_angle(*a, *b, *c);
    const double abs_theta = std::abs(theta);
    // Reject layouts near a sector boundary.
    if (abs_theta < kBoundary || abs_theta > kPi - kBoundary) continue;
    if (four_way && std::abs(abs_theta - kPi / 2) < kBoundary) continue;
    used.insert(key);

    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::RelativeDirection, static_cast<std::size_t>(made++));
    q.task_type = TaskType::RelativeDirection;
    q.variant = four_way ? "4way" : "2way";
    q.explicit_targets = {a->ref(), b->ref(), c->ref()};
    std::vector<std::string> texts =
        four_way ? std::vector<std::string>{"front-left", "front-right", "back-left", "back-right"}
                 : std::vector<std::string>{"left", "right"};
    rng.shuffle(texts);
    q.options = letter_options(texts);
    q.text = "If I am standing by the " + a->ref().label() + " and facing the " +
             b->ref().label() + ", is the " + c->ref().label() +
             (four_way ? " to my front-left, front-right, back-left, or back-right?"
                       : " to my left or right?");
    q.ground_truth = Answer::choice(letter_of(q.options, direction_label(*a, *b, *c, four_way)));
    out.push_back(std::move(q));
  }
}

std::vector<std::string> route_distractors(const std::vector<std::string>& truth) {
  std::vector<std::vector<std::string>> variants;
  auto mirrored = truth;
  for (auto& a : mirrored) {
    if (a == "turn left") a = "turn right";
    else if (a == "turn right") a = "turn left";
  }
  variants.push_back(mirrored);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].rfind("turn", 0) == 0) {
      auto dropped = truth;
      dropped.erase(dropped.begin() + static_cast<long>(i));
      variants.push_back(dropped);
      break;
    }
  }
  for (const char* turn : {"turn left", "turn right", "turn around"}) {
    auto v = truth;
    if (!v.empty() && v.front().rfind("turn", 0) == 0) v.front() = turn;
    else v.insert(v.begin(), turn);
    variants.push_back(v);
  }
  auto appended = truth;
  appended.push_back("turn left");
  appended.push_back("go straight");
  variants.push_back(appended);

  const std::string t = route::join_actions(truth);
  std::vector<std::string> out;
  for (const auto& v : variants) {
    auto s = route::join_actions(v);
    if (s != t && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

void gen_route_plan(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  const auto& u = g.referable;
  if (u.size() < 3) return;
  std::set<std::string> used;
  int made = 0;
  for (int attempt = 0; attempt < 60 && made < g.cfg.questions_per_family; ++attempt) {
    auto pool = u;
    rng.shuffle(pool);
    const auto *a = pool[0], *b = pool[1], *c = pool[2];
    const std::string key = a->id + "|" + b->id + "|" + c->id;
    if (used.contains(key)) continue;
    auto plan = scene_route(g.scene, *a, *b, *c, g.cfg);
    if (!plan || plan->empty()) continue;
    used.insert(key);
    auto distractors = route_distractors(*plan);
    rng.shuffle(distractors);
    distractors.resize(std::min<std::size_t>(3, distractors.size()));
    const std::string truth = route::join_actions(*plan);
    distractors.push_back(truth);
    rng.shuffle(distractors);

    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::RoutePlan, static_cast<std::size_t>(made++));
    q.task_type = TaskType::RoutePlan;
    q.explicit_targets = {a->ref(), b->ref(), c->ref()};
    q.options = letter_options(distractors);
    q.text = "I am standing by the " + a->ref().label() + " and facing the " + b->ref().label() +
             ". Which sequence of actions takes me to the " + c->ref().label() + "?";
    q.ground_truth = Answer::choice(letter_of(q.options, truth));
    out.push_back(std::move(q));
  }
}

void gen_appearance_order(GenContext& g, Rng& rng, std::vector<StructuredQuestion>& out) {
  const auto& u = g.referable;
  if (u.size() < 3) return;
  std::set<std::string> used;
  int made = 0;
  for (int attempt = 0; attempt < 60 && made < g.cfg.questions_per_family; ++attempt) {
    auto pool = u;
    rng.shuffle(pool);
    std::vector<const PlacedObject*> listed(pool.begin(), pool.begin() + 3);
    std::set<int> frames;
    for (const auto* o : listed) frames.insert(g.first_seen.at(o->id));
    if (frames.size() != listed.size()) continue;
    auto ids = std::vector<std::string>{listed[0]->id, listed[1]->id, listed[2]->id};
    std::sort(ids.begin(), ids.end());
    const std::string key = ids[0] + "|" + ids[1] + "|" + ids[2];
    if (used.contains(key)) continue;
    used.insert(key);

    auto ordered = listed;
    std::sort(ordered.begin(), ordered.end(), [&](const auto* x, const auto* y) {
      return g.first_seen.at(x->id) < g.first_seen.at(y->id);
    });
    const std::string truth = join_labels(ordered);
    std::vector<std::string> perms;
    auto perm = ordered;
    std::sort(perm.begin(), perm.end());
    do {
      auto s = join_labels(perm);
      if (s != truth) perms.push_back(s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    rng.shuffle(perms);
    perms.resize(3);
    perms.push_back(truth);
    rng.shuffle(perms);

    StructuredQuestion q;
    q.question_id = question_id(g, TaskType::AppearanceOrder, static_cast<std::size_t>(made++));
    q.task_type = TaskType::AppearanceOrder;
    for (const auto* o : listed) q.explicit_targets.push_back(o->ref());
    q.options = letter_options(perms);
    q.text = "In which order do the following objects first appear in the video: " +
             join_labels(listed) + "?";
    q.ground_truth = Answer::choice(letter_of(q.options, truth));
    out.push_back(std::move(q));
  }
}

}  // namespace

std::vector<CategorySpec> default_category_pool() {
  return {
      {"chair", 0.45, 0.6, 0.45, 0.6, 0.8, 1.0, {"red", "blue", "wooden", "black"}},
      {"table", 0.8, 1.6, 0.6, 1.0, 0.7, 0.8, {"wooden", "white", "glass"}},
      {"sofa", 1.6, 2.2, 0.8, 1.0, 0.8, 0.9, {"gray", "blue", "leather"}},
      {"lamp", 0.3, 0.4, 0.3, 0.4, 1.2, 1.7, {"white", "black"}},
      {"bed", 1.4, 2.0, 1.9, 2.1, 0.5, 0.6, {"white", "gray"}},
      {"tv", 1.0, 1.4, 0.2, 0.3, 0.6, 0.8, {"black", "silver"}},
      {"cabinet", 0.6, 1.2, 0.4, 0.6, 0.8, 2.0, {"wooden", "white"}},
      {"plant", 0.3, 0.5, 0.3, 0.5, 0.5, 1.5, {"green", "tall"}},
      {"trash can", 0.3, 0.4, 0.3, 0.4, 0.4, 0.6, {"gray", "black"}},
      {"desk", 1.0, 1.5, 0.6, 0.8, 0.72, 0.78, {"wooden", "white"}},
      {"refrigerator", 0.7, 0.9, 0.7, 0.8, 1.7, 1.9, {"white", "silver"}},
  };
}

const PlacedObject& Scene::object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return o;
  }
  throw LookupError("scene " + scene_id + " has no object '" + id + "'");
}

bool footprints_overlap(const PlacedObject& a, const PlacedObject& b) {
  return std::abs(a.x - b.x) < (a.width + b.width) / 2 &&
         std::abs(a.y - b.y) < (a.depth + b.depth) / 2;
}

void validate(const Scene& s) {
  if (!(s.room.width > 0 && s.room.depth > 0)) throw StructuralError("room area must be positive");
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    if (o.x - o.width / 2 < -kGeomEps || o.x + o.width / 2 > s.room.width + kGeomEps ||
        o.y - o.depth / 2 < -kGeomEps || o.y + o.depth / 2 > s.room.depth + kGeomEps) {
      throw StructuralError("object " + o.id + " leaves the room");
    }
    for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
      if (footprints_overlap(o, s.objects[j])) {
        throw StructuralError("objects " + o.id + " and " + s.objects[j].id + " overlap");
      }
    }
  }
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.n_objects < 1) throw PreconditionError("a scene needs at least one object");
  if (!(cfg.min_room_width > 0 && cfg.min_room_depth > 0 && cfg.max_room_width >= cfg.min_room_width &&
        cfg.max_room_depth >= cfg.min_room_depth)) {
    throw PreconditionError("room bounds must be positive and ordered");
  }
  if (cfg.category_pool.empty()) throw PreconditionError("category pool is empty");

  Rng rng(seed);
  Scene s;
  s.seed = seed;
  s.scene_id = "scene-" + std::to_string(seed);
  s.room = {rng.uniform(cfg.min_room_width, cfg.max_room_width),
            rng.uniform(cfg.min_room_depth, cfg.max_room_depth), cfg.wall_height};

  constexpr double kClearance = 0.05;
  std::map<std::string, int> per_category;
  for (int k = 0; k < cfg.n_objects; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
      const auto& spec = cfg.category_pool[rng.index(cfg.category_pool.size())];
      PlacedObject o;
      o.category = spec.name;
      if (!spec.attributes.empty()) o.attributes = {spec.attributes[rng.index(spec.attributes.size())]};
      o.width = rng.uniform(spec.min_width, spec.max_width);
      o.depth = rng.uniform(spec.min_depth, spec.max_depth);
      o.height = rng.uniform(spec.min_height, spec.max_height);
      if (o.width > s.room.width || o.depth > s.room.depth) continue;
      o.x = rng.uniform(o.width / 2, s.room.width - o.width / 2);
      o.y = rng.uniform(o.depth / 2, s.room.depth - o.depth / 2);
      bool clear = std::none_of(s.objects.begin(), s.objects.end(), [&](const PlacedObject& p) {
        return std::abs(o.x - p.x) < (o.width + p.width) / 2 + kClearance &&
               std::abs(o.y - p.y) < (o.depth + p.depth) / 2 + kClearance;
      });
      if (!clear) continue;
      o.id = o.category + "#" + std::to_string(++per_category[o.category]);
      s.objects.push_back(std::move(o));
      placed = true;
    }
    if (!placed) {
      throw GenerationError("could not place object " + std::to_string(k + 1) + " of " +
                            std::to_string(cfg.n_objects) + " after " +
                            std::to_string(cfg.max_placement_attempts) +
                            " attempts; use fewer objects or a larger room");
    }
  }
  return s;
}

CameraPose apply_transition(const CameraPose& pose, Translation t, Rotation r,
                            const SimConfig& cfg) {
  const auto [fwd, left] = translation_steps(t);
  CameraPose out = pose;
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  out.x = pose.x + cfg.step * (fwd * c - left * s);
  out.y = pose.y + cfg.step * (fwd * s + left * c);
  out.heading = normalize_angle(pose.heading + rotation_angle(r, cfg));
  return out;
}

graph::ViewpointTransition classify_transition(const CameraPose& a, const CameraPose& b,
                                               int from_frame, const SimConfig& cfg) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double c = std::cos(a.heading), s = std::sin(a.heading);
  const double fwd = (dx * c + dy * s) / cfg.step;
  const double left = (-dx * s + dy * c) / cfg.step;
  const double qf = std::round(fwd), ql = std::round(left);
  if (std::abs(fwd - qf) > kQuantumTol || std::abs(left - ql) > kQuantumTol ||
      std::abs(qf) > 1 || std::abs(ql) > 1) {
    throw ClassificationError("displacement is not a single translation quantum");
  }
  static constexpr Translation kTable[3][3] = {
      // left = -1 (right), 0, +1 (left); rows fwd = -1, 0, +1
      {Translation::BackwardRight, Translation::Backward, Translation::BackwardLeft},
      {Translation::Right, Translation::None, Translation::Left},
      {Translation::ForwardRight, Translation::Forward, Translation::ForwardLeft},
  };
  const Translation t = kTable[static_cast<int>(qf) + 1][static_cast<int>(ql) + 1];

  const double dh = normalize_angle(b.heading - a.heading);
  Rotation r;
  if (std::abs(dh) <= kQuantumTol) {
    r = Rotation::None;
  } else if (std::abs(dh - cfg.turn_quantum) <= kQuantumTol) {
    r = Rotation::TurnLeft;
  } else if (std::abs(dh + cfg.turn_quantum) <= kQuantumTol) {
    r = Rotation::TurnRight;
  } else if (std::abs(std::abs(dh) - kPi) <= kQuantumTol) {
    r = Rotation::TurnAround;
  } else {
    throw ClassificationError("heading change is not a single rotation quantum");
  }
  return {from_frame, from_frame + 1, t, r, graph::narrate_move(t, r)};
}

std::vector<CameraPose> generate_trajectory(const Scene& scene, std::uint64_t seed, int n_frames,
                                            const SimConfig& cfg) {
  if (n_frames < 1) throw PreconditionError("a trajectory needs at least one frame");
  const double m = cfg.wall_margin;
  if (scene.room.width < 2 * m || scene.room.depth < 2 * m) {
    throw TrajectoryError("room is too small for the camera wall margin");
  }
  Rng rng(seed);
  const int headings = std::max(1, static_cast<int>(std::lround(2 * kPi / cfg.turn_quantum)));
  CameraPose pose;
  pose.x = rng.uniform(m, scene.room.width - m);
  pose.y = rng.uniform(m, scene.room.depth - m);
  pose.heading = normalize_angle(cfg.turn_quantum * static_cast<double>(rng.index(static_cast<std::size_t>(headings))));
  pose.fov = cfg.fov;
  pose.range = cfg.range;

  std::vector<CameraPose> out{pose};
  for (int f = 1; f < n_frames; ++f) {
    std::vector<CameraPose> moves;
    for (int t = 0; t < 9; ++t) {
      for (int r = 0; r < 4; ++r) {
        if (t == 0 && r == 0) continue;
        auto next = apply_transition(out.back(), static_cast<Translation>(t), static_cast<Rotation>(r), cfg);
        if (inside_walls(scene, next.x, next.y, m)) moves.push_back(next);
      }
    }
    if (moves.empty()) throw TrajectoryError("no valid move from frame " + std::to_string(f - 1));
    out.push_back(moves[rng.index(moves.size())]);
  }
  return out;
}

double bearing(const CameraPose& pose, double x, double y) {
  const double dx = x - pose.x, dy = y - pose.y;
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  const double fwd = dx * c + dy * s;
  const double left = -dx * s + dy * c;
  return -std::atan2(left, fwd);
}

bool is_visible(const CameraPose& pose, double x, double y) {
  const double d = std::hypot(x - pose.x, y - pose.y);
  if (d < kGeomEps || d > pose.range) return false;
  return std::abs(bearing(pose, x, y)) <= pose.fov / 2;
}

graph::FrameObservation observe(const Scene& scene, const CameraPose& pose, int frame_index,
                                const SimConfig& cfg) {
  graph::FrameObservation obs;
  obs.frame_index = frame_index;
  struct Seen {
    const PlacedObject* obj;
    double bearing;
    double depth;
  };
  std::vector<Seen> seen;
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  for (const auto& o : scene.objects) {
    if (!is_visible(pose, o.x, o.y)) continue;
    seen.push_back({&o, bearing(pose, o.x, o.y), (o.x - pose.x) * c + (o.y - pose.y) * s});
    obs.objects.push_back(node_for(o, frame_index));
  }
  auto rel = [&](const PlacedObject& a, graph::Predicate p, const PlacedObject& b) {
    obs.relations.push_back({a.id, p, b.id, graph::Provenance::intra(frame_index)});
  };

  auto by_bearing = seen;
  std::stable_sort(by_bearing.begin(), by_bearing.end(),
                   [](const Seen& a, const Seen& b) { return a.bearing < b.bearing; });
  for (std::size_t i = 0; i + 1 < by_bearing.size(); ++i) {
    if (by_bearing[i + 1].bearing - by_bearing[i].bearing > kGeomEps) {
      rel(*by_bearing[i].obj, graph::Predicate::LeftOf, *by_bearing[i + 1].obj);
    }
  }
  auto by_depth = seen;
  std::stable_sort(by_depth.begin(), by_depth.end(),
                   [](const Seen& a, const Seen& b) { return a.depth < b.depth; });
  for (std::size_t i = 0; i + 1 < by_depth.size(); ++i) {
    if (by_depth[i + 1].depth - by_depth[i].depth > kGeomEps) {
      rel(*by_depth[i].obj, graph::Predicate::InFrontOf, *by_depth[i + 1].obj);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    for (std::size_t j = i + 1; j < seen.size(); ++j) {
      const auto& a = *seen[i].obj;
      const auto& b = *seen[j].obj;
      if (centre_distance(a, b) <= cfg.near_threshold) rel(a, graph::Predicate::Near, b);
      if (footprints_overlap(a, b) && a.height != b.height) {
        if (a.height > b.height) rel(a, graph::Predicate::Above, b);
        else rel(b, graph::Predicate::Above, a);
      }
    }
  }

  if (obs.objects.empty()) {
    obs.description = "I see no objects.";
  } else {
    std::string text = "I see ";
    for (std::size_t i = 0; i < obs.objects.size(); ++i) {
      if (i) text += i + 1 == obs.objects.size() ? " and " : ", ";
      text += graph::describe_object(obs.objects[i]);
    }
    text += ".";
    for (const auto& r : obs.relations) {
      std::string sentence =
          graph::reference_object(node_for(scene.object(r.subject_id), frame_index)) + " is " +
          std::string(graph::to_string(r.predicate)) + " " +
          graph::reference_object(node_for(scene.object(r.object_id), frame_index)) + ".";
      sentence[0] = 'T';
      text += " " + sentence;
    }
    obs.description = std::move(text);
  }
  return obs;
}

std::map<std::string, int> first_visible_frames(const Scene& scene,
                                                const std::vector<CameraPose>& trajectory) {
  std::map<std::string, int> out;
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    for (const auto& o : scene.objects) {
      if (!out.contains(o.id) && is_visible(trajectory[f], o.x, o.y)) {
        out[o.id] = static_cast<int>(f);
      }
    }
  }
  return out;
}

QuestionSet generate_questions(const Scene& scene, const std::vector<CameraPose>& trajectory,
                               const std::set<TaskType>& families, std::uint64_t seed,
                               const SimConfig& cfg) {
  GenContext g{scene, trajectory, cfg, first_visible_frames(scene, trajectory), {}};
  for (const auto& o : scene.objects) {
    if (g.first_seen.contains(o.id) && uniquely_referable(scene, o)) g.referable.push_back(&o);
  }

  using Generator = void (*)(GenContext&, Rng&, std::vector<StructuredQuestion>&);
  static const std::map<TaskType, Generator> kGenerators = {
      {TaskType::ObjectCount, gen_object_count},
      {TaskType::AbsoluteDistance, gen_absolute_distance},
      {TaskType::ObjectSize, gen_object_size},
      {TaskType::RoomSize, gen_room_size},
      {TaskType::RelativeDistance, gen_relative_distance},
      {TaskType::RelativeDirection, gen_relative_direction},
      {TaskType::RoutePlan, gen_route_plan},
      {TaskType::AppearanceOrder, gen_appearance_order},
  };

  QuestionSet out;
  for (TaskType t : kAllTaskTypes) {
    if (!families.contains(t)) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t) + 1));
    const auto before = out.questions.size();
    kGenerators.at(t)(g, rng, out.questions);
    if (out.questions.size() == before) {
      out.skipped.push_back(std::string(to_string(t)) + ": not enough suitable visible objects");
    }
  }
  return out;
}

Answer oracle_answer(const Scene& scene, const std::vector<CameraPose>& trajectory,
                     const StructuredQuestion& q, const SimConfig& cfg) {
  if (q.question_id.rfind(scene.scene_id + "-", 0) != 0) {
    throw ProvenanceError("question " + q.question_id + " was not generated from " + scene.scene_id);
  }
  auto target = [&](std::size_t i) -> const PlacedObject& {
    if (i >= q.explicit_targets.size()) {
      throw ProvenanceError("question " + q.question_id + " names too few objects");
    }
    return resolve_in_scene(scene, q.explicit_targets[i]);
  };

  switch (q.task_type) {
    case TaskType::ObjectCount: {
      if (q.explicit_targets.empty()) throw ProvenanceError("count question names no category");
      auto n = std::count_if(scene.objects.begin(), scene.objects.end(),
                             [&](const PlacedObject& o) { return ref_matches(o, q.explicit_targets[0]); });
      return Answer::number(static_cast<double>(n));
    }
    case TaskType::AbsoluteDistance:
      return Answer::number(centre_distance(target(0), target(1)), "m");
    case TaskType::ObjectSize: {
      const auto& o = target(0);
      return Answer::number(std::max({o.width, o.depth, o.height}), "m");
    }
    case TaskType::RoomSize:
      return Answer::number(scene.room.width * scene.room.depth, "m^2");
    case TaskType::RelativeDistance: {
      const auto& anchor = target(0);
      const bool farthest = q.variant == "farthest";
      std::size_t best = 1;
      double best_d = centre_distance(anchor, target(1));
      for (std::size_t i = 2; i < q.explicit_targets.size(); ++i) {
        const double d = centre_distance(anchor, target(i));
        if (farthest ? d > best_d : d < best_d) {
          best = i;
          best_d = d;
        }
      }
      if (best - 1 >= q.options.size()) throw ProvenanceError("option/target count mismatch");
      return Answer::choice(q.options[best - 1].letter);
    }
    case TaskType::RelativeDirection:
      return Answer::choice(
          letter_of(q.options, direction_label(target(0), target(1), target(2), q.variant == "4way")));
    case TaskType::RoutePlan: {
      auto plan = scene_route(scene, target(0), target(1), target(2), cfg);
      if (!plan) throw ProvenanceError("route goal unreachable in " + scene.scene_id);
      return Answer::choice(letter_of(q.options, route::join_actions(*plan)));
    }
    case TaskType::AppearanceOrder: {
      const auto first = first_visible_frames(scene, trajectory);
      std::vector<const PlacedObject*> objs;
      for (std::size_t i = 0; i < q.explicit_targets.size(); ++i) {
        const auto& o = target(i);
        if (!first.contains(o.id)) throw ProvenanceError(o.id + " is never visible");
        objs.push_back(&o);
      }
      std::sort(objs.begin(), objs.end(), [&](const auto* a, const auto* b) {
        return std::pair(first.at(a->id), a->id) < std::pair(first.at(b->id), b->id);
      });
      return Answer::choice(letter_of(q.options, join_labels(objs)));
    }
  }
  throw ProvenanceError("unhandled task type");
}

psa::SceneAnnotations annotations(const Scene& scene, const SimConfig& cfg) {
  psa::SceneAnnotations ann;
  ann.room_width = scene.room.width;
  ann.room_depth = scene.room.depth;
  ann.grid_cell = cfg.grid_cell;
  for (const auto& o : scene.objects) {
    ann.objects[o.id] = {o.x, o.y, o.width, o.depth, o.height};
  }
  return ann;
}

Episode simulate_episode(std::uint64_t seed, const SceneConfig& scene_config, const SimConfig& cfg,
                         const std::set<TaskType>& families) {
  Episode ep;
  ep.scene = generate_scene(seed, scene_config);
  ep.trajectory = generate_trajectory(ep.scene, derive_seed(seed, 101), cfg.n_frames, cfg);
  for (std::size_t f = 0; f < ep.trajectory.size(); ++f) {
    ep.observations.push_back(observe(ep.scene, ep.trajectory[f], static_cast<int>(f), cfg));
    if (f > 0) {
      ep.transitions.push_back(
          classify_transition(ep.trajectory[f - 1], ep.trajectory[f], static_cast<int>(f - 1), cfg));
    }
  }
  auto qs = generate_questions(ep.scene, ep.trajectory, families, derive_seed(seed, 202), cfg);
  ep.questions = std::move(qs.questions);
  ep.skipped = std::move(qs.skipped);
  return ep;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

Episode batch_item(std::uint64_t base_seed, int i, int min_objects, int max_objects,
                   const SceneConfig& scene_config, const SimConfig& cfg) {
  const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
  SceneConfig sc = scene_config;
  sc.n_objects = min_objects + static_cast<int>(seed % static_cast<std::uint64_t>(max_objects - min_objects + 1));
  // A crowded draw can be infeasible; retry deterministically with derived seeds.
  for (std::uint64_t attempt = 0;; ++attempt) {
    try {
      return simulate_episode(attempt == 0 ? seed : derive_seed(seed, attempt), sc, cfg);
    } catch (const GenerationError&) {
      if (attempt >= 16) throw;
    }
  }
}

}  // namespace

std::vector<Episode> simulate_batch_serial(std::uint64_t base_seed, int n_scenes, int min_objects,
                                           int max_objects, const SceneConfig& scene_config,
                                           const SimConfig& cfg) {
  if (min_objects < 1 || max_objects < min_objects) throw PreconditionError("bad object count range");
  std::vector<Episode> out;
  for (int i = 0; i < n_scenes; ++i) {
    out.push_back(batch_item(base_seed, i, min_objects, max_objects, scene_config, cfg));
  }
  return out;
}

std::vector<Episode> simulate_batch(std::uint64_t base_seed, int n_scenes, int min_objects,
                                    int max_objects, const SceneConfig& scene_config,
                                    const SimConfig& cfg) {
  if (min_objects < 1 || max_objects < min_objects) throw PreconditionError("bad object count range");
  std::vector<Episode> out(static_cast<std::size_t>(std::max(0, n_scenes)));
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_scenes; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          batch_item(base_seed, i, min_objects, max_objects, scene_config, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// --- JSON ----------------------------------------------------------------------

Json to_json(const Scene& s) {
  Json objects = Json::array();
  for (const auto& o : s.objects) {
    objects.push_back({{"id", o.id},
                       {"category", o.category},
                       {"attributes", o.attributes},
                       {"center", {o.x, o.y}},
                       {"footprint", {o.width, o.depth}},
                       {"height", o.height}});
  }
  return {{"scene_id", s.scene_id},
          {"seed", s.seed},
          {"room", {{"width", s.room.width}, {"depth", s.room.depth}, {"height", s.room.height}}},
          {"placed_objects", objects}};
}

Json to_json(const CameraPose& p) {
  return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"fov", p.fov}, {"range", p.range}};
}

Json to_json(const Episode& ep) {
  Json traj = Json::array();
  for (const auto& p : ep.trajectory) traj.push_back(to_json(p));
  Json obs = Json::array();
  for (const auto& o : ep.observations) obs.push_back(graph::to_json(o));
  Json trans = Json::array();
  for (const auto& t : ep.transitions) trans.push_back(graph::to_json(t));
  Json qs = Json::array();
  for (const auto& q : ep.questions) qs.push_back(egomind::to_json(q));
  return {{"scene_id", ep.scene.scene_id},
          {"seed", ep.scene.seed},
          {"scene", to_json(ep.scene)},
          {"trajectory", traj},
          {"observations", obs},
          {"transitions", trans},
          {"questions", qs},
          {"manifest", {{"skipped", ep.skipped}}}};
}

Scene scene_from_json(const Json& j) {
  Scene s;
  s.scene_id = j.at("scene_id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto& r = j.at("room");
  s.room = {r.at("width").get<double>(), r.at("depth").get<double>(), r.value("height", 3.0)};
  for (const auto& o : j.at("placed_objects")) {
    PlacedObject p;
    p.id = o.at("id").get<std::string>();
    p.category = o.at("category").get<std::string>();
    p.attributes = o.value("attributes", std::set<std::string>{});
    p.x = o.at("center").at(0).get<double>();
    p.y = o.at("center").at(1).get<double>();
    p.width = o.at("footprint").at(0).get<double>();
    p.depth = o.at("footprint").at(1).get<double>();
    p.height = o.at("height").get<double>();
    s.objects.push_back(std::move(p));
  }
  return s;
}

CameraPose pose_from_json(const Json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("heading").get<double>(),
          j.value("fov", kPi / 2), j.value("range", 4.0)};
}

Episode episode_from_json(const Json& j) {
  Episode ep;
  ep.scene = scene_from_json(j.at("scene"));
  for (const auto& p : j.at("trajectory")) ep.trajectory.push_back(pose_from_json(p));
  for (const auto& o : j.at("observations")) ep.observations.push_back(graph::observation_from_json(o));
  for (const auto& t : j.at("transitions")) ep.transitions.push_back(graph::transition_from_json(t));
  for (const auto& q : j.at("questions")) ep.questions.push_back(question_from_json(q));
  if (j.contains("manifest")) ep.skipped = j.at("manifest").value("skipped", std::vector<std::string>{});
  return ep;
}

}  // namespace egomind::sim
