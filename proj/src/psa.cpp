#include "egomind/psa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egomind/errors.hpp"
#include "egomind/route.hpp"

namespace egomind::psa {

namespace {

const ObjectAnnotation& annotation_for(const SceneAnnotations& ann, const ObjectId& id) {
  auto it = ann.objects.find(id);
  if (it == ann.objects.end()) {
    throw UnsupportedWithoutAnnotationsError("no annotation for object '" + id + "'");
  }
  return it->second;
}

double centre_distance(const ObjectAnnotation& a, const ObjectAnnotation& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

char letter_for_text(const StructuredQuestion& q, const std::string& text) {
  for (const auto& o : q.options) {
    if (o.text == text) return o.letter;
  }
  throw PreconditionError("question " + q.question_id + ": no option reads '" + text + "'");
}

void require_targets(const TaskContext& ctx, std::size_t n, const StructuredQuestion& q) {
  if (ctx.targets.size() < n) {
    throw PreconditionError("question " + q.question_id + " needs " + std::to_string(n) +
                            " resolved targets");
  }
}

}  // namespace

std::set<ObjectId> TaskContext::implicit_objects() const {
  std::set<ObjectId> out = candidates;
  for (const auto& t : targets) out.erase(t);
  return out;
}

bool matches(const graph::ObjectNode& node, const ObjectRef& ref) {
  return node.category == ref.category &&
         std::includes(node.attributes.begin(), node.attributes.end(), ref.attributes.begin(),
                       ref.attributes.end());
}

std::vector<ObjectId> match_all(const GlobalSceneGraph& graph, const ObjectRef& ref) {
  std::vector<ObjectId> out;
  for (const auto& [id, node] : graph.objects) {
    if (matches(node, ref)) out.push_back(id);
  }
  return out;
}

std::vector<ObjectId> resolve_targets(const GlobalSceneGraph& graph,
                                      const StructuredQuestion& question) {
  if (graph.objects.empty()) throw PreconditionError("cannot resolve targets on an empty graph");
  std::vector<ObjectId> out;
  for (const auto& ref : question.explicit_targets) {
    auto found = match_all(graph, ref);
    if (found.empty()) throw TargetNotFoundError("no object matches '" + ref.label() + "'");
    if (found.size() > 1) {
      std::string list;
      for (const auto& id : found) list += (list.empty() ? "" : ", ") + id;
      throw AmbiguousTargetError("'" + ref.label() + "' matches several objects: " + list);
    }
    out.push_back(found.front());
  }
  return out;
}

std::set<ObjectId> expand_candidates(const GlobalSceneGraph& graph,
                                     const std::vector<ObjectId>& targets, int rounds) {
  if (rounds < 0) throw PreconditionError("rounds must be non-negative");
  for (const auto& t : targets) {
    if (!graph.contains(t)) throw LookupError("unknown object id '" + t + "'");
  }
  const auto adj = graph::adjacency(graph);
  std::set<ObjectId> current(targets.begin(), targets.end());
  std::vector<ObjectId> frontier(current.begin(), current.end());
  for (int r = 0; r < rounds && !frontier.empty(); ++r) {
    std::vector<ObjectId> next;
    for (const auto& id : frontier) {
      for (const auto& nb : adj.at(id)) {
        if (current.insert(nb).second) next.push_back(nb);
      }
    }
    frontier = std::move(next);
  }
  return current;
}

std::vector<RelationPath> relation_paths(const GlobalSceneGraph& graph, const ObjectId& src,
                                         const ObjectId& dst,
                                         const std::set<ObjectId>& candidates, int max_len) {
  if (max_len < 1) throw PreconditionError("max_len must be at least 1");
  if (!candidates.contains(src) || !candidates.contains(dst)) {
    throw PreconditionError("path endpoints must lie in the candidate set");
  }
  if (src == dst) return {RelationPath{{src}, {}}};

  const auto adj = graph::adjacency(graph);
  std::vector<std::vector<ObjectId>> found;
  std::vector<ObjectId> stack{src};
  std::set<ObjectId> on_path{src};

  auto dfs = [&](auto&& self, const ObjectId& at) -> void {
    if (at == dst) {
      found.push_back(stack);
      return;
    }
    if (static_cast<int>(stack.size()) - 1 >= max_len) return;
    for (const auto& nb : adj.at(at)) {
      if (!candidates.contains(nb) || on_path.contains(nb)) continue;
      stack.push_back(nb);
      on_path.insert(nb);
      self(self, nb);
      on_path.erase(nb);
      stack.pop_back();
    }
  };
  dfs(dfs, src);

  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });

  std::vector<RelationPath> out;
  out.reserve(found.size());
  for (auto& vertices : found) {
    RelationPath path;
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
      path.edges.push_back(graph::relations_between(graph, vertices[i], vertices[i + 1]).front());
    }
    path.vertices = std::move(vertices);
    out.push_back(std::move(path));
  }
  return out;
}

TaskContext build_task_context(const GlobalSceneGraph& graph, const StructuredQuestion& question,
                               const Config& config) {
  TaskContext ctx;
  if (question.task_type == TaskType::ObjectCount) {
    for (const auto& ref : question.explicit_targets) {
      auto found = match_all(graph, ref);
      if (found.empty()) throw TargetNotFoundError("no object matches '" + ref.label() + "'");
      ctx.targets.insert(ctx.targets.end(), found.begin(), found.end());
    }
  } else {
    ctx.targets = resolve_targets(graph, question);
  }
  ctx.candidates = expand_candidates(graph, ctx.targets, config.rounds);
  for (const auto& r : graph.relations) {
    if (ctx.candidates.contains(r.subject_id) && ctx.candidates.contains(r.object_id)) {
      ctx.relevant_relations.push_back(r);
    }
  }
  for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
    for (std::size_t j = 0; j < ctx.targets.size(); ++j) {
      if (i == j || ctx.targets[i] == ctx.targets[j]) continue;
      auto paths = relation_paths(graph, ctx.targets[i], ctx.targets[j], ctx.candidates,
                                  config.max_len);
      std::move(paths.begin(), paths.end(), std::back_inserter(ctx.paths));
    }
  }
  return ctx;
}

Answer answer_from_graph(const GlobalSceneGraph& graph, const TaskContext& ctx,
                         const StructuredQuestion& q, const SceneAnnotations* ann) {
  auto need_annotations = [&]() -> const SceneAnnotations& {
    if (ann == nullptr) {
      throw UnsupportedWithoutAnnotationsError(std::string(to_string(q.task_type)) +
                                               " needs metric scene annotations");
    }
    return *ann;
  };

  switch (q.task_type) {
    case TaskType::ObjectCount: {
      if (q.explicit_targets.empty()) throw PreconditionError("count question names no object");
      return Answer::number(static_cast<double>(match_all(graph, q.explicit_targets[0]).size()));
    }
    case TaskType::AppearanceOrder: {
      require_targets(ctx, q.explicit_targets.size(), q);
      std::vector<std::size_t> idx(q.explicit_targets.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& na = graph.at(ctx.targets[a]);
        const auto& nb = graph.at(ctx.targets[b]);
        return std::tie(na.first_frame, na.id) < std::tie(nb.first_frame, nb.id);
      });
      std::string text;
      for (std::size_t i : idx) text += (text.empty() ? "" : ", ") + q.explicit_targets[i].label();
      return Answer::choice(letter_for_text(q, text));
    }
    case TaskType::RelativeDistance: {
      const auto& a = need_annotations();
      require_targets(ctx, 2, q);
      const auto& anchor = annotation_for(a, ctx.targets[0]);
      const bool farthest = q.variant == "farthest";
      std::size_t best = 1;
      for (std::size_t i = 2; i < ctx.targets.size(); ++i) {
        double di = centre_distance(anchor, annotation_for(a, ctx.targets[i]));
        double db = centre_distance(anchor, annotation_for(a, ctx.targets[best]));
        bool better = farthest ? di > db : di < db;
        if (better || (di == db && ctx.targets[i] < ctx.targets[best])) best = i;
      }
      if (best - 1 >= q.options.size()) throw PreconditionError("option/target count mismatch");
      return Answer::choice(q.options[best - 1].letter);
    }
    case TaskType::RelativeDirection: {
      const auto& a = need_annotations();
      require_targets(ctx, 3, q);
      const auto& from = annotation_for(a, ctx.targets[0]);
      const auto& facing = annotation_for(a, ctx.targets[1]);
      const auto& query = annotation_for(a, ctx.targets[2]);
      double fx = facing.x - from.x, fy = facing.y - from.y;
      double qx = query.x - from.x, qy = query.y - from.y;
      double cross = fx * qy - fy * qx;
      double dot = fx * qx + fy * qy;
      std::string side = cross > 0 ? "left" : "right";
      std::string text = q.variant == "4way" ? (dot > 0 ? "front-" : "back-") + side : side;
      return Answer::choice(letter_for_text(q, text));
    }
    case TaskType::RoutePlan: {
      const auto& a = need_annotations();
      require_targets(ctx, 3, q);
      route::RouteRequest req;
      req.room_width = a.room_width;
      req.room_depth = a.room_depth;
      req.cell = a.grid_cell;
      for (const auto& [id, o] : a.objects) {
        if (id == ctx.targets[0] || id == ctx.targets[2]) continue;
        req.obstacles.push_back({o.x, o.y, o.width, o.depth});
      }
      const auto& s = annotation_for(a, ctx.targets[0]);
      const auto& f = annotation_for(a, ctx.targets[1]);
      const auto& g = annotation_for(a, ctx.targets[2]);
      req.start = {s.x, s.y};
      req.facing = {f.x, f.y};
      req.goal = {g.x, g.y};
      auto plan = route::plan_route(req);
      if (!plan) throw PreconditionError("question " + q.question_id + ": goal unreachable");
      return Answer::choice(letter_for_text(q, route::join_actions(*plan)));
    }
    case TaskType::AbsoluteDistance: {
      const auto& a = need_annotations();
      require_targets(ctx, 2, q);
      return Answer::number(
          centre_distance(annotation_for(a, ctx.targets[0]), annotation_for(a, ctx.targets[1])),
          "m");
    }
    case TaskType::ObjectSize: {
      const auto& a = need_annotations();
      require_targets(ctx, 1, q);
      const auto& o = annotation_for(a, ctx.targets[0]);
      return Answer::number(std::max({o.width, o.depth, o.height}), "m");
    }
    case TaskType::RoomSize: {
      const auto& a = need_annotations();
      return Answer::number(a.room_width * a.room_depth, "m^2");
    }
  }
  throw PreconditionError("unhandled task type");
}

Json to_json(const TaskContext& ctx) {
  Json relations = Json::array();
  for (const auto& r : ctx.relevant_relations) relations.push_back(graph::to_json(r));
  Json paths = Json::array();
  for (const auto& p : ctx.paths) {
    Json edges = Json::array();
    for (const auto& e : p.edges) edges.push_back(graph::to_json(e));
    paths.push_back(Json{{"vertices", p.vertices}, {"edges", edges}});
  }
  return Json{{"targets", ctx.targets},
              {"candidates", ctx.candidates},
              {"relevant_relations", relations},
              {"paths", paths}};
}

}  // namespace egomind::psa
