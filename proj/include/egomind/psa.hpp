#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "egomind/question.hpp"
#include "egomind/scene_graph.hpp"

// Progressive spatial analysis over a merged scene graph: resolve the objects a
// question names, grow the candidate set through graph neighbourhoods, collect
// the relations and relational paths among candidates, and answer
// deterministically.
namespace egomind::psa {

using graph::GlobalSceneGraph;
using graph::ObjectId;

struct Config {
  int rounds = 2;
  int max_len = 4;
};

// Alternating object/relation sequence; edges[i] links vertices[i] to
// vertices[i + 1] and is reported from vertices[i]'s side.
struct RelationPath {
  std::vector<ObjectId> vertices;
  std::vector<graph::SpatialRelation> edges;

  std::size_t length() const { return edges.size(); }
  bool operator==(const RelationPath&) const = default;
};

struct TaskContext {
  std::vector<ObjectId> targets;
  std::set<ObjectId> candidates;
  std::vector<graph::SpatialRelation> relevant_relations;
  std::vector<RelationPath> paths;

  // Candidates that are not targets: the bridging anchors.
  std::set<ObjectId> implicit_objects() const;
  bool operator==(const TaskContext&) const = default;
};

// Metric ground truth attached by the simulator.
struct ObjectAnnotation {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double depth = 0.0;
  double height = 0.0;
};

struct SceneAnnotations {
  double room_width = 0.0;
  double room_depth = 0.0;
  double grid_cell = 0.5;
  std::map<ObjectId, ObjectAnnotation> objects;
};

// True when the node has the reference's category and carries every
// attribute the reference names.
bool matches(const graph::ObjectNode& node, const ObjectRef& ref);

// All graph objects matching ref, in id order.
std::vector<ObjectId> match_all(const GlobalSceneGraph& graph, const ObjectRef& ref);

// One id per explicit target, order preserved. Zero matches throw
// TargetNotFoundError, several throw AmbiguousTargetError.
std::vector<ObjectId> resolve_targets(const GlobalSceneGraph& graph,
                                      const StructuredQuestion& question);

std::set<ObjectId> expand_candidates(const GlobalSceneGraph& graph,
                                     const std::vector<ObjectId>& targets, int rounds);

// All simple paths src -> dst with at most max_len edges through candidates,
// shortest first, ties by vertex-id sequence.
std::vector<RelationPath> relation_paths(const GlobalSceneGraph& graph, const ObjectId& src,
                                         const ObjectId& dst,
                                         const std::set<ObjectId>& candidates, int max_len);

// object_count questions name a class, so every matching object becomes a
// target; all other families resolve each reference to exactly one object.
TaskContext build_task_context(const GlobalSceneGraph& graph, const StructuredQuestion& question,
                               const Config& config = {});

// Letter for multiple-choice families, number for numeric ones. Metric
// families need annotations and throw UnsupportedWithoutAnnotationsError
// without them.
Answer answer_from_graph(const GlobalSceneGraph& graph, const TaskContext& context,
                         const StructuredQuestion& question,
                         const SceneAnnotations* annotations = nullptr);

Json to_json(const TaskContext& context);

}  // namespace egomind::psa
