#pragma once

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace egomind::graph {

using ObjectId = std::string;
using Json = nlohmann::json;

// Closed relation vocabulary. Every predicate has an entry in the inverse table.
enum class Predicate {
  LeftOf,
  RightOf,
  InFrontOf,
  Behind,
  Above,
  Below,
  Near,
  FarFrom,
  On,
  Inside,
};

inline constexpr std::array<Predicate, 10> kAllPredicates = {
    Predicate::LeftOf, Predicate::RightOf, Predicate::InFrontOf, Predicate::Behind,
    Predicate::Above,  Predicate::Below,   Predicate::Near,      Predicate::FarFrom,
    Predicate::On,     Predicate::Inside,
};

std::string_view to_string(Predicate p);
Predicate predicate_from_string(std::string_view s);

// Predicate seen from the other endpoint: (a p b) is reported as (b inverse(p) a).
// `on` and `inside` have no converse in the vocabulary and map to `below` and
// `near` respectively.
Predicate inverse(Predicate p);

struct ObjectNode {
  ObjectId id;
  std::string category;
  std::set<std::string> attributes;
  int first_frame = 0;
  std::set<int> frames;

  bool operator==(const ObjectNode&) const = default;
};

struct Provenance {
  enum class Kind { IntraFrame, InterFrame };
  Kind kind = Kind::IntraFrame;
  int frame = -1;  // only meaningful for IntraFrame

  static Provenance intra(int frame) { return {Kind::IntraFrame, frame}; }
  static Provenance inter() { return {Kind::InterFrame, -1}; }
  bool operator==(const Provenance&) const = default;
};

struct SpatialRelation {
  ObjectId subject_id;
  Predicate predicate = Predicate::Near;
  ObjectId object_id;
  Provenance provenance;

  bool operator==(const SpatialRelation&) const = default;
};

enum class Translation {
  None,
  Forward,
  Backward,
  Left,
  Right,
  ForwardLeft,
  ForwardRight,
  BackwardLeft,
  BackwardRight,
};

enum class Rotation { None, TurnLeft, TurnRight, TurnAround };

std::string_view to_string(Translation t);
std::string_view to_string(Rotation r);
Translation translation_from_string(std::string_view s);
Rotation rotation_from_string(std::string_view s);

// First-person sentence for a discrete move, e.g. "I move forward, then I turn right."
std::string narrate_move(Translation t, Rotation r);

struct ViewpointTransition {
  int from_frame = 0;
  int to_frame = 1;
  Translation translation = Translation::None;
  Rotation rotation = Rotation::None;
  std::string narrative;

  bool operator==(const ViewpointTransition&) const = default;
};

struct FrameObservation {
  int frame_index = 0;
  std::vector<ObjectNode> objects;
  std::vector<SpatialRelation> relations;
  std::string description;

  bool operator==(const FrameObservation&) const = default;
};

struct GlobalSceneGraph {
  std::map<ObjectId, ObjectNode> objects;
  std::vector<SpatialRelation> relations;  // multiset, storage order = frame order
  std::vector<ViewpointTransition> transitions;
  int frame_count = 0;

  const ObjectNode& at(const ObjectId& id) const;
  bool contains(const ObjectId& id) const { return objects.contains(id); }
  bool operator==(const GlobalSceneGraph&) const = default;
};

// How per-frame objects are mapped onto graph nodes.
//  Attributes:  same category and identical attribute set => same node; the
//               k-th such object inside one frame maps to the k-th node of
//               that key, so same-frame duplicates stay distinct. Node ids
//               are assigned as "<category>#<n>".
//  GroundTruth: per-frame ids are already global (simulator mode).
enum class IdentityMode { Attributes, GroundTruth };

GlobalSceneGraph merge_observations(std::span<const FrameObservation> observations,
                                    std::span<const ViewpointTransition> transitions,
                                    IdentityMode mode = IdentityMode::Attributes);

// Per-frame decomposition of a graph, expressed with the graph's own ids.
// Re-merging the result reproduces the graph.
std::vector<FrameObservation> decompose(const GlobalSceneGraph& graph);

std::set<ObjectId> neighborhood(const GlobalSceneGraph& graph, const ObjectId& id);

// Undirected adjacency over all stored relations (duplicates collapsed).
std::map<ObjectId, std::set<ObjectId>> adjacency(const GlobalSceneGraph& graph);

// Stored relations with endpoints {a, b}, reported as (a, p, b).
std::vector<SpatialRelation> relations_between(const GlobalSceneGraph& graph,
                                               const ObjectId& a, const ObjectId& b);

// Per-frame descriptions where objects introduced earlier are referenced
// by id instead of being described again.
std::vector<std::string> normalize_narrative(const GlobalSceneGraph& graph,
                                             std::span<const FrameObservation> observations,
                                             IdentityMode mode = IdentityMode::Attributes);

// "a wooden table (table#1)"
std::string describe_object(const ObjectNode& node);
// "the table (table#1)"
std::string reference_object(const ObjectNode& node);

// Throws StructuralError if any graph invariant is violated.
void validate(const GlobalSceneGraph& graph);
void validate(const ViewpointTransition& t);

Json to_json(const ObjectNode& n);
Json to_json(const SpatialRelation& r);
Json to_json(const ViewpointTransition& t);
Json to_json(const FrameObservation& f);
Json to_json(const GlobalSceneGraph& g);

ObjectNode object_from_json(const Json& j);
SpatialRelation relation_from_json(const Json& j);
ViewpointTransition transition_from_json(const Json& j);
FrameObservation observation_from_json(const Json& j);
GlobalSceneGraph graph_from_json(const Json& j);

}  // namespace egomind::graph
