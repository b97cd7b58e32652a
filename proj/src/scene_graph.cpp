#include "egomind/scene_graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <tuple>
#include <utility>

#include "egomind/errors.hpp"

namespace egomind::graph {

namespace {

constexpr std::array<std::string_view, 10> kPredicateNames = {
    "left-of", "right-of", "in-front-of", "behind", "above",
    "below",   "near",     "far-from",    "on",     "inside",
};

constexpr std::array<std::string_view, 9> kTranslationNames = {
    "none",  "forward",      "backward",      "left",          "right",
    "forward-left", "forward-right", "backward-left", "backward-right",
};

constexpr std::array<std::string_view, 4> kRotationNames = {"none", "turn-left", "turn-right",
                                                           "turn-around"};

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view s, const std::array<std::string_view, N>& names,
               std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw StructuralError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

using Key = std::pair<std::string, std::set<std::string>>;

// Orders "chair#2" before "chair#10"; ids without a numeric suffix sort lexically.
struct NaturalIdLess {
  static std::tuple<std::string_view, long long, std::string_view> split(std::string_view id) {
    auto hash = id.rfind('#');
    if (hash != std::string_view::npos && hash + 1 < id.size()) {
      long long n = 0;
      auto tail = id.substr(hash + 1);
      auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), n);
      if (ec == std::errc{} && ptr == tail.data() + tail.size()) {
        return {id.substr(0, hash), n, {}};
      }
    }
    return {id, -1, id};
  }
  bool operator()(const ObjectId& a, const ObjectId& b) const { return split(a) < split(b); }
};

// Maps each frame's local object ids onto graph ids.
std::vector<std::map<ObjectId, ObjectId>> resolve_identities(
    std::span<const FrameObservation> observations, IdentityMode mode) {
  std::vector<std::map<ObjectId, ObjectId>> mapping(observations.size());
  std::map<Key, std::vector<ObjectId>> nodes_by_key;
  std::map<std::string, int> per_category;
  std::map<ObjectId, Key> ground_truth_keys;

  for (std::size_t f = 0; f < observations.size(); ++f) {
    const auto& obs = observations[f];
    std::map<Key, std::size_t> occurrence;
    for (const auto& obj : obs.objects) {
      if (mapping[f].contains(obj.id)) {
        throw StructuralError("frame " + std::to_string(f) + ": duplicate object id '" +
                              obj.id + "'");
      }
      Key key{obj.category, obj.attributes};
      if (mode == IdentityMode::GroundTruth) {
        auto [it, inserted] = ground_truth_keys.emplace(obj.id, key);
        if (!inserted && it->second != key) {
          throw StructuralError("object '" + obj.id +
                                "' changes category or attributes across frames");
        }
        mapping[f][obj.id] = obj.id;
        continue;
      }
      auto& nodes = nodes_by_key[key];
      std::size_t k = occurrence[key]++;
      if (k == nodes.size()) {
        nodes.push_back(obj.category + "#" + std::to_string(++per_category[obj.category]));
      }
      mapping[f][obj.id] = nodes[k];
    }
  }
  return mapping;
}

void check_frames(std::span<const FrameObservation> observations,
                  std::span<const ViewpointTransition> transitions) {
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (observations[i].frame_index != static_cast<int>(i)) {
      throw StructuralError("non-contiguous frame index: expected " + std::to_string(i) +
                            ", found " + std::to_string(observations[i].frame_index));
    }
  }
  std::size_t expected = observations.empty() ? 0 : observations.size() - 1;
  if (transitions.size() != expected) {
    throw StructuralError("transition count mismatch: " + std::to_string(transitions.size()) +
                          " transitions for " + std::to_string(observations.size()) +
                          " frames");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (transitions[i].from_frame != static_cast<int>(i)) {
      throw StructuralError("transition " + std::to_string(i) + " starts at frame " +
                            std::to_string(transitions[i].from_frame));
    }
    validate(transitions[i]);
  }
}

std::string article_for(std::string_view phrase) {
  if (!phrase.empty() && std::string_view("aeiou").find(static_cast<char>(
                             std::tolower(static_cast<unsigned char>(phrase.front())))) !=
                             std::string_view::npos) {
    return "an";
  }
  return "a";
}

std::string join(const std::vector<std::string>& parts, std::string_view last_sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? std::string(last_sep) : std::string(", ");
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(Predicate p) { return kPredicateNames[static_cast<std::size_t>(p)]; }

Predicate predicate_from_string(std::string_view s) {
  return enum_from<Predicate>(s, kPredicateNames, "predicate");
}

Predicate inverse(Predicate p) {
  switch (p) {
    case Predicate::LeftOf: return Predicate::RightOf;
    case Predicate::RightOf: return Predicate::LeftOf;
    case Predicate::InFrontOf: return Predicate::Behind;
    case Predicate::Behind: return Predicate::InFrontOf;
    case Predicate::Above: return Predicate::Below;
    case Predicate::Below: return Predicate::Above;
    case Predicate::Near: return Predicate::Near;
    case Predicate::FarFrom: return Predicate::FarFrom;
    case Predicate::On: return Predicate::Below;
    case Predicate::Inside: return Predicate::Near;
  }
  return p;
}

std::string_view to_string(Translation t) {
  return kTranslationNames[static_cast<std::size_t>(t)];
}
std::string_view to_string(Rotation r) { return kRotationNames[static_cast<std::size_t>(r)]; }

Translation translation_from_string(std::string_view s) {
  return enum_from<Translation>(s, kTranslationNames, "translation");
}
Rotation rotation_from_string(std::string_view s) {
  return enum_from<Rotation>(s, kRotationNames, "rotation");
}

std::string narrate_move(Translation t, Rotation r) {
  static constexpr std::array<std::string_view, 9> kMove = {
      "",
      "move forward",
      "move backward",
      "step to the left",
      "step to the right",
      "move forward and to the left",
      "move forward and to the right",
      "move backward and to the left",
      "move backward and to the right",
  };
  static constexpr std::array<std::string_view, 4> kTurn = {"", "turn left", "turn right",
                                                            "turn around"};
  std::string_view move = kMove[static_cast<std::size_t>(t)];
  std::string_view turn = kTurn[static_cast<std::size_t>(r)];
  if (move.empty() && turn.empty()) return "I stay where I am.";
  std::string out = "I ";
  out += move;
  if (!move.empty() && !turn.empty()) out += ", then I ";
  out += turn;
  out += ".";
  return out;
}

const ObjectNode& GlobalSceneGraph::at(const ObjectId& id) const {
  auto it = objects.find(id);
  if (it == objects.end()) throw LookupError("unknown object id '" + id + "'");
  return it->second;
}

void validate(const ViewpointTransition& t) {
  if (t.to_frame != t.from_frame + 1) {
    throw StructuralError("transition " + std::to_string(t.from_frame) + "->" +
                          std::to_string(t.to_frame) + " does not connect consecutive frames");
  }
  bool stay = t.translation == Translation::None && t.rotation == Rotation::None;
  if (!stay && t.narrative.empty()) {
    throw StructuralError("transition " + std::to_string(t.from_frame) +
                          " moves the camera but has no narrative");
  }
}

void validate(const GlobalSceneGraph& g) {
  std::size_t expected = g.frame_count <= 1 ? 0 : static_cast<std::size_t>(g.frame_count - 1);
  if (g.transitions.size() != expected) {
    throw StructuralError("graph has " + std::to_string(g.transitions.size()) +
                          " transitions for " + std::to_string(g.frame_count) + " frames");
  }
  for (std::size_t i = 0; i < g.transitions.size(); ++i) {
    if (g.transitions[i].from_frame != static_cast<int>(i)) {
      throw StructuralError("transition chain has a gap at frame " + std::to_string(i));
    }
    validate(g.transitions[i]);
  }
  for (const auto& [id, node] : g.objects) {
    if (id != node.id) throw StructuralError("object key '" + id + "' != node id '" + node.id + "'");
    if (node.frames.empty()) throw StructuralError("object '" + id + "' has no frames");
    if (*node.frames.begin() != node.first_frame) {
      throw StructuralError("object '" + id + "' first_frame is not min(frames)");
    }
    if (*node.frames.begin() < 0 || *node.frames.rbegin() >= g.frame_count) {
      throw StructuralError("object '" + id + "' observed outside [0, frame_count)");
    }
  }
  for (const auto& r : g.relations) {
    if (!g.contains(r.subject_id) || !g.contains(r.object_id)) {
      throw StructuralError("relation references unknown object (" + r.subject_id + ", " +
                            r.object_id + ")");
    }
    if (r.subject_id == r.object_id) {
      throw StructuralError("relation relates '" + r.subject_id + "' to itself");
    }
  }
}

GlobalSceneGraph merge_observations(std::span<const FrameObservation> observations,
                                    std::span<const ViewpointTransition> transitions,
                                    IdentityMode mode) {
  check_frames(observations, transitions);
  auto mapping = resolve_identities(observations, mode);

  GlobalSceneGraph g;
  g.frame_count = static_cast<int>(observations.size());
  g.transitions.assign(transitions.begin(), transitions.end());

  for (std::size_t f = 0; f < observations.size(); ++f) {
    const auto& obs = observations[f];
    const int frame = static_cast<int>(f);
    for (const auto& obj : obs.objects) {
      const ObjectId& gid = mapping[f].at(obj.id);
      auto [it, inserted] = g.objects.try_emplace(gid);
      if (inserted) {
        it->second = ObjectNode{gid, obj.category, obj.attributes, frame, {}};
      }
      it->second.frames.insert(frame);
    }
    for (const auto& rel : obs.relations) {
      auto s = mapping[f].find(rel.subject_id);
      auto o = mapping[f].find(rel.object_id);
      if (s == mapping[f].end() || o == mapping[f].end()) {
        throw StructuralError("frame " + std::to_string(f) +
                              ": relation references unknown object (" + rel.subject_id +
                              ", " + rel.object_id + ")");
      }
      if (s->second == o->second) {
        throw StructuralError("frame " + std::to_string(f) + ": relation relates '" +
                              rel.subject_id + "' to itself");
      }
      g.relations.push_back({s->second, rel.predicate, o->second, Provenance::intra(frame)});
    }
  }
  return g;
}

std::vector<FrameObservation> decompose(const GlobalSceneGraph& g) {
  std::vector<FrameObservation> out(static_cast<std::size_t>(g.frame_count));
  std::vector<ObjectId> ids;
  for (const auto& [id, _] : g.objects) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), NaturalIdLess{});

  for (std::size_t f = 0; f < out.size(); ++f) out[f].frame_index = static_cast<int>(f);
  for (const auto& id : ids) {
    const auto& node = g.objects.at(id);
    for (int f : node.frames) {
      out[static_cast<std::size_t>(f)].objects.push_back(
          ObjectNode{node.id, node.category, node.attributes, f, {f}});
    }
  }
  for (const auto& r : g.relations) {
    if (r.provenance.kind != Provenance::Kind::IntraFrame) continue;
    out[static_cast<std::size_t>(r.provenance.frame)].relations.push_back(r);
  }
  return out;
}

std::set<ObjectId> neighborhood(const GlobalSceneGraph& g, const ObjectId& id) {
  if (!g.contains(id)) throw LookupError("unknown object id '" + id + "'");
  std::set<ObjectId> out;
  for (const auto& r : g.relations) {
    if (r.subject_id == id) out.insert(r.object_id);
    if (r.object_id == id) out.insert(r.subject_id);
  }
  return out;
}

std::map<ObjectId, std::set<ObjectId>> adjacency(const GlobalSceneGraph& g) {
  std::map<ObjectId, std::set<ObjectId>> adj;
  for (const auto& [id, _] : g.objects) adj[id];
  for (const auto& r : g.relations) {
    adj[r.subject_id].insert(r.object_id);
    adj[r.object_id].insert(r.subject_id);
  }
  return adj;
}

std::vector<SpatialRelation> relations_between(const GlobalSceneGraph& g, const ObjectId& a,
                                               const ObjectId& b) {
  if (!g.contains(a)) throw LookupError("unknown object id '" + a + "'");
  if (!g.contains(b)) throw LookupError("unknown object id '" + b + "'");
  std::vector<SpatialRelation> out;
  for (const auto& r : g.relations) {
    if (r.subject_id == a && r.object_id == b) {
      out.push_back(r);
    } else if (r.subject_id == b && r.object_id == a) {
      out.push_back({a, inverse(r.predicate), b, r.provenance});
    }
  }
  return out;
}

std::string describe_object(const ObjectNode& node) {
  std::string phrase;
  for (const auto& attr : node.attributes) phrase += attr + " ";
  phrase += node.category;
  return article_for(phrase) + " " + phrase + " (" + node.id + ")";
}

std::string reference_object(const ObjectNode& node) {
  return "the " + node.category + " (" + node.id + ")";
}

std::vector<std::string> normalize_narrative(const GlobalSceneGraph& g,
                                             std::span<const FrameObservation> observations,
                                             IdentityMode mode) {
  auto mapping = resolve_identities(observations, mode);
  std::set<ObjectId> introduced;
  std::vector<std::string> out;
  out.reserve(observations.size());

  for (std::size_t f = 0; f < observations.size(); ++f) {
    const auto& obs = observations[f];
    std::vector<std::string> fresh;
    std::vector<std::string> seen;
    std::set<ObjectId> fresh_ids;
    for (const auto& obj : obs.objects) {
      const auto& node = g.at(mapping[f].at(obj.id));
      if (introduced.contains(node.id)) {
        seen.push_back(reference_object(node));
      } else if (fresh_ids.insert(node.id).second) {
        fresh.push_back(describe_object(node));
      }
    }
    introduced.insert(fresh_ids.begin(), fresh_ids.end());

    // Nothing was seen before: there is nothing to simplify.
    if (seen.empty() && !obs.description.empty()) {
      out.push_back(obs.description);
      continue;
    }

    std::string text;
    if (!fresh.empty()) text += "I see " + join(fresh, " and ") + ".";
    if (!seen.empty()) {
      if (!text.empty()) text += " ";
      text += "I can still see " + join(seen, " and ") + ".";
    }
    for (const auto& rel : obs.relations) {
      const auto& s = g.at(mapping[f].at(rel.subject_id));
      const auto& o = g.at(mapping[f].at(rel.object_id));
      std::string sentence = reference_object(s) + " is " + std::string(to_string(rel.predicate)) +
                             " " + reference_object(o) + ".";
      sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
      text += " " + sentence;
    }
    if (text.empty()) text = "I see nothing new.";
    out.push_back(std::move(text));
  }
  return out;
}

// --- JSON ------------------------------------------------------------------

Json to_json(const ObjectNode& n) {
  return Json{{"id", n.id},
              {"category", n.category},
              {"attributes", n.attributes},
              {"first_frame", n.first_frame},
              {"frames", n.frames}};
}

Json to_json(const SpatialRelation& r) {
  Json prov = r.provenance.kind == Provenance::Kind::IntraFrame
                  ? Json{{"kind", "intra-frame"}, {"frame", r.provenance.frame}}
                  : Json{{"kind", "inter-frame"}};
  return Json{{"subject_id", r.subject_id},
              {"predicate", to_string(r.predicate)},
              {"object_id", r.object_id},
              {"provenance", prov}};
}

Json to_json(const ViewpointTransition& t) {
  return Json{{"from_frame", t.from_frame},
              {"to_frame", t.to_frame},
              {"translation", to_string(t.translation)},
              {"rotation", to_string(t.rotation)},
              {"narrative", t.narrative}};
}

Json to_json(const FrameObservation& f) {
  Json objects = Json::array();
  for (const auto& o : f.objects) objects.push_back(to_json(o));
  Json relations = Json::array();
  for (const auto& r : f.relations) relations.push_back(to_json(r));
  return Json{{"frame_index", f.frame_index},
              {"objects", objects},
              {"relations", relations},
              {"description", f.description}};
}

Json to_json(const GlobalSceneGraph& g) {
  Json objects = Json::array();
  for (const auto& [_, o] : g.objects) objects.push_back(to_json(o));
  Json relations = Json::array();
  for (const auto& r : g.relations) relations.push_back(to_json(r));
  Json transitions = Json::array();
  for (const auto& t : g.transitions) transitions.push_back(to_json(t));
  return Json{{"objects", objects},
              {"relations", relations},
              {"transitions", transitions},
              {"frame_count", g.frame_count}};
}

ObjectNode object_from_json(const Json& j) {
  ObjectNode n;
  n.id = j.at("id").get<std::string>();
  n.category = j.at("category").get<std::string>();
  n.attributes = j.value("attributes", std::set<std::string>{});
  n.first_frame = j.value("first_frame", 0);
  n.frames = j.value("frames", std::set<int>{});
  return n;
}

SpatialRelation relation_from_json(const Json& j) {
  SpatialRelation r;
  r.subject_id = j.at("subject_id").get<std::string>();
  r.predicate = predicate_from_string(j.at("predicate").get<std::string>());
  r.object_id = j.at("object_id").get<std::string>();
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    if (p.at("kind").get<std::string>() == "inter-frame") {
      r.provenance = Provenance::inter();
    } else {
      r.provenance = Provenance::intra(p.at("frame").get<int>());
    }
  }
  return r;
}

ViewpointTransition transition_from_json(const Json& j) {
  return ViewpointTransition{j.at("from_frame").get<int>(), j.at("to_frame").get<int>(),
                             translation_from_string(j.at("translation").get<std::string>()),
                             rotation_from_string(j.at("rotation").get<std::string>()),
                             j.value("narrative", std::string{})};
}

FrameObservation observation_from_json(const Json& j) {
  FrameObservation f;
  f.frame_index = j.at("frame_index").get<int>();
  for (const auto& o : j.at("objects")) f.objects.push_back(object_from_json(o));
  for (const auto& r : j.value("relations", Json::array())) {
    auto rel = relation_from_json(r);
    if (!r.contains("provenance")) rel.provenance = Provenance::intra(f.frame_index);
    f.relations.push_back(std::move(rel));
  }
  f.description = j.value("description", std::string{});
  return f;
}

GlobalSceneGraph graph_from_json(const Json& j) {
  GlobalSceneGraph g;
  for (const auto& o : j.at("objects")) {
    auto node = object_from_json(o);
    auto id = node.id;
    if (!g.objects.emplace(id, std::move(node)).second) {
      throw StructuralError("duplicate object id '" + id + "' in graph document");
    }
  }
  for (const auto& r : j.at("relations")) g.relations.push_back(relation_from_json(r));
  for (const auto& t : j.at("transitions")) g.transitions.push_back(transition_from_json(t));
  g.frame_count = j.at("frame_count").get<int>();
  validate(g);
  return g;
}

}  // namespace egomind::graph
