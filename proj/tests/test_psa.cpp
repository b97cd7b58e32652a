#include <doctest.h>

#include <algorithm>

#include "egomind/errors.hpp"
#include "egomind/psa.hpp"
#include "support.hpp"

using namespace egomind;
using namespace egomind::psa;
using graph::Predicate;
using egomind::testing::Gen;
using egomind::testing::node;
using egomind::testing::rel;
using egomind::testing::single_frame;

namespace {

GlobalSceneGraph chain() {
  return single_frame({node("a", "chair"), node("b", "table"), node("c", "lamp")},
                      {rel("a", Predicate::Near, "b"), rel("b", Predicate::LeftOf, "c")});
}

StructuredQuestion question(TaskType t, std::vector<ObjectRef> targets,
                            std::vector<std::string> options = {}, std::string variant = {}) {
  StructuredQuestion q;
  q.question_id = "q";
  q.task_type = t;
  q.explicit_targets = std::move(targets);
  char letter = 'A';
  for (auto& o : options) q.options.push_back({letter++, o});
  q.variant = std::move(variant);
  q.text = "?";
  return q;
}

// Every simple path src -> dst inside candidates with at most max_len edges,
// by brute-force enumeration of vertex sequences.
std::vector<std::vector<ObjectId>> brute_paths(const GlobalSceneGraph& g, const ObjectId& src,
                                               const ObjectId& dst,
                                               const std::set<ObjectId>& cand, int max_len) {
  std::vector<ObjectId> others;
  for (const auto& c : cand)
    if (c != src && c != dst) others.push_back(c);
  std::vector<std::vector<ObjectId>> out;
  const std::size_t n = others.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<ObjectId> mid;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) mid.push_back(others[i]);
    if (static_cast<int>(mid.size()) + 1 > max_len) continue;
    std::sort(mid.begin(), mid.end());
    do {
      std::vector<ObjectId> seq{src};
      seq.insert(seq.end(), mid.begin(), mid.end());
      seq.push_back(dst);
      bool ok = true;
      for (std::size_t i = 0; ok && i + 1 < seq.size(); ++i)
        ok = !graph::relations_between(g, seq[i], seq[i + 1]).empty();
      if (ok) out.push_back(seq);
    } while (std::next_permutation(mid.begin(), mid.end()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return out;
}

std::set<ObjectId> brute_expand(const GlobalSceneGraph& g, std::set<ObjectId> s, int rounds) {
  for (int r = 0; r < rounds; ++r) {
    auto next = s;
    for (const auto& rl : g.relations) {
      if (s.contains(rl.subject_id)) next.insert(rl.object_id);
      if (s.contains(rl.object_id)) next.insert(rl.subject_id);
    }
    s = next;
  }
  return s;
}

GlobalSceneGraph random_graph(Gen& gen, int n) {
  std::vector<graph::ObjectNode> objs;
  for (int i = 0; i < n; ++i) objs.push_back(node(std::string(1, char('a' + i)), "thing"));
  std::vector<graph::SpatialRelation> rels;
  for (int k = gen.integer(0, n + 2); k > 0; --k) {
    int a = gen.integer(0, n - 1), b = gen.integer(0, n - 1);
    if (a != b) rels.push_back(rel(objs[a].id, graph::kAllPredicates[gen.integer(0, 9)], objs[b].id));
  }
  return single_frame(objs, rels);
}

}  // namespace

TEST_CASE("resolve_targets") {
  auto g = single_frame({node("table#1", "table", {"wooden"}), node("chair#1", "chair"),
                         node("chair#2", "chair")},
                        {});
  auto q = question(TaskType::ObjectSize, {{"table", {"wooden"}}});
  CHECK(resolve_targets(g, q) == std::vector<ObjectId>{"table#1"});
  CHECK_THROWS_AS(resolve_targets(g, question(TaskType::ObjectSize, {{"chair", {}}})),
                  AmbiguousTargetError);
  CHECK_THROWS_AS(resolve_targets(g, question(TaskType::ObjectSize, {{"piano", {}}})),
                  TargetNotFoundError);
  // an attribute the reference names must be present
  CHECK_THROWS_AS(resolve_targets(g, question(TaskType::ObjectSize, {{"table", {"red"}}})),
                  TargetNotFoundError);
  try {
    resolve_targets(g, question(TaskType::ObjectSize, {{"chair", {}}}));
  } catch (const AmbiguousTargetError& e) {
    std::string msg = e.what();
    CHECK(msg.find("chair#1") != std::string::npos);
    CHECK(msg.find("chair#2") != std::string::npos);
  }
}

TEST_CASE("expand_candidates") {
  auto g = chain();
  CHECK(expand_candidates(g, {"a"}, 0) == std::set<ObjectId>{"a"});
  CHECK(expand_candidates(g, {"a"}, 1) == std::set<ObjectId>{"a", "b"});
  CHECK(expand_candidates(g, {"a"}, 2) == std::set<ObjectId>{"a", "b", "c"});
  CHECK_THROWS_AS(expand_candidates(g, {"zz"}, 1), LookupError);
}

TEST_CASE("relation_paths") {
  auto g = chain();
  std::set<ObjectId> all{"a", "b", "c"};
  auto self = relation_paths(g, "a", "a", all, 2);
  REQUIRE(self.size() == 1);
  CHECK(self[0].length() == 0);

  auto p = relation_paths(g, "a", "c", all, 2);
  REQUIRE(p.size() == 1);
  CHECK(p[0].vertices == std::vector<ObjectId>{"a", "b", "c"});
  CHECK(p[0].edges[0].subject_id == "a");
  CHECK(p[0].edges[1].predicate == Predicate::LeftOf);

  CHECK(relation_paths(g, "a", "c", all, 1).empty());
  auto split = single_frame({node("a", "x"), node("b", "y")}, {});
  CHECK(relation_paths(split, "a", "b", {"a", "b"}, 4).empty());
  CHECK_THROWS_AS(relation_paths(g, "a", "c", {"a", "b"}, 2), PreconditionError);
  CHECK_THROWS_AS(relation_paths(g, "a", "b", all, 0), PreconditionError);
}

TEST_CASE("build_task_context") {
  auto g = single_frame({node("chair#1", "chair"), node("table#1", "table"), node("lamp#1", "lamp"),
                         node("sofa#1", "sofa"), node("bed#1", "bed")},
                        {rel("chair#1", Predicate::Near, "table#1"),
                         rel("table#1", Predicate::LeftOf, "lamp#1"),
                         rel("sofa#1", Predicate::Behind, "bed#1")});
  Config one{1, 4};
  auto count = build_task_context(g, question(TaskType::ObjectCount, {{"chair", {}}}), one);
  CHECK(count.candidates == std::set<ObjectId>{"chair#1", "table#1"});
  CHECK(count.implicit_objects() == std::set<ObjectId>{"table#1"});

  auto split = build_task_context(
      g, question(TaskType::AbsoluteDistance, {{"chair", {}}, {"sofa", {}}}), one);
  CHECK(split.paths.empty());
  CHECK(split.relevant_relations.size() == 2);
  for (const auto& r : split.relevant_relations) {
    CHECK(split.candidates.contains(r.subject_id));
    CHECK(split.candidates.contains(r.object_id));
  }

  auto lone = build_task_context(g, question(TaskType::ObjectSize, {{"lamp", {}}}), Config{0, 4});
  CHECK(lone.candidates == std::set<ObjectId>{"lamp#1"});
  CHECK(lone.relevant_relations.empty());

  auto bridged = build_task_context(
      g, question(TaskType::AbsoluteDistance, {{"chair", {}}, {"lamp", {}}}), Config{2, 4});
  REQUIRE(bridged.paths.size() == 2);  // both directions
  CHECK(bridged.paths[0].vertices == std::vector<ObjectId>{"chair#1", "table#1", "lamp#1"});
  CHECK(to_json(bridged).dump() == to_json(bridged).dump());

  CHECK_THROWS_AS(build_task_context(g, question(TaskType::ObjectSize, {{"piano", {}}})),
                  TargetNotFoundError);
}

TEST_CASE("answer_from_graph: qualitative families") {
  auto g = single_frame({node("chair#1", "chair"), node("chair#2", "chair"), node("chair#3", "chair"),
                         node("table#1", "table")},
                        {});
  auto q = question(TaskType::ObjectCount, {{"chair", {}}});
  auto a = answer_from_graph(g, build_task_context(g, q), q);
  CHECK(a.kind == Answer::Kind::Number);
  CHECK(a.value == 3.0);

  std::vector<graph::FrameObservation> obs;
  for (int i = 0; i < 8; ++i) {
    graph::FrameObservation fr;
    fr.frame_index = i;
    fr.description = "f";
    auto add = [&](const char* id, const char* cat) {
      fr.objects.push_back(node(id, cat, {}, i));
    };
    if (i == 4) add("sofa#1", "sofa");
    if (i == 1) add("lamp#1", "lamp");
    if (i == 7) add("bed#1", "bed");
    obs.push_back(fr);
  }
  std::vector<graph::ViewpointTransition> tr;
  for (int i = 0; i < 7; ++i) tr.push_back({i, i + 1, graph::Translation::None, graph::Rotation::None, ""});
  auto g2 = graph::merge_observations(obs, tr, graph::IdentityMode::GroundTruth);
  auto order = question(TaskType::AppearanceOrder, {{"sofa", {}}, {"lamp", {}}, {"bed", {}}},
                        {"sofa, lamp, bed", "bed, lamp, sofa", "lamp, sofa, bed", "lamp, bed, sofa"});
  auto ans = answer_from_graph(g2, build_task_context(g2, order), order);
  CHECK(ans == Answer::choice('C'));
}

TEST_CASE("answer_from_graph: metric families need annotations") {
  auto g = single_frame({node("a#1", "a"), node("b#1", "b"), node("c#1", "c")}, {});
  auto q = question(TaskType::RelativeDirection, {{"a", {}}, {"b", {}}, {"c", {}}}, {"left", "right"},
                    "2way");
  auto ctx = build_task_context(g, q);
  CHECK_THROWS_AS(answer_from_graph(g, ctx, q), UnsupportedWithoutAnnotationsError);

  SceneAnnotations ann;
  ann.room_width = 6;
  ann.room_depth = 5;
  ann.objects["a#1"] = {1, 1, 0.2, 0.2, 1};
  ann.objects["b#1"] = {4, 1, 0.2, 0.2, 1};
  ann.objects["c#1"] = {2, 3, 0.2, 0.2, 1};  // cross((3,0),(1,2)) = 6 > 0
  CHECK(answer_from_graph(g, ctx, q, &ann) == Answer::choice('A'));
  ann.objects["c#1"] = {2, -1, 0.2, 0.2, 1};
  CHECK(answer_from_graph(g, ctx, q, &ann) == Answer::choice('B'));

  auto q4 = question(TaskType::RelativeDirection, {{"a", {}}, {"b", {}}, {"c", {}}},
                     {"front-left", "front-right", "back-left", "back-right"}, "4way");
  ann.objects["c#1"] = {0, 2, 0.2, 0.2, 1};
  CHECK(answer_from_graph(g, build_task_context(g, q4), q4, &ann) == Answer::choice('C'));

  auto dist = question(TaskType::AbsoluteDistance, {{"a", {}}, {"b", {}}});
  ann.objects["a#1"] = {0, 0, 0.2, 0.2, 1};
  ann.objects["b#1"] = {3, 4, 0.2, 0.2, 1};
  auto d = answer_from_graph(g, build_task_context(g, dist), dist, &ann);
  CHECK(d.value == doctest::Approx(5.0).epsilon(1e-12));

  auto room = question(TaskType::RoomSize, {});
  CHECK(answer_from_graph(g, build_task_context(g, room), room, &ann).value == 30.0);

  auto rd = question(TaskType::RelativeDistance, {{"a", {}}, {"b", {}}, {"c", {}}}, {"b", "c"},
                     "closest");
  ann.objects["c#1"] = {1, 1, 0.2, 0.2, 1};
  CHECK(answer_from_graph(g, build_task_context(g, rd), rd, &ann) == Answer::choice('B'));
  rd.variant = "farthest";
  CHECK(answer_from_graph(g, build_task_context(g, rd), rd, &ann) == Answer::choice('A'));
}

TEST_CASE("property: expansion and path search against brute force") {
  Gen gen(5);
  for (int trial = 0; trial < 400; ++trial) {
    INFO("trial " << trial);
    const int n = gen.integer(1, 6);
    auto g = random_graph(gen, n);
    ObjectId t = std::string(1, char('a' + gen.integer(0, n - 1)));
    std::set<ObjectId> prev;
    for (int r = 0; r <= n + 1; ++r) {
      auto s = expand_candidates(g, {t}, r);
      CHECK(s == brute_expand(g, {t}, r));
      CHECK(std::includes(s.begin(), s.end(), prev.begin(), prev.end()));
      if (s == prev) CHECK(expand_candidates(g, {t}, r + 1) == s);
      prev = s;
    }
    ObjectId u = std::string(1, char('a' + gen.integer(0, n - 1)));
    if (u == t) continue;
    std::set<ObjectId> cand;
    for (const auto& [id, _] : g.objects)
      if (id == t || id == u || gen.chance(0.7)) cand.insert(id);
    const int max_len = gen.integer(1, 5);
    auto paths = relation_paths(g, t, u, cand, max_len);
    auto expect = brute_paths(g, t, u, cand, max_len);
    REQUIRE(paths.size() == expect.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      CHECK(paths[i].vertices == expect[i]);
      for (std::size_t e = 0; e < paths[i].edges.size(); ++e) {
        const auto& edge = paths[i].edges[e];
        CHECK(edge.subject_id == paths[i].vertices[e]);
        CHECK(edge.object_id == paths[i].vertices[e + 1]);
        CHECK(cand.contains(edge.subject_id));
        auto stored = graph::relations_between(g, edge.subject_id, edge.object_id);
        CHECK(std::find(stored.begin(), stored.end(), edge) != stored.end());
      }
    }
  }
}
