#include <doctest.h>

#include <algorithm>
#include <map>

#include "egomind/errors.hpp"
#include "egomind/scene_graph.hpp"
#include "support.hpp"

using namespace egomind;
using namespace egomind::graph;
using egomind::testing::Gen;
using egomind::testing::node;
using egomind::testing::rel;
using egomind::testing::single_frame;

namespace {

FrameObservation frame(int index, std::vector<ObjectNode> objects,
                       std::vector<SpatialRelation> relations = {}, std::string text = "f") {
  for (auto& o : objects) {
    o.first_frame = index;
    o.frames = {index};
  }
  for (auto& r : relations) r.provenance = Provenance::intra(index);
  return {index, std::move(objects), std::move(relations), std::move(text)};
}

ViewpointTransition stay(int from) { return {from, from + 1, Translation::None, Rotation::None, ""}; }

// Expected node count under attribute identity: for each (category,
// attributes) key, the largest number of copies seen in one frame.
std::size_t expected_classes(const std::vector<FrameObservation>& obs) {
  std::map<std::pair<std::string, std::set<std::string>>, int> best;
  for (const auto& f : obs) {
    std::map<std::pair<std::string, std::set<std::string>>, int> here;
    for (const auto& o : f.objects) ++here[{o.category, o.attributes}];
    for (const auto& [k, n] : here) best[k] = std::max(best[k], n);
  }
  std::size_t total = 0;
  for (const auto& [k, n] : best) total += static_cast<std::size_t>(n);
  return total;
}

std::vector<FrameObservation> random_frames(Gen& g) {
  static const std::vector<std::string> cats = {"chair", "table", "lamp"};
  static const std::vector<std::set<std::string>> attrs = {{}, {"red"}, {"wooden"}};
  const int n_frames = g.integer(1, 5);
  std::vector<FrameObservation> obs;
  for (int f = 0; f < n_frames; ++f) {
    std::vector<ObjectNode> objs;
    const int n = g.integer(0, 4);
    for (int i = 0; i < n; ++i)
      objs.push_back(node("o" + std::to_string(i), g.pick(cats), g.pick(attrs)));
    std::vector<SpatialRelation> rels;
    if (n >= 2) {
      for (int k = g.integer(0, 3); k > 0; --k) {
        int a = g.integer(0, n - 1), b = g.integer(0, n - 1);
        if (a == b) continue;
        rels.push_back(rel(objs[a].id, kAllPredicates[g.integer(0, 9)], objs[b].id));
      }
    }
    obs.push_back(frame(f, objs, rels));
  }
  return obs;
}

std::vector<ViewpointTransition> stays(std::size_t frames) {
  std::vector<ViewpointTransition> t;
  for (std::size_t i = 0; i + 1 < frames; ++i) t.push_back(stay(static_cast<int>(i)));
  return t;
}

}  // namespace

TEST_CASE("inverse table is total and involutive where a converse exists") {
  CHECK(inverse(Predicate::LeftOf) == Predicate::RightOf);
  CHECK(inverse(Predicate::RightOf) == Predicate::LeftOf);
  CHECK(inverse(Predicate::InFrontOf) == Predicate::Behind);
  CHECK(inverse(Predicate::Above) == Predicate::Below);
  CHECK(inverse(Predicate::Near) == Predicate::Near);
  CHECK(inverse(Predicate::FarFrom) == Predicate::FarFrom);
  CHECK(inverse(Predicate::On) == Predicate::Below);
  CHECK(inverse(Predicate::Inside) == Predicate::Near);
  for (auto p : kAllPredicates) {
    CHECK(predicate_from_string(to_string(p)) == p);
    if (p != Predicate::On && p != Predicate::Inside) CHECK(inverse(inverse(p)) == p);
  }
  CHECK(to_string(Predicate::InFrontOf) == "in-front-of");
  CHECK_THROWS_AS(predicate_from_string("beside"), Error);
}

TEST_CASE("merge: empty input") {
  auto g = merge_observations({}, {});
  CHECK(g.objects.empty());
  CHECK(g.relations.empty());
  CHECK(g.frame_count == 0);
}

TEST_CASE("merge: single frame equals the local graph") {
  auto f = frame(0, {node("t", "table"), node("c", "chair")}, {rel("c", Predicate::Near, "t")});
  std::vector<FrameObservation> obs{f};
  auto g = merge_observations(obs, {}, IdentityMode::GroundTruth);
  CHECK(g.frame_count == 1);
  CHECK(g.transitions.empty());
  CHECK(g.objects.size() == 2);
  REQUIRE(g.relations.size() == 1);
  CHECK(g.relations[0] == rel("c", Predicate::Near, "t"));

  auto ga = merge_observations(obs, {}, IdentityMode::Attributes);
  CHECK(ga.objects.size() == 2);
  CHECK(ga.contains("table#1"));
  CHECK(ga.contains("chair#1"));
  REQUIRE(ga.relations.size() == 1);
  CHECK(ga.relations[0].subject_id == "chair#1");
}

TEST_CASE("merge: shared anchor across two frames") {
  std::vector<FrameObservation> obs{
      frame(0, {node("x", "table", {"wooden"}), node("y", "lamp")}, {rel("y", Predicate::On, "x")}),
      frame(1, {node("p", "table", {"wooden"}), node("q", "sofa")},
            {rel("q", Predicate::LeftOf, "p")})};
  std::vector<ViewpointTransition> tr{
      {0, 1, Translation::Forward, Rotation::TurnRight, "I move forward, then I turn right."}};
  auto g = merge_observations(obs, tr);
  CHECK(g.objects.size() == 3);
  CHECK(g.at("table#1").frames == std::set<int>{0, 1});
  CHECK(g.at("table#1").first_frame == 0);
  auto n = neighborhood(g, "table#1");
  CHECK(n == std::set<ObjectId>{"lamp#1", "sofa#1"});
  CHECK(g.transitions.size() == 1);
}

TEST_CASE("merge: same-frame duplicates stay distinct") {
  std::vector<FrameObservation> obs{frame(0, {node("a", "chair"), node("b", "chair")}),
                                    frame(1, {node("c", "chair")})};
  auto g = merge_observations(obs, stays(2));
  CHECK(g.objects.size() == 2);
  CHECK(g.at("chair#1").frames == std::set<int>{0, 1});
  CHECK(g.at("chair#2").frames == std::set<int>{0});
}

TEST_CASE("merge: structural errors") {
  auto f0 = frame(0, {node("a", "chair")});
  auto f2 = frame(2, {node("a", "chair")});
  std::vector<FrameObservation> gap{f0, f2};
  CHECK_THROWS_AS(merge_observations(gap, stays(2)), StructuralError);

  std::vector<FrameObservation> two{f0, frame(1, {node("a", "chair")})};
  CHECK_THROWS_AS(merge_observations(two, {}), StructuralError);

  auto bad = frame(0, {node("a", "chair")}, {rel("a", Predicate::Near, "ghost")});
  std::vector<FrameObservation> one{bad};
  CHECK_THROWS_AS(merge_observations(one, {}), StructuralError);
}

TEST_CASE("neighborhood") {
  auto g = single_frame({node("a", "x"), node("b", "y"), node("c", "z")},
                        {rel("a", Predicate::Near, "b"), rel("a", Predicate::LeftOf, "c")});
  CHECK(neighborhood(g, "a") == std::set<ObjectId>{"b", "c"});
  auto iso = single_frame({node("a", "x")}, {});
  CHECK(neighborhood(iso, "a").empty());
  auto back = single_frame({node("a", "x"), node("b", "y")}, {rel("b", Predicate::Behind, "a")});
  CHECK(neighborhood(back, "a") == std::set<ObjectId>{"b"});
  CHECK_THROWS_AS(neighborhood(back, "zzz"), LookupError);
}

TEST_CASE("relations_between") {
  auto none = single_frame({node("a", "x"), node("b", "y")}, {});
  CHECK(relations_between(none, "a", "b").empty());

  auto above = single_frame({node("a", "x"), node("b", "y")}, {rel("a", Predicate::Above, "b")});
  auto r = relations_between(above, "a", "b");
  REQUIRE(r.size() == 1);
  CHECK(r[0].subject_id == "a");
  CHECK(r[0].predicate == Predicate::Above);

  auto below = single_frame({node("a", "x"), node("b", "y")}, {rel("b", Predicate::Above, "a")});
  r = relations_between(below, "a", "b");
  REQUIRE(r.size() == 1);
  CHECK(r[0].subject_id == "a");
  CHECK(r[0].predicate == Predicate::Below);
  CHECK(r[0].object_id == "b");
  CHECK_THROWS_AS(relations_between(below, "a", "q"), LookupError);
}

TEST_CASE("normalize_narrative") {
  std::vector<FrameObservation> one{frame(0, {node("t", "table", {"wooden"})}, {}, "A table.")};
  auto g1 = merge_observations(one, {});
  auto d1 = normalize_narrative(g1, one);
  REQUIRE(d1.size() == 1);
  CHECK(d1[0] == "A table.");

  std::vector<FrameObservation> obs{frame(0, {node("t", "table", {"wooden"})}, {}, "x"),
                                    frame(1, {node("c", "chair")}, {}, "y"),
                                    frame(2, {node("t", "table", {"wooden"})}, {}, "z")};
  auto g = merge_observations(obs, stays(3));
  auto d = normalize_narrative(g, obs);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == "x");  // nothing to simplify before any re-sighting
  CHECK(d[1] == "y");
  CHECK(d[2].find("the table (table#1)") != std::string::npos);
  CHECK(d[2].find("wooden") == std::string::npos);
}

TEST_CASE("describe and reference") {
  auto n = node("table#1", "table", {"wooden"});
  CHECK(describe_object(n) == "a wooden table (table#1)");
  CHECK(reference_object(n) == "the table (table#1)");
  CHECK(describe_object(node("lamp#2", "lamp")) == "a lamp (lamp#2)");
}

TEST_CASE("transition validation and narration") {
  CHECK(narrate_move(Translation::Forward, Rotation::TurnRight) == "I move forward, then I turn right.");
  CHECK_NOTHROW(validate(ViewpointTransition{0, 1, Translation::None, Rotation::None, ""}));
  CHECK(narrate_move(Translation::None, Rotation::None) == "I stay where I am.");
  CHECK(narrate_move(Translation::Left, Rotation::None) == "I step to the left.");
  CHECK_THROWS_AS(validate(ViewpointTransition{0, 2, Translation::None, Rotation::None, ""}),
                  StructuralError);
  CHECK_THROWS_AS(validate(ViewpointTransition{0, 1, Translation::Left, Rotation::None, ""}),
                  StructuralError);
}

TEST_CASE("property: merge invariants on random observations") {
  Gen g(11);
  for (int trial = 0; trial < 300; ++trial) {
    auto obs = random_frames(g);
    auto tr = stays(obs.size());
    auto graph = merge_observations(obs, tr);
    INFO("trial " << trial);
    CHECK_NOTHROW(validate(graph));
    CHECK(graph.objects.size() == expected_classes(obs));
    CHECK(graph.transitions.size() == obs.size() - 1);
    for (std::size_t i = 0; i < graph.transitions.size(); ++i)
      CHECK(graph.transitions[i].from_frame == static_cast<int>(i));

    // idempotence under decompose + re-merge
    auto parts = decompose(graph);
    auto again = merge_observations(parts, graph.transitions, IdentityMode::GroundTruth);
    CHECK(again == graph);
    auto again_attr = merge_observations(parts, graph.transitions, IdentityMode::Attributes);
    CHECK(again_attr == graph);

    for (const auto& [a, _] : graph.objects) {
      for (const auto& b : neighborhood(graph, a)) CHECK(neighborhood(graph, b).contains(a));
    }
    for (const auto& r : graph.relations) {
      auto ab = relations_between(graph, r.subject_id, r.object_id);
      auto ba = relations_between(graph, r.object_id, r.subject_id);
      CHECK(std::find(ab.begin(), ab.end(), r) != ab.end());
      bool found = false;
      for (const auto& x : ba) found |= x.predicate == inverse(r.predicate);
      CHECK(found);
    }

    auto round = graph_from_json(to_json(graph));
    CHECK(round == graph);
  }
}

TEST_CASE("json field names") {
  auto g = single_frame({node("a", "x"), node("b", "y")}, {rel("a", Predicate::Near, "b")});
  auto j = to_json(g);
  CHECK(j.contains("objects"));
  CHECK(j.contains("relations"));
  CHECK(j.contains("transitions"));
  CHECK(j["frame_count"] == 1);
  CHECK(j["relations"][0]["subject_id"] == "a");
  CHECK(j["relations"][0]["predicate"] == "near");
}
