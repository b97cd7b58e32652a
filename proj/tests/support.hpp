#pragma once

#include <cctype>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "egomind/cot_format.hpp"
#include "egomind/question.hpp"
#include "egomind/reward.hpp"
#include "egomind/scene_graph.hpp"

namespace egomind::testing {

// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t next() { return rng_(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double real(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  }
  bool chance(double p) { return real(0.0, 1.0) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
  }

  std::string word() {
    static const std::vector<std::string> words = {
        "chair#1", "table", "lamp", "red", "wooden", "left", "near", "I", "see", "turn",
        "the",     "a",     "is",   "on", "behind",  "3.5", "m",    "(sofa#2)", "x,y", "café",
        "->",      "#",     "50%",  "A",  "b.",      "'q'", "[x]",  "2", "right", "then"};
    return pick(words);
  }
  std::string sentence(int min_words = 1, int max_words = 8) {
    std::string s;
    const int n = integer(min_words, max_words);
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + word();
    return s;
  }
  std::string paragraph(int max_lines = 3) {
    std::string s;
    const int n = integer(1, max_lines);
    for (int i = 0; i < n; ++i) s += (i ? "\n" : "") + sentence();
    return s;
  }

  // A document that satisfies every render precondition.
  cot::CoTDocument document() {
    cot::CoTDocument d;
    d.summary = paragraph();
    const int frames = integer(1, 5);
    for (int i = 0; i < frames; ++i) {
      if (i) d.rpc_narrative.push_back({cot::NarrativeBlock::Kind::Transition, sentence()});
      d.rpc_narrative.push_back({cot::NarrativeBlock::Kind::Frame, paragraph(2)});
    }
    auto item = [&] { return sentence(1, 3); };
    const int nt = integer(0, 3);
    for (int i = 0; i < nt; ++i) d.psa_section.targets.push_back(item());
    d.psa_section.candidates = d.psa_section.targets;
    const int extra = integer(0, 3);
    for (int i = 0; i < extra; ++i) d.psa_section.candidates.push_back(item());
    const int nr = integer(0, 4);
    for (int i = 0; i < nr; ++i) d.psa_section.relations.push_back(item());
    if (chance(0.3)) d.psa_section.notes = paragraph(2);
    d.reasoning = paragraph();
    d.answer = chance(0.5) ? std::string(1, static_cast<char>('A' + integer(0, 3)))
                           : std::to_string(integer(0, 40)) + "." + std::to_string(integer(0, 9));
    return d;
  }

 private:
  std::mt19937_64 rng_;
};

// Mutated documents and raw noise: truncations, stray and nested tags,
// shuffled sections, random bytes.
inline std::vector<std::string> fuzz_corpus(std::uint64_t seed, std::size_t n) {
  Gen g(seed);
  static const std::vector<std::string> tokens = {
      "<think>", "</think>", "<answer>", "</answer>", "<think", "</answ", "<", ">",
      "## Summary", "## Role-Play Caption", "## Progressive Spatial Analysis", "## Reasoning",
      "[Frame]", "[Transition]", "Targets:", "Relations:", "\n", "\r\n", "\x01", "A"};
  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    std::string text = cot::render(g.document());
    switch (g.integer(0, 9)) {
      case 0:  // truncation
        text.resize(static_cast<std::size_t>(g.integer(0, static_cast<int>(text.size()))));
        break;
      case 1: {  // insert tokens
        for (int k = g.integer(1, 4); k > 0; --k) {
          auto pos = static_cast<std::size_t>(g.integer(0, static_cast<int>(text.size())));
          text.insert(pos, g.pick(tokens));
        }
        break;
      }
      case 2: {  // deep nesting
        std::string nest;
        const int depth = g.integer(10, 2000);
        for (int i = 0; i < depth; ++i) nest += g.chance(0.5) ? "<think>" : "<answer>";
        text = g.chance(0.5) ? nest + text : text + nest;
        break;
      }
      case 3: {  // delete a span
        auto a = static_cast<std::size_t>(g.integer(0, static_cast<int>(text.size())));
        auto len = static_cast<std::size_t>(g.integer(0, 40));
        text.erase(a, len);
        break;
      }
      case 4: {  // random bytes
        text.clear();
        for (int i = g.integer(0, 300); i > 0; --i) text.push_back(static_cast<char>(g.integer(0, 255)));
        break;
      }
      case 5: {  // swap two lines
        std::vector<std::string> lines;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= text.size(); ++i) {
          if (i == text.size() || text[i] == '\n') {
            lines.push_back(text.substr(start, i - start));
            start = i + 1;
          }
        }
        auto a = static_cast<std::size_t>(g.integer(0, static_cast<int>(lines.size()) - 1));
        auto b = static_cast<std::size_t>(g.integer(0, static_cast<int>(lines.size()) - 1));
        std::swap(lines[a], lines[b]);
        text.clear();
        for (std::size_t i = 0; i < lines.size(); ++i) text += (i ? "\n" : "") + lines[i];
        break;
      }
      case 6:  // empty answer
        text = text.substr(0, text.find("<answer>")) + "<answer> </answer>";
        break;
      case 7:  // surrounding noise
        text = (g.chance(0.5) ? "Sure! " : "") + text + (g.chance(0.5) ? " ok" : "");
        break;
      case 8:  // case changes on headers
        for (auto& c : text)
          if (g.chance(0.05)) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        break;
      default:  // untouched
        break;
    }
    out.push_back(std::move(text));
  }
  return out;
}

// Valid group with G rollouts of 1..n tokens.
inline reward::RolloutGroup random_group(Gen& g, int G, int max_tokens = 12) {
  reward::RolloutGroup group;
  group.question_id = "q" + std::to_string(g.next() % 100000);
  group.epsilon = g.real(0.05, 0.5);
  group.beta = g.chance(0.2) ? 0.0 : g.real(0.0, 0.01);
  for (int i = 0; i < G; ++i) {
    reward::Rollout r;
    r.reward = g.chance(0.3) ? static_cast<double>(g.integer(0, 1)) : g.real(0.0, 1.0);
    const int n = g.integer(1, max_tokens);
    for (int t = 0; t < n; ++t) {
      double p = -g.real(0.0, 3.0);
      r.policy_logprobs.push_back(p);
      r.old_logprobs.push_back(std::min(0.0, p + g.real(-0.05, 0.05)));
      r.ref_logprobs.push_back(std::min(0.0, p + g.real(-0.3, 0.3)));
    }
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

// The positive token delta d with exp(d) - d - 1 = target, by bisection.
inline double kl_delta_for(double target) {
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (std::expm1(mid) - mid < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Prediction lines where family i gets hits[i] exact answers out of n and
// clear misses otherwise (MRA 0 for numbers, a wrong letter for choices).
inline std::vector<std::string> aggregation_fixture(const std::array<int, 8>& hits, int n) {
  std::vector<std::string> lines;
  for (std::size_t f = 0; f < kAllTaskTypes.size(); ++f) {
    const TaskType t = kAllTaskTypes[f];
    for (int i = 0; i < n; ++i) {
      nlohmann::json j;
      j["question_id"] = std::string(to_string(t)) + "-" + std::to_string(i);
      j["task_type"] = to_string(t);
      const bool hit = i < hits[f];
      if (is_numeric(t)) {
        j["ground_truth"] = 10.0;
        j["raw_model_output"] = hit ? "10" : "100";
      } else {
        j["ground_truth"] = "A";
        j["raw_model_output"] = hit ? "A" : "B";
      }
      lines.push_back(j.dump());
    }
  }
  return lines;
}

inline graph::ObjectNode node(const std::string& id, const std::string& category,
                              std::set<std::string> attrs = {}, int frame = 0) {
  return {id, category, std::move(attrs), frame, {frame}};
}

inline graph::SpatialRelation rel(const std::string& a, graph::Predicate p, const std::string& b,
                                  int frame = 0) {
  return {a, p, b, graph::Provenance::intra(frame)};
}

// One-frame graph from objects and relations.
inline graph::GlobalSceneGraph single_frame(std::vector<graph::ObjectNode> objects,
                                            std::vector<graph::SpatialRelation> relations) {
  graph::FrameObservation f;
  f.frame_index = 0;
  f.objects = std::move(objects);
  f.relations = std::move(relations);
  f.description = "frame";
  std::vector<graph::FrameObservation> obs{f};
  return graph::merge_observations(obs, {}, graph::IdentityMode::GroundTruth);
}

}  // namespace egomind::testing
