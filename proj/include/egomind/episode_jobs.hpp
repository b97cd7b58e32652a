#pragma once

#include <vector>

#include "egomind/pipeline.hpp"
#include "egomind/simulator.hpp"

// Bridges simulator episodes into the generation pipeline: one job per
// question, and oracle-derived mock replies for offline runs.
namespace egomind::gen {

// sample_id = question_id; frames are the per-frame textual observations.
std::vector<GenerationJob> jobs_from_episode(const sim::Episode& episode);

// The reply a faithful annotator would give for each stage, built from the
// scene graph, PSA context and oracle answer. Records are fixture lines
// {sample_id, stage, text}.
std::vector<Json> oracle_fixtures(const sim::Episode& episode, const sim::SimConfig& config = {},
                                  const cot::Grammar& grammar = {});

// The merged document alone, for a single question of the episode.
cot::CoTDocument oracle_document(const sim::Episode& episode, const StructuredQuestion& question,
                                 const sim::SimConfig& config = {});

}  // namespace egomind::gen
