#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "egomind/psa.hpp"
#include "egomind/question.hpp"
#include "egomind/scene_graph.hpp"

// Synthetic egocentric scenes: rooms with placed objects, discrete camera
// walks, per-frame structured observations, questions for the eight task
// families and brute-force oracle answers.
namespace egomind::sim {

struct SimConfig {
  double step = 0.5;                           // metres per translation quantum
  double turn_quantum = std::numbers::pi / 2;  // radians per rotation quantum
  double fov = std::numbers::pi / 2;
  double range = 4.0;
  double near_threshold = 1.0;
  double grid_cell = 0.5;
  double wall_margin = 0.25;  // camera keeps this far from the walls
  int n_frames = 16;
  int questions_per_family = 2;
};

struct CategorySpec {
  std::string name;
  double min_width, max_width;
  double min_depth, max_depth;
  double min_height, max_height;
  std::vector<std::string> attributes;
};

std::vector<CategorySpec> default_category_pool();

struct SceneConfig {
  int n_objects = 10;
  double min_room_width = 6.0, max_room_width = 9.0;
  double min_room_depth = 5.0, max_room_depth = 8.0;
  double wall_height = 3.0;
  int max_placement_attempts = 2000;
  std::vector<CategorySpec> category_pool = default_category_pool();
};

struct Room {
  double width = 0.0;
  double depth = 0.0;
  double height = 0.0;
  bool operator==(const Room&) const = default;
};

struct PlacedObject {
  std::string id;
  std::string category;
  std::set<std::string> attributes;
  double x = 0.0, y = 0.0;          // footprint centre
  double width = 0.0, depth = 0.0;  // footprint extents along x and y
  double height = 0.0;

  ObjectRef ref() const { return {category, attributes}; }
  bool operator==(const PlacedObject&) const = default;
};

struct Scene {
  std::string scene_id;
  Room room;
  std::vector<PlacedObject> objects;
  std::uint64_t seed = 0;

  const PlacedObject& object(const std::string& id) const;
  bool operator==(const Scene&) const = default;
};

struct CameraPose {
  double x = 0.0, y = 0.0;
  double heading = 0.0;  // radians, 0 = +x, counter-clockwise positive
  double fov = std::numbers::pi / 2;
  double range = 4.0;
  bool operator==(const CameraPose&) const = default;
};

// Footprints inside the room and pairwise disjoint; throws StructuralError.
void validate(const Scene& scene);
bool footprints_overlap(const PlacedObject& a, const PlacedObject& b);

// Deterministic in seed; throws GenerationError when placement fails.
Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

std::vector<CameraPose> generate_trajectory(const Scene& scene, std::uint64_t seed, int n_frames,
                                            const SimConfig& config = {});

// Angle of a point off the camera axis, clockwise positive (negative = left).
double bearing(const CameraPose& pose, double x, double y);
bool is_visible(const CameraPose& pose, double x, double y);

// Objects whose centre lies in the view sector (no occlusion). Relations:
// left-of/right-of between neighbours in bearing order, in-front-of/behind
// between neighbours in depth order, near within the near threshold, above
// for a taller object over an overlapping footprint.
graph::FrameObservation observe(const Scene& scene, const CameraPose& pose, int frame_index,
                                const SimConfig& config = {});

graph::ViewpointTransition classify_transition(const CameraPose& a, const CameraPose& b,
                                               int from_frame = 0, const SimConfig& config = {});
CameraPose apply_transition(const CameraPose& pose, graph::Translation t, graph::Rotation r,
                            const SimConfig& config = {});

struct QuestionSet {
  std::vector<StructuredQuestion> questions;
  std::vector<std::string> skipped;  // "<family>: reason"
};

QuestionSet generate_questions(const Scene& scene, const std::vector<CameraPose>& trajectory,
                               const std::set<TaskType>& families, std::uint64_t seed,
                               const SimConfig& config = {});

// Brute-force ground truth from the scene geometry and trajectory.
Answer oracle_answer(const Scene& scene, const std::vector<CameraPose>& trajectory,
                     const StructuredQuestion& question, const SimConfig& config = {});

psa::SceneAnnotations annotations(const Scene& scene, const SimConfig& config = {});

// Frame index at which each object is first visible; unseen objects are absent.
std::map<std::string, int> first_visible_frames(const Scene& scene,
                                                const std::vector<CameraPose>& trajectory);

struct Episode {
  Scene scene;
  std::vector<CameraPose> trajectory;
  std::vector<graph::FrameObservation> observations;
  std::vector<graph::ViewpointTransition> transitions;
  std::vector<StructuredQuestion> questions;
  std::vector<std::string> skipped;
};

Episode simulate_episode(std::uint64_t seed, const SceneConfig& scene_config,
                         const SimConfig& config = {},
                         const std::set<TaskType>& families = {kAllTaskTypes.begin(),
                                                               kAllTaskTypes.end()});

// Seed for the i-th scene of a run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Episodes for seeds derive_seed(base, 0..n-1). Object counts are drawn
// uniformly from [min_objects, max_objects] per scene. Scenes are generated in
// parallel; output order and content do not depend on the thread count.
std::vector<Episode> simulate_batch(std::uint64_t base_seed, int n_scenes, int min_objects,
                                    int max_objects, const SceneConfig& scene_config,
                                    const SimConfig& config = {});
std::vector<Episode> simulate_batch_serial(std::uint64_t base_seed, int n_scenes, int min_objects,
                                           int max_objects, const SceneConfig& scene_config,
                                           const SimConfig& config = {});

Json to_json(const Scene& scene);
Json to_json(const CameraPose& pose);
Json to_json(const Episode& episode);
Scene scene_from_json(const Json& j);
CameraPose pose_from_json(const Json& j);
Episode episode_from_json(const Json& j);

}  // namespace egomind::sim
