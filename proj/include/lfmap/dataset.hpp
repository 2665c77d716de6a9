#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lfmap/geometry.hpp"

namespace lfmap {

/// Dataset or image-decode problem that prevents building an observation
/// stream (missing index files, unreadable images, mismatched dimensions).
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The index files parsed but produced zero associated observations.
struct EmptySequenceError : IngestionError {
  using IngestionError::IngestionError;
};

struct GroundTruthPose {
  double timestamp = 0.0;
  Pose pose;
};

/// One associated observation: a color image and the depth image nearest to
/// it in time.
struct AssociatedTriple {
  double timestamp = 0.0;  // the color stamp
  std::string color_path;  // relative to the sequence root
  std::string depth_path;
};

/// An RGB-D sequence in the standard on-disk layout: rgb.txt / depth.txt /
/// groundtruth.txt index files ('#' comments, "timestamp fields..." lines)
/// plus 8-bit color and 16-bit depth PNGs, raw depth units / 5000 = meters.
struct TumSequence {
  std::string root;
  std::vector<AssociatedTriple> triples;      // strictly increasing stamps
  std::vector<GroundTruthPose> ground_truth;  // strictly increasing stamps
  CameraIntrinsics intrinsics;
};

/// Parses the index files and associates color <-> depth by nearest
/// timestamp within 0.02 s (greedy, one-to-one, in stamp order). Intrinsics
/// come from an optional intrinsics.txt (fx fy cx cy depth_scale [width
/// height]), else from the freiburg1/2/3 calibrations matched against the
/// directory name, else the generic 525 / 319.5 / 239.5 pinhole. max_frames
/// > 0 truncates the associated list. Throws IngestionError on missing
/// files, EmptySequenceError when nothing associates.
TumSequence load_tum(const std::string& dir, int max_frames = 0);

/// Decodes the images of one triple. Throws IngestionError on decode
/// failures or when the image dimensions disagree with the intrinsics.
RGBDFrame load_frame(const TumSequence& seq, std::size_t index);

/// Parses a trajectory file in "timestamp tx ty tz qx qy qz qw" format.
std::vector<GroundTruthPose> load_pose_file(const std::string& path);

/// Formats one trajectory row, "timestamp tx ty tz qx qy qz qw", with the
/// quaternion normalized and sign-canonical (qw >= 0). The fixed 6/9-digit
/// format keeps seeded reruns byte-identical.
std::string tum_pose_line(double timestamp, const Pose& pose);

/// A closed-form test scene: analytic geometry (boxes as rooms or solids,
/// spheres), a scripted camera trajectory, an exact signed-distance oracle
/// (positive in free space), and a closed-form ray caster. Color is a
/// constant per object.
struct SynthScene {
  struct Hit {
    double t = 0.0;  // ray parameter at the surface; <= 0 means no hit
    int object = -1;
  };

  std::string name;
  CameraIntrinsics intrinsics;
  std::vector<Pose> trajectory;  // camera-to-world, one per observation
  double frame_dt = 1.0 / 30.0;
  std::function<double(const Eigen::Vector3d&)> sdf;
  std::function<Hit(const Eigen::Vector3d& origin, const Eigen::Vector3d& unit_dir)>
      raycast;
  std::vector<Eigen::Vector3d> palette;  // color per object id
};

/// Scene catalog: sphere-orbit, box-room, corridor, two-rooms, loop-square.
/// Deterministic. Throws std::invalid_argument for an unknown name.
SynthScene synth_world(const std::string& spec);

/// Renders one observation: per-pixel z-depth from the closed-form caster
/// (0 where the ray escapes), constant color per hit object.
RGBDFrame render_synth(const SynthScene& scene, std::size_t index);

/// Writes the scene to dir in the sequence layout load_tum reads back:
/// rgb/, depth/ (16-bit, x5000), rgb.txt, depth.txt, groundtruth.txt, and
/// intrinsics.txt.
void write_synth_dataset(const SynthScene& scene, const std::string& dir);

/// Uniform observation feed for the mapping loop; frames are produced on
/// demand (decoded from disk or rendered).
struct ObservationSource {
  CameraIntrinsics intrinsics;
  std::vector<double> timestamps;
  std::function<RGBDFrame(std::size_t)> frame;
  std::size_t size() const { return timestamps.size(); }
};

ObservationSource make_source(const TumSequence& seq);
ObservationSource make_source(const SynthScene& scene);

/// Repeats the scene's first pose `count` times — the stationary-camera
/// diagnostic case.
ObservationSource make_static_source(const SynthScene& scene, std::size_t count);

}  // namespace lfmap
