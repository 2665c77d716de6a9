#include "lfmap/pipeline.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "lfmap/field.hpp"
#include "lfmap/rng.hpp"

namespace lfmap {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(const Clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Seed-stream tags: every random consumer hangs off the master seed through
// its own tag, so adding a consumer never shifts the others.
constexpr std::uint64_t kNetTag = 0x6e6574;
constexpr std::uint64_t kKeyTag = 0x6b6579;
constexpr std::uint64_t kRayTag = 0x726179;
constexpr std::uint64_t kSurfTag = 0x73726672;
constexpr std::uint64_t kTrainTag = 0x747261;
constexpr std::uint64_t kRegTag = 0x726567;
constexpr std::uint64_t kEwcTag = 0x657763;

const char* registration_status_name(RegistrationStatus s) {
  switch (s) {
    case RegistrationStatus::kConverged: return "converged";
    case RegistrationStatus::kMaxIters: return "max_iters";
    case RegistrationStatus::kInsufficientOverlap: return "insufficient_overlap";
    case RegistrationStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

RunConfig desk_preset() {
  RunConfig cfg;
  cfg.stride = 8;
  cfg.registration.subsample_n = 2048;
  cfg.field.max_iters = 100;
  return cfg;
}

RunConfig full_preset() {
  RunConfig cfg;
  cfg.stride = 4;
  cfg.registration.subsample_n = 4096;
  cfg.field.max_iters = 300;
  return cfg;
}

RunConfig preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return full_preset();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for " + key + ": '" + s + "'");
  }
}

long long parse_ll(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for " + key + ": '" + s + "'");
  }
}

/// One serialized configuration entry; save and load share this table so the
/// two directions cannot drift apart.
struct ConfigField {
  std::string section;
  std::string key;
  std::string comment;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Ref>
ConfigField field_double(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) { ref(c) = parse_double(key, v); };
  return f;
}

template <typename Ref>
ConfigField field_int(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) {
    ref(c) = static_cast<int>(parse_ll(key, v));
  };
  return f;
}

template <typename Ref>
ConfigField field_size(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) {
    const long long n = parse_ll(key, v);
    if (n < 0) throw std::runtime_error("config: " + key + " must be >= 0");
    ref(c) = static_cast<std::size_t>(n);
  };
  return f;
}

template <typename Ref>
ConfigField field_u64(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) {
    try {
      std::size_t pos = 0;
      ref(c) = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad integer for " + key + ": '" + v + "'");
    }
  };
  return f;
}

template <typename Ref>
ConfigField field_bool(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) {
    return ref(const_cast<RunConfig&>(c)) ? std::string("1") : std::string("0");
  };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) {
    if (v != "0" && v != "1")
      throw std::runtime_error("config: " + key + " must be 0 or 1");
    ref(c) = (v == "1");
  };
  return f;
}

template <typename Ref>
ConfigField field_int_list(std::string section, std::string key, std::string comment, Ref ref) {
  ConfigField f{std::move(section), std::move(key), std::move(comment), {}, {}};
  f.get = [ref](const RunConfig& c) {
    std::string out;
    for (const int v : ref(const_cast<RunConfig&>(c))) {
      if (!out.empty()) out += ',';
      out += std::to_string(v);
    }
    return out;
  };
  f.set = [ref, key = f.key](RunConfig& c, const std::string& v) {
    std::vector<int> values;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
      values.push_back(static_cast<int>(parse_ll(key, item)));
    if (values.empty()) throw std::runtime_error("config: empty list for " + key);
    ref(c) = std::move(values);
  };
  return f;
}

#define REF(expr) [](RunConfig& c) -> decltype(auto) { return (c.expr); }

const std::vector<ConfigField>& config_schema() {
  static const std::vector<ConfigField> schema = [] {
    std::vector<ConfigField> s;
    s.push_back(field_u64("run", "seed", "master RNG seed", REF(seed)));
    s.push_back(field_int("run", "max_frames", "input observation cap, 0 = all", REF(max_frames)));
    s.push_back(field_int("run", "train_every", "field training cadence, observations", REF(train_every)));
    s.push_back(field_int("run", "bootstrap_rounds", "training bursts at frame birth", REF(bootstrap_rounds)));
    s.push_back(field_int("run", "stride", "backprojection grid stride, pixels", REF(stride)));
    s.push_back(field_double("run", "voxel_size", "feature voxel edge, m", REF(voxel_size)));
    s.push_back(field_int("run", "neighbor_count", "k nearest features per query", REF(neighbor_count)));
    s.push_back(field_size("run", "keypoint_count", "revisit-check subsample size", REF(keypoint_count)));

    s.push_back(field_int("sampler", "sampler.n_front", "free-space samples per ray", REF(sampler.n_front)));
    s.push_back(field_int("sampler", "sampler.n_behind", "behind-surface samples per ray", REF(sampler.n_behind)));
    s.push_back(field_int("sampler", "sampler.n_surface", "surface-disk samples per point", REF(sampler.n_surface)));
    s.push_back(field_double("sampler", "sampler.l_front_lo", "front band lower l", REF(sampler.l_front_lo)));
    s.push_back(field_double("sampler", "sampler.l_front_hi", "front band upper l", REF(sampler.l_front_hi)));
    s.push_back(field_double("sampler", "sampler.l_behind_lo", "behind band lower l", REF(sampler.l_behind_lo)));
    s.push_back(field_double("sampler", "sampler.l_b", "l_b: behind band width", REF(sampler.l_b)));
    s.push_back(field_double("sampler", "sampler.surface_radius", "surface disk radius, m", REF(sampler.surface_radius)));
    s.push_back(field_int("sampler", "sampler.dense_factor", "dense stride divisor", REF(sampler.dense_factor)));

    s.push_back(field_int("field", "field.feature_dim", "per-point feature width", REF(field.arch.feature_dim)));
    s.push_back(field_int("field", "field.pe_bands", "positional encoding bands", REF(field.arch.pe_bands)));
    s.push_back(field_int_list("field", "field.hidden", "hidden layer widths", REF(field.arch.hidden)));
    s.push_back(field_double("field", "field.softplus_beta", "softplus sharpness", REF(field.arch.softplus_beta)));
    s.push_back(field_double("field", "field.sigma", "occupancy sigmoid scale, m", REF(field.sigma)));
    s.push_back(field_double("field", "field.lambda_bce", "lambda_b: occupancy term weight", REF(field.lambda_bce)));
    s.push_back(field_double("field", "field.lambda_eikonal", "lambda_e: gradient-norm term weight", REF(field.lambda_eikonal)));
    s.push_back(field_double("field", "field.lambda_ewc", "lambda_EWC: consolidation term weight", REF(field.lambda_ewc)));
    s.push_back(field_double("field", "field.learning_rate", "lambda: optimizer step size", REF(field.learning_rate)));
    s.push_back(field_double("field", "field.thres_l", "thres_l: smoothed-improvement stop threshold", REF(field.thres_l)));
    s.push_back(field_int("field", "field.max_iters", "iterations per training burst", REF(field.max_iters)));
    s.push_back(field_int("field", "field.batch_size", "samples per training step", REF(field.batch_size)));
    s.push_back(field_int("field", "field.convergence_window", "improvement smoothing window", REF(field.convergence_window)));
    s.push_back(field_double("field", "field.new_fraction", "share of each batch from new samples", REF(field.new_fraction)));
    s.push_back(field_double("field", "field.feature_init_scale", "fresh feature sigma", REF(field.feature_init_scale)));

    s.push_back(field_int("registration", "registration.max_iters", "solver iteration cap", REF(registration.max_iters)));
    s.push_back(field_double("registration", "registration.lambda_reg", "lambda_reg: initial damping", REF(registration.lambda_reg)));
    s.push_back(field_double("registration", "registration.convergence_eps", "stop threshold on the update norm", REF(registration.convergence_eps)));
    s.push_back(field_int("registration", "registration.subsample_n", "points per iteration", REF(registration.subsample_n)));
    s.push_back(field_double("registration", "registration.outlier_sdf_cap", "residual cutoff, m", REF(registration.outlier_sdf_cap)));
    s.push_back(field_u64("registration", "registration.seed", "subsampling stream seed", REF(registration.seed)));

    s.push_back(field_double("spawn", "spawn.max_translation", "path length per frame, m", REF(spawn.max_translation)));
    s.push_back(field_double("spawn", "spawn.max_viewpoint", "rotation from anchor, rad", REF(spawn.max_viewpoint)));
    s.push_back(field_int("spawn", "spawn.max_frames", "observations per frame", REF(spawn.max_frames)));

    s.push_back(field_double("loop", "loop.threshold", "minimum symmetric similarity", REF(loop.threshold)));
    s.push_back(field_double("loop", "loop.search_radius", "anchor distance cutoff, m", REF(loop.search_radius)));
    s.push_back(field_double("loop", "loop.voxel", "keypoint match tolerance, m", REF(loop.voxel)));

    s.push_back(field_double("planner", "planner.step_size", "extension length, m", REF(planner.step_size)));
    s.push_back(field_double("planner", "planner.rewire_radius", "rewiring radius, m", REF(planner.rewire_radius)));
    s.push_back(field_double("planner", "planner.clearance", "required obstacle distance, m", REF(planner.clearance)));
    s.push_back(field_double("planner", "planner.alpha", "alpha: fan step between rays, rad", REF(planner.alpha)));
    s.push_back(field_int("planner", "planner.n_alt_rays", "alternative rays per side", REF(planner.n_alt_rays)));
    s.push_back(field_double("planner", "planner.goal_bias", "probability of fan sampling", REF(planner.goal_bias)));
    s.push_back(field_double("planner", "planner.uniform_fallback", "probability of a uniform sample", REF(planner.uniform_fallback)));
    s.push_back(field_int("planner", "planner.max_iterations", "sample budget", REF(planner.max_iterations)));
    s.push_back(field_double("planner", "planner.goal_tolerance", "goal capture radius, m", REF(planner.goal_tolerance)));
    s.push_back(field_bool("planner", "planner.planar", "1 = keep waypoints at start height", REF(planner.planar)));
    return s;
  }();
  return schema;
}

#undef REF

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path);
  os << "# mapping run configuration\n";
  std::string section;
  for (const ConfigField& f : config_schema()) {
    if (f.section != section) {
      section = f.section;
      os << "\n# --- " << section << "\n";
    }
    os << f.key << " = " << f.get(cfg);
    if (!f.comment.empty()) os << "  # " << f.comment;
    os << "\n";
  }
  if (!os) throw std::runtime_error("failed writing config: " + path);
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    bool known = false;
    for (const ConfigField& f : config_schema()) {
      if (f.key == key) {
        f.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// mapping loop

MappingResult run_mapping(const ObservationSource& source, const RunConfig& cfg) {
  const std::size_t available = source.size();
  const std::size_t n =
      cfg.max_frames > 0
          ? std::min(available, static_cast<std::size_t>(cfg.max_frames))
          : available;
  if (n < 2)
    throw std::invalid_argument("run_mapping: need at least two observations");
  if (!source.intrinsics.valid())
    throw std::invalid_argument("run_mapping: invalid camera intrinsics");

  const auto wall0 = Clock::now();
  MappingResult result;
  FrameGraph& graph = result.graph;
  RunReport& report = result.report;

  ReplayBuffer buffer;
  AdamState adam;
  Pose pose;  // current pose in the active frame's coordinates
  Pose world_prev, world_prev2;
  int accepted = 0;

  const std::uint64_t key_seed = mix_seed(cfg.seed, kKeyTag);

  // Registers the observation's cloud (camera coordinates) into frame f at
  // the current pose: trajectory entry, map points, training samples.
  auto ingest = [&](LocalFrame& f, const ColorPointCloud& cloud_cam,
                    ObservationRecord& rec, std::size_t t) {
    const ColorPointCloud cloud_f = transform_cloud(pose, cloud_cam);
    append_observation(f, pose);
    insert_keypoints(cloud_f, f.store, cfg.field.feature_init_scale, key_seed);
    SampleBatch samples =
        sample_rays(cloud_f, pose.translation, cfg.sampler,
                    mix_seed(mix_seed(cfg.seed, kRayTag), t), static_cast<int>(t));
    const SampleBatch surface = sample_surface_plane(
        cloud_f, pose.translation, cfg.sampler,
        mix_seed(mix_seed(cfg.seed, kSurfTag), t), static_cast<int>(t));
    samples.insert(samples.end(), surface.begin(), surface.end());
    buffer.add(samples);
    rec.new_samples = samples.size();
    rec.map_points = f.store.size();
    return samples;
  };

  auto train = [&](LocalFrame& f, const SampleBatch& fresh, std::size_t t) {
    return adaptive_train(fresh, buffer, f.store, f.params, adam, cfg.field,
                          mix_seed(mix_seed(cfg.seed, kTrainTag), t));
  };

  // A frame's first field must already be smooth enough for the next
  // observation to register against. One adaptive burst stops at the first
  // loss plateau; rerunning it (fresh batches, fresh convergence window)
  // trains through the plateau with a hard budget of rounds * max_iters.
  auto bootstrap = [&](LocalFrame& f, const SampleBatch& fresh, std::size_t t) {
    TrainReport last;
    for (int round = 0; round < std::max(1, cfg.bootstrap_rounds); ++round) {
      last = adaptive_train(
          fresh, buffer, f.store, f.params, adam, cfg.field,
          mix_seed(mix_seed(mix_seed(cfg.seed, kTrainTag), t),
                   static_cast<std::uint64_t>(round)));
      if (last.diverged) break;
    }
    return last;
  };

  for (std::size_t t = 0; t < n; ++t) {
    const auto obs0 = Clock::now();
    ObservationRecord rec;
    rec.index = static_cast<int>(t);
    rec.timestamp = source.timestamps[t];

    auto stage0 = Clock::now();
    const RGBDFrame frame = source.frame(t);
    const ColorPointCloud cloud = backproject(frame, source.intrinsics, cfg.stride);
    rec.timings.sampling_ms += ms_since(stage0);
    rec.cloud_points = cloud.size();

    if (t == 0) {
      if (cloud.size() < 6)
        throw std::runtime_error("run_mapping: first observation has no usable depth");
      pose = Pose::identity();
      NetworkParams params =
          NetworkParams::create(cfg.field.arch, mix_seed(cfg.seed, kNetTag));
      FeatureStore store(cfg.voxel_size, cfg.field.arch.feature_dim,
                         cfg.neighbor_count);
      LocalFrame& f0 = spawn_frame(graph, Pose::identity(), 0, std::move(params),
                                   std::move(store), cfg.keypoint_count);
      stage0 = Clock::now();
      const SampleBatch fresh = ingest(f0, cloud, rec, t);
      rec.timings.sampling_ms += ms_since(stage0);
      stage0 = Clock::now();
      const TrainReport tr = bootstrap(f0, fresh, t);
      rec.timings.training_ms += ms_since(stage0);
      rec.trained = true;
      if (tr.diverged)
        report.notes.push_back("observation 0: training diverged");
    } else {
      // Constant-velocity initial guess, formed in world coordinates and
      // pulled into the active frame.
      const Pose init_world =
          accepted >= 2
              ? compose(world_prev, compose(inverse(world_prev2), world_prev))
              : world_prev;
      const Pose anchor = graph.active().anchor_pose;
      const Pose init_in_frame = compose(inverse(anchor), init_world);

      RegistrationConfig rc = cfg.registration;
      rc.seed = mix_seed(mix_seed(mix_seed(cfg.seed, kRegTag), cfg.registration.seed), t);
      stage0 = Clock::now();
      const RegistrationResult reg = register_cloud(
          cloud, graph.active().store, graph.active().params, init_in_frame, rc);
      rec.timings.registration_ms += ms_since(stage0);
      rec.reg_status = reg.status;
      rec.reg_rmse = reg.final_rmse;
      rec.reg_iterations = reg.iterations;

      if (reg.status == RegistrationStatus::kDiverged ||
          reg.status == RegistrationStatus::kInsufficientOverlap) {
        rec.skipped = true;
        rec.frame_id = graph.active_id;
        ++report.skipped;
        report.notes.push_back("observation " + std::to_string(t) + " skipped: " +
                               registration_status_name(reg.status));
        rec.timings.total_ms = ms_since(obs0);
        report.observations.push_back(rec);
        continue;
      }

      const Pose new_pose = reg.pose;
      const SpawnDecision decision = should_spawn(graph.active(), new_pose, cfg.spawn);
      if (decision.spawn) {
        // Consolidate the outgoing frame before the freeze so the carried
        // parameters remember what this frame learned.
        stage0 = Clock::now();
        const SampleBatch recall = mix_replay(
            buffer, SampleBatch{}, 0.0, 256, mix_seed(mix_seed(cfg.seed, kEwcTag), t));
        consolidate_ewc_from_batch(graph.active().params, recall,
                                   graph.active().store, cfg.field);
        rec.timings.training_ms += ms_since(stage0);

        const Pose world_anchor = compose(anchor, new_pose);
        // Drop the provisional keypoints so the freeze re-subsamples them
        // from the frame's final store.
        graph.active().keypoints.clear();
        NetworkParams carried = graph.active().params;
        FeatureStore fresh_store(cfg.voxel_size, cfg.field.arch.feature_dim,
                                 cfg.neighbor_count);
        LocalFrame& nf =
            spawn_frame(graph, world_anchor, static_cast<int>(t),
                        std::move(carried), std::move(fresh_store), cfg.keypoint_count);
        buffer.clear();
        adam = AdamState{};
        pose = Pose::identity();

        stage0 = Clock::now();
        const SampleBatch fresh = ingest(nf, cloud, rec, t);
        rec.timings.sampling_ms += ms_since(stage0);
        stage0 = Clock::now();
        const TrainReport tr = bootstrap(nf, fresh, t);
        rec.timings.training_ms += ms_since(stage0);
        rec.trained = true;
        if (tr.diverged)
          report.notes.push_back("observation " + std::to_string(t) +
                                 ": training diverged");
        nf.keypoints = farthest_point_sample(nf.store, cfg.keypoint_count);

        const std::optional<int> revisit = loop_check(nf, graph, cfg.loop);
        if (revisit) {
          add_loop_edge(graph, *revisit, nf.id, static_cast<int>(t));
          rec.loop_to = *revisit;
          report.notes.push_back("loop closure: frame " + std::to_string(nf.id) +
                                 " -> " + std::to_string(*revisit) +
                                 " at observation " + std::to_string(t));
        }
        rec.spawned = true;
        rec.spawn_reason = decision.reason;
        report.notes.push_back("spawned frame " + std::to_string(nf.id) +
                               " at observation " + std::to_string(t) + " (" +
                               spawn_reason_name(decision.reason) + ")");
      } else {
        pose = new_pose;
        stage0 = Clock::now();
        const SampleBatch fresh = ingest(graph.active(), cloud, rec, t);
        rec.timings.sampling_ms += ms_since(stage0);
        if (t % static_cast<std::size_t>(cfg.train_every) == 0) {
          stage0 = Clock::now();
          const TrainReport tr = train(graph.active(), fresh, t);
          rec.timings.training_ms += ms_since(stage0);
          rec.trained = true;
          if (tr.diverged)
            report.notes.push_back("observation " + std::to_string(t) +
                                   ": training diverged");
        }
      }
    }

    rec.frame_id = graph.active_id;
    const Pose world = compose(graph.active().anchor_pose, pose);
    result.trajectory.push_back(
        PoseEstimate{rec.timestamp, graph.active_id, pose, world});
    world_prev2 = world_prev;
    world_prev = world;
    ++accepted;

    rec.timings.total_ms = ms_since(obs0);
    report.observations.push_back(rec);
  }

  for (const ObservationRecord& rec : report.observations) {
    report.stage_totals.sampling_ms += rec.timings.sampling_ms;
    report.stage_totals.training_ms += rec.timings.training_ms;
    report.stage_totals.registration_ms += rec.timings.registration_ms;
    report.stage_totals.total_ms += rec.timings.total_ms;
  }
  report.processed = n - report.skipped;
  report.degraded = report.skipped * 10 > n;
  if (report.degraded)
    report.notes.push_back("degraded: " + std::to_string(report.skipped) + "/" +
                           std::to_string(n) + " observations skipped");
  report.wall_ms = ms_since(wall0);
  return result;
}

// ---------------------------------------------------------------------------
// trajectory error

double rmse_of(const std::vector<double>& residuals) {
  if (residuals.empty()) throw std::invalid_argument("rmse_of: no residuals");
  double ss = 0.0;
  for (const double r : residuals) ss += r * r;
  return std::sqrt(ss / static_cast<double>(residuals.size()));
}

AteResult evaluate_ate(const std::vector<PoseEstimate>& estimate,
                       const std::vector<GroundTruthPose>& ground_truth) {
  constexpr double kWindow = 0.02;  // s
  std::vector<std::pair<const PoseEstimate*, const GroundTruthPose*>> matched;
  std::size_t j = 0;
  for (const PoseEstimate& e : estimate) {
    if (j >= ground_truth.size()) break;
    while (j + 1 < ground_truth.size() &&
           std::abs(ground_truth[j + 1].timestamp - e.timestamp) <
               std::abs(ground_truth[j].timestamp - e.timestamp))
      ++j;
    if (std::abs(ground_truth[j].timestamp - e.timestamp) <= kWindow) {
      matched.emplace_back(&e, &ground_truth[j]);
      ++j;
    }
  }
  if (matched.size() < 2)
    throw std::invalid_argument(
        "evaluate_ate: fewer than two timestamp matches");

  Eigen::Vector3d ce = Eigen::Vector3d::Zero(), cg = Eigen::Vector3d::Zero();
  for (const auto& [e, g] : matched) {
    ce += e->world.translation;
    cg += g->pose.translation;
  }
  ce /= static_cast<double>(matched.size());
  cg /= static_cast<double>(matched.size());

  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (const auto& [e, g] : matched)
    H += (e->world.translation - ce) * (g->pose.translation - cg).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0)
    D(2, 2) = -1.0;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();
  const Eigen::Vector3d tr = cg - R * ce;

  AteResult out;
  out.matches = matched.size();
  out.alignment.rotation = R;
  out.alignment.translation = tr;
  std::map<int, std::vector<double>> by_frame;
  out.errors.reserve(matched.size());
  for (const auto& [e, g] : matched) {
    const double err =
        (g->pose.translation - (R * e->world.translation + tr)).norm();
    out.errors.push_back(err);
    by_frame[e->frame_id].push_back(err);
  }
  out.rmse = rmse_of(out.errors);
  for (const auto& [id, errs] : by_frame) out.per_frame[id] = rmse_of(errs);
  return out;
}

// ---------------------------------------------------------------------------
// planner benchmark

namespace {

BenchStat stat_of(std::vector<double> v) {
  BenchStat s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const auto quantile = [&v](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

}  // namespace

std::string BenchReport::table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "planner benchmark, %d paired seeds\n", pairs);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-22s %10s %10s %10s\n", "", "median", "q1", "q3");
  out += buf;
  const auto row = [&](const char* name, const BenchStat& s) {
    std::snprintf(buf, sizeof(buf), "%-22s %10.3f %10.3f %10.3f\n", name,
                  s.median, s.q1, s.q3);
    out += buf;
  };
  row("biased runtime (ms)", biased_runtime_ms);
  row("uniform runtime (ms)", uniform_runtime_ms);
  row("biased length (m)", biased_length);
  row("uniform length (m)", uniform_length);
  row("runtime ratio", runtime_ratio);
  row("length ratio", length_ratio);
  row("tree-size ratio", node_ratio);
  std::snprintf(buf, sizeof(buf), "failures: biased %d, uniform %d\n",
                biased_failures, uniform_failures);
  out += buf;
  return out;
}

BenchReport bench_planner(const BenchmarkWorld& bench, const PlannerConfig& cfg,
                          int pairs, std::uint64_t first_seed) {
  if (pairs < 1) throw std::invalid_argument("bench_planner: pairs must be >= 1");
  BenchReport rep;
  rep.pairs = pairs;
  std::vector<double> brt, urt, blen, ulen, rrt, rlen, rnode;
  for (int i = 0; i < pairs; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    const PlanResult biased = plan(bench.start, bench.goal, bench.world, cfg, seed);
    const PlanResult uniform =
        baseline_plan(bench.start, bench.goal, bench.world, cfg, seed);
    if (!biased.success) ++rep.biased_failures;
    if (!uniform.success) ++rep.uniform_failures;
    if (biased.success) {
      brt.push_back(biased.runtime_ms);
      blen.push_back(biased.length);
    }
    if (uniform.success) {
      urt.push_back(uniform.runtime_ms);
      ulen.push_back(uniform.length);
    }
    if (biased.success && uniform.success) {
      rrt.push_back(biased.runtime_ms / std::max(1e-9, uniform.runtime_ms));
      rlen.push_back(biased.length / std::max(1e-9, uniform.length));
      rnode.push_back(static_cast<double>(uniform.tree_size) /
                      std::max(1, biased.tree_size));
    }
  }
  rep.biased_runtime_ms = stat_of(std::move(brt));
  rep.uniform_runtime_ms = stat_of(std::move(urt));
  rep.biased_length = stat_of(std::move(blen));
  rep.uniform_length = stat_of(std::move(ulen));
  rep.runtime_ratio = stat_of(std::move(rrt));
  rep.length_ratio = stat_of(std::move(rlen));
  rep.node_ratio = stat_of(std::move(rnode));
  return rep;
}

// ---------------------------------------------------------------------------
// exports

void save_trajectory_tum(const std::vector<PoseEstimate>& trajectory,
                         const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write trajectory: " + path);
  os << "# estimated trajectory\n# timestamp tx ty tz qx qy qz qw\n";
  for (const PoseEstimate& p : trajectory)
    os << tum_pose_line(p.timestamp, p.world) << "\n";
  if (!os) throw std::runtime_error("failed writing trajectory: " + path);
}

void save_report(const RunReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report: " + path);
  os << "# mapping run report\n";
  os << "# obs timestamp frame skip train spawn reason loop reg_status "
        "reg_rmse reg_iters cloud new_samples map_points sampling_ms "
        "training_ms registration_ms total_ms\n";
  char buf[320];
  for (const ObservationRecord& r : report.observations) {
    std::snprintf(buf, sizeof(buf),
                  "%d %.6f %d %d %d %d %s %d %s %.6f %d %zu %zu %zu %.3f %.3f "
                  "%.3f %.3f\n",
                  r.index, r.timestamp, r.frame_id, r.skipped ? 1 : 0,
                  r.trained ? 1 : 0, r.spawned ? 1 : 0,
                  spawn_reason_name(r.spawn_reason), r.loop_to,
                  registration_status_name(r.reg_status), r.reg_rmse,
                  r.reg_iterations, r.cloud_points, r.new_samples, r.map_points,
                  r.timings.sampling_ms, r.timings.training_ms,
                  r.timings.registration_ms, r.timings.total_ms);
    os << buf;
  }
  os << "# totals: sampling_ms training_ms registration_ms total_ms wall_ms\n";
  std::snprintf(buf, sizeof(buf), "totals %.3f %.3f %.3f %.3f %.3f\n",
                report.stage_totals.sampling_ms, report.stage_totals.training_ms,
                report.stage_totals.registration_ms,
                report.stage_totals.total_ms, report.wall_ms);
  os << buf;
  std::snprintf(buf, sizeof(buf), "processed %zu skipped %zu degraded %d\n",
                report.processed, report.skipped, report.degraded ? 1 : 0);
  os << buf;
  for (const std::string& note : report.notes) os << "# note: " << note << "\n";
  if (!os) throw std::runtime_error("failed writing report: " + path);
}

void emit_plots(const MappingResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_trajectory_tum(result.trajectory, dir + "/trajectory.txt");
  write_map_text(result.graph, dir + "/topo_map.txt");
}

void emit_plan_plot(const PlanResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write plan plot: " + path);
  os << "# planner run\n";
  os << "# tree <index> <parent> <x> <y> <z>\n";
  os << "# path <x> <y> <z>\n";
  char buf[160];
  for (std::size_t i = 0; i < result.tree_nodes.size(); ++i) {
    const Eigen::Vector3d& p = result.tree_nodes[i];
    std::snprintf(buf, sizeof(buf), "tree %zu %d %.6f %.6f %.6f\n", i,
                  result.tree_parents[i], p.x(), p.y(), p.z());
    os << buf;
  }
  for (const Eigen::Vector3d& p : result.path) {
    std::snprintf(buf, sizeof(buf), "path %.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    os << buf;
  }
  if (!os) throw std::runtime_error("failed writing plan plot: " + path);
}

}  // namespace lfmap
