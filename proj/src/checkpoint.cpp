#include "lfmap/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace lfmap {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  put<std::int64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
}
Eigen::VectorXd get_vector(std::istream& is) {
  const auto n = get<std::int64_t>(is);
  if (n < 0) throw std::runtime_error("checkpoint: negative vector length");
  Eigen::VectorXd v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!is) throw std::runtime_error("checkpoint: truncated vector");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const FeatureStore& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kMagic, 4);
  put(os, kVersion);

  put<std::int32_t>(os, params.arch.feature_dim);
  put<std::int32_t>(os, params.arch.pe_bands);
  put<std::int32_t>(os, static_cast<std::int32_t>(params.arch.hidden.size()));
  for (int h : params.arch.hidden) put<std::int32_t>(os, h);
  put(os, params.arch.softplus_beta);

  put_vector(os, params.theta);
  put_vector(os, params.ewc_anchor);
  put_vector(os, params.ewc_importance);

  put(os, store.voxel_size());
  put<std::int32_t>(os, store.feature_dim());
  put<std::int32_t>(os, store.neighbor_count());
  put<std::uint64_t>(os, store.size());

  // Sorted keys keep the byte stream independent of hash-table order.
  std::vector<std::pair<VoxelKey, const MapPoint*>> entries;
  entries.reserve(store.size());
  store.for_each([&](const VoxelKey& k, const MapPoint& mp) {
    entries.emplace_back(k, &mp);
  });
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.x, a.first.y, a.first.z) <
           std::tie(b.first.x, b.first.y, b.first.z);
  });
  for (const auto& [key, mp] : entries) {
    put(os, key.x);
    put(os, key.y);
    put(os, key.z);
    put(os, mp->position.x());
    put(os, mp->position.y());
    put(os, mp->position.z());
    os.write(reinterpret_cast<const char*>(mp->feature.data()),
             static_cast<std::streamsize>(sizeof(double) * mp->feature.size()));
    put<std::int32_t>(os, mp->semantic);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  }

  Checkpoint ck;
  ck.params.arch.feature_dim = get<std::int32_t>(is);
  ck.params.arch.pe_bands = get<std::int32_t>(is);
  const auto n_hidden = get<std::int32_t>(is);
  ck.params.arch.hidden.resize(static_cast<std::size_t>(n_hidden));
  for (auto& h : ck.params.arch.hidden) h = get<std::int32_t>(is);
  ck.params.arch.softplus_beta = get<double>(is);

  ck.params.theta = get_vector(is);
  ck.params.ewc_anchor = get_vector(is);
  ck.params.ewc_importance = get_vector(is);
  if (ck.params.theta.size() != ck.params.param_count()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }

  const auto voxel_size = get<double>(is);
  const auto feature_dim = get<std::int32_t>(is);
  const auto k = get<std::int32_t>(is);
  ck.store = FeatureStore(voxel_size, feature_dim, k);
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    (void)get<std::int32_t>(is);  // key is re-derived from the position
    (void)get<std::int32_t>(is);
    (void)get<std::int32_t>(is);
    MapPoint mp;
    mp.position.x() = get<double>(is);
    mp.position.y() = get<double>(is);
    mp.position.z() = get<double>(is);
    mp.feature.resize(feature_dim);
    is.read(reinterpret_cast<char*>(mp.feature.data()),
            static_cast<std::streamsize>(sizeof(double) * feature_dim));
    if (!is) throw std::runtime_error("checkpoint: truncated point record");
    mp.semantic = get<std::int32_t>(is);
    ck.store.insert(mp);
  }
  return ck;
}

}  // namespace lfmap
