#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glassbox/decision_tree.hpp"
#include "glassbox/featurize.hpp"
#include "glassbox/sim.hpp"
#include "glassbox/sparse_logistic.hpp"
#include "glassbox/transformer.hpp"

namespace glassbox::store {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---- low-level array io -------------------------------------------------
// Binary tensor format: magic "GBL1", little-endian, u32 rank, u32 dims,
// then row-major 32-bit floats.

struct Array {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const;
};

void write_gbl(const fs::path& path, const Array& a);
Array read_gbl(const fs::path& path);

// CSV twin of the binary format. Dataset trajectories use the documented
// (subject, time, species, value) header; other ranks get generic index
// columns. Values print with %.9g, which round-trips f32 exactly.
void write_csv(const fs::path& path, const Array& a);
Array read_csv(const fs::path& path);

// Reads path.gbl or path.csv, whichever exists (binary preferred).
Array read_array_auto(const fs::path& path_without_ext);

// ---- hashing ------------------------------------------------------------

std::string sha256_bytes(const void* data, std::size_t len);
std::string sha256_file(const fs::path& path);

// ---- manifests and artifacts ---------------------------------------------

struct UpstreamRef {
  std::string kind;
  std::string artifact_hash;
  std::string path;  // hint, possibly relative to the artifact
};

struct Manifest {
  std::string kind;
  int format_version = kFormatVersion;
  std::string created;
  json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> files;  // relative path -> sha256
  std::vector<UpstreamRef> upstream;
  std::string artifact_hash;
};

struct WriteOptions {
  bool overwrite = false;
  // Pin the created timestamp so reruns are byte-identical.
  bool deterministic = false;
};

using PayloadWriter = std::function<void(const fs::path& dir)>;

// Atomic artifact write: payload lands in a temp dir next to the target,
// files are hashed into manifest.json, then the directory is renamed into
// place. An existing target is an error unless overwrite is set.
fs::path write_artifact(const fs::path& target, const std::string& kind,
                        const json& config, std::uint64_t seed,
                        const std::vector<UpstreamRef>& upstream,
                        const PayloadWriter& fill, const WriteOptions& opts = {});

// Parses manifest.json and verifies every listed file hash; the combined
// artifact hash is recomputed as well.
Manifest read_manifest(const fs::path& dir);
Manifest verify_artifact(const fs::path& dir, const std::string& expected_kind);

// ---- dataset artifacts -----------------------------------------------------

enum class ArrayFormat { binary, csv, both };

struct GroundTruth {
  std::vector<double> theta;            // N x K
  std::vector<std::uint8_t> concepts;   // N x K
  std::vector<int> cluster_id;          // N
  std::vector<sim::Kind> kinds;         // K x D
  std::vector<sim::BloomCenter> bloom_centers;
  std::vector<std::vector<double>> dictionary;  // K entries, T*D
};

struct LoadedDataset {
  sim::SubjectDataset dataset;
  std::optional<GroundTruth> truth;
  Manifest manifest;
};

fs::path write_dataset(const fs::path& target, const sim::Generated& g,
                       ArrayFormat format = ArrayFormat::binary,
                       const WriteOptions& opts = {});
LoadedDataset read_dataset(const fs::path& dir);

// ---- model artifacts -------------------------------------------------------

fs::path write_sparse_logistic(const fs::path& target,
                               const model::SparseLogisticFit& fit,
                               const feat::Standardization& standardization,
                               const std::string& representation,
                               const UpstreamRef& dataset_ref,
                               const WriteOptions& opts = {});
struct LoadedSparseLogistic {
  model::SparseLogisticFit fit;
  feat::Standardization standardization;
  std::string representation;
  Manifest manifest;
};
LoadedSparseLogistic read_sparse_logistic(const fs::path& dir);

fs::path write_tree(const fs::path& target, const model::DecisionTreeFit& fit,
                    const std::string& representation,
                    const UpstreamRef& dataset_ref,
                    const WriteOptions& opts = {});
struct LoadedTree {
  model::DecisionTreeFit fit;
  std::string representation;
  Manifest manifest;
};
LoadedTree read_tree(const fs::path& dir);

fs::path write_transformer(const fs::path& target,
                           const nn::TrainedTransformer& model,
                           const UpstreamRef& dataset_ref,
                           const WriteOptions& opts = {});
struct LoadedTransformer {
  nn::TrainedTransformer model;
  Manifest manifest;
};
LoadedTransformer read_transformer(const fs::path& dir);

// Upstream reference for an already-written artifact directory.
UpstreamRef ref_to(const fs::path& dir);

}  // namespace glassbox::store
