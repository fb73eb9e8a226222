#include "glassbox/store.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace glassbox::store {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("store: " + msg);
}

void write_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  if (std::fwrite(b, 1, 4, f) != 4) fail("short write");
}

std::uint32_t read_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) fail("short read");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::size_t Array::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_gbl(const fs::path& path, const Array& a) {
  if (a.numel() != a.data.size()) fail("array dims do not match data length");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail("cannot open " + path.string() + " for writing");
  if (std::fwrite("GBL1", 1, 4, f.get()) != 4) fail("short write");
  write_u32(f.get(), static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) write_u32(f.get(), d);
  static_assert(std::endian::native == std::endian::little,
                "binary format is little-endian");
  if (!a.data.empty() &&
      std::fwrite(a.data.data(), sizeof(float), a.data.size(), f.get()) !=
          a.data.size()) {
    fail("short write");
  }
}

Array read_gbl(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail("cannot open " + path.string());
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "GBL1", 4) != 0) {
    fail("bad magic in " + path.string());
  }
  Array a;
  const std::uint32_t rank = read_u32(f.get());
  if (rank > 8) fail("unreasonable rank in " + path.string());
  a.dims.resize(rank);
  for (auto& d : a.dims) d = read_u32(f.get());
  a.data.resize(a.numel());
  if (!a.data.empty() &&
      std::fread(a.data.data(), sizeof(float), a.data.size(), f.get()) !=
          a.data.size()) {
    fail("truncated data in " + path.string());
  }
  return a;
}

void write_csv(const fs::path& path, const Array& a) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) fail("cannot open " + path.string() + " for writing");
  const int rank = static_cast<int>(a.dims.size());
  if (rank == 3) {
    std::fprintf(f.get(), "subject,time,species,value\n");
  } else {
    std::string header;
    for (int r = 0; r < rank; ++r) header += "i" + std::to_string(r) + ",";
    std::fprintf(f.get(), "%svalue\n", header.c_str());
  }
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < a.data.size(); ++flat) {
    std::size_t rem = flat;
    for (int r = rank - 1; r >= 0; --r) {
      idx[r] = rem % a.dims[r];
      rem /= a.dims[r];
    }
    for (int r = 0; r < rank; ++r) {
      std::fprintf(f.get(), "%zu,", idx[r]);
    }
    std::fprintf(f.get(), "%.9g\n", static_cast<double>(a.data[flat]));
  }
}

Array read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) fail("empty csv " + path.string());
  int rank = 0;
  for (char c : header) rank += c == ',';
  Array a;
  std::vector<std::size_t> max_idx(rank, 0);
  std::vector<float> values;
  std::vector<std::vector<std::size_t>> coords;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::size_t> idx(rank);
    const char* p = line.c_str();
    char* end = nullptr;
    for (int r = 0; r < rank; ++r) {
      idx[r] = std::strtoull(p, &end, 10);
      if (*end != ',') fail("malformed csv row in " + path.string());
      p = end + 1;
      max_idx[r] = std::max(max_idx[r], idx[r]);
    }
    values.push_back(std::strtof(p, &end));
    coords.push_back(std::move(idx));
  }
  a.dims.resize(rank);
  for (int r = 0; r < rank; ++r) a.dims[r] = static_cast<std::uint32_t>(max_idx[r] + 1);
  a.data.assign(a.numel(), 0.0f);
  for (std::size_t row = 0; row < values.size(); ++row) {
    std::size_t flat = 0;
    for (int r = 0; r < rank; ++r) flat = flat * a.dims[r] + coords[row][r];
    a.data[flat] = values[row];
  }
  return a;
}

Array read_array_auto(const fs::path& stem) {
  const fs::path gbl = stem.string() + ".gbl";
  const fs::path csv = stem.string() + ".csv";
  if (fs::exists(gbl)) return read_gbl(gbl);
  if (fs::exists(csv)) return read_csv(csv);
  fail("no array found at " + stem.string() + "(.gbl|.csv)");
}

std::string sha256_bytes(const void* data, std::size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) != 1) {
    fail("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) fail("sha256 context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f.get())) > 0) {
    EVP_DigestUpdate(ctx, buf, got);
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_DigestFinal_ex(ctx, digest, &digest_len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string combined_hash(const std::map<std::string, std::string>& files) {
  std::string acc;
  for (const auto& [rel, hash] : files) {
    acc += rel;
    acc += ":";
    acc += hash;
    acc += "\n";
  }
  return sha256_bytes(acc.data(), acc.size());
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["kind"] = m.kind;
  j["format_version"] = m.format_version;
  j["created"] = m.created;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["files"] = m.files;
  j["artifact_hash"] = m.artifact_hash;
  json ups = json::array();
  for (const auto& u : m.upstream) {
    ups.push_back({{"kind", u.kind}, {"artifact_hash", u.artifact_hash},
                   {"path", u.path}});
  }
  j["upstream"] = ups;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.kind = j.at("kind").get<std::string>();
  m.format_version = j.at("format_version").get<int>();
  m.created = j.at("created").get<std::string>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.files = j.at("files").get<std::map<std::string, std::string>>();
  m.artifact_hash = j.at("artifact_hash").get<std::string>();
  for (const auto& u : j.at("upstream")) {
    m.upstream.push_back({u.at("kind").get<std::string>(),
                          u.at("artifact_hash").get<std::string>(),
                          u.at("path").get<std::string>()});
  }
  return m;
}

}  // namespace

fs::path write_artifact(const fs::path& target, const std::string& kind,
                        const json& config, std::uint64_t seed,
                        const std::vector<UpstreamRef>& upstream,
                        const PayloadWriter& fill, const WriteOptions& opts) {
  if (fs::exists(target)) {
    if (!opts.overwrite) {
      fail("artifact path exists: " + target.string() +
           " (pass overwrite to replace)");
    }
    fs::remove_all(target);
  }
  const fs::path parent = target.has_parent_path() ? target.parent_path()
                                                   : fs::path(".");
  fs::create_directories(parent);
  const fs::path tmp =
      parent / (".tmp-" + target.filename().string() + "-" +
                std::to_string(static_cast<std::uint64_t>(::getpid())));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    fill(tmp);

    Manifest m;
    m.kind = kind;
    m.created = opts.deterministic ? "1970-01-01T00:00:00Z" : now_iso8601();
    m.config = config;
    m.seed = seed;
    m.upstream = upstream;
    for (auto it = fs::recursive_directory_iterator(tmp);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file()) continue;
      const std::string rel = fs::relative(it->path(), tmp).generic_string();
      m.files[rel] = sha256_file(it->path());
    }
    m.artifact_hash = combined_hash(m.files);

    std::ofstream out(tmp / "manifest.json");
    if (!out) fail("cannot write manifest");
    out << manifest_to_json(m).dump(2) << "\n";
    out.close();

    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  return target;
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path mf = dir / "manifest.json";
  std::ifstream in(mf);
  if (!in) fail("missing manifest at " + mf.string());
  json j;
  in >> j;
  Manifest m = manifest_from_json(j);
  if (m.format_version != kFormatVersion) {
    fail("unsupported format version " + std::to_string(m.format_version) +
         " in " + dir.string());
  }
  for (const auto& [rel, expected] : m.files) {
    const fs::path p = dir / rel;
    if (!fs::exists(p)) fail("missing file " + rel + " in " + dir.string());
    const std::string actual = sha256_file(p);
    if (actual != expected) {
      fail("hash mismatch for " + rel + " in " + dir.string());
    }
  }
  if (combined_hash(m.files) != m.artifact_hash) {
    fail("artifact hash mismatch in " + dir.string());
  }
  return m;
}

Manifest verify_artifact(const fs::path& dir, const std::string& expected_kind) {
  Manifest m = read_manifest(dir);
  if (m.kind != expected_kind) {
    fail("artifact kind mismatch at " + dir.string() + ": expected " +
         expected_kind + ", found " + m.kind);
  }
  return m;
}

UpstreamRef ref_to(const fs::path& dir) {
  Manifest m = read_manifest(dir);
  return {m.kind, m.artifact_hash, fs::absolute(dir).string()};
}

namespace {

json sim_config_to_json(const sim::SimConfig& c) {
  return json{{"n_subjects", c.n_subjects},
              {"n_timepoints", c.n_timepoints},
              {"n_species", c.n_species},
              {"n_communities", c.n_communities},
              {"lambda_u", c.lambda_u},
              {"tukey_bandwidth", c.tukey_bandwidth},
              {"tukey_window", c.tukey_window},
              {"lambda_bloom", c.lambda_bloom},
              {"lambda_theta", c.lambda_theta},
              {"n_clusters", c.n_clusters},
              {"n_disease_clusters", c.n_disease_clusters},
              {"concept_threshold", c.concept_threshold},
              {"noise_high", c.noise_high},
              {"kind_probs", c.kind_probs},
              {"seed", c.seed}};
}

sim::SimConfig sim_config_from_json(const json& j) {
  sim::SimConfig c;
  c.n_subjects = j.at("n_subjects").get<int>();
  c.n_timepoints = j.at("n_timepoints").get<int>();
  c.n_species = j.at("n_species").get<int>();
  c.n_communities = j.at("n_communities").get<int>();
  c.lambda_u = j.at("lambda_u").get<double>();
  c.tukey_bandwidth = j.at("tukey_bandwidth").get<double>();
  c.tukey_window = j.at("tukey_window").get<int>();
  c.lambda_bloom = j.at("lambda_bloom").get<double>();
  c.lambda_theta = j.at("lambda_theta").get<double>();
  c.n_clusters = j.at("n_clusters").get<int>();
  c.n_disease_clusters = j.at("n_disease_clusters").get<int>();
  c.concept_threshold = j.at("concept_threshold").get<double>();
  c.noise_high = j.at("noise_high").get<double>();
  c.kind_probs = j.at("kind_probs").get<std::array<double, 4>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_array_pair(const fs::path& dir, const std::string& stem,
                      const Array& a, ArrayFormat fmt) {
  if (fmt == ArrayFormat::binary || fmt == ArrayFormat::both) {
    write_gbl(dir / (stem + ".gbl"), a);
  }
  if (fmt == ArrayFormat::csv || fmt == ArrayFormat::both) {
    write_csv(dir / (stem + ".csv"), a);
  }
}

}  // namespace

fs::path write_dataset(const fs::path& target, const sim::Generated& g,
                       ArrayFormat format, const WriteOptions& opts) {
  const sim::SubjectDataset& ds = g.dataset;
  const sim::SimConfig& cfg = ds.config;
  const int N = cfg.n_subjects, T = cfg.n_timepoints, D = cfg.n_species,
            K = cfg.n_communities;
  auto fill = [&](const fs::path& dir) {
    Array x{{static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(T),
             static_cast<std::uint32_t>(D)},
            ds.x};
    write_array_pair(dir, "x", x, format);

    Array y{{static_cast<std::uint32_t>(N)}, {}};
    y.data.reserve(N);
    for (auto v : ds.y) y.data.push_back(static_cast<float>(v));
    write_array_pair(dir, "y", y, format);

    Array split{{static_cast<std::uint32_t>(N)}, {}};
    split.data.reserve(N);
    for (auto s : ds.split) split.data.push_back(static_cast<float>(s));
    write_array_pair(dir, "split", split, format);

    const fs::path truth = dir / "truth";
    fs::create_directories(truth);
    Array theta{{static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(K)}, {}};
    theta.data.reserve(ds.theta.size());
    for (double v : ds.theta) theta.data.push_back(static_cast<float>(v));
    write_array_pair(truth, "theta", theta, format);

    Array concepts{{static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(K)}, {}};
    concepts.data.reserve(ds.concepts.size());
    for (auto v : ds.concepts) concepts.data.push_back(static_cast<float>(v));
    write_array_pair(truth, "concepts", concepts, format);

    Array cluster{{static_cast<std::uint32_t>(N)}, {}};
    cluster.data.reserve(N);
    for (int v : ds.cluster_id) cluster.data.push_back(static_cast<float>(v));
    write_array_pair(truth, "cluster_id", cluster, format);

    Array kinds{{static_cast<std::uint32_t>(K), static_cast<std::uint32_t>(D)}, {}};
    kinds.data.reserve(g.dictionary.kinds.size());
    for (auto k : g.dictionary.kinds) kinds.data.push_back(static_cast<float>(k));
    write_array_pair(truth, "kinds", kinds, format);

    Array dict{{static_cast<std::uint32_t>(K), static_cast<std::uint32_t>(T),
                static_cast<std::uint32_t>(D)},
               {}};
    dict.data.reserve(static_cast<std::size_t>(K) * T * D);
    for (const auto& entry : g.dictionary.entries) {
      for (double v : entry) dict.data.push_back(static_cast<float>(v));
    }
    write_array_pair(truth, "dictionary", dict, format);

    FilePtr f(std::fopen((truth / "bloom_centers.csv").c_str(), "w"));
    if (!f) fail("cannot write bloom_centers.csv");
    std::fprintf(f.get(), "community,species,time\n");
    for (const auto& bc : g.dictionary.bloom_centers) {
      std::fprintf(f.get(), "%d,%d,%d\n", bc.community, bc.species, bc.time);
    }
  };
  return write_artifact(target, "dataset", sim_config_to_json(cfg), cfg.seed,
                        {}, fill, opts);
}

LoadedDataset read_dataset(const fs::path& dir) {
  LoadedDataset out;
  out.manifest = verify_artifact(dir, "dataset");
  const sim::SimConfig cfg = sim_config_from_json(out.manifest.config);
  out.dataset.config = cfg;
  const int N = cfg.n_subjects, T = cfg.n_timepoints, D = cfg.n_species,
            K = cfg.n_communities;

  Array x = read_array_auto(dir / "x");
  if (x.data.size() != static_cast<std::size_t>(N) * T * D) {
    fail("dataset x has unexpected size");
  }
  out.dataset.x = std::move(x.data);

  Array y = read_array_auto(dir / "y");
  out.dataset.y.resize(N);
  for (int i = 0; i < N; ++i) out.dataset.y[i] = y.data[i] != 0.0f;

  Array split = read_array_auto(dir / "split");
  out.dataset.split.resize(N);
  for (int i = 0; i < N; ++i) {
    out.dataset.split[i] = split.data[i] != 0.0f ? sim::Split::val : sim::Split::train;
  }

  const fs::path truth = dir / "truth";
  if (fs::exists(truth)) {
    GroundTruth gt;
    Array theta = read_array_auto(truth / "theta");
    gt.theta.assign(theta.data.begin(), theta.data.end());
    Array concepts = read_array_auto(truth / "concepts");
    gt.concepts.resize(concepts.data.size());
    for (std::size_t j = 0; j < concepts.data.size(); ++j) {
      gt.concepts[j] = concepts.data[j] != 0.0f;
    }
    Array cluster = read_array_auto(truth / "cluster_id");
    gt.cluster_id.resize(cluster.data.size());
    for (std::size_t j = 0; j < cluster.data.size(); ++j) {
      gt.cluster_id[j] = static_cast<int>(cluster.data[j]);
    }
    Array kinds = read_array_auto(truth / "kinds");
    gt.kinds.resize(kinds.data.size());
    for (std::size_t j = 0; j < kinds.data.size(); ++j) {
      gt.kinds[j] = static_cast<sim::Kind>(static_cast<int>(kinds.data[j]));
    }
    Array dict = read_array_auto(truth / "dictionary");
    gt.dictionary.assign(K, std::vector<double>(static_cast<std::size_t>(T) * D));
    for (int k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < static_cast<std::size_t>(T) * D; ++j) {
        gt.dictionary[k][j] = dict.data[static_cast<std::size_t>(k) * T * D + j];
      }
    }
    std::ifstream bc(truth / "bloom_centers.csv");
    if (bc) {
      std::string line;
      std::getline(bc, line);  // header
      while (std::getline(bc, line)) {
        if (line.empty()) continue;
        sim::BloomCenter c{};
        if (std::sscanf(line.c_str(), "%d,%d,%d", &c.community, &c.species,
                        &c.time) == 3) {
          gt.bloom_centers.push_back(c);
        }
      }
    }
    // Mirror truth into the in-memory dataset fields.
    out.dataset.theta = gt.theta;
    out.dataset.concepts = gt.concepts;
    out.dataset.cluster_id = gt.cluster_id;
    out.truth = std::move(gt);
  }
  return out;
}

fs::path write_sparse_logistic(const fs::path& target,
                               const model::SparseLogisticFit& fit,
                               const feat::Standardization& standardization,
                               const std::string& representation,
                               const UpstreamRef& dataset_ref,
                               const WriteOptions& opts) {
  if (dataset_ref.artifact_hash.empty()) {
    fail("model artifact requires a dataset reference");
  }
  auto fill = [&](const fs::path& dir) {
    json j;
    j["model"] = "sparse_logistic";
    j["representation"] = representation;
    j["lambda"] = fit.lambda;
    j["intercept"] = fit.intercept;
    j["converged"] = fit.converged;
    j["feature_names"] = fit.feature_names;
    j["beta"] = fit.beta;
    j["active_set"] = fit.active_set;
    json curve = json::array();
    for (const auto& c : fit.cv_curve) {
      curve.push_back({{"lambda", c.lambda},
                       {"mean_accuracy", c.mean_accuracy},
                       {"stderr_accuracy", c.stderr_accuracy}});
    }
    j["cv_curve"] = curve;
    j["lambda_grid"] = fit.lambda_grid;
    j["standardization"] = {{"mean", standardization.mean},
                            {"stddev", standardization.stddev},
                            {"zero_variance_columns",
                             standardization.zero_variance_columns}};
    std::ofstream out(dir / "fit.json");
    out << j.dump(2) << "\n";
    out.close();
    if (!fit.path_coefs.empty()) {
      Array path{{static_cast<std::uint32_t>(fit.path_coefs.size()),
                  static_cast<std::uint32_t>(fit.beta.size())},
                 {}};
      path.data.reserve(path.numel());
      for (const auto& row : fit.path_coefs) {
        for (double v : row) path.data.push_back(static_cast<float>(v));
      }
      write_gbl(dir / "path_coefs.gbl", path);
    }
  };
  json config{{"model", "sparse_logistic"}, {"representation", representation}};
  return write_artifact(target, "model", config, 0, {dataset_ref}, fill, opts);
}

LoadedSparseLogistic read_sparse_logistic(const fs::path& dir) {
  LoadedSparseLogistic out;
  out.manifest = verify_artifact(dir, "model");
  std::ifstream in(dir / "fit.json");
  if (!in) fail("missing fit.json in " + dir.string());
  json j;
  in >> j;
  if (j.at("model") != "sparse_logistic") fail("not a sparse_logistic artifact");
  out.representation = j.at("representation").get<std::string>();
  out.fit.lambda = j.at("lambda").get<double>();
  out.fit.intercept = j.at("intercept").get<double>();
  out.fit.converged = j.at("converged").get<bool>();
  out.fit.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  out.fit.beta = j.at("beta").get<std::vector<double>>();
  out.fit.active_set = j.at("active_set").get<std::vector<int>>();
  out.fit.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  for (const auto& c : j.at("cv_curve")) {
    out.fit.cv_curve.push_back({c.at("lambda").get<double>(),
                                c.at("mean_accuracy").get<double>(),
                                c.at("stderr_accuracy").get<double>()});
  }
  out.standardization.mean =
      j.at("standardization").at("mean").get<std::vector<double>>();
  out.standardization.stddev =
      j.at("standardization").at("stddev").get<std::vector<double>>();
  out.standardization.zero_variance_columns =
      j.at("standardization").at("zero_variance_columns").get<std::vector<int>>();
  return out;
}

namespace {

json tree_node_to_json(const model::DecisionTreeFit& fit, int id) {
  const auto& nd = fit.nodes[id];
  json j;
  j["count0"] = nd.count0;
  j["count1"] = nd.count1;
  if (!nd.is_leaf()) {
    j["feature"] = nd.feature;
    j["threshold"] = nd.threshold;
    j["left"] = tree_node_to_json(fit, nd.left);
    j["right"] = tree_node_to_json(fit, nd.right);
  }
  return j;
}

int tree_node_from_json(const json& j, model::DecisionTreeFit& fit) {
  model::TreeNode nd;
  nd.count0 = j.at("count0").get<int>();
  nd.count1 = j.at("count1").get<int>();
  const int id = static_cast<int>(fit.nodes.size());
  fit.nodes.push_back(nd);
  if (j.contains("feature")) {
    const int left = tree_node_from_json(j.at("left"), fit);
    const int right = tree_node_from_json(j.at("right"), fit);
    fit.nodes[id].feature = j.at("feature").get<int>();
    fit.nodes[id].threshold = j.at("threshold").get<double>();
    fit.nodes[id].left = left;
    fit.nodes[id].right = right;
  }
  return id;
}

}  // namespace

fs::path write_tree(const fs::path& target, const model::DecisionTreeFit& fit,
                    const std::string& representation,
                    const UpstreamRef& dataset_ref, const WriteOptions& opts) {
  if (dataset_ref.artifact_hash.empty()) {
    fail("model artifact requires a dataset reference");
  }
  auto fill = [&](const fs::path& dir) {
    json j;
    j["model"] = "decision_tree";
    j["representation"] = representation;
    j["n_leaves"] = fit.n_leaves;
    j["pruning_alpha"] = fit.pruning_alpha;
    j["feature_names"] = fit.feature_names;
    j["root"] = tree_node_to_json(fit, 0);
    std::ofstream out(dir / "fit.json");
    out << j.dump(2) << "\n";
  };
  json config{{"model", "decision_tree"}, {"representation", representation}};
  return write_artifact(target, "model", config, 0, {dataset_ref}, fill, opts);
}

LoadedTree read_tree(const fs::path& dir) {
  LoadedTree out;
  out.manifest = verify_artifact(dir, "model");
  std::ifstream in(dir / "fit.json");
  if (!in) fail("missing fit.json in " + dir.string());
  json j;
  in >> j;
  if (j.at("model") != "decision_tree") fail("not a decision_tree artifact");
  out.representation = j.at("representation").get<std::string>();
  out.fit.n_leaves = j.at("n_leaves").get<int>();
  out.fit.pruning_alpha = j.at("pruning_alpha").get<double>();
  out.fit.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  tree_node_from_json(j.at("root"), out.fit);
  return out;
}

namespace {

json transformer_config_to_json(const nn::TransformerConfig& c) {
  return json{{"n_embd", c.n_embd},
              {"n_positions", c.n_positions},
              {"n_layer", c.n_layer},
              {"n_head", c.n_head},
              {"n_concept", c.n_concept},
              {"n_class", c.n_class},
              {"causal_mask", c.causal_mask},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"cbm_lambda", c.cbm_lambda},
              {"seed", c.seed}};
}

nn::TransformerConfig transformer_config_from_json(const json& j) {
  nn::TransformerConfig c;
  c.n_embd = j.at("n_embd").get<int>();
  c.n_positions = j.at("n_positions").get<int>();
  c.n_layer = j.at("n_layer").get<int>();
  c.n_head = j.at("n_head").get<int>();
  c.n_concept = j.at("n_concept").get<int>();
  c.n_class = j.at("n_class").get<int>();
  c.causal_mask = j.at("causal_mask").get<bool>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<float>();
  c.cbm_lambda = j.at("cbm_lambda").get<float>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string param_file_name(const std::string& param_name) {
  std::string s = param_name;
  for (char& c : s) {
    if (c == '.') c = '_';
  }
  return s + ".gbl";
}

}  // namespace

fs::path write_transformer(const fs::path& target,
                           const nn::TrainedTransformer& model,
                           const UpstreamRef& dataset_ref,
                           const WriteOptions& opts) {
  if (dataset_ref.artifact_hash.empty()) {
    fail("model artifact requires a dataset reference");
  }
  auto fill = [&](const fs::path& dir) {
    const fs::path params = dir / "params";
    fs::create_directories(params);
    json mapping = json::object();
    for (const ad::Param* p : model.model().params()) {
      Array a;
      a.dims.reserve(p->value.shape.size());
      for (int d : p->value.shape) a.dims.push_back(static_cast<std::uint32_t>(d));
      a.data = p->value.data;
      const std::string file = param_file_name(p->name);
      write_gbl(params / file, a);
      mapping[p->name] = "params/" + file;
    }
    // Scaler.
    Array scaler{{2, static_cast<std::uint32_t>(model.model().scaler.mean.size())},
                 {}};
    for (double v : model.model().scaler.mean) scaler.data.push_back(static_cast<float>(v));
    for (double v : model.model().scaler.stddev) scaler.data.push_back(static_cast<float>(v));
    write_gbl(dir / "scaler.gbl", scaler);

    json j;
    j["model"] = model.mode() == nn::ModelMode::cbm ? "cbm" : "transformer";
    j["config"] = transformer_config_to_json(model.config());
    j["params"] = mapping;
    std::ofstream out(dir / "model.json");
    out << j.dump(2) << "\n";
    out.close();

    FilePtr f(std::fopen((dir / "training_log.csv").c_str(), "w"));
    if (!f) fail("cannot write training_log.csv");
    std::fprintf(f.get(), "epoch,split,loss,accuracy\n");
    for (const auto& e : model.log()) {
      std::fprintf(f.get(), "%d,train,%.9g,%.9g\n", e.epoch, e.train_loss,
                   e.train_accuracy);
      std::fprintf(f.get(), "%d,val,%.9g,%.9g\n", e.epoch, e.val_loss,
                   e.val_accuracy);
    }
  };
  json config = transformer_config_to_json(model.config());
  config["model"] = model.mode() == nn::ModelMode::cbm ? "cbm" : "transformer";
  return write_artifact(target, "model", config, model.config().seed,
                        {dataset_ref}, fill, opts);
}

LoadedTransformer read_transformer(const fs::path& dir) {
  Manifest manifest = verify_artifact(dir, "model");
  std::ifstream in(dir / "model.json");
  if (!in) fail("missing model.json in " + dir.string());
  json j;
  in >> j;
  const std::string kind = j.at("model").get<std::string>();
  if (kind != "transformer" && kind != "cbm") {
    fail("not a transformer artifact");
  }
  const nn::TransformerConfig cfg = transformer_config_from_json(j.at("config"));
  nn::Transformer model(cfg, kind == "cbm" ? nn::ModelMode::cbm
                                           : nn::ModelMode::plain);
  for (ad::Param* p : model.params()) {
    const std::string rel = j.at("params").at(p->name).get<std::string>();
    Array a = read_gbl(dir / rel);
    if (a.data.size() != p->value.data.size()) {
      fail("parameter size mismatch for " + p->name);
    }
    p->value.data = std::move(a.data);
  }
  Array scaler = read_gbl(dir / "scaler.gbl");
  const std::size_t d = scaler.dims[1];
  model.scaler.mean.assign(scaler.data.begin(), scaler.data.begin() + d);
  model.scaler.stddev.assign(scaler.data.begin() + d, scaler.data.end());

  // Reload the epoch log.
  std::vector<nn::EpochLog> log;
  std::ifstream lf(dir / "training_log.csv");
  if (lf) {
    std::string line;
    std::getline(lf, line);
    std::map<int, nn::EpochLog> rows;
    while (std::getline(lf, line)) {
      int epoch = 0;
      char split[8] = {0};
      double loss = 0, acc = 0;
      if (std::sscanf(line.c_str(), "%d,%7[^,],%lf,%lf", &epoch, split, &loss,
                      &acc) == 4) {
        auto& e = rows[epoch];
        e.epoch = epoch;
        if (std::string(split) == "train") {
          e.train_loss = loss;
          e.train_accuracy = acc;
        } else {
          e.val_loss = loss;
          e.val_accuracy = acc;
        }
      }
    }
    for (auto& [_, e] : rows) log.push_back(e);
  }
  nn::TrainedTransformer out(std::move(model), std::move(log));
  return {std::move(out), std::move(manifest)};
}

}  // namespace glassbox::store
