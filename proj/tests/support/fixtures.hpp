#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "u1/activation.hpp"
#include "u1/classifier.hpp"
#include "u1/manifest.hpp"
#include "u1/toy_net.hpp"

namespace u1::test {

ActivationMap random_map(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                         bool nonneg = false);

std::vector<double> random_vector(std::size_t dim, std::mt19937_64& rng);

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Maps whose energy concentrates in a lobe at a class-specific angle.
struct LobeParams {
  std::size_t n_classes = 5;
  std::size_t per_class = 40;
  std::size_t side = 7;
  std::size_t channels = 64;
  double lobe_radius = 2.0;
  double lobe_width = 0.6;
  double angle_offset = 0.3;
  double background = 0.15;
  double noise = 0.04;
  std::size_t hard_every = 10;  // every n-th image per class gets hard_noise
  double hard_noise = 0.3;
  std::uint64_t seed = 2024;
};

struct LobeDataset {
  std::vector<LabeledMap> maps;         // class-major order
  std::vector<double> class_angles;     // theta_c in radians
};

LobeDataset make_lobe_dataset(const LobeParams& params);

/// Full-scan class likelihood written directly from the kernel-density
/// definition, sharing no code with the classifier. Neighbors are ordered by
/// (squared distance, image_id, row, col).
std::map<std::int64_t, double> oracle_likelihood(const LabeledMap& query,
                                                 const std::vector<LabeledMap>& memory,
                                                 std::size_t k, double epsilon, bool normalize,
                                                 bool exclude_same_image);

/// Writes every map as AMF under `dir` plus dir/manifest.jsonl. Records with
/// index in `query_rows` get split "query", the rest "memory".
std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                    const std::vector<LabeledMap>& maps,
                                    const std::vector<std::size_t>& query_rows = {});

/// Largest relative error between backward() and central differences of the
/// combined loss over every parameter: |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const ToyNet& net, const Matrix& x, std::span<const std::int64_t> y,
                      std::span<const U1Label> labels, double lambda, double h = 1e-4);

}  // namespace u1::test
