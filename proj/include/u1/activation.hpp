#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace u1 {

/// H x W x C grid of channel activations, raster order row -> col -> channel.
class ActivationMap {
 public:
  /// Throws DataError when a dimension is zero, the value count does not match
  /// or a value is not finite.
  ActivationMap(std::size_t height, std::size_t width, std::size_t channels,
                std::vector<float> values, bool nonneg = false);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return height_ * width_; }

  /// Recorded, not enforced. See satisfies_nonneg().
  bool nonneg() const noexcept { return nonneg_; }
  bool satisfies_nonneg() const noexcept;

  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> pixel(std::size_t row, std::size_t col) const;
  float at(std::size_t row, std::size_t col, std::size_t channel) const;

  friend bool operator==(const ActivationMap&, const ActivationMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> values_;
  bool nonneg_;
};

/// Per-pixel squared norm of the channel vector, H x W row-major.
struct EnergyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> cells;

  double at(std::size_t row, std::size_t col) const { return cells[row * width + col]; }
};

struct CenteredCoord {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const CenteredCoord&, const CenteredCoord&) = default;
};

struct PixelVector {
  std::string image_id;
  std::size_t row = 0;
  std::size_t col = 0;
  CenteredCoord centered;
  std::vector<double> v;
  std::int64_t class_id = -1;
};

enum class PoolMode { avg, max, flatten };

// AMF: "U1AM", u32 version=1, u32 H, u32 W, u32 C, u8 nonneg, 3 reserved bytes,
// then H*W*C float32 little-endian.
inline constexpr std::uint32_t kAmfVersion = 1;
inline constexpr std::size_t kAmfHeaderSize = 24;

ActivationMap load_activation_map(const std::filesystem::path& path);
ActivationMap decode_activation_map(std::span<const std::byte> bytes);
void save_activation_map(const ActivationMap& map, const std::filesystem::path& path);
std::vector<std::byte> encode_activation_map(const ActivationMap& map);

EnergyMap energy_map(const ActivationMap& map);

/// x = col - (W-1)/2, y = (H-1)/2 - row: origin at the grid center, y up.
CenteredCoord centered_coords(std::size_t row, std::size_t col, std::size_t height,
                              std::size_t width);

/// One vector per pixel in raster order. With `normalize`, each vector is
/// scaled to unit norm; a zero pixel vector is rejected with DataError.
std::vector<PixelVector> pixel_vectors(const ActivationMap& map, bool normalize,
                                       const std::string& image_id = {},
                                       std::int64_t class_id = -1);

/// Inverse of pixel_vectors(map, false). Vectors may arrive in any order.
ActivationMap assemble_map(std::span<const PixelVector> pixels, std::size_t height,
                           std::size_t width, bool nonneg = false);

std::vector<double> pool_descriptor(const ActivationMap& map, PoolMode mode);
PoolMode parse_pool_mode(const std::string& name);

void normalize_in_place(std::span<double> v);

}  // namespace u1
