#include "u1/activation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "u1/errors.hpp"
#include "u1/simd/kernels.hpp"

namespace u1 {

static_assert(std::endian::native == std::endian::little,
              "AMF/U1IX readers assume a little-endian host");

ActivationMap::ActivationMap(std::size_t height, std::size_t width, std::size_t channels,
                             std::vector<float> values, bool nonneg)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)),
      nonneg_(nonneg) {
  if (height_ == 0 || width_ == 0 || channels_ == 0) {
    throw DataError(fmt::format("activation map has a zero dimension ({}x{}x{})", height_,
                                width_, channels_));
  }
  if (values_.size() != height_ * width_ * channels_) {
    throw DataError(fmt::format("activation map expects {} values, got {}",
                                height_ * width_ * channels_, values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError(fmt::format("non-finite activation value at flat index {}", i));
    }
  }
}

bool ActivationMap::satisfies_nonneg() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return v >= 0.0f; });
}

std::span<const float> ActivationMap::pixel(std::size_t row, std::size_t col) const {
  if (row >= height_ || col >= width_) throw std::out_of_range("pixel index out of range");
  return std::span<const float>(values_).subspan((row * width_ + col) * channels_, channels_);
}

float ActivationMap::at(std::size_t row, std::size_t col, std::size_t channel) const {
  if (channel >= channels_) throw std::out_of_range("channel index out of range");
  return pixel(row, col)[channel];
}

namespace {

std::uint32_t read_u32(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, sizeof v);
  return v;
}

void append_u32(std::vector<std::byte>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

}  // namespace

ActivationMap decode_activation_map(std::span<const std::byte> bytes) {
  if (bytes.size() < kAmfHeaderSize) throw DataError("AMF: truncated header");
  if (std::memcmp(bytes.data(), "U1AM", 4) != 0) throw DataError("AMF: bad magic bytes");
  const std::uint32_t version = read_u32(bytes, 4);
  if (version != kAmfVersion) throw DataError(fmt::format("AMF: unsupported version {}", version));
  const std::size_t h = read_u32(bytes, 8);
  const std::size_t w = read_u32(bytes, 12);
  const std::size_t c = read_u32(bytes, 16);
  const auto nonneg_byte = static_cast<std::uint8_t>(bytes[20]);
  if (nonneg_byte > 1) throw DataError("AMF: nonneg flag must be 0 or 1");
  if (h == 0 || w == 0 || c == 0) {
    throw DataError(fmt::format("AMF: zero dimension in header ({}x{}x{})", h, w, c));
  }
  const std::size_t count = h * w * c;
  const std::size_t payload = bytes.size() - kAmfHeaderSize;
  if (payload != count * sizeof(float)) {
    throw DataError(fmt::format("AMF: truncated payload (expected {} bytes, got {})",
                                count * sizeof(float), payload));
  }
  std::vector<float> values(count);
  std::memcpy(values.data(), bytes.data() + kAmfHeaderSize, payload);
  return ActivationMap(h, w, c, std::move(values), nonneg_byte == 1);
}

ActivationMap load_activation_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("AMF: cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_activation_map(std::as_bytes(std::span<const char>(raw)));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<std::byte> encode_activation_map(const ActivationMap& map) {
  std::vector<std::byte> out;
  out.reserve(kAmfHeaderSize + map.values().size_bytes());
  for (char ch : {'U', '1', 'A', 'M'}) out.push_back(static_cast<std::byte>(ch));
  append_u32(out, kAmfVersion);
  append_u32(out, static_cast<std::uint32_t>(map.height()));
  append_u32(out, static_cast<std::uint32_t>(map.width()));
  append_u32(out, static_cast<std::uint32_t>(map.channels()));
  out.push_back(static_cast<std::byte>(map.nonneg() ? 1 : 0));
  out.insert(out.end(), 3, std::byte{0});
  const auto payload = std::as_bytes(map.values());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void save_activation_map(const ActivationMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_activation_map(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("AMF: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EnergyMap energy_map(const ActivationMap& map) {
  EnergyMap e{map.height(), map.width(), std::vector<double>(map.pixel_count())};
  const auto& k = simd::active_kernels();
  const std::size_t c = map.channels();
  const float* data = map.values().data();
  for (std::size_t p = 0; p < map.pixel_count(); ++p) e.cells[p] = k.sum_squares_f32(data + p * c, c);
  return e;
}

CenteredCoord centered_coords(std::size_t row, std::size_t col, std::size_t height,
                              std::size_t width) {
  return {static_cast<double>(col) - (static_cast<double>(width) - 1.0) / 2.0,
          (static_cast<double>(height) - 1.0) / 2.0 - static_cast<double>(row)};
}

void normalize_in_place(std::span<double> v) {
  const double norm = std::sqrt(simd::dot(v, v));
  if (norm == 0.0) throw DataError("cannot normalize a zero vector");
  for (double& x : v) x /= norm;
}

std::vector<PixelVector> pixel_vectors(const ActivationMap& map, bool normalize,
                                       const std::string& image_id, std::int64_t class_id) {
  std::vector<PixelVector> out;
  out.reserve(map.pixel_count());
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      const auto px = map.pixel(r, c);
      PixelVector pv{image_id, r, c, centered_coords(r, c, map.height(), map.width()),
                     std::vector<double>(px.begin(), px.end()), class_id};
      if (normalize) {
        try {
          normalize_in_place(pv.v);
        } catch (const DataError&) {
          throw DataError(fmt::format("zero pixel vector at ({}, {}) of image '{}' cannot be "
                                      "normalized", r, c, image_id));
        }
      }
      out.push_back(std::move(pv));
    }
  }
  return out;
}

ActivationMap assemble_map(std::span<const PixelVector> pixels, std::size_t height,
                           std::size_t width, bool nonneg) {
  if (pixels.size() != height * width) throw DataError("assemble_map: pixel count mismatch");
  const std::size_t channels = pixels.front().v.size();
  std::vector<float> values(height * width * channels);
  std::vector<bool> seen(height * width, false);
  for (const auto& pv : pixels) {
    if (pv.row >= height || pv.col >= width || pv.v.size() != channels) {
      throw DataError("assemble_map: pixel outside grid or channel mismatch");
    }
    const std::size_t p = pv.row * width + pv.col;
    if (seen[p]) throw DataError("assemble_map: duplicate pixel");
    seen[p] = true;
    std::transform(pv.v.begin(), pv.v.end(), values.begin() + static_cast<std::ptrdiff_t>(p * channels),
                   [](double x) { return static_cast<float>(x); });
  }
  return ActivationMap(height, width, channels, std::move(values), nonneg);
}

std::vector<double> pool_descriptor(const ActivationMap& map, PoolMode mode) {
  const std::size_t c = map.channels();
  const auto values = map.values();
  switch (mode) {
    case PoolMode::flatten:
      return std::vector<double>(values.begin(), values.end());
    case PoolMode::avg: {
      std::vector<double> out(c, 0.0);
      for (std::size_t i = 0; i < values.size(); ++i) out[i % c] += values[i];
      for (double& x : out) x /= static_cast<double>(map.pixel_count());
      return out;
    }
    case PoolMode::max: {
      std::vector<double> out(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(c));
      for (std::size_t i = c; i < values.size(); ++i) out[i % c] = std::max<double>(out[i % c], values[i]);
      return out;
    }
  }
  throw std::invalid_argument("unknown pool mode");
}

PoolMode parse_pool_mode(const std::string& name) {
  if (name == "avg") return PoolMode::avg;
  if (name == "max") return PoolMode::max;
  if (name == "flatten") return PoolMode::flatten;
  throw std::invalid_argument("unknown pool mode: " + name);
}

}  // namespace u1
