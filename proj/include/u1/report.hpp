#pragma once

// File artifacts: 8-bit PGM heatmaps with JSON scaling sidecars, text files,
// and report bundles with an index.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "u1/activation.hpp"
#include "u1/manifest.hpp"
#include "u1/symmetry.hpp"

namespace u1 {

/// Pixel = round(255 * (v - min) / (max - min)); a constant image maps to 0.
struct PgmScaling {
  double min = 0.0;
  double max = 0.0;
  double scale = 0.0;  // 255 / (max - min), 0 for a constant image
};

/// Binary P5 with maxval 255, rows top to bottom. Throws std::invalid_argument
/// when values.size() != height * width or a value is not finite.
std::string encode_pgm(std::size_t height, std::size_t width, std::span<const double> values,
                       PgmScaling* scaling = nullptr);

nlohmann::json to_json(const PgmScaling& scaling, std::size_t height, std::size_t width);

/// Writes `path` and `path` + ".json" (the scaling sidecar).
PgmScaling write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const double> values);
PgmScaling write_heatmap(const std::filesystem::path& path, const EnergyMap& energy);
PgmScaling write_heatmap(const std::filesystem::path& path, const Histogram2D& hist);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Summary of a manifest and its AMF files: counts per split and class,
/// common shape, and images that violate their nonneg flag. Throws
/// DataError on unreadable files or mixed shapes.
nlohmann::json ingest_summary(std::span<const MemoryRecord> records);

/// Copies each input into `out_dir` and writes out_dir/index.json listing
/// name, kind (csv, pgm, json, other) and size. Duplicate base names throw
/// std::invalid_argument. Returns the index.
nlohmann::json bundle_report(std::span<const std::filesystem::path> inputs,
                             const std::filesystem::path& out_dir);

}  // namespace u1
