#include "u1/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "u1/errors.hpp"

namespace u1 {

std::string encode_pgm(std::size_t height, std::size_t width, std::span<const double> values,
                       PgmScaling* scaling) {
  if (height == 0 || width == 0) throw std::invalid_argument("pgm: empty image");
  if (values.size() != height * width) throw std::invalid_argument("pgm: value count mismatch");
  if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("pgm: non-finite value");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  PgmScaling s{*lo, *hi, *hi > *lo ? 255.0 / (*hi - *lo) : 0.0};
  std::string out = fmt::format("P5\n{} {}\n255\n", width, height);
  out.reserve(out.size() + values.size());
  for (double v : values) {
    const double p = std::clamp(std::round((v - s.min) * s.scale), 0.0, 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(p)));
  }
  if (scaling) *scaling = s;
  return out;
}

nlohmann::json to_json(const PgmScaling& s, std::size_t height, std::size_t width) {
  return {{"height", height}, {"width", width}, {"min", s.min}, {"max", s.max}, {"scale", s.scale},
          {"mapping", "pixel = round((value - min) * scale)"}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PgmScaling write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const double> values) {
  PgmScaling s;
  write_text(path, encode_pgm(height, width, values, &s));
  write_text(path.string() + ".json", to_json(s, height, width).dump(2) + "\n");
  return s;
}

PgmScaling write_heatmap(const std::filesystem::path& path, const EnergyMap& energy) {
  return write_pgm(path, energy.height, energy.width, energy.cells);
}

PgmScaling write_heatmap(const std::filesystem::path& path, const Histogram2D& hist) {
  return write_pgm(path, hist.height, hist.width, hist.probability);
}

nlohmann::json ingest_summary(std::span<const MemoryRecord> records) {
  std::map<std::string, std::size_t> splits;
  std::map<std::int64_t, std::pair<std::string, std::size_t>> classes;
  std::vector<std::string> violations;
  std::size_t h = 0, w = 0, c = 0;
  for (const auto& r : records) {
    const auto map = load_activation_map(r.path);
    if (h == 0) {
      h = map.height(), w = map.width(), c = map.channels();
    } else if (map.height() != h || map.width() != w || map.channels() != c) {
      throw DataError(fmt::format("{}: shape {}x{}x{} differs from {}x{}x{}", r.image_id,
                                  map.height(), map.width(), map.channels(), h, w, c));
    }
    if (!map.satisfies_nonneg()) violations.push_back(r.image_id);
    ++splits[to_string(r.split)];
    auto& entry = classes[r.class_id];
    entry.first = r.class_name;
    ++entry.second;
  }
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& [id, entry] : classes) {
    cls.push_back({{"class_id", id}, {"class_name", entry.first}, {"count", entry.second}});
  }
  return {{"records", records.size()},
          {"shape", {h, w, c}},
          {"splits", splits},
          {"classes", cls},
          {"nonneg_violations", violations}};
}

nlohmann::json bundle_report(std::span<const std::filesystem::path> inputs,
                             const std::filesystem::path& out_dir) {
  std::set<std::string> names;
  for (const auto& p : inputs) {
    if (!names.insert(p.filename().string()).second) {
      throw std::invalid_argument("duplicate artifact name: " + p.filename().string());
    }
  }
  std::filesystem::create_directories(out_dir);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : inputs) {
    if (!std::filesystem::is_regular_file(p)) throw DataError("not a file: " + p.string());
    const auto name = p.filename().string();
    const auto ext = p.extension().string();
    const std::string kind = ext == ".csv" ? "csv" : ext == ".pgm" ? "pgm" : ext == ".json" ? "json" : "other";
    std::filesystem::copy_file(p, out_dir / name, std::filesystem::copy_options::overwrite_existing);
    files.push_back({{"name", name}, {"kind", kind}, {"bytes", std::filesystem::file_size(p)}});
  }
  nlohmann::json index = {{"artifacts", files}};
  write_text(out_dir / "index.json", index.dump(2) + "\n");
  return index;
}

}  // namespace u1
