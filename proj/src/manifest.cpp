#include "u1/manifest.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "u1/errors.hpp"

namespace u1 {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::memory: return "memory";
    case Split::query: return "query";
    case Split::test: return "test";
  }
  return "memory";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "memory") return Split::memory;
  if (name == "query") return Split::query;
  if (name == "test") return Split::test;
  throw DataError("unknown split: " + name);
}

void validate_manifest(const std::vector<MemoryRecord>& records) {
  std::set<std::string> ids;
  std::map<std::int64_t, std::string> names;
  for (const auto& r : records) {
    if (r.image_id.empty()) throw DataError("manifest: empty image_id");
    if (r.class_id < 0) throw DataError("manifest: negative class_id for " + r.image_id);
    if (!ids.insert(r.image_id).second) throw DataError("manifest: duplicate image_id " + r.image_id);
    auto [it, inserted] = names.emplace(r.class_id, r.class_name);
    if (!inserted && it->second != r.class_name) {
      throw DataError(fmt::format("manifest: class_id {} named both '{}' and '{}'", r.class_id,
                                  it->second, r.class_name));
    }
  }
}

std::vector<MemoryRecord> parse_manifest(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  std::vector<MemoryRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MemoryRecord r;
      r.path = j.at("path").get<std::string>();
      if (r.path.is_relative() && !base_dir.empty()) r.path = base_dir / r.path;
      r.image_id = j.at("image_id").get<std::string>();
      r.class_id = j.at("class_id").get<std::int64_t>();
      r.class_name = j.at("class_name").get<std::string>();
      r.split = parse_split(j.at("split").get<std::string>());
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("manifest line {}: {}", line_no, e.what()));
    }
  }
  validate_manifest(records);
  return records;
}

std::vector<MemoryRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

void write_manifest(const std::vector<MemoryRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    nlohmann::json j;
    j["path"] = r.path.generic_string();
    j["image_id"] = r.image_id;
    j["class_id"] = r.class_id;
    j["class_name"] = r.class_name;
    j["split"] = to_string(r.split);
    out << j.dump() << '\n';
  }
}

}  // namespace u1
