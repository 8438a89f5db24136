#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace u1 {

enum class Split { train, memory, query, test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct MemoryRecord {
  std::string image_id;
  std::int64_t class_id = 0;
  std::string class_name;
  Split split = Split::memory;
  std::filesystem::path path;

  bool is_memory() const { return split == Split::train || split == Split::memory; }
};

/// JSON-lines manifest. Relative paths are resolved against the manifest's
/// directory. Throws DataError on malformed lines, duplicate image ids or a
/// class_id / class_name disagreement.
std::vector<MemoryRecord> read_manifest(const std::filesystem::path& path);
std::vector<MemoryRecord> parse_manifest(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
void write_manifest(const std::vector<MemoryRecord>& records, const std::filesystem::path& path);

void validate_manifest(const std::vector<MemoryRecord>& records);

}  // namespace u1
