#pragma once

#include <filesystem>
#include <string>

#include "ice/learning/learning.hpp"

namespace ice {

inline constexpr int store_version = 1;

struct StoredRun {
  RunState state;
  TrainSchedule schedule;
  std::string backend;
  std::size_t embedding_dim = 0;
  std::string config_sha256;
  // Files the caller placed in the store directory beforehand (e.g. the
  // synthetic world); listed and checksummed with the rest.
  std::vector<std::string> attachments;
};

// Writes concepts_manifest.json, embeddings.bin (float32 little-endian rows in
// manifest order), losses.csv, image.png and the concept masks into `dir`.
void export_concepts(const std::filesystem::path& dir, const StoredRun& run);

// Verifies the format version and every checksum before decoding.
StoredRun import_concepts(const std::filesystem::path& dir);

}  // namespace ice
