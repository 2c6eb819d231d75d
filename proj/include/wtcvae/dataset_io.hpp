#pragma once

// On-disk dataset: a JSON manifest next to a raw little-endian f32 table file
// (600 values per record, manifest order).

#include <filesystem>
#include <string>
#include <vector>

#include "wtcvae/descriptors.hpp"
#include "wtcvae/wavetable.hpp"

namespace wtcvae {

struct StoredDataset {
  Dataset dataset;
  LabelStats stats;
  std::vector<std::string> sources;  // parallel to dataset.tables
  std::vector<SemanticLabels> labels;  // parallel to dataset.tables, from `stats`
};

struct IngestReport {
  StoredDataset data;
  std::vector<std::string> skipped;  // one diagnostic per rejected file
};

inline constexpr const char* kTablesFileName = "tables.f32";

// Every *.wav under `dir` (sorted by relative path): decode, resample,
// normalize, split with `seed`, fit stats on the training split, label.
// Files that fail to decode or are silent are skipped with a diagnostic.
// Throws Error when fewer than 10 tables survive.
IngestReport ingest_directory(const std::filesystem::path& dir, std::uint64_t seed = kDefaultSplitSeed);

// Builds a StoredDataset from tables already in memory.
StoredDataset make_dataset(std::vector<Wavetable> tables, std::vector<std::string> sources,
                           std::uint64_t seed = kDefaultSplitSeed);

// Writes `manifest` and tables.f32 beside it.
void save_dataset(const StoredDataset& data, const std::filesystem::path& manifest);
StoredDataset load_dataset(const std::filesystem::path& manifest);

// source_id,bright,warm,rich
void write_labels_csv(const StoredDataset& data, const std::filesystem::path& path);

}  // namespace wtcvae
