#pragma once

// Checkpoint file: "WTCV", u32 version, u32 header length, UTF-8 JSON header,
// then the raw little-endian f32 parameter blob in Cvae::parameters() order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wtcvae/cvae.hpp"
#include "wtcvae/descriptors.hpp"

namespace wtcvae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "cvae" holds trained parameters. "identity" has no parameters and generates
// its input unchanged; it exists to validate the evaluation path end to end.
enum class ModelKind { cvae, identity };

struct Checkpoint {
  ModelKind kind = ModelKind::cvae;
  ModelConfig model;
  BetaSchedule schedule;
  LabelStats stats;
  std::uint64_t split_seed = kDefaultSplitSeed;
  std::uint64_t train_seed = 0;
  std::uint64_t epochs_completed = 0;
  std::string metrics_digest;  // hex FNV-1a 64 of the metric CSV
  std::vector<float> parameters;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Byte image of the file save_checkpoint writes.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

template <class T>
Checkpoint make_checkpoint(const Cvae<T>& model, const BetaSchedule& schedule, const LabelStats& stats);

// Throws Error for non-cvae checkpoints.
template <class T>
Cvae<T> model_from_checkpoint(const Checkpoint& ckpt);

std::string fnv1a_hex(const std::string& data);

// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace wtcvae
