#include "wtcvae/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace wtcvae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'W', 'T', 'C', 'V'};

const char* kind_name(ModelKind k) { return k == ModelKind::cvae ? "cvae" : "identity"; }

ModelKind parse_kind(const std::string& s) {
  if (s == "cvae") return ModelKind::cvae;
  if (s == "identity") return ModelKind::identity;
  throw Error("unknown model kind '" + s + "'");
}

json header_json(const Checkpoint& c) {
  const ModelConfig& m = c.model;
  return {
      {"format_version", kCheckpointVersion},
      {"kind", kind_name(c.kind)},
      {"model",
       {{"latent_dim", m.latent_dim},
        {"label_dim", m.label_dim},
        {"table_length", m.table_length},
        {"kernel_size", m.kernel_size},
        {"encoder_channels", m.encoder_channels},
        {"encoder_strides", m.encoder_strides},
        {"decoder_channels", m.decoder_channels},
        {"upsample_factors", m.upsample_factors}}},
      {"beta_schedule",
       {{"beta_min", c.schedule.beta_min}, {"beta_max", c.schedule.beta_max}, {"warmup_epochs", c.schedule.warmup_epochs}}},
      {"label_stats",
       {{"centroid_log_min", c.stats.centroid_log_min},
        {"centroid_log_max", c.stats.centroid_log_max},
        {"density_min", c.stats.density_min},
        {"density_max", c.stats.density_max}}},
      {"split_seed", c.split_seed},
      {"train_seed", c.train_seed},
      {"epochs_completed", c.epochs_completed},
      {"metrics_digest", c.metrics_digest},
      {"parameter_count", c.parameters.size()},
  };
}

}  // namespace

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  const std::string header = header_json(c).dump();
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  binio::write_u32(out, kCheckpointVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  binio::write_f32(out, c.parameters);
  return std::move(out).str();
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw Error(origin + ": not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0, header_len = 0;
  if (!binio::read_u32(in, version) || !binio::read_u32(in, header_len)) throw Error(origin + ": corrupt header");
  if (version != kCheckpointVersion) {
    throw Error(origin + ": unknown checkpoint version " + std::to_string(version) + " (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) throw Error(origin + ": corrupt header (truncated)");

  Checkpoint c;
  std::size_t count = 0;
  try {
    const json h = json::parse(header);
    if (h.at("format_version") != kCheckpointVersion) {
      throw Error(origin + ": unknown checkpoint version " + h.at("format_version").dump());
    }
    c.kind = parse_kind(h.at("kind"));
    const json& m = h.at("model");
    c.model.latent_dim = m.at("latent_dim");
    c.model.label_dim = m.at("label_dim");
    c.model.table_length = m.at("table_length");
    c.model.kernel_size = m.at("kernel_size");
    c.model.encoder_channels = m.at("encoder_channels").get<std::vector<std::size_t>>();
    c.model.encoder_strides = m.at("encoder_strides").get<std::vector<std::size_t>>();
    c.model.decoder_channels = m.at("decoder_channels").get<std::vector<std::size_t>>();
    c.model.upsample_factors = m.at("upsample_factors").get<std::vector<std::size_t>>();
    const json& b = h.at("beta_schedule");
    c.schedule = {b.at("beta_min"), b.at("beta_max"), b.at("warmup_epochs")};
    const json& s = h.at("label_stats");
    c.stats = {s.at("centroid_log_min"), s.at("centroid_log_max"), s.at("density_min"), s.at("density_max")};
    c.split_seed = h.at("split_seed");
    c.train_seed = h.at("train_seed");
    c.epochs_completed = h.at("epochs_completed");
    c.metrics_digest = h.at("metrics_digest");
    count = h.at("parameter_count");
  } catch (const json::exception& e) {
    throw Error(origin + ": corrupt header: " + e.what());
  }
  c.model.validate();

  c.parameters.resize(count);
  if (binio::read_f32(in, c.parameters) != count) {
    throw Error(origin + ": truncated parameters (expected " + std::to_string(count) + " values)");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(origin + ": trailing bytes after parameters");
  if (c.kind == ModelKind::cvae && count != Cvae<float>(c.model).parameter_count()) {
    throw Error(origin + ": parameter count does not match the model config");
  }
  return c;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& c, const fs::path& path) { write_file_atomic(path, serialize_checkpoint(c)); }

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path.string());
}

template <class T>
Checkpoint make_checkpoint(const Cvae<T>& model, const BetaSchedule& schedule, const LabelStats& stats) {
  Checkpoint c;
  c.model = model.config();
  c.schedule = schedule;
  c.stats = stats;
  c.parameters = model.to_blob();
  return c;
}

template <class T>
Cvae<T> model_from_checkpoint(const Checkpoint& c) {
  if (c.kind != ModelKind::cvae) throw Error("checkpoint holds no CVAE parameters");
  Cvae<T> m(c.model);
  m.from_blob(c.parameters);
  return m;
}

template Checkpoint make_checkpoint(const Cvae<float>&, const BetaSchedule&, const LabelStats&);
template Checkpoint make_checkpoint(const Cvae<double>&, const BetaSchedule&, const LabelStats&);
template Cvae<float> model_from_checkpoint(const Checkpoint&);
template Cvae<double> model_from_checkpoint(const Checkpoint&);

}  // namespace wtcvae
