#include "wtcvae/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "binary_io.hpp"

namespace wtcvae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

json stats_json(const LabelStats& s) {
  return {{"centroid_log_min", s.centroid_log_min},
          {"centroid_log_max", s.centroid_log_max},
          {"density_min", s.density_min},
          {"density_max", s.density_max}};
}

}  // namespace

StoredDataset make_dataset(std::vector<Wavetable> tables, std::vector<std::string> sources, std::uint64_t seed) {
  if (sources.size() != tables.size()) throw Error("make_dataset: sources and tables differ in count");
  StoredDataset d;
  d.dataset.shuffle_seed = seed;
  d.dataset.split = split_dataset(tables.size(), seed);
  d.dataset.tables = std::move(tables);
  d.sources = std::move(sources);
  d.stats = fit_label_stats(d.dataset);
  d.labels.reserve(d.dataset.tables.size());
  for (const Wavetable& t : d.dataset.tables) d.labels.push_back(compute_labels(t, d.stats));
  return d;
}

IngestReport ingest_directory(const fs::path& dir, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw Error("ingest: not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());

  IngestReport report;
  std::vector<Wavetable> tables;
  std::vector<std::string> sources;
  for (const fs::path& rel : files) {
    try {
      const auto raw = load_single_cycle(dir / rel);
      Wavetable t = normalize_table(resample_to_table(raw), rel.stem().string(), tables.size());
      tables.push_back(std::move(t));
      sources.push_back(rel.generic_string());
    } catch (const Error& e) {
      report.skipped.push_back(e.what());
    }
  }
  if (tables.empty()) throw Error("ingest: no readable single-cycle files in " + dir.string());
  if (tables.size() < 10) {
    throw Error("ingest: need at least 10 readable tables, found " + std::to_string(tables.size()));
  }
  report.data = make_dataset(std::move(tables), std::move(sources), seed);
  return report;
}

void save_dataset(const StoredDataset& data, const fs::path& manifest) {
  const auto& ds = data.dataset;
  json entries = json::array();
  for (std::size_t i = 0; i < ds.tables.size(); ++i) {
    const SemanticLabels& l = data.labels[i];
    entries.push_back({{"source", data.sources[i]},
                       {"source_id", ds.tables[i].source_id},
                       {"name", ds.tables[i].name},
                       {"split", std::string(to_string(ds.split[i]))},
                       {"labels", {l.bright, l.warm, l.rich}}});
  }
  const json doc = {{"format", "wtcvae-dataset"},    {"version", kManifestVersion},
                    {"seed", ds.shuffle_seed},      {"table_length", kTableLength},
                    {"tables_file", kTablesFileName}, {"label_stats", stats_json(data.stats)},
                    {"entries", entries}};
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  {
    std::ofstream out(manifest);
    out << std::setw(1) << doc << '\n';
    if (!out) throw Error("cannot write manifest " + manifest.string());
  }
  const fs::path blob = manifest.parent_path() / kTablesFileName;
  std::ofstream out(blob, std::ios::binary);
  for (const Wavetable& t : ds.tables) binio::write_f32(out, t.samples);
  if (!out) throw Error("cannot write " + blob.string());
}

StoredDataset load_dataset(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open dataset manifest " + manifest.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("corrupt dataset manifest " + manifest.string() + ": " + e.what());
  }
  try {
    if (doc.at("format") != "wtcvae-dataset" || doc.at("version") != kManifestVersion) {
      throw Error("unsupported dataset manifest " + manifest.string());
    }
    if (doc.at("table_length").get<std::size_t>() != kTableLength) throw Error("dataset table length is not 600");
    StoredDataset d;
    const json& st = doc.at("label_stats");
    d.stats = {st.at("centroid_log_min"), st.at("centroid_log_max"), st.at("density_min"), st.at("density_max")};
    d.stats.validate();
    d.dataset.shuffle_seed = doc.at("seed");
    const fs::path blob_path = manifest.parent_path() / doc.at("tables_file").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw Error("cannot open " + blob_path.string());
    for (const json& e : doc.at("entries")) {
      Wavetable t;
      t.name = e.at("name");
      t.source_id = e.at("source_id");
      t.samples.resize(kTableLength);
      if (binio::read_f32(blob, t.samples) != kTableLength) throw Error("truncated table file " + blob_path.string());
      d.dataset.tables.push_back(std::move(t));
      d.dataset.split.push_back(parse_split(e.at("split").get<std::string>()));
      d.sources.push_back(e.at("source"));
      const json& l = e.at("labels");
      d.labels.push_back({l.at(0), l.at(1), l.at(2)});
    }
    return d;
  } catch (const json::exception& e) {
    throw Error("corrupt dataset manifest " + manifest.string() + ": " + e.what());
  }
}

void write_labels_csv(const StoredDataset& data, const fs::path& path) {
  std::ofstream out(path);
  out << "source_id,bright,warm,rich\n" << std::setprecision(17);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const SemanticLabels& l = data.labels[i];
    out << data.dataset.tables[i].source_id << ',' << l.bright << ',' << l.warm << ',' << l.rich << '\n';
  }
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace wtcvae
