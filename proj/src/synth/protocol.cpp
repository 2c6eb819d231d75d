#include "wtcvae/synth/protocol.hpp"

#include <cmath>
#include <initializer_list>

#include <json.hpp>

#include "wtcvae/fft.hpp"

namespace wtcvae::protocol {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ProtocolError(what); }

json parse_object(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("malformed JSON");
  if (!j.is_object()) fail("message must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) fail("missing string field 'type'");
  return j;
}

void expect_fields(const json& j, std::initializer_list<const char*> fields) {
  for (const char* f : fields) {
    if (!j.contains(f)) fail(j["type"].get<std::string>() + ": missing field '" + f + "'");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "type") continue;
    bool known = false;
    for (const char* f : fields) known |= key == f;
    if (!known) fail(j["type"].get<std::string>() + ": unexpected field '" + key + "'");
  }
}

double number(const json& j, const char* field) {
  const json& v = j.at(field);
  if (!v.is_number()) fail(std::string("'") + field + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(std::string("'") + field + "' must be finite");
  return x;
}

double unit_number(const json& j, const char* field) {
  const double x = number(j, field);
  if (x < 0.0 || x > 1.0) fail(std::string("'") + field + "' must be in [0, 1]");
  return x;
}

std::int64_t integer(const json& j, const char* field, std::int64_t lo, std::int64_t hi) {
  const json& v = j.at(field);
  if (!v.is_number_integer()) fail(std::string("'") + field + "' must be an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
    fail(std::string("'") + field + "' out of range");
  }
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) fail(std::string("'") + field + "' out of range");
  return x;
}

SemanticLabels labels_object(const json& j, const char* field) {
  const json& v = j.at(field);
  if (!v.is_object()) fail(std::string("'") + field + "' must be an object");
  SemanticLabels l;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v.contains(kLabelNames[i])) fail(std::string("'") + field + "' lacks '" + kLabelNames[i] + "'");
    l[i] = unit_number(v, kLabelNames[i]);
  }
  if (v.size() != 3) fail(std::string("'") + field + "' has unexpected entries");
  return l;
}

json labels_json(const SemanticLabels& l) { return {{"bright", l.bright}, {"warm", l.warm}, {"rich", l.rich}}; }

constexpr std::int64_t kMaxId = std::int64_t{1} << 53;

}  // namespace

ClientMessage parse_client(std::string_view text) {
  const json j = parse_object(text);
  const std::string type = j["type"];
  if (type == "set_labels") {
    expect_fields(j, {"bright", "warm", "rich"});
    return SetLabels{{unit_number(j, "bright"), unit_number(j, "warm"), unit_number(j, "rich")}};
  }
  if (type == "select_table") {
    expect_fields(j, {"id"});
    return SelectTable{integer(j, "id", 0, kMaxId)};
  }
  if (type == "note_on") {
    expect_fields(j, {"midi", "velocity"});
    return NoteOn{static_cast<int>(integer(j, "midi", 0, 127)), unit_number(j, "velocity")};
  }
  if (type == "note_off") {
    expect_fields(j, {"midi"});
    return NoteOff{static_cast<int>(integer(j, "midi", 0, 127))};
  }
  if (type == "set_filter") {
    expect_fields(j, {"cutoff_hz"});
    const double c = number(j, "cutoff_hz");
    if (c < 0.0) fail("'cutoff_hz' must be >= 0");
    return SetFilter{c};
  }
  if (type == "list_tables") {
    expect_fields(j, {});
    return ListTables{};
  }
  fail("unknown message type '" + type + "'");
}

ServerMessage parse_server(std::string_view text) {
  const json j = parse_object(text);
  const std::string type = j["type"];
  if (type == "table_update") {
    expect_fields(j, {"generation", "samples", "labels", "spectrum"});
    TableUpdate u;
    u.generation = static_cast<std::uint64_t>(integer(j, "generation", 1, kMaxId));
    const json& s = j["samples"];
    if (!s.is_array() || s.size() != kTableLength) fail("'samples' must be an array of 600 numbers");
    for (const json& v : s) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) fail("'samples' must hold finite numbers");
      u.samples.push_back(v.get<float>());
    }
    u.labels = labels_object(j, "labels");
    const json& sp = j["spectrum"];
    if (!sp.is_array() || sp.size() != kCycleSpectrumBins) fail("'spectrum' must be an array of 301 numbers");
    for (const json& v : sp) {
      if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
        fail("'spectrum' must hold finite non-negative numbers");
      }
      u.spectrum.push_back(v.get<double>());
    }
    return u;
  }
  if (type == "tables") {
    expect_fields(j, {"items"});
    const json& items = j["items"];
    if (!items.is_array()) fail("'items' must be an array");
    Tables t;
    for (const json& it : items) {
      if (!it.is_object()) fail("table items must be objects");
      for (const char* f : {"id", "name", "labels"}) {
        if (!it.contains(f)) fail(std::string("table item lacks '") + f + "'");
      }
      if (it.size() != 3) fail("table item has unexpected fields");
      if (!it["name"].is_string()) fail("'name' must be a string");
      t.items.push_back({integer(it, "id", 0, kMaxId), it["name"].get<std::string>(), labels_object(it, "labels")});
    }
    return t;
  }
  if (type == "error") {
    expect_fields(j, {"message"});
    if (!j["message"].is_string() || j["message"].get<std::string>().empty()) fail("'message' must be a non-empty string");
    return ErrorReply{j["message"].get<std::string>()};
  }
  fail("unknown message type '" + type + "'");
}

std::string serialize(const ClientMessage& m) {
  struct V {
    json operator()(const SetLabels& x) const {
      return {{"type", "set_labels"}, {"bright", x.labels.bright}, {"warm", x.labels.warm}, {"rich", x.labels.rich}};
    }
    json operator()(const SelectTable& x) const { return {{"type", "select_table"}, {"id", x.id}}; }
    json operator()(const NoteOn& x) const { return {{"type", "note_on"}, {"midi", x.midi}, {"velocity", x.velocity}}; }
    json operator()(const NoteOff& x) const { return {{"type", "note_off"}, {"midi", x.midi}}; }
    json operator()(const SetFilter& x) const { return {{"type", "set_filter"}, {"cutoff_hz", x.cutoff_hz}}; }
    json operator()(const ListTables&) const { return {{"type", "list_tables"}}; }
  };
  return std::visit(V{}, m).dump();
}

std::string serialize(const ServerMessage& m) {
  struct V {
    json operator()(const TableUpdate& x) const {
      return {{"type", "table_update"},
              {"generation", x.generation},
              {"samples", x.samples},
              {"labels", labels_json(x.labels)},
              {"spectrum", x.spectrum}};
    }
    json operator()(const Tables& x) const {
      json items = json::array();
      for (const TableInfo& t : x.items) items.push_back({{"id", t.id}, {"name", t.name}, {"labels", labels_json(t.labels)}});
      return {{"type", "tables"}, {"items", std::move(items)}};
    }
    json operator()(const ErrorReply& x) const { return {{"type", "error"}, {"message", x.message}}; }
  };
  return std::visit(V{}, m).dump();
}

std::vector<double> cycle_spectrum(std::span<const float> samples) {
  if (samples.size() != kTableLength) throw Error("cycle_spectrum: expected 600 samples");
  const std::vector<double> x(samples.begin(), samples.end());
  const auto X = fft::rfft(x);
  std::vector<double> mag(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) mag[k] = std::abs(X[k]);
  return mag;
}

}  // namespace wtcvae::protocol
