#pragma once

// JSON control protocol between the synth service and a control surface.
// Every message is an object with a "type" field. Parsing is strict: unknown
// types, missing or extra fields, wrong JSON types and out-of-range values
// are rejected with ProtocolError.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wtcvae/common.hpp"
#include "wtcvae/descriptors.hpp"

namespace wtcvae::protocol {

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Client -> server.
struct SetLabels {
  SemanticLabels labels;
  bool operator==(const SetLabels&) const = default;
};
struct SelectTable {
  std::int64_t id = 0;
  bool operator==(const SelectTable&) const = default;
};
struct NoteOn {
  int midi = 0;
  double velocity = 1.0;
  bool operator==(const NoteOn&) const = default;
};
struct NoteOff {
  int midi = 0;
  bool operator==(const NoteOff&) const = default;
};
struct SetFilter {
  double cutoff_hz = 0.0;  // 0 disables the lowpass
  bool operator==(const SetFilter&) const = default;
};
struct ListTables {
  bool operator==(const ListTables&) const = default;
};
using ClientMessage = std::variant<SetLabels, SelectTable, NoteOn, NoteOff, SetFilter, ListTables>;

// Server -> client.
inline constexpr std::size_t kCycleSpectrumBins = kTableLength / 2 + 1;

struct TableUpdate {
  std::uint64_t generation = 0;
  std::vector<float> samples;   // kTableLength values
  SemanticLabels labels;        // recomputed from samples
  std::vector<double> spectrum; // |DFT| of one cycle, bins 0 .. 300
  bool operator==(const TableUpdate&) const = default;
};
struct TableInfo {
  std::int64_t id = 0;
  std::string name;
  SemanticLabels labels;
  bool operator==(const TableInfo&) const = default;
};
struct Tables {
  std::vector<TableInfo> items;
  bool operator==(const Tables&) const = default;
};
struct ErrorReply {
  std::string message;
  bool operator==(const ErrorReply&) const = default;
};
using ServerMessage = std::variant<TableUpdate, Tables, ErrorReply>;

ClientMessage parse_client(std::string_view text);
ServerMessage parse_server(std::string_view text);
std::string serialize(const ClientMessage& m);
std::string serialize(const ServerMessage& m);

// Harmonic magnitudes of a single cycle as carried by table_update.
std::vector<double> cycle_spectrum(std::span<const float> samples);

}  // namespace wtcvae::protocol
