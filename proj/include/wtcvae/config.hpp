#pragma once

// JSON form of TrainConfig. The schema version moves together with the
// checkpoint format version.

#include <string>

#include "wtcvae/trainer.hpp"

namespace wtcvae {

inline constexpr int kConfigVersion = 1;

// Every field, including "config_version".
std::string dump_train_config(const TrainConfig& config);

// Applies the fields present in `text` on top of `base`. A true "desk_scale"
// applies apply_desk_scale() before the other fields, so explicit values in
// the same file still win. Unknown keys, wrong JSON types and a mismatched
// "config_version" are errors.
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});

}  // namespace wtcvae
