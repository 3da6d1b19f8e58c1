#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "ptyinr/baseline.hpp"
#include "ptyinr/engine.hpp"
#include "ptyinr/simulate.hpp"

namespace ptyinr {

/// Everything a CLI run needs, parsed from one strict JSON document.
/// Unknown keys anywhere are errors.
struct RunConfig {
    std::string phantom_kind = "siemens";
    int object_rows = 96, object_cols = 96;
    int probe_rows = 24, probe_cols = 24;
    int step_y = 4, step_x = 4;
    NoiseSpec noise;
    TrainConfig train;
    EpieConfig epie;

    void validate() const;
    /// Canonical JSON with every field materialized; stored in containers.
    nlohmann::json snapshot() const;
    /// FNV-1a over the canonical snapshot text.
    uint64_t hash() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path);

/// The shipped desk-scale defaults (small networks, short training).
nlohmann::json default_config_json();

}  // namespace ptyinr
