#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ptyinr/engine.hpp"
#include "ptyinr/simulate.hpp"

namespace ptyinr {

struct ArrayRecord {
    std::string name;
    std::vector<size_t> shape;
    std::string dtype;  // float64 | complex128
    std::string role;
    std::vector<double> data;  // interleaved (re, im) when complex

    size_t count() const;
    size_t value_count() const;  // doubles stored, 2x count for complex
    size_t byte_count() const { return value_count() * sizeof(double); }
};

struct Provenance {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string version;
};

/// Directory-of-binaries dataset/result format: manifest.json plus one raw
/// little-endian float64 file per array. Attachments are opaque extra files
/// (rendered images) listed in the manifest but not validated on load.
struct Container {
    int format_version = 0;
    std::string kind;  // dataset | reconstruction
    Provenance provenance;
    nlohmann::json config;    // snapshot of the run configuration
    nlohmann::json metadata;  // physical constants, noise record, scan geometry
    std::vector<ArrayRecord> arrays;
    std::vector<std::pair<std::string, std::vector<unsigned char>>> attachments;

    const ArrayRecord& array(const std::string& name) const;
    bool has_array(const std::string& name) const;
};

/// Writes into a temp directory then renames; the destination either appears
/// complete or not at all. A sibling lockfile serializes writers.
void save_container(const std::filesystem::path& dir, const Container& c);

/// Strictly validates the manifest and every array byte length before
/// returning; consults nothing outside the directory.
Container load_container(const std::filesystem::path& dir);

Container dataset_to_container(const Dataset& ds, const nlohmann::json& config_snapshot,
                               uint64_t config_hash);
Dataset dataset_from_container(const Container& c);

Container recon_to_container(const ReconResult& r, const nlohmann::json& config_snapshot,
                             const std::string& method = "ptyinr");
ReconResult recon_from_container(const Container& c);

}  // namespace ptyinr
