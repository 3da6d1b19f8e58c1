#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptyinr/field.hpp"
#include "ptyinr/param_store.hpp"
#include "ptyinr/rng.hpp"
#include "ptyinr/tape.hpp"

namespace ptyinr {

struct SirenConfig {
    int in_dim = 2;
    int hidden_layers = 3;
    int hidden_width = 512;
    double omega_first = 30.0;
    double omega_hidden = 30.0;
    int out_dim = 1;

    void validate() const;
    size_t param_count() const;
};

struct HashGridConfig {
    int levels = 16;
    int features_per_entry = 2;
    int table_size_log2 = 15;
    int base_resolution = 16;
    double growth_factor = 1.5;
    int mlp_hidden_layers = 2;
    int mlp_hidden_width = 64;

    void validate() const;
    int table_entries() const { return 1 << table_size_log2; }
    int feature_dim() const { return levels * features_per_entry; }
    /// Grid resolution (cells per side) of level l.
    int level_resolution(int l) const;
    size_t param_count() const;  // tables + decoder MLP
};

/// Per-pixel (y, x) coordinates normalized so boundary pixels land exactly on
/// 0 and 1. Stored row-major as an [npix x 2] matrix.
struct CoordGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> yx;  // npix * 2, (y, x) per pixel

    static CoordGrid make(int rows, int cols);
    size_t npix() const { return static_cast<size_t>(rows) * cols; }
    Tensor as_tensor() const;
};

/// Sine-activated MLP over 2-D coordinates. Layer l computes
/// sin(omega_l * (W x) + b); the head is linear.
class Siren {
public:
    Siren(SirenConfig cfg, std::string prefix);

    void register_params(ParamStore& store) const;
    void init(ParamStore& store, Rng& rng) const;

    /// Eager evaluation; returns the raw head outputs, one per pixel.
    std::vector<double> forward(const ParamStore& store, const CoordGrid& coords) const;
    /// Tape evaluation; returns an [npix x out_dim] node.
    int forward(Tape& tape, int coords_node) const;

    const SirenConfig& config() const { return cfg_; }
    size_t param_count() const { return cfg_.param_count(); }

private:
    int layer_count() const { return cfg_.hidden_layers + 1; }
    std::pair<int, int> layer_dims(int l) const;  // (fan_in, fan_out)
    std::string weight_name(int l) const;
    std::string bias_name(int l) const;

    SirenConfig cfg_;
    std::string prefix_;
};

/// Multi-resolution hash encoding: per level, bilinear interpolation of
/// learned table entries; level features are concatenated.
class HashEncoder {
public:
    HashEncoder(HashGridConfig cfg, std::string prefix);

    void register_params(ParamStore& store) const;
    void init(ParamStore& store, Rng& rng) const;

    /// Corner indices/weights for a coordinate grid; depends only on geometry,
    /// so callers compute it once and reuse it across evaluations.
    struct Encoding {
        int npix = 0;
        std::vector<std::vector<int32_t>> indices;  // per level, npix*4
        std::vector<std::vector<double>> weights;   // per level, npix*4
    };
    Encoding prepare(const CoordGrid& coords) const;

    /// Eager: [npix x feature_dim] row-major feature matrix.
    std::vector<double> encode(const ParamStore& store, const Encoding& enc) const;
    /// Tape: [npix x feature_dim] node.
    int encode(Tape& tape, const Encoding& enc) const;

    const HashGridConfig& config() const { return cfg_; }

private:
    std::string table_name(int level) const;

    HashGridConfig cfg_;
    std::string prefix_;
};

/// Plain ReLU MLP decoder (affine + ReLU hidden layers, linear head).
class ReluMlp {
public:
    ReluMlp(int in_dim, int hidden_layers, int hidden_width, int out_dim, std::string prefix);

    void register_params(ParamStore& store) const;
    void init(ParamStore& store, Rng& rng) const;

    std::vector<double> forward(const ParamStore& store, const std::vector<double>& features,
                                int npix) const;
    int forward(Tape& tape, int features_node) const;

    size_t param_count() const;

private:
    int layer_count() const { return hidden_layers_ + 1; }
    std::pair<int, int> layer_dims(int l) const;

    int in_dim_, hidden_layers_, hidden_width_, out_dim_;
    std::string prefix_;
};

/// Object field: two SIREN heads, O = logistic(amp) * exp(i * phase).
class ObjectModel {
public:
    ObjectModel(SirenConfig cfg, std::string prefix = "object");

    void register_params(ParamStore& store) const;
    void init(ParamStore& store, Rng& rng) const;

    ComplexField predict(const ParamStore& store, const CoordGrid& coords) const;
    /// Tape: complex [rows x cols] node.
    int predict(Tape& tape, const CoordGrid& coords) const;

    size_t param_count() const { return 2 * cfg_.param_count(); }
    const SirenConfig& config() const { return cfg_; }

private:
    SirenConfig cfg_;
    Siren amp_, phase_;
};

/// Probe field: two hash-grid + MLP heads. Raw amplitude is |mlp output|;
/// the assembled field is divided by its max amplitude so max |P| = 1.
class ProbeModel {
public:
    ProbeModel(HashGridConfig cfg, std::string prefix = "probe");

    void register_params(ParamStore& store) const;
    void init(ParamStore& store, Rng& rng) const;

    /// Geometry cache for a fixed probe coordinate grid.
    struct Plan {
        CoordGrid coords;
        HashEncoder::Encoding amp_enc;
        HashEncoder::Encoding phase_enc;
    };
    Plan plan(int rows, int cols) const;

    /// Throws std::runtime_error("degenerate probe") when the raw amplitude
    /// is identically zero. norm_amp, when given, receives the
    /// post-normalization amplitude (the regularization target).
    ComplexField predict(const ParamStore& store, const Plan& plan,
                         std::vector<double>* norm_amp = nullptr) const;

    struct TapeOut {
        int probe = -1;     // complex [rows x cols]
        int norm_amp = -1;  // real [rows x cols], post-normalization amplitude
    };
    TapeOut predict(Tape& tape, const Plan& plan) const;

    size_t param_count() const;
    const HashGridConfig& config() const { return cfg_; }

private:
    HashGridConfig cfg_;
    HashEncoder amp_enc_, phase_enc_;
    ReluMlp amp_mlp_, phase_mlp_;
};

/// Total trainable parameter count for the two-object-heads + two-probe-heads
/// architecture.
size_t count_params(const SirenConfig& object_cfg, const HashGridConfig& probe_cfg);

}  // namespace ptyinr
