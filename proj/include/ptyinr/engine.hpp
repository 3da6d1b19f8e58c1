#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptyinr/field.hpp"
#include "ptyinr/gradcheck.hpp"
#include "ptyinr/networks.hpp"
#include "ptyinr/optimization.hpp"
#include "ptyinr/physics.hpp"
#include "ptyinr/version.hpp"

namespace ptyinr {

struct TrainConfig {
    int64_t steps = 2000;
    double lr_object = 1e-4;
    double lr_probe = 1e-4;
    LossConfig loss;
    int batch = 0;  // positions per step; 0 = automatic (full batch at desk scale)
    uint64_t seed = 0;
    double omega_first = 30.0;  // overrides siren.omega_first
    std::string probe_mode = "learn";  // learn | fixed
    int64_t checkpoint_every = 0;      // steps between checkpoint writes; 0 = never
    std::string checkpoint_path;       // file rewritten at that cadence
    SirenConfig siren;
    HashGridConfig hashgrid;

    void validate() const;
    /// Hash of the canonical key=value rendering, used for provenance.
    uint64_t hash() const;
};

struct ReconResult {
    ComplexField object;
    ComplexField probe;
    std::vector<double> loss_history;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string version = kVersion;
};

/// Dataset + networks + parameters bound into one loss evaluator with two
/// interchangeable paths: an eager forward and a tape forward whose values
/// agree bit-for-bit (the tape path can also produce gradients).
class LossProblem {
public:
    /// Learned probe (probe networks registered and initialized).
    LossProblem(const DiffractionSet& data, const TrainConfig& cfg);
    /// Fixed probe (only object networks are trainable).
    LossProblem(const DiffractionSet& data, const TrainConfig& cfg, const ComplexField& probe);
    ~LossProblem();
    LossProblem(const LossProblem&) = delete;
    LossProblem& operator=(const LossProblem&) = delete;

    ParamStore& params();
    const ParamStore& params() const;
    bool probe_learned() const;

    /// Frames entering the loss; default is every frame, in scan order.
    void set_batch(std::vector<size_t> frames);
    /// Schedule position t for the regularization cutoff; default 1.
    void set_step(int64_t t);

    double eager() const;
    /// with_grad additionally backpropagates into params().grads.
    double tape_eval(bool with_grad);
    /// Adapter for finite_diff_check (grad requests go through the tape).
    LossFn as_loss_fn();

    ComplexField predict_object() const;
    ComplexField predict_probe() const;

private:
    friend ReconResult run_training(LossProblem&, const TrainConfig&, const DiffractionSet&,
                                    const std::string&);
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ReconResult reconstruct(const DiffractionSet& data, const TrainConfig& cfg,
                        const std::string& resume_checkpoint = "");
ReconResult reconstruct_known_probe(const DiffractionSet& data, const ComplexField& probe,
                                    const TrainConfig& cfg,
                                    const std::string& resume_checkpoint = "");

/// Resumable training state. Restoring it reproduces the uninterrupted
/// trajectory bit-for-bit.
struct Checkpoint {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    int64_t step = 0;  // completed optimizer steps
    int64_t adam_t = 0;
    std::vector<double> params;
    std::vector<double> m;
    std::vector<double> v;
    std::vector<double> loss_history;
};

void checkpoint_save(const Checkpoint& ck, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace ptyinr
