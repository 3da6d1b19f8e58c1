#include "ptyinr/engine.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "ptyinr/fft.hpp"
#include "ptyinr/rng.hpp"
#include "ptyinr/tape.hpp"
#include "wire.hpp"

namespace ptyinr {

void TrainConfig::validate() const {
    if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
    if (!(lr_object > 0.0 && lr_object < 1.0) || !(lr_probe > 0.0 && lr_probe < 1.0))
        throw std::invalid_argument("learning rates must lie in (0, 1)");
    loss.validate();
    if (batch < 0) throw std::invalid_argument("batch must be nonnegative");
    if (omega_first <= 0.0) throw std::invalid_argument("omega_first must be positive");
    if (probe_mode != "learn" && probe_mode != "fixed")
        throw std::invalid_argument("probe_mode must be learn or fixed");
    if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be nonnegative");
    siren.validate();
    hashgrid.validate();
}

uint64_t TrainConfig::hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "steps=" << steps << "\nlr_object=" << lr_object << "\nlr_probe=" << lr_probe
       << "\nbeta=" << loss.beta << "\nlambda=" << loss.lambda << "\nk=" << loss.k
       << "\nbatch=" << batch << "\nseed=" << seed << "\nomega_first=" << omega_first
       << "\nprobe_mode=" << probe_mode << "\ncheckpoint_every=" << checkpoint_every
       << "\nsiren=" << siren.in_dim << ',' << siren.hidden_layers << ',' << siren.hidden_width
       << ',' << siren.omega_first << ',' << siren.omega_hidden << ',' << siren.out_dim
       << "\nhashgrid=" << hashgrid.levels << ',' << hashgrid.features_per_entry << ','
       << hashgrid.table_size_log2 << ',' << hashgrid.base_resolution << ','
       << hashgrid.growth_factor << ',' << hashgrid.mlp_hidden_layers << ','
       << hashgrid.mlp_hidden_width << '\n';
    return fnv1a64(os.str());
}

namespace {
SirenConfig object_siren_cfg(const TrainConfig& cfg) {
    SirenConfig s = cfg.siren;
    s.omega_first = cfg.omega_first;
    return s;
}
}  // namespace

struct LossProblem::Impl {
    const DiffractionSet* data;
    TrainConfig cfg;
    bool learned;
    ComplexField fixed_probe;
    ObjectModel object;
    std::optional<ProbeModel> probe;
    ParamStore store;
    CoordGrid obj_coords;
    ProbeModel::Plan probe_plan;
    std::vector<std::vector<double>> sqrt_frames;
    std::vector<size_t> batch;
    int64_t t = 1;

    Impl(const DiffractionSet& d, const TrainConfig& c, const ComplexField* fixed)
        : data(&d), cfg(c), learned(fixed == nullptr), object(object_siren_cfg(c), "object") {
        cfg.validate();
        d.validate();
        if (!learned) {
            if (fixed->rows() != d.grid.probe_rows || fixed->cols() != d.grid.probe_cols)
                throw std::invalid_argument("shape mismatch");
            if (!fixed->finite()) throw std::invalid_argument("non-finite field");
            fixed_probe = *fixed;
        } else {
            probe.emplace(cfg.hashgrid, "probe");
        }
        object.register_params(store);
        if (learned) probe->register_params(store);
        store.finalize();
        Rng root(cfg.seed);
        Rng ro = root.stream("init.object");
        object.init(store, ro);
        if (learned) {
            Rng rp = root.stream("init.probe");
            probe->init(store, rp);
        }
        obj_coords = CoordGrid::make(d.grid.object_rows, d.grid.object_cols);
        if (learned) probe_plan = probe->plan(d.grid.probe_rows, d.grid.probe_cols);

        sqrt_frames.resize(d.frame_count());
        for (size_t j = 0; j < d.frame_count(); ++j) {
            auto f = d.frame(j);
            sqrt_frames[j].resize(f.size());
            for (size_t i = 0; i < f.size(); ++i) {
                if (f[i] < 0.0) throw std::invalid_argument("negative intensity");
                sqrt_frames[j][i] = std::sqrt(f[i]);
            }
        }
        batch.resize(d.frame_count());
        std::iota(batch.begin(), batch.end(), size_t{0});
    }

    bool reg_active() const { return learned && cfg.loss.lambda > 0.0 && t <= cfg.loss.k; }

    double inv_total() const {
        return 1.0 / static_cast<double>(batch.size() * data->frame_pixels());
    }

    double eager() const {
        const ComplexField obj = object.predict(store, obj_coords);
        std::vector<double> norm_amp;
        const ComplexField prb =
            learned ? probe->predict(store, probe_plan, &norm_amp) : fixed_probe;
        const int h = data->grid.probe_rows, w = data->grid.probe_cols;
        const double beta = cfg.loss.beta;
        ComplexField exit(h, w);
        double data_term = 0.0;
        bool first = true;
        for (size_t j : batch) {
            const auto [py, px] = data->grid.positions[j];
            const ComplexField patch = crop(obj, py, px, h, w);
            for (size_t i = 0; i < exit.size(); ++i) {
                const double ar = prb.data()[2 * i], ai = prb.data()[2 * i + 1];
                const double br = patch.data()[2 * i], bi = patch.data()[2 * i + 1];
                exit.data()[2 * i] = ar * br - ai * bi;
                exit.data()[2 * i + 1] = ar * bi + ai * br;
            }
            const ComplexField far = cfft2_centered(exit);
            const auto& sq = sqrt_frames[j];
            double sj = 0.0;
            for (size_t i = 0; i < far.size(); ++i) {
                const double re = far.data()[2 * i], im = far.data()[2 * i + 1];
                const double sp = std::sqrt(re * re + im * im);
                const double r = sq[i] - sp;
                sj += std::fabs(r) < beta ? r * r / (2.0 * beta) : std::fabs(r) - beta / 2.0;
            }
            if (first) {
                data_term = sj;
                first = false;
            } else {
                data_term += sj;
            }
        }
        data_term *= inv_total();
        if (reg_active()) {
            double reg = 0.0;
            for (double a : norm_amp) reg += a;
            reg /= static_cast<double>(norm_amp.size());
            reg *= cfg.loss.lambda;
            data_term = data_term + reg;
        }
        return data_term;
    }

    int build_tape(Tape& tape) const {
        const int obj = object.predict(tape, obj_coords);
        int probe_node, norm_amp = -1;
        if (learned) {
            const auto po = probe->predict(tape, probe_plan);
            probe_node = po.probe;
            norm_amp = po.norm_amp;
        } else {
            probe_node = tape.constant(fixed_probe);
        }
        const int h = data->grid.probe_rows, w = data->grid.probe_cols;
        std::vector<int> sums;
        sums.reserve(batch.size());
        for (size_t j : batch) {
            const auto [py, px] = data->grid.positions[j];
            Tensor sq = Tensor::real(h, w);
            sq.data = sqrt_frames[j];
            const int sq_node = tape.constant(std::move(sq));
            const int patch = tape.crop(obj, py, px, h, w);
            const int ex = tape.cmul(probe_node, patch);
            const int far = tape.fft(ex);
            const int ip = tape.abs_sq(far);
            const int sp = tape.sqrt(ip);
            const int resid = tape.sub(sq_node, sp);
            const int pix = tape.smooth_l1(resid, cfg.loss.beta);
            sums.push_back(tape.sum(pix));
        }
        int loss = tape.add_n(sums);
        loss = tape.scale(loss, inv_total());
        if (reg_active()) {
            const int reg = tape.mean(norm_amp);
            loss = tape.add(loss, tape.scale(reg, cfg.loss.lambda));
        }
        return loss;
    }
};

LossProblem::LossProblem(const DiffractionSet& data, const TrainConfig& cfg)
    : impl_(std::make_unique<Impl>(data, cfg, nullptr)) {}

LossProblem::LossProblem(const DiffractionSet& data, const TrainConfig& cfg,
                         const ComplexField& probe)
    : impl_(std::make_unique<Impl>(data, cfg, &probe)) {}

LossProblem::~LossProblem() = default;

ParamStore& LossProblem::params() { return impl_->store; }
const ParamStore& LossProblem::params() const { return impl_->store; }
bool LossProblem::probe_learned() const { return impl_->learned; }

void LossProblem::set_batch(std::vector<size_t> frames) {
    if (frames.empty()) throw std::invalid_argument("batch must not be empty");
    for (size_t j : frames)
        if (j >= impl_->data->frame_count()) throw std::invalid_argument("batch frame out of range");
    impl_->batch = std::move(frames);
}

void LossProblem::set_step(int64_t t) {
    if (t < 0) throw std::invalid_argument("step counter must be nonnegative");
    impl_->t = t;
}

double LossProblem::eager() const { return impl_->eager(); }

double LossProblem::tape_eval(bool with_grad) {
    Tape tape(impl_->store);
    const int loss = impl_->build_tape(tape);
    const double v = tape.scalar_value(loss);
    if (with_grad) tape.backward(loss);
    return v;
}

LossFn LossProblem::as_loss_fn() {
    return [this](ParamStore&, bool with_grad) {
        return with_grad ? tape_eval(true) : impl_->eager();
    };
}

ComplexField LossProblem::predict_object() const {
    return impl_->object.predict(impl_->store, impl_->obj_coords);
}

ComplexField LossProblem::predict_probe() const {
    if (!impl_->learned) return impl_->fixed_probe;
    return impl_->probe->predict(impl_->store, impl_->probe_plan);
}

namespace {

int resolve_batch(const TrainConfig& cfg, const DiffractionSet& data) {
    const size_t j = data.frame_count();
    if (cfg.batch > 0) return static_cast<int>(std::min<size_t>(cfg.batch, j));
    const size_t full = j * data.frame_pixels();
    if (full <= (size_t{1} << 24)) return static_cast<int>(j);
    const size_t per = std::max<size_t>(1, (size_t{1} << 24) / data.frame_pixels());
    return static_cast<int>(std::min(per, j));
}

}  // namespace

ReconResult run_training(LossProblem& prob, const TrainConfig& cfg, const DiffractionSet& data,
                         const std::string& resume_checkpoint) {
    auto& im = *prob.impl_;
    const uint64_t chash = cfg.hash();

    AdamState adam = AdamState::make(im.store);
    adam.segment_lr.resize(im.store.segment_count());
    for (size_t si = 0; si < im.store.segment_count(); ++si) {
        const std::string& name = im.store.segment(si).name;
        adam.segment_lr[si] =
            name.rfind("object.", 0) == 0 ? cfg.lr_object : cfg.lr_probe;
    }

    std::vector<double> history;
    int64_t start = 1;
    if (!resume_checkpoint.empty()) {
        Checkpoint ck = checkpoint_load(resume_checkpoint);
        if (ck.params.size() != im.store.total())
            throw std::runtime_error("checkpoint parameter count mismatch");
        if (ck.config_hash != chash) throw std::runtime_error("checkpoint config mismatch");
        auto vals = im.store.values();
        std::copy(ck.params.begin(), ck.params.end(), vals.begin());
        adam.m = std::move(ck.m);
        adam.v = std::move(ck.v);
        adam.t = ck.adam_t;
        history = std::move(ck.loss_history);
        start = ck.step + 1;
    }

    const size_t total_frames = data.frame_count();
    const int batch_size = resolve_batch(cfg, data);
    const Rng batch_stream = Rng(cfg.seed).stream("batch");
    std::vector<size_t> all(total_frames);
    std::iota(all.begin(), all.end(), size_t{0});
    std::string last_checkpoint;

    for (int64_t t = start; t <= cfg.steps; ++t) {
        if (batch_size == static_cast<int>(total_frames)) {
            im.batch = all;
        } else {
            // fresh deterministic draw per step, no cross-step RNG state
            Rng rs = batch_stream.substream(static_cast<uint64_t>(t));
            std::vector<size_t> idx = all;
            for (int i = 0; i < batch_size; ++i) {
                const size_t j = i + rs.below(total_frames - i);
                std::swap(idx[i], idx[j]);
            }
            im.batch.assign(idx.begin(), idx.begin() + batch_size);
        }
        im.t = t;

        Tape tape(im.store);
        const int loss_node = im.build_tape(tape);
        const double loss = tape.scalar_value(loss_node);
        if (!std::isfinite(loss))
            throw std::runtime_error(
                "non-finite loss at step " + std::to_string(t) + " (last checkpoint: " +
                (last_checkpoint.empty() ? std::string("none") : last_checkpoint) + ")");
        tape.backward(loss_node);
        adam_step(im.store, adam);
        history.push_back(loss);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            t % cfg.checkpoint_every == 0) {
            Checkpoint ck;
            ck.config_hash = chash;
            ck.seed = cfg.seed;
            ck.step = t;
            ck.adam_t = adam.t;
            auto vals = im.store.values();
            ck.params.assign(vals.begin(), vals.end());
            ck.m = adam.m;
            ck.v = adam.v;
            ck.loss_history = history;
            checkpoint_save(ck, cfg.checkpoint_path);
            last_checkpoint = cfg.checkpoint_path;
        }
    }

    ReconResult res;
    res.object = prob.predict_object();
    res.probe = prob.predict_probe();
    if (!res.object.finite() || !res.probe.finite())
        throw std::runtime_error("non-finite field");
    res.loss_history = std::move(history);
    res.config_hash = chash;
    res.seed = cfg.seed;
    return res;
}

ReconResult reconstruct(const DiffractionSet& data, const TrainConfig& cfg,
                        const std::string& resume_checkpoint) {
    cfg.validate();
    if (cfg.probe_mode != "learn")
        throw std::invalid_argument("reconstruct requires probe_mode=learn");
    LossProblem prob(data, cfg);
    return run_training(prob, cfg, data, resume_checkpoint);
}

ReconResult reconstruct_known_probe(const DiffractionSet& data, const ComplexField& probe,
                                    const TrainConfig& cfg, const std::string& resume_checkpoint) {
    cfg.validate();
    LossProblem prob(data, cfg, probe);
    return run_training(prob, cfg, data, resume_checkpoint);
}

namespace {
constexpr char kCheckpointMagic[8] = {'P', 'T', 'Y', 'I', 'N', 'R', 'C', 'K'};
}

void checkpoint_save(const Checkpoint& ck, const std::string& path) {
    std::string buf;
    buf.reserve(64 + 8 * (ck.params.size() * 3 + ck.loss_history.size()));
    buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    wire::put_u32(buf, static_cast<uint32_t>(kFormatVersion));
    wire::put_u64(buf, ck.config_hash);
    wire::put_u64(buf, ck.seed);
    wire::put_i64(buf, ck.step);
    wire::put_i64(buf, ck.adam_t);
    wire::put_u64(buf, ck.params.size());
    wire::put_u64(buf, ck.loss_history.size());
    wire::put_f64_span(buf, ck.params);
    wire::put_f64_span(buf, ck.m);
    wire::put_f64_span(buf, ck.v);
    wire::put_f64_span(buf, ck.loss_history);

    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    }
    fs::rename(tmp, target);
}

Checkpoint checkpoint_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    wire::Reader r(buf, "checkpoint");
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const uint32_t version = r.u32();
    if (version != static_cast<uint32_t>(kFormatVersion))
        throw std::runtime_error("checkpoint version mismatch");

    Checkpoint ck;
    ck.config_hash = r.u64();
    ck.seed = r.u64();
    ck.step = r.i64();
    ck.adam_t = r.i64();
    const uint64_t nparam = r.u64();
    const uint64_t nhist = r.u64();
    ck.params.resize(nparam);
    ck.m.resize(nparam);
    ck.v.resize(nparam);
    ck.loss_history.resize(nhist);
    r.f64_span(ck.params);
    r.f64_span(ck.m);
    r.f64_span(ck.v);
    r.f64_span(ck.loss_history);
    return ck;
}

}  // namespace ptyinr
