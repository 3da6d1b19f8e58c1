#include "ptyinr/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "kernels.hpp"

namespace ptyinr {

namespace {
constexpr uint32_t kHashPrimeY = 2654435761u;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

void SirenConfig::validate() const {
    if (in_dim < 1 || out_dim < 1) fail("siren dims must be positive");
    if (hidden_layers < 1) fail("siren needs at least one hidden layer");
    if (hidden_width < 1) fail("siren hidden width must be positive");
    if (omega_first <= 0.0 || omega_hidden <= 0.0) fail("siren omega must be positive");
}

size_t SirenConfig::param_count() const {
    size_t n = 0;
    int fan_in = in_dim;
    for (int l = 0; l < hidden_layers; ++l) {
        n += static_cast<size_t>(fan_in) * hidden_width + hidden_width;
        fan_in = hidden_width;
    }
    n += static_cast<size_t>(fan_in) * out_dim + out_dim;
    return n;
}

void HashGridConfig::validate() const {
    if (levels < 1) fail("hash grid needs at least one level");
    if (features_per_entry < 1) fail("hash grid features_per_entry must be positive");
    if (table_size_log2 < 1 || table_size_log2 > 24) fail("hash grid table_size_log2 out of range");
    if (base_resolution < 1) fail("hash grid base_resolution must be positive");
    if (growth_factor <= 1.0) fail("hash grid growth_factor must exceed 1");
    if (mlp_hidden_layers < 1 || mlp_hidden_width < 1) fail("hash grid decoder dims must be positive");
}

int HashGridConfig::level_resolution(int l) const {
    double s = static_cast<double>(base_resolution);
    int res = base_resolution;
    for (int i = 1; i <= l; ++i) {
        s *= growth_factor;
        res = std::max(res, static_cast<int>(std::floor(s)));
    }
    return res;
}

size_t HashGridConfig::param_count() const {
    const size_t tables =
        static_cast<size_t>(levels) * table_entries() * features_per_entry;
    size_t mlp = 0;
    int fan_in = feature_dim();
    for (int l = 0; l < mlp_hidden_layers; ++l) {
        mlp += static_cast<size_t>(fan_in) * mlp_hidden_width + mlp_hidden_width;
        fan_in = mlp_hidden_width;
    }
    mlp += static_cast<size_t>(fan_in) + 1;  // linear head to one output
    return tables + mlp;
}

CoordGrid CoordGrid::make(int rows, int cols) {
    if (rows < 1 || cols < 1) fail("coordinate grid needs positive shape");
    CoordGrid g;
    g.rows = rows;
    g.cols = cols;
    g.yx.resize(static_cast<size_t>(rows) * cols * 2);
    for (int r = 0; r < rows; ++r) {
        const double y = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.0;
        for (int c = 0; c < cols; ++c) {
            const double x = cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.0;
            const size_t p = (static_cast<size_t>(r) * cols + c) * 2;
            g.yx[p] = y;
            g.yx[p + 1] = x;
        }
    }
    return g;
}

Tensor CoordGrid::as_tensor() const {
    Tensor t = Tensor::real(static_cast<int>(npix()), 2);
    t.data = yx;
    return t;
}

// ---------------------------------------------------------------- Siren

Siren::Siren(SirenConfig cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
}

std::pair<int, int> Siren::layer_dims(int l) const {
    const int fan_in = l == 0 ? cfg_.in_dim : cfg_.hidden_width;
    const int fan_out = l == cfg_.hidden_layers ? cfg_.out_dim : cfg_.hidden_width;
    return {fan_in, fan_out};
}

std::string Siren::weight_name(int l) const { return prefix_ + ".w" + std::to_string(l); }
std::string Siren::bias_name(int l) const { return prefix_ + ".b" + std::to_string(l); }

void Siren::register_params(ParamStore& store) const {
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        store.add(weight_name(l), static_cast<size_t>(fin) * fout);
        store.add(bias_name(l), static_cast<size_t>(fout));
    }
}

void Siren::init(ParamStore& store, Rng& rng) const {
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        const double omega = l == 0 ? cfg_.omega_first : cfg_.omega_hidden;
        const double bound = l == 0 ? 1.0 / cfg_.in_dim : std::sqrt(6.0 / fin) / omega;
        auto w = store.values(store.segment_index(weight_name(l)));
        for (double& x : w) x = rng.uniform(-bound, bound);
        auto b = store.values(store.segment_index(bias_name(l)));
        for (double& x : b) x = 0.0;
    }
}

std::vector<double> Siren::forward(const ParamStore& store, const CoordGrid& coords) const {
    const int npix = static_cast<int>(coords.npix());
    std::vector<double> act = coords.yx;
    int width = cfg_.in_dim;
    std::vector<double> z;
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        if (fin != width) fail("siren layer width mismatch");
        auto w = store.values(store.segment_index(weight_name(l)));
        auto b = store.values(store.segment_index(bias_name(l)));
        z.assign(static_cast<size_t>(npix) * fout, 0.0);
        kernels::gemm(act.data(), w.data(), z.data(), npix, fin, fout);
        if (l < cfg_.hidden_layers) {
            const double omega = l == 0 ? cfg_.omega_first : cfg_.omega_hidden;
            for (double& x : z) x *= omega;
        }
        act.resize(z.size());
        kernels::add_rowvec(z.data(), b.data(), act.data(), npix, fout);
        if (l < cfg_.hidden_layers) kernels::sin_scaled(act, 1.0, act);
        width = fout;
    }
    return act;
}

int Siren::forward(Tape& tape, int coords_node) const {
    int h = coords_node;
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        const int w = tape.param(weight_name(l), fin, fout);
        const int b = tape.param(bias_name(l), 1, fout);
        int z = tape.matmul(h, w);
        if (l < cfg_.hidden_layers) {
            const double omega = l == 0 ? cfg_.omega_first : cfg_.omega_hidden;
            z = tape.scale(z, omega);
        }
        z = tape.add_rowvec(z, b);
        h = l < cfg_.hidden_layers ? tape.sin_scaled(z, 1.0) : z;
    }
    return h;
}

// ----------------------------------------------------------- HashEncoder

HashEncoder::HashEncoder(HashGridConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
}

std::string HashEncoder::table_name(int level) const {
    return prefix_ + ".table" + std::to_string(level);
}

void HashEncoder::register_params(ParamStore& store) const {
    for (int l = 0; l < cfg_.levels; ++l)
        store.add(table_name(l),
                  static_cast<size_t>(cfg_.table_entries()) * cfg_.features_per_entry);
}

void HashEncoder::init(ParamStore& store, Rng& rng) const {
    for (int l = 0; l < cfg_.levels; ++l) {
        auto t = store.values(store.segment_index(table_name(l)));
        for (double& x : t) x = rng.uniform(-1e-4, 1e-4);
    }
}

HashEncoder::Encoding HashEncoder::prepare(const CoordGrid& coords) const {
    const int npix = static_cast<int>(coords.npix());
    Encoding enc;
    enc.npix = npix;
    enc.indices.resize(cfg_.levels);
    enc.weights.resize(cfg_.levels);
    const uint32_t mask = static_cast<uint32_t>(cfg_.table_entries() - 1);
    for (int l = 0; l < cfg_.levels; ++l) {
        const int res = cfg_.level_resolution(l);
        const bool dense =
            static_cast<long>(res + 1) * (res + 1) <= static_cast<long>(cfg_.table_entries());
        auto& idx = enc.indices[l];
        auto& wts = enc.weights[l];
        idx.resize(static_cast<size_t>(npix) * 4);
        wts.resize(static_cast<size_t>(npix) * 4);
        for (int p = 0; p < npix; ++p) {
            const double y = coords.yx[static_cast<size_t>(p) * 2];
            const double x = coords.yx[static_cast<size_t>(p) * 2 + 1];
            if (y < 0.0 || y > 1.0 || x < 0.0 || x > 1.0)
                fail("coordinate outside unit square");
            const double ys = y * res;
            const double xs = x * res;
            const int y0 = std::min(static_cast<int>(std::floor(ys)), res - 1);
            const int x0 = std::min(static_cast<int>(std::floor(xs)), res - 1);
            const double fy = ys - y0;
            const double fx = xs - x0;
            const int corner_y[4] = {y0, y0, y0 + 1, y0 + 1};
            const int corner_x[4] = {x0, x0 + 1, x0, x0 + 1};
            const double corner_w[4] = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx,
                                        fy * (1.0 - fx), fy * fx};
            for (int c = 0; c < 4; ++c) {
                uint32_t entry;
                if (dense) {
                    entry = static_cast<uint32_t>(corner_y[c]) * (res + 1) +
                            static_cast<uint32_t>(corner_x[c]);
                } else {
                    entry = (static_cast<uint32_t>(corner_x[c]) * 1u) ^
                            (static_cast<uint32_t>(corner_y[c]) * kHashPrimeY);
                    entry &= mask;
                }
                idx[static_cast<size_t>(p) * 4 + c] = static_cast<int32_t>(entry);
                wts[static_cast<size_t>(p) * 4 + c] = corner_w[c];
            }
        }
    }
    return enc;
}

std::vector<double> HashEncoder::encode(const ParamStore& store, const Encoding& enc) const {
    const int npix = enc.npix;
    const int f = cfg_.features_per_entry;
    const int fdim = cfg_.feature_dim();
    std::vector<double> out(static_cast<size_t>(npix) * fdim);
    std::vector<double> level(static_cast<size_t>(npix) * f);
    for (int l = 0; l < cfg_.levels; ++l) {
        auto table = store.values(store.segment_index(table_name(l)));
        kernels::gather(table.data(), enc.indices[l].data(), enc.weights[l].data(), npix, f,
                        level.data());
        for (int p = 0; p < npix; ++p)
            for (int j = 0; j < f; ++j)
                out[static_cast<size_t>(p) * fdim + l * f + j] =
                    level[static_cast<size_t>(p) * f + j];
    }
    return out;
}

int HashEncoder::encode(Tape& tape, const Encoding& enc) const {
    std::vector<int> levels(cfg_.levels);
    for (int l = 0; l < cfg_.levels; ++l) {
        const int table =
            tape.param(table_name(l), cfg_.table_entries(), cfg_.features_per_entry);
        levels[l] = tape.gather(table, enc.indices[l], enc.weights[l], enc.npix,
                                cfg_.features_per_entry);
    }
    return tape.concat_cols(levels);
}

// --------------------------------------------------------------- ReluMlp

ReluMlp::ReluMlp(int in_dim, int hidden_layers, int hidden_width, int out_dim, std::string prefix)
    : in_dim_(in_dim),
      hidden_layers_(hidden_layers),
      hidden_width_(hidden_width),
      out_dim_(out_dim),
      prefix_(std::move(prefix)) {
    if (in_dim < 1 || hidden_layers < 1 || hidden_width < 1 || out_dim < 1)
        fail("mlp dims must be positive");
}

std::pair<int, int> ReluMlp::layer_dims(int l) const {
    const int fan_in = l == 0 ? in_dim_ : hidden_width_;
    const int fan_out = l == hidden_layers_ ? out_dim_ : hidden_width_;
    return {fan_in, fan_out};
}

void ReluMlp::register_params(ParamStore& store) const {
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        store.add(prefix_ + ".w" + std::to_string(l), static_cast<size_t>(fin) * fout);
        store.add(prefix_ + ".b" + std::to_string(l), static_cast<size_t>(fout));
    }
}

void ReluMlp::init(ParamStore& store, Rng& rng) const {
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fin));
        auto w = store.values(store.segment_index(prefix_ + ".w" + std::to_string(l)));
        for (double& x : w) x = rng.uniform(-bound, bound);
        auto b = store.values(store.segment_index(prefix_ + ".b" + std::to_string(l)));
        for (double& x : b) x = 0.0;
    }
}

size_t ReluMlp::param_count() const {
    size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        n += static_cast<size_t>(fin) * fout + fout;
    }
    return n;
}

std::vector<double> ReluMlp::forward(const ParamStore& store, const std::vector<double>& features,
                                     int npix) const {
    if (features.size() != static_cast<size_t>(npix) * in_dim_) fail("mlp feature shape mismatch");
    std::vector<double> act = features;
    std::vector<double> z;
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        auto w = store.values(store.segment_index(prefix_ + ".w" + std::to_string(l)));
        auto b = store.values(store.segment_index(prefix_ + ".b" + std::to_string(l)));
        z.assign(static_cast<size_t>(npix) * fout, 0.0);
        kernels::gemm(act.data(), w.data(), z.data(), npix, fin, fout);
        act.resize(z.size());
        kernels::add_rowvec(z.data(), b.data(), act.data(), npix, fout);
        if (l < hidden_layers_) kernels::relu(act, act);
    }
    return act;
}

int ReluMlp::forward(Tape& tape, int features_node) const {
    int h = features_node;
    for (int l = 0; l < layer_count(); ++l) {
        auto [fin, fout] = layer_dims(l);
        const int w = tape.param(prefix_ + ".w" + std::to_string(l), fin, fout);
        const int b = tape.param(prefix_ + ".b" + std::to_string(l), 1, fout);
        int z = tape.matmul(h, w);
        z = tape.add_rowvec(z, b);
        h = l < hidden_layers_ ? tape.relu(z) : z;
    }
    return h;
}

// ----------------------------------------------------------- ObjectModel

ObjectModel::ObjectModel(SirenConfig cfg, std::string prefix)
    : cfg_(cfg), amp_(cfg, prefix + ".amp"), phase_(cfg, prefix + ".phase") {
    // the amplitude/phase assembly below consumes one head output per pixel
    if (cfg.out_dim != 1) fail("object heads must be scalar");
}

void ObjectModel::register_params(ParamStore& store) const {
    amp_.register_params(store);
    phase_.register_params(store);
}

void ObjectModel::init(ParamStore& store, Rng& rng) const {
    Rng ra = rng.stream("amp");
    Rng rp = rng.stream("phase");
    amp_.init(store, ra);
    phase_.init(store, rp);
}

ComplexField ObjectModel::predict(const ParamStore& store, const CoordGrid& coords) const {
    std::vector<double> amp_raw = amp_.forward(store, coords);
    std::vector<double> phase = phase_.forward(store, coords);
    std::vector<double> amp(amp_raw.size());
    kernels::logistic(amp_raw, amp);
    ComplexField f(coords.rows, coords.cols);
    for (size_t i = 0; i < amp.size(); ++i) {
        f.data()[2 * i] = amp[i] * std::cos(phase[i]);
        f.data()[2 * i + 1] = amp[i] * std::sin(phase[i]);
    }
    return f;
}

int ObjectModel::predict(Tape& tape, const CoordGrid& coords) const {
    const int xy = tape.constant(coords.as_tensor());
    const int amp = tape.logistic(amp_.forward(tape, xy));
    const int phase = phase_.forward(tape, xy);
    return tape.reshape(tape.polar(amp, phase), coords.rows, coords.cols);
}

// ------------------------------------------------------------ ProbeModel

ProbeModel::ProbeModel(HashGridConfig cfg, std::string prefix)
    : cfg_(cfg),
      amp_enc_(cfg, prefix + ".amp"),
      phase_enc_(cfg, prefix + ".phase"),
      amp_mlp_(cfg.feature_dim(), cfg.mlp_hidden_layers, cfg.mlp_hidden_width, 1,
               prefix + ".amp.mlp"),
      phase_mlp_(cfg.feature_dim(), cfg.mlp_hidden_layers, cfg.mlp_hidden_width, 1,
                 prefix + ".phase.mlp") {}

void ProbeModel::register_params(ParamStore& store) const {
    amp_enc_.register_params(store);
    amp_mlp_.register_params(store);
    phase_enc_.register_params(store);
    phase_mlp_.register_params(store);
}

void ProbeModel::init(ParamStore& store, Rng& rng) const {
    Rng rat = rng.stream("amp.table");
    Rng ram = rng.stream("amp.mlp");
    Rng rpt = rng.stream("phase.table");
    Rng rpm = rng.stream("phase.mlp");
    amp_enc_.init(store, rat);
    amp_mlp_.init(store, ram);
    phase_enc_.init(store, rpt);
    phase_mlp_.init(store, rpm);
}

ProbeModel::Plan ProbeModel::plan(int rows, int cols) const {
    Plan p;
    p.coords = CoordGrid::make(rows, cols);
    p.amp_enc = amp_enc_.prepare(p.coords);
    p.phase_enc = phase_enc_.prepare(p.coords);
    return p;
}

size_t ProbeModel::param_count() const {
    return 2 * cfg_.param_count();
}

ComplexField ProbeModel::predict(const ParamStore& store, const Plan& plan,
                                 std::vector<double>* norm_amp) const {
    const int npix = static_cast<int>(plan.coords.npix());
    std::vector<double> fa = amp_enc_.encode(store, plan.amp_enc);
    std::vector<double> raw = amp_mlp_.forward(store, fa, npix);
    std::vector<double> amp(raw.size());
    kernels::abs_val(raw, amp);
    const double m = kernels::max_of(amp);
    if (m == 0.0) throw std::runtime_error("degenerate probe");
    for (double& x : amp) x /= m;
    std::vector<double> fp = phase_enc_.encode(store, plan.phase_enc);
    std::vector<double> phase = phase_mlp_.forward(store, fp, npix);
    ComplexField f(plan.coords.rows, plan.coords.cols);
    for (size_t i = 0; i < amp.size(); ++i) {
        f.data()[2 * i] = amp[i] * std::cos(phase[i]);
        f.data()[2 * i + 1] = amp[i] * std::sin(phase[i]);
    }
    if (norm_amp) *norm_amp = std::move(amp);
    return f;
}

ProbeModel::TapeOut ProbeModel::predict(Tape& tape, const Plan& plan) const {
    const int fa = amp_enc_.encode(tape, plan.amp_enc);
    const int raw = amp_mlp_.forward(tape, fa);
    const int amp_abs = tape.abs(raw);
    const int m = tape.max(amp_abs);
    if (tape.scalar_value(m) == 0.0) throw std::runtime_error("degenerate probe");
    const int amp = tape.div_scalar(amp_abs, m);
    const int fp = phase_enc_.encode(tape, plan.phase_enc);
    const int phase = phase_mlp_.forward(tape, fp);
    TapeOut out;
    out.probe = tape.reshape(tape.polar(amp, phase), plan.coords.rows, plan.coords.cols);
    out.norm_amp = tape.reshape(amp, plan.coords.rows, plan.coords.cols);
    return out;
}

size_t count_params(const SirenConfig& object_cfg, const HashGridConfig& probe_cfg) {
    object_cfg.validate();
    probe_cfg.validate();
    return 2 * object_cfg.param_count() + 2 * probe_cfg.param_count();
}

}  // namespace ptyinr
