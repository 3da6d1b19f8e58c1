#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "ptyinr/baseline.hpp"
#include "ptyinr/config.hpp"
#include "ptyinr/engine.hpp"
#include "ptyinr/gradcheck.hpp"
#include "ptyinr/metrics.hpp"
#include "ptyinr/networks.hpp"
#include "ptyinr/physics.hpp"
#include "ptyinr/simulate.hpp"
#include "ptyinr/version.hpp"

namespace py = pybind11;
using namespace ptyinr;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

ComplexField field_from_array(const ComplexArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d complex array");
    ComplexField f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    const auto* src = a.data();
    for (size_t i = 0; i < f.size(); ++i) f.c(i) = src[i];
    return f;
}

py::array_t<std::complex<double>> field_to_array(const ComplexField& f) {
    py::array_t<std::complex<double>> out({f.rows(), f.cols()});
    auto* dst = out.mutable_data();
    for (size_t i = 0; i < f.size(); ++i) dst[i] = f.c(i);
    return out;
}

RunConfig config_from_json_text(const std::string& text) {
    return parse_config(nlohmann::json::parse(text));
}

DiffractionSet set_from_arrays(const RealArray& frames,
                               const py::array_t<int64_t, py::array::c_style>& positions,
                               std::pair<int, int> object_shape, std::pair<int, int> step) {
    if (frames.ndim() != 3) throw std::invalid_argument("frames must be [count, rows, cols]");
    if (positions.ndim() != 2 || positions.shape(1) != 2)
        throw std::invalid_argument("positions must be [count, 2]");
    if (frames.shape(0) != positions.shape(0))
        throw std::invalid_argument("frame count does not match scan grid");

    DiffractionSet set;
    set.grid.object_rows = object_shape.first;
    set.grid.object_cols = object_shape.second;
    set.grid.probe_rows = static_cast<int>(frames.shape(1));
    set.grid.probe_cols = static_cast<int>(frames.shape(2));
    set.grid.step_y = step.first;
    set.grid.step_x = step.second;
    const auto* pos = positions.data();
    for (py::ssize_t j = 0; j < positions.shape(0); ++j)
        set.grid.positions.emplace_back(static_cast<int>(pos[2 * j]),
                                        static_cast<int>(pos[2 * j + 1]));
    set.frames.assign(frames.data(), frames.data() + frames.size());
    set.validate();
    return set;
}

py::tuple recon_to_tuple(const ReconResult& r) {
    return py::make_tuple(field_to_array(r.object), field_to_array(r.probe),
                          py::cast(r.loss_history));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Neural-field ptychographic reconstruction core";
    m.attr("__version__") = kVersion;

    m.def(
        "phantom",
        [](const std::string& kind, std::pair<int, int> object_shape,
           std::pair<int, int> probe_shape, uint64_t seed) {
            Rng rng(seed);
            Rng prng = rng.stream("phantom");
            const Phantom ph = make_phantom(kind, object_shape.first, object_shape.second,
                                            probe_shape.first, probe_shape.second, prng);
            return py::make_tuple(field_to_array(ph.object), field_to_array(ph.probe));
        },
        py::arg("kind"), py::arg("object_shape"), py::arg("probe_shape"), py::arg("seed") = 0,
        "Ground-truth (object, probe) pair");

    m.def(
        "focused_probe",
        [](int rows, int cols) { return field_to_array(make_focused_probe(rows, cols)); },
        py::arg("rows"), py::arg("cols"));

    m.def(
        "simulate",
        [](const ComplexArray& object, const ComplexArray& probe, std::pair<int, int> step,
           const std::string& noise_kind, double alpha, double sigma, uint64_t seed) {
            Phantom ph;
            ph.object = field_from_array(object);
            ph.probe = field_from_array(probe);
            ph.description = "custom";
            NoiseSpec noise;
            noise.kind = noise_kind;
            noise.alpha = alpha;
            noise.sigma = sigma;
            noise.seed = seed;
            const Dataset ds = build_dataset(ph, step.first, step.second, noise);
            const auto& g = ds.data.grid;
            py::array_t<double> frames(
                {ds.data.frame_count(), static_cast<size_t>(g.probe_rows),
                 static_cast<size_t>(g.probe_cols)});
            std::copy(ds.data.frames.begin(), ds.data.frames.end(), frames.mutable_data());
            py::array_t<int64_t> positions({ds.data.frame_count(), static_cast<size_t>(2)});
            auto* pos = positions.mutable_data();
            for (size_t j = 0; j < g.positions.size(); ++j) {
                pos[2 * j] = g.positions[j].first;
                pos[2 * j + 1] = g.positions[j].second;
            }
            return py::make_tuple(frames, positions);
        },
        py::arg("object"), py::arg("probe"), py::arg("step"), py::arg("noise") = "none",
        py::arg("alpha") = 10.0, py::arg("sigma") = 100.0, py::arg("seed") = 0,
        "Far-field intensities (frames, positions) for a raster scan");

    m.def(
        "reconstruct",
        [](const RealArray& frames, const py::array_t<int64_t, py::array::c_style>& positions,
           std::pair<int, int> object_shape, std::pair<int, int> step,
           const std::string& config_json, std::optional<ComplexArray> probe) {
            const DiffractionSet set = set_from_arrays(frames, positions, object_shape, step);
            const RunConfig cfg = config_from_json_text(config_json);
            if (probe) {
                const ComplexField p = field_from_array(*probe);
                TrainConfig t = cfg.train;
                t.probe_mode = "fixed";
                return recon_to_tuple(reconstruct_known_probe(set, p, t));
            }
            return recon_to_tuple(reconstruct(set, cfg.train));
        },
        py::arg("frames"), py::arg("positions"), py::arg("object_shape"), py::arg("step"),
        py::arg("config_json"), py::arg("probe") = std::nullopt,
        "Neural-field reconstruction -> (object, probe, loss_history)");

    m.def(
        "epie",
        [](const RealArray& frames, const py::array_t<int64_t, py::array::c_style>& positions,
           std::pair<int, int> object_shape, std::pair<int, int> step,
           const std::string& config_json, std::optional<ComplexArray> probe) {
            const DiffractionSet set = set_from_arrays(frames, positions, object_shape, step);
            const RunConfig cfg = config_from_json_text(config_json);
            EpieConfig e = cfg.epie;
            const ComplexField obj0 =
                epie_default_object(set.grid.object_rows, set.grid.object_cols);
            ComplexField probe0;
            if (probe) {
                probe0 = field_from_array(*probe);
                e.probe_mode = "fixed";
            } else {
                probe0 = epie_default_probe(set.grid.probe_rows, set.grid.probe_cols);
            }
            return recon_to_tuple(epie_reconstruct(set, obj0, probe0, e));
        },
        py::arg("frames"), py::arg("positions"), py::arg("object_shape"), py::arg("step"),
        py::arg("config_json"), py::arg("probe") = std::nullopt,
        "ePIE baseline -> (object, probe, loss_history)");

    m.def(
        "evaluate",
        [](const ComplexArray& object, const ComplexArray& probe, const ComplexArray& truth_object,
           const ComplexArray& truth_probe, int margin) {
            ReconResult r;
            r.object = field_from_array(object);
            r.probe = field_from_array(probe);
            Phantom t;
            t.object = field_from_array(truth_object);
            t.probe = field_from_array(truth_probe);
            const MetricReport rep = evaluate(r, t, margin);
            py::dict d;
            d["theta_star_rad"] = rep.theta_star_rad;
            d["object_amplitude_psnr_db"] = rep.object_amplitude_psnr_db;
            d["object_phase_psnr_db"] = rep.object_phase_psnr_db;
            d["probe_amplitude_psnr_db"] = rep.probe_amplitude_psnr_db;
            d["probe_phase_psnr_db"] = rep.probe_phase_psnr_db;
            return d;
        },
        py::arg("object"), py::arg("probe"), py::arg("truth_object"), py::arg("truth_probe"),
        py::arg("margin") = 0, "PSNR metrics after global phase alignment");

    m.def(
        "psnr",
        [](const RealArray& image, const RealArray& reference, double max_value) {
            return psnr(std::span<const double>(image.data(), image.size()),
                        std::span<const double>(reference.data(), reference.size()), max_value);
        },
        py::arg("image"), py::arg("reference"), py::arg("max_value"));

    m.def(
        "align_global_phase",
        [](const ComplexArray& recon, const ComplexArray& truth) {
            const PhaseAlignment a =
                align_global_phase(field_from_array(recon), field_from_array(truth));
            return py::make_tuple(a.theta, field_to_array(a.aligned));
        },
        py::arg("recon"), py::arg("truth"));

    m.def(
        "frc",
        [](const ComplexArray& a, const ComplexArray& b) {
            const FrcCurve c = frc(field_from_array(a), field_from_array(b));
            py::dict d;
            d["frequencies"] = py::cast(c.frequencies);
            d["correlations"] = py::cast(c.correlations);
            d["imag_residue"] = py::cast(c.imag_residue);
            d["ring_counts"] = py::cast(c.ring_counts);
            d["half_bit_frequency"] = half_bit_resolution(c);
            return d;
        },
        py::arg("a"), py::arg("b"), "Fourier ring correlation with the half-bit crossing");

    m.def(
        "count_params",
        [](const std::string& config_json) {
            const RunConfig cfg = config_from_json_text(config_json);
            SirenConfig s = cfg.train.siren;
            s.omega_first = cfg.train.omega_first;
            return count_params(s, cfg.train.hashgrid);
        },
        py::arg("config_json"), "Trainable parameter count for the configured networks");

    m.def(
        "gradcheck",
        [](const std::string& config_json, size_t samples, double step) {
            const RunConfig cfg = config_from_json_text(config_json);
            Rng rng(cfg.train.seed);
            Rng orng = rng.stream("gradcheck.object");
            const int n = 16, pn = 8;
            std::vector<double> amp(static_cast<size_t>(n) * n), phase(amp.size());
            for (size_t i = 0; i < amp.size(); ++i) {
                amp[i] = orng.uniform(0.35, 0.95);
                phase[i] = orng.uniform(-1.5, 1.5);
            }
            const ComplexField object = from_parts(n, n, amp, phase);
            const ComplexField probe = make_focused_probe(pn, pn);
            const DiffractionSet set =
                simulate_intensity(object, probe, make_scan_grid(n, n, pn, pn, 4, 4));
            LossProblem problem(set, cfg.train);
            problem.set_step(0);
            const LossFn fn = problem.as_loss_fn();
            const GradCheckReport rep =
                finite_diff_check(fn, problem.params(), samples, step, cfg.train.seed);
            return rep.max_rel_err;
        },
        py::arg("config_json"), py::arg("samples") = 200, py::arg("step") = 1e-5,
        "Max relative error of analytic vs central-difference gradients");

    m.def("default_config", []() { return default_config_json().dump(2); },
          "The shipped desk-scale config as JSON text");
}
