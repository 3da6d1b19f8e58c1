#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ptyinr/baseline.hpp"
#include "ptyinr/config.hpp"
#include "ptyinr/container.hpp"
#include "ptyinr/engine.hpp"
#include "ptyinr/gradcheck.hpp"
#include "ptyinr/image_io.hpp"
#include "ptyinr/metrics.hpp"
#include "ptyinr/physics.hpp"
#include "ptyinr/simulate.hpp"
#include "ptyinr/version.hpp"

namespace {

using namespace ptyinr;
namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

void attach_field_images(Container& c, const std::string& stem, const ComplexField& f) {
    const std::vector<double> amp = f.amplitude();
    double amp_max = 0.0;
    for (double v : amp) amp_max = std::max(amp_max, v);
    c.attachments.emplace_back(stem + "_amplitude.png",
                               encode_gray_png(amp, f.rows(), f.cols(), 0.0, amp_max));
    c.attachments.emplace_back(stem + "_phase.png",
                               encode_warm_png(f.phase(), f.rows(), f.cols(), -kPi, kPi));
}

ComplexField field_from_record(const ArrayRecord& a) {
    if (a.dtype != "complex128" || a.shape.size() != 2)
        throw std::runtime_error("array '" + a.name + "' is not a 2-d complex field");
    ComplexField f(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]));
    std::copy(a.data.begin(), a.data.end(), f.data());
    return f;
}

// --probe fixed:PATH, where PATH holds either a dataset (probe_truth) or a
// reconstruction (probe)
ComplexField probe_from_spec(const std::string& spec) {
    const std::string prefix = "fixed:";
    if (spec.rfind(prefix, 0) != 0)
        throw std::invalid_argument("probe flag must look like fixed:PATH");
    const fs::path path = spec.substr(prefix.size());
    const Container c = load_container(path);
    if (c.has_array("probe_truth")) return field_from_record(c.array("probe_truth"));
    if (c.has_array("probe")) return field_from_record(c.array("probe"));
    throw std::runtime_error("no probe array in " + path.string());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot create " + tmp.string());
        os << text;
        os.flush();
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void print_provenance(const Provenance& p) {
    std::printf("  config_hash = %016llx, seed = %llu, version = %s\n",
                static_cast<unsigned long long>(p.config_hash),
                static_cast<unsigned long long>(p.seed), p.version.c_str());
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = load_config_file(config_path);
    Rng rng(cfg.noise.seed);
    Rng phantom_rng = rng.stream("phantom");
    const Phantom ph = make_phantom(cfg.phantom_kind, cfg.object_rows, cfg.object_cols,
                                    cfg.probe_rows, cfg.probe_cols, phantom_rng);
    const Dataset ds = build_dataset(ph, cfg.step_y, cfg.step_x, cfg.noise);

    Container c = dataset_to_container(ds, cfg.snapshot(), cfg.hash());
    attach_field_images(c, "object_truth", ds.truth.object);
    attach_field_images(c, "probe_truth", ds.truth.probe);
    const auto f0 = ds.data.frame(0);
    double f0_max = 0.0;
    for (double v : f0) f0_max = std::max(f0_max, v);
    c.attachments.emplace_back(
        "frame_000.png", encode_gray_png(f0, ds.data.grid.probe_rows, ds.data.grid.probe_cols,
                                         0.0, f0_max));
    save_container(out_dir, c);

    std::printf("simulate: %zu frames of %dx%d (%s noise) -> %s\n", ds.data.frame_count(),
                ds.data.grid.probe_rows, ds.data.grid.probe_cols, ds.data.noise.kind.c_str(),
                out_dir.c_str());
    print_provenance(c.provenance);
    return 0;
}

int cmd_reconstruct(const std::string& data_dir, const std::string& config_path,
                    const std::string& out_dir, const std::string& probe_spec,
                    const std::string& resume, const std::string& checkpoint) {
    RunConfig cfg = load_config_file(config_path);
    const Dataset ds = dataset_from_container(load_container(data_dir));

    if (!checkpoint.empty()) {
        cfg.train.checkpoint_path = checkpoint;
        if (cfg.train.checkpoint_every == 0)
            cfg.train.checkpoint_every = std::max<int64_t>(1, cfg.train.steps / 10);
    }

    ReconResult res;
    if (!probe_spec.empty()) {
        const ComplexField probe = probe_from_spec(probe_spec);
        cfg.train.probe_mode = "fixed";
        res = reconstruct_known_probe(ds.data, probe, cfg.train, resume);
    } else {
        if (cfg.train.probe_mode != "learn")
            throw std::invalid_argument("probe_mode=fixed requires --probe fixed:PATH");
        res = reconstruct(ds.data, cfg.train, resume);
    }
    res.config_hash = cfg.hash();

    Container c = recon_to_container(res, cfg.snapshot(), "ptyinr");
    attach_field_images(c, "object", res.object);
    attach_field_images(c, "probe", res.probe);
    save_container(out_dir, c);

    const double final_loss = res.loss_history.empty() ? 0.0 : res.loss_history.back();
    std::printf("reconstruct: %lld steps, final loss %.6e -> %s\n",
                static_cast<long long>(cfg.train.steps), final_loss, out_dir.c_str());
    print_provenance(c.provenance);
    return 0;
}

int cmd_epie(const std::string& data_dir, const std::string& config_path,
             const std::string& out_dir, const std::string& probe_spec) {
    const RunConfig cfg = load_config_file(config_path);
    const Dataset ds = dataset_from_container(load_container(data_dir));
    const ScanGrid& g = ds.data.grid;

    EpieConfig ecfg = cfg.epie;
    const ComplexField obj0 = epie_default_object(g.object_rows, g.object_cols);
    ComplexField probe0;
    if (!probe_spec.empty()) {
        probe0 = probe_from_spec(probe_spec);
        ecfg.probe_mode = "fixed";
    } else {
        probe0 = epie_default_probe(g.probe_rows, g.probe_cols);
    }

    ReconResult res = epie_reconstruct(ds.data, obj0, probe0, ecfg);
    res.config_hash = cfg.hash();

    Container c = recon_to_container(res, cfg.snapshot(), "epie");
    attach_field_images(c, "object", res.object);
    attach_field_images(c, "probe", res.probe);
    save_container(out_dir, c);

    const double final_err = res.loss_history.empty() ? 0.0 : res.loss_history.back();
    std::printf("epie: %lld iterations, final fourier error %.6e -> %s\n",
                static_cast<long long>(ecfg.iterations), final_err, out_dir.c_str());
    print_provenance(c.provenance);
    return 0;
}

int cmd_evaluate(const std::string& recon_dir, const std::string& truth_dir,
                 const std::string& report_path, int margin, const std::string& recon_b_dir,
                 const std::string& frc_csv_path) {
    const Container rc = load_container(recon_dir);
    const ReconResult res = recon_from_container(rc);
    const Container tc = load_container(truth_dir);
    const Dataset ds = dataset_from_container(tc);

    std::optional<ComplexField> second;
    if (!recon_b_dir.empty())
        second = recon_from_container(load_container(recon_b_dir)).object;
    if (!frc_csv_path.empty() && !second)
        throw std::invalid_argument("--frc-csv needs --recon-b (an independent reconstruction)");

    const MetricReport rep =
        evaluate(res, ds.truth, margin, second ? &*second : nullptr);

    std::ostringstream report;
    report << rep.to_text();
    char hashbuf[32];
    std::snprintf(hashbuf, sizeof hashbuf, "%016llx",
                  static_cast<unsigned long long>(rc.provenance.config_hash));
    report << "recon_config_hash = " << hashbuf << "\n";
    report << "recon_seed = " << rc.provenance.seed << "\n";
    report << "recon_version = " << rc.provenance.version << "\n";
    std::snprintf(hashbuf, sizeof hashbuf, "%016llx",
                  static_cast<unsigned long long>(tc.provenance.config_hash));
    report << "truth_config_hash = " << hashbuf << "\n";
    report << "format_version = " << rc.format_version << "\n";
    write_text_atomic(report_path, report.str());
    if (!frc_csv_path.empty()) write_text_atomic(frc_csv_path, rep.frc_csv());

    std::cout << report.str();
    return 0;
}

int cmd_gradcheck(const std::string& config_path, size_t samples, double step) {
    const RunConfig cfg =
        config_path.empty() ? parse_config(default_config_json()) : load_config_file(config_path);

    // toy instance: 16x16 object, 8x8 probe, 3x3 positions
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
    DiffractionSet set = simulate_intensity(object, probe, make_scan_grid(n, n, pn, pn, 4, 4));

    TrainConfig tcfg = cfg.train;
    LossProblem problem(set, tcfg);
    problem.set_step(0);  // regularizer active, so the check covers the full loss

    // The fresh probe tables sit at +-1e-4, where the raw amplitudes straddle
    // the |.| kink and the max pick has no margin: the loss is nonsmooth below
    // any usable finite-difference step there. The check therefore runs at a
    // generic probe parameter point instead of the init point.
    Rng jrng = Rng(tcfg.seed).stream("gradcheck.jitter");
    ParamStore& store = problem.params();
    auto vals = store.values();
    for (size_t si = 0; si < store.segment_count(); ++si) {
        const auto& seg = store.segment(si);
        if (seg.name.rfind("probe.", 0) != 0) continue;
        for (size_t i = seg.offset; i < seg.offset + seg.length; ++i)
            vals[i] += jrng.uniform(-0.3, 0.3);
    }

    const LossFn fn = problem.as_loss_fn();
    const GradCheckReport rep = finite_diff_check(fn, problem.params(), samples, step, tcfg.seed);

    std::printf("max_rel_err = %.3e over %zu parameters (%zu kinks, %zu below noise floor)\n",
                rep.max_rel_err, rep.checked, rep.kinks_flagged, rep.below_noise_floor);
    std::printf("worst: %s[%zu] analytic %.6e numeric %.6e\n", rep.worst.segment.c_str(),
                rep.worst.index, rep.worst.analytic, rep.worst.numeric);
    const bool ok = rep.passes(1e-4);
    std::printf("gradcheck %s (tolerance 1e-4)\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PtyINR: neural-field ptychographic reconstruction"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, probe_spec, resume, checkpoint;
    std::string recon_dir, truth_dir, report_path, recon_b_dir, frc_csv_path;
    int margin = 0;
    size_t gc_samples = 200;
    double gc_step = 1e-5;

    auto* sim = app.add_subcommand("simulate", "Build a phantom and its diffraction dataset");
    sim->add_option("--config", config_path, "JSON config")->required();
    sim->add_option("--out", out_dir, "output container directory")->required();

    auto* rec = app.add_subcommand("reconstruct", "Neural-field reconstruction");
    rec->add_option("--data", data_dir, "dataset container")->required();
    rec->add_option("--config", config_path, "JSON config")->required();
    rec->add_option("--out", out_dir, "output container directory")->required();
    rec->add_option("--probe", probe_spec, "fixed:PATH holds the probe fixed at that field");
    rec->add_option("--resume", resume, "checkpoint file to resume from");
    rec->add_option("--checkpoint", checkpoint, "checkpoint file to write during training");

    auto* ep = app.add_subcommand("epie", "Classical ePIE baseline");
    ep->add_option("--data", data_dir, "dataset container")->required();
    ep->add_option("--config", config_path, "JSON config")->required();
    ep->add_option("--out", out_dir, "output container directory")->required();
    ep->add_option("--probe", probe_spec, "fixed:PATH holds the probe fixed at that field");

    auto* ev = app.add_subcommand("evaluate", "PSNR / FRC report against ground truth");
    ev->add_option("--recon", recon_dir, "reconstruction container")->required();
    ev->add_option("--truth", truth_dir, "dataset container with ground truth")->required();
    ev->add_option("--report", report_path, "report file to write")->required();
    ev->add_option("--margin", margin, "crop this many edge pixels before scoring");
    ev->add_option("--recon-b", recon_b_dir, "second reconstruction for the FRC split");
    ev->add_option("--frc-csv", frc_csv_path, "write the FRC curve table here");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
    gc->add_option("--config", config_path, "JSON config (defaults to the built-in config)");
    gc->add_option("--samples", gc_samples, "parameters to probe");
    gc->add_option("--step", gc_step, "central-difference step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir);
        if (rec->parsed())
            return cmd_reconstruct(data_dir, config_path, out_dir, probe_spec, resume,
                                   checkpoint);
        if (ep->parsed()) return cmd_epie(data_dir, config_path, out_dir, probe_spec);
        if (ev->parsed())
            return cmd_evaluate(recon_dir, truth_dir, report_path, margin, recon_b_dir,
                                frc_csv_path);
        if (gc->parsed()) return cmd_gradcheck(config_path, gc_samples, gc_step);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
