#include "ptyinr/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "ptyinr/rng.hpp"

namespace ptyinr {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

void check_section_keys(const json& j, const std::string& path,
                        const std::set<std::string>& allowed) {
    if (!j.is_object()) bad("config section '" + path + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) bad("unknown config key '" + path + "." + it.key() + "'");
}

int get_int(const json& j, const std::string& path, const char* key, int def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) bad("config key '" + path + "." + key + "' must be an integer");
    return v.get<int>();
}

int64_t get_i64(const json& j, const std::string& path, const char* key, int64_t def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) bad("config key '" + path + "." + key + "' must be an integer");
    return v.get<int64_t>();
}

uint64_t get_u64(const json& j, const std::string& path, const char* key, uint64_t def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0))
        bad("config key '" + path + "." + key + "' must be a nonnegative integer");
    return v.get<uint64_t>();
}

double get_double(const json& j, const std::string& path, const char* key, double def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) bad("config key '" + path + "." + key + "' must be a number");
    return v.get<double>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_string()) bad("config key '" + path + "." + key + "' must be a string");
    return v.get<std::string>();
}

// accepts n (square) or [rows, cols]
std::pair<int, int> get_shape(const json& j, const std::string& path, const char* key,
                              std::pair<int, int> def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (v.is_number_integer()) {
        const int n = v.get<int>();
        return {n, n};
    }
    if (v.is_array() && v.size() == 2 && v.at(0).is_number_integer() &&
        v.at(1).is_number_integer())
        return {v.at(0).get<int>(), v.at(1).get<int>()};
    bad("config key '" + path + "." + key + "' must be an integer or a [rows, cols] pair");
}

}  // namespace

RunConfig parse_config(const json& j) {
    if (!j.is_object()) bad("config root must be an object");
    check_section_keys(j, "config", {"phantom", "scan", "noise", "train", "networks", "epie"});

    RunConfig c;

    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        check_section_keys(p, "phantom", {"kind", "object_shape", "probe_shape"});
        c.phantom_kind = get_string(p, "phantom", "kind", c.phantom_kind);
        std::tie(c.object_rows, c.object_cols) =
            get_shape(p, "phantom", "object_shape", {c.object_rows, c.object_cols});
        std::tie(c.probe_rows, c.probe_cols) =
            get_shape(p, "phantom", "probe_shape", {c.probe_rows, c.probe_cols});
    }

    if (j.contains("scan")) {
        const json& s = j.at("scan");
        check_section_keys(s, "scan", {"step_pixels"});
        std::tie(c.step_y, c.step_x) = get_shape(s, "scan", "step_pixels", {c.step_y, c.step_x});
    }

    if (j.contains("noise")) {
        const json& n = j.at("noise");
        check_section_keys(n, "noise", {"kind", "alpha", "sigma", "seed"});
        c.noise.kind = get_string(n, "noise", "kind", c.noise.kind);
        c.noise.alpha = get_double(n, "noise", "alpha", c.noise.alpha);
        c.noise.sigma = get_double(n, "noise", "sigma", c.noise.sigma);
        c.noise.seed = get_u64(n, "noise", "seed", c.noise.seed);
    }

    bool k_given = false;
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_section_keys(t, "train",
                           {"steps", "lr_object", "lr_probe", "batch", "seed", "omega_first",
                            "beta", "lambda", "k", "probe_mode", "checkpoint_every"});
        c.train.steps = get_i64(t, "train", "steps", c.train.steps);
        c.train.lr_object = get_double(t, "train", "lr_object", c.train.lr_object);
        c.train.lr_probe = get_double(t, "train", "lr_probe", c.train.lr_probe);
        c.train.batch = get_int(t, "train", "batch", c.train.batch);
        c.train.seed = get_u64(t, "train", "seed", c.train.seed);
        c.train.omega_first = get_double(t, "train", "omega_first", c.train.omega_first);
        c.train.loss.beta = get_double(t, "train", "beta", c.train.loss.beta);
        c.train.loss.lambda = get_double(t, "train", "lambda", c.train.loss.lambda);
        if (t.contains("k")) {
            k_given = true;
            c.train.loss.k = get_i64(t, "train", "k", c.train.loss.k);
        }
        c.train.probe_mode = get_string(t, "train", "probe_mode", c.train.probe_mode);
        c.train.checkpoint_every =
            get_i64(t, "train", "checkpoint_every", c.train.checkpoint_every);
    }
    if (!k_given) c.train.loss.k = c.train.steps / 10;

    if (j.contains("networks")) {
        const json& n = j.at("networks");
        check_section_keys(n, "networks", {"siren", "hashgrid"});
        if (n.contains("siren")) {
            const json& s = n.at("siren");
            check_section_keys(s, "networks.siren",
                               {"hidden_layers", "hidden_width", "omega_hidden"});
            c.train.siren.hidden_layers =
                get_int(s, "networks.siren", "hidden_layers", c.train.siren.hidden_layers);
            c.train.siren.hidden_width =
                get_int(s, "networks.siren", "hidden_width", c.train.siren.hidden_width);
            c.train.siren.omega_hidden =
                get_double(s, "networks.siren", "omega_hidden", c.train.siren.omega_hidden);
        }
        if (n.contains("hashgrid")) {
            const json& h = n.at("hashgrid");
            check_section_keys(h, "networks.hashgrid",
                               {"levels", "features_per_entry", "table_size_log2",
                                "base_resolution", "growth_factor", "mlp_hidden_layers",
                                "mlp_hidden_width"});
            HashGridConfig& g = c.train.hashgrid;
            g.levels = get_int(h, "networks.hashgrid", "levels", g.levels);
            g.features_per_entry =
                get_int(h, "networks.hashgrid", "features_per_entry", g.features_per_entry);
            g.table_size_log2 =
                get_int(h, "networks.hashgrid", "table_size_log2", g.table_size_log2);
            g.base_resolution =
                get_int(h, "networks.hashgrid", "base_resolution", g.base_resolution);
            g.growth_factor =
                get_double(h, "networks.hashgrid", "growth_factor", g.growth_factor);
            g.mlp_hidden_layers =
                get_int(h, "networks.hashgrid", "mlp_hidden_layers", g.mlp_hidden_layers);
            g.mlp_hidden_width =
                get_int(h, "networks.hashgrid", "mlp_hidden_width", g.mlp_hidden_width);
        }
    }

    if (j.contains("epie")) {
        const json& e = j.at("epie");
        check_section_keys(e, "epie",
                           {"iterations", "alpha_obj", "alpha_probe", "probe_mode", "seed"});
        c.epie.iterations = get_i64(e, "epie", "iterations", c.epie.iterations);
        c.epie.alpha_obj = get_double(e, "epie", "alpha_obj", c.epie.alpha_obj);
        c.epie.alpha_probe = get_double(e, "epie", "alpha_probe", c.epie.alpha_probe);
        c.epie.probe_mode = get_string(e, "epie", "probe_mode", c.epie.probe_mode);
        c.epie.seed = get_u64(e, "epie", "seed", c.epie.seed);
    }

    c.validate();
    return c;
}

void RunConfig::validate() const {
    static const std::set<std::string> kinds = {"siemens", "blobs", "checker"};
    if (!kinds.count(phantom_kind)) bad("unknown phantom kind: " + phantom_kind);
    if (object_rows < 16 || object_cols < 16 || probe_rows < 16 || probe_cols < 16)
        bad("phantom shapes must be at least 16");
    if (probe_rows > object_rows || probe_cols > object_cols)
        bad("probe larger than object");
    if (step_y < 1 || step_x < 1) bad("scan step must be at least 1");
    noise.validate();
    train.validate();
    epie.validate();
}

nlohmann::json RunConfig::snapshot() const {
    json j;
    j["phantom"] = {{"kind", phantom_kind},
                    {"object_shape", {object_rows, object_cols}},
                    {"probe_shape", {probe_rows, probe_cols}}};
    j["scan"] = {{"step_pixels", {step_y, step_x}}};
    j["noise"] = {{"kind", noise.kind},
                  {"alpha", noise.alpha},
                  {"sigma", noise.sigma},
                  {"seed", noise.seed}};
    j["train"] = {{"steps", train.steps},
                  {"lr_object", train.lr_object},
                  {"lr_probe", train.lr_probe},
                  {"batch", train.batch},
                  {"seed", train.seed},
                  {"omega_first", train.omega_first},
                  {"beta", train.loss.beta},
                  {"lambda", train.loss.lambda},
                  {"k", train.loss.k},
                  {"probe_mode", train.probe_mode},
                  {"checkpoint_every", train.checkpoint_every}};
    j["networks"] = {{"siren",
                      {{"hidden_layers", train.siren.hidden_layers},
                       {"hidden_width", train.siren.hidden_width},
                       {"omega_hidden", train.siren.omega_hidden}}},
                     {"hashgrid",
                      {{"levels", train.hashgrid.levels},
                       {"features_per_entry", train.hashgrid.features_per_entry},
                       {"table_size_log2", train.hashgrid.table_size_log2},
                       {"base_resolution", train.hashgrid.base_resolution},
                       {"growth_factor", train.hashgrid.growth_factor},
                       {"mlp_hidden_layers", train.hashgrid.mlp_hidden_layers},
                       {"mlp_hidden_width", train.hashgrid.mlp_hidden_width}}}};
    j["epie"] = {{"iterations", epie.iterations},
                 {"alpha_obj", epie.alpha_obj},
                 {"alpha_probe", epie.alpha_probe},
                 {"probe_mode", epie.probe_mode},
                 {"seed", epie.seed}};
    return j;
}

uint64_t RunConfig::hash() const { return fnv1a64(snapshot().dump()); }

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path.string());
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("invalid config JSON in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::json default_config_json() {
    RunConfig c;
    c.object_rows = c.object_cols = 64;
    c.probe_rows = c.probe_cols = 16;
    c.step_y = c.step_x = 4;
    c.train.steps = 400;
    c.train.lr_object = 3e-4;
    c.train.lr_probe = 3e-4;
    c.train.loss.k = c.train.steps / 10;
    c.train.siren.hidden_layers = 3;
    c.train.siren.hidden_width = 128;
    c.train.hashgrid.table_size_log2 = 12;
    c.epie.iterations = 200;
    return c.snapshot();
}

}  // namespace ptyinr
