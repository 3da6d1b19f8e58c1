#include "ptyinr/container.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "ptyinr/version.hpp"

namespace fs = std::filesystem;

namespace ptyinr {

namespace {

// nominal beamline geometry, informational only
constexpr double kEnergyKeV = 15.0;
constexpr double kDetectorDistanceM = 1.2;
constexpr double kPixelNm = 10.0;

bool valid_array_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

bool valid_file_name(const std::string& s) {
    if (s.empty() || s[0] == '.') return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
            return false;
    return true;
}

uint64_t bswap64(uint64_t x) {
    return ((x & 0x00000000000000ffull) << 56) | ((x & 0x000000000000ff00ull) << 40) |
           ((x & 0x0000000000ff0000ull) << 24) | ((x & 0x00000000ff000000ull) << 8) |
           ((x & 0x000000ff00000000ull) >> 8) | ((x & 0x0000ff0000000000ull) >> 24) |
           ((x & 0x00ff000000000000ull) >> 40) | ((x & 0xff00000000000000ull) >> 56);
}

void write_f64_file(const fs::path& p, const std::vector<double>& v) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot create " + p.string());
    if constexpr (std::endian::native == std::endian::little) {
        if (!v.empty())
            os.write(reinterpret_cast<const char*>(v.data()),
                     static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
        for (double d : v) {
            const uint64_t u = bswap64(std::bit_cast<uint64_t>(d));
            os.write(reinterpret_cast<const char*>(&u), sizeof(u));
        }
    }
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + p.string());
}

void write_raw_file(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot create " + p.string());
    if (!bytes.empty())
        os.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + p.string());
}

std::vector<double> read_f64_file(const fs::path& p, size_t values, const std::string& array_name) {
    std::error_code ec;
    const uintmax_t sz = fs::file_size(p, ec);
    if (ec)
        throw std::runtime_error("array '" + array_name + "': missing file " + p.string());
    const uintmax_t expect = static_cast<uintmax_t>(values) * sizeof(double);
    if (sz != expect)
        throw std::runtime_error("array '" + array_name + "': file " + p.filename().string() +
                                 " has " + std::to_string(sz) + " bytes, manifest expects " +
                                 std::to_string(expect));
    std::vector<double> out(values);
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("array '" + array_name + "': cannot open " + p.string());
    if (values > 0) {
        is.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(values * sizeof(double)));
        if (!is) throw std::runtime_error("array '" + array_name + "': short read");
        if constexpr (std::endian::native != std::endian::little) {
            for (double& d : out) d = std::bit_cast<double>(bswap64(std::bit_cast<uint64_t>(d)));
        }
    }
    return out;
}

std::vector<unsigned char> read_raw_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + p.string());
    std::vector<unsigned char> out((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    return out;
}

class Lockfile {
  public:
    explicit Lockfile(const fs::path& p) : path_(p) {
        fd_ = ::open(p.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw std::runtime_error("another writer holds the lock: " + p.string());
    }
    ~Lockfile() {
        ::close(fd_);
        ::unlink(path_.c_str());
    }
    Lockfile(const Lockfile&) = delete;
    Lockfile& operator=(const Lockfile&) = delete;

  private:
    fs::path path_;
    int fd_ = -1;
};

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::runtime_error("unexpected key '" + it.key() + "' in " + where);
}

nlohmann::json physical_block(int step_y, int step_x) {
    nlohmann::json p;
    p["energy_kev"] = kEnergyKeV;
    p["detector_distance_m"] = kDetectorDistanceM;
    p["pixel_nm"] = kPixelNm;
    p["step_nm"] = {step_y * kPixelNm, step_x * kPixelNm};
    return p;
}

}  // namespace

size_t ArrayRecord::count() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

size_t ArrayRecord::value_count() const {
    return count() * (dtype == "complex128" ? 2 : 1);
}

const ArrayRecord& Container::array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw std::runtime_error("container has no array '" + name + "'");
}

bool Container::has_array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return true;
    return false;
}

void save_container(const fs::path& dir, const Container& c) {
    if (fs::exists(dir))
        throw std::runtime_error("output directory already exists: " + dir.string());
    if (c.kind != "dataset" && c.kind != "reconstruction")
        throw std::invalid_argument("container kind must be dataset or reconstruction");

    std::set<std::string> names;
    for (const auto& a : c.arrays) {
        if (!valid_array_name(a.name))
            throw std::invalid_argument("bad array name '" + a.name + "'");
        if (!names.insert(a.name).second)
            throw std::invalid_argument("duplicate array name '" + a.name + "'");
        if (a.dtype != "float64" && a.dtype != "complex128")
            throw std::invalid_argument("array '" + a.name + "': unsupported dtype " + a.dtype);
        if (a.shape.empty())
            throw std::invalid_argument("array '" + a.name + "': empty shape");
        if (a.data.size() != a.value_count())
            throw std::invalid_argument("array '" + a.name + "': data does not match shape");
    }
    std::set<std::string> files;
    files.insert("manifest.json");
    for (const auto& a : c.arrays) files.insert(a.name + ".bin");
    for (const auto& [fname, bytes] : c.attachments) {
        (void)bytes;
        if (!valid_file_name(fname))
            throw std::invalid_argument("bad attachment name '" + fname + "'");
        if (!files.insert(fname).second)
            throw std::invalid_argument("attachment '" + fname + "' collides with another file");
    }

    Lockfile lock(dir.string() + ".lock");
    const fs::path tmp = dir.string() + ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp);
    try {
        nlohmann::json manifest;
        manifest["format_version"] = kFormatVersion;
        manifest["kind"] = c.kind;
        manifest["provenance"] = {{"config_hash", c.provenance.config_hash},
                                  {"seed", c.provenance.seed},
                                  {"version", c.provenance.version}};
        manifest["config"] = c.config;
        manifest["metadata"] = c.metadata;
        manifest["arrays"] = nlohmann::json::array();
        for (const auto& a : c.arrays) {
            write_f64_file(tmp / (a.name + ".bin"), a.data);
            manifest["arrays"].push_back({{"name", a.name},
                                          {"file", a.name + ".bin"},
                                          {"shape", a.shape},
                                          {"dtype", a.dtype},
                                          {"role", a.role},
                                          {"bytes", a.byte_count()}});
        }
        manifest["attachments"] = nlohmann::json::array();
        for (const auto& [fname, bytes] : c.attachments) {
            write_raw_file(tmp / fname, bytes);
            manifest["attachments"].push_back(fname);
        }
        std::ofstream os(tmp / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot create manifest in " + tmp.string());
        os << manifest.dump(2) << "\n";
        os.flush();
        if (!os) throw std::runtime_error("manifest write failed in " + tmp.string());
        os.close();
        fs::rename(tmp, dir);
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }
}

Container load_container(const fs::path& dir) {
    const fs::path mp = dir / "manifest.json";
    std::ifstream is(mp, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open manifest: " + mp.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("invalid manifest in " + dir.string() + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("invalid manifest in " + dir.string());
    check_keys(j, {"format_version", "kind", "provenance", "config", "metadata", "arrays",
                   "attachments"},
               "manifest");
    for (const char* key : {"format_version", "kind", "provenance", "arrays"})
        if (!j.contains(key))
            throw std::runtime_error("manifest missing '" + std::string(key) + "'");

    Container c;
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kFormatVersion)
        throw std::runtime_error("unsupported format_version " +
                                 std::to_string(c.format_version) + " (expected " +
                                 std::to_string(kFormatVersion) + ") in " + dir.string());
    c.kind = j.at("kind").get<std::string>();
    if (c.kind != "dataset" && c.kind != "reconstruction")
        throw std::runtime_error("unknown container kind '" + c.kind + "'");

    const auto& prov = j.at("provenance");
    check_keys(prov, {"config_hash", "seed", "version"}, "provenance");
    c.provenance.config_hash = prov.at("config_hash").get<uint64_t>();
    c.provenance.seed = prov.at("seed").get<uint64_t>();
    c.provenance.version = prov.at("version").get<std::string>();

    if (j.contains("config")) c.config = j.at("config");
    if (j.contains("metadata")) c.metadata = j.at("metadata");

    std::set<std::string> names;
    for (const auto& entry : j.at("arrays")) {
        check_keys(entry, {"name", "file", "shape", "dtype", "role", "bytes"}, "array entry");
        ArrayRecord a;
        a.name = entry.at("name").get<std::string>();
        if (!valid_array_name(a.name))
            throw std::runtime_error("bad array name '" + a.name + "' in manifest");
        if (!names.insert(a.name).second)
            throw std::runtime_error("duplicate array '" + a.name + "' in manifest");
        a.dtype = entry.at("dtype").get<std::string>();
        if (a.dtype != "float64" && a.dtype != "complex128")
            throw std::runtime_error("array '" + a.name + "': unsupported dtype " + a.dtype);
        a.role = entry.at("role").get<std::string>();
        a.shape = entry.at("shape").get<std::vector<size_t>>();
        if (a.shape.empty()) throw std::runtime_error("array '" + a.name + "': empty shape");
        const std::string file = entry.at("file").get<std::string>();
        if (!valid_file_name(file))
            throw std::runtime_error("array '" + a.name + "': bad file name '" + file + "'");
        const auto bytes = entry.at("bytes").get<uint64_t>();
        if (bytes != a.byte_count())
            throw std::runtime_error("array '" + a.name + "': manifest bytes " +
                                     std::to_string(bytes) + " disagree with shape (" +
                                     std::to_string(a.byte_count()) + ")");
        a.data = read_f64_file(dir / file, a.value_count(), a.name);
        c.arrays.push_back(std::move(a));
    }

    if (j.contains("attachments")) {
        for (const auto& entry : j.at("attachments")) {
            const std::string fname = entry.get<std::string>();
            if (!valid_file_name(fname))
                throw std::runtime_error("bad attachment name '" + fname + "' in manifest");
            c.attachments.emplace_back(fname, read_raw_file(dir / fname));
        }
    }
    return c;
}

Container dataset_to_container(const Dataset& ds, const nlohmann::json& config_snapshot,
                               uint64_t config_hash) {
    ds.data.validate();
    const ScanGrid& g = ds.data.grid;

    Container c;
    c.format_version = kFormatVersion;
    c.kind = "dataset";
    c.provenance.config_hash = config_hash;
    c.provenance.seed = ds.data.noise.seed;
    c.provenance.version = kVersion;
    c.config = config_snapshot;

    nlohmann::json scan;
    scan["object_shape"] = {g.object_rows, g.object_cols};
    scan["probe_shape"] = {g.probe_rows, g.probe_cols};
    scan["step_pixels"] = {g.step_y, g.step_x};
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& [y, x] : g.positions) positions.push_back({y, x});
    scan["positions"] = positions;
    c.metadata["scan"] = scan;
    c.metadata["noise"] = {{"kind", ds.data.noise.kind},
                           {"alpha", ds.data.noise.alpha},
                           {"sigma", ds.data.noise.sigma},
                           {"seed", ds.data.noise.seed}};
    c.metadata["phantom"] = ds.truth.description;
    c.metadata["physical"] = physical_block(g.step_y, g.step_x);

    ArrayRecord frames;
    frames.name = "frames";
    frames.shape = {g.count(), static_cast<size_t>(g.probe_rows),
                    static_cast<size_t>(g.probe_cols)};
    frames.dtype = "float64";
    frames.role = "intensity";
    frames.data = ds.data.frames;
    c.arrays.push_back(std::move(frames));

    ArrayRecord obj;
    obj.name = "object_truth";
    obj.shape = {static_cast<size_t>(ds.truth.object.rows()),
                 static_cast<size_t>(ds.truth.object.cols())};
    obj.dtype = "complex128";
    obj.role = "object";
    obj.data.assign(ds.truth.object.raw().begin(), ds.truth.object.raw().end());
    c.arrays.push_back(std::move(obj));

    ArrayRecord probe;
    probe.name = "probe_truth";
    probe.shape = {static_cast<size_t>(ds.truth.probe.rows()),
                   static_cast<size_t>(ds.truth.probe.cols())};
    probe.dtype = "complex128";
    probe.role = "probe";
    probe.data.assign(ds.truth.probe.raw().begin(), ds.truth.probe.raw().end());
    c.arrays.push_back(std::move(probe));
    return c;
}

Dataset dataset_from_container(const Container& c) {
    if (c.kind != "dataset")
        throw std::runtime_error("container is not a dataset (kind '" + c.kind + "')");
    if (!c.metadata.contains("scan")) throw std::runtime_error("dataset manifest missing scan");
    const auto& scan = c.metadata.at("scan");

    Dataset ds;
    ScanGrid& g = ds.data.grid;
    g.object_rows = scan.at("object_shape").at(0).get<int>();
    g.object_cols = scan.at("object_shape").at(1).get<int>();
    g.probe_rows = scan.at("probe_shape").at(0).get<int>();
    g.probe_cols = scan.at("probe_shape").at(1).get<int>();
    g.step_y = scan.at("step_pixels").at(0).get<int>();
    g.step_x = scan.at("step_pixels").at(1).get<int>();
    for (const auto& p : scan.at("positions"))
        g.positions.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    g.validate();

    if (c.metadata.contains("noise")) {
        const auto& n = c.metadata.at("noise");
        ds.data.noise.kind = n.at("kind").get<std::string>();
        ds.data.noise.alpha = n.at("alpha").get<double>();
        ds.data.noise.sigma = n.at("sigma").get<double>();
        ds.data.noise.seed = n.at("seed").get<uint64_t>();
    }

    const ArrayRecord& frames = c.array("frames");
    const std::vector<size_t> want_frames = {g.count(), static_cast<size_t>(g.probe_rows),
                                             static_cast<size_t>(g.probe_cols)};
    if (frames.shape != want_frames || frames.dtype != "float64")
        throw std::runtime_error("array 'frames' does not match the scan geometry");
    ds.data.frames = frames.data;

    const ArrayRecord& obj = c.array("object_truth");
    if (obj.dtype != "complex128" ||
        obj.shape != std::vector<size_t>{static_cast<size_t>(g.object_rows),
                                         static_cast<size_t>(g.object_cols)})
        throw std::runtime_error("array 'object_truth' does not match the scan geometry");
    ds.truth.object = ComplexField(g.object_rows, g.object_cols);
    std::copy(obj.data.begin(), obj.data.end(), ds.truth.object.data());

    const ArrayRecord& probe = c.array("probe_truth");
    if (probe.dtype != "complex128" ||
        probe.shape != std::vector<size_t>{static_cast<size_t>(g.probe_rows),
                                           static_cast<size_t>(g.probe_cols)})
        throw std::runtime_error("array 'probe_truth' does not match the scan geometry");
    ds.truth.probe = ComplexField(g.probe_rows, g.probe_cols);
    std::copy(probe.data.begin(), probe.data.end(), ds.truth.probe.data());

    if (c.metadata.contains("phantom"))
        ds.truth.description = c.metadata.at("phantom").get<std::string>();
    ds.data.validate();
    return ds;
}

Container recon_to_container(const ReconResult& r, const nlohmann::json& config_snapshot,
                             const std::string& method) {
    Container c;
    c.format_version = kFormatVersion;
    c.kind = "reconstruction";
    c.provenance.config_hash = r.config_hash;
    c.provenance.seed = r.seed;
    c.provenance.version = r.version;
    c.config = config_snapshot;
    c.metadata["method"] = method;

    ArrayRecord obj;
    obj.name = "object";
    obj.shape = {static_cast<size_t>(r.object.rows()), static_cast<size_t>(r.object.cols())};
    obj.dtype = "complex128";
    obj.role = "object";
    obj.data.assign(r.object.raw().begin(), r.object.raw().end());
    c.arrays.push_back(std::move(obj));

    ArrayRecord probe;
    probe.name = "probe";
    probe.shape = {static_cast<size_t>(r.probe.rows()), static_cast<size_t>(r.probe.cols())};
    probe.dtype = "complex128";
    probe.role = "probe";
    probe.data.assign(r.probe.raw().begin(), r.probe.raw().end());
    c.arrays.push_back(std::move(probe));

    ArrayRecord hist;
    hist.name = "loss_history";
    hist.shape = {r.loss_history.size()};
    hist.dtype = "float64";
    hist.role = "loss";
    hist.data = r.loss_history;
    c.arrays.push_back(std::move(hist));
    return c;
}

ReconResult recon_from_container(const Container& c) {
    if (c.kind != "reconstruction")
        throw std::runtime_error("container is not a reconstruction (kind '" + c.kind + "')");
    ReconResult r;
    const ArrayRecord& obj = c.array("object");
    if (obj.dtype != "complex128" || obj.shape.size() != 2)
        throw std::runtime_error("array 'object' must be a 2-d complex field");
    r.object = ComplexField(static_cast<int>(obj.shape[0]), static_cast<int>(obj.shape[1]));
    std::copy(obj.data.begin(), obj.data.end(), r.object.data());

    const ArrayRecord& probe = c.array("probe");
    if (probe.dtype != "complex128" || probe.shape.size() != 2)
        throw std::runtime_error("array 'probe' must be a 2-d complex field");
    r.probe = ComplexField(static_cast<int>(probe.shape[0]), static_cast<int>(probe.shape[1]));
    std::copy(probe.data.begin(), probe.data.end(), r.probe.data());

    const ArrayRecord& hist = c.array("loss_history");
    if (hist.dtype != "float64" || hist.shape.size() != 1)
        throw std::runtime_error("array 'loss_history' must be a 1-d float64 array");
    r.loss_history = hist.data;

    r.config_hash = c.provenance.config_hash;
    r.seed = c.provenance.seed;
    r.version = c.provenance.version;
    return r;
}

}  // namespace ptyinr
