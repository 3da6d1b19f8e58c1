#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "ptyinr/networks.hpp"
#include "ptyinr/param_store.hpp"
#include "ptyinr/rng.hpp"
#include "ptyinr/tape.hpp"

using namespace ptyinr;

namespace {

bool bit_equal(double a, double b) {
    uint64_t ua, ub;
    std::memcpy(&ua, &a, sizeof(ua));
    std::memcpy(&ub, &b, sizeof(ub));
    return ua == ub;
}

}  // namespace

TEST_CASE("coordinate grid pins the boundary") {
    CoordGrid g = CoordGrid::make(4, 3);
    CHECK(g.npix() == 12);
    CHECK(g.yx[0] == 0.0);                       // (0,0) y
    CHECK(g.yx[1] == 0.0);                       // (0,0) x
    CHECK(g.yx[(3 * 3 + 2) * 2] == 1.0);         // (3,2) y
    CHECK(g.yx[(3 * 3 + 2) * 2 + 1] == 1.0);     // (3,2) x
    CHECK(g.yx[(0 * 3 + 1) * 2 + 1] == doctest::Approx(0.5));
    CoordGrid line = CoordGrid::make(1, 5);
    CHECK(line.yx[0] == 0.0);                    // single row collapses to y = 0
    CHECK_THROWS(CoordGrid::make(0, 3));
}

TEST_CASE("siren forward matches the layer formula") {
    SirenConfig cfg;
    cfg.in_dim = 2;
    cfg.hidden_layers = 1;
    cfg.hidden_width = 2;
    cfg.omega_first = 30.0;
    cfg.omega_hidden = 7.0;
    cfg.out_dim = 1;
    Siren net(cfg, "s");
    ParamStore store;
    net.register_params(store);
    store.finalize();

    // w0 [2x2] column j feeds unit j, b0 [2], w1 [2x1], b1 [1]
    auto w0 = store.values(store.segment_index("s.w0"));
    w0[0] = 0.3; w0[1] = -0.2; w0[2] = 0.1; w0[3] = 0.4;
    auto b0 = store.values(store.segment_index("s.b0"));
    b0[0] = 0.05; b0[1] = -0.6;
    auto w1 = store.values(store.segment_index("s.w1"));
    w1[0] = 1.5; w1[1] = -2.0;
    store.values(store.segment_index("s.b1"))[0] = 0.25;

    CoordGrid g = CoordGrid::make(1, 2);  // coords (0,0) and (0,1)
    std::vector<double> out = net.forward(store, g);
    REQUIRE(out.size() == 2);

    auto ref = [&](double y, double x) {
        const double h0 = std::sin(30.0 * (y * 0.3 + x * 0.1) + 0.05);
        const double h1 = std::sin(30.0 * (y * (-0.2) + x * 0.4) - 0.6);
        return 1.5 * h0 - 2.0 * h1 + 0.25;
    };
    CHECK(out[0] == doctest::Approx(ref(0.0, 0.0)).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(ref(0.0, 1.0)).epsilon(1e-15));
}

TEST_CASE("siren init bounds") {
    SirenConfig cfg;
    cfg.hidden_layers = 3;
    cfg.hidden_width = 64;
    cfg.omega_first = 30.0;
    cfg.omega_hidden = 30.0;
    Siren net(cfg, "s");
    ParamStore store;
    net.register_params(store);
    store.finalize();
    Rng rng(17);
    net.init(store, rng);

    auto w0 = store.values(store.segment_index("s.w0"));
    double max0 = 0.0;
    for (double x : w0) {
        CHECK(std::fabs(x) <= 0.5);
        max0 = std::max(max0, std::fabs(x));
    }
    CHECK(max0 > 0.1);

    const double hidden_bound = std::sqrt(6.0 / 64.0) / 30.0;
    for (const char* seg : {"s.w1", "s.w2", "s.w3"}) {
        auto w = store.values(store.segment_index(seg));
        double mx = 0.0;
        for (double x : w) {
            CHECK(std::fabs(x) <= hidden_bound);
            mx = std::max(mx, std::fabs(x));
        }
        CHECK(mx > 0.2 * hidden_bound);
    }
    for (const char* seg : {"s.b0", "s.b1", "s.b2", "s.b3"}) {
        for (double x : store.values(store.segment_index(seg))) CHECK(x == 0.0);
    }
}

TEST_CASE("siren eager and tape agree bitwise") {
    SirenConfig cfg;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 16;
    Siren net(cfg, "s");
    ParamStore store;
    net.register_params(store);
    store.finalize();
    Rng rng(5);
    net.init(store, rng);

    CoordGrid g = CoordGrid::make(7, 9);
    std::vector<double> eager = net.forward(store, g);

    Tape tape(store);
    int out = net.forward(tape, tape.constant(g.as_tensor()));
    const Tensor& tv = tape.value(out);
    REQUIRE(tv.count() == eager.size());
    for (size_t i = 0; i < eager.size(); ++i) CHECK(bit_equal(tv.data[i], eager[i]));
}

TEST_CASE("parameter counts are the registered totals") {
    SirenConfig scfg;
    scfg.hidden_layers = 3;
    scfg.hidden_width = 512;
    HashGridConfig hcfg;

    const size_t siren_expect = (2 * 512 + 512) + 2 * (512 * 512 + 512) + (512 + 1);
    CHECK(scfg.param_count() == siren_expect);
    CHECK(siren_expect == 527361);

    const size_t tables = 16 * 32768 * 2;
    const size_t mlp = (32 * 64 + 64) + (64 * 64 + 64) + (64 + 1);
    CHECK(hcfg.param_count() == tables + mlp);

    CHECK(count_params(scfg, hcfg) == 2 * siren_expect + 2 * (tables + mlp));
    CHECK(count_params(scfg, hcfg) == 3164548);

    ParamStore store;
    ObjectModel obj(scfg);
    ProbeModel probe(hcfg);
    obj.register_params(store);
    probe.register_params(store);
    store.finalize();
    CHECK(store.total() == count_params(scfg, hcfg));
    CHECK(obj.param_count() == 2 * siren_expect);
    CHECK(probe.param_count() == 2 * (tables + mlp));
}

TEST_CASE("hash grid resolution ladder") {
    HashGridConfig cfg;
    CHECK(cfg.level_resolution(0) == 16);
    CHECK(cfg.level_resolution(1) == 24);
    CHECK(cfg.level_resolution(2) == 36);
    CHECK(cfg.level_resolution(3) == 54);
    CHECK(cfg.level_resolution(15) == 7006);
    for (int l = 1; l < 16; ++l)
        CHECK(cfg.level_resolution(l) >= cfg.level_resolution(l - 1));
}

TEST_CASE("hash encoding interpolates bilinearly") {
    HashGridConfig cfg;
    cfg.levels = 2;
    cfg.features_per_entry = 1;
    cfg.table_size_log2 = 6;  // 64 entries; res 4 and 6 stay dense
    cfg.base_resolution = 4;
    cfg.growth_factor = 1.5;
    HashEncoder enc(cfg, "h");
    ParamStore store;
    enc.register_params(store);
    store.finalize();

    // Entry (iy, ix) of a dense level holds 2*iy + 5*ix; bilinear interpolation
    // reproduces the plane 2*y*res + 5*x*res exactly.
    for (int l = 0; l < 2; ++l) {
        const int res = cfg.level_resolution(l);
        auto t = store.values(store.segment_index("h.table" + std::to_string(l)));
        for (int iy = 0; iy <= res; ++iy)
            for (int ix = 0; ix <= res; ++ix)
                t[static_cast<size_t>(iy) * (res + 1) + ix] = 2.0 * iy + 5.0 * ix;
    }

    CoordGrid g = CoordGrid::make(5, 4);
    auto e = enc.prepare(g);
    std::vector<double> feats = enc.encode(store, e);
    REQUIRE(feats.size() == g.npix() * 2);
    for (size_t p = 0; p < g.npix(); ++p) {
        const double y = g.yx[p * 2];
        const double x = g.yx[p * 2 + 1];
        for (int l = 0; l < 2; ++l) {
            const int res = cfg.level_resolution(l);
            const double expect = 2.0 * y * res + 5.0 * x * res;
            CHECK(feats[p * 2 + l] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("hash encoding eager and tape agree bitwise") {
    HashGridConfig cfg;
    cfg.levels = 4;
    cfg.table_size_log2 = 8;
    cfg.base_resolution = 4;
    HashEncoder enc(cfg, "h");
    ParamStore store;
    enc.register_params(store);
    store.finalize();
    Rng rng(23);
    enc.init(store, rng);

    CoordGrid g = CoordGrid::make(6, 6);
    auto plan = enc.prepare(g);
    std::vector<double> eager = enc.encode(store, plan);
    Tape tape(store);
    const Tensor& tv = tape.value(enc.encode(tape, plan));
    REQUIRE(tv.count() == eager.size());
    for (size_t i = 0; i < eager.size(); ++i) CHECK(bit_equal(tv.data[i], eager[i]));
}

TEST_CASE("large levels hash into the table") {
    HashGridConfig cfg;
    cfg.levels = 8;
    cfg.table_size_log2 = 6;
    cfg.base_resolution = 16;  // (17)^2 > 64 so every level hashes
    HashEncoder enc(cfg, "h");
    CoordGrid g = CoordGrid::make(9, 9);
    auto e = enc.prepare(g);
    for (int l = 0; l < cfg.levels; ++l) {
        for (int32_t idx : e.indices[static_cast<size_t>(l)]) {
            CHECK(idx >= 0);
            CHECK(idx < 64);
        }
    }
    auto e2 = enc.prepare(g);
    for (int l = 0; l < cfg.levels; ++l)
        CHECK(e.indices[static_cast<size_t>(l)] == e2.indices[static_cast<size_t>(l)]);
}

TEST_CASE("hash encoder rejects coordinates outside the unit square") {
    HashGridConfig cfg;
    HashEncoder enc(cfg, "h");
    CoordGrid g = CoordGrid::make(2, 2);
    g.yx[0] = -0.01;
    CHECK_THROWS(enc.prepare(g));
}

TEST_CASE("relu mlp eager and tape agree bitwise") {
    ReluMlp mlp(6, 2, 8, 1, "m");
    ParamStore store;
    mlp.register_params(store);
    store.finalize();
    Rng rng(3);
    mlp.init(store, rng);

    const int npix = 10;
    std::vector<double> feats(static_cast<size_t>(npix) * 6);
    for (auto& f : feats) f = rng.uniform(-1.0, 1.0);
    std::vector<double> eager = mlp.forward(store, feats, npix);

    Tensor ft = Tensor::real(npix, 6);
    ft.data = feats;
    Tape tape(store);
    const Tensor& tv = tape.value(mlp.forward(tape, tape.constant(std::move(ft))));
    REQUIRE(tv.count() == eager.size());
    for (size_t i = 0; i < eager.size(); ++i) CHECK(bit_equal(tv.data[i], eager[i]));
}

TEST_CASE("object model amplitude is strictly inside (0,1)") {
    SirenConfig cfg;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 32;
    ObjectModel obj(cfg);
    ParamStore store;
    obj.register_params(store);
    store.finalize();
    Rng rng(9);
    obj.init(store, rng);

    CoordGrid g = CoordGrid::make(12, 12);
    ComplexField f = obj.predict(store, g);
    CHECK(f.rows() == 12);
    for (size_t i = 0; i < f.size(); ++i) {
        const double a = std::abs(f.c(i));
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
}

TEST_CASE("object model eager and tape agree bitwise") {
    SirenConfig cfg;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 24;
    ObjectModel obj(cfg);
    ParamStore store;
    obj.register_params(store);
    store.finalize();
    Rng rng(19);
    obj.init(store, rng);

    CoordGrid g = CoordGrid::make(8, 8);
    ComplexField eager = obj.predict(store, g);
    Tape tape(store);
    const Tensor& tv = tape.value(obj.predict(tape, g));
    CHECK(tv.is_complex);
    REQUIRE(tv.buffer_size() == eager.raw().size());
    for (size_t i = 0; i < eager.raw().size(); ++i)
        CHECK(bit_equal(tv.data[i], eager.raw()[i]));
}

TEST_CASE("probe model amplitude normalizes to exactly one") {
    HashGridConfig cfg;
    cfg.levels = 4;
    cfg.table_size_log2 = 8;
    ProbeModel probe(cfg);
    ParamStore store;
    probe.register_params(store);
    store.finalize();
    Rng rng(29);
    probe.init(store, rng);

    auto plan = probe.plan(10, 10);
    std::vector<double> norm_amp;
    ComplexField f = probe.predict(store, plan, &norm_amp);
    REQUIRE(norm_amp.size() == 100);
    double mx = 0.0;
    for (double a : norm_amp) mx = std::max(mx, a);
    CHECK(mx == 1.0);
    CHECK(f.max_abs() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("probe model eager and tape agree bitwise") {
    HashGridConfig cfg;
    cfg.levels = 4;
    cfg.table_size_log2 = 8;
    ProbeModel probe(cfg);
    ParamStore store;
    probe.register_params(store);
    store.finalize();
    Rng rng(31);
    probe.init(store, rng);

    auto plan = probe.plan(6, 7);
    std::vector<double> norm_amp;
    ComplexField eager = probe.predict(store, plan, &norm_amp);

    Tape tape(store);
    ProbeModel::TapeOut out = probe.predict(tape, plan);
    const Tensor& pv = tape.value(out.probe);
    REQUIRE(pv.buffer_size() == eager.raw().size());
    for (size_t i = 0; i < eager.raw().size(); ++i)
        CHECK(bit_equal(pv.data[i], eager.raw()[i]));
    const Tensor& av = tape.value(out.norm_amp);
    REQUIRE(av.count() == norm_amp.size());
    for (size_t i = 0; i < norm_amp.size(); ++i) CHECK(bit_equal(av.data[i], norm_amp[i]));
}

TEST_CASE("degenerate probe throws") {
    HashGridConfig cfg;
    cfg.levels = 2;
    cfg.table_size_log2 = 6;
    ProbeModel probe(cfg);
    ParamStore store;
    probe.register_params(store);
    store.finalize();
    // all-zero parameters leave the raw amplitude identically zero
    auto plan = probe.plan(4, 4);
    CHECK_THROWS_WITH(probe.predict(store, plan), "degenerate probe");
    Tape tape(store);
    CHECK_THROWS_WITH(probe.predict(tape, plan), "degenerate probe");
}

TEST_CASE("config validation") {
    SirenConfig s;
    s.hidden_layers = 0;
    CHECK_THROWS(s.validate());
    SirenConfig s2;
    s2.omega_first = 0.0;
    CHECK_THROWS(s2.validate());

    HashGridConfig h;
    h.growth_factor = 1.0;
    CHECK_THROWS(h.validate());
    HashGridConfig h2;
    h2.table_size_log2 = 30;
    CHECK_THROWS(h2.validate());
}
