#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ptyinr/fft.hpp"
#include "ptyinr/field.hpp"
#include "ptyinr/gradcheck.hpp"
#include "ptyinr/param_store.hpp"
#include "ptyinr/rng.hpp"
#include "ptyinr/tape.hpp"

using namespace ptyinr;
using std::complex;

namespace {

ComplexField random_field(int rows, int cols, Rng& rng) {
    ComplexField f(rows, cols);
    for (size_t i = 0; i < f.size(); ++i)
        f.c(i) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    return f;
}

complex<double> dot(const ComplexField& a, const ComplexField& b) {
    complex<double> s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a.c(i)) * b.c(i);
    return s;
}

/// Brute-force centered orthonormal DFT, the O(N^4) reference.
ComplexField dft_centered_reference(const ComplexField& f) {
    const int R = f.rows(), C = f.cols();
    const int r0 = R / 2, c0 = C / 2;
    ComplexField out(R, C);
    const double norm = 1.0 / std::sqrt(static_cast<double>(R) * C);
    for (int u = 0; u < R; ++u) {
        for (int v = 0; v < C; ++v) {
            complex<double> s = 0.0;
            for (int y = 0; y < R; ++y) {
                for (int x = 0; x < C; ++x) {
                    const double ph = -2.0 * std::numbers::pi *
                                      (static_cast<double>(u - r0) * (y - r0) / R +
                                       static_cast<double>(v - c0) * (x - c0) / C);
                    s += f.at(y, x) * std::polar(1.0, ph);
                }
            }
            out.at(u, v) = s * norm;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("field basics") {
    ComplexField f(3, 4);
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 4);
    CHECK(f.size() == 12);
    CHECK(f.energy() == 0.0);
    f.at(1, 2) = {3.0, -4.0};
    CHECK(f.c(1 * 4 + 2) == complex<double>(3.0, -4.0));
    CHECK(f.energy() == doctest::Approx(25.0));
    CHECK(f.max_abs() == doctest::Approx(5.0));
    CHECK(f.amplitude()[6] == doctest::Approx(5.0));
    CHECK(f.phase()[6] == doctest::Approx(std::atan2(-4.0, 3.0)));
    CHECK(f.finite());
    f.at(0, 0) = {std::nan(""), 0.0};
    CHECK_FALSE(f.finite());
    CHECK_THROWS(ComplexField(0, 5));
}

TEST_CASE("field raw layout is interleaved") {
    ComplexField f(1, 2);
    f.at(0, 0) = {1.0, 2.0};
    f.at(0, 1) = {3.0, 4.0};
    auto raw = f.raw();
    REQUIRE(raw.size() == 4);
    CHECK(raw[0] == 1.0);
    CHECK(raw[1] == 2.0);
    CHECK(raw[2] == 3.0);
    CHECK(raw[3] == 4.0);
}

TEST_CASE("fftshift round trip, odd and even") {
    Rng rng(7);
    for (auto [r, c] : {std::pair{4, 6}, {5, 7}, {1, 1}, {8, 8}}) {
        ComplexField f = random_field(r, c, rng);
        ComplexField g = ifftshift(fftshift(f));
        for (size_t i = 0; i < f.size(); ++i) CHECK(g.c(i) == f.c(i));
    }
    ComplexField imp(4, 4);
    imp.at(0, 0) = 1.0;
    CHECK(fftshift(imp).at(2, 2) == complex<double>(1.0, 0.0));
}

TEST_CASE("crop and add_patch") {
    Rng rng(3);
    ComplexField f = random_field(6, 6, rng);
    ComplexField p = crop(f, 1, 2, 3, 2);
    CHECK(p.rows() == 3);
    CHECK(p.cols() == 2);
    CHECK(p.at(0, 0) == f.at(1, 2));
    CHECK(p.at(2, 1) == f.at(3, 3));
    CHECK_THROWS(crop(f, 4, 4, 3, 3));
    ComplexField g(6, 6);
    add_patch(g, p, 1, 2);
    CHECK(g.at(2, 3) == p.at(1, 1));
    CHECK(g.at(0, 0) == complex<double>(0.0, 0.0));
}

TEST_CASE("from_parts") {
    std::vector<double> amp = {2.0, 0.5};
    std::vector<double> ph = {0.0, std::numbers::pi / 2};
    ComplexField f = from_parts(1, 2, amp, ph);
    CHECK(f.at(0, 0).real() == doctest::Approx(2.0));
    CHECK(f.at(0, 1).imag() == doctest::Approx(0.5));
    CHECK_THROWS(from_parts(2, 2, amp, ph));
}

TEST_CASE("centered fft of centered impulse is flat") {
    ComplexField f(8, 8);
    f.at(4, 4) = 1.0;
    ComplexField F = cfft2_centered(f);
    for (size_t i = 0; i < F.size(); ++i) {
        CHECK(F.c(i).real() == doctest::Approx(0.125).epsilon(1e-12));
        CHECK(std::fabs(F.c(i).imag()) < 1e-12);
    }
}

TEST_CASE("fft matches brute-force centered DFT") {
    Rng rng(11);
    for (auto [r, c] : {std::pair{8, 8}, {7, 5}, {6, 9}}) {
        ComplexField f = random_field(r, c, rng);
        ComplexField fast = cfft2_centered(f);
        ComplexField slow = dft_centered_reference(f);
        for (size_t i = 0; i < f.size(); ++i)
            CHECK(std::abs(fast.c(i) - slow.c(i)) < 1e-10);
    }
}

TEST_CASE("fft is unitary") {
    Rng rng(13);
    ComplexField x = random_field(16, 16, rng);
    ComplexField y = random_field(16, 16, rng);

    ComplexField Fx = cfft2_centered(x);
    ComplexField Fy = cfft2_centered(y);
    CHECK(Fx.energy() == doctest::Approx(x.energy()).epsilon(1e-12));
    CHECK(std::abs(dot(Fx, Fy) - dot(x, y)) < 1e-10);

    ComplexField back = cifft2_centered(Fx);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.c(i) - x.c(i)) < 1e-12);
}

TEST_CASE("fft rejects non-finite input") {
    ComplexField f(4, 4);
    f.at(1, 1) = {1.0, std::nan("")};
    CHECK_THROWS(cfft2_centered(f));
}

TEST_CASE("rng determinism and streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c = Rng(42).stream("init");
    Rng d = Rng(42).stream("noise");
    CHECK(c.next_u64() != d.next_u64());
    CHECK(Rng(42).stream("init").next_u64() != Rng(43).stream("init").next_u64());

    Rng e(42);
    std::vector<uint64_t> first;
    for (int i = 0; i < 5; ++i) first.push_back(e.next_u64());
    Rng resumed(42, e.counter());
    Rng fresh(42);
    for (int i = 0; i < 5; ++i) fresh.next_u64();
    for (int i = 0; i < 5; ++i) CHECK(resumed.next_u64() == fresh.next_u64());

    CHECK(Rng(9).substream(0).next_u64() != Rng(9).substream(1).next_u64());
}

TEST_CASE("rng uniform distribution") {
    Rng rng(123);
    const size_t n = 100000;
    std::vector<double> xs(n);
    double mean = 0.0;
    for (auto& x : xs) {
        x = rng.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        mean += x;
    }
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));

    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double emp_hi = static_cast<double>(i + 1) / n;
        const double emp_lo = static_cast<double>(i) / n;
        ks = std::max({ks, std::fabs(emp_hi - xs[i]), std::fabs(xs[i] - emp_lo)});
    }
    CHECK(ks < 0.01);

    Rng r2(5);
    for (int i = 0; i < 1000; ++i) {
        double u = r2.uniform(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("rng normal moments") {
    Rng rng(321);
    const size_t n = 100000;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        m1 += x;
        m2 += x * x;
        m3 += x * x * x;
        m4 += x * x * x * x;
    }
    m1 /= n; m2 /= n; m3 /= n; m4 /= n;
    CHECK(std::fabs(m1) < 0.02);
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.03));
    CHECK(std::fabs(m3) < 0.05);
    CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("rng poisson") {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) CHECK(rng.poisson(0.0) == 0);

    const double lam = 3.7;
    const size_t n = 20000;
    double mean = 0.0, m2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double k = static_cast<double>(rng.poisson(lam));
        mean += k;
        m2 += k * k;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    CHECK(mean == doctest::Approx(lam).epsilon(0.03));
    CHECK(var == doctest::Approx(lam).epsilon(0.08));

    const double big = 5000.0;
    const size_t nb = 10000;
    double bmean = 0.0, bm2 = 0.0;
    for (size_t i = 0; i < nb; ++i) {
        const double k = static_cast<double>(rng.poisson(big));
        bmean += k;
        bm2 += k * k;
    }
    bmean /= nb;
    const double bvar = bm2 / nb - bmean * bmean;
    CHECK(bmean == doctest::Approx(big).epsilon(0.01));
    CHECK(bvar == doctest::Approx(big).epsilon(0.1));
}

TEST_CASE("rng below") {
    Rng rng(55);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const uint64_t k = rng.below(7);
        REQUIRE(k < 7);
        ++hist[static_cast<size_t>(k)];
    }
    for (int h : hist) CHECK(std::abs(h - 10000) < 500);
    for (int i = 0; i < 100; ++i) CHECK(rng.below(1) == 0);
}

TEST_CASE("fnv1a64 known answers") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("tensor field round trip") {
    Rng rng(2);
    ComplexField f = random_field(3, 5, rng);
    Tensor t = Tensor::from_field(f);
    CHECK(t.is_complex);
    CHECK(t.rows == 3);
    CHECK(t.cols == 5);
    ComplexField g = t.to_field();
    for (size_t i = 0; i < f.size(); ++i) CHECK(g.c(i) == f.c(i));
}

TEST_CASE("tape sin_scaled hand gradient") {
    ParamStore store;
    store.add("w", 1);
    store.finalize();
    store.values()[0] = 0.01;

    Tape tape(store);
    int w = tape.param("w", 1, 1);
    int x = tape.constant_scalar(3.0);
    int wx = tape.mul(w, x);
    int y = tape.sin_scaled(wx, 30.0);
    int out = tape.sum(y);
    CHECK(tape.scalar_value(out) == doctest::Approx(std::sin(0.9)).epsilon(1e-15));
    tape.backward(out);
    CHECK(store.grads()[0] ==
          doctest::Approx(30.0 * 3.0 * std::cos(0.9)).epsilon(1e-12));
}

TEST_CASE("tape linear gradient is the coefficient") {
    ParamStore store;
    store.add("w", 1);
    store.finalize();
    store.values()[0] = 1.25;
    Tape tape(store);
    int w = tape.param("w", 1, 1);
    int x = tape.constant_scalar(3.0);
    int out = tape.sum(tape.mul(w, x));
    tape.backward(out);
    CHECK(store.grads()[0] == 3.0);
}

TEST_CASE("tape quadratic norm gradient is 2p") {
    ParamStore store;
    store.add("p", 3);
    store.finalize();
    auto v = store.values();
    v[0] = 1.5; v[1] = -2.25; v[2] = 0.5;
    Tape tape(store);
    int p = tape.param("p", 1, 3);
    int out = tape.sum(tape.mul(p, p));
    CHECK(tape.scalar_value(out) == doctest::Approx(1.5 * 1.5 + 2.25 * 2.25 + 0.25));
    tape.backward(out);
    CHECK(store.grads()[0] == 3.0);
    CHECK(store.grads()[1] == -4.5);
    CHECK(store.grads()[2] == 1.0);
}

TEST_CASE("tape matmul and row broadcast gradients") {
    ParamStore store;
    store.add("A", 6);
    store.add("b", 3);
    store.finalize();
    auto v = store.values();
    for (int i = 0; i < 6; ++i) v[i] = 0.1 * (i + 1);
    v[6] = 1.0; v[7] = -1.0; v[8] = 0.5;

    Tape tape(store);
    int A = tape.param("A", 2, 3);
    Tensor xt = Tensor::real(3, 3);
    for (int i = 0; i < 9; ++i) xt.data[static_cast<size_t>(i)] = (i % 4 == 0) ? 2.0 : 0.0;
    int x = tape.constant(std::move(xt));  // 2 * identity
    int Ax = tape.matmul(A, x);            // [2x3]
    int b = tape.param("b", 1, 3);
    int y = tape.add_rowvec(Ax, b);
    int out = tape.sum(y);
    CHECK(tape.scalar_value(out) ==
          doctest::Approx(2.0 * (0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.6) + 2.0 * 0.5));
    tape.backward(out);
    for (int i = 0; i < 6; ++i) CHECK(store.grads()[static_cast<size_t>(i)] == 2.0);
    CHECK(store.grads()[6] == 2.0);  // row bias sums over the two rows
    CHECK(store.grads()[7] == 2.0);
    CHECK(store.grads()[8] == 2.0);
}

TEST_CASE("tape mean and crop gradients") {
    ParamStore store;
    store.add("p", 4);
    store.finalize();
    auto v = store.values();
    for (int i = 0; i < 4; ++i) v[static_cast<size_t>(i)] = i + 1.0;
    Tape tape(store);
    int p = tape.param("p", 2, 2);
    int c = tape.crop(p, 0, 1, 2, 1);  // column 1
    int out = tape.mean(c);
    CHECK(tape.scalar_value(out) == doctest::Approx(3.0));
    tape.backward(out);
    CHECK(store.grads()[0] == 0.0);
    CHECK(store.grads()[1] == 0.5);
    CHECK(store.grads()[2] == 0.0);
    CHECK(store.grads()[3] == 0.5);
}

TEST_CASE("tape smooth_l1 values and slopes") {
    const double beta = 0.1;
    ParamStore store;
    store.add("r", 2);
    store.finalize();
    store.values()[0] = beta / 2.0;
    store.values()[1] = -1.5 * beta;
    Tape tape(store);
    int r = tape.param("r", 1, 2);
    int s = tape.smooth_l1(r, beta);
    const Tensor& val = tape.value(s);
    CHECK(val.data[0] == doctest::Approx(beta / 8.0).epsilon(1e-15));
    CHECK(val.data[1] == doctest::Approx(beta).epsilon(1e-15));
    int out = tape.sum(s);
    tape.backward(out);
    CHECK(store.grads()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(store.grads()[1] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("tape polar and abs_sq") {
    ParamStore store;
    store.add("amp", 2);
    store.add("ph", 2);
    store.finalize();
    auto v = store.values();
    v[0] = 0.8; v[1] = 1.3; v[2] = 0.4; v[3] = -2.0;

    Tape tape(store);
    int a = tape.param("amp", 1, 2);
    int p = tape.param("ph", 1, 2);
    int z = tape.polar(a, p);
    const Tensor& zv = tape.value(z);
    CHECK(zv.is_complex);
    CHECK(zv.data[0] == doctest::Approx(0.8 * std::cos(0.4)));
    CHECK(zv.data[1] == doctest::Approx(0.8 * std::sin(0.4)));
    int m = tape.abs_sq(z);
    int out = tape.sum(m);
    CHECK(tape.scalar_value(out) == doctest::Approx(0.64 + 1.69).epsilon(1e-14));
    tape.backward(out);
    CHECK(store.grads()[0] == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(store.grads()[1] == doctest::Approx(2.6).epsilon(1e-12));
    CHECK(std::fabs(store.grads()[2]) < 1e-12);  // |z|^2 ignores phase
    CHECK(std::fabs(store.grads()[3]) < 1e-12);
}

TEST_CASE("tape fft gradient via Parseval") {
    ParamStore store;
    store.add("amp", 16);
    store.finalize();
    Rng rng(8);
    for (auto& x : store.values()) x = rng.uniform(0.2, 1.0);

    Tape tape(store);
    int a = tape.param("amp", 4, 4);
    int zero = tape.constant(Tensor::real(4, 4));
    int z = tape.polar(a, zero);
    int F = tape.fft(z);
    int out = tape.sum(tape.abs_sq(F));
    double energy = 0.0;
    for (double x : store.values()) energy += x * x;
    CHECK(tape.scalar_value(out) == doctest::Approx(energy).epsilon(1e-12));
    tape.backward(out);
    for (size_t i = 0; i < 16; ++i)
        CHECK(store.grads()[i] == doctest::Approx(2.0 * store.values()[i]).epsilon(1e-12));
}

TEST_CASE("tape gather with duplicate corners") {
    ParamStore store;
    store.add("table", 4);
    store.finalize();
    auto v = store.values();
    v[0] = 10.0; v[1] = 20.0; v[2] = 30.0; v[3] = 40.0;

    Tape tape(store);
    int table = tape.param("table", 4, 1);
    std::vector<int32_t> idx = {0, 1, 2, 3, 0, 0, 1, 1};
    std::vector<double> w = {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25};
    int g = tape.gather(table, idx, w, 2, 1);
    const Tensor& gv = tape.value(g);
    CHECK(gv.data[0] == doctest::Approx(30.0));
    CHECK(gv.data[1] == doctest::Approx(15.0));
    int out = tape.sum(g);
    tape.backward(out);
    CHECK(store.grads()[0] == doctest::Approx(0.6));
    CHECK(store.grads()[1] == doctest::Approx(0.7));
    CHECK(store.grads()[2] == doctest::Approx(0.3));
    CHECK(store.grads()[3] == doctest::Approx(0.4));
}

TEST_CASE("tape max routes to first argmax") {
    ParamStore store;
    store.add("p", 4);
    store.finalize();
    auto v = store.values();
    v[0] = 1.0; v[1] = 7.0; v[2] = 7.0; v[3] = 2.0;
    Tape tape(store);
    int p = tape.param("p", 1, 4);
    int out = tape.max(p);
    CHECK(tape.scalar_value(out) == 7.0);
    tape.backward(out);
    CHECK(store.grads()[0] == 0.0);
    CHECK(store.grads()[1] == 1.0);
    CHECK(store.grads()[2] == 0.0);
    CHECK(store.grads()[3] == 0.0);
}

TEST_CASE("tape div_scalar gradients") {
    ParamStore store;
    store.add("a", 2);
    store.add("s", 1);
    store.finalize();
    auto v = store.values();
    v[0] = 3.0; v[1] = -1.0; v[2] = 2.0;
    Tape tape(store);
    int a = tape.param("a", 1, 2);
    int s = tape.param("s", 1, 1);
    int q = tape.div_scalar(a, s);
    int out = tape.sum(q);
    CHECK(tape.scalar_value(out) == doctest::Approx(1.0));
    tape.backward(out);
    CHECK(store.grads()[0] == doctest::Approx(0.5));
    CHECK(store.grads()[1] == doctest::Approx(0.5));
    CHECK(store.grads()[2] == doctest::Approx(-2.0 / 4.0));
}

TEST_CASE("tape backward twice throws, non-scalar output throws") {
    ParamStore store;
    store.add("p", 2);
    store.finalize();
    store.values()[0] = 1.0;
    store.values()[1] = 2.0;
    Tape tape(store);
    int p = tape.param("p", 1, 2);
    int out = tape.sum(p);
    tape.backward(out);
    CHECK(tape.backward_done());
    CHECK_THROWS(tape.backward(out));

    Tape t2(store);
    int q = t2.param("p", 1, 2);
    CHECK_THROWS(t2.backward(q));
}

TEST_CASE("tape cotangent backward matches weighted sum") {
    ParamStore store;
    store.add("p", 3);
    store.finalize();
    auto v = store.values();
    v[0] = 0.3; v[1] = -0.6; v[2] = 1.1;

    Tensor w = Tensor::real(1, 3);
    w.data = {2.0, -1.0, 0.5};

    Tape t1(store);
    int y1 = t1.logistic(t1.param("p", 1, 3));
    t1.backward(y1, w);
    std::vector<double> g1(store.grads().begin(), store.grads().end());

    store.zero_grads();
    Tape t2(store);
    int y2 = t2.logistic(t2.param("p", 1, 3));
    int out = t2.sum(t2.mul(y2, t2.constant(w)));
    t2.backward(out);
    for (int i = 0; i < 3; ++i)
        CHECK(g1[static_cast<size_t>(i)] ==
              doctest::Approx(store.grads()[static_cast<size_t>(i)]).epsilon(1e-14));
}

TEST_CASE("tape composite graphs agree with finite differences") {
    for (uint64_t trial = 0; trial < 50; ++trial) {
        ParamStore store;
        store.add("a", 6);
        store.add("b", 4);
        store.finalize();
        Rng rng(1000 + trial);
        for (auto& x : store.values()) x = rng.uniform(-0.8, 0.8);
        const double omega = rng.uniform(0.5, 4.0);
        const double beta = rng.uniform(0.05, 0.5);
        const int pick = static_cast<int>(rng.below(4));

        auto build = [&](ParamStore& s, bool with_grad) {
            Tape tape(s);
            int a = tape.param("a", 2, 3);
            int b = tape.param("b", 2, 2);
            Tensor mt = Tensor::real(3, 2);
            for (size_t i = 0; i < 6; ++i) mt.data[i] = 0.3 * static_cast<double>(i) - 0.7;
            int m = tape.matmul(a, tape.constant(std::move(mt)));  // [2x2]
            int h = tape.sin_scaled(m, omega);
            int mix = tape.add(tape.mul(h, b), tape.scale(b, 0.25));
            int branch;
            switch (pick) {
                case 0: branch = tape.logistic(mix); break;
                case 1: branch = tape.exp(tape.scale(mix, 0.5)); break;
                case 2: {
                    int z = tape.abs_sq(tape.polar(tape.logistic(mix), mix));
                    branch = tape.sqrt(tape.add(z, tape.scale(tape.logistic(b), 0.01)));
                    break;
                }
                default: branch = tape.smooth_l1(mix, beta); break;
            }
            int out = tape.mean(branch);
            const double value = tape.scalar_value(out);
            if (with_grad) tape.backward(out);
            return value;
        };
        LossFn loss = [&](ParamStore& s, bool with_grad) {
            if (with_grad) s.zero_grads();
            return build(s, with_grad);
        };
        GradCheckReport rep = finite_diff_check(loss, store, 10, 1e-6, trial);
        CHECK(rep.max_rel_err < 1e-5);
    }
}

TEST_CASE("tape complex chain matches finite differences") {
    ParamStore store;
    store.add("amp", 8);
    store.add("ph", 8);
    store.finalize();
    Rng rng(31);
    auto v = store.values();
    for (size_t i = 0; i < 8; ++i) v[i] = rng.uniform(0.3, 1.0);
    for (size_t i = 8; i < 16; ++i) v[i] = rng.uniform(-1.2, 1.2);

    ComplexField ref(2, 4);
    for (size_t i = 0; i < 8; ++i) ref.c(i) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    LossFn loss = [&](ParamStore& s, bool with_grad) {
        if (with_grad) s.zero_grads();
        Tape tape(s);
        int a = tape.param("amp", 2, 4);
        int p = tape.param("ph", 2, 4);
        int z = tape.polar(a, p);
        int zc = tape.cmul(z, tape.constant(ref));
        int F = tape.fft(zc);
        int i2 = tape.abs_sq(F);
        int sq = tape.sqrt(i2);
        int out = tape.mean(tape.smooth_l1(sq, 0.2));
        const double value = tape.scalar_value(out);
        if (with_grad) tape.backward(out);
        return value;
    };
    GradCheckReport rep = finite_diff_check(loss, store, 16, 1e-6, 9);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("param store layout and errors") {
    ParamStore store;
    size_t i0 = store.add("x", 3);
    size_t i1 = store.add("y", 2);
    CHECK_THROWS(store.values(i0));
    store.finalize();
    CHECK(store.total() == 5);
    CHECK(store.segment(i0).offset == 0);
    CHECK(store.segment(i1).offset == 3);
    CHECK(store.segment_index("y") == i1);
    CHECK_THROWS(store.segment("zz"));
    CHECK_THROWS(store.add("late", 1));
    CHECK(store.segment_name_of(4) == "y");
    CHECK(store.segment_name_of(2) == "x");
    store.grads()[1] = 5.0;
    store.zero_grads();
    CHECK(store.grads()[1] == 0.0);
}

TEST_CASE("gradcheck accepts a correct gradient") {
    ParamStore store;
    store.add("p", 10);
    store.finalize();
    Rng rng(4);
    for (auto& x : store.values()) x = rng.uniform(-2.0, 2.0);
    LossFn loss = [](ParamStore& s, bool with_grad) {
        double v = 0.0;
        for (size_t i = 0; i < s.total(); ++i) v += 0.5 * s.values()[i] * s.values()[i];
        if (with_grad) {
            for (size_t i = 0; i < s.total(); ++i) s.grads()[i] = s.values()[i];
        }
        return v;
    };
    GradCheckReport rep = finite_diff_check(loss, store, 10, 1e-5, 0);
    CHECK(rep.checked == 10);
    CHECK(rep.max_rel_err < 1e-8);
    CHECK(rep.passes(1e-4));
}

TEST_CASE("gradcheck flags a planted gradient bug") {
    ParamStore store;
    store.add("p", 6);
    store.finalize();
    for (size_t i = 0; i < 6; ++i) store.values()[i] = 1.0 + static_cast<double>(i);
    LossFn loss = [](ParamStore& s, bool with_grad) {
        double v = 0.0;
        for (size_t i = 0; i < s.total(); ++i) v += 0.5 * s.values()[i] * s.values()[i];
        if (with_grad) {
            for (size_t i = 0; i < s.total(); ++i) s.grads()[i] = s.values()[i];
            s.grads()[3] *= 1.05;  // the bug
        }
        return v;
    };
    GradCheckReport rep = finite_diff_check(loss, store, 6, 1e-5, 0);
    CHECK_FALSE(rep.passes(1e-4));
    CHECK(rep.worst.index == 3);
    CHECK(rep.worst.rel_err == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("gradcheck rejects a nondeterministic loss") {
    ParamStore store;
    store.add("p", 2);
    store.finalize();
    int calls = 0;
    LossFn loss = [&calls](ParamStore& s, bool) {
        ++calls;
        return s.values()[0] + 1e-9 * calls;
    };
    CHECK_THROWS_WITH_AS(finite_diff_check(loss, store, 2, 1e-5, 0),
                         doctest::Contains("not deterministic"), std::runtime_error);
}

TEST_CASE("gradcheck marks kinks instead of failing on them") {
    ParamStore store;
    store.add("p", 2);
    store.finalize();
    store.values()[0] = 1e-7;  // |x| kink inside the stencil
    store.values()[1] = 0.5;
    LossFn loss = [](ParamStore& s, bool with_grad) {
        double v = std::fabs(s.values()[0]) + std::fabs(s.values()[1]);
        if (with_grad) {
            s.grads()[0] = s.values()[0] >= 0 ? 1.0 : -1.0;
            s.grads()[1] = s.values()[1] >= 0 ? 1.0 : -1.0;
        }
        return v;
    };
    GradCheckReport rep = finite_diff_check(loss, store, 2, 1e-5, 0);
    CHECK(rep.kinks_flagged == 1);
    CHECK(rep.checked == 1);
    CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("gradcheck argument validation") {
    ParamStore empty;
    empty.finalize();
    LossFn loss = [](ParamStore&, bool) { return 0.0; };
    CHECK_THROWS(finite_diff_check(loss, empty, 1, 1e-5, 0));

    ParamStore store;
    store.add("p", 1);
    store.finalize();
    CHECK_THROWS(finite_diff_check(loss, store, 1, 0.0, 0));
}
