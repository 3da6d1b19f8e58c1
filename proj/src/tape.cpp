#include "ptyinr/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "kernels.hpp"
#include "ptyinr/fft.hpp"

namespace ptyinr {

namespace {
constexpr double kSqrtGuard = 1e-12;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

Tensor Tensor::real(int rows, int cols) {
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.is_complex = false;
    t.data.assign(static_cast<size_t>(rows) * cols, 0.0);
    return t;
}

Tensor Tensor::complex(int rows, int cols) {
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.is_complex = true;
    t.data.assign(static_cast<size_t>(rows) * cols * 2, 0.0);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t = real(1, 1);
    t.data[0] = v;
    return t;
}

Tensor Tensor::from_field(const ComplexField& f) {
    Tensor t;
    t.rows = f.rows();
    t.cols = f.cols();
    t.is_complex = true;
    t.data.assign(f.raw().begin(), f.raw().end());
    return t;
}

ComplexField Tensor::to_field() const {
    if (!is_complex) fail("to_field on real tensor");
    ComplexField f(rows, cols);
    std::copy(data.begin(), data.end(), f.data());
    return f;
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Const: return "const";
        case Op::Param: return "param";
        case Op::Add: return "add";
        case Op::AddN: return "add_n";
        case Op::Sub: return "sub";
        case Op::Scale: return "scale";
        case Op::Mul: return "mul";
        case Op::CMul: return "cmul";
        case Op::MatMul: return "matmul";
        case Op::AddRowVec: return "add_rowvec";
        case Op::SinScaled: return "sin_scaled";
        case Op::Relu: return "relu";
        case Op::Exp: return "exp";
        case Op::Logistic: return "logistic";
        case Op::Sqrt: return "sqrt";
        case Op::Abs: return "abs";
        case Op::AbsSq: return "abs_sq";
        case Op::Polar: return "polar";
        case Op::DivScalar: return "div_scalar";
        case Op::Crop: return "crop";
        case Op::Gather: return "gather";
        case Op::ConcatCols: return "concat_cols";
        case Op::Reshape: return "reshape";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Max: return "max";
        case Op::SmoothL1: return "smooth_l1";
        case Op::Fft: return "fft";
        case Op::Ifft: return "ifft";
    }
    return "?";
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Tensor t) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(t);
    return push(std::move(n));
}

int Tape::param(std::string_view segment, int rows, int cols) {
    const size_t idx = store_->segment_index(segment);
    auto vals = store_->values(idx);
    if (vals.size() != static_cast<size_t>(rows) * cols)
        fail("param segment size mismatch: " + std::string(segment));
    Node n;
    n.op = Op::Param;
    n.param_seg = static_cast<int>(idx);
    n.value = Tensor::real(rows, cols);
    std::copy(vals.begin(), vals.end(), n.value.data.begin());
    return push(std::move(n));
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols || a.is_complex != b.is_complex)
        fail(std::string("shape mismatch in ") + what);
}
}  // namespace

int Tape::add(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "add");
    Node n;
    n.op = Op::Add;
    n.ins = {a, b};
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += tb.data[i];
    return push(std::move(n));
}

int Tape::add_n(std::span<const int> ids) {
    if (ids.empty()) fail("add_n with no inputs");
    Node n;
    n.op = Op::AddN;
    n.ins.assign(ids.begin(), ids.end());
    n.value = value(ids[0]);
    for (size_t k = 1; k < ids.size(); ++k) {
        const Tensor& t = value(ids[k]);
        require_same_shape(n.value, t, "add_n");
        for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += t.data[i];
    }
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "sub");
    Node n;
    n.op = Op::Sub;
    n.ins = {a, b};
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= tb.data[i];
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.ins = {a};
    n.scalar = c;
    n.value = value(a);
    for (double& x : n.value.data) x *= c;
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.is_complex || tb.is_complex) fail("mul expects real tensors");
    require_same_shape(ta, tb, "mul");
    Node n;
    n.op = Op::Mul;
    n.ins = {a, b};
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= tb.data[i];
    return push(std::move(n));
}

int Tape::cmul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.is_complex || !tb.is_complex) fail("cmul expects complex tensors");
    require_same_shape(ta, tb, "cmul");
    Node n;
    n.op = Op::CMul;
    n.ins = {a, b};
    n.value = Tensor::complex(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.count(); ++i) {
        const double ar = ta.data[2 * i], ai = ta.data[2 * i + 1];
        const double br = tb.data[2 * i], bi = tb.data[2 * i + 1];
        n.value.data[2 * i] = ar * br - ai * bi;
        n.value.data[2 * i + 1] = ar * bi + ai * br;
    }
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.is_complex || tb.is_complex) fail("matmul expects real tensors");
    if (ta.cols != tb.rows) fail("shape mismatch in matmul");
    Node n;
    n.op = Op::MatMul;
    n.ins = {a, b};
    n.value = Tensor::real(ta.rows, tb.cols);
    kernels::gemm(ta.data.data(), tb.data.data(), n.value.data.data(), ta.rows, ta.cols, tb.cols);
    return push(std::move(n));
}

int Tape::add_rowvec(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.is_complex || tb.is_complex) fail("add_rowvec expects real tensors");
    if (tb.rows != 1 || tb.cols != ta.cols) fail("shape mismatch in add_rowvec");
    Node n;
    n.op = Op::AddRowVec;
    n.ins = {a, b};
    n.value = Tensor::real(ta.rows, ta.cols);
    kernels::add_rowvec(ta.data.data(), tb.data.data(), n.value.data.data(), ta.rows, ta.cols);
    return push(std::move(n));
}

int Tape::sin_scaled(int a, double omega) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("sin_scaled expects real tensor");
    Node n;
    n.op = Op::SinScaled;
    n.ins = {a};
    n.scalar = omega;
    n.value = Tensor::real(ta.rows, ta.cols);
    kernels::sin_scaled(ta.data, omega, n.value.data);
    return push(std::move(n));
}

int Tape::relu(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("relu expects real tensor");
    Node n;
    n.op = Op::Relu;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    kernels::relu(ta.data, n.value.data);
    return push(std::move(n));
}

int Tape::exp(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("exp expects real tensor");
    Node n;
    n.op = Op::Exp;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = std::exp(ta.data[i]);
    return push(std::move(n));
}

int Tape::logistic(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("logistic expects real tensor");
    Node n;
    n.op = Op::Logistic;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    kernels::logistic(ta.data, n.value.data);
    return push(std::move(n));
}

int Tape::sqrt(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("sqrt expects real tensor");
    Node n;
    n.op = Op::Sqrt;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = std::sqrt(ta.data[i]);
    return push(std::move(n));
}

int Tape::abs(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("abs expects real tensor");
    Node n;
    n.op = Op::Abs;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    kernels::abs_val(ta.data, n.value.data);
    return push(std::move(n));
}

int Tape::abs_sq(int a) {
    const Tensor& ta = value(a);
    if (!ta.is_complex) fail("abs_sq expects complex tensor");
    Node n;
    n.op = Op::AbsSq;
    n.ins = {a};
    n.value = Tensor::real(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.count(); ++i) {
        const double re = ta.data[2 * i], im = ta.data[2 * i + 1];
        n.value.data[i] = re * re + im * im;
    }
    return push(std::move(n));
}

int Tape::polar(int amplitude, int phase) {
    const Tensor& ta = value(amplitude);
    const Tensor& tp = value(phase);
    if (ta.is_complex || tp.is_complex) fail("polar expects real tensors");
    require_same_shape(ta, tp, "polar");
    Node n;
    n.op = Op::Polar;
    n.ins = {amplitude, phase};
    n.value = Tensor::complex(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.count(); ++i) {
        n.value.data[2 * i] = ta.data[i] * std::cos(tp.data[i]);
        n.value.data[2 * i + 1] = ta.data[i] * std::sin(tp.data[i]);
    }
    return push(std::move(n));
}

int Tape::div_scalar(int a, int s) {
    const Tensor& ta = value(a);
    const Tensor& ts = value(s);
    if (ts.rows != 1 || ts.cols != 1 || ts.is_complex) fail("div_scalar denominator must be a real scalar node");
    Node n;
    n.op = Op::DivScalar;
    n.ins = {a, s};
    n.value = ta;
    // true division, not multiply-by-reciprocal: the element equal to s must
    // come out exactly 1
    const double d = ts.data[0];
    for (double& x : n.value.data) x /= d;
    return push(std::move(n));
}

int Tape::crop(int a, int row0, int col0, int h, int w) {
    const Tensor& ta = value(a);
    if (row0 < 0 || col0 < 0 || row0 + h > ta.rows || col0 + w > ta.cols)
        fail("crop window out of bounds");
    Node n;
    n.op = Op::Crop;
    n.ins = {a};
    n.i0 = row0;
    n.i1 = col0;
    n.value = ta.is_complex ? Tensor::complex(h, w) : Tensor::real(h, w);
    const int ch = ta.is_complex ? 2 : 1;
    for (int r = 0; r < h; ++r) {
        const double* src = ta.data.data() + (static_cast<size_t>(row0 + r) * ta.cols + col0) * ch;
        double* dst = n.value.data.data() + static_cast<size_t>(r) * w * ch;
        std::copy(src, src + static_cast<size_t>(w) * ch, dst);
    }
    return push(std::move(n));
}

int Tape::gather(int table, std::vector<int32_t> indices, std::vector<double> weights, int npix,
                 int features) {
    const Tensor& tt = value(table);
    if (tt.is_complex) fail("gather expects a real table");
    if (tt.cols != features) fail("gather feature width mismatch");
    if (indices.size() != static_cast<size_t>(npix) * 4 || weights.size() != indices.size())
        fail("gather index/weight size mismatch");
    for (int32_t ix : indices)
        if (ix < 0 || ix >= tt.rows) fail("gather index out of table range");
    Node n;
    n.op = Op::Gather;
    n.ins = {table};
    n.indices = std::move(indices);
    n.weights = std::move(weights);
    n.value = Tensor::real(npix, features);
    kernels::gather(tt.data.data(), n.indices.data(), n.weights.data(), npix, features,
                    n.value.data.data());
    return push(std::move(n));
}

int Tape::concat_cols(std::span<const int> ids) {
    if (ids.empty()) fail("concat_cols with no inputs");
    int rows = value(ids[0]).rows;
    int total = 0;
    for (int id : ids) {
        const Tensor& t = value(id);
        if (t.is_complex) fail("concat_cols expects real tensors");
        if (t.rows != rows) fail("shape mismatch in concat_cols");
        total += t.cols;
    }
    Node n;
    n.op = Op::ConcatCols;
    n.ins.assign(ids.begin(), ids.end());
    n.value = Tensor::real(rows, total);
    int at = 0;
    for (int id : ids) {
        const Tensor& t = value(id);
        for (int r = 0; r < rows; ++r)
            std::copy(t.data.begin() + static_cast<size_t>(r) * t.cols,
                      t.data.begin() + static_cast<size_t>(r + 1) * t.cols,
                      n.value.data.begin() + static_cast<size_t>(r) * total + at);
        at += t.cols;
    }
    return push(std::move(n));
}

int Tape::reshape(int a, int rows, int cols) {
    const Tensor& ta = value(a);
    if (ta.count() != static_cast<size_t>(rows) * cols) fail("reshape count mismatch");
    Node n;
    n.op = Op::Reshape;
    n.ins = {a};
    n.value = ta;
    n.value.rows = rows;
    n.value.cols = cols;
    return push(std::move(n));
}

int Tape::sum(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("sum expects real tensor");
    double s = 0.0;
    for (double x : ta.data) s += x;
    Node n;
    n.op = Op::Sum;
    n.ins = {a};
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

int Tape::mean(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("mean expects real tensor");
    double s = 0.0;
    for (double x : ta.data) s += x;
    Node n;
    n.op = Op::Mean;
    n.ins = {a};
    n.value = Tensor::scalar(s / static_cast<double>(ta.count()));
    return push(std::move(n));
}

int Tape::max(int a) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("max expects real tensor");
    size_t arg = 0;
    const double m = kernels::max_of(ta.data, &arg);
    Node n;
    n.op = Op::Max;
    n.ins = {a};
    n.i0 = static_cast<int>(arg);
    n.value = Tensor::scalar(m);
    return push(std::move(n));
}

int Tape::smooth_l1(int a, double beta) {
    const Tensor& ta = value(a);
    if (ta.is_complex) fail("smooth_l1 expects real tensor");
    if (beta <= 0.0) fail("smooth_l1 beta must be positive");
    Node n;
    n.op = Op::SmoothL1;
    n.ins = {a};
    n.scalar = beta;
    n.value = Tensor::real(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.data.size(); ++i) {
        const double x = ta.data[i];
        n.value.data[i] = std::fabs(x) < beta ? x * x / (2.0 * beta) : std::fabs(x) - beta / 2.0;
    }
    return push(std::move(n));
}

int Tape::fft(int a) {
    const Tensor& ta = value(a);
    if (!ta.is_complex) fail("fft expects complex tensor");
    Node n;
    n.op = Op::Fft;
    n.ins = {a};
    n.value = Tensor::from_field(cfft2_centered(ta.to_field()));
    return push(std::move(n));
}

int Tape::ifft(int a) {
    const Tensor& ta = value(a);
    if (!ta.is_complex) fail("ifft expects complex tensor");
    Node n;
    n.op = Op::Ifft;
    n.ins = {a};
    n.value = Tensor::from_field(cifft2_centered(ta.to_field()));
    return push(std::move(n));
}

double Tape::scalar_value(int id) const {
    const Tensor& t = value(id);
    if (t.count() != 1 || t.is_complex) fail("node is not a real scalar");
    return t.data[0];
}

void Tape::backward(int output_id) {
    const Tensor& out = value(output_id);
    if (out.count() != 1 || out.is_complex)
        throw std::invalid_argument("backward seed on non-scalar output requires an explicit cotangent");
    run_backward(output_id, Tensor::scalar(1.0));
}

void Tape::backward(int output_id, const Tensor& cotangent) {
    const Tensor& out = value(output_id);
    if (cotangent.rows != out.rows || cotangent.cols != out.cols ||
        cotangent.is_complex != out.is_complex)
        throw std::invalid_argument("cotangent shape mismatch");
    run_backward(output_id, cotangent);
}

void Tape::accumulate(int id, const Tensor& grad) {
    Tensor& g = grads_[id];
    if (g.data.empty()) {
        const Tensor& v = nodes_[id].value;
        g = v.is_complex ? Tensor::complex(v.rows, v.cols) : Tensor::real(v.rows, v.cols);
    }
    for (size_t i = 0; i < grad.data.size(); ++i) g.data[i] += grad.data[i];
}

void Tape::run_backward(int output_id, Tensor seed) {
    if (backward_done_)
        throw std::logic_error("backward already ran on this tape; run a new forward first");
    backward_done_ = true;
    store_->zero_grads();
    grads_.assign(nodes_.size(), Tensor{});
    accumulate(output_id, seed);

    for (int id = output_id; id >= 0; --id) {
        Node& n = nodes_[id];
        Tensor& g = grads_[id];
        if (g.data.empty()) continue;  // node does not influence the output
        switch (n.op) {
            case Op::Const:
                break;
            case Op::Param: {
                auto dst = store_->grads(static_cast<size_t>(n.param_seg));
                for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.data[i];
                break;
            }
            case Op::Add:
                accumulate(n.ins[0], g);
                accumulate(n.ins[1], g);
                break;
            case Op::AddN:
                for (int in : n.ins) accumulate(in, g);
                break;
            case Op::Sub: {
                accumulate(n.ins[0], g);
                Tensor neg = g;
                for (double& x : neg.data) x = -x;
                accumulate(n.ins[1], neg);
                break;
            }
            case Op::Scale: {
                Tensor d = g;
                for (double& x : d.data) x *= n.scalar;
                accumulate(n.ins[0], d);
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[n.ins[0]].value;
                const Tensor& b = nodes_[n.ins[1]].value;
                Tensor da = g, db = g;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    da.data[i] = g.data[i] * b.data[i];
                    db.data[i] = g.data[i] * a.data[i];
                }
                accumulate(n.ins[0], da);
                accumulate(n.ins[1], db);
                break;
            }
            case Op::CMul: {
                const Tensor& a = nodes_[n.ins[0]].value;
                const Tensor& b = nodes_[n.ins[1]].value;
                Tensor da = Tensor::complex(a.rows, a.cols);
                Tensor db = Tensor::complex(a.rows, a.cols);
                for (size_t i = 0; i < a.count(); ++i) {
                    const double gr = g.data[2 * i], gi = g.data[2 * i + 1];
                    const double br = b.data[2 * i], bi = b.data[2 * i + 1];
                    const double ar = a.data[2 * i], ai = a.data[2 * i + 1];
                    // da = g * conj(b); db = g * conj(a)
                    da.data[2 * i] = gr * br + gi * bi;
                    da.data[2 * i + 1] = gi * br - gr * bi;
                    db.data[2 * i] = gr * ar + gi * ai;
                    db.data[2 * i + 1] = gi * ar - gr * ai;
                }
                accumulate(n.ins[0], da);
                accumulate(n.ins[1], db);
                break;
            }
            case Op::MatMul: {
                const Tensor& a = nodes_[n.ins[0]].value;
                const Tensor& b = nodes_[n.ins[1]].value;
                Tensor da = Tensor::real(a.rows, a.cols);
                Tensor db = Tensor::real(b.rows, b.cols);
                kernels::gemm_a_bt_acc(g.data.data(), b.data.data(), da.data.data(), a.rows, b.cols,
                                       a.cols);
                kernels::gemm_at_b_acc(a.data.data(), g.data.data(), db.data.data(), a.rows, a.cols,
                                       b.cols);
                accumulate(n.ins[0], da);
                accumulate(n.ins[1], db);
                break;
            }
            case Op::AddRowVec: {
                accumulate(n.ins[0], g);
                const Tensor& b = nodes_[n.ins[1]].value;
                Tensor db = Tensor::real(1, b.cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) db.data[c] += g.data[static_cast<size_t>(r) * g.cols + c];
                accumulate(n.ins[1], db);
                break;
            }
            case Op::SinScaled: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                kernels::cos_scaled(a.data, n.scalar, n.scalar, da.data);
                for (size_t i = 0; i < g.data.size(); ++i) da.data[i] *= g.data[i];
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Relu: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i)
                    da.data[i] = a.data[i] > 0.0 ? g.data[i] : 0.0;
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Exp: {
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i) da.data[i] = g.data[i] * n.value.data[i];
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Logistic: {
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    const double y = n.value.data[i];
                    da.data[i] = g.data[i] * y * (1.0 - y);
                }
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Sqrt: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i)
                    da.data[i] = g.data[i] * 0.5 / std::sqrt(std::max(a.data[i], kSqrtGuard));
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Abs: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    const double s = a.data[i] > 0.0 ? 1.0 : (a.data[i] < 0.0 ? -1.0 : 0.0);
                    da.data[i] = g.data[i] * s;
                }
                accumulate(n.ins[0], da);
                break;
            }
            case Op::AbsSq: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = Tensor::complex(a.rows, a.cols);
                for (size_t i = 0; i < a.count(); ++i) {
                    da.data[2 * i] = 2.0 * g.data[i] * a.data[2 * i];
                    da.data[2 * i + 1] = 2.0 * g.data[i] * a.data[2 * i + 1];
                }
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Polar: {
                const Tensor& amp = nodes_[n.ins[0]].value;
                const Tensor& ph = nodes_[n.ins[1]].value;
                Tensor damp = Tensor::real(amp.rows, amp.cols);
                Tensor dph = Tensor::real(ph.rows, ph.cols);
                for (size_t i = 0; i < amp.count(); ++i) {
                    const double c = std::cos(ph.data[i]), s = std::sin(ph.data[i]);
                    const double gr = g.data[2 * i], gi = g.data[2 * i + 1];
                    damp.data[i] = gr * c + gi * s;
                    dph.data[i] = amp.data[i] * (gi * c - gr * s);
                }
                accumulate(n.ins[0], damp);
                accumulate(n.ins[1], dph);
                break;
            }
            case Op::DivScalar: {
                const Tensor& a = nodes_[n.ins[0]].value;
                const double s = nodes_[n.ins[1]].value.data[0];
                Tensor da = g;
                double ds = 0.0;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    da.data[i] = g.data[i] / s;
                    ds -= g.data[i] * a.data[i];
                }
                ds /= s * s;
                accumulate(n.ins[0], da);
                accumulate(n.ins[1], Tensor::scalar(ds));
                break;
            }
            case Op::Crop: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = a.is_complex ? Tensor::complex(a.rows, a.cols) : Tensor::real(a.rows, a.cols);
                const int ch = a.is_complex ? 2 : 1;
                for (int r = 0; r < n.value.rows; ++r) {
                    const double* src = g.data.data() + static_cast<size_t>(r) * n.value.cols * ch;
                    double* dst = da.data.data() +
                                  (static_cast<size_t>(n.i0 + r) * a.cols + n.i1) * ch;
                    for (int c = 0; c < n.value.cols * ch; ++c) dst[c] += src[c];
                }
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Gather: {
                const Tensor& t = nodes_[n.ins[0]].value;
                Tensor dt = Tensor::real(t.rows, t.cols);
                const int features = n.value.cols;
                for (int p = 0; p < n.value.rows; ++p)
                    for (int c = 0; c < 4; ++c) {
                        const double w = n.weights[static_cast<size_t>(p) * 4 + c];
                        const int32_t ix = n.indices[static_cast<size_t>(p) * 4 + c];
                        for (int f = 0; f < features; ++f)
                            dt.data[static_cast<size_t>(ix) * features + f] +=
                                w * g.data[static_cast<size_t>(p) * features + f];
                    }
                accumulate(n.ins[0], dt);
                break;
            }
            case Op::ConcatCols: {
                int at = 0;
                for (int in : n.ins) {
                    const Tensor& t = nodes_[in].value;
                    Tensor dt = Tensor::real(t.rows, t.cols);
                    for (int r = 0; r < t.rows; ++r)
                        for (int c = 0; c < t.cols; ++c)
                            dt.data[static_cast<size_t>(r) * t.cols + c] =
                                g.data[static_cast<size_t>(r) * n.value.cols + at + c];
                    accumulate(in, dt);
                    at += t.cols;
                }
                break;
            }
            case Op::Reshape: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                da.rows = a.rows;
                da.cols = a.cols;
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Sum: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = Tensor::real(a.rows, a.cols);
                for (double& x : da.data) x = g.data[0];
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Mean: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = Tensor::real(a.rows, a.cols);
                const double v = g.data[0] / static_cast<double>(a.count());
                for (double& x : da.data) x = v;
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Max: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = Tensor::real(a.rows, a.cols);
                da.data[static_cast<size_t>(n.i0)] = g.data[0];
                accumulate(n.ins[0], da);
                break;
            }
            case Op::SmoothL1: {
                const Tensor& a = nodes_[n.ins[0]].value;
                Tensor da = g;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    const double x = a.data[i];
                    const double d = std::fabs(x) < n.scalar ? x / n.scalar
                                                             : (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
                    da.data[i] = g.data[i] * d;
                }
                accumulate(n.ins[0], da);
                break;
            }
            case Op::Fft:
                accumulate(n.ins[0], Tensor::from_field(cifft2_centered(g.to_field())));
                break;
            case Op::Ifft:
                accumulate(n.ins[0], Tensor::from_field(cfft2_centered(g.to_field())));
                break;
        }
        g.data.clear();
        g.data.shrink_to_fit();
    }
    grads_.clear();
}

}  // namespace ptyinr
