#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptyinr/field.hpp"
#include "ptyinr/param_store.hpp"

namespace ptyinr {

/// Value flowing through the tape: a real or complex row-major matrix.
/// Complex data is interleaved (re, im), same layout as ComplexField.
struct Tensor {
    int rows = 0;
    int cols = 0;
    bool is_complex = false;
    std::vector<double> data;

    size_t count() const { return static_cast<size_t>(rows) * cols; }
    size_t buffer_size() const { return count() * (is_complex ? 2 : 1); }

    static Tensor real(int rows, int cols);
    static Tensor complex(int rows, int cols);
    static Tensor scalar(double v);
    static Tensor from_field(const ComplexField& f);
    ComplexField to_field() const;
};

enum class Op : uint8_t {
    Const, Param,
    Add, AddN, Sub, Scale,
    Mul, CMul, MatMul, AddRowVec,
    SinScaled, Relu, Exp, Logistic, Sqrt, Abs,
    AbsSq, Polar, DivScalar,
    Crop, Gather, ConcatCols, Reshape,
    Sum, Mean, Max, SmoothL1,
    Fft, Ifft,
};

const char* op_name(Op op);

/// Reverse-mode computation record. Nodes are appended in evaluation order
/// (forward values are computed eagerly on append), so the list is already
/// topologically sorted. One backward pass per tape; rerunning is an error.
class Tape {
public:
    explicit Tape(ParamStore& store) : store_(&store) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves ---
    int constant(Tensor t);
    int constant(const ComplexField& f) { return constant(Tensor::from_field(f)); }
    int constant_scalar(double v) { return constant(Tensor::scalar(v)); }
    /// Real matrix view of a parameter segment; values are snapshotted from
    /// the store, gradients accumulate back into store.grads.
    int param(std::string_view segment, int rows, int cols);

    // --- elementwise / linear algebra ---
    int add(int a, int b);
    int add_n(std::span<const int> ids);
    int sub(int a, int b);
    int scale(int a, double c);
    int mul(int a, int b);       // real Hadamard
    int cmul(int a, int b);      // complex Hadamard
    int matmul(int a, int b);    // real [MxK]*[KxN]
    int add_rowvec(int a, int b);  // a [MxN] + broadcast row b [1xN]
    int sin_scaled(int a, double omega);  // sin(omega * a)
    int relu(int a);
    int exp(int a);
    int logistic(int a);
    int sqrt(int a);   // adjoint guarded by max(x, 1e-12)
    int abs(int a);    // real |x|
    int abs_sq(int a);  // complex -> real |z|^2
    int polar(int amplitude, int phase);  // A*exp(i*phi)
    int div_scalar(int a, int s);         // elementwise a / scalar node s

    // --- structure ---
    int crop(int a, int row0, int col0, int h, int w);
    /// Bilinear table gather: indices/weights hold 4 corner entries per pixel;
    /// table is a [T x features] real node. Output is [npix x features].
    int gather(int table, std::vector<int32_t> indices, std::vector<double> weights,
               int npix, int features);
    int concat_cols(std::span<const int> ids);
    int reshape(int a, int rows, int cols);

    // --- reductions & loss pieces ---
    int sum(int a);
    int mean(int a);
    int max(int a);  // subgradient routed to the first argmax
    int smooth_l1(int a, double beta);  // elementwise; quadratic inside |x| < beta

    // --- spectral ---
    int fft(int a);
    int ifft(int a);

    const Tensor& value(int id) const { return nodes_.at(id).value; }
    double scalar_value(int id) const;
    size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    /// Backward from a scalar output (seed 1). Throws if the output is not
    /// scalar or if a backward pass already ran on this tape.
    void backward(int output_id);
    void backward(int output_id, const Tensor& cotangent);

private:
    struct Node {
        Op op = Op::Const;
        std::vector<int> ins;
        Tensor value;
        double scalar = 0.0;   // Scale factor, SinScaled omega, SmoothL1 beta
        int i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // crop window, reshape dims, argmax
        int param_seg = -1;
        std::vector<int32_t> indices;
        std::vector<double> weights;
    };

    int push(Node n);
    const Node& node(int id) const { return nodes_.at(id); }
    void run_backward(int output_id, Tensor seed);
    void accumulate(int id, const Tensor& grad);

    ParamStore* store_;
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

}  // namespace ptyinr
