#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace modfuse::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode automatic differentiation over dense 64-bit matrices.
//
// A Tape owns the expression graph. Node creation evaluates the forward
// value immediately; creation order is a topological order, so backward()
// walks the node list once in reverse. Any NaN/Inf produced in a forward
// value or a backward gradient aborts the step (NonFiniteDetected).
//
// Ref handles are only valid for the Tape that produced them.
struct Ref {
    std::int32_t index = -1;
    bool valid() const { return index >= 0; }
};

enum class Op : std::uint8_t {
    Leaf,
    MatMul,      // A * B
    MatMulNT,    // A * B^T
    Add,         // same shape, or B is 1xC broadcast over rows of A
    Scale,       // c * A
    ConcatRows,
    ConcatCols,
    RowSoftmax,
    LayerNorm,   // per-row, eps=1e-5; parents: x, gain(1xC), bias(1xC)
    Gelu,        // tanh approximation
    MaskedMeanRows,
    Sigmoid,
    SumAll,
    BceWithLogits,  // parent: 1x1 logit; target stored on the node
};

class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Ref leaf(Mat value);

    Ref matmul(Ref a, Ref b);
    Ref matmul_nt(Ref a, Ref b);
    Ref add(Ref a, Ref b);
    Ref scale(Ref a, double factor);
    Ref concat_rows(Ref a, Ref b);
    Ref concat_cols(Ref a, Ref b);
    Ref row_softmax(Ref a);
    Ref layer_norm(Ref x, Ref gain, Ref bias);
    Ref gelu(Ref a);
    Ref masked_mean_rows(Ref a, std::vector<bool> mask);
    Ref sigmoid(Ref a);
    Ref sum_all(Ref a);
    Ref bce_with_logits(Ref logit, double target);

    // Seeds the (scalar) root with gradient 1 and accumulates exact analytic
    // gradients into every node, leaves included. Nodes off the root's
    // ancestry keep zero gradient.
    void backward(Ref root);

    const Mat& value(Ref r) const { return nodes_[checked(r)].value; }
    const Mat& grad(Ref r) const { return nodes_[checked(r)].grad; }
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Op op = Op::Leaf;
        std::int32_t a = -1;
        std::int32_t b = -1;
        std::int32_t c = -1;
        double aux = 0.0;          // scale factor / bce target
        std::vector<bool> mask;    // masked_mean_rows only
        Mat value;
        Mat grad;
    };

    std::size_t checked(Ref r) const;
    Ref push(Node node);
    void backward_node(std::size_t index);

    std::vector<Node> nodes_;
};

// Max relative gradient error of a scalar-valued function of a parameter
// list, estimated by central finite differences on sampled coordinates.
//
// `fn` must return the scalar value and, when `grads` is non-null, fill one
// gradient matrix per parameter. The relative error of a coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
using ScalarFn = std::function<double(const std::vector<Mat>& params, std::vector<Mat>* grads)>;

double grad_check(const ScalarFn& fn, const std::vector<Mat>& point,
                  int samples_per_tensor = 8, double step = 1e-6, std::uint64_t seed = 0);

}  // namespace modfuse::ad
