#include "modfuse/autodiff.hpp"

#include <cmath>
#include <string>

#include "modfuse/errors.hpp"
#include "modfuse/rng.hpp"

namespace modfuse::ad {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluCoeff = 0.044715;
const double kGeluScale = std::sqrt(2.0 / 3.14159265358979323846);

void require_finite(const Mat& m, const char* where) {
    if (!m.allFinite()) {
        raise(ErrorKind::NonFiniteDetected, std::string("non-finite values in ") + where);
    }
}

}  // namespace

std::size_t Tape::checked(Ref r) const {
    if (!r.valid() || static_cast<std::size_t>(r.index) >= nodes_.size()) {
        raise(ErrorKind::ShapeMismatch, "ref does not belong to this tape");
    }
    return static_cast<std::size_t>(r.index);
}

Ref Tape::push(Node node) {
    require_finite(node.value, "forward pass");
    nodes_.push_back(std::move(node));
    return Ref{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Ref Tape::leaf(Mat value) {
    Node node;
    node.op = Op::Leaf;
    node.value = std::move(value);
    return push(std::move(node));
}

Ref Tape::matmul(Ref a, Ref b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols() != vb.rows()) {
        raise(ErrorKind::ShapeMismatch, "matmul: " + std::to_string(va.cols()) + " inner vs " +
                                            std::to_string(vb.rows()));
    }
    Node node;
    node.op = Op::MatMul;
    node.a = a.index;
    node.b = b.index;
    node.value = va * vb;
    return push(std::move(node));
}

Ref Tape::matmul_nt(Ref a, Ref b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols() != vb.cols()) {
        raise(ErrorKind::ShapeMismatch, "matmul_nt: inner dims disagree");
    }
    Node node;
    node.op = Op::MatMulNT;
    node.a = a.index;
    node.b = b.index;
    node.value = va * vb.transpose();
    return push(std::move(node));
}

Ref Tape::add(Ref a, Ref b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    Node node;
    node.op = Op::Add;
    node.a = a.index;
    node.b = b.index;
    if (va.rows() == vb.rows() && va.cols() == vb.cols()) {
        node.value = va + vb;
    } else if (vb.rows() == 1 && va.cols() == vb.cols()) {
        node.value = va.rowwise() + vb.row(0);
    } else {
        raise(ErrorKind::ShapeMismatch, "add: shapes neither equal nor row-broadcastable");
    }
    return push(std::move(node));
}

Ref Tape::scale(Ref a, double factor) {
    Node node;
    node.op = Op::Scale;
    node.a = a.index;
    node.aux = factor;
    node.value = factor * value(a);
    return push(std::move(node));
}

Ref Tape::concat_rows(Ref a, Ref b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols() != vb.cols()) {
        raise(ErrorKind::ShapeMismatch, "concat_rows: column counts disagree");
    }
    Node node;
    node.op = Op::ConcatRows;
    node.a = a.index;
    node.b = b.index;
    node.value.resize(va.rows() + vb.rows(), va.cols());
    node.value.topRows(va.rows()) = va;
    node.value.bottomRows(vb.rows()) = vb;
    return push(std::move(node));
}

Ref Tape::concat_cols(Ref a, Ref b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.rows() != vb.rows()) {
        raise(ErrorKind::ShapeMismatch, "concat_cols: row counts disagree");
    }
    Node node;
    node.op = Op::ConcatCols;
    node.a = a.index;
    node.b = b.index;
    node.value.resize(va.rows(), va.cols() + vb.cols());
    node.value.leftCols(va.cols()) = va;
    node.value.rightCols(vb.cols()) = vb;
    return push(std::move(node));
}

Ref Tape::row_softmax(Ref a) {
    const Mat& va = value(a);
    Node node;
    node.op = Op::RowSoftmax;
    node.a = a.index;
    node.value.resizeLike(va);
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
        const double row_max = va.row(r).maxCoeff();
        Eigen::RowVectorXd e = (va.row(r).array() - row_max).exp();
        node.value.row(r) = e / e.sum();
    }
    return push(std::move(node));
}

Ref Tape::layer_norm(Ref x, Ref gain, Ref bias) {
    const Mat& vx = value(x);
    const Mat& vg = value(gain);
    const Mat& vb = value(bias);
    if (vg.rows() != 1 || vb.rows() != 1 || vg.cols() != vx.cols() || vb.cols() != vx.cols()) {
        raise(ErrorKind::ShapeMismatch, "layer_norm: gain/bias must be 1 x cols");
    }
    Node node;
    node.op = Op::LayerNorm;
    node.a = x.index;
    node.b = gain.index;
    node.c = bias.index;
    node.value.resizeLike(vx);
    for (Eigen::Index r = 0; r < vx.rows(); ++r) {
        const double mean = vx.row(r).mean();
        const double var = (vx.row(r).array() - mean).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        node.value.row(r) =
            ((vx.row(r).array() - mean) * inv) * vg.row(0).array() + vb.row(0).array();
    }
    return push(std::move(node));
}

Ref Tape::gelu(Ref a) {
    const Mat& va = value(a);
    Node node;
    node.op = Op::Gelu;
    node.a = a.index;
    // 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
    node.value = va.unaryExpr([](double x) {
        const double u = kGeluScale * (x + kGeluCoeff * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
    });
    return push(std::move(node));
}

Ref Tape::masked_mean_rows(Ref a, std::vector<bool> mask) {
    const Mat& va = value(a);
    if (static_cast<Eigen::Index>(mask.size()) != va.rows()) {
        raise(ErrorKind::ShapeMismatch, "masked_mean_rows: mask length must equal row count");
    }
    std::size_t live = 0;
    for (const bool keep : mask) live += keep ? 1 : 0;
    if (live == 0) {
        raise(ErrorKind::EmptyMask, "masked_mean_rows needs at least one unmasked row");
    }
    Node node;
    node.op = Op::MaskedMeanRows;
    node.a = a.index;
    node.aux = static_cast<double>(live);
    node.value = Mat::Zero(1, va.cols());
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
        if (mask[static_cast<std::size_t>(r)]) node.value.row(0) += va.row(r);
    }
    node.value /= node.aux;
    node.mask = std::move(mask);
    return push(std::move(node));
}

Ref Tape::sigmoid(Ref a) {
    Node node;
    node.op = Op::Sigmoid;
    node.a = a.index;
    node.value = value(a).unaryExpr([](double x) {
        // split on sign for stability at large |x|
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return push(std::move(node));
}

Ref Tape::sum_all(Ref a) {
    Node node;
    node.op = Op::SumAll;
    node.a = a.index;
    node.value = Mat::Constant(1, 1, value(a).sum());
    return push(std::move(node));
}

Ref Tape::bce_with_logits(Ref logit, double target) {
    const Mat& vl = value(logit);
    if (vl.rows() != 1 || vl.cols() != 1) {
        raise(ErrorKind::ShapeMismatch, "bce_with_logits expects a 1x1 logit");
    }
    const double z = vl(0, 0);
    Node node;
    node.op = Op::BceWithLogits;
    node.a = logit.index;
    node.aux = target;
    // max(z,0) - z*t + log(1 + exp(-|z|)) : stable for large |z|
    node.value = Mat::Constant(1, 1, std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z))));
    return push(std::move(node));
}

void Tape::backward(Ref root) {
    const std::size_t root_index = checked(root);
    if (nodes_[root_index].value.rows() != 1 || nodes_[root_index].value.cols() != 1) {
        raise(ErrorKind::NonScalarRoot, "backward requires a 1x1 root");
    }
    for (auto& node : nodes_) {
        node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    }
    nodes_[root_index].grad(0, 0) = 1.0;
    for (std::size_t i = root_index + 1; i-- > 0;) {
        backward_node(i);
    }
}

void Tape::backward_node(std::size_t index) {
    Node& node = nodes_[index];
    if (node.op == Op::Leaf) return;
    if (node.grad.isZero(0.0)) return;  // not on a path to the root
    require_finite(node.grad, "backward pass");

    const Mat& g = node.grad;
    switch (node.op) {
        case Op::Leaf:
            break;
        case Op::MatMul: {
            nodes_[node.a].grad.noalias() += g * nodes_[node.b].value.transpose();
            nodes_[node.b].grad.noalias() += nodes_[node.a].value.transpose() * g;
            break;
        }
        case Op::MatMulNT: {
            nodes_[node.a].grad.noalias() += g * nodes_[node.b].value;
            nodes_[node.b].grad.noalias() += g.transpose() * nodes_[node.a].value;
            break;
        }
        case Op::Add: {
            nodes_[node.a].grad += g;
            Mat& gb = nodes_[node.b].grad;
            if (gb.rows() == g.rows()) {
                gb += g;
            } else {
                gb.row(0) += g.colwise().sum();
            }
            break;
        }
        case Op::Scale: {
            nodes_[node.a].grad += node.aux * g;
            break;
        }
        case Op::ConcatRows: {
            const Eigen::Index top = nodes_[node.a].value.rows();
            nodes_[node.a].grad += g.topRows(top);
            nodes_[node.b].grad += g.bottomRows(g.rows() - top);
            break;
        }
        case Op::ConcatCols: {
            const Eigen::Index left = nodes_[node.a].value.cols();
            nodes_[node.a].grad += g.leftCols(left);
            nodes_[node.b].grad += g.rightCols(g.cols() - left);
            break;
        }
        case Op::RowSoftmax: {
            const Mat& s = node.value;
            Mat& ga = nodes_[node.a].grad;
            for (Eigen::Index r = 0; r < s.rows(); ++r) {
                const double dot = (g.row(r).array() * s.row(r).array()).sum();
                ga.row(r).array() += (g.row(r).array() - dot) * s.row(r).array();
            }
            break;
        }
        case Op::LayerNorm: {
            const Mat& x = nodes_[node.a].value;
            const Mat& gain = nodes_[node.b].value;
            Mat& gx = nodes_[node.a].grad;
            Mat& gg = nodes_[node.b].grad;
            Mat& gb = nodes_[node.c].grad;
            const double cols = static_cast<double>(x.cols());
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                const double mean = x.row(r).mean();
                const double var = (x.row(r).array() - mean).square().mean();
                const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
                const Eigen::ArrayXXd centered = x.row(r).array() - mean;
                const Eigen::ArrayXXd xhat = centered * inv;
                const Eigen::ArrayXXd dxhat = g.row(r).array() * gain.row(0).array();
                gg.row(0).array() += g.row(r).array() * xhat;
                gb.row(0) += g.row(r);
                const double dvar = (dxhat * centered).sum() * (-0.5) * inv * inv * inv;
                const double dmean = -inv * dxhat.sum();
                gx.row(r).array() +=
                    dxhat * inv + centered * (2.0 * dvar / cols) + dmean / cols;
            }
            break;
        }
        case Op::Gelu: {
            const Mat& x = nodes_[node.a].value;
            nodes_[node.a].grad.array() +=
                g.array() * x.unaryExpr([](double v) {
                                 const double u = kGeluScale * (v + kGeluCoeff * v * v * v);
                                 const double t = std::tanh(u);
                                 const double du = kGeluScale * (1.0 + 3.0 * kGeluCoeff * v * v);
                                 return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                             }).array();
            break;
        }
        case Op::MaskedMeanRows: {
            Mat& ga = nodes_[node.a].grad;
            const double scale = 1.0 / node.aux;
            for (Eigen::Index r = 0; r < ga.rows(); ++r) {
                if (node.mask[static_cast<std::size_t>(r)]) {
                    ga.row(r) += scale * g.row(0);
                }
            }
            break;
        }
        case Op::Sigmoid: {
            const Mat& y = node.value;
            nodes_[node.a].grad.array() += g.array() * y.array() * (1.0 - y.array());
            break;
        }
        case Op::SumAll: {
            nodes_[node.a].grad.array() += g(0, 0);
            break;
        }
        case Op::BceWithLogits: {
            const double z = nodes_[node.a].value(0, 0);
            const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            nodes_[node.a].grad(0, 0) += g(0, 0) * (sig - node.aux);
            break;
        }
    }
}

double grad_check(const ScalarFn& fn, const std::vector<Mat>& point, int samples_per_tensor,
                  double step, std::uint64_t seed) {
    std::vector<Mat> analytic;
    fn(point, &analytic);
    if (analytic.size() != point.size()) {
        raise(ErrorKind::ShapeMismatch, "grad_check: gradient count != parameter count");
    }

    Rng rng(derive_seed(seed, "grad_check"));
    std::vector<Mat> probe = point;
    double max_rel_err = 0.0;
    for (std::size_t t = 0; t < point.size(); ++t) {
        const Eigen::Index n = point[t].size();
        if (n == 0) continue;
        std::vector<Eigen::Index> coords;
        if (n <= samples_per_tensor) {
            for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < samples_per_tensor; ++i) {
                coords.push_back(static_cast<Eigen::Index>(
                    rng.next_below(static_cast<std::uint64_t>(n))));
            }
        }
        for (const Eigen::Index c : coords) {
            const double original = probe[t].data()[c];
            probe[t].data()[c] = original + step;
            const double up = fn(probe, nullptr);
            probe[t].data()[c] = original - step;
            const double down = fn(probe, nullptr);
            probe[t].data()[c] = original;
            const double numeric = (up - down) / (2.0 * step);
            const double exact = analytic[t].data()[c];
            const double rel =
                std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
            max_rel_err = std::max(max_rel_err, rel);
        }
    }
    return max_rel_err;
}

}  // namespace modfuse::ad
