#include "giks/diffnet/tape.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace giks::diffnet {

namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

} // namespace

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

const Tape::Node& Tape::at(NodeId id) const {
    if (id >= nodes_.size()) throw ContractError("unknown tape node");
    return nodes_[id];
}

const Tensor2& Tape::value(NodeId id) const { return at(id).value; }

double Tape::scalar(NodeId id) const {
    const Tensor2& v = at(id).value;
    if (v.rows() != 1 || v.cols() != 1) throw ContractError("node is not a scalar");
    return v(0, 0);
}

NodeId Tape::constant(Tensor2 value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::param(ParamBlock& block) {
    Node n;
    n.op = Op::Param;
    n.value = block.value;
    n.block = &block;
    n.requires_grad = true;
    return push(std::move(n));
}

NodeId Tape::affine(NodeId x, NodeId weights, NodeId bias) {
    const Tensor2& xv = at(x).value;
    const Tensor2& wv = at(weights).value;
    const Tensor2& bv = at(bias).value;
    if (xv.cols() != wv.rows()) {
        throw DimensionError("affine: input has " + std::to_string(xv.cols()) +
                             " columns, weights have " + std::to_string(wv.rows()) + " rows");
    }
    if (bv.size() != wv.cols()) {
        throw DimensionError("affine: bias length " + std::to_string(bv.size()) +
                             " does not match output width " + std::to_string(wv.cols()));
    }
    Tensor2 out = matmul(xv, wv);
    const auto b = bv.values();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row_span(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    }
    Node n;
    n.op = Op::Affine;
    n.in0 = x;
    n.in1 = weights;
    n.in2 = bias;
    n.value = std::move(out);
    n.requires_grad = at(x).requires_grad || at(weights).requires_grad || at(bias).requires_grad;
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    Tensor2 out = at(x).value;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    Node n;
    n.op = Op::Relu;
    n.in0 = x;
    n.value = std::move(out);
    n.requires_grad = at(x).requires_grad;
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(at(a).value, at(b).value, "add");
    Tensor2 out = at(a).value;
    const auto bv = at(b).value.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    Node n;
    n.op = Op::Add;
    n.in0 = a;
    n.in1 = b;
    n.value = std::move(out);
    n.requires_grad = at(a).requires_grad || at(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(at(a).value, at(b).value, "sub");
    Tensor2 out = at(a).value;
    const auto bv = at(b).value.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
    Node n;
    n.op = Op::Sub;
    n.in0 = a;
    n.in1 = b;
    n.value = std::move(out);
    n.requires_grad = at(a).requires_grad || at(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(at(a).value, at(b).value, "mul");
    Tensor2 out = at(a).value;
    const auto bv = at(b).value.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    Node n;
    n.op = Op::Mul;
    n.in0 = a;
    n.in1 = b;
    n.value = std::move(out);
    n.requires_grad = at(a).requires_grad || at(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
    Tensor2 out = at(a).value;
    for (double& v : out.values()) v *= factor;
    Node n;
    n.op = Op::Scale;
    n.in0 = a;
    n.factor = factor;
    n.value = std::move(out);
    n.requires_grad = at(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
    Tensor2 out = at(a).value;
    for (double& v : out.values()) v *= v;
    Node n;
    n.op = Op::Square;
    n.in0 = a;
    n.value = std::move(out);
    n.requires_grad = at(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    double acc = 0.0;
    for (double v : at(a).value.values()) acc += v;
    Node n;
    n.op = Op::Sum;
    n.in0 = a;
    n.value = Tensor2(1, 1, acc);
    n.requires_grad = at(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
    const Tensor2& av = at(a).value;
    if (av.empty()) throw ContractError("mean of an empty tensor");
    double acc = 0.0;
    for (double v : av.values()) acc += v;
    Node n;
    n.op = Op::Mean;
    n.in0 = a;
    n.value = Tensor2(1, 1, acc / static_cast<double>(av.size()));
    n.requires_grad = at(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::spline_contract(NodeId h, NodeId bank, Tensor2 basis) {
    const Tensor2& hv = at(h).value;
    const Tensor2& bankv = at(bank).value;
    const std::size_t dim = basis.cols();
    if (basis.rows() != hv.rows()) {
        throw DimensionError("spline_contract: basis rows do not match input rows");
    }
    if (dim == 0 || bankv.rows() != (hv.cols() + 1) * dim) {
        throw DimensionError("spline_contract: bank has " + std::to_string(bankv.rows()) +
                             " rows, expected " + std::to_string((hv.cols() + 1) * dim));
    }
    const std::size_t in = hv.cols();
    Tensor2 z(hv.rows(), (in + 1) * dim);
    for (std::size_t i = 0; i < hv.rows(); ++i) {
        const auto hrow = hv.row_span(i);
        const auto brow = basis.row_span(i);
        auto zrow = z.row_span(i);
        for (std::size_t a = 0; a <= in; ++a) {
            const double ha = a < in ? hrow[a] : 1.0;
            for (std::size_t k = 0; k < dim; ++k) zrow[a * dim + k] = ha * brow[k];
        }
    }
    Node n;
    n.op = Op::SplineContract;
    n.in0 = h;
    n.in1 = bank;
    n.value = matmul(z, bankv);
    n.aux = std::move(z);
    n.aux2 = std::move(basis);
    n.requires_grad = at(h).requires_grad || at(bank).requires_grad;
    return push(std::move(n));
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels) {
    const Tensor2& lv = at(logits).value;
    if (labels.size() != lv.rows() || lv.rows() == 0) {
        throw DimensionError("softmax_cross_entropy: label count does not match logits rows");
    }
    Tensor2 probs(lv.rows(), lv.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < lv.rows(); ++i) {
        if (labels[i] >= lv.cols()) throw DomainError("softmax_cross_entropy: label out of range");
        const auto row = lv.row_span(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        auto prow = probs.row_span(i);
        for (std::size_t c = 0; c < row.size(); ++c) prow[c] = std::exp(row[c] - mx) / z;
        loss -= (row[labels[i]] - mx) - std::log(z);
    }
    Node n;
    n.op = Op::SoftmaxCrossEntropy;
    n.in0 = logits;
    n.value = Tensor2(1, 1, loss / static_cast<double>(lv.rows()));
    n.aux = std::move(probs);
    n.labels = std::move(labels);
    n.requires_grad = at(logits).requires_grad;
    return push(std::move(n));
}

Tensor2& Tape::grad_buffer(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor2(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(NodeId id, const Tensor2& g) {
    if (!nodes_[id].requires_grad) return;
    Tensor2& dst = grad_buffer(id);
    auto d = dst.values();
    const auto s = g.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void Tape::backward(NodeId loss) {
    const Node& root = at(loss);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw ContractError("backward requires a scalar loss node");
    }
    for (Node& n : nodes_) n.grad = Tensor2();
    if (!root.requires_grad) return;
    nodes_[loss].grad = Tensor2(1, 1, 1.0);

    for (NodeId id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) continue;
        const Tensor2& g = n.grad;
        switch (n.op) {
        case Op::Constant:
            break;
        case Op::Param: {
            auto dst = n.block->grad.values();
            const auto src = g.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            break;
        }
        case Op::Affine: {
            const Tensor2& x = nodes_[n.in0].value;
            const Tensor2& w = nodes_[n.in1].value;
            if (nodes_[n.in1].requires_grad) accumulate(n.in1, matmul_tn(x, g));
            if (nodes_[n.in2].requires_grad) {
                Tensor2 gb(nodes_[n.in2].value.rows(), nodes_[n.in2].value.cols());
                auto b = gb.values();
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    const auto row = g.row_span(i);
                    for (std::size_t j = 0; j < row.size(); ++j) b[j] += row[j];
                }
                accumulate(n.in2, gb);
            }
            if (nodes_[n.in0].requires_grad) accumulate(n.in0, matmul_nt(g, w));
            break;
        }
        case Op::Relu: {
            Tensor2 gx = g;
            auto gv = gx.values();
            const auto out = n.value.values();
            for (std::size_t i = 0; i < gv.size(); ++i)
                if (!(out[i] > 0.0)) gv[i] = 0.0;
            accumulate(n.in0, gx);
            break;
        }
        case Op::Add:
            accumulate(n.in0, g);
            accumulate(n.in1, g);
            break;
        case Op::Sub: {
            accumulate(n.in0, g);
            if (nodes_[n.in1].requires_grad) {
                Tensor2 neg = g;
                for (double& v : neg.values()) v = -v;
                accumulate(n.in1, neg);
            }
            break;
        }
        case Op::Mul: {
            const auto gv = g.values();
            if (nodes_[n.in0].requires_grad) {
                Tensor2 ga = nodes_[n.in1].value;
                auto v = ga.values();
                for (std::size_t i = 0; i < v.size(); ++i) v[i] *= gv[i];
                accumulate(n.in0, ga);
            }
            if (nodes_[n.in1].requires_grad) {
                Tensor2 gb = nodes_[n.in0].value;
                auto v = gb.values();
                for (std::size_t i = 0; i < v.size(); ++i) v[i] *= gv[i];
                accumulate(n.in1, gb);
            }
            break;
        }
        case Op::Scale: {
            Tensor2 ga = g;
            for (double& v : ga.values()) v *= n.factor;
            accumulate(n.in0, ga);
            break;
        }
        case Op::Square: {
            Tensor2 ga = nodes_[n.in0].value;
            auto v = ga.values();
            const auto gv = g.values();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * v[i] * gv[i];
            accumulate(n.in0, ga);
            break;
        }
        case Op::Sum:
        case Op::Mean: {
            const Tensor2& in = nodes_[n.in0].value;
            double gs = g(0, 0);
            if (n.op == Op::Mean) gs /= static_cast<double>(in.size());
            accumulate(n.in0, Tensor2(in.rows(), in.cols(), gs));
            break;
        }
        case Op::SplineContract: {
            const Tensor2& z = n.aux;
            const Tensor2& basis = n.aux2;
            const Tensor2& bank = nodes_[n.in1].value;
            if (nodes_[n.in1].requires_grad) accumulate(n.in1, matmul_tn(z, g));
            if (nodes_[n.in0].requires_grad) {
                const Tensor2 gz = matmul_nt(g, bank);
                const std::size_t dim = basis.cols();
                const std::size_t in = nodes_[n.in0].value.cols();
                Tensor2 gh(gz.rows(), in);
                for (std::size_t i = 0; i < gz.rows(); ++i) {
                    const auto gzrow = gz.row_span(i);
                    const auto brow = basis.row_span(i);
                    auto ghrow = gh.row_span(i);
                    for (std::size_t a = 0; a < in; ++a) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < dim; ++k) acc += gzrow[a * dim + k] * brow[k];
                        ghrow[a] = acc;
                    }
                }
                accumulate(n.in0, gh);
            }
            break;
        }
        case Op::SoftmaxCrossEntropy: {
            Tensor2 gl = n.aux;
            const double scale = g(0, 0) / static_cast<double>(gl.rows());
            for (std::size_t i = 0; i < gl.rows(); ++i) {
                auto row = gl.row_span(i);
                row[n.labels[i]] -= 1.0;
                for (double& v : row) v *= scale;
            }
            accumulate(n.in0, gl);
            break;
        }
        }
    }
}

} // namespace giks::diffnet
