#pragma once

#include "giks/diffnet/optimizer.hpp"
#include "giks/diffnet/tensor.hpp"

#include <cstddef>
#include <vector>

namespace giks::diffnet {

using NodeId = std::size_t;

/// Records a forward pass built from the fixed op set the estimator needs and
/// replays it in reverse to accumulate ∂loss/∂param into ParamBlock::grad.
///
/// Parameter blocks are referenced, not copied: they must outlive the tape.
/// Gradients accumulate; callers zero them between optimizer steps.
class Tape {
public:
    NodeId constant(Tensor2 value);
    NodeId param(ParamBlock& block);

    // x·W + b, with b a 1×out row broadcast over rows.
    NodeId affine(NodeId x, NodeId weights, NodeId bias);
    NodeId relu(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    // Elementwise product; shapes must match.
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId square(NodeId a);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);

    // Varying-coefficient layer. For row i with input h_i (1×in) and basis
    // row b_i (1×dim), output_i = Σ_{a,k} [h_i,1]_a · b_ik · bank[a·dim+k, :].
    // bank has shape ((in+1)·dim) × out; basis is a constant n×dim matrix.
    NodeId spline_contract(NodeId h, NodeId bank, Tensor2 basis);

    // Mean softmax cross-entropy of logits (n×C) against integer labels.
    NodeId softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels);

    const Tensor2& value(NodeId id) const;
    double scalar(NodeId id) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Requires a 1×1 node; throws ContractError otherwise.
    void backward(NodeId loss);

private:
    enum class Op {
        Constant,
        Param,
        Affine,
        Relu,
        Add,
        Sub,
        Mul,
        Scale,
        Square,
        Sum,
        Mean,
        SplineContract,
        SoftmaxCrossEntropy,
    };

    struct Node {
        Op op = Op::Constant;
        NodeId in0 = 0;
        NodeId in1 = 0;
        NodeId in2 = 0;
        Tensor2 value;
        Tensor2 grad;
        Tensor2 aux;
        Tensor2 aux2;
        ParamBlock* block = nullptr;
        std::vector<std::size_t> labels;
        double factor = 0.0;
        bool requires_grad = false;
    };

    NodeId push(Node node);
    const Node& at(NodeId id) const;
    void accumulate(NodeId id, const Tensor2& g);
    Tensor2& grad_buffer(NodeId id);

    std::vector<Node> nodes_;
};

} // namespace giks::diffnet
