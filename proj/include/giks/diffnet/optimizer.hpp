#pragma once

#include "giks/diffnet/tensor.hpp"

#include <cstddef>
#include <span>
#include <string>

namespace giks::diffnet {

/// A trainable parameter matrix with its gradient and AdamW moment buffers.
/// All four tensors share one shape.
struct ParamBlock {
    std::string name;
    Tensor2 value;
    Tensor2 grad;
    Tensor2 moment1;
    Tensor2 moment2;
    std::size_t step_count = 0;

    ParamBlock() = default;
    ParamBlock(std::string block_name, Tensor2 initial);

    void zero_grad() { grad.fill(0.0); }
    // Clears moments and the step counter; value and grad are untouched.
    void reset_optimizer_state();
};

void zero_grads(std::span<ParamBlock* const> params);

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

// One AdamW step over every block. Weight decay shrinks the value directly
// (value *= 1 - lr*wd) before the bias-corrected moment update. Throws
// TrainingError naming the first block with a non-finite gradient; in that
// case no block is modified.
void adamw_step(std::span<ParamBlock* const> params, const OptimizerConfig& config);

} // namespace giks::diffnet
