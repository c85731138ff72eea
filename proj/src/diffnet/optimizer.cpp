#include "giks/diffnet/optimizer.hpp"

#include "giks/errors.hpp"

#include <cmath>

namespace giks::diffnet {

ParamBlock::ParamBlock(std::string block_name, Tensor2 initial)
    : name(std::move(block_name)),
      value(std::move(initial)),
      grad(value.rows(), value.cols()),
      moment1(value.rows(), value.cols()),
      moment2(value.rows(), value.cols()) {}

void ParamBlock::reset_optimizer_state() {
    moment1.fill(0.0);
    moment2.fill(0.0);
    step_count = 0;
}

void zero_grads(std::span<ParamBlock* const> params) {
    for (ParamBlock* p : params) p->zero_grad();
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0,1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

void adamw_step(std::span<ParamBlock* const> params, const OptimizerConfig& config) {
    if (params.empty()) return;
    const std::size_t step = params.front()->step_count;
    for (const ParamBlock* p : params) {
        if (p->step_count != step) {
            throw ContractError("inconsistent step_count across parameter blocks (" + p->name +
                                ")");
        }
        if (!p->grad.same_shape(p->value) || !p->moment1.same_shape(p->value) ||
            !p->moment2.same_shape(p->value)) {
            throw DimensionError("parameter block " + p->name + " has mismatched buffers");
        }
        if (!p->grad.all_finite()) {
            throw TrainingError("non-finite gradient in parameter block " + p->name, p->name);
        }
    }

    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    const double decay = 1.0 - config.learning_rate * config.weight_decay;

    for (ParamBlock* p : params) {
        auto value = p->value.values();
        auto grad = p->grad.values();
        auto m = p->moment1.values();
        auto v = p->moment2.values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] *= decay;
            value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
        }
        ++p->step_count;
    }
}

} // namespace giks::diffnet
