#include "choreo/optim.hpp"

#include <cmath>

namespace choreo::nn {

void optimizer_step(OptimizerState& state, ParamSet& params) {
    state.step_count += 1;
    double bc1 = 1.0, bc2 = 1.0;
    if (state.kind == OptimizerKind::Adam) {
        bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
        bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    }
    for (auto& [name, p] : params.tensors()) {
        if (!p.trainable()) continue;
        if (p.grad.size() != p.values.size())
            throw StateError("optimizer_step: missing grad for parameter '" + name + "'");
        Tensor& v = state.sq.try_emplace(name, Tensor(p.shape)).first->second;
        if (v.numel() != p.numel())
            throw StateError("optimizer_step: accumulator shape mismatch for '" + name + "'");
        if (state.kind == OptimizerKind::RmsProp) {
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                double g = p.grad[i];
                v.values[i] = state.decay * v.values[i] + (1.0 - state.decay) * g * g;
                p.values[i] -= state.lr * g / (std::sqrt(v.values[i]) + state.eps);
            }
        } else {
            Tensor& mm = state.m.try_emplace(name, Tensor(p.shape)).first->second;
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                double g = p.grad[i];
                mm.values[i] = state.beta1 * mm.values[i] + (1.0 - state.beta1) * g;
                v.values[i] = state.beta2 * v.values[i] + (1.0 - state.beta2) * g * g;
                double mhat = mm.values[i] / bc1;
                double vhat = v.values[i] / bc2;
                p.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
            }
        }
    }
}

double PlateauScheduler::step(double epoch_loss) {
    if (!has_best || epoch_loss < best_loss) {
        best_loss = epoch_loss;
        has_best = true;
        stall = 0;
    } else {
        stall += 1;
        if (stall > patience) {
            lr *= factor;
            stall = 0;
        }
    }
    return lr;
}

}  // namespace choreo::nn
