#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "choreo/params.hpp"

namespace choreo::nn {

enum class OptimizerKind { RmsProp, Adam };

// Per-parameter accumulator state for RMSprop/Adam. Accumulators are created
// lazily on the first step and keyed by parameter name.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::RmsProp;
    double lr = 1e-3;
    double decay = 0.99;                // rmsprop smoothing
    double beta1 = 0.9, beta2 = 0.999;  // adam
    double eps = 1e-8;
    std::int64_t step_count = 0;
    std::map<std::string, Tensor> sq;  // rmsprop v / adam v
    std::map<std::string, Tensor> m;   // adam first moment

    static OptimizerState rmsprop(double lr) { return {OptimizerKind::RmsProp, lr}; }
    static OptimizerState adam(double lr) {
        OptimizerState s;
        s.kind = OptimizerKind::Adam;
        s.lr = lr;
        return s;
    }
};

// In-place parameter update from the populated grad buffers. Grads are left
// untouched; the caller zeroes them.
void optimizer_step(OptimizerState& state, ParamSet& params);

// ReduceOnPlateau: after more than `patience` consecutive epochs without
// improvement the lr is multiplied by `factor` and the stall counter resets.
struct PlateauScheduler {
    int patience = 8;
    double factor = 0.9;
    double lr = 1e-3;
    double best_loss = 0.0;
    bool has_best = false;
    int stall = 0;

    PlateauScheduler(int patience_, double factor_, double lr_)
        : patience(patience_), factor(factor_), lr(lr_) {
        if (factor_ <= 0.0 || factor_ >= 1.0) throw ParameterError("plateau factor must be in (0,1)");
        if (patience_ < 0) throw ParameterError("plateau patience must be >= 0");
    }

    // returns the (possibly reduced) learning rate
    double step(double epoch_loss);
};

}  // namespace choreo::nn
