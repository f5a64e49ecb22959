#include "choreo/params.hpp"

#include <cmath>

namespace choreo::nn {

Tensor& ParamSet::create(const std::string& name, std::vector<int> shape, bool trainable) {
    if (tensors_.count(name)) throw StateError("parameter '" + name + "' already exists");
    Tensor t(std::move(shape));
    if (trainable) t.enable_grad();
    return tensors_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw StateError("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw StateError("unknown parameter '" + name + "'");
    return it->second;
}

void ParamSet::zero_grads() {
    for (auto& [name, t] : tensors_) t.zero_grad();
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) n += t.numel();
    return n;
}

void init_uniform_fanin(Tensor& t, int fan_in, Rng& rng) {
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : t.values) v = rng.uniform(-bound, bound);
}

}  // namespace choreo::nn
