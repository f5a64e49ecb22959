#pragma once

#include <map>
#include <string>

#include "choreo/common.hpp"
#include "choreo/tensor.hpp"

namespace choreo::nn {

// Named parameter collection. std::map keeps iteration lexicographic, which
// pins the reduction/update order and makes training bit-reproducible.
class ParamSet {
public:
    Tensor& create(const std::string& name, std::vector<int> shape, bool trainable = true);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

    void zero_grads();
    std::size_t count() const;  // total scalar parameters

    std::map<std::string, Tensor>& tensors() { return tensors_; }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

private:
    std::map<std::string, Tensor> tensors_;
};

// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases stay zero
void init_uniform_fanin(Tensor& t, int fan_in, Rng& rng);

}  // namespace choreo::nn
