#include "choreo/tensor.hpp"

#include <cmath>

#include "choreo/common.hpp"

namespace choreo::nn {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimensionError("negative dimension " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), values(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_numel(shape))
        throw DimensionError("tensor data size " + std::to_string(values.size()) +
                             " does not match shape " + shape_str());
}

int Tensor::dim(std::size_t axis) const {
    if (axis >= shape.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str());
    return shape[axis];
}

void Tensor::enable_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) grad.assign(values.size(), 0.0);
}

double& Tensor::at(int i, int j) {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape.back()) +
                  static_cast<std::size_t>(j)];
}

double Tensor::at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape.back()) +
                  static_cast<std::size_t>(j)];
}

void Tensor::check_finite(const std::string& what) const {
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError(what + ": non-finite value");
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace choreo::nn
