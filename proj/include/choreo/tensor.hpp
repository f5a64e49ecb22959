#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace choreo::nn {

// Dense row-major float64 tensor. `grad` is either empty or value-shaped;
// a parameter is "trainable" exactly when its grad buffer exists.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> v);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t numel() const { return values.size(); }
    int dim(std::size_t axis) const;
    std::size_t rank() const { return shape.size(); }

    bool trainable() const { return !grad.empty(); }
    void enable_grad();
    void zero_grad();

    double& at(int i) { return values[static_cast<std::size_t>(i)]; }
    double at(int i) const { return values[static_cast<std::size_t>(i)]; }
    double& at(int i, int j);
    double at(int i, int j) const;

    // throws ValidationError if any entry is non-finite
    void check_finite(const std::string& what) const;

    std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace choreo::nn
