#pragma once

#include <functional>
#include <vector>

#include "choreo/tensor.hpp"

namespace choreo::nn {

class Graph;

// Handle into a Graph node. Cheap to copy; valid until the graph is cleared.
struct Var {
    Graph* g = nullptr;
    int id = -1;
    const Tensor& val() const;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// iteration is a valid topological order for backprop. One graph per training
// step; parameters are bound leaves whose grads accumulate into the owning
// Tensor's grad buffer.
class Graph {
public:
    Var param(Tensor& t);           // t must have a grad buffer
    Var input(Tensor t);            // constant leaf, no grad
    Var constant(double v) { return input(Tensor::scalar(v)); }

    const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    void backward(Var loss);        // loss must be scalar
    void clear();
    std::size_t size() const { return nodes_.size(); }

    // -- internals used by the op implementations --
    struct Node {
        Tensor value;
        std::vector<double> grad;            // empty until pulled
        std::vector<int> parents;
        std::function<void(Graph&, int)> back;
        Tensor* bound = nullptr;
        bool needs_grad = false;
    };
    int add(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> back);
    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    std::vector<double>& pull_grad(int id);  // allocate-on-demand grad buffer
    bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

private:
    std::vector<Node> nodes_;
};

// ---- differentiable ops ----

Var relu(Var x);
Var sigmoid(Var x);
Var tanh_op(Var x);
Var add(Var a, Var b);       // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);       // elementwise
Var scale(Var x, double c);
Var concat(const std::vector<Var>& xs);          // rank-1 concat
Var concat_channels(Var a, Var b);               // [Ca,H,W] + [Cb,H,W]
Var reshape(Var x, std::vector<int> shape);
Var embed_row(Var table, int row);               // table [V,D] -> [D]

// y = W x + b, W [M,N], x [N], b [M]
Var dense(Var x, Var w, Var b);

// x [C,T], w [O,C,K], b [O] -> [O,T'], T' = (T + 2 pad - K)/stride + 1
Var conv1d(Var x, Var w, Var b, int stride, int pad);

// x [C,H,W], w [O,C,KH,KW], b [O] -> [O,H',W']
Var conv2d(Var x, Var w, Var b, int stride, int pad);

// x [C,H,W], w [C,O,KH,KW], b [O] -> [O,H2,W2],
// H2 = (H-1) stride - 2 pad + KH + out_pad_h (gradient of conv2d, shape-wise)
Var conv2d_transpose(Var x, Var w, Var b, int stride, int pad, int out_pad_h = 0,
                     int out_pad_w = 0);

// -log softmax(logits)[target], max-stabilized; logits rank-1
Var softmax_nll(Var logits, int target);

// sum of |pred - target| over all entries; target is constant
Var l1_sum(Var pred, const Tensor& target);

// pred, target [N, 4J] rows of raw quaternions; pred rows are normalized
// internally, target rows must be (near-)unit. Returns the sum over frames
// and joints of the relative rotation angle 2 atan2(|vec|, |w|).
Var quat_geodesic_sum(Var pred, const Tensor& target);

// GRU cell (update/reset gates + candidate state), composed from primitives.
struct GruParamRefs {
    Var wi_r, wi_z, wi_n;   // [H, Din]
    Var wh_r, wh_z, wh_n;   // [H, H]
    Var bi_r, bi_z, bi_n;   // [H]
    Var bh_r, bh_z, bh_n;   // [H]
};
Var gru_cell(Var x, Var h, const GruParamRefs& p);

// ---- inference-only helpers ----
std::vector<double> softmax(const Tensor& logits);
int argmax(const std::vector<double>& v);

}  // namespace choreo::nn
