#include "choreo/graph.hpp"

#include <algorithm>
#include <cmath>

#include "choreo/common.hpp"

namespace choreo::nn {

const Tensor& Var::val() const { return g->val(*this); }

int Graph::add(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> back) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.back = std::move(back);
    for (int p : n.parents)
        if (nodes_[static_cast<std::size_t>(p)].needs_grad) n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::param(Tensor& t) {
    if (!t.trainable()) throw StateError("param bound without grad buffer");
    Node n;
    n.value = t;  // snapshot; updates between steps rebuild the graph anyway
    n.bound = &t;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Tensor t) {
    Node n;
    n.value = std::move(t);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<double>& Graph::pull_grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
}

void Graph::backward(Var loss) {
    if (loss.g != this) throw StateError("backward: var from another graph");
    Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.numel() != 1) throw DimensionError("backward: loss is not scalar");
    pull_grad(loss.id)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty()) continue;
        if (n.back) n.back(*this, i);
        if (n.bound) {
            double* dst = n.bound->grad.data();
            const double* src = n.grad.data();
            for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
        }
    }
}

void Graph::clear() { nodes_.clear(); }

namespace {

Graph& same_graph(Var a, Var b) {
    if (a.g != b.g || a.g == nullptr) throw StateError("op: vars from different graphs");
    return *a.g;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

// last valid output index + 1 for input extent `num` (floor division, negative-safe)
inline int conv_upper(int limit, int stride, int num) {
    return num >= 0 ? std::min(limit, num / stride + 1) : 0;
}

}  // namespace

// ---- elementwise ----

static Var unary_ew(Var x, double (*f)(double), double (*df_from_out)(double, double)) {
    Graph& g = *x.g;
    Tensor out(x.val().shape);
    const auto& xv = x.val().values;
    for (std::size_t i = 0; i < xv.size(); ++i) out.values[i] = f(xv[i]);
    int id = g.add(std::move(out), {x.id}, [df_from_out](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        auto& dx = gg.pull_grad(n.parents[0]);
        const auto& xin = gg.node(n.parents[0]).value.values;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += n.grad[i] * df_from_out(n.value.values[i], xin[i]);
    });
    return {&g, id};
}

Var relu(Var x) {
    return unary_ew(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double, double xin) { return xin > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
    return unary_ew(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double y, double) { return y * (1.0 - y); });
}

Var tanh_op(Var x) {
    return unary_ew(
        x, [](double v) { return std::tanh(v); }, [](double y, double) { return 1.0 - y * y; });
}

static Var binary_ew(Var a, Var b, int mode) {  // 0 add, 1 sub, 2 mul
    Graph& g = same_graph(a, b);
    check_same_shape(a.val(), b.val(), mode == 0 ? "add" : mode == 1 ? "sub" : "mul");
    Tensor out(a.val().shape);
    const auto& av = a.val().values;
    const auto& bv = b.val().values;
    for (std::size_t i = 0; i < av.size(); ++i)
        out.values[i] = mode == 0 ? av[i] + bv[i] : mode == 1 ? av[i] - bv[i] : av[i] * bv[i];
    int id = g.add(std::move(out), {a.id, b.id}, [mode](Graph& gg, int self) {
        auto& n = gg.node(self);
        int pa = n.parents[0], pb = n.parents[1];
        const auto& av2 = gg.node(pa).value.values;
        const auto& bv2 = gg.node(pb).value.values;
        if (gg.needs(pa)) {
            auto& da = gg.pull_grad(pa);
            for (std::size_t i = 0; i < da.size(); ++i)
                da[i] += mode == 2 ? n.grad[i] * bv2[i] : n.grad[i];
        }
        if (gg.needs(pb)) {
            auto& db = gg.pull_grad(pb);
            for (std::size_t i = 0; i < db.size(); ++i)
                db[i] += mode == 0 ? n.grad[i] : mode == 1 ? -n.grad[i] : n.grad[i] * av2[i];
        }
    });
    return {&g, id};
}

Var add(Var a, Var b) { return binary_ew(a, b, 0); }
Var sub(Var a, Var b) { return binary_ew(a, b, 1); }
Var mul(Var a, Var b) { return binary_ew(a, b, 2); }

Var scale(Var x, double c) {
    Graph& g = *x.g;
    Tensor out(x.val().shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] = c * x.val().values[i];
    int id = g.add(std::move(out), {x.id}, [c](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        auto& dx = gg.pull_grad(n.parents[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += c * n.grad[i];
    });
    return {&g, id};
}

Var concat(const std::vector<Var>& xs) {
    if (xs.empty()) throw DimensionError("concat: empty input list");
    Graph& g = *xs[0].g;
    std::size_t total = 0;
    std::vector<int> parents;
    for (Var v : xs) {
        if (v.val().rank() != 1) throw DimensionError("concat: rank-1 inputs only");
        total += v.val().numel();
        parents.push_back(v.id);
    }
    Tensor out({static_cast<int>(total)});
    std::size_t off = 0;
    for (Var v : xs) {
        std::copy(v.val().values.begin(), v.val().values.end(), out.values.begin() + off);
        off += v.val().numel();
    }
    int id = g.add(std::move(out), std::move(parents), [](Graph& gg, int self) {
        auto& n = gg.node(self);
        std::size_t o = 0;
        for (int p : n.parents) {
            std::size_t len = gg.node(p).value.numel();
            if (gg.needs(p)) {
                auto& dp = gg.pull_grad(p);
                for (std::size_t i = 0; i < len; ++i) dp[i] += n.grad[o + i];
            }
            o += len;
        }
    });
    return {&g, id};
}

Var concat_channels(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Tensor& ta = a.val();
    const Tensor& tb = b.val();
    if (ta.rank() != 3 || tb.rank() != 3 || ta.shape[1] != tb.shape[1] || ta.shape[2] != tb.shape[2])
        throw DimensionError("concat_channels: incompatible " + ta.shape_str() + " vs " +
                             tb.shape_str());
    Tensor out({ta.shape[0] + tb.shape[0], ta.shape[1], ta.shape[2]});
    std::copy(ta.values.begin(), ta.values.end(), out.values.begin());
    std::copy(tb.values.begin(), tb.values.end(), out.values.begin() + ta.numel());
    int id = g.add(std::move(out), {a.id, b.id}, [](Graph& gg, int self) {
        auto& n = gg.node(self);
        std::size_t na = gg.node(n.parents[0]).value.numel();
        std::size_t nb = gg.node(n.parents[1]).value.numel();
        if (gg.needs(n.parents[0])) {
            auto& da = gg.pull_grad(n.parents[0]);
            for (std::size_t i = 0; i < na; ++i) da[i] += n.grad[i];
        }
        if (gg.needs(n.parents[1])) {
            auto& db = gg.pull_grad(n.parents[1]);
            for (std::size_t i = 0; i < nb; ++i) db[i] += n.grad[na + i];
        }
    });
    return {&g, id};
}

Var reshape(Var x, std::vector<int> shape) {
    Graph& g = *x.g;
    if (shape_numel(shape) != x.val().numel())
        throw DimensionError("reshape: numel mismatch " + x.val().shape_str());
    Tensor out(std::move(shape), x.val().values);
    int id = g.add(std::move(out), {x.id}, [](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        auto& dx = gg.pull_grad(n.parents[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += n.grad[i];
    });
    return {&g, id};
}

Var embed_row(Var table, int row) {
    Graph& g = *table.g;
    const Tensor& t = table.val();
    if (t.rank() != 2) throw DimensionError("embed_row: table must be rank-2");
    if (row < 0 || row >= t.shape[0])
        throw IndexError("embed_row: row " + std::to_string(row) + " out of range " +
                         std::to_string(t.shape[0]));
    int d = t.shape[1];
    Tensor out({d});
    std::copy(t.values.begin() + static_cast<std::size_t>(row) * d,
              t.values.begin() + static_cast<std::size_t>(row + 1) * d, out.values.begin());
    int id = g.add(std::move(out), {table.id}, [row, d](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        auto& dt = gg.pull_grad(n.parents[0]);
        for (int i = 0; i < d; ++i) dt[static_cast<std::size_t>(row) * d + i] += n.grad[i];
    });
    return {&g, id};
}

Var dense(Var x, Var w, Var b) {
    Graph& g = same_graph(x, w);
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    const Tensor& bv = b.val();
    if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1)
        throw DimensionError("dense: expected x[N], w[M,N], b[M]");
    int m = wv.shape[0], nn = wv.shape[1];
    if (xv.shape[0] != nn || bv.shape[0] != m)
        throw DimensionError("dense: shapes x" + xv.shape_str() + " w" + wv.shape_str() + " b" +
                             bv.shape_str());
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = bv.values[static_cast<std::size_t>(i)];
        const double* wr = wv.values.data() + static_cast<std::size_t>(i) * nn;
        for (int j = 0; j < nn; ++j) acc += wr[j] * xv.values[static_cast<std::size_t>(j)];
        out.values[static_cast<std::size_t>(i)] = acc;
    }
    int id = g.add(std::move(out), {x.id, w.id, b.id}, [m, nn](Graph& gg, int self) {
        auto& n = gg.node(self);
        int px = n.parents[0], pw = n.parents[1], pb = n.parents[2];
        const auto& xv2 = gg.node(px).value.values;
        const auto& wv2 = gg.node(pw).value.values;
        if (gg.needs(px)) {
            auto& dx = gg.pull_grad(px);
            for (int i = 0; i < m; ++i) {
                double gy = n.grad[static_cast<std::size_t>(i)];
                const double* wr = wv2.data() + static_cast<std::size_t>(i) * nn;
                for (int j = 0; j < nn; ++j) dx[static_cast<std::size_t>(j)] += gy * wr[j];
            }
        }
        if (gg.needs(pw)) {
            auto& dw = gg.pull_grad(pw);
            for (int i = 0; i < m; ++i) {
                double gy = n.grad[static_cast<std::size_t>(i)];
                double* dwr = dw.data() + static_cast<std::size_t>(i) * nn;
                for (int j = 0; j < nn; ++j) dwr[j] += gy * xv2[static_cast<std::size_t>(j)];
            }
        }
        if (gg.needs(pb)) {
            auto& db = gg.pull_grad(pb);
            for (int i = 0; i < m; ++i) db[static_cast<std::size_t>(i)] += n.grad[static_cast<std::size_t>(i)];
        }
    });
    return {&g, id};
}

// ---- convolutions ----

Var conv1d(Var x, Var w, Var b, int stride, int pad) {
    Graph& g = same_graph(x, w);
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    const Tensor& bv = b.val();
    if (xv.rank() != 2) throw DimensionError("conv1d: input must be [C,T], got " + xv.shape_str());
    if (wv.rank() != 3) throw DimensionError("conv1d: weights must be [O,C,K], got " + wv.shape_str());
    int C = xv.shape[0], T = xv.shape[1];
    int O = wv.shape[0], K = wv.shape[2];
    if (wv.shape[1] != C)
        throw DimensionError("conv1d: channel axis mismatch, input C=" + std::to_string(C) +
                             " weights C=" + std::to_string(wv.shape[1]));
    if (bv.rank() != 1 || bv.shape[0] != O)
        throw DimensionError("conv1d: bias axis mismatch, O=" + std::to_string(O));
    if (stride < 1) throw ParameterError("conv1d: stride must be >= 1");
    if (K > T + 2 * pad)
        throw DimensionError("conv1d: kernel K=" + std::to_string(K) + " exceeds padded T=" +
                             std::to_string(T + 2 * pad));
    int To = (T + 2 * pad - K) / stride + 1;
    Tensor out({O, To});
    for (int o = 0; o < O; ++o) {
        double* orow = out.values.data() + static_cast<std::size_t>(o) * To;
        std::fill(orow, orow + To, bv.values[static_cast<std::size_t>(o)]);
        for (int c = 0; c < C; ++c) {
            const double* irow = xv.values.data() + static_cast<std::size_t>(c) * T;
            const double* wrow = wv.values.data() + (static_cast<std::size_t>(o) * C + c) * K;
            for (int k = 0; k < K; ++k) {
                double wk = wrow[k];
                if (wk == 0.0) continue;
                int t0 = std::max(0, (pad - k + stride - 1) / stride);
                int t1 = conv_upper(To, stride, T - 1 + pad - k);
                for (int t = t0; t < t1; ++t) orow[t] += wk * irow[t * stride + k - pad];
            }
        }
    }
    auto back = [C, T, O, K, To, stride, pad](Graph& gg, int self) {
        auto& n = gg.node(self);
        int px = n.parents[0], pw = n.parents[1], pb = n.parents[2];
        const auto& xv2 = gg.node(px).value.values;
        const auto& wv2 = gg.node(pw).value.values;
        bool nx = gg.needs(px), nw = gg.needs(pw), nb = gg.needs(pb);
        double* dx = nullptr;
        double* dw = nullptr;
        if (nx) dx = gg.pull_grad(px).data();
        if (nw) dw = gg.pull_grad(pw).data();
        for (int o = 0; o < O; ++o) {
            const double* gorow = n.grad.data() + static_cast<std::size_t>(o) * To;
            if (nb) {
                double acc = 0.0;
                for (int t = 0; t < To; ++t) acc += gorow[t];
                gg.pull_grad(pb)[static_cast<std::size_t>(o)] += acc;
            }
            for (int c = 0; c < C; ++c) {
                const double* irow = xv2.data() + static_cast<std::size_t>(c) * T;
                const double* wrow = wv2.data() + (static_cast<std::size_t>(o) * C + c) * K;
                double* dxrow = nx ? dx + static_cast<std::size_t>(c) * T : nullptr;
                double* dwrow = nw ? dw + (static_cast<std::size_t>(o) * C + c) * K : nullptr;
                for (int k = 0; k < K; ++k) {
                    int t0 = std::max(0, (pad - k + stride - 1) / stride);
                    int t1 = conv_upper(To, stride, T - 1 + pad - k);
                    if (nw) {
                        double acc = 0.0;
                        for (int t = t0; t < t1; ++t) acc += gorow[t] * irow[t * stride + k - pad];
                        dwrow[k] += acc;
                    }
                    if (nx) {
                        double wk = wrow[k];
                        for (int t = t0; t < t1; ++t) dxrow[t * stride + k - pad] += wk * gorow[t];
                    }
                }
            }
        }
    };
    int id = g.add(std::move(out), {x.id, w.id, b.id}, back);
    return {&g, id};
}

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    Graph& g = same_graph(x, w);
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    const Tensor& bv = b.val();
    if (xv.rank() != 3) throw DimensionError("conv2d: input must be [C,H,W], got " + xv.shape_str());
    if (wv.rank() != 4)
        throw DimensionError("conv2d: weights must be [O,C,KH,KW], got " + wv.shape_str());
    int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
    int O = wv.shape[0], KH = wv.shape[2], KW = wv.shape[3];
    if (wv.shape[1] != C) throw DimensionError("conv2d: channel axis mismatch");
    if (bv.rank() != 1 || bv.shape[0] != O) throw DimensionError("conv2d: bias axis mismatch");
    if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
    if (KH > H + 2 * pad || KW > W + 2 * pad)
        throw DimensionError("conv2d: kernel exceeds padded input");
    int Ho = (H + 2 * pad - KH) / stride + 1;
    int Wo = (W + 2 * pad - KW) / stride + 1;
    Tensor out({O, Ho, Wo});
    for (int o = 0; o < O; ++o) {
        double* oplane = out.values.data() + static_cast<std::size_t>(o) * Ho * Wo;
        std::fill(oplane, oplane + static_cast<std::size_t>(Ho) * Wo,
                  bv.values[static_cast<std::size_t>(o)]);
        for (int c = 0; c < C; ++c) {
            const double* iplane = xv.values.data() + static_cast<std::size_t>(c) * H * W;
            const double* wk = wv.values.data() + (static_cast<std::size_t>(o) * C + c) * KH * KW;
            for (int ky = 0; ky < KH; ++ky) {
                int y0 = std::max(0, (pad - ky + stride - 1) / stride);
                int y1 = conv_upper(Ho, stride, H - 1 + pad - ky);
                for (int kx = 0; kx < KW; ++kx) {
                    double wv0 = wk[ky * KW + kx];
                    if (wv0 == 0.0) continue;
                    int x0 = std::max(0, (pad - kx + stride - 1) / stride);
                    int x1 = conv_upper(Wo, stride, W - 1 + pad - kx);
                    for (int oy = y0; oy < y1; ++oy) {
                        const double* irow = iplane + static_cast<std::size_t>(oy * stride + ky - pad) * W;
                        double* orow = oplane + static_cast<std::size_t>(oy) * Wo;
                        for (int ox = x0; ox < x1; ++ox)
                            orow[ox] += wv0 * irow[ox * stride + kx - pad];
                    }
                }
            }
        }
    }
    auto back = [C, H, W, O, KH, KW, Ho, Wo, stride, pad](Graph& gg, int self) {
        auto& n = gg.node(self);
        int px = n.parents[0], pw = n.parents[1], pb = n.parents[2];
        const auto& xv2 = gg.node(px).value.values;
        const auto& wv2 = gg.node(pw).value.values;
        bool nx = gg.needs(px), nw = gg.needs(pw), nb = gg.needs(pb);
        double* dx = nx ? gg.pull_grad(px).data() : nullptr;
        double* dw = nw ? gg.pull_grad(pw).data() : nullptr;
        for (int o = 0; o < O; ++o) {
            const double* gplane = n.grad.data() + static_cast<std::size_t>(o) * Ho * Wo;
            if (nb) {
                double acc = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) acc += gplane[i];
                gg.pull_grad(pb)[static_cast<std::size_t>(o)] += acc;
            }
            for (int c = 0; c < C; ++c) {
                const double* iplane = xv2.data() + static_cast<std::size_t>(c) * H * W;
                const double* wk = wv2.data() + (static_cast<std::size_t>(o) * C + c) * KH * KW;
                double* dxplane = nx ? dx + static_cast<std::size_t>(c) * H * W : nullptr;
                double* dwk = nw ? dw + (static_cast<std::size_t>(o) * C + c) * KH * KW : nullptr;
                for (int ky = 0; ky < KH; ++ky) {
                    int y0 = std::max(0, (pad - ky + stride - 1) / stride);
                    int y1 = conv_upper(Ho, stride, H - 1 + pad - ky);
                    for (int kx = 0; kx < KW; ++kx) {
                        int x0 = std::max(0, (pad - kx + stride - 1) / stride);
                        int x1 = conv_upper(Wo, stride, W - 1 + pad - kx);
                        double wacc = 0.0;
                        double wv0 = wk[ky * KW + kx];
                        for (int oy = y0; oy < y1; ++oy) {
                            const double* irow = iplane + static_cast<std::size_t>(oy * stride + ky - pad) * W;
                            double* dxrow = nx ? dxplane + static_cast<std::size_t>(oy * stride + ky - pad) * W : nullptr;
                            const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                            for (int ox = x0; ox < x1; ++ox) {
                                double gv = grow[ox];
                                if (nw) wacc += gv * irow[ox * stride + kx - pad];
                                if (nx) dxrow[ox * stride + kx - pad] += wv0 * gv;
                            }
                        }
                        if (nw) dwk[ky * KW + kx] += wacc;
                    }
                }
            }
        }
    };
    int id = g.add(std::move(out), {x.id, w.id, b.id}, back);
    return {&g, id};
}

Var conv2d_transpose(Var x, Var w, Var b, int stride, int pad, int out_pad_h, int out_pad_w) {
    Graph& g = same_graph(x, w);
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    const Tensor& bv = b.val();
    if (xv.rank() != 3)
        throw DimensionError("conv2d_transpose: input must be [C,H,W], got " + xv.shape_str());
    if (wv.rank() != 4)
        throw DimensionError("conv2d_transpose: weights must be [C,O,KH,KW], got " + wv.shape_str());
    int C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
    int O = wv.shape[1], KH = wv.shape[2], KW = wv.shape[3];
    if (wv.shape[0] != C) throw DimensionError("conv2d_transpose: channel axis mismatch");
    if (bv.rank() != 1 || bv.shape[0] != O) throw DimensionError("conv2d_transpose: bias axis mismatch");
    if (stride < 1) throw ParameterError("conv2d_transpose: stride must be >= 1");
    int Ho = (H - 1) * stride - 2 * pad + KH + out_pad_h;
    int Wo = (W - 1) * stride - 2 * pad + KW + out_pad_w;
    if (Ho < 1 || Wo < 1) throw DimensionError("conv2d_transpose: empty output");
    Tensor out({O, Ho, Wo});
    for (int o = 0; o < O; ++o) {
        double* oplane = out.values.data() + static_cast<std::size_t>(o) * Ho * Wo;
        std::fill(oplane, oplane + static_cast<std::size_t>(Ho) * Wo,
                  bv.values[static_cast<std::size_t>(o)]);
    }
    for (int c = 0; c < C; ++c) {
        const double* iplane = xv.values.data() + static_cast<std::size_t>(c) * H * W;
        for (int o = 0; o < O; ++o) {
            double* oplane = out.values.data() + static_cast<std::size_t>(o) * Ho * Wo;
            const double* wk = wv.values.data() + (static_cast<std::size_t>(c) * O + o) * KH * KW;
            for (int iy = 0; iy < H; ++iy) {
                for (int ky = 0; ky < KH; ++ky) {
                    int oy = iy * stride + ky - pad;
                    if (oy < 0 || oy >= Ho) continue;
                    const double* irow = iplane + static_cast<std::size_t>(iy) * W;
                    double* orow = oplane + static_cast<std::size_t>(oy) * Wo;
                    for (int kx = 0; kx < KW; ++kx) {
                        double wv0 = wk[ky * KW + kx];
                        if (wv0 == 0.0) continue;
                        int xlo = std::max(0, (pad - kx + stride - 1) / stride);
                        for (int ix = xlo; ix < W; ++ix) {
                            int ox = ix * stride + kx - pad;
                            if (ox >= Wo) break;
                            orow[ox] += wv0 * irow[ix];
                        }
                    }
                }
            }
        }
    }
    auto back = [C, H, W, O, KH, KW, Ho, Wo, stride, pad](Graph& gg, int self) {
        auto& n = gg.node(self);
        int px = n.parents[0], pw = n.parents[1], pb = n.parents[2];
        const auto& xv2 = gg.node(px).value.values;
        const auto& wv2 = gg.node(pw).value.values;
        bool nx = gg.needs(px), nw = gg.needs(pw), nb = gg.needs(pb);
        double* dx = nx ? gg.pull_grad(px).data() : nullptr;
        double* dw = nw ? gg.pull_grad(pw).data() : nullptr;
        if (nb) {
            auto& db = gg.pull_grad(pb);
            for (int o = 0; o < O; ++o) {
                const double* gplane = n.grad.data() + static_cast<std::size_t>(o) * Ho * Wo;
                double acc = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) acc += gplane[i];
                db[static_cast<std::size_t>(o)] += acc;
            }
        }
        for (int c = 0; c < C; ++c) {
            const double* iplane = xv2.data() + static_cast<std::size_t>(c) * H * W;
            double* dxplane = nx ? dx + static_cast<std::size_t>(c) * H * W : nullptr;
            for (int o = 0; o < O; ++o) {
                const double* gplane = n.grad.data() + static_cast<std::size_t>(o) * Ho * Wo;
                const double* wk = wv2.data() + (static_cast<std::size_t>(c) * O + o) * KH * KW;
                double* dwk = nw ? dw + (static_cast<std::size_t>(c) * O + o) * KH * KW : nullptr;
                for (int iy = 0; iy < H; ++iy) {
                    for (int ky = 0; ky < KH; ++ky) {
                        int oy = iy * stride + ky - pad;
                        if (oy < 0 || oy >= Ho) continue;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * W;
                        double* dxrow = nx ? dxplane + static_cast<std::size_t>(iy) * W : nullptr;
                        const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                        for (int kx = 0; kx < KW; ++kx) {
                            double wv0 = wk[ky * KW + kx];
                            double wacc = 0.0;
                            int xlo = std::max(0, (pad - kx + stride - 1) / stride);
                            for (int ix = xlo; ix < W; ++ix) {
                                int ox = ix * stride + kx - pad;
                                if (ox >= Wo) break;
                                double gv = grow[ox];
                                if (nw) wacc += gv * irow[ix];
                                if (nx) dxrow[ix] += wv0 * gv;
                            }
                            if (nw) dwk[ky * KW + kx] += wacc;
                        }
                    }
                }
            }
        }
    };
    int id = g.add(std::move(out), {x.id, w.id, b.id}, back);
    return {&g, id};
}

// ---- losses ----

Var softmax_nll(Var logits, int target) {
    Graph& g = *logits.g;
    const Tensor& lv = logits.val();
    if (lv.rank() != 1) throw DimensionError("softmax_nll: logits must be rank-1");
    int V = lv.shape[0];
    if (target < 0 || target >= V)
        throw IndexError("softmax_nll: target " + std::to_string(target) + " out of range " +
                         std::to_string(V));
    double mx = *std::max_element(lv.values.begin(), lv.values.end());
    double lse = 0.0;
    for (double v : lv.values) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    Tensor out = Tensor::scalar(lse - lv.values[static_cast<std::size_t>(target)]);
    int id = g.add(std::move(out), {logits.id}, [target, mx, lse](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        (void)mx;
        auto& dl = gg.pull_grad(n.parents[0]);
        const auto& lv2 = gg.node(n.parents[0]).value.values;
        double gy = n.grad[0];
        for (std::size_t i = 0; i < dl.size(); ++i) {
            double p = std::exp(lv2[i] - lse);
            dl[i] += gy * (p - (static_cast<int>(i) == target ? 1.0 : 0.0));
        }
    });
    return {&g, id};
}

Var l1_sum(Var pred, const Tensor& target) {
    Graph& g = *pred.g;
    check_same_shape(pred.val(), target, "l1_sum");
    double acc = 0.0;
    const auto& pv = pred.val().values;
    for (std::size_t i = 0; i < pv.size(); ++i) acc += std::abs(pv[i] - target.values[i]);
    Tensor tcopy = target;
    int id = g.add(Tensor::scalar(acc), {pred.id}, [t = std::move(tcopy)](Graph& gg, int self) {
        auto& n = gg.node(self);
        if (!gg.needs(n.parents[0])) return;
        auto& dp = gg.pull_grad(n.parents[0]);
        const auto& pv2 = gg.node(n.parents[0]).value.values;
        double gy = n.grad[0];
        for (std::size_t i = 0; i < dp.size(); ++i) {
            double d = pv2[i] - t.values[i];
            dp[i] += gy * (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0);
        }
    });
    return {&g, id};
}

namespace {

// rel = p (x) conj(gt); returns angle and fills d(angle)/d(p_raw) if dp != nullptr
double quat_pair_angle(const double* praw, const double* gt, double* dp) {
    double n2 = praw[0] * praw[0] + praw[1] * praw[1] + praw[2] * praw[2] + praw[3] * praw[3];
    double n = std::sqrt(n2);
    double q[4];
    if (n < 1e-12) {
        q[0] = 1.0;
        q[1] = q[2] = q[3] = 0.0;
    } else {
        for (int i = 0; i < 4; ++i) q[i] = praw[i] / n;
    }
    // conj(gt)
    double r[4] = {gt[0], -gt[1], -gt[2], -gt[3]};
    double gn = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
    if (gn > 1e-12)
        for (int i = 0; i < 4; ++i) r[i] /= gn;
    // rel = q (x) r, linear in q: rel_i = M[i][j] q_j
    double M[4][4] = {{r[0], -r[1], -r[2], -r[3]},
                      {r[1], r[0], r[3], -r[2]},
                      {r[2], -r[3], r[0], r[1]},
                      {r[3], r[2], -r[1], r[0]}};
    double rel[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) rel[i] += M[i][j] * q[j];
    double a = std::sqrt(rel[1] * rel[1] + rel[2] * rel[2] + rel[3] * rel[3]);
    double b = std::abs(rel[0]);
    double theta = 2.0 * std::atan2(a, b);
    if (dp) {
        double den = a * a + b * b;  // == 1 for unit inputs, kept general
        double drel[4] = {0, 0, 0, 0};
        if (den > 1e-300) {
            double sw = rel[0] >= 0.0 ? 1.0 : -1.0;
            drel[0] = (-2.0 * a / den) * sw;
            if (a > 1e-12) {
                double coef = 2.0 * b / den / a;
                drel[1] = coef * rel[1];
                drel[2] = coef * rel[2];
                drel[3] = coef * rel[3];
            }
        }
        double dq[4] = {0, 0, 0, 0};
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) dq[j] += M[i][j] * drel[i];
        if (n < 1e-12) {
            for (int j = 0; j < 4; ++j) dp[j] = 0.0;
        } else {
            double qdotdq = q[0] * dq[0] + q[1] * dq[1] + q[2] * dq[2] + q[3] * dq[3];
            for (int j = 0; j < 4; ++j) dp[j] = (dq[j] - q[j] * qdotdq) / n;
        }
    }
    return theta;
}

}  // namespace

Var quat_geodesic_sum(Var pred, const Tensor& target) {
    Graph& g = *pred.g;
    const Tensor& pv = pred.val();
    check_same_shape(pv, target, "quat_geodesic_sum");
    if (pv.rank() != 2 || pv.shape[1] % 4 != 0)
        throw DimensionError("quat_geodesic_sum: expected [N, 4J], got " + pv.shape_str());
    int N = pv.shape[0], Q = pv.shape[1] / 4;
    double total = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < Q; ++j) {
            std::size_t off = (static_cast<std::size_t>(i) * pv.shape[1]) + 4 * j;
            total += quat_pair_angle(pv.values.data() + off, target.values.data() + off, nullptr);
        }
    Tensor tcopy = target;
    int id = g.add(Tensor::scalar(total), {pred.id},
                   [t = std::move(tcopy), N, Q](Graph& gg, int self) {
                       auto& n = gg.node(self);
                       if (!gg.needs(n.parents[0])) return;
                       auto& dp = gg.pull_grad(n.parents[0]);
                       const auto& pv2 = gg.node(n.parents[0]).value;
                       double gy = n.grad[0];
                       double dlocal[4];
                       for (int i = 0; i < N; ++i)
                           for (int j = 0; j < Q; ++j) {
                               std::size_t off = static_cast<std::size_t>(i) * pv2.shape[1] + 4 * j;
                               quat_pair_angle(pv2.values.data() + off, t.values.data() + off, dlocal);
                               for (int k = 0; k < 4; ++k) dp[off + k] += gy * dlocal[k];
                           }
                   });
    return {&g, id};
}

Var gru_cell(Var x, Var h, const GruParamRefs& p) {
    Var r = sigmoid(add(dense(x, p.wi_r, p.bi_r), dense(h, p.wh_r, p.bh_r)));
    Var z = sigmoid(add(dense(x, p.wi_z, p.bi_z), dense(h, p.wh_z, p.bh_z)));
    Var n = tanh_op(add(dense(x, p.wi_n, p.bi_n), mul(r, dense(h, p.wh_n, p.bh_n))));
    return add(n, mul(z, sub(h, n)));
}

std::vector<double> softmax(const Tensor& logits) {
    double mx = *std::max_element(logits.values.begin(), logits.values.end());
    std::vector<double> out(logits.values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(logits.values[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace choreo::nn
