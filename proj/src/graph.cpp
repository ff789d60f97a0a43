#include "crosslink/graph.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "crosslink/simd/kernels.hpp"

namespace crosslink {
namespace {

const simd::Kernels& K() { return simd::active(); }

[[noreturn]] void fail(const Node& node, const std::string& what) {
    throw std::invalid_argument("node '" + node.name + "': " + what);
}

void require_last_dim(const Node& node, const Tensor& x, std::int64_t want) {
    if (x.shape.empty() || x.last_dim() != want)
        fail(node, "expected trailing feature dim " + std::to_string(want) +
                       ", got shape " + x.shape_str());
}

// y = x @ W^T + b over the trailing axis.
Tensor dense_forward(const Node& node, const Tensor& x) {
    require_last_dim(node, x, node.in_features);
    const std::int64_t rows = x.rows();
    const int in = node.in_features, out = node.out_features;
    std::vector<std::int64_t> yshape = x.shape;
    yshape.back() = out;
    Tensor y(yshape);
    K().gemm_nt(x.data.data(), node.params[0].data.data(), y.data.data(),
                int(rows), in, out, false);
    const double* b = node.params[1].data.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        double* yr = y.row(r);
        for (int c = 0; c < out; ++c) yr[c] += b[c];
    }
    return y;
}

Tensor dense_backward(Node& node, const Tensor& x, const Tensor& gy) {
    const std::int64_t rows = x.rows();
    const int in = node.in_features, out = node.out_features;
    Tensor gx(x.shape);
    K().gemm_nn(gy.data.data(), node.params[0].data.data(), gx.data.data(),
                int(rows), out, in, false);
    K().gemm_tn(gy.data.data(), x.data.data(), node.grads[0].data.data(),
                out, int(rows), in, true);
    double* gb = node.grads[1].data.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* gr = gy.row(r);
        for (int c = 0; c < out; ++c) gb[c] += gr[c];
    }
    return gx;
}

}  // namespace

Node& Graph::append(Node n) {
    if (n.name.empty()) n.name = "n" + std::to_string(nodes.size());
    nodes.push_back(std::move(n));
    return nodes.back();
}

Graph& Graph::dense(int in, int out, const std::string& label) {
    Node n;
    n.kind = NodeKind::Dense;
    n.name = label;
    n.in_features = in;
    n.out_features = out;
    n.params = {Tensor({out, in}), Tensor({out})};
    n.grads = {Tensor({out, in}), Tensor({out})};
    append(std::move(n));
    return *this;
}

Graph& Graph::conv1x1(int in, int out, const std::string& label) {
    dense(in, out, label);
    nodes.back().kind = NodeKind::Conv1x1;
    return *this;
}

Graph& Graph::relu(const std::string& label) {
    Node n;
    n.kind = NodeKind::Relu;
    n.name = label;
    append(std::move(n));
    return *this;
}

Graph& Graph::sigmoid(const std::string& label) {
    Node n;
    n.kind = NodeKind::Sigmoid;
    n.name = label;
    append(std::move(n));
    return *this;
}

Graph& Graph::softmax(const std::string& label) {
    Node n;
    n.kind = NodeKind::Softmax;
    n.name = label;
    append(std::move(n));
    return *this;
}

Graph& Graph::batch_norm(int features, const std::string& label) {
    Node n;
    n.kind = NodeKind::BatchNorm;
    n.name = label;
    n.in_features = n.out_features = features;
    n.params = {Tensor({features}), Tensor({features})};
    n.grads = {Tensor({features}), Tensor({features})};
    n.running_mean.assign(std::size_t(features), 0.0);
    n.running_var.assign(std::size_t(features), 1.0);
    append(std::move(n));
    return *this;
}

Graph& Graph::layer_norm(int features, const std::string& label) {
    Node n;
    n.kind = NodeKind::LayerNorm;
    n.name = label;
    n.in_features = n.out_features = features;
    n.params = {Tensor({features}), Tensor({features})};
    n.grads = {Tensor({features}), Tensor({features})};
    append(std::move(n));
    return *this;
}

Graph& Graph::multi_head_attention(int embed, int heads,
                                   const std::string& label) {
    if (embed % heads != 0)
        throw std::invalid_argument(
            "attention embed width must divide evenly into heads");
    Node n;
    n.kind = NodeKind::MultiHeadAttention;
    n.name = label;
    n.in_features = n.out_features = embed;
    n.heads = heads;
    // Wq, bq, Wk, bk, Wv, bv, Wo, bo
    for (int i = 0; i < 4; ++i) {
        n.params.emplace_back(Tensor({embed, embed}));
        n.params.emplace_back(Tensor({embed}));
        n.grads.emplace_back(Tensor({embed, embed}));
        n.grads.emplace_back(Tensor({embed}));
    }
    append(std::move(n));
    return *this;
}

Graph& Graph::residual_add(int skip_from, const std::string& label) {
    if (skip_from < -1 || skip_from >= int(nodes.size()))
        throw std::invalid_argument("residual skip index out of range");
    Node n;
    n.kind = NodeKind::ResidualAdd;
    n.name = label;
    n.skip_from = skip_from;
    append(std::move(n));
    return *this;
}

Graph& Graph::reshape(std::vector<std::int64_t> trailing,
                      const std::string& label) {
    Node n;
    n.kind = NodeKind::Reshape;
    n.name = label;
    n.reshape_to = std::move(trailing);
    append(std::move(n));
    return *this;
}

Graph& Graph::unit_power_norm(PowerScope scope, const std::string& label) {
    Node n;
    n.kind = NodeKind::UnitPowerNorm;
    n.name = label;
    n.scope = scope;
    n.eps = 1e-12;
    append(std::move(n));
    return *this;
}

void Graph::init_params(Rng& rng) {
    for (auto& node : nodes) {
        switch (node.kind) {
            case NodeKind::Dense:
            case NodeKind::Conv1x1: {
                const double bound = 1.0 / std::sqrt(double(node.in_features));
                for (auto& w : node.params[0].data)
                    w = rng.uniform(-bound, bound);
                node.params[1].fill(0.0);
                break;
            }
            case NodeKind::MultiHeadAttention: {
                const double bound = 1.0 / std::sqrt(double(node.in_features));
                for (int i = 0; i < 4; ++i) {
                    for (auto& w : node.params[std::size_t(2 * i)].data)
                        w = rng.uniform(-bound, bound);
                    node.params[std::size_t(2 * i + 1)].fill(0.0);
                }
                break;
            }
            case NodeKind::BatchNorm:
            case NodeKind::LayerNorm:
                node.params[0].fill(1.0);
                node.params[1].fill(0.0);
                break;
            default:
                break;
        }
    }
}

Tensor Graph::forward(const Tensor& x, Mode mode) {
    const bool train = mode == Mode::Train;
    std::vector<Tensor> outs;
    outs.reserve(nodes.size());

    for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
        Node& node = nodes[idx];
        const Tensor& cur = idx == 0 ? x : outs[idx - 1];
        Tensor next;
        switch (node.kind) {
            case NodeKind::Dense:
            case NodeKind::Conv1x1:
                next = dense_forward(node, cur);
                break;

            case NodeKind::Relu: {
                next = Tensor(cur.shape);
                K().relu_fwd(cur.data.data(), next.data.data(),
                             cur.data.size());
                break;
            }

            case NodeKind::Sigmoid: {
                next = Tensor(cur.shape);
                for (std::size_t i = 0; i < cur.data.size(); ++i)
                    next.data[i] = 1.0 / (1.0 + std::exp(-cur.data[i]));
                break;
            }

            case NodeKind::Softmax: {
                next = Tensor(cur.shape);
                const std::int64_t rows = cur.rows(), c = cur.last_dim();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* xr = cur.row(r);
                    double* yr = next.row(r);
                    double mx = xr[0];
                    for (std::int64_t j = 1; j < c; ++j)
                        mx = std::max(mx, xr[j]);
                    double sum = 0.0;
                    for (std::int64_t j = 0; j < c; ++j) {
                        yr[j] = std::exp(xr[j] - mx);
                        sum += yr[j];
                    }
                    const double inv = 1.0 / sum;
                    for (std::int64_t j = 0; j < c; ++j) yr[j] *= inv;
                }
                break;
            }

            case NodeKind::BatchNorm: {
                require_last_dim(node, cur, node.in_features);
                const std::int64_t rows = cur.rows();
                const int c = node.in_features;
                next = Tensor(cur.shape);
                const double* gamma = node.params[0].data.data();
                const double* beta = node.params[1].data.data();
                if (mode == Mode::Infer) {
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* xr = cur.row(r);
                        double* yr = next.row(r);
                        for (int j = 0; j < c; ++j) {
                            const double inv = 1.0 /
                                std::sqrt(node.running_var[std::size_t(j)] +
                                          node.eps);
                            yr[j] = gamma[j] * (xr[j] -
                                node.running_mean[std::size_t(j)]) * inv +
                                beta[j];
                        }
                    }
                } else {
                    if (rows == 0) fail(node, "empty batch");
                    std::vector<double> mean(std::size_t(c), 0.0),
                        var(std::size_t(c), 0.0);
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* xr = cur.row(r);
                        for (int j = 0; j < c; ++j) mean[std::size_t(j)] += xr[j];
                    }
                    for (int j = 0; j < c; ++j) mean[std::size_t(j)] /= double(rows);
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* xr = cur.row(r);
                        for (int j = 0; j < c; ++j) {
                            const double d = xr[j] - mean[std::size_t(j)];
                            var[std::size_t(j)] += d * d;
                        }
                    }
                    for (int j = 0; j < c; ++j) var[std::size_t(j)] /= double(rows);

                    Tensor xhat(cur.shape);
                    Tensor invstd({c});
                    for (int j = 0; j < c; ++j)
                        invstd.data[std::size_t(j)] =
                            1.0 / std::sqrt(var[std::size_t(j)] + node.eps);
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* xr = cur.row(r);
                        double* hr = xhat.row(r);
                        double* yr = next.row(r);
                        for (int j = 0; j < c; ++j) {
                            hr[j] = (xr[j] - mean[std::size_t(j)]) *
                                    invstd.data[std::size_t(j)];
                            yr[j] = gamma[j] * hr[j] + beta[j];
                        }
                    }
                    if (train) {
                        const double keep = node.momentum;
                        for (int j = 0; j < c; ++j) {
                            node.running_mean[std::size_t(j)] =
                                keep * node.running_mean[std::size_t(j)] +
                                (1.0 - keep) * mean[std::size_t(j)];
                            node.running_var[std::size_t(j)] =
                                keep * node.running_var[std::size_t(j)] +
                                (1.0 - keep) * var[std::size_t(j)];
                        }
                        node.aux = {std::move(xhat), std::move(invstd)};
                    }
                }
                break;
            }

            case NodeKind::LayerNorm: {
                require_last_dim(node, cur, node.in_features);
                const std::int64_t rows = cur.rows();
                const int c = node.in_features;
                next = Tensor(cur.shape);
                Tensor xhat(cur.shape);
                Tensor invstd({rows});
                const double* gamma = node.params[0].data.data();
                const double* beta = node.params[1].data.data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* xr = cur.row(r);
                    double mean = 0.0;
                    for (int j = 0; j < c; ++j) mean += xr[j];
                    mean /= double(c);
                    double var = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double d = xr[j] - mean;
                        var += d * d;
                    }
                    var /= double(c);
                    const double inv = 1.0 / std::sqrt(var + node.eps);
                    invstd.data[std::size_t(r)] = inv;
                    double* hr = xhat.row(r);
                    double* yr = next.row(r);
                    for (int j = 0; j < c; ++j) {
                        hr[j] = (xr[j] - mean) * inv;
                        yr[j] = gamma[j] * hr[j] + beta[j];
                    }
                }
                if (train) node.aux = {std::move(xhat), std::move(invstd)};
                break;
            }

            case NodeKind::MultiHeadAttention: {
                if (cur.shape.size() != 3)
                    fail(node, "attention expects a [batch, seq, embed] tensor, got " +
                                   cur.shape_str());
                require_last_dim(node, cur, node.in_features);
                const std::int64_t b = cur.shape[0], s = cur.shape[1];
                const int e = node.in_features, h = node.heads, dh = e / h;
                const double scale = 1.0 / std::sqrt(double(dh));

                Node proj;  // reuse the dense helper for the four projections
                proj.name = node.name;
                proj.in_features = e;
                proj.out_features = e;
                auto project = [&](int pi) {
                    proj.params = {node.params[std::size_t(2 * pi)],
                                   node.params[std::size_t(2 * pi + 1)]};
                    return dense_forward(proj, cur);
                };
                Tensor q = project(0), k = project(1), v = project(2);

                Tensor attn({b, h, s, s});
                Tensor ctx({b, s, e});
                for (std::int64_t bi = 0; bi < b; ++bi) {
                    for (int a = 0; a < h; ++a) {
                        double* pw = attn.data.data() +
                                     ((bi * h + a) * s) * s;
                        for (std::int64_t si = 0; si < s; ++si) {
                            const double* qs =
                                q.data.data() + (bi * s + si) * e + a * dh;
                            double* row = pw + si * s;
                            double mx = -1e300;
                            for (std::int64_t ti = 0; ti < s; ++ti) {
                                const double* kt = k.data.data() +
                                                   (bi * s + ti) * e + a * dh;
                                double acc = 0.0;
                                for (int d = 0; d < dh; ++d)
                                    acc += qs[d] * kt[d];
                                row[ti] = acc * scale;
                                mx = std::max(mx, row[ti]);
                            }
                            double sum = 0.0;
                            for (std::int64_t ti = 0; ti < s; ++ti) {
                                row[ti] = std::exp(row[ti] - mx);
                                sum += row[ti];
                            }
                            const double inv = 1.0 / sum;
                            for (std::int64_t ti = 0; ti < s; ++ti)
                                row[ti] *= inv;
                            double* cs = ctx.data.data() +
                                         (bi * s + si) * e + a * dh;
                            for (int d = 0; d < dh; ++d) cs[d] = 0.0;
                            for (std::int64_t ti = 0; ti < s; ++ti) {
                                const double w = row[ti];
                                const double* vt = v.data.data() +
                                                   (bi * s + ti) * e + a * dh;
                                for (int d = 0; d < dh; ++d)
                                    cs[d] += w * vt[d];
                            }
                        }
                    }
                }
                proj.params = {node.params[6], node.params[7]};
                next = dense_forward(proj, ctx);
                if (train)
                    node.aux = {std::move(q), std::move(k), std::move(v),
                                std::move(attn), std::move(ctx)};
                break;
            }

            case NodeKind::ResidualAdd: {
                const Tensor& other = node.skip_from == -1
                                          ? x
                                          : outs[std::size_t(node.skip_from)];
                if (!cur.same_shape(other))
                    fail(node, "residual shape mismatch " + cur.shape_str() +
                                   " vs " + other.shape_str());
                next = Tensor(cur.shape);
                K().add(cur.data.data(), other.data.data(), next.data.data(),
                        cur.data.size());
                break;
            }

            case NodeKind::Reshape: {
                if (cur.shape.empty()) fail(node, "reshape of a scalar tensor");
                std::int64_t want = 1;
                for (auto d : node.reshape_to) want *= d;
                const std::int64_t have =
                    cur.shape[0] == 0 ? 0 : cur.size() / cur.shape[0];
                if (want != have)
                    fail(node, "reshape target " +
                                   Tensor::shape_str(node.reshape_to) +
                                   " incompatible with input " +
                                   cur.shape_str());
                std::vector<std::int64_t> ns;
                ns.push_back(cur.shape[0]);
                for (auto d : node.reshape_to) ns.push_back(d);
                next = cur;
                next.shape = std::move(ns);
                break;
            }

            case NodeKind::UnitPowerNorm: {
                if (cur.data.size() % 2 != 0)
                    fail(node, "interleaved complex tensor must have even size");
                next = Tensor(cur.shape);
                if (node.scope == PowerScope::Batch) {
                    double gamma;
                    if (mode == Mode::Infer) {
                        gamma = std::sqrt(node.running_power + node.eps);
                    } else {
                        const double nc = double(cur.data.size()) / 2.0;
                        const double p =
                            K().sumsq(cur.data.data(), cur.data.size()) / nc;
                        gamma = std::sqrt(p + node.eps);
                        if (train) {
                            node.running_power = node.momentum *
                                                     node.running_power +
                                                 (1.0 - node.momentum) * p;
                            node.aux = {Tensor({1}, {gamma})};
                        }
                    }
                    next.data = cur.data;
                    K().scale(1.0 / gamma, next.data.data(), next.data.size());
                } else {
                    const std::int64_t rows = cur.shape[0];
                    const std::int64_t len =
                        rows == 0 ? 0 : cur.size() / rows;
                    Tensor gammas({rows});
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* xr = cur.data.data() + r * len;
                        const double nc = double(len) / 2.0;
                        const double p =
                            K().sumsq(xr, std::size_t(len)) / nc;
                        const double g = std::sqrt(p + node.eps);
                        gammas.data[std::size_t(r)] = g;
                        double* yr = next.data.data() + r * len;
                        for (std::int64_t i = 0; i < len; ++i)
                            yr[i] = xr[i] / g;
                    }
                    if (train) node.aux = {std::move(gammas)};
                }
                break;
            }
        }
        outs.push_back(std::move(next));
    }

    if (train) {
        input_cache_ = x;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            nodes[i].out_cache = std::move(outs[i]);
        has_cache_ = true;
        return nodes.empty() ? x : nodes.back().out_cache;
    }
    return nodes.empty() ? x : std::move(outs.back());
}

Tensor Graph::backward(const Tensor& grad_out) {
    if (!has_cache_)
        throw std::runtime_error(
            "graph backward called without a preceding training forward");
    const int n = int(nodes.size());
    std::vector<Tensor> gbuf(static_cast<std::size_t>(n));
    Tensor ginput(input_cache_.shape);
    if (n == 0) return grad_out;
    if (!grad_out.same_shape(nodes.back().out_cache))
        throw std::invalid_argument(
            "output gradient shape mismatch: " + grad_out.shape_str() +
            " vs " + nodes.back().out_cache.shape_str());
    gbuf[std::size_t(n - 1)] = grad_out;

    auto add_into = [&](Tensor& dst, const Tensor& src) {
        if (dst.data.empty()) {
            dst = src;
        } else {
            K().axpy(1.0, src.data.data(), dst.data.data(), dst.data.size());
        }
    };

    for (int i = n - 1; i >= 0; --i) {
        Node& node = nodes[std::size_t(i)];
        Tensor gy = std::move(gbuf[std::size_t(i)]);
        if (gy.data.empty()) gy = Tensor(node.out_cache.shape);
        const Tensor& xin =
            i == 0 ? input_cache_ : nodes[std::size_t(i - 1)].out_cache;
        Tensor gx;

        switch (node.kind) {
            case NodeKind::Dense:
            case NodeKind::Conv1x1:
                gx = dense_backward(node, xin, gy);
                break;

            case NodeKind::Relu: {
                gx = Tensor(xin.shape);
                K().relu_bwd(xin.data.data(), gy.data.data(), gx.data.data(),
                             xin.data.size());
                break;
            }

            case NodeKind::Sigmoid: {
                const Tensor& y = node.out_cache;
                gx = Tensor(xin.shape);
                for (std::size_t j = 0; j < y.data.size(); ++j)
                    gx.data[j] = gy.data[j] * y.data[j] * (1.0 - y.data[j]);
                break;
            }

            case NodeKind::Softmax: {
                const Tensor& y = node.out_cache;
                gx = Tensor(xin.shape);
                const std::int64_t rows = y.rows(), c = y.last_dim();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* yr = y.row(r);
                    const double* gr = gy.row(r);
                    double dsum = 0.0;
                    for (std::int64_t j = 0; j < c; ++j) dsum += gr[j] * yr[j];
                    double* xr = gx.data.data() + r * c;
                    for (std::int64_t j = 0; j < c; ++j)
                        xr[j] = yr[j] * (gr[j] - dsum);
                }
                break;
            }

            case NodeKind::BatchNorm: {
                if (node.aux.size() != 2)
                    throw std::runtime_error(
                        "batch norm backward without cached statistics");
                const Tensor& xhat = node.aux[0];
                const Tensor& invstd = node.aux[1];
                const std::int64_t rows = xhat.rows();
                const int c = node.in_features;
                const double* gamma = node.params[0].data.data();
                double* ggamma = node.grads[0].data.data();
                double* gbeta = node.grads[1].data.data();
                std::vector<double> sum_g(std::size_t(c), 0.0),
                    sum_gh(std::size_t(c), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* gr = gy.row(r);
                    const double* hr = xhat.row(r);
                    for (int j = 0; j < c; ++j) {
                        sum_g[std::size_t(j)] += gr[j];
                        sum_gh[std::size_t(j)] += gr[j] * hr[j];
                    }
                }
                for (int j = 0; j < c; ++j) {
                    ggamma[j] += sum_gh[std::size_t(j)];
                    gbeta[j] += sum_g[std::size_t(j)];
                }
                gx = Tensor(xin.shape);
                const double invn = 1.0 / double(rows);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* gr = gy.row(r);
                    const double* hr = xhat.row(r);
                    double* xr = gx.row(r);
                    for (int j = 0; j < c; ++j) {
                        const double gh = gr[j] * gamma[j];
                        xr[j] = invstd.data[std::size_t(j)] *
                                (gh - invn * (gamma[j] * sum_g[std::size_t(j)] +
                                              hr[j] * gamma[j] *
                                                  sum_gh[std::size_t(j)]));
                    }
                }
                break;
            }

            case NodeKind::LayerNorm: {
                if (node.aux.size() != 2)
                    throw std::runtime_error(
                        "layer norm backward without cached statistics");
                const Tensor& xhat = node.aux[0];
                const Tensor& invstd = node.aux[1];
                const std::int64_t rows = xhat.rows();
                const int c = node.in_features;
                const double* gamma = node.params[0].data.data();
                double* ggamma = node.grads[0].data.data();
                double* gbeta = node.grads[1].data.data();
                gx = Tensor(xin.shape);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* gr = gy.row(r);
                    const double* hr = xhat.row(r);
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double gh = gr[j] * gamma[j];
                        m1 += gh;
                        m2 += gh * hr[j];
                        ggamma[j] += gr[j] * hr[j];
                        gbeta[j] += gr[j];
                    }
                    m1 /= double(c);
                    m2 /= double(c);
                    double* xr = gx.row(r);
                    const double inv = invstd.data[std::size_t(r)];
                    for (int j = 0; j < c; ++j) {
                        const double gh = gr[j] * gamma[j];
                        xr[j] = inv * (gh - m1 - hr[j] * m2);
                    }
                }
                break;
            }

            case NodeKind::MultiHeadAttention: {
                if (node.aux.size() != 5)
                    throw std::runtime_error(
                        "attention backward without cached activations");
                const Tensor& q = node.aux[0];
                const Tensor& k = node.aux[1];
                const Tensor& v = node.aux[2];
                const Tensor& attn = node.aux[3];
                const Tensor& ctx = node.aux[4];
                const std::int64_t b = xin.shape[0], s = xin.shape[1];
                const int e = node.in_features, h = node.heads, dh = e / h;
                const double scale = 1.0 / std::sqrt(double(dh));

                Node proj;
                proj.name = node.name;
                proj.in_features = e;
                proj.out_features = e;
                auto proj_backward = [&](int pi, const Tensor& input,
                                         const Tensor& g) {
                    proj.params = {node.params[std::size_t(2 * pi)],
                                   node.params[std::size_t(2 * pi + 1)]};
                    proj.grads = {std::move(node.grads[std::size_t(2 * pi)]),
                                  std::move(node.grads[std::size_t(2 * pi + 1)])};
                    Tensor gi = dense_backward(proj, input, g);
                    node.grads[std::size_t(2 * pi)] = std::move(proj.grads[0]);
                    node.grads[std::size_t(2 * pi + 1)] =
                        std::move(proj.grads[1]);
                    return gi;
                };

                Tensor gctx = proj_backward(3, ctx, gy);

                Tensor gq({b, s, e}), gk({b, s, e}), gv({b, s, e});
                std::vector<double> gp(std::size_t(s) * s);
                std::vector<double> gs(std::size_t(s) * s);
                for (std::int64_t bi = 0; bi < b; ++bi) {
                    for (int a = 0; a < h; ++a) {
                        const double* pw =
                            attn.data.data() + ((bi * h + a) * s) * s;
                        // gP = gCtx Va^T ; gVa = P^T gCtx
                        for (std::int64_t si = 0; si < s; ++si) {
                            const double* gc = gctx.data.data() +
                                               (bi * s + si) * e + a * dh;
                            for (std::int64_t ti = 0; ti < s; ++ti) {
                                const double* vt = v.data.data() +
                                                   (bi * s + ti) * e + a * dh;
                                double acc = 0.0;
                                for (int d = 0; d < dh; ++d)
                                    acc += gc[d] * vt[d];
                                gp[std::size_t(si * s + ti)] = acc;
                                double* gvt = gv.data.data() +
                                              (bi * s + ti) * e + a * dh;
                                const double w = pw[si * s + ti];
                                for (int d = 0; d < dh; ++d)
                                    gvt[d] += w * gc[d];
                            }
                        }
                        // softmax backward row-wise, then the 1/sqrt(dh) scale
                        for (std::int64_t si = 0; si < s; ++si) {
                            const double* prow = pw + si * s;
                            const double* gprow = gp.data() + si * s;
                            double dsum = 0.0;
                            for (std::int64_t ti = 0; ti < s; ++ti)
                                dsum += gprow[ti] * prow[ti];
                            double* gsrow = gs.data() + si * s;
                            for (std::int64_t ti = 0; ti < s; ++ti)
                                gsrow[ti] = prow[ti] * (gprow[ti] - dsum) *
                                            scale;
                        }
                        // gQa = gS Ka ; gKa = gS^T Qa
                        for (std::int64_t si = 0; si < s; ++si) {
                            double* gqs = gq.data.data() +
                                          (bi * s + si) * e + a * dh;
                            const double* gsrow = gs.data() + si * s;
                            for (std::int64_t ti = 0; ti < s; ++ti) {
                                const double w = gsrow[ti];
                                const double* kt = k.data.data() +
                                                   (bi * s + ti) * e + a * dh;
                                double* gkt = gk.data.data() +
                                              (bi * s + ti) * e + a * dh;
                                const double* qs = q.data.data() +
                                                   (bi * s + si) * e + a * dh;
                                for (int d = 0; d < dh; ++d) {
                                    gqs[d] += w * kt[d];
                                    gkt[d] += w * qs[d];
                                }
                            }
                        }
                    }
                }

                gx = proj_backward(0, xin, gq);
                Tensor gxk = proj_backward(1, xin, gk);
                Tensor gxv = proj_backward(2, xin, gv);
                K().axpy(1.0, gxk.data.data(), gx.data.data(), gx.data.size());
                K().axpy(1.0, gxv.data.data(), gx.data.data(), gx.data.size());
                break;
            }

            case NodeKind::ResidualAdd: {
                gx = gy;
                if (node.skip_from == -1)
                    add_into(ginput, gy);
                else
                    add_into(gbuf[std::size_t(node.skip_from)], gy);
                break;
            }

            case NodeKind::Reshape: {
                gx = gy;
                gx.shape = xin.shape;
                break;
            }

            case NodeKind::UnitPowerNorm: {
                if (node.aux.empty())
                    throw std::runtime_error(
                        "power norm backward without cached scale");
                gx = Tensor(xin.shape);
                if (node.scope == PowerScope::Batch) {
                    const double gamma = node.aux[0].data[0];
                    const double nc = double(xin.data.size()) / 2.0;
                    const double proj = K().dot(gy.data.data(),
                                                xin.data.data(),
                                                xin.data.size());
                    const double coef = proj / (nc * gamma * gamma * gamma);
                    for (std::size_t j = 0; j < xin.data.size(); ++j)
                        gx.data[j] = gy.data[j] / gamma - xin.data[j] * coef;
                } else {
                    const std::int64_t rows = xin.shape[0];
                    const std::int64_t len =
                        rows == 0 ? 0 : xin.size() / rows;
                    const double nc = double(len) / 2.0;
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double g = node.aux[0].data[std::size_t(r)];
                        const double* xr = xin.data.data() + r * len;
                        const double* gr = gy.data.data() + r * len;
                        double* dr = gx.data.data() + r * len;
                        const double proj =
                            K().dot(gr, xr, std::size_t(len));
                        const double coef = proj / (nc * g * g * g);
                        for (std::int64_t j = 0; j < len; ++j)
                            dr[j] = gr[j] / g - xr[j] * coef;
                    }
                }
                break;
            }
        }

        if (i == 0)
            add_into(ginput, gx);
        else
            add_into(gbuf[std::size_t(i - 1)], gx);
    }
    return ginput;
}

void Graph::zero_grad() {
    for (auto& node : nodes)
        for (auto& g : node.grads) g.fill(0.0);
}

std::vector<Tensor*> Graph::param_tensors() {
    std::vector<Tensor*> out;
    for (auto& node : nodes)
        for (auto& p : node.params) out.push_back(&p);
    return out;
}

std::vector<Tensor*> Graph::grad_tensors() {
    std::vector<Tensor*> out;
    for (auto& node : nodes)
        for (auto& g : node.grads) out.push_back(&g);
    return out;
}

std::int64_t Graph::param_count() const {
    std::int64_t n = 0;
    for (const auto& node : nodes)
        for (const auto& p : node.params) n += p.size();
    return n;
}

std::int64_t Graph::flops_for_input(
    std::vector<std::int64_t> feature_shape) const {
    std::int64_t flops = 0;
    auto rows = [&]() {
        std::int64_t r = 1;
        for (std::size_t i = 0; i + 1 < feature_shape.size(); ++i)
            r *= feature_shape[i];
        return feature_shape.empty() ? 1 : r;
    };
    for (const auto& node : nodes) {
        switch (node.kind) {
            case NodeKind::Dense:
            case NodeKind::Conv1x1: {
                flops += rows() * 2LL * node.in_features * node.out_features;
                if (!feature_shape.empty())
                    feature_shape.back() = node.out_features;
                break;
            }
            case NodeKind::MultiHeadAttention: {
                const std::int64_t s =
                    feature_shape.size() >= 2
                        ? feature_shape[feature_shape.size() - 2]
                        : 1;
                const std::int64_t e = node.in_features;
                // four projections + two batched [s x s] matmuls per head
                flops += 8 * s * e * e + 4 * s * s * e;
                break;
            }
            case NodeKind::Reshape:
                feature_shape = node.reshape_to;
                break;
            default:
                break;
        }
    }
    return flops;
}

}  // namespace crosslink
