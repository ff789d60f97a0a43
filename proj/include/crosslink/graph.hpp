#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosslink/rng.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Sequential differentiable layer graph with optional residual skips.  All
// tensors are real-valued; complex quantities cross the boundary in the
// interleaved [re, im, re, im, ...] layout documented in tensor.hpp.
//
// Forward modes:
//   Train      - batch statistics, running-stat updates, caches for backward
//   Infer      - running statistics, no state change, no caches
//   Population - batch statistics treated as exact population statistics
//                (no running update, no caches); used when the full input
//                population is presented at once, e.g. an enumerated
//                constellation that must come out with unit average power
enum class Mode { Train, Infer, Population };

enum class NodeKind {
    Dense,
    Conv1x1,  // pointwise convolution == dense over the channel axis
    Relu,
    Sigmoid,
    Softmax,
    BatchNorm,
    LayerNorm,
    MultiHeadAttention,
    ResidualAdd,
    Reshape,
    UnitPowerNorm,
};

// Scope of the unit-average-power normalization layer.
enum class PowerScope {
    Batch,      // one scale for the whole batch; running estimate for Infer
    PerSample,  // each batch row normalized independently (all modes)
};

struct Node {
    NodeKind kind;
    std::string name;

    int in_features = 0;
    int out_features = 0;
    int heads = 0;             // MultiHeadAttention
    int skip_from = -2;        // ResidualAdd: earlier node index, -1 = input
    std::vector<std::int64_t> reshape_to;  // Reshape: trailing dims
    PowerScope scope = PowerScope::Batch;
    double momentum = 0.9;     // running-stat retention
    double eps = 1e-5;

    std::vector<Tensor> params;
    std::vector<Tensor> grads;

    // Running state (BatchNorm, UnitPowerNorm with Batch scope).
    std::vector<double> running_mean, running_var;
    double running_power = 1.0;

    // Training-forward caches.
    Tensor out_cache;
    std::vector<Tensor> aux;
};

class Graph {
  public:
    std::string name = "graph";
    std::vector<Node> nodes;

    // --- builders (append a node; explicit feature dims keep wiring honest)
    Graph& dense(int in, int out, const std::string& label = "");
    Graph& conv1x1(int in, int out, const std::string& label = "");
    Graph& relu(const std::string& label = "");
    Graph& sigmoid(const std::string& label = "");
    Graph& softmax(const std::string& label = "");
    Graph& batch_norm(int features, const std::string& label = "");
    Graph& layer_norm(int features, const std::string& label = "");
    Graph& multi_head_attention(int embed, int heads,
                                const std::string& label = "");
    Graph& residual_add(int skip_from, const std::string& label = "");
    Graph& reshape(std::vector<std::int64_t> trailing,
                   const std::string& label = "");
    Graph& unit_power_norm(PowerScope scope, const std::string& label = "");

    int last_index() const { return int(nodes.size()) - 1; }

    // Uniform fan-in initialization: W ~ U[-1/sqrt(in), 1/sqrt(in)], biases
    // zero, scale parameters one.
    void init_params(Rng& rng);

    Tensor forward(const Tensor& x, Mode mode);

    // Gradient of the last Train-mode forward.  Accumulates parameter
    // gradients into node.grads and returns the gradient wrt the input.
    Tensor backward(const Tensor& grad_out);

    void zero_grad();

    // Flat views over trainable parameters and their gradients (same order).
    std::vector<Tensor*> param_tensors();
    std::vector<Tensor*> grad_tensors();
    std::int64_t param_count() const;

    // Forward multiply-accumulate cost for one batch sample whose feature
    // shape (without the batch axis) is given, counted as 2 * in * out per
    // dense/pointwise weight matrix row and the matching matmul cost inside
    // attention; elementwise and normalization work is excluded.  This is the
    // documented convention behind every reported FLOP figure.
    std::int64_t flops_for_input(std::vector<std::int64_t> feature_shape) const;

  private:
    Node& append(Node n);
    Tensor input_cache_;
    bool has_cache_ = false;
};

}  // namespace crosslink
