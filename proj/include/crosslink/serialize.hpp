#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crosslink/graph.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Named-tensor archive: <prefix>.json carries the manifest (name, shape, byte
// offset, element count per tensor, plus free-form metadata), <prefix>.bin
// carries raw little-endian float64 payloads back to back.  Round trips are
// bit-exact.
void save_tensors(const std::string& prefix,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                  const std::map<std::string, std::string>& metadata = {});

struct TensorArchive {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> metadata;

    const Tensor& require(const std::string& name) const;
};

TensorArchive load_tensors(const std::string& prefix);

// Everything that defines a graph's inference behavior and training state:
// parameters plus running statistics, named "<graph>.<node>.<slot>".
std::vector<std::pair<std::string, const Tensor*>> graph_state(
    const Graph& graph, std::vector<Tensor>& scratch);

// Restores parameters and running statistics saved by graph_state.  Throws
// std::runtime_error if a required entry is missing or shaped differently.
void load_graph_state(Graph& graph, const TensorArchive& archive);

}  // namespace crosslink
