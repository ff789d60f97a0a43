#include "crosslink/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "tensor archives are defined little-endian; add byte swapping "
              "before building for a big-endian target");

namespace crosslink {

using nlohmann::json;

void save_tensors(
    const std::string& prefix,
    const std::vector<std::pair<std::string, const Tensor*>>& tensors,
    const std::map<std::string, std::string>& metadata) {
    json manifest;
    manifest["format"] = "crosslink-tensors-v1";
    manifest["dtype"] = "float64-le";
    for (const auto& [k, v] : metadata) manifest["metadata"][k] = v;

    std::ofstream bin(prefix + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");
    std::uint64_t offset = 0;
    json list = json::array();
    for (const auto& [name, tensor] : tensors) {
        json entry;
        entry["name"] = name;
        entry["shape"] = tensor->shape;
        entry["offset"] = offset;
        entry["count"] = tensor->data.size();
        list.push_back(std::move(entry));
        bin.write(reinterpret_cast<const char*>(tensor->data.data()),
                  std::streamsize(tensor->data.size() * sizeof(double)));
        offset += tensor->data.size() * sizeof(double);
    }
    manifest["tensors"] = std::move(list);
    if (!bin) throw std::runtime_error("write failed for " + prefix + ".bin");
    bin.close();

    std::ofstream mf(prefix + ".json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot open " + prefix + ".json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("write failed for " + prefix + ".json");
}

TensorArchive load_tensors(const std::string& prefix) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw std::runtime_error("cannot open " + prefix + ".json");
    json manifest = json::parse(mf);
    if (manifest.value("format", "") != "crosslink-tensors-v1")
        throw std::runtime_error(prefix + ".json is not a tensor archive");

    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");

    TensorArchive archive;
    if (manifest.contains("metadata"))
        for (const auto& [k, v] : manifest["metadata"].items())
            archive.metadata[k] = v.get<std::string>();

    for (const auto& entry : manifest["tensors"]) {
        const std::string name = entry["name"].get<std::string>();
        Tensor t(entry["shape"].get<std::vector<std::int64_t>>());
        const auto count = entry["count"].get<std::uint64_t>();
        if (count != t.data.size())
            throw std::runtime_error("archive entry '" + name +
                                     "' count does not match its shape");
        bin.seekg(std::streamoff(entry["offset"].get<std::uint64_t>()));
        bin.read(reinterpret_cast<char*>(t.data.data()),
                 std::streamsize(count * sizeof(double)));
        if (!bin)
            throw std::runtime_error("truncated archive payload for '" + name +
                                     "'");
        archive.tensors.emplace(name, std::move(t));
    }
    return archive;
}

const Tensor& TensorArchive::require(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
        throw std::runtime_error("archive is missing tensor '" + name + "'");
    return it->second;
}

namespace {

const char* slot_name(NodeKind kind, std::size_t idx) {
    switch (kind) {
        case NodeKind::Dense:
        case NodeKind::Conv1x1: {
            static const char* names[] = {"W", "b"};
            return names[idx];
        }
        case NodeKind::BatchNorm:
        case NodeKind::LayerNorm: {
            static const char* names[] = {"gamma", "beta"};
            return names[idx];
        }
        case NodeKind::MultiHeadAttention: {
            static const char* names[] = {"Wq", "bq", "Wk", "bk",
                                          "Wv", "bv", "Wo", "bo"};
            return names[idx];
        }
        default:
            return "p";
    }
}

}  // namespace

std::vector<std::pair<std::string, const Tensor*>> graph_state(
    const Graph& graph, std::vector<Tensor>& scratch) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    // Reserve so pointers into scratch stay valid while we append.
    std::size_t extra = 0;
    for (const auto& node : graph.nodes) {
        if (node.kind == NodeKind::BatchNorm) extra += 2;
        if (node.kind == NodeKind::UnitPowerNorm &&
            node.scope == PowerScope::Batch)
            extra += 1;
    }
    scratch.clear();
    scratch.reserve(extra);

    for (const auto& node : graph.nodes) {
        const std::string base = graph.name + "." + node.name + ".";
        for (std::size_t i = 0; i < node.params.size(); ++i)
            out.emplace_back(base + slot_name(node.kind, i), &node.params[i]);
        if (node.kind == NodeKind::BatchNorm) {
            scratch.emplace_back(
                Tensor({std::int64_t(node.running_mean.size())},
                       node.running_mean));
            out.emplace_back(base + "running_mean", &scratch.back());
            scratch.emplace_back(
                Tensor({std::int64_t(node.running_var.size())},
                       node.running_var));
            out.emplace_back(base + "running_var", &scratch.back());
        }
        if (node.kind == NodeKind::UnitPowerNorm &&
            node.scope == PowerScope::Batch) {
            scratch.emplace_back(Tensor({1}, {node.running_power}));
            out.emplace_back(base + "running_power", &scratch.back());
        }
    }
    return out;
}

void load_graph_state(Graph& graph, const TensorArchive& archive) {
    for (auto& node : graph.nodes) {
        const std::string base = graph.name + "." + node.name + ".";
        for (std::size_t i = 0; i < node.params.size(); ++i) {
            const Tensor& src = archive.require(base + slot_name(node.kind, i));
            if (!src.same_shape(node.params[i]))
                throw std::runtime_error("archive tensor '" +
                                         base + slot_name(node.kind, i) +
                                         "' has shape " + src.shape_str() +
                                         ", expected " +
                                         node.params[i].shape_str());
            node.params[i] = src;
        }
        if (node.kind == NodeKind::BatchNorm) {
            node.running_mean = archive.require(base + "running_mean").data;
            node.running_var = archive.require(base + "running_var").data;
        }
        if (node.kind == NodeKind::UnitPowerNorm &&
            node.scope == PowerScope::Batch)
            node.running_power = archive.require(base + "running_power").data[0];
    }
}

}  // namespace crosslink
