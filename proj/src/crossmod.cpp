#include "crosslink/crossmod.hpp"

#include <fstream>
#include <stdexcept>

#include "crosslink/serialize.hpp"

namespace crosslink {

void CrossModConfig::validate() const {
    if (bits_per_re < 1 || bits_per_re > 32)
        throw std::invalid_argument("payload must be 1..32 bits per RE");
    if (n_layers < 1 || n_layers > 8)
        throw std::invalid_argument("layer count must be 1..8");
    if (hidden < 1 || demod_width < 1)
        throw std::invalid_argument("widths must be positive");
    if (n_dense < 1)
        throw std::invalid_argument("mapper needs at least one dense layer");
    if (n_res < 0)
        throw std::invalid_argument("residual block count must be non-negative");
}

namespace {

Graph build_mod_graph(const CrossModConfig& cfg) {
    Graph g;
    g.name = "mod";
    g.dense(cfg.bits_per_re, cfg.hidden, "d1").relu();
    for (int i = 1; i < cfg.n_dense; ++i)
        g.dense(cfg.hidden, cfg.hidden, "d" + std::to_string(i + 1)).relu();
    g.dense(cfg.hidden, 2 * cfg.n_layers, "out");
    g.unit_power_norm(PowerScope::Batch, "norm");
    return g;
}

Graph build_demod_graph(const CrossModConfig& cfg) {
    Graph g;
    g.name = "demod";
    const int d = cfg.demod_width;
    g.conv1x1(2 * cfg.n_layers, d, "in");
    for (int r = 0; r < cfg.n_res; ++r) {
        const std::string p = "r" + std::to_string(r);
        const int block_input = g.last_index();
        g.batch_norm(d, p + "bn1").relu();
        g.conv1x1(d, d, p + "c1");
        g.batch_norm(d, p + "bn2").relu();
        g.conv1x1(d, d, p + "c2");
        g.residual_add(block_input, p + "add");
    }
    g.conv1x1(d, cfg.bits_per_re, "out");
    return g;
}

}  // namespace

CrossLayerModulator make_cross_layer_modulator(const CrossModConfig& cfg,
                                               std::uint64_t seed) {
    cfg.validate();
    CrossLayerModulator m;
    m.cfg = cfg;
    m.mod = build_mod_graph(cfg);
    m.demod = build_demod_graph(cfg);
    Rng mod_rng = Rng::stream(seed, 0x6d6f64);
    Rng demod_rng = Rng::stream(seed, 0x64656d);
    m.mod.init_params(mod_rng);
    m.demod.init_params(demod_rng);
    return m;
}

Tensor cross_layer_modulate(CrossLayerModulator& m, const Tensor& bits,
                            Mode mode) {
    if (bits.last_dim() != m.cfg.bits_per_re)
        throw std::invalid_argument("bit rows must have bits_per_re columns");
    return m.mod.forward(bits, mode);
}

Tensor cross_layer_demodulate(CrossLayerModulator& m, const Tensor& equalized,
                              Mode mode) {
    if (equalized.last_dim() != 2 * m.cfg.n_layers)
        throw std::invalid_argument("equalized rows must have 2*n_layers columns");
    return m.demod.forward(equalized, mode);
}

void label_to_bits(int label, int bits, double* out) {
    for (int i = 0; i < bits; ++i)
        out[i] = double((label >> (bits - 1 - i)) & 1);
}

ConstellationSet enumerate_constellation(CrossLayerModulator& m) {
    const int b = m.cfg.bits_per_re;
    if (b > 12)
        throw std::invalid_argument(
            "constellation enumeration capped at 12 payload bits (4096 points)");
    const int big_m = 1 << b;
    Tensor in({big_m, b});
    for (int label = 0; label < big_m; ++label)
        label_to_bits(label, b, in.row(label));
    const Tensor out = m.mod.forward(in, Mode::Population);
    ConstellationSet cs;
    cs.bits = b;
    cs.n_complex = m.cfg.n_layers;
    cs.points = out.data;
    cs.validate();
    return cs;
}

ModelCost model_cost(const Graph& g, std::vector<std::int64_t> feature_shape) {
    ModelCost c;
    c.params = g.param_count();
    c.flops = g.flops_for_input(std::move(feature_shape));
    return c;
}

void dump_constellation_csv(const ConstellationSet& cs,
                            const std::string& path) {
    cs.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bits";
    for (int l = 0; l < cs.n_complex; ++l)
        out << ",re" << l << ",im" << l;
    out << "\n";
    out.precision(17);
    for (int label = 0; label < cs.order(); ++label) {
        for (int i = 0; i < cs.bits; ++i)
            out << ((label >> (cs.bits - 1 - i)) & 1);
        const double* p = cs.point(label);
        for (int d = 0; d < cs.real_dims(); ++d) out << "," << p[d];
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

void save_cross_layer_modulator(const CrossLayerModulator& m,
                                const std::string& prefix) {
    std::vector<Tensor> scratch_a, scratch_b;
    auto entries = graph_state(m.mod, scratch_a);
    auto demod_entries = graph_state(m.demod, scratch_b);
    entries.insert(entries.end(), demod_entries.begin(), demod_entries.end());
    const std::map<std::string, std::string> metadata = {
        {"kind", "cross_layer_modulator"},
        {"bits_per_re", std::to_string(m.cfg.bits_per_re)},
        {"n_layers", std::to_string(m.cfg.n_layers)},
        {"hidden", std::to_string(m.cfg.hidden)},
        {"n_dense", std::to_string(m.cfg.n_dense)},
        {"demod_width", std::to_string(m.cfg.demod_width)},
        {"n_res", std::to_string(m.cfg.n_res)},
    };
    save_tensors(prefix, entries, metadata);
}

CrossLayerModulator load_cross_layer_modulator(const std::string& prefix) {
    const TensorArchive archive = load_tensors(prefix);
    const auto need = [&](const std::string& key) {
        auto it = archive.metadata.find(key);
        if (it == archive.metadata.end())
            throw std::runtime_error("model archive missing metadata key " + key);
        return it->second;
    };
    if (need("kind") != "cross_layer_modulator")
        throw std::runtime_error("archive does not hold a cross-layer modulator");
    CrossModConfig cfg;
    cfg.bits_per_re = std::stoi(need("bits_per_re"));
    cfg.n_layers = std::stoi(need("n_layers"));
    cfg.hidden = std::stoi(need("hidden"));
    cfg.n_dense = std::stoi(need("n_dense"));
    cfg.demod_width = std::stoi(need("demod_width"));
    cfg.n_res = std::stoi(need("n_res"));
    cfg.validate();
    CrossLayerModulator m;
    m.cfg = cfg;
    m.mod = build_mod_graph(cfg);
    m.demod = build_demod_graph(cfg);
    load_graph_state(m.mod, archive);
    load_graph_state(m.demod, archive);
    return m;
}

}  // namespace crosslink
