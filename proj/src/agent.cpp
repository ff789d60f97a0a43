#include "crosslink/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "crosslink/rng.hpp"
#include "crosslink/serialize.hpp"

namespace crosslink {

namespace {

constexpr std::uint64_t kAgentDataTag = 0x61676e74ULL;   // label-generation salt
constexpr std::uint64_t kAgentEpochTag = 0x65706f63ULL;  // per-epoch shuffles

void check_feature_length(const AgentModel& m, const std::vector<double>& sinr) {
    if (static_cast<int>(sinr.size()) != m.n_layers)
        throw std::invalid_argument("agent expects " + std::to_string(m.n_layers) +
                                    " SINR features, got " +
                                    std::to_string(sinr.size()));
}

}  // namespace

AgentModel make_agent(int n_layers, int n_candidates, std::uint64_t seed) {
    if (n_layers < 1) throw std::invalid_argument("agent: n_layers must be >= 1");
    if (n_candidates < 2)
        throw std::invalid_argument("agent: need at least 2 candidates");
    AgentModel m;
    m.n_layers = n_layers;
    m.n_candidates = n_candidates;
    m.net.name = "agent";
    m.net.dense(n_layers, 4 * n_layers, "hidden").relu();
    m.net.batch_norm(4 * n_layers, "bn");
    m.net.dense(4 * n_layers, n_candidates, "logits").softmax("probs");
    Rng rng(seed);
    m.net.init_params(rng);
    m.feat_mean.assign(static_cast<std::size_t>(n_layers), 0.0);
    m.feat_std.assign(static_cast<std::size_t>(n_layers), 1.0);
    return m;
}

void AgentDataset::validate() const {
    if (n_layers < 1 || n_candidates < 2)
        throw std::invalid_argument("agent dataset: bad shape fields");
    if (sinr_db.size() != rows() * static_cast<std::size_t>(n_layers) ||
        labels.size() != rows() || rows() == 0)
        throw std::invalid_argument("agent dataset: feature/label size mismatch");
    for (double v : sinr_db)
        if (!std::isfinite(v))
            throw std::invalid_argument("agent dataset: non-finite SINR feature");
    for (int l : labels)
        if (l < 0 || l >= n_candidates)
            throw std::invalid_argument("agent dataset: label out of range");
}

AgentDataset generate_labels(const std::vector<LinkConfig>& candidates,
                             const std::vector<double>& snr_grid_db,
                             const std::vector<std::uint64_t>& channel_seeds,
                             int trials_per_seed) {
    if (candidates.size() < 2)
        throw std::invalid_argument("generate_labels: need at least 2 candidates");
    if (snr_grid_db.empty() || channel_seeds.empty() || trials_per_seed < 1)
        throw std::invalid_argument("generate_labels: empty SNR grid or seeds");
    const Numerology& num = candidates.front().num;
    int max_layers = 0;
    for (const LinkConfig& c : candidates) {
        max_layers = std::max(max_layers, c.n_layers);
        if (c.num.n_subcarriers != num.n_subcarriers ||
            c.num.n_symbols != num.n_symbols || c.num.n_tx != num.n_tx ||
            c.num.n_rx != num.n_rx || c.num.n_subbands != num.n_subbands)
            throw std::invalid_argument(
                "generate_labels: candidates must share one downlink grid");
    }
    std::vector<LinkEngine> engines;
    engines.reserve(candidates.size());
    for (const LinkConfig& c : candidates) engines.emplace_back(c);

    AgentDataset data;
    data.n_layers = max_layers;
    data.n_candidates = static_cast<int>(candidates.size());
    const TdlProfile& profile = candidates.front().profile;
    for (std::uint64_t seed : channel_seeds) {
        for (double snr : snr_grid_db) {
            const std::vector<double> q =
                reference_sinr(num, profile, max_layers, snr, seed);
            for (double v : q)
                data.sinr_db.push_back(10.0 * std::log10(std::max(v, 1e-12)));
            const std::vector<double> g =
                candidate_goodputs(engines, snr, seed, trials_per_seed, kAgentDataTag);
            data.labels.push_back(static_cast<int>(
                std::max_element(g.begin(), g.end()) - g.begin()));
        }
    }
    data.validate();
    return data;
}

AgentReport train_agent(AgentModel& model, const AgentDataset& data,
                        const AgentTrainConfig& cfg) {
    data.validate();
    if (data.n_layers != model.n_layers || data.n_candidates != model.n_candidates)
        throw std::invalid_argument("train_agent: dataset shape does not match model");
    if (cfg.learning_rate <= 0.0 || cfg.epochs < 1 || cfg.batch < 1 ||
        cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0)
        throw std::invalid_argument("train_agent: bad hyperparameters");

    const std::size_t rows = data.rows();
    const int nl = model.n_layers;
    const int nj = model.n_candidates;

    // Deterministic split, then training-set feature standardization.
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(cfg.seed);
    for (std::size_t i = rows; i > 1; --i)
        std::swap(order[i - 1], order[split_rng.below(i)]);
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(double(rows) * cfg.val_fraction));
    const std::size_t n_train = rows - n_val;
    if (n_train == 0) throw std::invalid_argument("train_agent: empty training split");

    model.feat_mean.assign(static_cast<std::size_t>(nl), 0.0);
    model.feat_std.assign(static_cast<std::size_t>(nl), 0.0);
    for (std::size_t i = 0; i < n_train; ++i)
        for (int f = 0; f < nl; ++f)
            model.feat_mean[static_cast<std::size_t>(f)] +=
                data.sinr_db[order[i] * nl + static_cast<std::size_t>(f)];
    for (double& v : model.feat_mean) v /= double(n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        for (int f = 0; f < nl; ++f) {
            const double d =
                data.sinr_db[order[i] * nl + static_cast<std::size_t>(f)] -
                model.feat_mean[static_cast<std::size_t>(f)];
            model.feat_std[static_cast<std::size_t>(f)] += d * d;
        }
    for (double& v : model.feat_std) v = std::max(std::sqrt(v / double(n_train)), 1e-6);

    const auto standardized = [&](std::size_t row, int f) {
        return (data.sinr_db[row * nl + static_cast<std::size_t>(f)] -
                model.feat_mean[static_cast<std::size_t>(f)]) /
               model.feat_std[static_cast<std::size_t>(f)];
    };

    Adam opt(cfg.learning_rate);
    AgentReport report;
    report.train_rows = static_cast<int>(n_train);
    report.val_rows = static_cast<int>(n_val);
    std::vector<std::size_t> train_idx(order.begin(),
                                       order.begin() + static_cast<long>(n_train));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle = Rng::stream(cfg.seed, kAgentEpochTag + std::uint64_t(epoch));
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[shuffle.below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train;
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t b =
                std::min(static_cast<std::size_t>(cfg.batch), n_train - start);
            Tensor x({static_cast<std::int64_t>(b), nl});
            for (std::size_t r = 0; r < b; ++r)
                for (int f = 0; f < nl; ++f)
                    x.data[r * nl + static_cast<std::size_t>(f)] =
                        standardized(train_idx[start + r], f);
            const Tensor probs = model.net.forward(x, Mode::Train);
            Tensor grad({static_cast<std::int64_t>(b), nj});
            double batch_loss = 0.0;
            for (std::size_t r = 0; r < b; ++r) {
                const int label = data.labels[train_idx[start + r]];
                const double p = std::max(
                    probs.data[r * nj + static_cast<std::size_t>(label)], 1e-300);
                batch_loss += -std::log(p) / double(nj);
                grad.data[r * nj + static_cast<std::size_t>(label)] =
                    -1.0 / (double(nj) * p * double(b));
            }
            batch_loss /= double(b);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("agent training diverged: non-finite loss");
            model.net.zero_grad();
            model.net.backward(grad);
            opt.step(model.net.param_tensors(), model.net.grad_tensors());
            epoch_loss += batch_loss * double(b);
        }
        report.loss_trace.push_back(epoch_loss / double(n_train));
    }
    report.final_loss = report.loss_trace.empty() ? 0.0 : report.loss_trace.back();

    const auto accuracy = [&](std::size_t lo, std::size_t hi) {
        if (hi == lo) return 0.0;
        std::size_t hits = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            std::vector<double> sinr(static_cast<std::size_t>(nl));
            for (int f = 0; f < nl; ++f)
                sinr[static_cast<std::size_t>(f)] =
                    data.sinr_db[order[i] * nl + static_cast<std::size_t>(f)];
            if (select_scheme(model, sinr) == data.labels[order[i]]) ++hits;
        }
        return double(hits) / double(hi - lo);
    };
    report.train_accuracy = accuracy(0, n_train);
    report.val_accuracy = n_val > 0 ? accuracy(n_train, rows) : report.train_accuracy;
    return report;
}

std::vector<double> agent_probabilities(AgentModel& model,
                                        const std::vector<double>& sinr_db) {
    check_feature_length(model, sinr_db);
    Tensor x({1, model.n_layers});
    for (int f = 0; f < model.n_layers; ++f)
        x.data[static_cast<std::size_t>(f)] =
            (sinr_db[static_cast<std::size_t>(f)] -
             model.feat_mean[static_cast<std::size_t>(f)]) /
            model.feat_std[static_cast<std::size_t>(f)];
    const Tensor out = model.net.forward(x, Mode::Infer);
    return {out.data.begin(), out.data.end()};
}

int select_scheme(AgentModel& model, const std::vector<double>& sinr_db) {
    const std::vector<double> p = agent_probabilities(model, sinr_db);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void save_agent(const AgentModel& m, const std::string& prefix) {
    std::vector<Tensor> scratch;
    auto entries = graph_state(m.net, scratch);
    Tensor mean({m.n_layers});
    Tensor stdev({m.n_layers});
    mean.data.assign(m.feat_mean.begin(), m.feat_mean.end());
    stdev.data.assign(m.feat_std.begin(), m.feat_std.end());
    entries.emplace_back("agent.feat_mean", &mean);
    entries.emplace_back("agent.feat_std", &stdev);
    const std::map<std::string, std::string> metadata = {
        {"kind", "control_agent"},
        {"n_layers", std::to_string(m.n_layers)},
        {"n_candidates", std::to_string(m.n_candidates)},
    };
    save_tensors(prefix, entries, metadata);
}

AgentModel load_agent(const std::string& prefix) {
    const TensorArchive archive = load_tensors(prefix);
    const auto meta = [&](const std::string& key) {
        auto it = archive.metadata.find(key);
        if (it == archive.metadata.end())
            throw std::runtime_error("agent archive missing metadata key " + key);
        return it->second;
    };
    if (meta("kind") != "control_agent")
        throw std::runtime_error("archive " + prefix + " is not a control agent");
    AgentModel m = make_agent(std::stoi(meta("n_layers")),
                              std::stoi(meta("n_candidates")), 1);
    load_graph_state(m.net, archive);
    const Tensor& mean = archive.require("agent.feat_mean");
    const Tensor& stdev = archive.require("agent.feat_std");
    m.feat_mean.assign(mean.data.begin(), mean.data.end());
    m.feat_std.assign(stdev.data.begin(), stdev.data.end());
    return m;
}

void write_agent_dataset_csv(const AgentDataset& d, const std::string& path) {
    d.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (int f = 0; f < d.n_layers; ++f) out << "sinr_" << f << ',';
    out << "label\n";
    char buf[40];
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (int f = 0; f < d.n_layers; ++f) {
            std::snprintf(buf, sizeof buf, "%.17g,",
                          d.sinr_db[r * d.n_layers + static_cast<std::size_t>(f)]);
            out << buf;
        }
        out << d.labels[r] << '\n';
    }
}

AgentDataset read_agent_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open agent dataset: " + path);
    std::string header;
    if (!std::getline(in, header))
        throw std::invalid_argument("agent dataset " + path + " is empty");
    int n_layers = 0;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ','))
            if (col.rfind("sinr_", 0) == 0) ++n_layers;
    }
    if (n_layers < 1)
        throw std::invalid_argument("agent dataset " + path + " has no SINR columns");
    AgentDataset d;
    d.n_layers = n_layers;
    std::string line;
    int max_label = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int f = 0; f < n_layers; ++f) {
            if (!std::getline(ss, cell, ','))
                throw std::invalid_argument("agent dataset row too short: " + line);
            d.sinr_db.push_back(std::stod(cell));
        }
        if (!std::getline(ss, cell, ','))
            throw std::invalid_argument("agent dataset row missing label: " + line);
        const int label = std::stoi(cell);
        max_label = std::max(max_label, label);
        d.labels.push_back(label);
    }
    d.n_candidates = std::max(max_label + 1, 2);
    d.validate();
    return d;
}

}  // namespace crosslink
