#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosslink/graph.hpp"
#include "crosslink/harness.hpp"

namespace crosslink {

// Switching policy over registered transmission candidates: per-layer SINR
// estimates in, one probability per candidate out, highest probability wins.
struct AgentModel {
    Graph net;  // dense(4*n_layers) -> relu -> batch_norm -> dense(J) -> softmax
    int n_layers = 0;
    int n_candidates = 0;
    std::vector<double> feat_mean;  // dB-domain standardization, training set
    std::vector<double> feat_std;
};

// Requires n_candidates >= 2; standardization starts at identity (mean 0,
// scale 1) until train_agent fills it in.
AgentModel make_agent(int n_layers, int n_candidates, std::uint64_t seed);

struct AgentDataset {
    int n_layers = 0;
    int n_candidates = 0;
    std::vector<double> sinr_db;  // rows x n_layers
    std::vector<int> labels;      // winning candidate per row

    std::size_t rows() const {
        return n_layers > 0 ? sinr_db.size() / static_cast<std::size_t>(n_layers) : 0;
    }
    // Throws std::invalid_argument on shape mismatch, non-finite features, or
    // out-of-range labels.
    void validate() const;
};

// Oracle labels: per (channel seed, SNR point) every candidate runs on the
// shared realization and the best mean goodput wins, ties to the lowest
// index.  Features are the eigen-precoded reference per-layer SINRs in dB at
// the widest candidate layer count.  All candidates must share one downlink
// grid and channel profile.
AgentDataset generate_labels(const std::vector<LinkConfig>& candidates,
                             const std::vector<double>& snr_grid_db,
                             const std::vector<std::uint64_t>& channel_seeds,
                             int trials_per_seed);

struct AgentTrainConfig {
    double learning_rate = 1e-2;
    int epochs = 200;
    int batch = 32;
    double val_fraction = 0.25;
    std::uint64_t seed = 1;
};

struct AgentReport {
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_trace;  // mean epoch loss
    int train_rows = 0;
    int val_rows = 0;
};

// Minimizes the candidate-averaged cross-entropy -(1/J) sum_j v_j log p_j
// with Adam on shuffled minibatches; the dataset is split train/validation by
// the config seed and features are standardized by training-set statistics
// (stored in the model).  Throws std::runtime_error on a non-finite loss.
AgentReport train_agent(AgentModel& model, const AgentDataset& data,
                        const AgentTrainConfig& cfg);

// Softmax output for one SINR vector (inference statistics).
std::vector<double> agent_probabilities(AgentModel& model,
                                        const std::vector<double>& sinr_db);

// Argmax of the softmax output; exact ties resolve to the lowest index.
int select_scheme(AgentModel& model, const std::vector<double>& sinr_db);

void save_agent(const AgentModel& m, const std::string& prefix);
AgentModel load_agent(const std::string& prefix);

// CSV persistence: header sinr_0..sinr_{L-1},label, one row per sample.
void write_agent_dataset_csv(const AgentDataset& d, const std::string& path);
AgentDataset read_agent_dataset_csv(const std::string& path);

}  // namespace crosslink
