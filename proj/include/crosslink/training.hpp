#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/crossmod.hpp"
#include "crosslink/csi_codec.hpp"
#include "crosslink/optim.hpp"
#include "crosslink/precoding.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Three-phase cross-module optimization: joint pre-convergence of the
// feedback codec and the bit-to-symbol / LLR models under a combined
// cross-entropy / similarity objective (phase 1), objective relaxation with
// the similarity term switched off (phase 2), and the end-to-end Monte-Carlo
// evaluator that later phases and scheme comparisons are scored with.

struct TrainConfig {
    Numerology num;            // downlink slot layout
    TdlProfile profile;        // downlink fading profile
    CrossModConfig mod_cfg;
    CsiCodecConfig codec_cfg;

    double lambda_phase1 = 0.5;
    double lambda_phase2 = 1.0;
    int batch = 16;            // channel realizations per step
    int steps = 800;           // per phase
    double snr_lo_db = -4.0;   // per-realization SNR draw
    double snr_hi_db = 16.0;
    double learning_rate = 1e-3;
    int plateau_window = 2000; // early stop after this many steps without a new best
    std::uint64_t seed = 1;

    // Throws std::invalid_argument on inconsistent shapes or ranges.
    void validate() const;
};

// The jointly trained model set.
struct CmoModels {
    CrossLayerModulator modem;
    CsiCodec codec;
};

CmoModels make_cmo_models(const TrainConfig& cfg, std::uint64_t seed);

struct PhaseReport {
    int phase = 0;
    double lambda = 0.0;
    std::vector<double> loss_trace;  // per-step training loss
    double initial_loss = 0.0;       // fixed evaluation batch, before the phase
    double final_loss = 0.0;         // fixed evaluation batch, after the phase
    double final_bce = 0.0;
    double final_sgcs = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    int steps_run = 0;
    bool early_stopped = false;
};

// Combined objective: lambda * BCE(bits, llrs) - (1 - lambda) * SGCS(w, p).
// BCE uses natural log with P(bit=1) = sigmoid(-llr), averaged over all bit
// positions.  Affine in lambda by construction.
double loss_combined(const std::vector<std::uint8_t>& bits, const Tensor& llrs,
                     const CsiMatrix& w, const Precoder& p, double lambda);

// Models plus optimizer state; phases share one session so the second phase
// continues from the first phase's optimizer moments.
struct TrainSession {
    CmoModels models;
    Adam opt;
    int phase_completed = 0;
};

TrainSession make_train_session(const TrainConfig& cfg);

PhaseReport train_phase1(TrainSession& session, const TrainConfig& cfg);
PhaseReport train_phase2(TrainSession& session, const TrainConfig& cfg);

// Checkpointing at phase granularity: models, optimizer moments, phase tag.
void save_train_session(const TrainSession& session, const std::string& prefix);
TrainSession load_train_session(const std::string& prefix);

// Per-step CSV trace plus a JSON summary.
void write_phase_report(const PhaseReport& report, const std::string& csv_path,
                        const std::string& json_path);

// End-to-end inference evaluation with channel coding cascaded.
struct EvalConfig {
    double dl_snr_db = 10.0;
    std::string dl_ldpc_path;        // codeword length must equal n_re * bits_per_re
    int trials = 200;
    std::uint64_t seed = 99;

    bool ideal_feedback = true;      // bypass the uplink transport
    double ul_snr_db = 10.0;
    Numerology ul_num;               // SIMO uplink layout (n_tx = 1)
    TdlProfile ul_profile;
    std::string ul_ldpc_path;        // bit-form transport code
    int ul_qam_bits = 4;
};

struct EvalResult {
    double bler = 0.0;
    double goodput = 0.0;            // info bits per resource element
    int trials = 0;
    int block_errors = 0;
};

EvalResult evaluate_end_to_end(CmoModels& models, const TrainConfig& cfg,
                               const EvalConfig& eval);

}  // namespace crosslink
