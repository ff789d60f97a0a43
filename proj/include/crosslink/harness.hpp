#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/crossmod.hpp"
#include "crosslink/csi_codec.hpp"
#include "crosslink/ldpc.hpp"
#include "crosslink/qam.hpp"

namespace crosslink {

enum class ModScheme { Qam, Learned };
enum class PrecodingScheme { Eigen, Learned };
enum class CsiScheme { Quantized, LearnedBits, LearnedSymbols };
enum class DetectorScheme { Lmmse, Zf, Kbest };

const char* to_string(ModScheme v);
const char* to_string(PrecodingScheme v);
const char* to_string(CsiScheme v);
const char* to_string(DetectorScheme v);
ModScheme mod_scheme_from_string(const std::string& s);
PrecodingScheme precoding_scheme_from_string(const std::string& s);
CsiScheme csi_scheme_from_string(const std::string& s);
DetectorScheme detector_scheme_from_string(const std::string& s);

// One end-to-end link recipe: who maps bits to symbols, how the precoder is
// chosen, how CSI travels back, and how the receiver detects.  Everything a
// trial needs except the root seed and the operating SNR point.
struct LinkConfig {
    std::string name = "link";
    ModScheme modulation = ModScheme::Qam;
    PrecodingScheme precoding = PrecodingScheme::Eigen;
    CsiScheme csi = CsiScheme::Quantized;
    DetectorScheme detector = DetectorScheme::Lmmse;

    Numerology num;                      // downlink grid
    TdlProfile profile = TdlProfile::flat();
    int n_layers = 1;
    int payload_bits_per_re = 2;         // bits carried by one RE across layers
    int qam_bits = 2;                    // per-layer QAM order (QAM scheme)
    double ldpc_rate = 0.5;
    std::string ldpc_dir;                // empty: <data>/ldpc
    std::string dl_ldpc_path;            // empty: resolved from (n_re, payload, rate)

    int csi_bit_budget = 0;              // quantized scheme; 0 = ideal CSI
    std::string modem_prefix;            // learned modulation artifacts
    std::string codec_prefix;            // learned CSI artifacts

    bool ideal_feedback = true;          // false: learned CSI rides the uplink
    double ul_snr_db = 10.0;
    Numerology ul_num;
    TdlProfile ul_profile = TdlProfile::flat();
    std::string ul_ldpc_path;            // bit-form uplink code
    int ul_qam_bits = 4;

    int kbest_k = 16;
    std::uint64_t seed = 0;              // per-config salt mixed into streams

    // Throws std::invalid_argument on an inconsistent recipe (bad grid,
    // payload/order mismatch, learned scheme without artifact prefix, ...).
    void validate() const;
};

// Stable content hash of every field that affects simulation results.
std::uint64_t config_hash(const LinkConfig& c);

std::string link_config_to_json_text(const LinkConfig& c);
LinkConfig link_config_from_json_text(const std::string& text);
LinkConfig link_config_from_json_file(const std::string& path);

struct TrialResult {
    bool ok = false;        // decoded info bits match the transmitted ones
    double goodput = 0.0;   // info_bits * ok / n_re, bits per RE
};

// A loaded, runnable link: LDPC tables, QAM constellation, and any learned
// artifacts are resolved once at construction.  Construction throws
// std::invalid_argument listing every missing artifact or code file.
class LinkEngine {
public:
    explicit LinkEngine(const LinkConfig& cfg);

    const LinkConfig& config() const { return cfg_; }
    int n_re() const { return cfg_.num.res_per_slot(); }
    int info_bits() const { return dl_code_.k(); }

    // One coded block over one channel realization.  Deterministic in
    // (dl_snr_db, channel_seed, data_seed); data_seed drives payload bits,
    // downlink noise, and the uplink feedback leg in a fixed draw order.
    TrialResult run_trial(double dl_snr_db, std::uint64_t channel_seed,
                          std::uint64_t data_seed);

private:
    std::vector<CMatrix> build_precoders(const ChannelRealization& h, Rng& rng);

    LinkConfig cfg_;
    LdpcCode dl_code_;
    QamConstellation qam_;
    std::vector<cd> qam_points_;  // label -> constellation point
    std::unique_ptr<CrossLayerModulator> modem_;
    std::unique_ptr<CsiCodec> codec_;
};

struct SweepPoint {
    std::string config_name;
    std::uint64_t config_hash = 0;
    double dl_snr_db = 0.0;
    double ul_snr_db = 0.0;
    int trials = 0;
    int block_errors = 0;
    double bler = 0.0;
    double goodput = 0.0;        // mean bits per RE over trials
    double ci_half_width = 0.0;  // 95% normal-approximation interval on BLER
    std::uint64_t root_seed = 0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::uint64_t root_seed = 0;
    int trials_per_point = 0;
};

// Monte-Carlo BLER/goodput over configs x SNR points.  Requires trials >=
// 100.  All configs are validated and loaded before the first trial runs, so
// configuration errors surface with nothing simulated.  Per (config c, point
// i) the trial seeds come from the dedicated stream
// Rng::stream(seed ^ cfg.seed, c * n_points + i): each trial draws its
// channel seed then its data seed, making totals reproducible per root seed.
SweepResult run_sweep(const std::vector<LinkConfig>& configs,
                      const std::vector<double>& snr_grid_db, int trials,
                      std::uint64_t seed);

struct AdaptationCurve {
    std::vector<double> snr_db;
    std::vector<double> goodput;  // mean over realizations of the best candidate
};

// Mean per-candidate goodput on one shared channel realization: every engine
// sees the same channel seed; candidate j's data seeds come from the stream
// Rng::stream(channel_seed ^ data_salt, j).
std::vector<double> candidate_goodputs(std::vector<LinkEngine>& engines,
                                       double dl_snr_db, std::uint64_t channel_seed,
                                       int trials, std::uint64_t data_salt);

// Genie selection: per realization every candidate is evaluated on the same
// channel and the best goodput is kept; the curve averages over realizations.
// Channel seeds come from Rng::stream(seed, point_index).
AdaptationCurve ideal_link_adaptation(const std::vector<LinkConfig>& candidates,
                                      const std::vector<double>& snr_grid_db,
                                      int realizations, int trials_per_realization,
                                      std::uint64_t seed);

// Per-layer post-LMMSE SINR (linear, averaged over the slot's REs) on the
// eigen-precoded reference link with unit-Frobenius transmit power.  This is
// the channel-quality feature vector the scheme-switching agent consumes.
std::vector<double> reference_sinr(const Numerology& num, const TdlProfile& profile,
                                   int n_layers, double dl_snr_db,
                                   std::uint64_t channel_seed);

enum class PresetScale { Desk, Full };

// Named candidate sets: "cmo1"/"cmo2"/"cmo3" wire the learned modulation +
// learned precoding chain (bit-form CSI for 1/2, symbol-form for 3) against
// artifacts <artifact_dir>/<name>_{modem,codec}.{json,bin}; "baseline5g"
// enumerates classical QAM/layer splits of the payload with quantized CSI and
// eigen precoding.  Throws std::invalid_argument on an unknown name or with
// the full list of missing artifact files.
std::vector<LinkConfig> scenario_preset(const std::string& name, PresetScale scale,
                                        const std::string& artifact_dir);

void write_sweep_csv(const SweepResult& r, const std::string& path);
void write_run_manifest(const SweepResult& r, const std::vector<LinkConfig>& configs,
                        const std::string& path);

// "lo:step:hi" (inclusive, step > 0) or a comma list "a,b,c".
std::vector<double> parse_snr_grid(const std::string& spec);

inline constexpr const char* kCrosslinkVersion = "0.1.0";

}  // namespace crosslink
