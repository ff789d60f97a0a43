#include "crosslink/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "crosslink/csi.hpp"
#include "crosslink/detection.hpp"
#include "crosslink/precoding.hpp"
#include "crosslink/rng.hpp"

namespace crosslink {

using nlohmann::json;

const char* to_string(ModScheme v) {
    return v == ModScheme::Qam ? "qam" : "learned";
}
const char* to_string(PrecodingScheme v) {
    return v == PrecodingScheme::Eigen ? "eigen" : "learned";
}
const char* to_string(CsiScheme v) {
    switch (v) {
        case CsiScheme::Quantized: return "quantized";
        case CsiScheme::LearnedBits: return "learned-bits";
        default: return "learned-symbols";
    }
}
const char* to_string(DetectorScheme v) {
    switch (v) {
        case DetectorScheme::Lmmse: return "lmmse";
        case DetectorScheme::Zf: return "zf";
        default: return "kbest";
    }
}

ModScheme mod_scheme_from_string(const std::string& s) {
    if (s == "qam") return ModScheme::Qam;
    if (s == "learned") return ModScheme::Learned;
    throw std::invalid_argument("unknown modulation scheme: " + s);
}
PrecodingScheme precoding_scheme_from_string(const std::string& s) {
    if (s == "eigen") return PrecodingScheme::Eigen;
    if (s == "learned") return PrecodingScheme::Learned;
    throw std::invalid_argument("unknown precoding scheme: " + s);
}
CsiScheme csi_scheme_from_string(const std::string& s) {
    if (s == "quantized") return CsiScheme::Quantized;
    if (s == "learned-bits") return CsiScheme::LearnedBits;
    if (s == "learned-symbols") return CsiScheme::LearnedSymbols;
    throw std::invalid_argument("unknown CSI scheme: " + s);
}
DetectorScheme detector_scheme_from_string(const std::string& s) {
    if (s == "lmmse") return DetectorScheme::Lmmse;
    if (s == "zf") return DetectorScheme::Zf;
    if (s == "kbest") return DetectorScheme::Kbest;
    throw std::invalid_argument("unknown detector: " + s);
}

namespace {

std::string default_ldpc_dir() { return std::string(CROSSLINK_DATA_DIR) + "/ldpc"; }

bool valid_qam_bits(int m) { return m == 2 || m == 4 || m == 6 || m == 8; }

// Code file resolved from the slot geometry: n = n_re * payload coded bits,
// k = round(n * rate) info bits, named ldpc_<n>_<n-k>.alist.
std::string resolve_dl_code_path(const LinkConfig& c) {
    if (!c.dl_ldpc_path.empty()) return c.dl_ldpc_path;
    const long long n = 1LL * c.num.res_per_slot() * c.payload_bits_per_re;
    const long long k = std::llround(double(n) * c.ldpc_rate);
    const std::string dir = c.ldpc_dir.empty() ? default_ldpc_dir() : c.ldpc_dir;
    return dir + "/ldpc_" + std::to_string(n) + "_" + std::to_string(n - k) + ".alist";
}

json numerology_to_json(const Numerology& n) {
    return json{{"n_subcarriers", n.n_subcarriers}, {"n_symbols", n.n_symbols},
                {"n_tx", n.n_tx},                   {"n_rx", n.n_rx},
                {"n_subbands", n.n_subbands},
                {"subcarrier_spacing_hz", n.subcarrier_spacing_hz}};
}

Numerology numerology_from_json(const json& j, const std::string& where) {
    static const std::vector<std::string> keys = {"n_subcarriers", "n_symbols", "n_tx",
                                                  "n_rx", "n_subbands",
                                                  "subcarrier_spacing_hz"};
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw std::invalid_argument("unknown key '" + k + "' in " + where);
    }
    Numerology n;
    n.n_subcarriers = j.value("n_subcarriers", 0);
    n.n_symbols = j.value("n_symbols", 0);
    n.n_tx = j.value("n_tx", 0);
    n.n_rx = j.value("n_rx", 0);
    n.n_subbands = j.value("n_subbands", 1);
    n.subcarrier_spacing_hz = j.value("subcarrier_spacing_hz", 30e3);
    return n;
}

json profile_to_json(const TdlProfile& p) {
    return json{{"name", p.name},         {"delays_s", p.delays_s},
                {"powers", p.powers},     {"rician_k", p.rician_k},
                {"tx_corr", p.tx_corr},   {"rx_corr", p.rx_corr}};
}

json config_to_json(const LinkConfig& c) {
    json j;
    j["name"] = c.name;
    j["modulation"] = to_string(c.modulation);
    j["precoding"] = to_string(c.precoding);
    j["csi"] = to_string(c.csi);
    j["detector"] = to_string(c.detector);
    j["numerology"] = numerology_to_json(c.num);
    j["profile"] = profile_to_json(c.profile);
    j["n_layers"] = c.n_layers;
    j["payload_bits_per_re"] = c.payload_bits_per_re;
    j["qam_bits"] = c.qam_bits;
    j["ldpc_rate"] = c.ldpc_rate;
    j["ldpc_dir"] = c.ldpc_dir;
    j["dl_ldpc_path"] = c.dl_ldpc_path;
    j["csi_bit_budget"] = c.csi_bit_budget;
    j["modem_prefix"] = c.modem_prefix;
    j["codec_prefix"] = c.codec_prefix;
    j["ideal_feedback"] = c.ideal_feedback;
    j["ul_snr_db"] = c.ul_snr_db;
    j["ul_numerology"] = numerology_to_json(c.ul_num);
    j["ul_profile"] = profile_to_json(c.ul_profile);
    j["ul_ldpc_path"] = c.ul_ldpc_path;
    j["ul_qam_bits"] = c.ul_qam_bits;
    j["kbest_k"] = c.kbest_k;
    j["seed"] = c.seed;
    return j;
}

LinkConfig config_from_json(const json& j) {
    static const std::vector<std::string> keys = {
        "name",          "modulation",   "precoding",     "csi",
        "detector",      "numerology",   "profile",       "n_layers",
        "payload_bits_per_re", "qam_bits", "ldpc_rate",   "ldpc_dir",
        "dl_ldpc_path",  "csi_bit_budget", "modem_prefix", "codec_prefix",
        "ideal_feedback", "ul_snr_db",   "ul_numerology", "ul_profile",
        "ul_ldpc_path",  "ul_qam_bits",  "kbest_k",       "seed"};
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw std::invalid_argument("unknown key '" + k + "' in link config");
    }
    LinkConfig c;
    c.name = j.value("name", c.name);
    if (j.contains("modulation")) c.modulation = mod_scheme_from_string(j.at("modulation"));
    if (j.contains("precoding"))
        c.precoding = precoding_scheme_from_string(j.at("precoding"));
    if (j.contains("csi")) c.csi = csi_scheme_from_string(j.at("csi"));
    if (j.contains("detector")) c.detector = detector_scheme_from_string(j.at("detector"));
    if (j.contains("numerology"))
        c.num = numerology_from_json(j.at("numerology"), "numerology");
    if (j.contains("profile")) c.profile = TdlProfile::from_json_text(j.at("profile").dump());
    c.n_layers = j.value("n_layers", c.n_layers);
    c.payload_bits_per_re = j.value("payload_bits_per_re", c.payload_bits_per_re);
    c.qam_bits = j.value("qam_bits", c.qam_bits);
    c.ldpc_rate = j.value("ldpc_rate", c.ldpc_rate);
    c.ldpc_dir = j.value("ldpc_dir", c.ldpc_dir);
    c.dl_ldpc_path = j.value("dl_ldpc_path", c.dl_ldpc_path);
    c.csi_bit_budget = j.value("csi_bit_budget", c.csi_bit_budget);
    c.modem_prefix = j.value("modem_prefix", c.modem_prefix);
    c.codec_prefix = j.value("codec_prefix", c.codec_prefix);
    c.ideal_feedback = j.value("ideal_feedback", c.ideal_feedback);
    c.ul_snr_db = j.value("ul_snr_db", c.ul_snr_db);
    if (j.contains("ul_numerology"))
        c.ul_num = numerology_from_json(j.at("ul_numerology"), "ul_numerology");
    if (j.contains("ul_profile"))
        c.ul_profile = TdlProfile::from_json_text(j.at("ul_profile").dump());
    c.ul_ldpc_path = j.value("ul_ldpc_path", c.ul_ldpc_path);
    c.ul_qam_bits = j.value("ul_qam_bits", c.ul_qam_bits);
    c.kbest_k = j.value("kbest_k", c.kbest_k);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace

void LinkConfig::validate() const {
    num.validate();
    profile.validate();
    if (n_layers < 1 || n_layers > num.n_rx || n_layers > num.n_tx)
        throw std::invalid_argument(
            "link config: n_layers must be in [1, min(n_tx, n_rx)]");
    if (payload_bits_per_re < 1)
        throw std::invalid_argument("link config: payload_bits_per_re must be >= 1");
    if (ldpc_rate <= 0.0 || ldpc_rate >= 1.0)
        throw std::invalid_argument("link config: ldpc_rate must lie in (0, 1)");
    if (modulation == ModScheme::Qam) {
        if (!valid_qam_bits(qam_bits))
            throw std::invalid_argument("link config: qam_bits must be 2, 4, 6, or 8");
        if (payload_bits_per_re != qam_bits * n_layers)
            throw std::invalid_argument(
                "link config: payload_bits_per_re must equal qam_bits * n_layers");
    } else {
        if (modem_prefix.empty())
            throw std::invalid_argument(
                "link config: learned modulation requires modem_prefix");
        if (detector != DetectorScheme::Lmmse)
            throw std::invalid_argument(
                "link config: learned modulation runs on the lmmse detector");
    }
    const bool learned_csi = csi != CsiScheme::Quantized;
    if ((precoding == PrecodingScheme::Learned) != learned_csi)
        throw std::invalid_argument(
            "link config: learned precoding and learned CSI feedback go together");
    if (learned_csi && codec_prefix.empty())
        throw std::invalid_argument("link config: learned CSI requires codec_prefix");
    if (!learned_csi && csi_bit_budget != 0) {
        const int coeffs = num.n_subbands * num.n_tx * n_layers;
        if (csi_bit_budget < 2 * coeffs)
            throw std::invalid_argument(
                "link config: csi_bit_budget below 2 bits per coefficient");
    }
    if (detector == DetectorScheme::Kbest && kbest_k < 1)
        throw std::invalid_argument("link config: kbest_k must be >= 1");
    if (!ideal_feedback) {
        if (!learned_csi)
            throw std::invalid_argument(
                "link config: uplink transport applies to learned CSI only");
        ul_num.validate();
        ul_profile.validate();
        if (ul_num.n_tx != 1)
            throw std::invalid_argument("link config: uplink transport is SIMO (n_tx = 1)");
        if (csi == CsiScheme::LearnedBits) {
            if (ul_ldpc_path.empty())
                throw std::invalid_argument(
                    "link config: bit-form uplink transport requires ul_ldpc_path");
            if (!valid_qam_bits(ul_qam_bits))
                throw std::invalid_argument(
                    "link config: ul_qam_bits must be 2, 4, 6, or 8");
        }
    }
}

std::uint64_t config_hash(const LinkConfig& c) {
    const std::string text = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string link_config_to_json_text(const LinkConfig& c) {
    return config_to_json(c).dump(2);
}

LinkConfig link_config_from_json_text(const std::string& text) {
    return config_from_json(json::parse(text));
}

LinkConfig link_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open link config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("link config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

LinkEngine::LinkEngine(const LinkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();

    const std::string dl_path = resolve_dl_code_path(cfg_);
    std::vector<std::string> required = {dl_path};
    const bool learned_csi = cfg_.csi != CsiScheme::Quantized;
    if (cfg_.modulation == ModScheme::Learned) {
        required.push_back(cfg_.modem_prefix + ".json");
        required.push_back(cfg_.modem_prefix + ".bin");
    }
    if (learned_csi) {
        required.push_back(cfg_.codec_prefix + ".json");
        required.push_back(cfg_.codec_prefix + ".bin");
    }
    if (!cfg_.ideal_feedback && cfg_.csi == CsiScheme::LearnedBits)
        required.push_back(cfg_.ul_ldpc_path);
    std::string missing;
    for (const std::string& f : required)
        if (!std::filesystem::exists(f)) missing += (missing.empty() ? "" : ", ") + f;
    if (!missing.empty())
        throw std::invalid_argument("missing required artifact files: " + missing);

    dl_code_ = ldpc_from_alist(dl_path);
    const long long want_n = 1LL * n_re() * cfg_.payload_bits_per_re;
    if (dl_code_.n != want_n)
        throw std::invalid_argument(
            "LDPC code " + dl_path + " has n=" + std::to_string(dl_code_.n) +
            ", slot needs " + std::to_string(want_n));
    if (std::llround(double(dl_code_.n) * cfg_.ldpc_rate) != dl_code_.k())
        throw std::invalid_argument("LDPC code " + dl_path + " does not match ldpc_rate");

    if (cfg_.modulation == ModScheme::Qam) {
        qam_ = make_qam(cfg_.qam_bits);
        // Label -> point table so the per-RE mapping is a lookup; built through
        // qam_modulate itself so the bit convention cannot drift.
        const int m = cfg_.qam_bits;
        qam_points_.resize(std::size_t(1) << m);
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m));
        for (std::size_t label = 0; label < qam_points_.size(); ++label) {
            for (int j = 0; j < m; ++j)
                bits[static_cast<std::size_t>(j)] =
                    static_cast<std::uint8_t>((label >> (m - 1 - j)) & 1);
            qam_points_[label] = qam_modulate(qam_, bits)[0];
        }
    } else {
        modem_ = std::make_unique<CrossLayerModulator>(
            load_cross_layer_modulator(cfg_.modem_prefix));
        if (modem_->cfg.bits_per_re != cfg_.payload_bits_per_re ||
            modem_->cfg.n_layers != cfg_.n_layers)
            throw std::invalid_argument(
                "modem artifact shape does not match the link config");
    }
    if (learned_csi) {
        codec_ = std::make_unique<CsiCodec>(load_csi_codec(cfg_.codec_prefix));
        const CsiCodecConfig& cc = codec_->cfg;
        if (cc.n_tx != cfg_.num.n_tx || cc.n_subbands != cfg_.num.n_subbands ||
            cc.n_layers != cfg_.n_layers)
            throw std::invalid_argument(
                "codec artifact shape does not match the link config");
        const FeedbackForm want = cfg_.csi == CsiScheme::LearnedBits
                                      ? FeedbackForm::Bits
                                      : FeedbackForm::Symbols;
        if (cc.form != want)
            throw std::invalid_argument(
                "codec artifact feedback form does not match the CSI scheme");
    }
}

std::vector<CMatrix> LinkEngine::build_precoders(const ChannelRealization& h, Rng& rng) {
    CsiMatrix w = extract_csi(h, cfg_.n_layers);
    Precoder p;
    if (cfg_.csi == CsiScheme::Quantized) {
        if (cfg_.csi_bit_budget > 0) {
            p = eigen_precoder(quantized_feedback(w, cfg_.csi_bit_budget).reconstructed);
        } else {
            p = eigen_precoder(w);
        }
    } else {
        CsiPayload payload = encode_csi(*codec_, w, Mode::Infer);
        if (!cfg_.ideal_feedback) {
            ChannelRealization ul = sample_channel(cfg_.ul_profile, cfg_.ul_num,
                                                   rng.next_u64());
            UplinkTransportConfig transport;
            transport.noise_variance = snr_to_noise_variance(cfg_.ul_snr_db);
            transport.qam_bits = cfg_.ul_qam_bits;
            transport.ldpc_path = cfg_.ul_ldpc_path;
            payload = uplink_feedback(payload, ul, transport, rng.next_u64()).payload;
        }
        p = decode_csi(*codec_, payload, Mode::Infer);
    }
    // Unit transmit power per RE: each subband mixing matrix is scaled to unit
    // Frobenius norm (layer symbols are unit power, so total power is 1).
    for (CMatrix& m : p.per_subband) {
        const double frob = std::sqrt(m.frobenius_sq());
        if (frob > 1e-12)
            for (cd& v : m.a) v /= frob;
    }
    return std::move(p.per_subband);
}

TrialResult LinkEngine::run_trial(double dl_snr_db, std::uint64_t channel_seed,
                                  std::uint64_t data_seed) {
    const Numerology& num = cfg_.num;
    const int n_sc = num.n_subcarriers;
    const int n_sym = num.n_symbols;
    const int n_layers = cfg_.n_layers;
    const int b_re = cfg_.payload_bits_per_re;
    const int k_info = dl_code_.k();
    const double sigma2 = snr_to_noise_variance(dl_snr_db);

    // Draw order from data_seed: [uplink channel seed, uplink noise seed when
    // feedback rides the air,] info bits, downlink noise seed.
    Rng rng(data_seed);

    ChannelRealization h = sample_channel(cfg_.profile, num, channel_seed);
    h.noise_variance = sigma2;
    const std::vector<CMatrix> precoders = build_precoders(h, rng);

    std::vector<std::uint8_t> info(static_cast<std::size_t>(k_info));
    for (auto& b : info) b = static_cast<std::uint8_t>(rng.below(2));
    const std::vector<std::uint8_t> cw = ldpc_encode(dl_code_, info);

    // Bits of RE r = f * n_sym + t live at cw[r*b_re .. (r+1)*b_re); the QAM
    // path splits them per layer, m bits each.
    ResourceGrid layer_grid(n_layers, n_sc, n_sym);
    if (cfg_.modulation == ModScheme::Qam) {
        const int m = cfg_.qam_bits;
        for (int f = 0; f < n_sc; ++f)
            for (int t = 0; t < n_sym; ++t) {
                const std::size_t base =
                    (static_cast<std::size_t>(f) * n_sym + t) * b_re;
                for (int l = 0; l < n_layers; ++l) {
                    std::size_t label = 0;
                    for (int j = 0; j < m; ++j)
                        label = (label << 1) |
                                cw[base + static_cast<std::size_t>(l) * m + j];
                    layer_grid.at(l, f, t) = qam_points_[label];
                }
            }
    } else {
        Tensor bits({num.res_per_slot(), b_re});
        for (std::size_t i = 0; i < cw.size(); ++i) bits.data[i] = cw[i];
        const Tensor rows = cross_layer_modulate(*modem_, bits, Mode::Infer);
        for (int f = 0; f < n_sc; ++f)
            for (int t = 0; t < n_sym; ++t) {
                const std::size_t r = static_cast<std::size_t>(f) * n_sym + t;
                for (int l = 0; l < n_layers; ++l)
                    layer_grid.at(l, f, t) =
                        cd(rows.data[r * 2 * n_layers + 2 * l],
                           rows.data[r * 2 * n_layers + 2 * l + 1]);
            }
    }

    Precoder p;
    p.per_subband = precoders;
    const ResourceGrid x = apply_precoding(p, layer_grid, num);
    const ResourceGrid y = transmit(h, x, rng.next_u64());

    std::vector<double> llrs(static_cast<std::size_t>(dl_code_.n));
    Tensor eq_rows({num.res_per_slot(), 2 * n_layers});
    std::vector<cd> yv(static_cast<std::size_t>(num.n_rx));
    for (int f = 0; f < n_sc; ++f) {
        // Block fading: the effective channel depends on the subcarrier only.
        const CMatrix heq =
            h.matrix_at(f) * precoders[static_cast<std::size_t>(num.subband_of(f))];
        for (int t = 0; t < n_sym; ++t) {
            const std::size_t r = static_cast<std::size_t>(f) * n_sym + t;
            for (int a = 0; a < num.n_rx; ++a)
                yv[static_cast<std::size_t>(a)] = y.at(a, f, t);
            if (cfg_.detector == DetectorScheme::Kbest) {
                const KBestResult kb = kbest_detect(heq, yv, qam_, cfg_.kbest_k, sigma2);
                std::copy(kb.llrs.begin(), kb.llrs.end(), llrs.begin() + r * b_re);
                continue;
            }
            EqualizerOutput eq;
            if (cfg_.detector == DetectorScheme::Zf) {
                try {
                    eq = zf_equalize(heq, yv, sigma2);
                } catch (const std::runtime_error&) {
                    // Rank-deficient realization: ZF cannot separate the
                    // layers, so the block is lost rather than the sweep.
                    return TrialResult{};
                }
            } else {
                eq = lmmse_equalize(heq, yv, sigma2);
            }
            if (cfg_.modulation == ModScheme::Qam) {
                const int m = cfg_.qam_bits;
                for (int l = 0; l < n_layers; ++l)
                    qam_demodulate_maxlog(
                        qam_, eq.x_hat[static_cast<std::size_t>(l)],
                        eq.bias[static_cast<std::size_t>(l)],
                        std::max(eq.noise_var[static_cast<std::size_t>(l)], 1e-300),
                        llrs.data() + r * b_re + static_cast<std::size_t>(l) * m);
            } else {
                for (int l = 0; l < n_layers; ++l) {
                    eq_rows.data[r * 2 * n_layers + 2 * l] =
                        eq.x_hat[static_cast<std::size_t>(l)].real();
                    eq_rows.data[r * 2 * n_layers + 2 * l + 1] =
                        eq.x_hat[static_cast<std::size_t>(l)].imag();
                }
            }
        }
    }
    if (cfg_.modulation == ModScheme::Learned) {
        const Tensor out = cross_layer_demodulate(*modem_, eq_rows, Mode::Infer);
        std::copy(out.data.begin(), out.data.end(), llrs.begin());
    }

    const LdpcDecodeResult dec = ldpc_decode(dl_code_, llrs, 25, 0.8);
    TrialResult res;
    res.ok = dec.info_bits == info;
    res.goodput = res.ok ? double(k_info) / double(num.res_per_slot()) : 0.0;
    return res;
}

SweepResult run_sweep(const std::vector<LinkConfig>& configs,
                      const std::vector<double>& snr_grid_db, int trials,
                      std::uint64_t seed) {
    if (configs.empty()) throw std::invalid_argument("run_sweep: no configs");
    if (snr_grid_db.empty()) throw std::invalid_argument("run_sweep: empty SNR grid");
    if (trials < 100) throw std::invalid_argument("run_sweep: trials must be >= 100");

    // Load everything up front so configuration problems surface before any
    // simulation work starts.
    std::vector<LinkEngine> engines;
    engines.reserve(configs.size());
    for (const LinkConfig& c : configs) engines.emplace_back(c);

    SweepResult result;
    result.root_seed = seed;
    result.trials_per_point = trials;
    const std::size_t n_points = snr_grid_db.size();
    for (std::size_t c = 0; c < engines.size(); ++c) {
        const LinkConfig& cfg = engines[c].config();
        const std::uint64_t chash = config_hash(cfg);
        for (std::size_t i = 0; i < n_points; ++i) {
            Rng stream = Rng::stream(seed ^ cfg.seed, c * n_points + i);
            int errors = 0;
            double goodput_sum = 0.0;
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t ch = stream.next_u64();
                const std::uint64_t dat = stream.next_u64();
                const TrialResult r = engines[c].run_trial(snr_grid_db[i], ch, dat);
                errors += r.ok ? 0 : 1;
                goodput_sum += r.goodput;
            }
            SweepPoint pt;
            pt.config_name = cfg.name;
            pt.config_hash = chash;
            pt.dl_snr_db = snr_grid_db[i];
            pt.ul_snr_db = cfg.ideal_feedback ? 0.0 : cfg.ul_snr_db;
            pt.trials = trials;
            pt.block_errors = errors;
            pt.bler = double(errors) / double(trials);
            pt.goodput = goodput_sum / double(trials);
            pt.ci_half_width = 1.96 * std::sqrt(pt.bler * (1.0 - pt.bler) / trials);
            pt.root_seed = seed;
            result.points.push_back(std::move(pt));
        }
    }
    return result;
}

std::vector<double> candidate_goodputs(std::vector<LinkEngine>& engines,
                                       double dl_snr_db, std::uint64_t channel_seed,
                                       int trials, std::uint64_t data_salt) {
    if (engines.empty()) throw std::invalid_argument("candidate_goodputs: no engines");
    if (trials < 1) throw std::invalid_argument("candidate_goodputs: trials must be >= 1");
    std::vector<double> out(engines.size(), 0.0);
    for (std::size_t j = 0; j < engines.size(); ++j) {
        Rng stream = Rng::stream(channel_seed ^ data_salt, j);
        double sum = 0.0;
        for (int t = 0; t < trials; ++t)
            sum += engines[j].run_trial(dl_snr_db, channel_seed, stream.next_u64()).goodput;
        out[j] = sum / double(trials);
    }
    return out;
}

AdaptationCurve ideal_link_adaptation(const std::vector<LinkConfig>& candidates,
                                      const std::vector<double>& snr_grid_db,
                                      int realizations, int trials_per_realization,
                                      std::uint64_t seed) {
    if (candidates.empty())
        throw std::invalid_argument("ideal_link_adaptation: no candidates");
    if (realizations < 1 || trials_per_realization < 1)
        throw std::invalid_argument(
            "ideal_link_adaptation: realizations and trials must be >= 1");
    std::vector<LinkEngine> engines;
    engines.reserve(candidates.size());
    for (const LinkConfig& c : candidates) engines.emplace_back(c);

    AdaptationCurve curve;
    curve.snr_db = snr_grid_db;
    curve.goodput.resize(snr_grid_db.size(), 0.0);
    for (std::size_t i = 0; i < snr_grid_db.size(); ++i) {
        Rng channels = Rng::stream(seed, i);
        double sum = 0.0;
        for (int r = 0; r < realizations; ++r) {
            const std::uint64_t ch = channels.next_u64();
            const std::vector<double> g = candidate_goodputs(
                engines, snr_grid_db[i], ch, trials_per_realization, seed);
            sum += *std::max_element(g.begin(), g.end());
        }
        curve.goodput[i] = sum / double(realizations);
    }
    return curve;
}

std::vector<double> reference_sinr(const Numerology& num, const TdlProfile& profile,
                                   int n_layers, double dl_snr_db,
                                   std::uint64_t channel_seed) {
    num.validate();
    if (n_layers < 1 || n_layers > num.n_rx || n_layers > num.n_tx)
        throw std::invalid_argument("reference_sinr: bad layer count");
    const double sigma2 = snr_to_noise_variance(dl_snr_db);
    const ChannelRealization h = sample_channel(profile, num, channel_seed);
    Precoder p = eigen_precoder(extract_csi(h, n_layers));
    for (CMatrix& m : p.per_subband) {
        const double frob = std::sqrt(m.frobenius_sq());
        for (cd& v : m.a) v /= frob;
    }
    const std::vector<cd> zero_y(static_cast<std::size_t>(num.n_rx));
    std::vector<double> sinr(static_cast<std::size_t>(n_layers), 0.0);
    for (int f = 0; f < num.n_subcarriers; ++f) {
        const CMatrix heq =
            h.matrix_at(f) * p.per_subband[static_cast<std::size_t>(num.subband_of(f))];
        const EqualizerOutput eq = lmmse_equalize(heq, zero_y, sigma2);
        for (int l = 0; l < n_layers; ++l)
            sinr[static_cast<std::size_t>(l)] += eq.post_sinr[static_cast<std::size_t>(l)];
    }
    for (double& v : sinr) v /= double(num.n_subcarriers);
    return sinr;
}

namespace {

Numerology desk_dl_numerology() {
    Numerology n;
    n.n_subcarriers = 24;
    n.n_symbols = 14;
    n.n_tx = 8;
    n.n_rx = 2;
    n.n_subbands = 3;
    return n;
}

Numerology desk_ul_numerology(int n_rx) {
    Numerology n;
    n.n_subcarriers = 96;
    n.n_symbols = 1;
    n.n_tx = 1;
    n.n_rx = n_rx;
    n.n_subbands = 1;
    n.subcarrier_spacing_hz = 15e3;
    return n;
}

Numerology full_dl_numerology() {
    Numerology n;
    n.n_subcarriers = 144;
    n.n_symbols = 14;
    n.n_tx = 32;
    n.n_rx = 4;
    n.n_subbands = 3;
    n.subcarrier_spacing_hz = 15e3;
    return n;
}

const char* qam_name(int m) {
    switch (m) {
        case 2: return "qpsk";
        case 4: return "16qam";
        case 6: return "64qam";
        default: return "256qam";
    }
}

}  // namespace

std::vector<LinkConfig> scenario_preset(const std::string& name, PresetScale scale,
                                        const std::string& artifact_dir) {
    const bool desk = scale == PresetScale::Desk;
    const Numerology dl = desk ? desk_dl_numerology() : full_dl_numerology();
    const Numerology ul = desk_ul_numerology(desk ? 8 : 32);
    const int max_layers = desk ? 2 : 4;
    const int payload = desk ? 4 : 8;

    if (name == "cmo1" || name == "cmo2" || name == "cmo3") {
        LinkConfig c;
        c.name = name;
        c.modulation = ModScheme::Learned;
        c.precoding = PrecodingScheme::Learned;
        c.csi = name == "cmo3" ? CsiScheme::LearnedSymbols : CsiScheme::LearnedBits;
        c.num = dl;
        c.n_layers = max_layers;
        c.payload_bits_per_re = payload;
        c.modem_prefix = artifact_dir + "/" + name + "_modem";
        c.codec_prefix = artifact_dir + "/" + name + "_codec";
        c.ul_num = ul;
        c.ul_ldpc_path = default_ldpc_dir() + "/ldpc_384_192.alist";
        c.ul_qam_bits = 4;
        std::string missing;
        for (const std::string& f :
             {c.modem_prefix + ".json", c.modem_prefix + ".bin",
              c.codec_prefix + ".json", c.codec_prefix + ".bin"})
            if (!std::filesystem::exists(f)) missing += (missing.empty() ? "" : ", ") + f;
        if (!missing.empty())
            throw std::invalid_argument("preset " + name +
                                        ": missing required model files: " + missing);
        return {c};
    }
    if (name == "baseline5g") {
        std::vector<LinkConfig> out;
        for (int m : {2, 4, 6, 8}) {
            if (payload % m != 0) continue;
            const int layers = payload / m;
            if (layers < 1 || layers > max_layers) continue;
            LinkConfig c;
            c.name = "baseline_" + std::string(qam_name(m)) + "_l" +
                     std::to_string(layers);
            c.num = dl;
            c.n_layers = layers;
            c.qam_bits = m;
            c.payload_bits_per_re = payload;
            c.csi_bit_budget = 4 * dl.n_subbands * dl.n_tx * layers;
            out.push_back(std::move(c));
        }
        return out;
    }
    throw std::invalid_argument("unknown scenario preset: " + name);
}

void write_sweep_csv(const SweepResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "config,dl_snr_db,ul_snr_db,trials,block_errors,bler,goodput,"
           "ci_half_width,config_hash,root_seed\n";
    char buf[64];
    for (const SweepPoint& p : r.points) {
        out << p.config_name << ',' << p.dl_snr_db << ',' << p.ul_snr_db << ','
            << p.trials << ',' << p.block_errors << ',';
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,", p.bler, p.goodput,
                      p.ci_half_width);
        out << buf << std::hex << p.config_hash << std::dec << ',' << p.root_seed
            << '\n';
    }
}

void write_run_manifest(const SweepResult& r, const std::vector<LinkConfig>& configs,
                        const std::string& path) {
    json j;
    j["tool"] = "crosslink";
    j["version"] = kCrosslinkVersion;
    j["git_rev"] = CROSSLINK_GIT_REV;
    j["root_seed"] = r.root_seed;
    j["trials_per_point"] = r.trials_per_point;
    j["points"] = r.points.size();
    json cfgs = json::array();
    for (const LinkConfig& c : configs) {
        json jc = config_to_json(c);
        jc["config_hash"] = config_hash(c);
        cfgs.push_back(std::move(jc));
    }
    j["configs"] = std::move(cfgs);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

std::vector<double> parse_snr_grid(const std::string& spec) {
    if (spec.empty()) throw std::invalid_argument("empty SNR grid");
    const auto to_double = [](const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad SNR value: '" + s + "'");
        }
        if (pos != s.size()) throw std::invalid_argument("bad SNR value: '" + s + "'");
        return v;
    };
    std::vector<std::string> parts;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    if (sep == ':') {
        if (parts.size() != 3)
            throw std::invalid_argument("SNR range must be lo:step:hi: '" + spec + "'");
        const double lo = to_double(parts[0]);
        const double step = to_double(parts[1]);
        const double hi = to_double(parts[2]);
        if (step <= 0.0) throw std::invalid_argument("SNR step must be > 0");
        if (hi < lo) throw std::invalid_argument("SNR range must have hi >= lo");
        std::vector<double> grid;
        for (double v = lo; v <= hi + 1e-9; v += step) grid.push_back(v);
        return grid;
    }
    std::vector<double> grid;
    for (const std::string& p : parts) grid.push_back(to_double(p));
    if (grid.empty()) throw std::invalid_argument("empty SNR grid");
    return grid;
}

}  // namespace crosslink
