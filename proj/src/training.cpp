#include "crosslink/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "crosslink/csi.hpp"
#include "crosslink/detection.hpp"
#include "crosslink/ldpc.hpp"
#include "crosslink/linkops.hpp"
#include "crosslink/rng.hpp"
#include "crosslink/serialize.hpp"

namespace crosslink {

namespace {

constexpr std::uint64_t kPhaseStreamTag = 0x7068617365ULL;  // per-phase step draws
constexpr std::uint64_t kEvalStreamTag = 0x6576616cULL;     // fixed evaluation batch

// One training step's sampled environment.
struct StepBatch {
    std::vector<ChannelRealization> channels;  // per item
    std::vector<CsiMatrix> w;                  // per item, true feedback target
    std::vector<double> sigma2;                // per item, downlink noise variance
    std::vector<std::vector<cd>> noise;        // per item, n_re * n_rx samples
    Tensor bits_in;                            // [batch * n_re, bits_per_re]
    std::vector<std::uint8_t> bits_flat;
    Tensor enc_in;                             // [batch, n_sb, 2 * n_tx * n_layers]
};

int res_count(const TrainConfig& cfg) {
    return cfg.num.n_subcarriers * cfg.num.n_symbols;
}

StepBatch draw_batch(const TrainConfig& cfg, Rng& rng) {
    const int n_re = res_count(cfg);
    const int b_bits = cfg.mod_cfg.bits_per_re;
    const int coeffs = 2 * cfg.num.n_tx * cfg.mod_cfg.n_layers;
    StepBatch out;
    out.bits_in = Tensor({std::int64_t(cfg.batch) * n_re, b_bits});
    out.enc_in = Tensor({cfg.batch, cfg.num.n_subbands, coeffs});
    out.bits_flat.reserve(out.bits_in.data.size());
    for (int b = 0; b < cfg.batch; ++b) {
        const std::uint64_t channel_seed = rng.next_u64();
        out.channels.push_back(sample_channel(cfg.profile, cfg.num, channel_seed));
        out.w.push_back(extract_csi(out.channels.back(), cfg.mod_cfg.n_layers));
        const double snr_db = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
        out.sigma2.push_back(snr_to_noise_variance(snr_db));
        for (int i = 0; i < n_re * b_bits; ++i) {
            const std::uint8_t bit = std::uint8_t(rng.below(2));
            out.bits_in.data[(std::size_t(b) * n_re * b_bits) + std::size_t(i)] = double(bit);
            out.bits_flat.push_back(bit);
        }
        std::vector<cd> noise(std::size_t(n_re) * std::size_t(cfg.num.n_rx));
        for (auto& v : noise) v = rng.cnormal(out.sigma2.back());
        out.noise.push_back(std::move(noise));
        const Tensor enc_row = csi_to_tensor(out.w.back());
        std::copy(enc_row.data.begin(), enc_row.data.end(),
                  out.enc_in.data.begin() +
                      std::size_t(b) * std::size_t(cfg.num.n_subbands) * std::size_t(coeffs));
    }
    return out;
}

Tensor slice_rows(const Tensor& t, std::int64_t lo, std::int64_t hi) {
    const std::int64_t width = t.shape[1];
    Tensor out({hi - lo, width});
    std::copy(t.data.begin() + lo * width, t.data.begin() + hi * width, out.data.begin());
    return out;
}

void write_rows(Tensor& dst, std::int64_t lo, const Tensor& rows) {
    const std::int64_t width = dst.shape[1];
    std::copy(rows.data.begin(), rows.data.end(), dst.data.begin() + lo * width);
}

struct StepMetrics {
    double loss = 0.0;
    double bce = 0.0;
    double sgcs = 0.0;
};

// One combined forward (and optional backward) pass over a sampled batch.
// Gradients, when requested, are accumulated into the four graphs.
StepMetrics run_step(CmoModels& m, const TrainConfig& cfg, const StepBatch& batch,
                     double lambda, Mode mode, bool with_grad) {
    const int n_re = res_count(cfg);
    const int n_layers = cfg.mod_cfg.n_layers;
    const int n_sb = cfg.num.n_subbands;
    const int sb_width = cfg.num.subband_width();
    const bool bit_form = cfg.codec_cfg.form == FeedbackForm::Bits;

    // Feedback codec: encoder, bottleneck, decoder.
    const Tensor enc_out = m.codec.encoder.forward(batch.enc_in, mode);
    Tensor dec_in = enc_out;
    if (bit_form)
        for (auto& v : dec_in.data) v = v >= 0.0 ? 1.0 : -1.0;
    const Tensor dec_out = m.codec.decoder.forward(dec_in, mode);

    const auto raw_mats = unpack_precoders(dec_out, n_sb, cfg.num.n_tx, n_layers);
    std::vector<PrecoderNorm> norms(std::size_t(cfg.batch));
    std::vector<std::vector<CMatrix>> wn(std::size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b)
        wn[std::size_t(b)] = norms[std::size_t(b)].forward(raw_mats[std::size_t(b)]);

    // Downlink span per realization.
    const Tensor s_all = m.modem.mod.forward(batch.bits_in, mode);
    Tensor eq_all({std::int64_t(cfg.batch) * n_re, 2 * n_layers});
    std::vector<LmmseLink> links;
    links.reserve(std::size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
        std::vector<CMatrix> channels;
        std::vector<int> precoder_of;
        channels.reserve(std::size_t(n_re));
        for (int f = 0; f < cfg.num.n_subcarriers; ++f)
            for (int t = 0; t < cfg.num.n_symbols; ++t) {
                channels.push_back(batch.channels[std::size_t(b)].matrix_at(f, t));
                precoder_of.push_back(f / sb_width);
            }
        links.emplace_back(std::move(channels), std::move(precoder_of),
                           batch.sigma2[std::size_t(b)], batch.noise[std::size_t(b)]);
        const Tensor s_b = slice_rows(s_all, std::int64_t(b) * n_re, std::int64_t(b + 1) * n_re);
        write_rows(eq_all, std::int64_t(b) * n_re, links.back().forward(s_b, wn[std::size_t(b)]));
    }
    const Tensor llrs = m.modem.demod.forward(eq_all, mode);

    StepMetrics metrics;
    Tensor gllr;
    metrics.bce = bce_with_grad(batch.bits_flat, llrs, with_grad ? &gllr : nullptr);
    std::vector<std::vector<CMatrix>> sim_grads(std::size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b)
        metrics.sgcs += sgcs_with_grad(batch.w[std::size_t(b)], wn[std::size_t(b)],
                                       with_grad ? &sim_grads[std::size_t(b)] : nullptr) /
                        double(cfg.batch);
    metrics.loss = lambda * metrics.bce - (1.0 - lambda) * metrics.sgcs;
    if (!with_grad) return metrics;

    m.codec.encoder.zero_grad();
    m.codec.decoder.zero_grad();
    m.modem.mod.zero_grad();
    m.modem.demod.zero_grad();

    for (auto& v : gllr.data) v *= lambda;
    const Tensor geq = m.modem.demod.backward(gllr);
    Tensor gs_all({std::int64_t(cfg.batch) * n_re, 2 * n_layers});
    std::vector<std::vector<CMatrix>> graw(std::size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
        const Tensor geq_b = slice_rows(geq, std::int64_t(b) * n_re, std::int64_t(b + 1) * n_re);
        Tensor gs_b;
        std::vector<CMatrix> gwn(std::size_t(n_sb), CMatrix(cfg.num.n_tx, n_layers));
        links[std::size_t(b)].backward(geq_b, gs_b, gwn);
        write_rows(gs_all, std::int64_t(b) * n_re, gs_b);
        for (int k = 0; k < n_sb; ++k)
            for (std::size_t j = 0; j < gwn[std::size_t(k)].a.size(); ++j)
                gwn[std::size_t(k)].a[j] -= (1.0 - lambda) / double(cfg.batch) *
                                            sim_grads[std::size_t(b)][std::size_t(k)].a[j];
        graw[std::size_t(b)] = norms[std::size_t(b)].backward(gwn);
    }
    m.modem.mod.backward(gs_all);
    const Tensor dec_grad = pack_precoder_grads(graw, dec_out.shape);
    const Tensor bottleneck_grad = m.codec.decoder.backward(dec_grad);
    // Bit form: straight-through estimator, the sign quantizer passes the
    // gradient unchanged.
    m.codec.encoder.backward(bottleneck_grad);
    return metrics;
}

void collect_params(CmoModels& m, std::vector<Tensor*>& params,
                    std::vector<Tensor*>& grads) {
    params.clear();
    grads.clear();
    for (Graph* g : {&m.codec.encoder, &m.codec.decoder, &m.modem.mod, &m.modem.demod}) {
        for (Tensor* p : g->param_tensors()) params.push_back(p);
        for (Tensor* t : g->grad_tensors()) grads.push_back(t);
    }
}

PhaseReport run_phase(TrainSession& session, const TrainConfig& cfg, int phase,
                      double lambda) {
    cfg.validate();
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("lambda must lie in [0, 1]");
    const auto t0 = std::chrono::steady_clock::now();

    PhaseReport report;
    report.phase = phase;
    report.lambda = lambda;
    report.seed = cfg.seed;

    Rng eval_rng = Rng::stream(cfg.seed, kEvalStreamTag);
    const StepBatch eval_batch = draw_batch(cfg, eval_rng);
    report.initial_loss =
        run_step(session.models, cfg, eval_batch, lambda, Mode::Infer, false).loss;

    std::vector<Tensor*> params, grads;
    collect_params(session.models, params, grads);

    Rng step_rng = Rng::stream(cfg.seed, kPhaseStreamTag + std::uint64_t(phase));
    double best = std::numeric_limits<double>::infinity();
    int best_step = 0;
    for (int step = 0; step < cfg.steps; ++step) {
        const StepBatch batch = draw_batch(cfg, step_rng);
        const StepMetrics metrics =
            run_step(session.models, cfg, batch, lambda, Mode::Train, true);
        if (!std::isfinite(metrics.loss))
            throw std::runtime_error("training diverged: non-finite loss at step " +
                                     std::to_string(step));
        report.loss_trace.push_back(metrics.loss);
        session.opt.step(params, grads);
        ++report.steps_run;
        if (metrics.loss < best) {
            best = metrics.loss;
            best_step = step;
        } else if (step - best_step >= cfg.plateau_window) {
            report.early_stopped = true;
            break;
        }
    }

    const StepMetrics last =
        run_step(session.models, cfg, eval_batch, lambda, Mode::Infer, false);
    report.final_loss = last.loss;
    report.final_bce = last.bce;
    report.final_sgcs = last.sgcs;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    session.phase_completed = phase;
    return report;
}

}  // namespace

void TrainConfig::validate() const {
    num.validate();
    mod_cfg.validate();
    codec_cfg.validate();
    if (codec_cfg.n_tx != num.n_tx)
        throw std::invalid_argument("codec antenna count must match the numerology");
    if (codec_cfg.n_subbands != num.n_subbands)
        throw std::invalid_argument("codec subband count must match the numerology");
    if (codec_cfg.n_layers != mod_cfg.n_layers)
        throw std::invalid_argument("codec and modulator layer counts must match");
    if (mod_cfg.n_layers > num.n_rx)
        throw std::invalid_argument("layer count cannot exceed receive antennas");
    if (lambda_phase1 < 0.0 || lambda_phase1 > 1.0 || lambda_phase2 < 0.0 ||
        lambda_phase2 > 1.0)
        throw std::invalid_argument("lambda must lie in [0, 1]");
    if (batch < 1) throw std::invalid_argument("batch must be positive");
    if (steps < 1) throw std::invalid_argument("steps must be positive");
    if (snr_lo_db > snr_hi_db) throw std::invalid_argument("SNR range is inverted");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (plateau_window < 1) throw std::invalid_argument("plateau window must be positive");
}

CmoModels make_cmo_models(const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CmoModels m{make_cross_layer_modulator(cfg.mod_cfg, seed),
                make_csi_codec(cfg.codec_cfg, seed)};
    return m;
}

double loss_combined(const std::vector<std::uint8_t>& bits, const Tensor& llrs,
                     const CsiMatrix& w, const Precoder& p, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("lambda must lie in [0, 1]");
    const double bce = bce_with_grad(bits, llrs, nullptr);
    return lambda * bce - (1.0 - lambda) * sgcs(w, p);
}

TrainSession make_train_session(const TrainConfig& cfg) {
    cfg.validate();
    TrainSession s{make_cmo_models(cfg, cfg.seed), Adam(cfg.learning_rate), 0};
    return s;
}

PhaseReport train_phase1(TrainSession& session, const TrainConfig& cfg) {
    return run_phase(session, cfg, 1, cfg.lambda_phase1);
}

PhaseReport train_phase2(TrainSession& session, const TrainConfig& cfg) {
    if (session.phase_completed < 1)
        throw std::invalid_argument("phase 2 requires a completed phase 1");
    return run_phase(session, cfg, 2, cfg.lambda_phase2);
}

void save_train_session(const TrainSession& session, const std::string& prefix) {
    save_cross_layer_modulator(session.models.modem, prefix + "_modem");
    save_csi_codec(session.models.codec, prefix + "_codec");
    // Optimizer moments in the canonical parameter order.
    Adam& opt = const_cast<Adam&>(session.opt);
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
        entries.emplace_back("adam.m." + std::to_string(i), &opt.first_moments()[i]);
        entries.emplace_back("adam.v." + std::to_string(i), &opt.second_moments()[i]);
    }
    save_tensors(prefix + "_opt", entries,
                 {{"kind", "train_session"},
                  {"phase_completed", std::to_string(session.phase_completed)},
                  {"step_count", std::to_string(opt.step_count())},
                  {"moment_count", std::to_string(opt.first_moments().size())},
                  {"learning_rate", std::to_string(opt.learning_rate())}});
}

TrainSession load_train_session(const std::string& prefix) {
    const TensorArchive opt_archive = load_tensors(prefix + "_opt");
    if (opt_archive.metadata.at("kind") != "train_session")
        throw std::runtime_error("archive does not hold a training session");
    TrainSession s{CmoModels{load_cross_layer_modulator(prefix + "_modem"),
                             load_csi_codec(prefix + "_codec")},
                   Adam(std::stod(opt_archive.metadata.at("learning_rate"))), 0};
    s.phase_completed = std::stoi(opt_archive.metadata.at("phase_completed"));
    const std::size_t count = std::stoul(opt_archive.metadata.at("moment_count"));
    for (std::size_t i = 0; i < count; ++i) {
        s.opt.first_moments().push_back(opt_archive.require("adam.m." + std::to_string(i)));
        s.opt.second_moments().push_back(opt_archive.require("adam.v." + std::to_string(i)));
    }
    s.opt.restore_step_count(std::stol(opt_archive.metadata.at("step_count")));
    return s;
}

void write_phase_report(const PhaseReport& report, const std::string& csv_path,
                        const std::string& json_path) {
    {
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("cannot open " + csv_path);
        csv << "step,loss\n";
        for (std::size_t i = 0; i < report.loss_trace.size(); ++i)
            csv << i << "," << report.loss_trace[i] << "\n";
    }
    nlohmann::json j;
    j["phase"] = report.phase;
    j["lambda"] = report.lambda;
    j["initial_loss"] = report.initial_loss;
    j["final_loss"] = report.final_loss;
    j["final_bce"] = report.final_bce;
    j["final_sgcs"] = report.final_sgcs;
    j["wall_seconds"] = report.wall_seconds;
    j["seed"] = report.seed;
    j["steps_run"] = report.steps_run;
    j["early_stopped"] = report.early_stopped;
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot open " + json_path);
    out << j.dump(2) << "\n";
}

EvalResult evaluate_end_to_end(CmoModels& models, const TrainConfig& cfg,
                               const EvalConfig& eval) {
    cfg.validate();
    if (eval.trials < 1) throw std::invalid_argument("trial count must be positive");
    const int n_re = res_count(cfg);
    const int n_layers = cfg.mod_cfg.n_layers;
    const int b_bits = cfg.mod_cfg.bits_per_re;
    const int sb_width = cfg.num.subband_width();
    const LdpcCode dl_code = ldpc_from_alist(eval.dl_ldpc_path);
    if (dl_code.n != n_re * b_bits)
        throw std::invalid_argument("downlink codeword length must fill the slot exactly");
    const double dl_sigma2 = snr_to_noise_variance(eval.dl_snr_db);

    Rng rng = Rng::stream(eval.seed, 0x65326500ULL);
    EvalResult result;
    result.trials = eval.trials;
    for (int trial = 0; trial < eval.trials; ++trial) {
        const std::uint64_t h_seed = rng.next_u64();
        const std::uint64_t dl_noise_seed = rng.next_u64();
        const std::uint64_t ul_h_seed = rng.next_u64();
        const std::uint64_t ul_noise_seed = rng.next_u64();

        const ChannelRealization h = sample_channel(cfg.profile, cfg.num, h_seed);
        const CsiMatrix w = extract_csi(h, n_layers);
        const CsiPayload sent = encode_csi(models.codec, w, Mode::Infer);
        CsiPayload received = sent;
        if (!eval.ideal_feedback) {
            const ChannelRealization ul =
                sample_channel(eval.ul_profile, eval.ul_num, ul_h_seed);
            UplinkTransportConfig transport;
            transport.noise_variance = snr_to_noise_variance(eval.ul_snr_db);
            transport.qam_bits = eval.ul_qam_bits;
            transport.ldpc_path = eval.ul_ldpc_path;
            received = uplink_feedback(sent, ul, transport, ul_noise_seed).payload;
        }
        const Precoder decoded = decode_csi(models.codec, received, Mode::Infer);
        PrecoderNorm norm;
        const std::vector<CMatrix> wn = norm.forward(decoded.per_subband);

        std::vector<std::uint8_t> info(std::size_t(dl_code.k()));
        for (auto& bit : info) bit = std::uint8_t(rng.below(2));
        const std::vector<std::uint8_t> coded = ldpc_encode(dl_code, info);

        Tensor bits_in({n_re, b_bits});
        for (std::size_t i = 0; i < coded.size(); ++i) bits_in.data[i] = double(coded[i]);
        const Tensor s = cross_layer_modulate(models.modem, bits_in, Mode::Infer);

        ResourceGrid layer_grid(n_layers, cfg.num.n_subcarriers, cfg.num.n_symbols);
        for (int f = 0; f < cfg.num.n_subcarriers; ++f)
            for (int t = 0; t < cfg.num.n_symbols; ++t) {
                const std::size_t row = std::size_t(f) * cfg.num.n_symbols + t;
                for (int l = 0; l < n_layers; ++l)
                    layer_grid.at(l, f, t) =
                        cd(s.data[row * 2 * n_layers + 2 * std::size_t(l)],
                           s.data[row * 2 * n_layers + 2 * std::size_t(l) + 1]);
            }
        Precoder applied;
        applied.per_subband = wn;
        const ResourceGrid x = apply_precoding(applied, layer_grid, cfg.num);
        ChannelRealization noisy = h;
        noisy.noise_variance = dl_sigma2;
        const ResourceGrid y = transmit(noisy, x, dl_noise_seed);

        Tensor eq({n_re, 2 * n_layers});
        for (int f = 0; f < cfg.num.n_subcarriers; ++f)
            for (int t = 0; t < cfg.num.n_symbols; ++t) {
                const CMatrix heq = h.matrix_at(f, t) * wn[std::size_t(f / sb_width)];
                std::vector<cd> yv(std::size_t(cfg.num.n_rx));
                for (int r = 0; r < cfg.num.n_rx; ++r) yv[std::size_t(r)] = y.at(r, f, t);
                const EqualizerOutput eo = lmmse_equalize(heq, yv, dl_sigma2);
                const std::size_t row = std::size_t(f) * cfg.num.n_symbols + t;
                for (int l = 0; l < n_layers; ++l) {
                    eq.data[row * 2 * n_layers + 2 * std::size_t(l)] = eo.x_hat[std::size_t(l)].real();
                    eq.data[row * 2 * n_layers + 2 * std::size_t(l) + 1] =
                        eo.x_hat[std::size_t(l)].imag();
                }
            }
        const Tensor llrs = cross_layer_demodulate(models.modem, eq, Mode::Infer);
        const LdpcDecodeResult decoded_block = ldpc_decode(dl_code, llrs.data);
        if (decoded_block.info_bits != info) ++result.block_errors;
    }
    result.bler = double(result.block_errors) / double(result.trials);
    result.goodput = double(dl_code.k()) * (1.0 - result.bler) / double(n_re);
    return result;
}

}  // namespace crosslink
