#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "crosslink/csi.hpp"
#include "crosslink/rng.hpp"
#include "crosslink/training.hpp"

using namespace crosslink;

namespace {

// Small shapes keep every case fast while exercising the full pipeline.
TrainConfig mini_config(FeedbackForm form) {
    TrainConfig cfg;
    cfg.num.n_subcarriers = 8;
    cfg.num.n_symbols = 2;
    cfg.num.n_tx = 4;
    cfg.num.n_rx = 2;
    cfg.num.n_subbands = 2;
    cfg.profile = TdlProfile::flat();
    cfg.mod_cfg.bits_per_re = 2;
    cfg.mod_cfg.n_layers = 2;
    cfg.mod_cfg.hidden = 16;
    cfg.mod_cfg.n_dense = 1;
    cfg.mod_cfg.demod_width = 16;
    cfg.mod_cfg.n_res = 1;
    cfg.codec_cfg.n_subbands = 2;
    cfg.codec_cfg.n_tx = 4;
    cfg.codec_cfg.n_layers = 2;
    cfg.codec_cfg.embed = 16;
    cfg.codec_cfg.heads = 2;
    cfg.codec_cfg.blocks = 1;
    cfg.codec_cfg.form = form;
    cfg.codec_cfg.n_bits = 16;
    cfg.codec_cfg.n_csi = 8;
    cfg.batch = 4;
    cfg.steps = 30;
    cfg.seed = 5;
    return cfg;
}

CsiMatrix unit_csi(int n_subbands, int n_tx, int n_layers, std::uint64_t seed) {
    CsiMatrix w;
    w.n_subbands = n_subbands;
    w.n_tx = n_tx;
    w.n_layers = n_layers;
    w.w.resize(std::size_t(n_subbands) * w.row_len());
    Rng rng(seed);
    for (auto& v : w.w) v = rng.cnormal(1.0);
    return w;
}

}  // namespace

TEST_CASE("combined loss values and affinity in lambda") {
    // Perfect saturated LLRs at lambda = 1: loss indistinguishable from zero.
    std::vector<std::uint8_t> bits = {1, 0, 0, 1};
    Tensor llrs({4});
    llrs.data = {-30.0, 30.0, 30.0, -30.0};
    const CsiMatrix w = unit_csi(2, 4, 2, 3);
    Precoder p;
    for (int k = 0; k < 2; ++k) {
        CMatrix m(4, 2);
        for (int l = 0; l < 2; ++l)
            for (int t = 0; t < 4; ++t) m.at(t, l) = w.at(k, l, t);
        p.per_subband.push_back(std::move(m));
    }
    CHECK(loss_combined(bits, llrs, w, p, 1.0) < 1e-12);

    // Matched precoder at lambda = 0: pure negative similarity at its optimum.
    CHECK(loss_combined(bits, llrs, w, p, 0.0) == doctest::Approx(-1.0).epsilon(1e-12));

    // Uninformative LLRs at lambda = 1: ln 2 nats per bit.
    Tensor zeros({4});
    CHECK(loss_combined(bits, zeros, w, p, 1.0) ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));

    // The objective is affine in lambda.
    Rng rng(9);
    for (auto& v : llrs.data) v = rng.normal();
    const double at0 = loss_combined(bits, llrs, w, p, 0.0);
    const double at1 = loss_combined(bits, llrs, w, p, 1.0);
    const double mid = loss_combined(bits, llrs, w, p, 0.5);
    CHECK(mid == doctest::Approx(0.5 * (at0 + at1)).epsilon(1e-12));

    CHECK_THROWS_AS(loss_combined(bits, llrs, w, p, 1.5), std::invalid_argument);
}

TEST_CASE("configuration validation") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.codec_cfg.n_tx = 8;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.mod_cfg.n_layers = 4;  // codec mismatch and more layers than n_rx
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.snr_lo_db = 10.0;
    bad.snr_hi_db = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.lambda_phase1 = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("phase 1 training is deterministic and improves the objective") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    TrainSession a = make_train_session(cfg);
    TrainSession b = make_train_session(cfg);
    const PhaseReport ra = train_phase1(a, cfg);
    const PhaseReport rb = train_phase1(b, cfg);

    REQUIRE(ra.loss_trace.size() == rb.loss_trace.size());
    for (std::size_t i = 0; i < ra.loss_trace.size(); ++i)
        CHECK(ra.loss_trace[i] == rb.loss_trace[i]);
    for (Graph* g : {&a.models.modem.mod, &a.models.codec.encoder}) {
        Graph* other = (g == &a.models.modem.mod) ? &b.models.modem.mod
                                                  : &b.models.codec.encoder;
        const auto pa = g->param_tensors();
        const auto pb = other->param_tensors();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);
    }

    CHECK(ra.phase == 1);
    CHECK(ra.lambda == doctest::Approx(0.5));
    CHECK(ra.steps_run == cfg.steps);
    CHECK(ra.final_loss < ra.initial_loss);
    for (double v : ra.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("phase 2 continues the session and keeps cross-entropy in check") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    cfg.steps = 40;
    TrainSession s = make_train_session(cfg);
    CHECK_THROWS_AS(train_phase2(s, cfg), std::invalid_argument);
    const PhaseReport r1 = train_phase1(s, cfg);
    const PhaseReport r2 = train_phase2(s, cfg);
    CHECK(r2.phase == 2);
    CHECK(r2.lambda == doctest::Approx(1.0));
    // Relaxed objective keeps improving the cross-entropy it now isolates.
    CHECK(r2.final_bce <= r1.final_bce + 1e-9);
    CHECK(s.phase_completed == 2);
}

TEST_CASE("bit-form bottleneck trains through the straight-through path") {
    TrainConfig cfg = mini_config(FeedbackForm::Bits);
    cfg.steps = 20;
    TrainSession s = make_train_session(cfg);
    const PhaseReport r = train_phase1(s, cfg);
    CHECK(r.steps_run == 20);
    for (double v : r.loss_trace) CHECK(std::isfinite(v));
    CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("divergence guard rejects non-finite losses") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    cfg.steps = 2;
    TrainSession s = make_train_session(cfg);
    s.models.modem.mod.nodes.front().params.front().data[0] =
        std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train_phase1(s, cfg), std::runtime_error);
}

TEST_CASE("checkpoint round trip resumes bit-for-bit") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    cfg.steps = 12;
    TrainSession s = make_train_session(cfg);
    train_phase1(s, cfg);
    const std::string prefix = "/tmp/train_session_ckpt";
    save_train_session(s, prefix);
    TrainSession restored = load_train_session(prefix);
    CHECK(restored.phase_completed == 1);

    const PhaseReport cont_a = train_phase2(s, cfg);
    const PhaseReport cont_b = train_phase2(restored, cfg);
    REQUIRE(cont_a.loss_trace.size() == cont_b.loss_trace.size());
    for (std::size_t i = 0; i < cont_a.loss_trace.size(); ++i)
        CHECK(cont_a.loss_trace[i] == cont_b.loss_trace[i]);

    for (const char* suffix :
         {"_modem.json", "_modem.bin", "_codec.json", "_codec.bin", "_opt.json", "_opt.bin"})
        std::remove((prefix + std::string(suffix)).c_str());
}

TEST_CASE("phase report files") {
    PhaseReport r;
    r.phase = 1;
    r.lambda = 0.5;
    r.loss_trace = {1.0, 0.5, 0.25};
    r.initial_loss = 1.0;
    r.final_loss = 0.25;
    r.final_bce = 0.3;
    r.final_sgcs = 0.9;
    r.seed = 7;
    r.steps_run = 3;
    write_phase_report(r, "/tmp/phase_trace.csv", "/tmp/phase_summary.json");
    std::ifstream csv("/tmp/phase_trace.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,loss");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);
    std::ifstream json_in("/tmp/phase_summary.json");
    std::string all((std::istreambuf_iterator<char>(json_in)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("\"final_bce\": 0.3") != std::string::npos);
    std::remove("/tmp/phase_trace.csv");
    std::remove("/tmp/phase_summary.json");
}

TEST_CASE("end-to-end evaluation mechanics") {
    TrainConfig cfg = mini_config(FeedbackForm::Symbols);
    cfg.num.n_subcarriers = 24;
    cfg.num.n_subbands = 3;
    cfg.codec_cfg.n_subbands = 3;
    cfg.codec_cfg.n_csi = 8;
    CmoModels models = make_cmo_models(cfg, 11);

    EvalConfig eval;
    eval.dl_snr_db = 10.0;
    eval.dl_ldpc_path = std::string(CROSSLINK_DATA_DIR) + "/ldpc/ldpc_96_48.alist";
    eval.trials = 12;
    eval.seed = 31;
    const EvalResult a = evaluate_end_to_end(models, cfg, eval);
    CHECK(a.trials == 12);
    CHECK(a.bler >= 0.0);
    CHECK(a.bler <= 1.0);
    CHECK(a.goodput == doctest::Approx(48.0 * (1.0 - a.bler) / 48.0));

    // Deterministic per seed.
    const EvalResult b = evaluate_end_to_end(models, cfg, eval);
    CHECK(a.bler == b.bler);
    CHECK(a.block_errors == b.block_errors);

    // Uplink transport path engages for symbol-form feedback.
    EvalConfig over_air = eval;
    over_air.ideal_feedback = false;
    over_air.ul_snr_db = 40.0;
    over_air.ul_num.n_subcarriers = 8;
    over_air.ul_num.n_symbols = 1;
    over_air.ul_num.n_tx = 1;
    over_air.ul_num.n_rx = 4;
    over_air.ul_num.n_subbands = 1;
    over_air.ul_profile = TdlProfile::flat();
    const EvalResult c = evaluate_end_to_end(models, cfg, over_air);
    CHECK(c.trials == 12);
    CHECK(c.bler >= 0.0);
    CHECK(c.bler <= 1.0);

    // Codeword length must fill the slot exactly.
    EvalConfig wrong = eval;
    wrong.dl_ldpc_path = std::string(CROSSLINK_DATA_DIR) + "/ldpc/ldpc_384_192.alist";
    CHECK_THROWS_AS(evaluate_end_to_end(models, cfg, wrong), std::invalid_argument);
}
