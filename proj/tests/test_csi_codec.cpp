#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "crosslink/csi_codec.hpp"
#include "crosslink/rng.hpp"

using namespace crosslink;

namespace {

CsiCodecConfig desk_config(FeedbackForm form) {
    CsiCodecConfig cfg;
    cfg.n_subbands = 3;
    cfg.n_tx = 4;
    cfg.n_layers = 2;
    cfg.embed = 32;
    cfg.heads = 2;
    cfg.blocks = 2;
    cfg.form = form;
    cfg.n_bits = 192;
    cfg.n_csi = 96;
    return cfg;
}

CsiMatrix random_csi(int n_subbands, int n_tx, int n_layers, std::uint64_t seed) {
    CsiMatrix w;
    w.n_subbands = n_subbands;
    w.n_tx = n_tx;
    w.n_layers = n_layers;
    w.w.resize(std::size_t(n_subbands) * w.row_len());
    Rng rng(seed);
    // Unit-norm columns, matching the eigenvector contract.
    for (int k = 0; k < n_subbands; ++k) {
        for (int l = 0; l < n_layers; ++l) {
            double norm2 = 0.0;
            for (int t = 0; t < n_tx; ++t) {
                w.at(k, l, t) = rng.cnormal(1.0);
                norm2 += std::norm(w.at(k, l, t));
            }
            for (int t = 0; t < n_tx; ++t) w.at(k, l, t) /= std::sqrt(norm2);
        }
    }
    return w;
}

ChannelRealization unit_simo_channel(int n_sc, int n_rx) {
    Numerology num;
    num.n_subcarriers = n_sc;
    num.n_symbols = 1;
    num.n_tx = 1;
    num.n_rx = n_rx;
    num.n_subbands = 1;
    ChannelRealization ul;
    ul.num = num;
    ul.h.assign(std::size_t(n_rx) * std::size_t(n_sc), 1.0);
    return ul;
}

}  // namespace

TEST_CASE("config validation") {
    CsiCodecConfig cfg = desk_config(FeedbackForm::Symbols);
    cfg.heads = 3;  // 32 % 3 != 0
    CHECK_THROWS_AS(make_csi_codec(cfg, 1), std::invalid_argument);
    cfg = desk_config(FeedbackForm::Symbols);
    cfg.n_layers = 5;  // exceeds n_tx = 4
    CHECK_THROWS_AS(make_csi_codec(cfg, 1), std::invalid_argument);
    cfg = desk_config(FeedbackForm::Bits);
    cfg.n_bits = 0;
    CHECK_THROWS_AS(make_csi_codec(cfg, 1), std::invalid_argument);
}

TEST_CASE("tensor layout round trip") {
    CsiMatrix w = random_csi(3, 4, 2, 11);
    const Tensor t = csi_to_tensor(w);
    CHECK(t.shape == std::vector<std::int64_t>({1, 3, 16}));
    // Row k, layer l, antenna a sits at interleaved offset 2*(l*n_tx + a).
    CHECK(t.data[std::size_t(1 * 16 + 2 * (1 * 4 + 2))] ==
          w.at(1, 1, 2).real());
    CHECK(t.data[std::size_t(1 * 16 + 2 * (1 * 4 + 2) + 1)] ==
          w.at(1, 1, 2).imag());

    Tensor flat({1, 3, 16});
    flat.data = t.data;
    const Precoder p = tensor_to_precoder(flat, desk_config(FeedbackForm::Symbols));
    REQUIRE(p.per_subband.size() == 3);
    CHECK(p.per_subband[0].rows == 4);
    CHECK(p.per_subband[0].cols == 2);
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 2; ++l)
            for (int a = 0; a < 4; ++a)
                CHECK(p.per_subband[std::size_t(k)].at(a, l) == w.at(k, l, a));
}

TEST_CASE("symbol payload has unit average power structurally") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Symbols), 5);
    for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
        const CsiMatrix w = random_csi(3, 4, 2, s);
        for (Mode mode : {Mode::Infer, Mode::Population}) {
            const CsiPayload payload = encode_csi(codec, w, mode);
            REQUIRE(payload.symbols.size() == 96);
            double power = 0.0;
            for (const auto& v : payload.symbols) power += std::norm(v);
            CHECK(power / 96.0 == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("encoding is deterministic") {
    CsiCodec a = make_csi_codec(desk_config(FeedbackForm::Symbols), 9);
    CsiCodec b = make_csi_codec(desk_config(FeedbackForm::Symbols), 9);
    const CsiMatrix w = random_csi(3, 4, 2, 77);
    const CsiPayload pa = encode_csi(a, w, Mode::Infer);
    const CsiPayload pb = encode_csi(b, w, Mode::Infer);
    const CsiPayload pa2 = encode_csi(a, w, Mode::Infer);
    CHECK(pa.symbols == pb.symbols);
    CHECK(pa.symbols == pa2.symbols);
}

TEST_CASE("bit payload length and content") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Bits), 21);
    const CsiMatrix w = random_csi(3, 4, 2, 5);
    const CsiPayload payload = encode_csi(codec, w, Mode::Infer);
    CHECK(payload.form == FeedbackForm::Bits);
    CHECK(payload.bits.size() == 192);
    int ones = 0;
    for (auto b : payload.bits) {
        CHECK((b == 0 || b == 1));
        ones += b;
    }
    // Random logits land on both sides of zero.
    CHECK(ones > 0);
    CHECK(ones < 192);
}

TEST_CASE("decoder produces per-subband matrices; zero output stage gives zero precoder") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Symbols), 33);
    const CsiMatrix w = random_csi(3, 4, 2, 6);
    const CsiPayload payload = encode_csi(codec, w, Mode::Infer);
    const Precoder p = decode_csi(codec, payload, Mode::Infer);
    REQUIRE(p.per_subband.size() == 3);
    CHECK(p.per_subband[0].rows == 4);
    CHECK(p.per_subband[0].cols == 2);

    // Zero the final projection: any payload then decodes to the zero matrix.
    for (auto& t : codec.decoder.nodes.back().params) t.fill(0.0);
    CsiPayload zero_payload;
    zero_payload.form = FeedbackForm::Symbols;
    zero_payload.symbols.assign(96, 0.0);
    const Precoder z = decode_csi(codec, zero_payload, Mode::Infer);
    for (const auto& m : z.per_subband)
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < m.cols; ++c)
                CHECK(std::abs(m.at(r, c)) == 0.0);
}

TEST_CASE("payload form and shape mismatches throw") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Symbols), 3);
    CsiMatrix wrong = random_csi(3, 4, 1, 2);
    CHECK_THROWS_AS(encode_csi(codec, wrong, Mode::Infer), std::invalid_argument);
    CsiPayload bits;
    bits.form = FeedbackForm::Bits;
    bits.bits.assign(192, 0);
    CHECK_THROWS_AS(decode_csi(codec, bits, Mode::Infer), std::invalid_argument);
    CsiPayload short_symbols;
    short_symbols.form = FeedbackForm::Symbols;
    short_symbols.symbols.assign(95, 0.0);
    CHECK_THROWS_AS(decode_csi(codec, short_symbols, Mode::Infer),
                    std::invalid_argument);
}

TEST_CASE("noiseless symbol uplink is transparent") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Symbols), 13);
    const CsiMatrix w = random_csi(3, 4, 2, 8);
    const CsiPayload sent = encode_csi(codec, w, Mode::Infer);

    UplinkTransportConfig cfg;
    cfg.noise_variance = 0.0;

    // Unit channel: exact pass-through.
    const ChannelRealization unit = unit_simo_channel(96, 1);
    const UplinkResult over_unit = uplink_feedback(sent, unit, cfg, 1);
    REQUIRE(over_unit.payload.symbols.size() == sent.symbols.size());
    for (std::size_t i = 0; i < sent.symbols.size(); ++i)
        CHECK(std::abs(over_unit.payload.symbols[i] - sent.symbols[i]) == 0.0);

    // Random SIMO channel: combining is unbiased, so still exact to rounding.
    Numerology num = unit.num;
    num.n_rx = 8;
    TdlProfile profile = TdlProfile::flat();
    const ChannelRealization ul = sample_channel(profile, num, 99);
    const UplinkResult over_fading = uplink_feedback(sent, ul, cfg, 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < sent.symbols.size(); ++i)
        worst = std::max(worst,
                         std::abs(over_fading.payload.symbols[i] - sent.symbols[i]));
    CHECK(worst < 1e-12);

    // Equalized symbols decode to the same precoder as direct composition.
    const Precoder direct = decode_csi(codec, sent, Mode::Infer);
    CsiCodec codec_again = make_csi_codec(desk_config(FeedbackForm::Symbols), 13);
    const Precoder via_uplink =
        decode_csi(codec_again, over_fading.payload, Mode::Infer);
    for (std::size_t k = 0; k < 3; ++k)
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 2; ++c)
                CHECK(std::abs(via_uplink.per_subband[k].at(r, c) -
                               direct.per_subband[k].at(r, c)) < 1e-9);
}

TEST_CASE("bit uplink fills 96 REs at rate 1/2 with 16QAM and survives a clean channel") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Bits), 17);
    const CsiMatrix w = random_csi(3, 4, 2, 4);
    const CsiPayload sent = encode_csi(codec, w, Mode::Infer);
    REQUIRE(sent.bits.size() == 192);

    UplinkTransportConfig cfg;
    cfg.noise_variance = 0.0;
    cfg.qam_bits = 4;
    cfg.ldpc_path = std::string(CROSSLINK_DATA_DIR) + "/ldpc/ldpc_384_192.alist";

    // 192 bits at rate 1/2 -> 384 coded bits -> 96 16QAM symbols: exact fit.
    const ChannelRealization ul = unit_simo_channel(96, 2);
    const UplinkResult clean = uplink_feedback(sent, ul, cfg, 3);
    CHECK(clean.decode_ok);
    CHECK(clean.payload.bits == sent.bits);

    // A 24-RE grid cannot carry the same payload.
    const ChannelRealization small = unit_simo_channel(24, 2);
    CHECK_THROWS_AS(uplink_feedback(sent, small, cfg, 3), std::invalid_argument);

    // Heavy noise produces bit errors or a failed decode.
    UplinkTransportConfig noisy = cfg;
    noisy.noise_variance = 100.0;
    const UplinkResult degraded = uplink_feedback(sent, ul, noisy, 4);
    const bool differs = degraded.payload.bits != sent.bits;
    CHECK((differs || !degraded.decode_ok));
}

TEST_CASE("payload dumps") {
    CsiPayload bits;
    bits.form = FeedbackForm::Bits;
    bits.bits = {1, 0, 1, 0, 0, 0, 1, 1};  // 0xa3
    CHECK(payload_to_hex(bits) == "a3");
    bits.bits.push_back(1);  // ragged tail pads with zeros -> 0b1000
    CHECK(payload_to_hex(bits) == "a38");

    CsiPayload symbols;
    symbols.form = FeedbackForm::Symbols;
    symbols.symbols = {{1.0, -0.5}, {0.25, 2.0}};
    const std::string path = "/tmp/csi_payload.csv";
    dump_payload_csv(symbols, path);
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::string line;
    std::getline(in, line);
    CHECK(line == "re,im");
    std::getline(in, line);
    CHECK(line == "1,-0.5");
    std::getline(in, line);
    CHECK(line == "0.25,2");
    std::remove(path.c_str());

    CHECK_THROWS_AS(payload_to_hex(symbols), std::invalid_argument);
    CHECK_THROWS_AS(dump_payload_csv(bits, path), std::invalid_argument);
}

TEST_CASE("archive round trip preserves the codec bit-for-bit") {
    CsiCodec codec = make_csi_codec(desk_config(FeedbackForm::Bits), 41);
    const std::string prefix = "/tmp/csi_codec_archive";
    save_csi_codec(codec, prefix);
    CsiCodec loaded = load_csi_codec(prefix);
    CHECK(loaded.cfg.form == FeedbackForm::Bits);
    CHECK(loaded.cfg.embed == codec.cfg.embed);

    const CsiMatrix w = random_csi(3, 4, 2, 19);
    const CsiPayload a = encode_csi(codec, w, Mode::Infer);
    const CsiPayload b = encode_csi(loaded, w, Mode::Infer);
    CHECK(a.bits == b.bits);

    const Precoder pa = decode_csi(codec, a, Mode::Infer);
    const Precoder pb = decode_csi(loaded, b, Mode::Infer);
    for (std::size_t k = 0; k < 3; ++k)
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 2; ++c)
                CHECK(pa.per_subband[k].at(r, c) == pb.per_subband[k].at(r, c));

    std::remove((prefix + ".json").c_str());
    std::remove((prefix + ".bin").c_str());
}
