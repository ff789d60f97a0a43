#include "crosslink/csi_codec.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "crosslink/ldpc.hpp"
#include "crosslink/qam.hpp"
#include "crosslink/serialize.hpp"

namespace crosslink {

void CsiCodecConfig::validate() const {
    if (n_subbands < 1) throw std::invalid_argument("need at least one subband");
    if (n_tx < 1 || n_layers < 1 || n_layers > n_tx)
        throw std::invalid_argument("layer count must be 1..n_tx");
    if (embed < 1 || heads < 1 || blocks < 0)
        throw std::invalid_argument("transformer dimensions must be positive");
    if (embed % heads != 0)
        throw std::invalid_argument("embedding width must divide into heads");
    if (form == FeedbackForm::Bits && n_bits < 1)
        throw std::invalid_argument("bit budget must be positive");
    if (form == FeedbackForm::Symbols && n_csi < 1)
        throw std::invalid_argument("symbol budget must be positive");
}

namespace {

// Pre-norm transformer block appended in place; returns the graph.
void append_transformer_block(Graph& g, int embed, int heads,
                              const std::string& prefix) {
    const int block_input = g.last_index();
    g.layer_norm(embed, prefix + "ln1");
    g.multi_head_attention(embed, heads, prefix + "mha");
    g.residual_add(block_input, prefix + "add1");
    const int mid = g.last_index();
    g.layer_norm(embed, prefix + "ln2");
    g.dense(embed, embed, prefix + "ff1").relu();
    g.dense(embed, embed, prefix + "ff2");
    g.residual_add(mid, prefix + "add2");
}

Graph build_encoder(const CsiCodecConfig& cfg) {
    Graph g;
    g.name = "enc";
    const int t2 = 2 * cfg.coeffs();
    g.dense(t2, cfg.embed, "embed");
    for (int b = 0; b < cfg.blocks; ++b)
        append_transformer_block(g, cfg.embed, cfg.heads, "b" + std::to_string(b));
    g.layer_norm(cfg.embed, "ln_out");
    g.dense(cfg.embed, t2, "proj");
    g.reshape({std::int64_t(cfg.n_subbands) * t2}, "flat");
    if (cfg.form == FeedbackForm::Symbols) {
        g.dense(cfg.n_subbands * t2, 2 * cfg.n_csi, "out");
        g.unit_power_norm(PowerScope::PerSample, "norm");
    } else {
        g.dense(cfg.n_subbands * t2, cfg.n_bits, "out");
    }
    return g;
}

Graph build_decoder(const CsiCodecConfig& cfg) {
    Graph g;
    g.name = "dec";
    const int t2 = 2 * cfg.coeffs();
    const int in =
        cfg.form == FeedbackForm::Symbols ? 2 * cfg.n_csi : cfg.n_bits;
    g.dense(in, cfg.n_subbands * t2, "expand");
    g.reshape({cfg.n_subbands, t2}, "tokens");
    g.dense(t2, cfg.embed, "embed");
    for (int b = 0; b < cfg.blocks; ++b)
        append_transformer_block(g, cfg.embed, cfg.heads, "b" + std::to_string(b));
    g.layer_norm(cfg.embed, "ln_out");
    g.dense(cfg.embed, t2, "proj");
    return g;
}

}  // namespace

CsiCodec make_csi_codec(const CsiCodecConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CsiCodec codec;
    codec.cfg = cfg;
    codec.encoder = build_encoder(cfg);
    codec.decoder = build_decoder(cfg);
    Rng enc_rng = Rng::stream(seed, 0x656e63);
    Rng dec_rng = Rng::stream(seed, 0x646563);
    codec.encoder.init_params(enc_rng);
    codec.decoder.init_params(dec_rng);
    return codec;
}

Tensor csi_to_tensor(const CsiMatrix& w) {
    const int t2 = 2 * w.n_tx * w.n_layers;
    Tensor out({1, w.n_subbands, t2});
    for (int k = 0; k < w.n_subbands; ++k) {
        double* row = out.data.data() + std::size_t(k) * std::size_t(t2);
        for (int l = 0; l < w.n_layers; ++l) {
            for (int t = 0; t < w.n_tx; ++t) {
                const std::complex<double> v = w.at(k, l, t);
                row[2 * (l * w.n_tx + t)] = v.real();
                row[2 * (l * w.n_tx + t) + 1] = v.imag();
            }
        }
    }
    return out;
}

Precoder tensor_to_precoder(const Tensor& decoded, const CsiCodecConfig& cfg) {
    const int t2 = 2 * cfg.coeffs();
    if (decoded.size() != std::int64_t(cfg.n_subbands) * t2)
        throw std::invalid_argument("decoded tensor does not match codec shape");
    Precoder p;
    p.per_subband.reserve(std::size_t(cfg.n_subbands));
    for (int k = 0; k < cfg.n_subbands; ++k) {
        const double* row = decoded.data.data() + std::size_t(k) * std::size_t(t2);
        CMatrix m(cfg.n_tx, cfg.n_layers);
        for (int l = 0; l < cfg.n_layers; ++l)
            for (int t = 0; t < cfg.n_tx; ++t)
                m.at(t, l) = {row[2 * (l * cfg.n_tx + t)],
                              row[2 * (l * cfg.n_tx + t) + 1]};
        p.per_subband.push_back(std::move(m));
    }
    return p;
}

CsiPayload encode_csi(CsiCodec& codec, const CsiMatrix& w, Mode mode) {
    if (w.n_subbands != codec.cfg.n_subbands || w.n_tx != codec.cfg.n_tx ||
        w.n_layers != codec.cfg.n_layers)
        throw std::invalid_argument("feedback matrix does not match codec shape");
    const Tensor out = codec.encoder.forward(csi_to_tensor(w), mode);
    CsiPayload payload;
    payload.form = codec.cfg.form;
    if (codec.cfg.form == FeedbackForm::Bits) {
        payload.bits.resize(std::size_t(codec.cfg.n_bits));
        for (int i = 0; i < codec.cfg.n_bits; ++i)
            payload.bits[std::size_t(i)] = out[std::size_t(i)] >= 0.0 ? 1 : 0;
    } else {
        payload.symbols.resize(std::size_t(codec.cfg.n_csi));
        for (int i = 0; i < codec.cfg.n_csi; ++i)
            payload.symbols[std::size_t(i)] = {out[std::size_t(2 * i)],
                                               out[std::size_t(2 * i + 1)]};
    }
    return payload;
}

Precoder decode_csi(CsiCodec& codec, const CsiPayload& payload, Mode mode) {
    if (payload.form != codec.cfg.form)
        throw std::invalid_argument("payload form does not match codec");
    Tensor in;
    if (payload.form == FeedbackForm::Bits) {
        if (int(payload.bits.size()) != codec.cfg.n_bits)
            throw std::invalid_argument("bit payload length mismatch");
        in = Tensor({1, codec.cfg.n_bits});
        for (int i = 0; i < codec.cfg.n_bits; ++i)
            in[std::size_t(i)] = payload.bits[std::size_t(i)] ? 1.0 : -1.0;
    } else {
        if (int(payload.symbols.size()) != codec.cfg.n_csi)
            throw std::invalid_argument("symbol payload length mismatch");
        in = Tensor({1, 2 * codec.cfg.n_csi});
        for (int i = 0; i < codec.cfg.n_csi; ++i) {
            in[std::size_t(2 * i)] = payload.symbols[std::size_t(i)].real();
            in[std::size_t(2 * i + 1)] = payload.symbols[std::size_t(i)].imag();
        }
    }
    const Tensor out = codec.decoder.forward(in, mode);
    return tensor_to_precoder(out, codec.cfg);
}

namespace {

// Per-RE maximum-ratio combining over the SIMO uplink.  Returns the combined
// symbols and the effective post-combining noise variance per RE.
void mrc_receive(const ChannelRealization& ul, const ResourceGrid& y,
                 std::size_t n_symbols, std::vector<std::complex<double>>& out,
                 std::vector<double>& noise_var, double sigma2) {
    const int n_rx = ul.num.n_rx;
    const int n_sc = ul.num.n_subcarriers;
    out.resize(n_symbols);
    noise_var.resize(n_symbols);
    for (std::size_t i = 0; i < n_symbols; ++i) {
        const int f = int(i) % n_sc;
        const int t = int(i) / n_sc;
        std::complex<double> acc = 0.0;
        double h2 = 0.0;
        for (int r = 0; r < n_rx; ++r) {
            const std::complex<double> h = ul.at(r, 0, f);
            acc += std::conj(h) * y.at(r, f, t);
            h2 += std::norm(h);
        }
        if (h2 <= 0.0)
            throw std::runtime_error("uplink channel has a zero-energy subcarrier");
        out[i] = acc / h2;
        noise_var[i] = sigma2 / h2;
    }
}

}  // namespace

UplinkResult uplink_feedback(const CsiPayload& sent,
                             const ChannelRealization& ul_channel,
                             const UplinkTransportConfig& cfg,
                             std::uint64_t noise_seed) {
    const Numerology& num = ul_channel.num;
    if (num.n_tx != 1)
        throw std::invalid_argument("feedback transport expects a single-antenna transmitter");
    const std::size_t budget =
        std::size_t(num.n_subcarriers) * std::size_t(num.n_symbols);

    // Build the transmit symbol stream.
    std::vector<std::complex<double>> stream;
    const QamConstellation qam =
        sent.form == FeedbackForm::Bits ? make_qam(cfg.qam_bits) : make_qam(2);
    LdpcCode code;
    if (sent.form == FeedbackForm::Bits) {
        if (cfg.ldpc_path.empty())
            throw std::invalid_argument("bit-form transport needs a channel code");
        code = ldpc_from_alist(cfg.ldpc_path);
        if (code.k() != int(sent.bits.size()))
            throw std::invalid_argument("channel code length does not match payload");
        if (code.n % qam.bits_per_symbol != 0)
            throw std::invalid_argument("coded length must fill whole symbols");
        stream = qam_modulate(qam, ldpc_encode(code, sent.bits));
    } else {
        stream = sent.symbols;
    }
    if (stream.size() > budget)
        throw std::invalid_argument("payload exceeds the uplink RE budget");

    // One symbol per RE, subcarrier-major.
    ResourceGrid x(1, num.n_subcarriers, num.n_symbols);
    for (std::size_t i = 0; i < stream.size(); ++i)
        x.at(0, int(i) % num.n_subcarriers, int(i) / num.n_subcarriers) = stream[i];

    ChannelRealization ul = ul_channel;
    ul.noise_variance = cfg.noise_variance;
    const ResourceGrid y = transmit(ul, x, noise_seed);

    std::vector<std::complex<double>> combined;
    std::vector<double> noise_var;
    mrc_receive(ul, y, stream.size(), combined, noise_var, cfg.noise_variance);

    UplinkResult result;
    result.payload.form = sent.form;
    if (sent.form == FeedbackForm::Symbols) {
        result.payload.symbols = std::move(combined);
        return result;
    }

    // Demap with the per-RE effective noise variance, then decode.
    std::vector<double> llrs(std::size_t(code.n));
    for (std::size_t i = 0; i < combined.size(); ++i) {
        const double sigma2 = std::max(noise_var[i], 1e-300);
        qam_demodulate_maxlog(qam, combined[i], 1.0, sigma2,
                              llrs.data() + i * std::size_t(qam.bits_per_symbol));
    }
    const LdpcDecodeResult decoded = ldpc_decode(code, llrs);
    result.payload.bits = decoded.info_bits;
    result.decode_ok = decoded.converged;
    return result;
}

std::string payload_to_hex(const CsiPayload& payload) {
    if (payload.form != FeedbackForm::Bits)
        throw std::invalid_argument("hex dump applies to bit payloads");
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve((payload.bits.size() + 3) / 4);
    for (std::size_t i = 0; i < payload.bits.size(); i += 4) {
        int nibble = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            nibble <<= 1;
            if (i + j < payload.bits.size() && payload.bits[i + j]) nibble |= 1;
        }
        out.push_back(digits[nibble]);
    }
    return out;
}

void dump_payload_csv(const CsiPayload& payload, const std::string& path) {
    if (payload.form != FeedbackForm::Symbols)
        throw std::invalid_argument("csv dump applies to symbol payloads");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "re,im\n";
    out.precision(17);
    for (const auto& s : payload.symbols)
        out << s.real() << "," << s.imag() << "\n";
    if (!out) throw std::runtime_error("write failed for " + path);
}

void save_csi_codec(const CsiCodec& codec, const std::string& prefix) {
    std::vector<Tensor> scratch_a, scratch_b;
    auto entries = graph_state(codec.encoder, scratch_a);
    auto dec_entries = graph_state(codec.decoder, scratch_b);
    entries.insert(entries.end(), dec_entries.begin(), dec_entries.end());
    const std::map<std::string, std::string> metadata = {
        {"kind", "csi_codec"},
        {"n_subbands", std::to_string(codec.cfg.n_subbands)},
        {"n_tx", std::to_string(codec.cfg.n_tx)},
        {"n_layers", std::to_string(codec.cfg.n_layers)},
        {"embed", std::to_string(codec.cfg.embed)},
        {"heads", std::to_string(codec.cfg.heads)},
        {"blocks", std::to_string(codec.cfg.blocks)},
        {"form", codec.cfg.form == FeedbackForm::Bits ? "bits" : "symbols"},
        {"n_bits", std::to_string(codec.cfg.n_bits)},
        {"n_csi", std::to_string(codec.cfg.n_csi)},
    };
    save_tensors(prefix, entries, metadata);
}

CsiCodec load_csi_codec(const std::string& prefix) {
    const TensorArchive archive = load_tensors(prefix);
    const auto need = [&](const std::string& key) {
        auto it = archive.metadata.find(key);
        if (it == archive.metadata.end())
            throw std::runtime_error("model archive missing metadata key " + key);
        return it->second;
    };
    if (need("kind") != "csi_codec")
        throw std::runtime_error("archive does not hold a feedback codec");
    CsiCodecConfig cfg;
    cfg.n_subbands = std::stoi(need("n_subbands"));
    cfg.n_tx = std::stoi(need("n_tx"));
    cfg.n_layers = std::stoi(need("n_layers"));
    cfg.embed = std::stoi(need("embed"));
    cfg.heads = std::stoi(need("heads"));
    cfg.blocks = std::stoi(need("blocks"));
    cfg.form = need("form") == "bits" ? FeedbackForm::Bits : FeedbackForm::Symbols;
    cfg.n_bits = std::stoi(need("n_bits"));
    cfg.n_csi = std::stoi(need("n_csi"));
    cfg.validate();
    CsiCodec codec;
    codec.cfg = cfg;
    codec.encoder = build_encoder(cfg);
    codec.decoder = build_decoder(cfg);
    load_graph_state(codec.encoder, archive);
    load_graph_state(codec.decoder, archive);
    return codec;
}

}  // namespace crosslink
