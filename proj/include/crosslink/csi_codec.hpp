#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/graph.hpp"
#include "crosslink/precoding.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Learned feedback codec: a per-subband transformer encoder compresses the
// eigenvector matrix into either a hard bit payload or a unit-power complex
// symbol payload, and a mirrored decoder expands the received payload
// directly into per-subband precoding matrices.
enum class FeedbackForm { Bits, Symbols };

struct CsiCodecConfig {
    int n_subbands = 3;
    int n_tx = 8;
    int n_layers = 2;
    int embed = 256;
    int heads = 4;
    int blocks = 6;
    FeedbackForm form = FeedbackForm::Symbols;
    int n_bits = 192;  // bit-form bottleneck width
    int n_csi = 96;    // symbol-form complex symbol budget

    int coeffs() const { return n_tx * n_layers; }
    void validate() const;
};

struct CsiCodec {
    CsiCodecConfig cfg;
    Graph encoder;  // [batch, n_sb, 2*coeffs] -> payload features
    Graph decoder;  // payload features -> [batch, n_sb, 2*coeffs]
};

CsiCodec make_csi_codec(const CsiCodecConfig& cfg, std::uint64_t seed);

// Feedback payload: exactly one of the two carriers is populated.
struct CsiPayload {
    FeedbackForm form = FeedbackForm::Symbols;
    std::vector<std::uint8_t> bits;               // 0/1 values
    std::vector<std::complex<double>> symbols;    // unit average power
    std::size_t size() const {
        return form == FeedbackForm::Bits ? bits.size() : symbols.size();
    }
};

// Interleaved real view of a CSI matrix, shape [1, n_sb, 2*coeffs].
Tensor csi_to_tensor(const CsiMatrix& w);

// Decoder output back to per-subband matrices (columns = layers).
Precoder tensor_to_precoder(const Tensor& decoded, const CsiCodecConfig& cfg);

// Encoder forward.  Bit form applies hard sign quantization to the bottleneck
// logits (the straight-through relaxation lives in the training pipeline);
// symbol form returns the normalized complex symbols.
CsiPayload encode_csi(CsiCodec& codec, const CsiMatrix& w, Mode mode);

// Decoder forward.  Bit payloads enter the decoder as -1/+1 features.
Precoder decode_csi(CsiCodec& codec, const CsiPayload& payload, Mode mode);

// Uplink transport of a payload over a SIMO channel (single transmit
// antenna).  Symbols are mapped one per RE in subcarrier-major order and
// maximum-ratio combined at the receiver; bit payloads are LDPC-coded,
// QAM-mapped, transmitted the same way, then demapped and decoded.
struct UplinkTransportConfig {
    double noise_variance = 0.0;
    // Bit form only:
    int qam_bits = 4;            // 4 = 16QAM, 6 = 64QAM, 8 = 256QAM
    std::string ldpc_path;       // code with k matching the payload length
};

struct UplinkResult {
    CsiPayload payload;   // equalized symbols, or decoded bits
    bool decode_ok = true;  // bit form: decoder syndrome check
};

UplinkResult uplink_feedback(const CsiPayload& sent,
                             const ChannelRealization& ul_channel,
                             const UplinkTransportConfig& cfg,
                             std::uint64_t noise_seed);

// Payload dumps for debugging: hex string for bit payloads ("a3f0...", MSB
// first within each byte, zero-padded tail), CSV rows "re,im" for symbols.
std::string payload_to_hex(const CsiPayload& payload);
void dump_payload_csv(const CsiPayload& payload, const std::string& path);

// Archive round trip (architecture in metadata, tensors in the payload).
void save_csi_codec(const CsiCodec& codec, const std::string& prefix);
CsiCodec load_csi_codec(const std::string& prefix);

}  // namespace crosslink
