#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosslink/cmatrix.hpp"

namespace crosslink {

class Rng;

// OFDM grid dimensions and antenna counts for one link direction.
struct Numerology {
    int n_subcarriers = 0;
    int n_symbols = 0;
    int n_tx = 0;
    int n_rx = 0;
    int n_subbands = 1;
    double subcarrier_spacing_hz = 30e3;

    int res_per_slot() const { return n_subcarriers * n_symbols; }
    int subband_width() const { return n_subcarriers / n_subbands; }
    int subband_of(int subcarrier) const { return subcarrier / subband_width(); }
    // Throws std::invalid_argument on non-positive dims or if n_subbands does
    // not divide n_subcarriers.
    void validate() const;
};

// Tapped-delay-line power-delay profile with one-parameter exponential
// antenna correlation and an optional deterministic component on tap 0.
struct TdlProfile {
    std::string name = "flat";
    std::vector<double> delays_s = {0.0};  // tap delays, seconds
    std::vector<double> powers = {1.0};    // linear tap powers, sum 1
    double rician_k = 0.0;   // linear power ratio of the tap-0 fixed component
    double tx_corr = 0.0;    // exponential correlation coefficient, tx side
    double rx_corr = 0.0;    // exponential correlation coefficient, rx side

    // Throws std::invalid_argument on empty/mismatched taps, powers not
    // summing to 1 (1e-9), negative delays, or correlation outside [0, 1).
    void validate() const;
    static TdlProfile flat();
    // JSON object with keys: name, delays_s (or delays_ns), powers or
    // powers_db (normalized to sum 1 on load), rician_k, tx_corr, rx_corr.
    static TdlProfile from_json_file(const std::string& path);
    static TdlProfile from_json_text(const std::string& text);
};

// Antennas x subcarriers x symbols grid of complex samples.
struct ResourceGrid {
    int n_ant = 0;
    int n_sc = 0;
    int n_sym = 0;
    std::vector<cd> v;

    ResourceGrid() = default;
    ResourceGrid(int ant, int sc, int sym)
        : n_ant(ant), n_sc(sc), n_sym(sym),
          v(static_cast<std::size_t>(ant) * static_cast<std::size_t>(sc) *
            static_cast<std::size_t>(sym)) {}
    cd& at(int a, int f, int t) {
        return v[(static_cast<std::size_t>(a) * static_cast<std::size_t>(n_sc) +
                  static_cast<std::size_t>(f)) * static_cast<std::size_t>(n_sym) +
                 static_cast<std::size_t>(t)];
    }
    const cd& at(int a, int f, int t) const {
        return const_cast<ResourceGrid*>(this)->at(a, f, t);
    }
};

// Frequency response of one slot, constant over the slot (block fading).
// Element accessor is h(rx, tx, subcarrier, symbol); per rx-tx pair the
// average power over taps is 1 in expectation.
struct ChannelRealization {
    Numerology num;
    std::vector<cd> h;  // [rx][tx][subcarrier], symbol-invariant
    double noise_variance = 0.0;

    cd at(int rx, int tx, int f, int /*t*/ = 0) const {
        return h[(static_cast<std::size_t>(rx) * static_cast<std::size_t>(num.n_tx) +
                  static_cast<std::size_t>(tx)) * static_cast<std::size_t>(num.n_subcarriers) +
                 static_cast<std::size_t>(f)];
    }
    // n_rx x n_tx matrix at one resource element.
    CMatrix matrix_at(int f, int t = 0) const;
};

// Draws one block-fading realization: per tap an iid CN(0,1) matrix is mixed
// through Cholesky square roots of exponential correlation matrices, scaled
// by the tap power, and the per-subcarrier response is the tap sum with phase
// ramp exp(-j*2*pi*f_offset*delay). Deterministic per (profile, num, seed).
ChannelRealization sample_channel(const TdlProfile& profile, const Numerology& num,
                                  std::uint64_t seed);

// y = H x + n with n ~ CN(0, noise_variance) iid per receive sample.
// x must be n_tx x n_sc x n_sym; the noise draw is deterministic per seed.
ResourceGrid transmit(const ChannelRealization& h, const ResourceGrid& x, std::uint64_t seed);

// sigma_n^2 = signal_power / 10^(snr_db / 10).
double snr_to_noise_variance(double snr_db, double signal_power = 1.0);

// Exponential correlation matrix R[i][j] = rho^|i-j| (real, symmetric PD for
// 0 <= rho < 1).
CMatrix exp_correlation(int n, double rho);

}  // namespace crosslink
