#include "crosslink/channel.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

#include "crosslink/rng.hpp"

namespace crosslink {

void Numerology::validate() const {
    if (n_subcarriers <= 0 || n_symbols <= 0 || n_tx <= 0 || n_rx <= 0 || n_subbands <= 0)
        throw std::invalid_argument("Numerology: all dimensions must be positive");
    if (n_subcarriers % n_subbands != 0)
        throw std::invalid_argument("Numerology: n_subbands must divide n_subcarriers");
    if (subcarrier_spacing_hz <= 0.0)
        throw std::invalid_argument("Numerology: subcarrier spacing must be positive");
}

void TdlProfile::validate() const {
    if (delays_s.empty() || delays_s.size() != powers.size())
        throw std::invalid_argument("TdlProfile: delays and powers must be non-empty and match");
    double sum = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        if (powers[i] < 0.0) throw std::invalid_argument("TdlProfile: negative tap power");
        if (delays_s[i] < 0.0) throw std::invalid_argument("TdlProfile: negative tap delay");
        sum += powers[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("TdlProfile: tap powers must sum to 1");
    if (rician_k < 0.0) throw std::invalid_argument("TdlProfile: rician_k must be >= 0");
    if (tx_corr < 0.0 || tx_corr >= 1.0 || rx_corr < 0.0 || rx_corr >= 1.0)
        throw std::invalid_argument("TdlProfile: correlation must lie in [0, 1)");
}

TdlProfile TdlProfile::flat() { return TdlProfile{}; }

namespace {

TdlProfile profile_from_json(const nlohmann::json& j, const std::string& origin) {
    TdlProfile p;
    p.name = j.value("name", std::string("unnamed"));
    if (j.contains("delays_s"))
        p.delays_s = j.at("delays_s").get<std::vector<double>>();
    else if (j.contains("delays_ns")) {
        p.delays_s = j.at("delays_ns").get<std::vector<double>>();
        for (double& d : p.delays_s) d *= 1e-9;
    } else {
        throw std::runtime_error("TdlProfile: " + origin + " has no delays_s/delays_ns");
    }
    if (j.contains("powers")) {
        p.powers = j.at("powers").get<std::vector<double>>();
    } else if (j.contains("powers_db")) {
        p.powers = j.at("powers_db").get<std::vector<double>>();
        for (double& v : p.powers) v = std::pow(10.0, v / 10.0);
    } else {
        throw std::runtime_error("TdlProfile: " + origin + " has no powers/powers_db");
    }
    // Normalize so the loaded profile always carries unit total power.
    double sum = 0.0;
    for (double v : p.powers) sum += v;
    if (sum <= 0.0) throw std::runtime_error("TdlProfile: " + origin + " has zero total power");
    for (double& v : p.powers) v /= sum;
    p.rician_k = j.value("rician_k", 0.0);
    p.tx_corr = j.value("tx_corr", 0.0);
    p.rx_corr = j.value("rx_corr", 0.0);
    p.validate();
    return p;
}

}  // namespace

TdlProfile TdlProfile::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("TdlProfile: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return profile_from_json(j, path);
}

TdlProfile TdlProfile::from_json_text(const std::string& text) {
    return profile_from_json(nlohmann::json::parse(text), "inline profile");
}

CMatrix ChannelRealization::matrix_at(int f, int t) const {
    CMatrix m(num.n_rx, num.n_tx);
    for (int r = 0; r < num.n_rx; ++r)
        for (int c = 0; c < num.n_tx; ++c) m.at(r, c) = at(r, c, f, t);
    return m;
}

CMatrix exp_correlation(int n, double rho) {
    CMatrix r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r.at(i, j) = std::pow(rho, std::abs(i - j));
    return r;
}

ChannelRealization sample_channel(const TdlProfile& profile, const Numerology& num,
                                  std::uint64_t seed) {
    profile.validate();
    num.validate();

    Rng rng = Rng::stream(seed, 0x636861);  // dedicated substream for tap draws
    const int n_taps = static_cast<int>(profile.delays_s.size());
    const int nr = num.n_rx;
    const int nt = num.n_tx;

    const bool corr = profile.tx_corr > 0.0 || profile.rx_corr > 0.0;
    CMatrix rx_sqrt, tx_sqrt_t;
    if (corr) {
        rx_sqrt = cholesky(exp_correlation(nr, profile.rx_corr));
        // Right-multiplying by the transpose of the tx Cholesky factor gives
        // E[vec(H) vec(H)^H] = R_tx (x) R_rx with unit diagonal preserved.
        CMatrix tx_sqrt = cholesky(exp_correlation(nt, profile.tx_corr));
        tx_sqrt_t = CMatrix(nt, nt);
        for (int i = 0; i < nt; ++i)
            for (int j = 0; j < nt; ++j) tx_sqrt_t.at(i, j) = tx_sqrt.at(j, i);
    }

    // Per-tap spatial gain matrices.
    std::vector<CMatrix> taps;
    taps.reserve(static_cast<std::size_t>(n_taps));
    for (int l = 0; l < n_taps; ++l) {
        CMatrix g(nr, nt);
        for (int r = 0; r < nr; ++r)
            for (int c = 0; c < nt; ++c) g.at(r, c) = rng.cnormal(1.0);
        if (corr) g = rx_sqrt * g * tx_sqrt_t;
        double p = profile.powers[static_cast<std::size_t>(l)];
        if (l == 0 && profile.rician_k > 0.0) {
            // Fixed component: unit-phase matrix carrying K/(K+1) of the tap power.
            const double k = profile.rician_k;
            const double fixed = std::sqrt(p * k / (k + 1.0));
            const double scatter = std::sqrt(p * 1.0 / (k + 1.0));
            for (int r = 0; r < nr; ++r)
                for (int c = 0; c < nt; ++c)
                    g.at(r, c) = fixed + scatter * g.at(r, c);
        } else {
            const double s = std::sqrt(p);
            for (cd& v : g.a) v *= s;
        }
        taps.push_back(std::move(g));
    }

    ChannelRealization out;
    out.num = num;
    out.h.resize(static_cast<std::size_t>(nr) * static_cast<std::size_t>(nt) *
                 static_cast<std::size_t>(num.n_subcarriers));
    for (int f = 0; f < num.n_subcarriers; ++f) {
        for (int r = 0; r < nr; ++r)
            for (int c = 0; c < nt; ++c) {
                cd acc = 0.0;
                for (int l = 0; l < n_taps; ++l) {
                    const double phase = -2.0 * std::numbers::pi * num.subcarrier_spacing_hz *
                                         static_cast<double>(f) *
                                         profile.delays_s[static_cast<std::size_t>(l)];
                    acc += taps[static_cast<std::size_t>(l)].at(r, c) *
                           cd(std::cos(phase), std::sin(phase));
                }
                out.h[(static_cast<std::size_t>(r) * static_cast<std::size_t>(nt) +
                       static_cast<std::size_t>(c)) * static_cast<std::size_t>(num.n_subcarriers) +
                      static_cast<std::size_t>(f)] = acc;
            }
    }
    return out;
}

ResourceGrid transmit(const ChannelRealization& h, const ResourceGrid& x, std::uint64_t seed) {
    const Numerology& num = h.num;
    if (x.n_ant != num.n_tx || x.n_sc != num.n_subcarriers || x.n_sym != num.n_symbols)
        throw std::invalid_argument("transmit: input grid does not match channel numerology");
    if (h.noise_variance < 0.0)
        throw std::invalid_argument("transmit: negative noise variance");

    Rng rng = Rng::stream(seed, 0x6e6f69);  // dedicated substream for noise draws
    ResourceGrid y(num.n_rx, num.n_subcarriers, num.n_symbols);
    for (int f = 0; f < num.n_subcarriers; ++f)
        for (int t = 0; t < num.n_symbols; ++t)
            for (int r = 0; r < num.n_rx; ++r) {
                cd acc = 0.0;
                for (int c = 0; c < num.n_tx; ++c) acc += h.at(r, c, f, t) * x.at(c, f, t);
                if (h.noise_variance > 0.0) acc += rng.cnormal(h.noise_variance);
                y.at(r, f, t) = acc;
            }
    return y;
}

double snr_to_noise_variance(double snr_db, double signal_power) {
    if (signal_power <= 0.0)
        throw std::invalid_argument("snr_to_noise_variance: signal power must be positive");
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

}  // namespace crosslink
