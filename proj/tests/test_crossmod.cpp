#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crosslink/crossmod.hpp"

using namespace crosslink;

namespace {

CrossModConfig desk_config() {
    CrossModConfig cfg;
    cfg.bits_per_re = 4;
    cfg.n_layers = 2;
    cfg.hidden = 32;
    cfg.n_dense = 2;
    cfg.demod_width = 24;
    cfg.n_res = 2;
    return cfg;
}

CrossModConfig full_config(int bits_per_re) {
    CrossModConfig cfg;
    cfg.bits_per_re = bits_per_re;
    cfg.n_layers = 4;
    cfg.hidden = 256;
    cfg.n_dense = 4;
    cfg.demod_width = 256;
    cfg.n_res = 4;
    return cfg;
}

// Closed-form counts for the full-size architecture, derived row by row.
std::int64_t expected_mod_params(int b) {
    const std::int64_t first = std::int64_t(b) * 256 + 256;
    const std::int64_t hidden = 3 * (256LL * 256 + 256);
    const std::int64_t out = 256LL * 8 + 8;
    return first + hidden + out;
}

std::int64_t expected_demod_params(int b) {
    const std::int64_t in = 8LL * 256 + 256;
    const std::int64_t block = 2 * (2LL * 256) + 2 * (256LL * 256 + 256);
    const std::int64_t out = 256LL * b + b;
    return in + 4 * block + out;
}

}  // namespace

TEST_CASE("full-size parameter counts hit the published table") {
    const int payloads[] = {2, 8, 16, 24, 32};
    const double mod_mega[] = {0.200, 0.202, 0.204, 0.206, 0.208};
    const double demod_mega[] = {0.533, 0.535, 0.537, 0.539, 0.541};
    for (int i = 0; i < 5; ++i) {
        const int b = payloads[i];
        CrossLayerModulator m = make_cross_layer_modulator(full_config(b), 1);
        const ModelCost mod = model_cost(m.mod, {b});
        const ModelCost demod = model_cost(m.demod, {8});
        CHECK(mod.params == expected_mod_params(b));
        CHECK(mod.params == 256LL * b + 199688);
        CHECK(demod.params == expected_demod_params(b));
        CHECK(demod.params == 532736 + 257LL * b);
        // Rounded-to-3-decimals millions match the published entries within 1%.
        CHECK(std::abs(double(mod.params) / 1e6 - mod_mega[i]) <
              0.01 * mod_mega[i]);
        CHECK(std::abs(double(demod.params) / 1e6 - demod_mega[i]) <
              0.01 * demod_mega[i]);
    }
}

TEST_CASE("mapper flops follow the 2*in*out convention") {
    CrossLayerModulator m2 = make_cross_layer_modulator(full_config(2), 1);
    const ModelCost c2 = model_cost(m2.mod, {2});
    CHECK(c2.flops == 2 * (2LL * 256) + 3 * 2 * (256LL * 256) + 2 * (256LL * 8));
    CHECK(c2.flops == 398336);  // 0.398 x 10^6

    CrossLayerModulator m32 = make_cross_layer_modulator(full_config(32), 1);
    const ModelCost c32 = model_cost(m32.mod, {32});
    CHECK(c32.flops == 413696);  // 0.414 x 10^6
}

TEST_CASE("enumerated constellation has unit average power for any parameters") {
    for (std::uint64_t seed : {1ULL, 7ULL, 99ULL}) {
        CrossLayerModulator m = make_cross_layer_modulator(desk_config(), seed);
        const ConstellationSet cs = enumerate_constellation(m);
        CHECK(cs.bits == 4);
        CHECK(cs.n_complex == 2);
        CHECK(cs.average_power() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("modulation is deterministic and seed-dependent") {
    CrossLayerModulator a = make_cross_layer_modulator(desk_config(), 5);
    CrossLayerModulator b = make_cross_layer_modulator(desk_config(), 5);
    CrossLayerModulator c = make_cross_layer_modulator(desk_config(), 6);
    const ConstellationSet ca = enumerate_constellation(a);
    const ConstellationSet cb = enumerate_constellation(b);
    const ConstellationSet cc = enumerate_constellation(c);
    CHECK(ca.points == cb.points);
    CHECK(ca.points != cc.points);

    // Identical rows map to identical outputs inside one batch.
    Tensor in({3, 4});
    label_to_bits(9, 4, in.row(0));
    label_to_bits(9, 4, in.row(1));
    label_to_bits(3, 4, in.row(2));
    const Tensor out = cross_layer_modulate(a, in, Mode::Population);
    for (int d = 0; d < 4; ++d) {
        CHECK(out.row(0)[d] == out.row(1)[d]);
    }
}

TEST_CASE("label expansion is most-significant-bit first") {
    double bits[4];
    label_to_bits(0b1010, 4, bits);
    CHECK(bits[0] == 1.0);
    CHECK(bits[1] == 0.0);
    CHECK(bits[2] == 1.0);
    CHECK(bits[3] == 0.0);
}

TEST_CASE("zeroed output stage produces all-zero LLRs") {
    CrossLayerModulator m = make_cross_layer_modulator(desk_config(), 3);
    for (auto& p : m.demod.nodes.back().params) p.fill(0.0);
    Tensor eq({5, 4});
    Rng rng(17);
    for (auto& v : eq.data) v = rng.normal();
    const Tensor llr = cross_layer_demodulate(m, eq, Mode::Infer);
    for (double v : llr.data) CHECK(v == 0.0);
}

TEST_CASE("demapper acts independently per RE") {
    CrossLayerModulator m = make_cross_layer_modulator(desk_config(), 4);
    Tensor eq({6, 4});
    Rng rng(23);
    for (auto& v : eq.data) v = rng.normal();

    // Reversed row order must reverse output rows exactly; batch statistics
    // are permutation-invariant so this holds in every mode.
    Tensor rev({6, 4});
    for (int r = 0; r < 6; ++r)
        for (int d = 0; d < 4; ++d) rev.row(5 - r)[d] = eq.row(r)[d];
    {
        const Tensor out = cross_layer_demodulate(m, eq, Mode::Infer);
        const Tensor out_rev = cross_layer_demodulate(m, rev, Mode::Infer);
        for (int r = 0; r < 6; ++r)
            for (int d = 0; d < 4; ++d)
                CHECK(out.row(r)[d] == out_rev.row(5 - r)[d]);
    }
    {
        // Batch statistics are permutation-invariant up to summation order.
        const Tensor out = cross_layer_demodulate(m, eq, Mode::Population);
        const Tensor out_rev = cross_layer_demodulate(m, rev, Mode::Population);
        for (int r = 0; r < 6; ++r)
            for (int d = 0; d < 4; ++d)
                CHECK(out.row(r)[d] ==
                      doctest::Approx(out_rev.row(5 - r)[d]).epsilon(1e-12));
    }
}

TEST_CASE("shape and config validation") {
    CrossLayerModulator m = make_cross_layer_modulator(desk_config(), 2);
    Tensor bad({3, 5});
    CHECK_THROWS_AS(cross_layer_modulate(m, bad, Mode::Infer), std::invalid_argument);
    CHECK_THROWS_AS(cross_layer_demodulate(m, bad, Mode::Infer), std::invalid_argument);

    CrossModConfig cfg = desk_config();
    cfg.bits_per_re = 0;
    CHECK_THROWS_AS(make_cross_layer_modulator(cfg, 1), std::invalid_argument);
    cfg = desk_config();
    cfg.n_layers = 9;
    CHECK_THROWS_AS(make_cross_layer_modulator(cfg, 1), std::invalid_argument);
    cfg = desk_config();
    cfg.n_dense = 0;
    CHECK_THROWS_AS(make_cross_layer_modulator(cfg, 1), std::invalid_argument);

    CrossModConfig wide = desk_config();
    wide.bits_per_re = 16;
    CrossLayerModulator big = make_cross_layer_modulator(wide, 1);
    CHECK_THROWS_AS(enumerate_constellation(big), std::invalid_argument);
}

TEST_CASE("constellation csv dump") {
    CrossLayerModulator m = make_cross_layer_modulator(desk_config(), 8);
    const ConstellationSet cs = enumerate_constellation(m);
    const std::string path = "/tmp/crossmod_points.csv";
    dump_constellation_csv(cs, path);

    std::ifstream in(path);
    REQUIRE(bool(in));
    std::string header;
    std::getline(in, header);
    CHECK(header == "bits,re0,im0,re1,im1");
    int rows = 0;
    std::string line;
    std::string first;
    while (std::getline(in, line)) {
        if (rows == 0) first = line;
        ++rows;
    }
    CHECK(rows == 16);
    // Row 0 is the all-zeros pattern followed by four coordinates.
    std::stringstream ss(first);
    std::string field;
    std::getline(ss, field, ',');
    CHECK(field == "0000");
    for (int d = 0; d < 4; ++d) {
        std::getline(ss, field, ',');
        CHECK(std::stod(field) == doctest::Approx(cs.point(0)[d]).epsilon(1e-15));
    }
    std::remove(path.c_str());
}

TEST_CASE("archive round trip preserves behavior bit-for-bit") {
    CrossLayerModulator m = make_cross_layer_modulator(desk_config(), 31);

    // Touch batch-norm running statistics so the round trip covers them.
    Tensor warm({8, 4});
    Rng rng(41);
    for (auto& v : warm.data) v = rng.normal();
    (void)cross_layer_demodulate(m, warm, Mode::Train);
    (void)cross_layer_modulate(m, warm, Mode::Train);

    const std::string prefix = "/tmp/crossmod_archive";
    save_cross_layer_modulator(m, prefix);
    CrossLayerModulator r = load_cross_layer_modulator(prefix);
    CHECK(r.cfg.bits_per_re == m.cfg.bits_per_re);
    CHECK(r.cfg.n_res == m.cfg.n_res);

    Tensor probe({6, 4});
    for (auto& v : probe.data) v = rng.normal();
    const Tensor a = cross_layer_modulate(m, probe, Mode::Infer);
    const Tensor b = cross_layer_modulate(r, probe, Mode::Infer);
    CHECK(a.data == b.data);
    const Tensor da = cross_layer_demodulate(m, probe, Mode::Infer);
    const Tensor db = cross_layer_demodulate(r, probe, Mode::Infer);
    CHECK(da.data == db.data);

    CHECK_THROWS_AS(load_cross_layer_modulator("/tmp/does_not_exist_prefix"),
                    std::runtime_error);
    std::remove((prefix + ".json").c_str());
    std::remove((prefix + ".bin").c_str());
}
