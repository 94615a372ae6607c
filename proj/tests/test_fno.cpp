#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chaostats/fno.hpp"
#include "chaostats/fno_eval.hpp"
#include "chaostats/ks.hpp"
#include "chaostats/ns.hpp"
#include "chaostats/rng.hpp"

#include <cmath>
#include <cstring>
#include <vector>

using namespace chaostats;

namespace {

RealField band_limited_1d(int n, int kmax, uint64_t seed, double amp = 0.3) {
    GridSpec g(1, n, 6.0 * M_PI);
    Rng rng(seed);
    return to_real(ks_random_ic(g, rng, kmax, amp));
}

double rms(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s / double(v.size()));
}

FnoParams zero_params(const FnoConfig& cfg) {
    FnoParams p = fno_init_params(cfg, 1);
    for (Tensor& t : p.tensors)
        for (double& x : t.v) x = 0;
    return p;
}

} // namespace

TEST_CASE("zero weights give zero output frames") {
    FnoConfig cfg;
    cfg.n_layers = 3;
    cfg.width = 6;
    cfg.proj_width = 5;
    cfg.modes_kept = 4;
    cfg.t_frames = 4;
    FnoParams p = zero_params(cfg);
    RealField v0 = band_limited_1d(32, 4, 7);
    auto frames = fno_forward(p, v0);
    REQUIRE(frames.size() == 4);
    for (const RealField& f : frames)
        for (double x : f.v) CHECK(x == 0.0);
}

TEST_CASE("single-layer network is resolution invariant on band-limited input") {
    // one spectral transform: retained coefficients agree exactly across
    // resolutions, and every other op acts pointwise on grid values
    FnoConfig cfg;
    cfg.n_layers = 1;
    cfg.width = 8;
    cfg.proj_width = 8;
    cfg.modes_kept = 8;
    cfg.t_frames = 4;
    FnoParams p = fno_init_params(cfg, 3);

    GridSpec coarse(1, 64, 6.0 * M_PI);
    GridSpec fine(1, 128, 6.0 * M_PI);
    Rng rng(11);
    RealField u64 = to_real(ks_random_ic(coarse, rng, 4, 0.5));
    RealField u128 = resample(u64, fine);

    auto f64 = fno_forward(p, u64);
    auto f128 = fno_forward(p, u128);
    double worst = 0;
    for (int j = 0; j < cfg.t_frames; ++j)
        for (int i = 0; i < 64; ++i)
            worst = std::max(worst, std::fabs(f64[size_t(j)].v[size_t(i)] -
                                              f128[size_t(j)].v[size_t(2 * i)]));
    CHECK(worst < 1e-8);
}

TEST_CASE("single-layer 2d network is resolution invariant") {
    FnoConfig cfg;
    cfg.n_layers = 1;
    cfg.width = 4;
    cfg.proj_width = 4;
    cfg.modes_kept = 4;
    cfg.t_frames = 2;
    cfg.spatial_dim = 2;
    FnoParams p = fno_init_params(cfg, 5);

    GridSpec coarse(2, 16, 2.0 * M_PI);
    GridSpec fine(2, 32, 2.0 * M_PI);
    Rng rng(13);
    RealField w16 = to_real(ns_random_ic(coarse, rng, 3, 0.5));
    RealField w32 = resample(w16, fine);

    auto f16 = fno_forward(p, w16);
    auto f32 = fno_forward(p, w32);
    double worst = 0;
    for (int j = 0; j < cfg.t_frames; ++j)
        for (int i0 = 0; i0 < 16; ++i0)
            for (int i1 = 0; i1 < 16; ++i1)
                worst = std::max(worst, std::fabs(f16[size_t(j)].at(i0, i1) -
                                                  f32[size_t(j)].at(2 * i0, 2 * i1)));
    CHECK(worst < 1e-8);
}

TEST_CASE("handcrafted single-mode parameters reproduce the closed form") {
    FnoConfig cfg;
    cfg.n_layers = 1;
    cfg.width = 1;
    cfg.proj_width = 1;
    cfg.modes_kept = 2;
    cfg.t_frames = 2;  // one retained time row (k_t = 0)
    FnoParams p = zero_params(cfg);
    // p.w picks the state channel; q1 = q2 = identity scalars
    p.tensors[0].v = {1.0, 0.0};
    p.tensors[5].v = {1.0};  // q1.w
    p.tensors[7].v = {1.0};  // q2.w
    // spectral weight on (k_t=0, k_x=1); mode index = row*modes_kept + col = 1
    const cplx r(0.8, -0.45);
    Tensor& R = p.tensors[4];
    REQUIRE(R.shape == std::vector<int>{2, 1, 1, 2});
    R.v = {0, 0, r.real(), r.imag()};

    const int n = 16;
    RealField v0 = band_limited_1d(n, 3, 21, 0.7);
    const cplx u1 = to_spectral(v0).at(1);

    auto frames = fno_forward(p, v0);
    auto gelu = [](double x) {
        return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
    };
    for (const RealField& f : frames)
        for (int j = 0; j < n; ++j) {
            const cplx phase = std::exp(cplx(0, 2.0 * M_PI * double(j) / double(n)));
            const double expect = gelu(2.0 * std::real(r * u1 * phase));
            CHECK(f.v[size_t(j)] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("init determinism and seed sensitivity") {
    FnoConfig cfg;
    cfg.modes_kept = 4;
    FnoParams a = fno_init_params(cfg, 42);
    FnoParams b = fno_init_params(cfg, 42);
    FnoParams c = fno_init_params(cfg, 43);
    REQUIRE(a.tensors.size() == b.tensors.size());
    bool all_equal = true, any_differ = false;
    for (size_t i = 0; i < a.tensors.size(); ++i) {
        all_equal = all_equal && std::memcmp(a.tensors[i].v.data(), b.tensors[i].v.data(),
                                             a.tensors[i].size() * sizeof(double)) == 0;
        any_differ = any_differ || std::memcmp(a.tensors[i].v.data(), c.tensors[i].v.data(),
                                               a.tensors[i].size() * sizeof(double)) != 0;
    }
    CHECK(all_equal);
    CHECK(any_differ);
}

TEST_CASE("initialized forward neither explodes nor vanishes") {
    FnoConfig cfg;
    cfg.modes_kept = 8;
    GridSpec g(1, 32, 6.0 * M_PI);
    RealField v0(g);
    for (int i = 0; i < g.n; ++i) v0.v[size_t(i)] = std::sqrt(2.0) * std::sin(g.x(i));
    CHECK(rms(v0.v) == doctest::Approx(1.0).epsilon(1e-12));
    for (uint64_t seed = 0; seed < 20; ++seed) {
        FnoParams p = fno_init_params(cfg, 100 + seed);
        auto frames = fno_forward(p, v0);
        std::vector<double> all;
        for (const RealField& f : frames) all.insert(all.end(), f.v.begin(), f.v.end());
        const double r = rms(all);
        CAPTURE(seed);
        CHECK(r > 1e-3);
        CHECK(r < 1e1);
    }
}

TEST_CASE("batched forward equals per-sample forward") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 6;
    cfg.proj_width = 6;
    cfg.modes_kept = 5;
    FnoParams p = fno_init_params(cfg, 9);
    RealField a = band_limited_1d(32, 5, 31);
    RealField b = band_limited_1d(32, 5, 32);

    Tape t;
    auto ids = fno_param_leaves(t, p, false);
    auto out = t.val(fno_forward_graph(t, cfg, ids, t.leaf(fno_build_input(cfg, {&a, &b}))));

    auto fa = fno_forward(p, a);
    auto fb = fno_forward(p, b);
    const size_t frame = 32;
    double worst = 0;
    for (int j = 0; j < cfg.t_frames; ++j)
        for (size_t i = 0; i < frame; ++i) {
            worst = std::max(worst, std::fabs(out.v[size_t(j) * frame + i] - fa[size_t(j)].v[i]));
            worst = std::max(worst,
                             std::fabs(out.v[(size_t(cfg.t_frames) + size_t(j)) * frame + i] -
                                       fb[size_t(j)].v[i]));
        }
    CHECK(worst < 1e-13);
}

TEST_CASE("forward is deterministic") {
    FnoConfig cfg;
    cfg.modes_kept = 6;
    FnoParams p = fno_init_params(cfg, 17);
    RealField v0 = band_limited_1d(32, 6, 8);
    auto f1 = fno_forward(p, v0);
    auto f2 = fno_forward(p, v0);
    for (size_t j = 0; j < f1.size(); ++j)
        CHECK(std::memcmp(f1[j].v.data(), f2[j].v.data(), f1[j].v.size() * sizeof(double)) == 0);
}

TEST_CASE("resolution below the mode cutoff is rejected") {
    FnoConfig cfg;
    cfg.modes_kept = 8;
    FnoParams p = fno_init_params(cfg, 1);
    RealField v0 = band_limited_1d(8, 2, 3);
    CHECK_THROWS_AS((void)fno_forward(p, v0), std::invalid_argument);
}

TEST_CASE("rollout of one step equals the last forward frame") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 6;
    cfg.proj_width = 6;
    cfg.modes_kept = 5;
    FnoParams p = fno_init_params(cfg, 23);
    RealField v0 = band_limited_1d(32, 5, 4);
    Trajectory tr = fno_rollout(p, v0, 1);
    auto frames = fno_forward(p, v0);
    REQUIRE(tr.size() == 1);
    CHECK(tr.times[0] == doctest::Approx(cfg.h));
    CHECK(tr.provenance == Provenance::fno_rollout);
    CHECK(std::memcmp(tr.states[0].v.data(), frames.back().v.data(),
                      frames.back().v.size() * sizeof(double)) == 0);
}

TEST_CASE("rollout with zero weights stays zero") {
    FnoConfig cfg;
    cfg.modes_kept = 4;
    FnoParams p = zero_params(cfg);
    RealField v0 = band_limited_1d(16, 3, 5);
    Trajectory tr = fno_rollout(p, v0, 3);
    for (const RealField& s : tr.states)
        for (double x : s.v) CHECK(x == 0.0);
}

TEST_CASE("rollout reports the step where values go non-finite") {
    FnoConfig cfg;
    cfg.modes_kept = 4;
    FnoParams p = fno_init_params(cfg, 2);
    p.tensors[0].v[0] = std::nan("");
    RealField v0 = band_limited_1d(16, 3, 6);
    try {
        fno_rollout(p, v0, 3);
        FAIL("expected a rollout error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("end-to-end gradient matches finite differences on a toy network") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 4;
    cfg.proj_width = 4;
    cfg.modes_kept = 3;
    cfg.t_frames = 2;
    FnoParams p = fno_init_params(cfg, 77);
    RealField v0 = band_limited_1d(8, 2, 9, 0.8);

    Rng lr(55);
    Tensor label({1, cfg.t_frames, 8});
    for (double& x : label.v) x = lr.uniform(-1, 1);

    // analytic gradients
    Tape t;
    auto ids = fno_param_leaves(t, p, true);
    auto out = fno_forward_graph(t, cfg, ids, t.leaf(fno_build_input(cfg, {&v0})));
    auto d = t.sub(out, t.leaf(label));
    t.backward(t.mean(t.mul(d, d)));

    auto eval = [&](const FnoParams& q) {
        Tape tt;
        auto qids = fno_param_leaves(tt, q, false);
        auto o = fno_forward_graph(tt, cfg, qids, tt.leaf(fno_build_input(cfg, {&v0})));
        auto dd = tt.sub(o, tt.leaf(label));
        return tt.val(tt.mean(tt.mul(dd, dd))).v[0];
    };

    const double eps = 1e-5;
    double gmax = 1e-8, emax = 0;
    for (size_t w = 0; w < p.tensors.size(); ++w) {
        const Tensor& an = t.grad(ids[w]);
        for (size_t i = 0; i < p.tensors[w].size(); ++i) {
            FnoParams q = p;
            q.tensors[w].v[i] += eps;
            const double lp = eval(q);
            q.tensors[w].v[i] -= 2 * eps;
            const double lm = eval(q);
            const double fd = (lp - lm) / (2 * eps);
            gmax = std::max(gmax, std::fabs(fd));
            emax = std::max(emax, std::fabs(an.v[i] - fd));
        }
    }
    CHECK(emax / gmax < 1e-4);
}

TEST_CASE("tape-free evaluator matches the differentiable forward (1d)") {
    FnoConfig cfg;
    cfg.n_layers = 3;
    cfg.width = 8;
    cfg.proj_width = 6;
    cfg.modes_kept = 5;
    cfg.t_frames = 4;
    for (uint64_t seed : {2u, 9u}) {
        FnoParams p = fno_init_params(cfg, seed);
        std::vector<RealField> batch;
        for (int b = 0; b < 3; ++b)
            batch.push_back(band_limited_1d(32, 6, 100 * seed + uint64_t(b), 0.8));
        FnoEvaluator ev(p, 3, 32);
        std::vector<const RealField*> ptrs;
        for (const RealField& f : batch) ptrs.push_back(&f);
        std::vector<RealField> fast;
        ev.step_fields(ptrs, fast);
        REQUIRE(fast.size() == 3);
        for (int b = 0; b < 3; ++b) {
            const RealField want = fno_forward(p, batch[size_t(b)]).back();
            double worst = 0, scale = 1;
            for (size_t i = 0; i < want.v.size(); ++i) {
                worst = std::max(worst, std::fabs(fast[size_t(b)].v[i] - want.v[i]));
                scale = std::max(scale, std::fabs(want.v[i]));
            }
            CHECK(worst / scale < 1e-12);
        }
    }
}

TEST_CASE("tape-free evaluator matches at the production geometry") {
    FnoConfig cfg; // defaults: 4 layers, width 32, proj 64
    cfg.modes_kept = 32;
    cfg.t_frames = 4;
    FnoParams p = fno_init_params(cfg, 21);
    std::vector<RealField> batch = {band_limited_1d(64, 20, 3, 1.0),
                                    band_limited_1d(64, 31, 4, 1.0)};
    FnoEvaluator ev(p, 2, 64);
    std::vector<const RealField*> ptrs = {&batch[0], &batch[1]};
    std::vector<RealField> fast;
    ev.step_fields(ptrs, fast);
    for (int b = 0; b < 2; ++b) {
        const RealField want = fno_forward(p, batch[size_t(b)]).back();
        double worst = 0, scale = 1;
        for (size_t i = 0; i < want.v.size(); ++i) {
            worst = std::max(worst, std::fabs(fast[size_t(b)].v[i] - want.v[i]));
            scale = std::max(scale, std::fabs(want.v[i]));
        }
        CHECK(worst / scale < 1e-12);
    }
}

TEST_CASE("tape-free evaluator matches the differentiable forward (2d, odd T)") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 4;
    cfg.proj_width = 4;
    cfg.modes_kept = 3;
    cfg.t_frames = 3;
    cfg.spatial_dim = 2;
    FnoParams p = fno_init_params(cfg, 17);
    GridSpec g(2, 16, 2.0 * M_PI);
    Rng rng(31);
    std::vector<RealField> batch = {to_real(ns_random_ic(g, rng, 2, 0.7)),
                                    to_real(ns_random_ic(g, rng, 4, 0.7))};
    FnoEvaluator ev(p, 2, 16);
    std::vector<const RealField*> ptrs = {&batch[0], &batch[1]};
    std::vector<RealField> fast;
    ev.step_fields(ptrs, fast);
    for (int b = 0; b < 2; ++b) {
        const RealField want = fno_forward(p, batch[size_t(b)]).back();
        double worst = 0, scale = 1;
        for (size_t i = 0; i < want.v.size(); ++i) {
            worst = std::max(worst, std::fabs(fast[size_t(b)].v[i] - want.v[i]));
            scale = std::max(scale, std::fabs(want.v[i]));
        }
        CHECK(worst / scale < 1e-12);
    }
}

TEST_CASE("tape-free evaluator handles the two-frame (single time row) case") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 5;
    cfg.proj_width = 4;
    cfg.modes_kept = 4;
    cfg.t_frames = 2;
    FnoParams p = fno_init_params(cfg, 8);
    RealField u = band_limited_1d(32, 5, 44, 0.6);
    FnoEvaluator ev(p, 1, 32);
    std::vector<RealField> fast;
    std::vector<const RealField*> ptrs = {&u};
    ev.step_fields(ptrs, fast);
    const RealField want = fno_forward(p, u).back();
    double worst = 0;
    for (size_t i = 0; i < want.v.size(); ++i)
        worst = std::max(worst, std::fabs(fast[0].v[i] - want.v[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("batched rollout matches the single-state rollout") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 6;
    cfg.proj_width = 6;
    cfg.modes_kept = 4;
    cfg.t_frames = 4;
    FnoParams p = fno_init_params(cfg, 12);
    std::vector<RealField> seeds = {band_limited_1d(32, 4, 70, 0.5),
                                    band_limited_1d(32, 4, 71, 0.5)};
    auto batched = fno_eval_rollout(p, seeds, 3);
    REQUIRE(batched.size() == 2);
    for (int b = 0; b < 2; ++b) {
        Trajectory want = fno_rollout(p, seeds[size_t(b)], 3);
        REQUIRE(batched[size_t(b)].size() == want.size());
        CHECK(batched[size_t(b)].provenance == Provenance::fno_rollout);
        for (size_t s = 0; s < want.size(); ++s) {
            CHECK(batched[size_t(b)].times[s] == doctest::Approx(want.times[s]));
            double worst = 0, scale = 1;
            for (size_t i = 0; i < want.states[s].v.size(); ++i) {
                worst = std::max(worst,
                                 std::fabs(batched[size_t(b)].states[s].v[i] -
                                           want.states[s].v[i]));
                scale = std::max(scale, std::fabs(want.states[s].v[i]));
            }
            CHECK(worst / scale < 1e-11);
        }
    }
}

TEST_CASE("batched rollout reports the step of a numerical blow-up") {
    FnoConfig cfg;
    cfg.n_layers = 2;
    cfg.width = 4;
    cfg.proj_width = 4;
    cfg.modes_kept = 3;
    cfg.t_frames = 4;
    FnoParams p = fno_init_params(cfg, 5);
    // inflate the output head so the first step lands near the overflow edge
    // and the second step leaves the finite range
    for (double& x : p.tensors[p.tensors.size() - 2].v) x *= 1e160;
    std::vector<RealField> seeds = {band_limited_1d(32, 3, 80, 0.5)};
    try {
        fno_eval_rollout(p, seeds, 5);
        FAIL("expected a blow-up error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
}
