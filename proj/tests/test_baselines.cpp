#include "invlab/baselines.hpp"
#include "invlab/datagen.hpp"
#include "invlab/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace invlab;

namespace {

MapConfig scalar_cfg(double cm, double cd, double m0) {
    MapConfig cfg;
    cfg.C_m = Matrix(1, 1);
    cfg.C_m(0, 0) = cm;
    cfg.C_d = Matrix(1, 1);
    cfg.C_d(0, 0) = cd;
    cfg.m0 = {m0};
    return cfg;
}

Vector noisy_obs(const ForwardModel& model, const Vector& m_true, double sigma_d,
                 std::uint64_t seed, std::uint64_t stream) {
    Vector d = model.evaluate(m_true);
    RngStream r(seed, stream);
    for (auto& v : d) v += sigma_d * r.normal();
    return d;
}

// Scalar identity map with a hard wall at m = 1, for exercising step halving.
struct WallModel : ForwardModel {
    std::size_t param_dim() const override { return 1; }
    std::size_t obs_dim() const override { return 1; }
    Vector evaluate(const Vector& m) const override { return m; }
    Matrix jacobian(const Vector&) const override { return Matrix::identity(1); }
    bool admissible(const Vector& m) const override { return m[0] < 1.0; }
};

}  // namespace

TEST_CASE("map_linear scalar anchor") {
    Matrix G = Matrix::identity(1);
    MapConfig cfg = scalar_cfg(1.0, 1.0, 0.0);
    Vector d = {2.0};
    Vector m = map_linear(G, d, cfg);
    REQUIRE(m.size() == 1);
    // m = C_m G^T (G C_m G^T + C_d)^{-1} d = 1 * (1 + 1)^{-1} * 2 = 1.
    CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(map_objective(G, d, cfg, m) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(map_objective(G, d, cfg, cfg.m0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("map_linear with zero innovation returns the prior mean") {
    WingModel wm;
    MapConfig cfg = problem_map_config("wing", 0.01);
    for (std::size_t j = 0; j < wm.N; ++j) cfg.m0[j] = 0.3 + 0.01 * double(j % 5);
    Vector d = wm.evaluate(cfg.m0);
    Vector m = map_linear(wm.G, d, cfg);
    for (std::size_t j = 0; j < wm.N; ++j)
        CHECK(m[j] == doctest::Approx(cfg.m0[j]).epsilon(1e-10));
}

TEST_CASE("map_linear is a stationary point of the objective") {
    WingModel wm;
    Vector mt = true_model("wing");
    MapConfig cfg = problem_map_config("wing", 0.01);
    Vector d = noisy_obs(wm, mt, 0.01, 3, 7000);
    Vector mhat = map_linear(wm.G, d, cfg);

    const double g_hat = norm2(map_gradient(wm.G, d, cfg, mhat));
    const double g_ref = norm2(map_gradient(wm.G, d, cfg, cfg.m0));
    REQUIRE(g_ref > 0.0);
    CHECK(g_hat <= 1e-8 * g_ref);
    CHECK(map_objective(wm.G, d, cfg, mhat) < map_objective(wm.G, d, cfg, cfg.m0));
}

TEST_CASE("map_gradient matches central differences") {
    WingModel wm;
    Vector mt = true_model("wing");
    MapConfig cfg = problem_map_config("wing", 0.01);
    Vector d = noisy_obs(wm, mt, 0.01, 5, 7000);
    Vector m = cfg.m0;
    RngStream r(9, 1);
    for (auto& v : m) v += 0.1 * r.normal();

    Vector g = map_gradient(wm.G, d, cfg, m);
    const double eps = 1e-6;
    for (std::size_t j = 0; j < wm.N; j += 7) {
        Vector mp = m, mm = m;
        mp[j] += eps;
        mm[j] -= eps;
        const double fd =
            (map_objective(wm.G, d, cfg, mp) - map_objective(wm.G, d, cfg, mm)) / (2 * eps);
        CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("innovation and information forms agree on the wing problem") {
    WingModel wm;
    Vector mt = true_model("wing");
    MapConfig cfg = problem_map_config("wing", 0.01);
    Vector d = noisy_obs(wm, mt, 0.01, 0, 7000);

    Vector a = map_linear(wm.G, d, cfg);
    Vector b = map_linear_information(wm.G, d, cfg);
    CHECK(rel_l2(a, b) <= 1e-8);
}

TEST_CASE("wing linear map lands in the expected error band") {
    WingModel wm;
    Vector mt = true_model("wing");
    MapConfig cfg = problem_map_config("wing", 0.01);

    // Noise drawn from the same stream family datagen uses for observation
    // noise, one seed per realization.
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Vector d = noisy_obs(wm, mt, 0.01, seed, 202);
        const double e = rel_l2(map_linear(wm.G, d, cfg), mt);
        CHECK(e >= 0.55);
        CHECK(e <= 0.70);
        sum += e;
    }
    CHECK(sum / 20.0 == doctest::Approx(0.631).epsilon(0.07));
}

TEST_CASE("gauss_newton on a linear model reproduces map_linear in one step") {
    WingModel wm;
    Vector mt = true_model("wing");
    MapConfig cfg = problem_map_config("wing", 0.01);
    Vector d = noisy_obs(wm, mt, 0.01, 1, 7000);
    Vector mhat = map_linear(wm.G, d, cfg);

    MapConfig one = cfg;
    one.iters = 1;
    GnResult gr = gauss_newton(wm, d, one);
    CHECK(rel_l2(gr.m, mhat) <= 1e-8);
    CHECK(gr.halvings == 0);
    REQUIRE(gr.objective_history.size() == 2);
    CHECK(gr.objective_history[1] < gr.objective_history[0]);

    // Further steps of a linear problem stay put.
    GnResult gr10 = gauss_newton(wm, d, cfg);
    CHECK(rel_l2(gr10.m, mhat) <= 1e-8);
    REQUIRE(gr10.objective_history.size() == cfg.iters + 1);
    CHECK(gr10.objective_history.back() ==
          doctest::Approx(gr10.objective_history[1]).epsilon(1e-10));
}

TEST_CASE("gauss_newton with zero innovation stays at the prior mean") {
    InterfaceModel im;
    MapConfig cfg = problem_map_config("interface", 0.1);
    for (std::size_t j = 0; j < im.N; ++j) cfg.m0[j] = 1.0 + std::sin(0.1 * double(j));
    REQUIRE(im.admissible(cfg.m0));
    Vector d = im.evaluate(cfg.m0);
    GnResult gr = gauss_newton(im, d, cfg);
    for (std::size_t j = 0; j < im.N; ++j)
        CHECK(gr.m[j] == doctest::Approx(cfg.m0[j]).epsilon(1e-8));
}

TEST_CASE("gauss_newton recovers the interface to the expected accuracy") {
    InterfaceModel im;
    Vector zt = true_model("interface");
    MapConfig cfg = problem_map_config("interface", 0.1);
    Vector d = noisy_obs(im, zt, 0.1, 0, 7100);
    GnResult gr = gauss_newton(im, d, cfg);
    const double e = rel_l2(gr.m, zt);
    CHECK(e > 0.15);
    CHECK(e < 0.55);
    CHECK(im.admissible(gr.m));
    CHECK(gr.objective_history.back() < 0.02 * gr.objective_history.front());
}

TEST_CASE("gauss_newton halves steps that leave the admissible set") {
    WallModel wall;
    MapConfig cfg = scalar_cfg(100.0, 1e-4, 0.0);
    cfg.iters = 1;
    Vector d = {5.0};
    // Raw step is ~5; 5/2 and 5/4 still cross the wall at 1, 5/8 does not.
    GnResult gr = gauss_newton(wall, d, cfg);
    CHECK(gr.halvings == 3);
    CHECK(gr.m[0] == doctest::Approx(0.625).epsilon(1e-4));
    CHECK(wall.admissible(gr.m));
}

TEST_CASE("gauss_newton gives up after ten halvings") {
    WallModel wall;
    // Pinned nearly against the wall with a huge pull across it: even the
    // 2^-10 step crosses, so the halving cap trips.
    MapConfig cfg = scalar_cfg(1e6, 1e-4, 0.9999);
    cfg.iters = 1;
    Vector d = {100.0};
    CHECK_THROWS_AS(gauss_newton(wall, d, cfg), DomainError);
}

TEST_CASE("gauss_newton rejects an inadmissible start") {
    WallModel wall;
    MapConfig cfg = scalar_cfg(1.0, 1.0, 2.0);
    Vector d = {0.5};
    CHECK_THROWS_AS(gauss_newton(wall, d, cfg), DomainError);
}

TEST_CASE("problem_map_config wires the documented problem settings") {
    MapConfig wing = problem_map_config("wing", 0.01);
    CHECK(wing.C_d.rows == 20);
    CHECK(wing.C_d(0, 0) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(wing.C_d(0, 1) == 0.0);
    CHECK(wing.C_m.rows == 50);
    CHECK(wing.C_m(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wing.m0.size() == 50);
    CHECK(wing.m0[0] == 0.0);

    MapConfig tomo = problem_map_config("tomo", 0.001);
    CHECK(tomo.C_d.rows == 49);
    CHECK(tomo.C_m.rows == 49);
    const double sig = 0.05 / 2900.0;
    CHECK(tomo.C_m(0, 0) == doctest::Approx(sig * sig).epsilon(1e-12));
    CHECK(tomo.m0[0] == doctest::Approx(1.0 / 2900.0).epsilon(1e-12));

    CHECK_THROWS_AS(problem_map_config("nope", 0.01), DomainError);
}

TEST_CASE("prior_mean averages sample rows") {
    Matrix one(1, 3);
    one(0, 0) = 1.0;
    one(0, 1) = 2.0;
    one(0, 2) = 3.0;
    Vector m = prior_mean(one);
    REQUIRE(m.size() == 3);
    CHECK(m[1] == 2.0);

    Matrix two(2, 2);
    two(0, 0) = 1.0;
    two(1, 0) = 3.0;
    two(0, 1) = -2.0;
    two(1, 1) = 2.0;
    Vector m2 = prior_mean(two);
    CHECK(m2[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(m2[1] == doctest::Approx(0.0).epsilon(1e-15));

    CHECK_THROWS_AS(prior_mean(Matrix()), DomainError);
}

TEST_CASE("prior_mean concentrates near the sampler mean") {
    PriorSpec spec = problem_prior("tomo", PriorFamily::gaussian_correlated);
    std::vector<Vector> samples = sample(spec, 2000, RngStream(42, 1));
    Matrix rows(samples.size(), samples[0].size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = 0; j < samples[i].size(); ++j) rows(i, j) = samples[i][j];
    Vector m = prior_mean(rows);
    const double sig = 0.05 / 2900.0;
    const double tol = 5.0 * sig / std::sqrt(2000.0);
    for (double v : m) CHECK(std::abs(v - 1.0 / 2900.0) <= tol);
}

TEST_CASE("prior_mean dataset overload matches the matrix overload") {
    WingModel wm;
    PriorSpec spec = problem_prior("wing", PriorFamily::gaussian_correlated);
    Dataset ds = generate(wm, spec, 32, 0.01, 11, "wing");
    Vector a = prior_mean(ds);
    Vector b = prior_mean(ds.m);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("rel_l2 anchors and error paths") {
    Vector a = {3.0, 4.0};
    Vector z = {0.0, 0.0};
    CHECK(rel_l2(z, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rel_l2(a, a) == 0.0);
    Vector b = {6.0, 8.0};
    CHECK(rel_l2(b, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(rel_l2(Vector{1.0}, a), ShapeError);
    CHECK_THROWS_AS(rel_l2(a, z), DomainError);
}
