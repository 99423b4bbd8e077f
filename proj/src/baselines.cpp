#include "invlab/baselines.hpp"

#include <cmath>
#include <sstream>

namespace invlab {

MapConfig problem_map_config(const std::string& problem_id, double sigma_d, PriorFamily family) {
    PriorSpec prior = problem_prior(problem_id, family);
    MapConfig cfg;
    cfg.C_m = build_covariance(prior);
    cfg.m0 = prior.m0;
    const std::size_t M = problem_id == "wing"        ? WingModel().M
                          : problem_id == "interface" ? InterfaceModel().M
                                                      : TomoModel().M;
    cfg.C_d = Matrix(M, M);
    for (std::size_t i = 0; i < M; ++i) cfg.C_d(i, i) = sigma_d * sigma_d;
    return cfg;
}

Vector map_linear(const Matrix& G, const Vector& d, const MapConfig& cfg) {
    const std::size_t M = G.rows;
    Vector r = vsub(d, matvec(G, cfg.m0));
    // S = G C_m G^T + C_d
    Matrix GC = matmul(G, cfg.C_m);
    Matrix S = matmul_nt(GC, G);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) S(i, j) += cfg.C_d(i, j);
    Vector w = solve_spd(S, r, Jitter::retry_once);
    return vadd(cfg.m0, matvec_t(GC, w));
}

Vector map_linear_information(const Matrix& G, const Vector& d, const MapConfig& cfg) {
    const Matrix Cm_inv = spd_inverse(cfg.C_m, Jitter::retry_once);
    const Matrix Cd_inv = spd_inverse(cfg.C_d, Jitter::retry_once);
    Matrix CdG = matmul(Cd_inv, G);
    Matrix A = matmul_tn(G, CdG);  // G^T C_d^{-1} G
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) A(i, j) += Cm_inv(i, j);
    Vector b = vadd(matvec_t(CdG, d), matvec(Cm_inv, cfg.m0));
    return solve_spd(A, b, Jitter::retry_once);
}

double map_objective(const Matrix& G, const Vector& d, const MapConfig& cfg, const Vector& m) {
    Vector r = vsub(matvec(G, m), d);
    Vector p = vsub(m, cfg.m0);
    return dot(r, solve_spd(cfg.C_d, r, Jitter::retry_once)) +
           dot(p, solve_spd(cfg.C_m, p, Jitter::retry_once));
}

Vector map_gradient(const Matrix& G, const Vector& d, const MapConfig& cfg, const Vector& m) {
    Vector r = vsub(matvec(G, m), d);
    Vector g = matvec_t(G, solve_spd(cfg.C_d, r, Jitter::retry_once));
    Vector p = solve_spd(cfg.C_m, vsub(m, cfg.m0), Jitter::retry_once);
    return vadd(vscale(g, 2.0), vscale(p, 2.0));
}

namespace {

double nonlinear_objective(const ForwardModel& model, const Vector& d, const MapConfig& cfg,
                           const Matrix& Cd_inv, const Matrix& Cm_inv, const Vector& m) {
    Vector r = vsub(model.evaluate(m), d);
    Vector p = vsub(m, cfg.m0);
    return dot(r, matvec(Cd_inv, r)) + dot(p, matvec(Cm_inv, p));
}

}  // namespace

GnResult gauss_newton(const ForwardModel& model, const Vector& d, const MapConfig& cfg) {
    if (!model.admissible(cfg.m0))
        throw DomainError("gauss_newton: initial point is not admissible");
    const Matrix Cd_inv = spd_inverse(cfg.C_d, Jitter::retry_once);
    const Matrix Cm_inv = spd_inverse(cfg.C_m, Jitter::retry_once);

    GnResult res;
    res.m = cfg.m0;
    res.objective_history.push_back(nonlinear_objective(model, d, cfg, Cd_inv, Cm_inv, res.m));
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        const Matrix J = model.jacobian(res.m);  // bent rays refresh here
        Vector r = vsub(d, model.evaluate(res.m));
        Matrix CdJ = matmul(Cd_inv, J);
        Matrix A = matmul_tn(J, CdJ);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t j = 0; j < A.cols; ++j) A(i, j) += Cm_inv(i, j);
        Vector g = vsub(matvec_t(CdJ, r), matvec(Cm_inv, vsub(res.m, cfg.m0)));
        Vector step = solve_spd(A, g, Jitter::retry_once);

        Vector trial = vadd(res.m, step);
        std::size_t h = 0;
        while (!model.admissible(trial)) {
            if (++h > 10) {
                std::ostringstream msg;
                msg << "gauss_newton: inadmissible iterate at step " << it << " after " << (h - 1)
                    << " halvings";
                throw DomainError(msg.str());
            }
            step = vscale(step, 0.5);
            trial = vadd(res.m, step);
        }
        res.halvings += h;
        res.m = trial;
        res.objective_history.push_back(nonlinear_objective(model, d, cfg, Cd_inv, Cm_inv, res.m));
    }
    return res;
}

Vector prior_mean(const Matrix& m_rows) {
    if (m_rows.rows == 0) throw DomainError("prior_mean: empty sample set");
    Vector mean(m_rows.cols, 0.0);
    for (std::size_t i = 0; i < m_rows.rows; ++i)
        for (std::size_t j = 0; j < m_rows.cols; ++j) mean[j] += m_rows(i, j);
    for (auto& v : mean) v /= static_cast<double>(m_rows.rows);
    return mean;
}

Vector prior_mean(const Dataset& ds) { return prior_mean(ds.m); }

double rel_l2(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ShapeError("rel_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        num += (a[j] - b[j]) * (a[j] - b[j]);
        den += b[j] * b[j];
    }
    if (den == 0.0) throw DomainError("rel_l2: zero reference");
    return std::sqrt(num / den);
}

}  // namespace invlab
