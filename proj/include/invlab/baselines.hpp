#pragma once

#include "invlab/datagen.hpp"
#include "invlab/forward_models.hpp"
#include "invlab/priors.hpp"

namespace invlab {

struct MapConfig {
    Matrix C_d;  // noise covariance, obs_dim square
    Matrix C_m;  // prior covariance, param_dim square
    Vector m0;
    std::size_t iters = 10;  // gauss-newton steps
};

// sigma_d^2 I and the problem prior's covariance/mean.
MapConfig problem_map_config(const std::string& problem_id, double sigma_d,
                             PriorFamily family = PriorFamily::gaussian_correlated);

// Closed-form linear MAP, innovation form:
// m = m0 + C_m G^T (G C_m G^T + C_d)^{-1} (d - G m0).
Vector map_linear(const Matrix& G, const Vector& d, const MapConfig& cfg);

// Same estimate through the information-form (param-space) solve:
// (C_m^{-1} + G^T C_d^{-1} G)^{-1} (G^T C_d^{-1} d + C_m^{-1} m0).
// Kept as a mutual oracle against the innovation form.
Vector map_linear_information(const Matrix& G, const Vector& d, const MapConfig& cfg);

// Phi(m) = |G m - d|^2_{C_d^{-1}} + |m - m0|^2_{C_m^{-1}} and its gradient,
// for stationarity checks.
double map_objective(const Matrix& G, const Vector& d, const MapConfig& cfg, const Vector& m);
Vector map_gradient(const Matrix& G, const Vector& d, const MapConfig& cfg, const Vector& m);

struct GnResult {
    Vector m;
    Vector objective_history;  // Phi at m^0 .. m^iters
    std::size_t halvings = 0;  // admissibility step halvings across all iterates
};

// Fixed-step Gauss-Newton from m0, no line search; jacobian refreshed every
// iterate (bent rays included). A step that leaves the admissible set is
// halved up to 10 times, then DomainError.
GnResult gauss_newton(const ForwardModel& model, const Vector& d, const MapConfig& cfg);

Vector prior_mean(const Matrix& m_rows);
Vector prior_mean(const Dataset& ds);

// |a - b| / |b| in the model's native space.
double rel_l2(const Vector& a, const Vector& b);

}  // namespace invlab
