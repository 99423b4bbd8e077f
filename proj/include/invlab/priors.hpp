#pragma once

#include "invlab/linalg.hpp"
#include "invlab/rng.hpp"

#include <string>
#include <vector>

namespace invlab {

enum class PriorFamily { gaussian_correlated, gaussian_identity, laplace, tv, uniform };
enum class Topology { line, grid2d };

PriorFamily prior_family_from_string(const std::string& s);
std::string to_string(PriorFamily f);

struct PriorSpec {
    PriorFamily family = PriorFamily::gaussian_correlated;
    Vector m0;
    double sigma = 1.0;
    double delta = 0.0;                 // correlation length; gaussian_correlated only
    std::vector<Vector> coords;         // spatial location of each component
    Topology topology = Topology::line;
    std::size_t grid_nx = 0, grid_ny = 0;  // grid2d walk dimensions

    std::size_t dim() const { return m0.size(); }
};

// (C_m)_jk = sigma^2 exp(-|x_j - x_k|^2 / (2 delta^2)) or sigma^2 I.
Matrix build_covariance(const PriorSpec& spec);

// One draw from the prior, consuming the given stream.
Vector sample_one(const PriorSpec& spec, RngStream& stream);

// K draws; sample k comes from rng.fork(k), so the set is reproducible and
// order-independent.
std::vector<Vector> sample(const PriorSpec& spec, std::size_t K, const RngStream& rng);

struct Moments {
    Vector mean, stddev;  // per-component, unbiased std
};
Moments empirical_moments(const std::vector<Vector>& samples);

// Calibration bounds for a sample set against its spec. Means must sit within
// 4*sigma/sqrt(K) of m0 componentwise. Stds: componentwise within
// 4*sigma/sqrt(2K) of sigma, except tv, where the per-sample rescale pins the
// spatial std of every draw and the calibrated quantity is the pooled std
// about m0 (deterministically sigma*sqrt((N-1)/N)); bound 5%.
struct CalibrationReport {
    double max_mean_dev = 0.0, mean_tol = 0.0;
    double max_std_dev = 0.0, std_tol = 0.0;
    bool ok = false;
};
CalibrationReport check_calibration(const PriorSpec& spec, const std::vector<Vector>& samples);

// Reference parameters per problem (sigma, m0, delta, coords, topology).
PriorSpec problem_prior(const std::string& problem_id, PriorFamily family);

// Default training-set size per problem at reference scale.
std::size_t problem_prior_count(const std::string& problem_id);

}  // namespace invlab
