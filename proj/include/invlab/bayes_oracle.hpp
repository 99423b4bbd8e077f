#pragma once

#include "invlab/datagen.hpp"
#include "invlab/forward_models.hpp"
#include "invlab/networks.hpp"

#include <functional>
#include <string>
#include <vector>

namespace invlab {

// Point-mass training measure: atoms m_a with probabilities w_a. Small enough
// (<= 4096 atoms) that conditional expectations are exact sums.
struct DiscretePrior {
    std::vector<Vector> atoms;
    Vector weights;
};

// Enumerable inversion setting d = G(m) + eps, m ~ discrete prior,
// eps ~ N(0, sigma_d^2 I). alpha is the physics-consistency tilt strength.
// Forward images of all atoms are cached at construction.
struct OracleProblem {
    DiscretePrior prior;
    const ForwardModel* forward = nullptr;
    double sigma_d = 1.0;
    double alpha = 0.0;
    std::vector<Vector> images;  // G(m_a)

    OracleProblem(DiscretePrior p, const ForwardModel& model, double sigma_d_,
                  double alpha_ = 0.0);
};

// When every atom's log-likelihood falls below -700 the posterior weights are
// numerically meaningless; the estimate falls back to the prior mean and the
// flag is set.
struct OracleMean {
    Vector m;
    bool underflow = false;
};

struct OracleVar {
    double value = 0.0;
    bool underflow = false;
};

// E[m | d] by direct enumeration, log-sum-exp stabilized.
OracleMean conditional_mean_enum(const OracleProblem& prob, const Vector& d);

// E_{mu_alpha}[m | d]: posterior weights additionally tilted by
// exp(-alpha |G(m_a) - d|^2). alpha = 0 reduces to conditional_mean_enum.
OracleMean tilted_conditional_mean(const OracleProblem& prob, const Vector& d);

// tr Cov(m | d) = sum_a p(a|d) |m_a - E[m|d]|^2.
OracleVar posterior_variance_enum(const OracleProblem& prob, const Vector& d);

Vector prior_mean(const DiscretePrior& prior);

// K pairs (m_i, d_i) with m_i drawn from the atoms and Gaussian observation
// noise; per-sample stream forking, so smaller K is a prefix of larger K.
Dataset generate_discrete(const OracleProblem& prob, std::size_t K, std::uint64_t seed);

using Predictor = std::function<Vector(const Vector&)>;

struct DecompResult {
    double bias2 = 0.0;
    double variance = 0.0;
    double irreducible = 0.0;
    double total = 0.0;  // empirical risk against the held-out draws
    double gap = 0.0;    // total - (bias2 + variance + irreducible)
    std::size_t R = 0;
    std::size_t K = 0;
    std::uint64_t seed = 0;
};

// Replicate decomposition over given predictors (predictor r standing in for
// the network trained on dataset S_r): at each test d, bias^2 is the squared
// distance from the replicate-mean prediction to the enumerated E[m|d],
// variance the mean squared spread of replicates about their mean,
// irreducible the enumerated posterior variance, total the empirical risk
// against the paired held-out m. All averaged over the test set; the identity
// gap is closed only up to the test draws' cross-term noise.
DecompResult bias_variance_decompose(const OracleProblem& prob,
                                     const std::vector<Predictor>& predictors,
                                     const Matrix& test_m, const Matrix& test_d);

// Trains R networks on independent K-sample datasets (replicate trainings run
// in parallel), then decomposes on T fresh test draws. A replicate whose
// training aborts is dropped with a warning; fewer than 8 usable replicates is
// an error.
DecompResult bias_variance_decompose(const OracleProblem& prob, const NetSpec& nspec,
                                     const TrainConfig& cfg, std::size_t R, std::size_t K,
                                     std::size_t T, std::uint64_t seed);

// {bias2, variance, irreducible, total, gap, R, K, seed} as a JSON object.
std::string decomposition_report(const DecompResult& res);

}  // namespace invlab
