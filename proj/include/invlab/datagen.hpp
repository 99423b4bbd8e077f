#pragma once

#include "invlab/forward_models.hpp"
#include "invlab/priors.hpp"

#include <cstdint>
#include <string>

namespace invlab {

struct Dataset {
    Matrix m;  // K x N
    Matrix d;  // K x M
    double sigma_d = 0.0;
    std::uint64_t seed = 0;
    std::string problem_id;
    PriorFamily family = PriorFamily::gaussian_correlated;
    std::size_t redraws = 0;  // rejected inadmissible prior draws
};

// d_i = G(m_i) + eps_i, eps ~ N(0, sigma_d^2 I). Inadmissible prior draws are
// redrawn from the same per-sample stream; the count is recorded in redraws.
Dataset generate(const ForwardModel& model, const PriorSpec& prior, std::size_t K,
                 double sigma_d, std::uint64_t seed, const std::string& problem_id);

struct Standardizer {
    Vector in_mean, in_std;     // per data coordinate
    Vector out_mean, out_scale; // out_mean all-zero in scale-only mode
    bool scale_only = false;

    Vector std_in(const Vector& d) const;
    Vector inv_in(const Vector& d) const;
    Vector std_out(const Vector& m) const;
    Vector inv_out(const Vector& m) const;
    Matrix std_in_rows(const Matrix& D) const;
    Matrix std_out_rows(const Matrix& M) const;
};

// Statistics come from the given (training) rows only. scale_only keeps
// outputs unshifted — RMS scaling about zero — so a nonnegative activation
// still covers the target range; full mode subtracts means and divides stds.
// Degenerate coordinates get their std/scale clamped to 1.
Standardizer fit_standardizer(const Matrix& m_train, const Matrix& d_train, bool scale_only);

struct Split {
    std::vector<std::size_t> train_idx, val_idx;
};
// Deterministic shuffled partition; both sides nonempty for K >= 2.
Split split(std::size_t K, double fraction, std::uint64_t seed);

Matrix take_rows(const Matrix& A, const std::vector<std::size_t>& idx);

// Directory persistence: meta.json, m.csv, d.csv (%.17g round-trippable).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace invlab
