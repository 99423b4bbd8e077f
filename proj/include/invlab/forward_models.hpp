#pragma once

#include "invlab/linalg.hpp"
#include "invlab/tape.hpp"

#include <memory>
#include <utility>

namespace invlab {

// Common surface for the forward operators G: R^N -> R^M.
struct ForwardModel {
    virtual ~ForwardModel() = default;
    virtual std::size_t param_dim() const = 0;
    virtual std::size_t obs_dim() const = 0;
    virtual Vector evaluate(const Vector& m) const = 0;
    virtual Matrix jacobian(const Vector& m) const = 0;
    virtual bool admissible(const Vector& m) const { return true; }
    // Non-null when the operator is exactly linear with constant matrix.
    virtual const Matrix* linear_matrix() const { return nullptr; }
};

// d = G m with G_ij = t_j exp(-s_i t_j^2) dt on midpoint grids over [0,1].
struct WingModel : ForwardModel {
    std::size_t N, M;
    Vector t_grid, s_grid;
    double dt;
    Matrix G;

    explicit WingModel(std::size_t N = 50, std::size_t M = 20);

    std::size_t param_dim() const override { return N; }
    std::size_t obs_dim() const override { return M; }
    Vector evaluate(const Vector& m) const override;
    Matrix jacobian(const Vector&) const override { return G; }
    const Matrix* linear_matrix() const override { return &G; }
};

// Surface anomaly sounding: d(x_i) = sum_j log(((x_i-w_j)^2 + H^2) /
// ((x_i-w_j)^2 + (H - z_j)^2)) dw, interface height z below depth H.
struct InterfaceModel : ForwardModel {
    std::size_t N, M;
    double H = 10.0;       // km
    double extent = 100.0; // km
    Vector w_grid, x_grid;
    double dw;

    explicit InterfaceModel(std::size_t N = 100, std::size_t M = 15);

    std::size_t param_dim() const override { return N; }
    std::size_t obs_dim() const override { return M; }
    Vector evaluate(const Vector& z) const override;
    Matrix jacobian(const Vector& z) const override;
    bool admissible(const Vector& z) const override;
};

struct RayPath {
    std::vector<std::pair<double, double>> nodes;  // m
    Vector cell_lengths;                           // per-cell, m
    double traveltime = 0.0;                       // s (0 until priced with a slowness)
    bool converged = true;
};

// Crosshole traveltime tomography on a square cell grid; slowness in s/m.
struct TomoModel : ForwardModel {
    std::size_t nx = 7, ny = 7;
    double extent = 1600.0;  // m
    std::size_t N, M;
    bool bending = false;
    std::size_t max_bend_iters = 50;
    double bend_tol = 1e-4;
    std::vector<std::pair<double, double>> sources, receivers;
    Matrix L0;  // straight-ray path matrix, fixed by geometry

    explicit TomoModel(bool bending_on = false);

    std::size_t param_dim() const override { return N; }
    std::size_t obs_dim() const override { return M; }
    Vector evaluate(const Vector& m) const override;
    // Frozen-ray path-length matrix at m (straight rays when bending is off).
    Matrix jacobian(const Vector& m) const override;
    bool admissible(const Vector& m) const override;
    const Matrix* linear_matrix() const override { return bending ? nullptr : &L0; }

    RayPath trace_straight_ray(std::pair<double, double> src, std::pair<double, double> rcv) const;
    RayPath bend_ray(const Vector& m, const RayPath& straight) const;
    Matrix build_path_matrix(const Vector& m) const;
    // Per-cell lengths of one segment, accumulated into out (length N).
    void traverse_segment(std::pair<double, double> a, std::pair<double, double> b, Vector& out) const;
    double cell_size() const { return extent / static_cast<double>(nx); }
};

// Fixed-matrix linear operator for enumerable oracle problems.
struct LinearModel : ForwardModel {
    Matrix G;
    explicit LinearModel(Matrix G_) : G(std::move(G_)) {}
    std::size_t param_dim() const override { return G.cols; }
    std::size_t obs_dim() const override { return G.rows; }
    Vector evaluate(const Vector& m) const override { return matvec(G, m); }
    Matrix jacobian(const Vector&) const override { return G; }
    const Matrix* linear_matrix() const override { return &G; }
};

// Scalar G(m) = m^3: the injectivity-stressing nonlinear toy.
struct CubeModel : ForwardModel {
    std::size_t param_dim() const override { return 1; }
    std::size_t obs_dim() const override { return 1; }
    Vector evaluate(const Vector& m) const override { return {m[0] * m[0] * m[0]}; }
    Matrix jacobian(const Vector& m) const override { return Matrix(1, 1, 3.0 * m[0] * m[0]); }
};

// true_model("wing") etc. — reference parameter vectors for the three problems.
Vector true_model(const std::string& problem_id);

// Tape hook around a ForwardModel. A nonempty cap projects each coordinate to
// min(m_j, cap_j) before evaluation and zeroes the adjoint on clamped
// coordinates (interface admissibility projection). clamp_count tallies
// projected coordinates across calls.
struct ModelRowAdapter : RowwiseModel {
    const ForwardModel* fm;
    Vector cap;
    mutable std::size_t clamp_count = 0;

    explicit ModelRowAdapter(const ForwardModel* model, Vector cap_ = {})
        : fm(model), cap(std::move(cap_)) {}

    std::size_t in_dim() const override { return fm->param_dim(); }
    std::size_t out_dim() const override { return fm->obs_dim(); }
    Vector apply_row(const Vector& m) const override;
    Vector adjoint_row(const Vector& m, const Vector& dy) const override;
    const Matrix* linear_matrix() const override {
        return cap.empty() ? fm->linear_matrix() : nullptr;
    }
};

// CSV dumps for inspection: one matrix or one vector per file.
void write_matrix_csv(const std::string& path, const Matrix& A);
void write_vector_csv(const std::string& path, const Vector& v);

}  // namespace invlab
