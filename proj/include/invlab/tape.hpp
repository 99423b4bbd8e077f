#pragma once

#include "invlab/linalg.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace invlab {

struct NonScalarOutput : std::runtime_error { using std::runtime_error::runtime_error; };

// Running batch-norm statistics for one layer (length = channel count).
// Training-mode forwards update these in place with momentum 0.9.
struct BnState {
    Vector running_mean, running_var;
    explicit BnState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// Minimal rowwise forward-operator hook for embedding a physics model in a
// graph: y_row = F(m_row), backward pulls J(m_row)^T dy. A non-null
// linear_matrix() enables the matrix fast path (F(m) = A m with A constant).
struct RowwiseModel {
    virtual ~RowwiseModel() = default;
    virtual std::size_t in_dim() const = 0;
    virtual std::size_t out_dim() const = 0;
    virtual Vector apply_row(const Vector& m) const = 0;
    virtual Vector adjoint_row(const Vector& m, const Vector& dy) const = 0;
    virtual const Matrix* linear_matrix() const { return nullptr; }
};

// Define-by-run reverse-mode tape over Matrix-valued nodes. Builders evaluate
// eagerly; backward() seeds a 1x1 output with 1 and accumulates leaf adjoints.
class Tape {
  public:
    int leaf(Matrix v);

    int matmul(int a, int b);     // A * B
    int matmul_nt(int a, int b);  // A * B^T
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);        // elementwise
    int cmul(int a, Matrix mask); // elementwise by a constant (dropout masks)
    int scale(int a, double c);
    // Per-column affine with constant coefficients: out(i,j) = in(i,j)*s[j] + t[j].
    int col_affine(int a, Vector s, Vector t);
    // a: (B, C*L) channel-major; bias: (1, C) parameter node added to every
    // position of its channel. Dense layers use L = 1.
    int bias_add(int a, int bias, std::size_t positions = 1);
    int gelu(int a);
    int softplus(int a);
    int tanh_(int a);
    int sin_(int a);
    int cos_(int a);
    // x: (B, C_in*L), w: (C_out, C_in*k). Cross-correlation, stride 1,
    // zero-padded to the same length L; k must be odd.
    int conv1d(int x, int w, std::size_t c_in, std::size_t c_out, std::size_t len, std::size_t k);
    int gap(int a, std::size_t channels, std::size_t positions);
    // x: (B, C*L); gamma/beta: (1, C) parameter nodes. Training mode
    // normalizes over the batch x positions per channel and updates *state;
    // inference mode reads the frozen running statistics.
    int batchnorm(int x, int gamma, int beta, std::size_t channels, std::size_t positions,
                  bool training, BnState* state);
    int mse(int a, int b);   // mean over all entries of (a-b)^2
    int sumsq(int a);        // sum of squares
    int concat(const std::vector<int>& parts);  // along columns
    int model_apply(int a, const RowwiseModel* model);  // rows of a are parameter vectors

    const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    void backward(int output);

    std::size_t node_count() const { return nodes_.size(); }

  private:
    enum class Op {
        leaf, matmul, matmul_nt, add, sub, mul, cmul, scale, col_affine, bias_add,
        gelu, softplus, tanh_, sin_, cos_, conv1d, gap, batchnorm, mse, sumsq,
        concat, model_apply
    };
    struct Node {
        Op op;
        std::vector<int> in;
        Matrix val, grad;
        double c = 0.0;
        Vector s, t;          // col_affine coefficients; batchnorm inv_std in s
        Matrix aux;           // cmul mask / conv im2col / batchnorm xhat
        std::size_t c_in = 0, c_out = 0, len = 0, k = 0;
        bool training = false;
        const RowwiseModel* model = nullptr;
    };

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }
    Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    void backprop(Node& n);

    std::vector<Node> nodes_;
};

// Rebuilds the graph through `build` and compares tape adjoints of the listed
// parameter buffers against central finite differences. `build` must read
// current values from `params` each call and return the scalar output node id
// followed by the leaf node ids corresponding to params, in order. Coordinates
// are subsampled per parameter when max_coords caps them. Returns
// max over checked coords of |g_ad - g_fd| / max(1e-5, |g_ad| + |g_fd|);
// the floor absorbs central-difference roundoff (~ulp(loss)/eps) on
// coordinates whose true gradient is zero, e.g. a bias feeding a batchnorm.
struct GraphBuild {
    int output = -1;
    std::vector<int> checked_leaves;
};
double grad_check(const std::function<GraphBuild(Tape&)>& build,
                  const std::vector<Matrix*>& params, double eps,
                  std::size_t max_coords = std::numeric_limits<std::size_t>::max(),
                  std::uint64_t subsample_seed = 1);

}  // namespace invlab
