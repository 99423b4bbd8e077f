#pragma once

#include "invlab/datagen.hpp"
#include "invlab/tape.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace invlab {

struct SpecError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NonFiniteLoss : std::runtime_error { using std::runtime_error::runtime_error; };

enum class Arch { mlp, cnn1d, deeponet };
enum class Objective { erm, pinn };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);
Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct NetSpec {
    Arch arch = Arch::mlp;
    std::size_t in_dim = 0, out_dim = 0;
    // mlp
    std::vector<std::size_t> hidden{128, 256, 512, 256, 128};
    // cnn1d: parallel branches over kernel sizes, two conv layers each
    std::vector<std::size_t> kernels{1, 3, 5, 7};
    std::size_t filters = 64;
    std::vector<std::size_t> dense{512, 256};
    // deeponet
    std::size_t p = 128;
    std::size_t branch_depth = 4, branch_width = 256;
    std::size_t trunk_depth = 4, trunk_width = 256;
    std::size_t n_freqs = 16;
    Vector coords01;  // output-coordinate locations in [0,1], length out_dim
    // shared
    double dropout = 0.2;
    double lambda = 1e-4;  // decoupled weight decay on weight matrices
    bool softplus_output = true;
    bool use_batchnorm = true;
};

// in/out dims, trunk coordinates, and output activation for a named problem.
NetSpec default_spec(Arch a, const std::string& problem_id);

// (x, sin(2 pi k x)_k, cos(2 pi k x)_k), k = 1..n_freqs; length 2 n_freqs + 1.
Vector fourier_features(double x, std::size_t n_freqs);
Matrix fourier_feature_matrix(const Vector& coords01, std::size_t n_freqs);

struct ParamDef {
    std::string name;
    std::size_t rows = 0, cols = 0;
    bool decay = false;  // weight matrices decay; biases and batchnorm do not
};

class Network {
  public:
    Network() = default;
    explicit Network(NetSpec spec);  // SpecError on inconsistent dims

    // Fan-in-scaled normal weights (std = sqrt(2/fan_in)), zero biases,
    // gamma = 1, beta = 0; parameter k drawn from its own forked stream.
    void init(std::uint64_t seed);

    // Emits the forward graph for standardized input node x (B, in_dim);
    // returns the (B, out_dim) standardized output node. Leafs every
    // parameter in registry order, appending node ids to param_ids.
    // Training mode draws inverted-dropout masks from dropout_rng and
    // updates batch-norm running statistics.
    int emit(Tape& t, int x, bool training, RngStream* dropout_rng,
             std::vector<int>* param_ids = nullptr);

    const NetSpec& spec() const { return spec_; }
    const std::vector<ParamDef>& defs() const { return defs_; }
    std::vector<Matrix>& params() { return params_; }
    const std::vector<Matrix>& params() const { return params_; }
    std::vector<BnState>& bn_states() { return bn_; }
    const std::vector<BnState>& bn_states() const { return bn_; }
    const std::vector<std::size_t>& bn_channels() const { return bn_channels_; }
    std::size_t param_count() const;

  private:
    void reg(const std::string& name, std::size_t rows, std::size_t cols, bool decay);
    void reg_dense(const std::string& name, std::size_t in, std::size_t out);
    void reg_bn(const std::string& name, std::size_t channels);
    void reg_conv(const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t k);
    void build_registry();

    NetSpec spec_;
    std::vector<ParamDef> defs_;
    std::vector<Matrix> params_;
    std::vector<BnState> bn_;
    std::vector<std::size_t> bn_channels_;
    Matrix trunk_feats_;  // deeponet: (out_dim, 2 n_freqs + 1), constant
};

struct TrainConfig {
    Objective objective = Objective::erm;
    double alpha = 1.0;  // physics-residual weight; ignored for erm
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double clip = 1.0;
    std::size_t batch = 256;
    std::size_t max_epochs = 1000;
    std::size_t patience = 100;           // early stop
    double plateau_factor = 0.5;
    std::size_t plateau_patience = 15;    // lr reduction
    double improvement = 1e-6;            // absolute val-loss improvement threshold
    double val_fraction = 0.15;
    std::uint64_t seed = 0;
};

struct HistoryRow {
    std::size_t epoch = 0;
    double train_loss = 0.0, val_loss = 0.0, lr = 0.0;
};

struct TrainedOperator {
    Network net;
    Standardizer standardizer;
    std::vector<HistoryRow> history;
    std::uint64_t seed = 0;
    std::string problem_id;
    Objective objective = Objective::erm;
    double alpha = 0.0;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    std::size_t pinn_projections = 0;  // admissibility clamps hit by the residual

    // Standardize, run inference mode, invert standardization.
    Vector predict(const Vector& d_raw) const;
    Matrix predict_rows(const Matrix& d_rows) const;
};

// Loss = MSE(standardized prediction, standardized target)
// [+ alpha * per-coordinate-normalized physics residual for pinn], optimized
// by decoupled-weight-decay Adam with global-norm clipping; validation loss
// drives the plateau schedule and early stopping; best-validation parameters
// (and batch-norm statistics) are restored at the end. The forward model is
// required for the pinn objective and ignored for erm.
TrainedOperator train(const NetSpec& nspec, const Dataset& ds, const TrainConfig& cfg,
                      const ForwardModel* model = nullptr);

// Scales grads to max_norm when the global l2 norm exceeds it; returns the
// pre-clip norm.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

// Directory layout: spec.json, params.bin (row-major little-endian f64 in
// registry order, then running mean/var per batch-norm layer),
// standardizer.json, history.csv.
void save_trained(const TrainedOperator& op, const std::string& dir);
TrainedOperator load_trained(const std::string& dir);

}  // namespace invlab
