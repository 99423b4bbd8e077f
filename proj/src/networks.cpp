#include "invlab/networks.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace invlab {

namespace {

constexpr std::uint64_t STREAM_INIT = 404;
constexpr std::uint64_t STREAM_ORDER = 505;
constexpr std::uint64_t STREAM_DROP = 606;

constexpr double PI = 3.14159265358979323846;

}  // namespace

Arch arch_from_string(const std::string& s) {
    if (s == "mlp") return Arch::mlp;
    if (s == "cnn1d") return Arch::cnn1d;
    if (s == "deeponet") return Arch::deeponet;
    throw SpecError("unknown architecture: " + s);
}

std::string to_string(Arch a) {
    switch (a) {
        case Arch::mlp: return "mlp";
        case Arch::cnn1d: return "cnn1d";
        default: return "deeponet";
    }
}

Objective objective_from_string(const std::string& s) {
    if (s == "erm") return Objective::erm;
    if (s == "pinn") return Objective::pinn;
    throw SpecError("unknown objective: " + s);
}

std::string to_string(Objective o) { return o == Objective::erm ? "erm" : "pinn"; }

Vector fourier_features(double x, std::size_t n_freqs) {
    Vector f;
    f.reserve(2 * n_freqs + 1);
    f.push_back(x);
    for (std::size_t k = 1; k <= n_freqs; ++k) f.push_back(std::sin(2.0 * PI * k * x));
    for (std::size_t k = 1; k <= n_freqs; ++k) f.push_back(std::cos(2.0 * PI * k * x));
    return f;
}

Matrix fourier_feature_matrix(const Vector& coords01, std::size_t n_freqs) {
    Matrix F(coords01.size(), 2 * n_freqs + 1);
    for (std::size_t i = 0; i < coords01.size(); ++i) {
        Vector f = fourier_features(coords01[i], n_freqs);
        for (std::size_t j = 0; j < f.size(); ++j) F(i, j) = f[j];
    }
    return F;
}

NetSpec default_spec(Arch a, const std::string& problem_id) {
    NetSpec s;
    s.arch = a;
    if (problem_id == "wing") {
        WingModel fm;
        s.in_dim = fm.M;
        s.out_dim = fm.N;
        s.coords01 = fm.t_grid;
        s.softplus_output = true;
    } else if (problem_id == "interface") {
        InterfaceModel fm;
        s.in_dim = fm.M;
        s.out_dim = fm.N;
        s.coords01.resize(fm.N);
        for (std::size_t j = 0; j < fm.N; ++j) s.coords01[j] = fm.w_grid[j] / fm.extent;
        s.softplus_output = true;
    } else if (problem_id == "tomo") {
        TomoModel fm;
        s.in_dim = fm.M;
        s.out_dim = fm.N;
        s.coords01.resize(fm.N);
        for (std::size_t j = 0; j < fm.N; ++j)
            s.coords01[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(fm.N);
        s.softplus_output = false;
    } else {
        throw SpecError("unknown problem: " + problem_id);
    }
    return s;
}

void Network::reg(const std::string& name, std::size_t rows, std::size_t cols, bool decay) {
    defs_.push_back({name, rows, cols, decay});
}

void Network::reg_dense(const std::string& name, std::size_t in, std::size_t out) {
    reg(name + ".W", out, in, true);
    reg(name + ".b", 1, out, false);
}

void Network::reg_bn(const std::string& name, std::size_t channels) {
    reg(name + ".gamma", 1, channels, false);
    reg(name + ".beta", 1, channels, false);
    bn_channels_.push_back(channels);
}

void Network::reg_conv(const std::string& name, std::size_t c_in, std::size_t c_out,
                       std::size_t k) {
    reg(name + ".W", c_out, c_in * k, true);
    reg(name + ".b", 1, c_out, false);
}

void Network::build_registry() {
    const NetSpec& s = spec_;
    switch (s.arch) {
        case Arch::mlp: {
            if (s.hidden.empty()) throw SpecError("mlp: no hidden layers");
            std::size_t prev = s.in_dim;
            for (std::size_t i = 0; i < s.hidden.size(); ++i) {
                reg_dense("h" + std::to_string(i), prev, s.hidden[i]);
                if (s.use_batchnorm) reg_bn("h" + std::to_string(i), s.hidden[i]);
                prev = s.hidden[i];
            }
            reg("skip.W", s.hidden.back(), s.hidden.front(), true);
            reg_dense("out", s.hidden.back(), s.out_dim);
            break;
        }
        case Arch::cnn1d: {
            if (s.kernels.empty()) throw SpecError("cnn1d: no branches");
            for (std::size_t k : s.kernels)
                if (k % 2 == 0) throw SpecError("cnn1d: kernel sizes must be odd");
            for (std::size_t bi = 0; bi < s.kernels.size(); ++bi) {
                const std::string b = "branch" + std::to_string(s.kernels[bi]);
                reg_conv(b + ".c0", 1, s.filters, s.kernels[bi]);
                if (s.use_batchnorm) reg_bn(b + ".c0", s.filters);
                reg_conv(b + ".c1", s.filters, s.filters, s.kernels[bi]);
                if (s.use_batchnorm) reg_bn(b + ".c1", s.filters);
            }
            std::size_t prev = s.kernels.size() * s.filters;
            for (std::size_t i = 0; i < s.dense.size(); ++i) {
                reg_dense("d" + std::to_string(i), prev, s.dense[i]);
                if (s.use_batchnorm) reg_bn("d" + std::to_string(i), s.dense[i]);
                prev = s.dense[i];
            }
            reg_dense("out", prev, s.out_dim);
            break;
        }
        case Arch::deeponet: {
            if (s.p < 1) throw SpecError("deeponet: p must be >= 1");
            if (s.coords01.size() != s.out_dim)
                throw SpecError("deeponet: coords01 must have one entry per output coordinate");
            std::size_t prev = s.in_dim;
            for (std::size_t i = 0; i < s.branch_depth; ++i) {
                reg_dense("branch" + std::to_string(i), prev, s.branch_width);
                if (s.use_batchnorm) reg_bn("branch" + std::to_string(i), s.branch_width);
                prev = s.branch_width;
            }
            reg_dense("branch.out", prev, s.p);
            prev = 2 * s.n_freqs + 1;
            for (std::size_t i = 0; i < s.trunk_depth; ++i) {
                reg_dense("trunk" + std::to_string(i), prev, s.trunk_width);
                if (s.use_batchnorm) reg_bn("trunk" + std::to_string(i), s.trunk_width);
                prev = s.trunk_width;
            }
            reg_dense("trunk.out", prev, s.p);
            trunk_feats_ = fourier_feature_matrix(s.coords01, s.n_freqs);
            break;
        }
    }
}

Network::Network(NetSpec spec) : spec_(std::move(spec)) {
    if (spec_.in_dim < 1 || spec_.out_dim < 1) throw SpecError("network dims must be >= 1");
    if (spec_.dropout < 0.0 || spec_.dropout >= 1.0) throw SpecError("dropout must be in [0,1)");
    build_registry();
    params_.reserve(defs_.size());
    for (const auto& d : defs_) params_.emplace_back(d.rows, d.cols);
    bn_.reserve(bn_channels_.size());
    for (std::size_t c : bn_channels_) bn_.emplace_back(c);
}

void Network::init(std::uint64_t seed) {
    RngStream root(seed, STREAM_INIT);
    for (std::size_t i = 0; i < defs_.size(); ++i) {
        const ParamDef& d = defs_[i];
        Matrix& P = params_[i];
        if (d.decay) {  // weight matrix: fan-in-scaled normal
            RngStream rs = root.fork(i);
            const double sd = std::sqrt(2.0 / static_cast<double>(d.cols));
            for (auto& v : P.a) v = sd * rs.normal();
        } else if (d.name.size() >= 6 && d.name.compare(d.name.size() - 6, 6, ".gamma") == 0) {
            std::fill(P.a.begin(), P.a.end(), 1.0);
        } else {
            std::fill(P.a.begin(), P.a.end(), 0.0);
        }
    }
    for (std::size_t b = 0; b < bn_.size(); ++b) bn_[b] = BnState(bn_channels_[b]);
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& d : defs_) n += d.rows * d.cols;
    return n;
}

int Network::emit(Tape& t, int x, bool training, RngStream* dropout_rng,
                  std::vector<int>* param_ids) {
    std::vector<int> pids;
    pids.reserve(params_.size());
    for (const auto& P : params_) pids.push_back(t.leaf(P));
    if (param_ids) *param_ids = pids;

    std::size_t cursor = 0;
    auto next = [&]() { return pids[cursor++]; };
    std::size_t bn_cursor = 0;

    auto drop = [&](int id) {
        if (!training || spec_.dropout <= 0.0 || !dropout_rng) return id;
        const Matrix& v = t.value(id);
        Matrix mask(v.rows, v.cols);
        const double q = 1.0 - spec_.dropout;
        for (auto& mv : mask.a) mv = dropout_rng->uniform() < q ? 1.0 / q : 0.0;
        return t.cmul(id, std::move(mask));
    };
    // registry order is load-bearing: each next() call must be sequenced
    auto dense_linear = [&](int id) {
        const int w = next();
        const int b = next();
        return t.bias_add(t.matmul_nt(id, w), b);
    };
    // linear -> batchnorm -> gelu -> dropout
    auto dense_block = [&](int id, std::size_t width) {
        id = dense_linear(id);
        if (spec_.use_batchnorm) {
            const int g = next();
            const int b = next();
            id = t.batchnorm(id, g, b, width, 1, training, &bn_[bn_cursor++]);
        }
        return drop(t.gelu(id));
    };
    auto conv_block = [&](int id, std::size_t c_in, std::size_t len, std::size_t k) {
        const int w = next();
        const int b = next();
        id = t.bias_add(t.conv1d(id, w, c_in, spec_.filters, len, k), b, len);
        if (spec_.use_batchnorm) {
            const int g = next();
            const int be = next();
            id = t.batchnorm(id, g, be, spec_.filters, len, training, &bn_[bn_cursor++]);
        }
        return drop(t.gelu(id));
    };

    int out = -1;
    switch (spec_.arch) {
        case Arch::mlp: {
            int h = x, first = -1;
            for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
                h = dense_block(h, spec_.hidden[i]);
                if (i == 0) first = h;
            }
            h = t.add(h, t.matmul_nt(first, next()));  // projected skip
            out = dense_linear(h);
            break;
        }
        case Arch::cnn1d: {
            const std::size_t L = spec_.in_dim;
            std::vector<int> pooled;
            for (std::size_t k : spec_.kernels) {
                int c = conv_block(x, 1, L, k);
                c = conv_block(c, spec_.filters, L, k);
                pooled.push_back(t.gap(c, spec_.filters, L));
            }
            int h = t.concat(pooled);
            for (std::size_t w : spec_.dense) h = dense_block(h, w);
            out = dense_linear(h);
            break;
        }
        case Arch::deeponet: {
            int b = x;
            for (std::size_t i = 0; i < spec_.branch_depth; ++i)
                b = dense_block(b, spec_.branch_width);
            b = dense_linear(b);  // (B, p)
            int tr = t.leaf(trunk_feats_);
            for (std::size_t i = 0; i < spec_.trunk_depth; ++i)
                tr = dense_block(tr, spec_.trunk_width);
            tr = dense_linear(tr);        // (out_dim, p)
            out = t.matmul_nt(b, tr);     // sum_k b_k t_k(x_j)
            break;
        }
    }
    if (spec_.softplus_output) out = t.softplus(out);
    return out;
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
    double ss = 0.0;
    for (const auto& g : grads)
        for (double v : g.a) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0.0) {
        const double c = max_norm / norm;
        for (auto& g : grads)
            for (auto& v : g.a) v *= c;
    }
    return norm;
}

namespace {

// Mean loss over rows of X/Y in inference mode, chunked to bound graph size.
double eval_loss(Network& net, const Matrix& X, const Matrix& Y, const Matrix* Draw,
                 const Standardizer& st, double alpha, const RowwiseModel* adapter,
                 std::size_t chunk) {
    double total = 0.0;
    for (std::size_t start = 0; start < X.rows; start += chunk) {
        const std::size_t B = std::min(chunk, X.rows - start);
        std::vector<std::size_t> idx(B);
        std::iota(idx.begin(), idx.end(), start);
        Tape t;
        const int x = t.leaf(take_rows(X, idx));
        const int y = t.leaf(take_rows(Y, idx));
        const int yhat = net.emit(t, x, false, nullptr);
        int loss = t.mse(yhat, y);
        if (adapter && alpha > 0.0) {
            Vector inv_std(st.in_std.size());
            for (std::size_t j = 0; j < inv_std.size(); ++j) inv_std[j] = 1.0 / st.in_std[j];
            const int phys = t.col_affine(yhat, st.out_scale, st.out_mean);
            const int r = t.model_apply(phys, adapter);
            const int rstd = t.col_affine(r, inv_std, Vector(inv_std.size(), 0.0));
            const int dstd = t.col_affine(t.leaf(take_rows(*Draw, idx)), inv_std,
                                          Vector(inv_std.size(), 0.0));
            loss = t.add(loss, t.scale(t.mse(rstd, dstd), alpha));
        }
        total += t.value(loss)(0, 0) * static_cast<double>(B);
    }
    return total / static_cast<double>(X.rows);
}

}  // namespace

TrainedOperator train(const NetSpec& nspec, const Dataset& ds, const TrainConfig& cfg,
                      const ForwardModel* model) {
    const bool pinn = cfg.objective == Objective::pinn && cfg.alpha > 0.0;
    if (pinn && !model) throw SpecError("pinn objective needs the forward model");
    const std::size_t K = ds.m.rows;

    Split sp = split(K, 1.0 - cfg.val_fraction, cfg.seed);
    const Matrix m_tr = take_rows(ds.m, sp.train_idx);
    const Matrix d_tr = take_rows(ds.d, sp.train_idx);
    const Matrix m_va = take_rows(ds.m, sp.val_idx);
    const Matrix d_va = take_rows(ds.d, sp.val_idx);

    TrainedOperator op;
    op.standardizer = fit_standardizer(m_tr, d_tr, nspec.softplus_output);
    op.seed = cfg.seed;
    op.problem_id = ds.problem_id;
    op.objective = cfg.objective;
    op.alpha = cfg.objective == Objective::pinn ? cfg.alpha : 0.0;

    const Standardizer& st = op.standardizer;
    const Matrix Xtr = st.std_in_rows(d_tr), Ytr = st.std_out_rows(m_tr);
    const Matrix Xva = st.std_in_rows(d_va), Yva = st.std_out_rows(m_va);

    op.net = Network(nspec);
    op.net.init(cfg.seed);
    Network& net = op.net;

    // interface predictions can poke above the layer thickness; the residual
    // is evaluated at the projection onto the admissible cap
    Vector cap;
    if (const auto* im = dynamic_cast<const InterfaceModel*>(model))
        cap.assign(im->N, im->H - 1e-6);
    ModelRowAdapter adapter(model, cap);

    Vector inv_std(st.in_std.size());
    for (std::size_t j = 0; j < inv_std.size(); ++j) inv_std[j] = 1.0 / st.in_std[j];
    const Vector zero_shift(inv_std.size(), 0.0);

    const std::size_t P = net.params().size();
    std::vector<Matrix> mom(P), vel(P);
    for (std::size_t i = 0; i < P; ++i) {
        mom[i] = Matrix(net.params()[i].rows, net.params()[i].cols);
        vel[i] = Matrix(net.params()[i].rows, net.params()[i].cols);
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double lr = cfg.lr;
    std::size_t step = 0;

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Matrix> best_params = net.params();
    std::vector<BnState> best_bn = net.bn_states();
    std::size_t plateau = 0, stall = 0;

    RngStream order_root(cfg.seed, STREAM_ORDER);
    RngStream drop_root(cfg.seed, STREAM_DROP);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order(sp.train_idx.size());
        std::iota(order.begin(), order.end(), 0);
        RngStream os = order_root.fork(epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[os.next_u64() % i]);
        RngStream drops = drop_root.fork(epoch);

        double train_loss = 0.0;
        std::size_t nbatch = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++nbatch) {
            const std::size_t B = std::min(cfg.batch, order.size() - start);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + B));
            Tape t;
            std::vector<int> pids;
            const int x = t.leaf(take_rows(Xtr, idx));
            const int y = t.leaf(take_rows(Ytr, idx));
            const int yhat = net.emit(t, x, true, &drops, &pids);
            int loss = t.mse(yhat, y);
            if (pinn) {
                const int phys = t.col_affine(yhat, st.out_scale, st.out_mean);
                const int r = t.model_apply(phys, &adapter);
                const int rstd = t.col_affine(r, inv_std, zero_shift);
                const int dstd = t.col_affine(t.leaf(take_rows(d_tr, idx)), inv_std, zero_shift);
                loss = t.add(loss, t.scale(t.mse(rstd, dstd), cfg.alpha));
            }
            const double lv = t.value(loss)(0, 0);
            if (!std::isfinite(lv)) {
                std::ostringstream msg;
                msg << "non-finite loss " << lv << " at epoch " << epoch << " batch " << nbatch;
                throw NonFiniteLoss(msg.str());
            }
            train_loss += lv * static_cast<double>(B);
            t.backward(loss);

            std::vector<Matrix> grads(P);
            for (std::size_t i = 0; i < P; ++i) grads[i] = t.grad(pids[i]);
            clip_global_norm(grads, cfg.clip);

            ++step;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            for (std::size_t i = 0; i < P; ++i) {
                Matrix& th = net.params()[i];
                const bool decay = net.defs()[i].decay;
                for (std::size_t j = 0; j < th.a.size(); ++j) {
                    const double g = grads[i].a[j];
                    mom[i].a[j] = b1 * mom[i].a[j] + (1.0 - b1) * g;
                    vel[i].a[j] = b2 * vel[i].a[j] + (1.0 - b2) * g * g;
                    double upd = (mom[i].a[j] / c1) / (std::sqrt(vel[i].a[j] / c2) + eps);
                    if (decay) upd += cfg.weight_decay * th.a[j];
                    th.a[j] -= lr * upd;
                }
            }
        }
        train_loss /= static_cast<double>(order.size());

        const double val_loss = eval_loss(net, Xva, Yva, &d_va, st, pinn ? cfg.alpha : 0.0,
                                          pinn ? &adapter : nullptr, cfg.batch);
        op.history.push_back({epoch, train_loss, val_loss, lr});

        if (best_val - val_loss > cfg.improvement) {
            best_val = val_loss;
            op.best_epoch = epoch;
            best_params = net.params();
            best_bn = net.bn_states();
            plateau = 0;
            stall = 0;
        } else {
            ++plateau;
            ++stall;
            if (plateau >= cfg.plateau_patience) {
                lr *= cfg.plateau_factor;
                plateau = 0;
            }
            if (stall >= cfg.patience) break;
        }
    }

    net.params() = best_params;
    net.bn_states() = best_bn;
    op.best_val = best_val;
    op.pinn_projections = adapter.clamp_count;
    return op;
}

Vector TrainedOperator::predict(const Vector& d_raw) const {
    Matrix D(1, d_raw.size());
    D.a = d_raw;
    Matrix M = predict_rows(D);
    return M.a;
}

Matrix TrainedOperator::predict_rows(const Matrix& d_rows) const {
    if (d_rows.cols != net.spec().in_dim)
        throw ShapeError("predict: input dim mismatch");
    auto& n = const_cast<Network&>(net);  // emit leaves params untouched in inference
    Matrix out(d_rows.rows, net.spec().out_dim);
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < d_rows.rows; start += chunk) {
        const std::size_t B = std::min(chunk, d_rows.rows - start);
        std::vector<std::size_t> idx(B);
        std::iota(idx.begin(), idx.end(), start);
        Tape t;
        const int x = t.leaf(standardizer.std_in_rows(take_rows(d_rows, idx)));
        const int y = n.emit(t, x, false, nullptr);
        const Matrix& z = t.value(y);
        for (std::size_t i = 0; i < B; ++i) {
            Vector row(z.cols);
            for (std::size_t j = 0; j < z.cols; ++j) row[j] = z(i, j);
            Vector phys = standardizer.inv_out(row);
            for (std::size_t j = 0; j < z.cols; ++j) out(start + i, j) = phys[j];
        }
    }
    return out;
}

namespace {

void write_doubles(std::ofstream& f, const Vector& v) {
    static_assert(sizeof(double) == 8);
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& f, Vector& v) {
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!f) throw DomainError("params.bin truncated");
}

nlohmann::json vec_json(const Vector& v) { return nlohmann::json(v); }

}  // namespace

void save_trained(const TrainedOperator& op, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const NetSpec& s = op.net.spec();

    nlohmann::json j;
    j["format_version"] = 1;
    j["arch"] = to_string(s.arch);
    j["in_dim"] = s.in_dim;
    j["out_dim"] = s.out_dim;
    j["hidden"] = s.hidden;
    j["kernels"] = s.kernels;
    j["filters"] = s.filters;
    j["dense"] = s.dense;
    j["p"] = s.p;
    j["branch_depth"] = s.branch_depth;
    j["branch_width"] = s.branch_width;
    j["trunk_depth"] = s.trunk_depth;
    j["trunk_width"] = s.trunk_width;
    j["n_freqs"] = s.n_freqs;
    j["coords01"] = vec_json(s.coords01);
    j["dropout"] = s.dropout;
    j["lambda"] = s.lambda;
    j["softplus_output"] = s.softplus_output;
    j["use_batchnorm"] = s.use_batchnorm;
    j["seed"] = op.seed;
    j["problem_id"] = op.problem_id;
    j["objective"] = to_string(op.objective);
    j["alpha"] = op.alpha;
    j["best_epoch"] = op.best_epoch;
    j["best_val"] = op.best_val;
    j["pinn_projections"] = op.pinn_projections;
    nlohmann::json defs = nlohmann::json::array();
    for (const auto& d : op.net.defs())
        defs.push_back({{"name", d.name}, {"rows", d.rows}, {"cols", d.cols}, {"decay", d.decay}});
    j["params"] = defs;
    j["bn_channels"] = op.net.bn_channels();
    std::ofstream(dir + "/spec.json") << j.dump(2) << "\n";

    std::ofstream bin(dir + "/params.bin", std::ios::binary);
    for (const auto& P : op.net.params()) write_doubles(bin, P.a);
    for (const auto& b : op.net.bn_states()) {
        write_doubles(bin, b.running_mean);
        write_doubles(bin, b.running_var);
    }

    nlohmann::json sj;
    sj["in_mean"] = vec_json(op.standardizer.in_mean);
    sj["in_std"] = vec_json(op.standardizer.in_std);
    sj["out_mean"] = vec_json(op.standardizer.out_mean);
    sj["out_scale"] = vec_json(op.standardizer.out_scale);
    sj["scale_only"] = op.standardizer.scale_only;
    std::ofstream(dir + "/standardizer.json") << sj.dump(2) << "\n";

    std::ofstream h(dir + "/history.csv");
    h << "epoch,train_loss,val_loss,lr\n";
    char buf[128];
    for (const auto& r : op.history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                      r.val_loss, r.lr);
        h << buf;
    }
}

TrainedOperator load_trained(const std::string& dir) {
    std::ifstream sf(dir + "/spec.json");
    if (!sf) throw DomainError("missing spec.json in " + dir);
    nlohmann::json j = nlohmann::json::parse(sf);
    if (j.at("format_version").get<int>() != 1) throw DomainError("unsupported format_version");

    NetSpec s;
    s.arch = arch_from_string(j.at("arch").get<std::string>());
    s.in_dim = j.at("in_dim").get<std::size_t>();
    s.out_dim = j.at("out_dim").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.kernels = j.at("kernels").get<std::vector<std::size_t>>();
    s.filters = j.at("filters").get<std::size_t>();
    s.dense = j.at("dense").get<std::vector<std::size_t>>();
    s.p = j.at("p").get<std::size_t>();
    s.branch_depth = j.at("branch_depth").get<std::size_t>();
    s.branch_width = j.at("branch_width").get<std::size_t>();
    s.trunk_depth = j.at("trunk_depth").get<std::size_t>();
    s.trunk_width = j.at("trunk_width").get<std::size_t>();
    s.n_freqs = j.at("n_freqs").get<std::size_t>();
    s.coords01 = j.at("coords01").get<Vector>();
    s.dropout = j.at("dropout").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.softplus_output = j.at("softplus_output").get<bool>();
    s.use_batchnorm = j.at("use_batchnorm").get<bool>();

    TrainedOperator op;
    op.net = Network(s);
    op.seed = j.at("seed").get<std::uint64_t>();
    op.problem_id = j.at("problem_id").get<std::string>();
    op.objective = objective_from_string(j.at("objective").get<std::string>());
    op.alpha = j.at("alpha").get<double>();
    op.best_epoch = j.at("best_epoch").get<std::size_t>();
    op.best_val = j.at("best_val").get<double>();
    op.pinn_projections = j.at("pinn_projections").get<std::size_t>();

    std::ifstream bin(dir + "/params.bin", std::ios::binary);
    if (!bin) throw DomainError("missing params.bin in " + dir);
    for (auto& P : op.net.params()) read_doubles(bin, P.a);
    for (auto& b : op.net.bn_states()) {
        read_doubles(bin, b.running_mean);
        read_doubles(bin, b.running_var);
    }

    std::ifstream stf(dir + "/standardizer.json");
    if (!stf) throw DomainError("missing standardizer.json in " + dir);
    nlohmann::json sj = nlohmann::json::parse(stf);
    op.standardizer.in_mean = sj.at("in_mean").get<Vector>();
    op.standardizer.in_std = sj.at("in_std").get<Vector>();
    op.standardizer.out_mean = sj.at("out_mean").get<Vector>();
    op.standardizer.out_scale = sj.at("out_scale").get<Vector>();
    op.standardizer.scale_only = sj.at("scale_only").get<bool>();

    std::ifstream hf(dir + "/history.csv");
    if (hf) {
        std::string line;
        std::getline(hf, line);  // header
        while (std::getline(hf, line)) {
            if (line.empty()) continue;
            HistoryRow r;
            std::istringstream ls(line);
            char comma;
            ls >> r.epoch >> comma >> r.train_loss >> comma >> r.val_loss >> comma >> r.lr;
            op.history.push_back(r);
        }
    }
    return op;
}

}  // namespace invlab
