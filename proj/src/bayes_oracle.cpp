#include "invlab/bayes_oracle.hpp"

#include "invlab/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <memory>
#include <thread>

namespace invlab {

namespace {

constexpr std::uint64_t STREAM_PARAMS = 101;
constexpr std::uint64_t STREAM_NOISE = 202;
constexpr double LOG_FLOOR = -700.0;

double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = a[i] - b[i];
        s += r * r;
    }
    return s;
}

// Log-posterior weights up to a shared constant: log w_a - |d - G m_a|^2 /
// (2 sigma^2) - tilt * |G m_a - d|^2. Returns the max of the pure likelihood
// exponent: the underflow policy judges data support, so the tilt (a measure
// reweighting, handled exactly by the max-shift) stays out of it.
double log_weights(const OracleProblem& prob, const Vector& d, double tilt,
                   std::vector<double>& lw) {
    const double inv2s2 = 1.0 / (2.0 * prob.sigma_d * prob.sigma_d);
    const std::size_t A = prob.prior.atoms.size();
    lw.resize(A);
    double max_lik = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
        const double d2 = sq_dist(d, prob.images[a]);
        max_lik = std::max(max_lik, -d2 * inv2s2);
        const double w = prob.prior.weights[a];
        lw[a] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) -
                d2 * inv2s2 - tilt * d2;
    }
    return max_lik;
}

OracleMean weighted_mean(const OracleProblem& prob, const Vector& d, double tilt) {
    std::vector<double> lw;
    const double max_lik = log_weights(prob, d, tilt, lw);
    if (max_lik < LOG_FLOOR) return {prior_mean(prob.prior), true};

    const double shift = *std::max_element(lw.begin(), lw.end());
    const std::size_t N = prob.prior.atoms[0].size();
    Vector m(N, 0.0);
    double z = 0.0;
    for (std::size_t a = 0; a < lw.size(); ++a) {
        const double p = std::exp(lw[a] - shift);
        z += p;
        for (std::size_t j = 0; j < N; ++j) m[j] += p * prob.prior.atoms[a][j];
    }
    for (auto& v : m) v /= z;
    return {std::move(m), false};
}

}  // namespace

OracleProblem::OracleProblem(DiscretePrior p, const ForwardModel& model, double sigma_d_,
                             double alpha_)
    : prior(std::move(p)), forward(&model), sigma_d(sigma_d_), alpha(alpha_) {
    const std::size_t A = prior.atoms.size();
    if (A == 0 || A > 4096) throw SpecError("OracleProblem: atom count must be in [1, 4096]");
    if (prior.weights.size() != A)
        throw SpecError("OracleProblem: weights/atoms length mismatch");
    double sum = 0.0;
    for (double w : prior.weights) {
        if (!(w >= 0.0)) throw SpecError("OracleProblem: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw SpecError("OracleProblem: weights must sum to 1 within 1e-12");
    if (!(sigma_d > 0.0)) throw SpecError("OracleProblem: sigma_d must be positive");
    if (!(alpha >= 0.0)) throw SpecError("OracleProblem: alpha must be nonnegative");
    const std::size_t N = forward->param_dim();
    images.reserve(A);
    for (const auto& atom : prior.atoms) {
        if (atom.size() != N) throw SpecError("OracleProblem: atom dimension mismatch");
        images.push_back(forward->evaluate(atom));
    }
}

OracleMean conditional_mean_enum(const OracleProblem& prob, const Vector& d) {
    return weighted_mean(prob, d, 0.0);
}

OracleMean tilted_conditional_mean(const OracleProblem& prob, const Vector& d) {
    return weighted_mean(prob, d, prob.alpha);
}

OracleVar posterior_variance_enum(const OracleProblem& prob, const Vector& d) {
    std::vector<double> lw;
    const double max_lik = log_weights(prob, d, 0.0, lw);
    if (max_lik < LOG_FLOOR) {
        // Fall back to the prior's own spread about its mean.
        const Vector mu = prior_mean(prob.prior);
        double var = 0.0;
        for (std::size_t a = 0; a < prob.prior.atoms.size(); ++a)
            var += prob.prior.weights[a] * sq_dist(prob.prior.atoms[a], mu);
        return {var, true};
    }
    const OracleMean mean = weighted_mean(prob, d, 0.0);
    const double shift = *std::max_element(lw.begin(), lw.end());
    double z = 0.0, acc = 0.0;
    for (std::size_t a = 0; a < lw.size(); ++a) {
        const double p = std::exp(lw[a] - shift);
        z += p;
        acc += p * sq_dist(prob.prior.atoms[a], mean.m);
    }
    return {acc / z, false};
}

Vector prior_mean(const DiscretePrior& prior) {
    const std::size_t N = prior.atoms[0].size();
    Vector m(N, 0.0);
    for (std::size_t a = 0; a < prior.atoms.size(); ++a)
        for (std::size_t j = 0; j < N; ++j) m[j] += prior.weights[a] * prior.atoms[a][j];
    return m;
}

Dataset generate_discrete(const OracleProblem& prob, std::size_t K, std::uint64_t seed) {
    if (K == 0) throw DomainError("generate_discrete: K must be positive");
    const std::size_t N = prob.forward->param_dim();
    const std::size_t M = prob.forward->obs_dim();
    const RngStream params_root(seed, STREAM_PARAMS);
    const RngStream noise_root(seed, STREAM_NOISE);

    Dataset ds;
    ds.m = Matrix(K, N);
    ds.d = Matrix(K, M);
    ds.sigma_d = prob.sigma_d;
    ds.seed = seed;
    ds.problem_id = "oracle";
    for (std::size_t i = 0; i < K; ++i) {
        RngStream pr = params_root.fork(i);
        const double u = pr.uniform();
        std::size_t pick = prob.prior.atoms.size() - 1;
        double cum = 0.0;
        for (std::size_t a = 0; a < prob.prior.atoms.size(); ++a) {
            cum += prob.prior.weights[a];
            if (u < cum) {
                pick = a;
                break;
            }
        }
        RngStream nr = noise_root.fork(i);
        for (std::size_t j = 0; j < N; ++j) ds.m(i, j) = prob.prior.atoms[pick][j];
        for (std::size_t j = 0; j < M; ++j)
            ds.d(i, j) = prob.images[pick][j] + prob.sigma_d * nr.normal();
    }
    return ds;
}

DecompResult bias_variance_decompose(const OracleProblem& prob,
                                     const std::vector<Predictor>& predictors,
                                     const Matrix& test_m, const Matrix& test_d) {
    if (predictors.empty()) throw DomainError("bias_variance_decompose: no predictors");
    if (test_m.rows == 0 || test_m.rows != test_d.rows)
        throw ShapeError("bias_variance_decompose: test set shape mismatch");
    const std::size_t T = test_d.rows;
    const std::size_t R = predictors.size();
    const std::size_t N = test_m.cols;

    DecompResult res;
    res.R = R;
    for (std::size_t t = 0; t < T; ++t) {
        Vector d(test_d.cols), m_true(N);
        for (std::size_t j = 0; j < test_d.cols; ++j) d[j] = test_d(t, j);
        for (std::size_t j = 0; j < N; ++j) m_true[j] = test_m(t, j);

        std::vector<Vector> preds(R);
        Vector mean_pred(N, 0.0);
        for (std::size_t r = 0; r < R; ++r) {
            preds[r] = predictors[r](d);
            if (preds[r].size() != N)
                throw ShapeError("bias_variance_decompose: predictor output dim mismatch");
            for (std::size_t j = 0; j < N; ++j) mean_pred[j] += preds[r][j];
        }
        for (auto& v : mean_pred) v /= static_cast<double>(R);

        res.bias2 += sq_dist(mean_pred, conditional_mean_enum(prob, d).m);
        double var = 0.0, risk = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            var += sq_dist(preds[r], mean_pred);
            risk += sq_dist(preds[r], m_true);
        }
        res.variance += var / static_cast<double>(R);
        res.total += risk / static_cast<double>(R);
        res.irreducible += posterior_variance_enum(prob, d).value;
    }
    const double Td = static_cast<double>(T);
    res.bias2 /= Td;
    res.variance /= Td;
    res.irreducible /= Td;
    res.total /= Td;
    res.gap = res.total - (res.bias2 + res.variance + res.irreducible);
    return res;
}

DecompResult bias_variance_decompose(const OracleProblem& prob, const NetSpec& nspec,
                                     const TrainConfig& cfg, std::size_t R, std::size_t K,
                                     std::size_t T, std::uint64_t seed) {
    if (R < 8) throw DomainError("bias_variance_decompose: need R >= 8 replicates");
    const Dataset test = generate_discrete(prob, T, seed);

    std::vector<std::shared_ptr<TrainedOperator>> ops(R);
    std::vector<std::exception_ptr> hard_errors(R);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= R) return;
            try {
                const Dataset ds = generate_discrete(prob, K, seed + 1 + r);
                TrainConfig rc = cfg;
                rc.seed = seed + 1 + r;
                ops[r] = std::make_shared<TrainedOperator>(train(nspec, ds, rc, prob.forward));
            } catch (const NonFiniteLoss& e) {
                std::fprintf(stderr, "[oracle] replicate %zu aborted: %s\n", r, e.what());
            } catch (...) {
                hard_errors[r] = std::current_exception();
            }
        }
    };
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers = std::min<std::size_t>(R, hw ? hw : 2);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& ep : hard_errors)
        if (ep) std::rethrow_exception(ep);

    std::vector<Predictor> preds;
    for (auto& op : ops)
        if (op) preds.push_back([op](const Vector& d) { return op->predict(d); });
    if (preds.size() < R)
        std::fprintf(stderr, "[oracle] %zu of %zu replicates usable\n", preds.size(), R);
    if (preds.size() < 8)
        throw DomainError("bias_variance_decompose: fewer than 8 usable replicates");

    DecompResult res = bias_variance_decompose(prob, preds, test.m, test.d);
    res.K = K;
    res.seed = seed;
    return res;
}

std::string decomposition_report(const DecompResult& res) {
    nlohmann::json j;
    j["bias2"] = res.bias2;
    j["variance"] = res.variance;
    j["irreducible"] = res.irreducible;
    j["total"] = res.total;
    j["gap"] = res.gap;
    j["R"] = res.R;
    j["K"] = res.K;
    j["seed"] = res.seed;
    return j.dump(2);
}

}  // namespace invlab
