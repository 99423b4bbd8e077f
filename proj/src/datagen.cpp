#include "invlab/datagen.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace invlab {

namespace {

constexpr std::uint64_t STREAM_PARAMS = 101;
constexpr std::uint64_t STREAM_NOISE = 202;
constexpr std::uint64_t STREAM_SPLIT = 303;

}  // namespace

Dataset generate(const ForwardModel& model, const PriorSpec& prior, std::size_t K,
                 double sigma_d, std::uint64_t seed, const std::string& problem_id) {
    if (K < 1) throw DomainError("generate: K >= 1 required");
    if (sigma_d < 0.0) throw DomainError("generate: sigma_d >= 0 required");
    const std::size_t N = model.param_dim(), M = model.obs_dim();
    Dataset ds;
    ds.m = Matrix(K, N);
    ds.d = Matrix(K, M);
    ds.sigma_d = sigma_d;
    ds.seed = seed;
    ds.problem_id = problem_id;
    ds.family = prior.family;

    RngStream m_root(seed, STREAM_PARAMS);
    RngStream e_root(seed, STREAM_NOISE);
    for (std::size_t k = 0; k < K; ++k) {
        RngStream ms = m_root.fork(k);
        Vector mk;
        for (;;) {
            mk = sample_one(prior, ms);
            if (model.admissible(mk)) break;
            ++ds.redraws;
        }
        Vector dk = model.evaluate(mk);
        RngStream es = e_root.fork(k);
        for (std::size_t i = 0; i < M; ++i) dk[i] += sigma_d * es.normal();
        for (std::size_t j = 0; j < N; ++j) ds.m(k, j) = mk[j];
        for (std::size_t i = 0; i < M; ++i) ds.d(k, i) = dk[i];
    }
    return ds;
}

namespace {

Vector col_means(const Matrix& A) {
    Vector mu(A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) mu[j] += A(i, j);
    for (auto& v : mu) v /= static_cast<double>(A.rows);
    return mu;
}

Vector col_stds(const Matrix& A, const Vector& mu) {
    Vector sd(A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) {
            const double d = A(i, j) - mu[j];
            sd[j] += d * d;
        }
    for (auto& v : sd) v = std::sqrt(v / static_cast<double>(A.rows));
    return sd;
}

}  // namespace

Standardizer fit_standardizer(const Matrix& m_train, const Matrix& d_train, bool scale_only) {
    if (m_train.rows < 2 || d_train.rows != m_train.rows)
        throw DomainError("fit_standardizer: need K >= 2 consistent rows");
    Standardizer st;
    st.scale_only = scale_only;
    st.in_mean = col_means(d_train);
    st.in_std = col_stds(d_train, st.in_mean);
    for (auto& v : st.in_std)
        if (v < 1e-12) v = 1.0;
    if (scale_only) {
        st.out_mean.assign(m_train.cols, 0.0);
        st.out_scale.assign(m_train.cols, 0.0);
        for (std::size_t i = 0; i < m_train.rows; ++i)
            for (std::size_t j = 0; j < m_train.cols; ++j)
                st.out_scale[j] += m_train(i, j) * m_train(i, j);
        for (auto& v : st.out_scale) {
            v = std::sqrt(v / static_cast<double>(m_train.rows));
            if (v < 1e-12) v = 1.0;
        }
    } else {
        st.out_mean = col_means(m_train);
        st.out_scale = col_stds(m_train, st.out_mean);
        for (auto& v : st.out_scale)
            if (v < 1e-12) v = 1.0;
    }
    return st;
}

Vector Standardizer::std_in(const Vector& d) const {
    Vector o(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) o[j] = (d[j] - in_mean[j]) / in_std[j];
    return o;
}

Vector Standardizer::inv_in(const Vector& d) const {
    Vector o(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) o[j] = d[j] * in_std[j] + in_mean[j];
    return o;
}

Vector Standardizer::std_out(const Vector& m) const {
    Vector o(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) o[j] = (m[j] - out_mean[j]) / out_scale[j];
    return o;
}

Vector Standardizer::inv_out(const Vector& m) const {
    Vector o(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) o[j] = m[j] * out_scale[j] + out_mean[j];
    return o;
}

Matrix Standardizer::std_in_rows(const Matrix& D) const {
    Matrix O(D.rows, D.cols);
    for (std::size_t i = 0; i < D.rows; ++i)
        for (std::size_t j = 0; j < D.cols; ++j) O(i, j) = (D(i, j) - in_mean[j]) / in_std[j];
    return O;
}

Matrix Standardizer::std_out_rows(const Matrix& M) const {
    Matrix O(M.rows, M.cols);
    for (std::size_t i = 0; i < M.rows; ++i)
        for (std::size_t j = 0; j < M.cols; ++j) O(i, j) = (M(i, j) - out_mean[j]) / out_scale[j];
    return O;
}

Split split(std::size_t K, double fraction, std::uint64_t seed) {
    if (K < 2) throw DomainError("split: K >= 2 required");
    std::vector<std::size_t> idx(K);
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed, STREAM_SPLIT);
    for (std::size_t i = K - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
        std::swap(idx[i], idx[std::min(j, i)]);
    }
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(K)));
    n_train = std::max<std::size_t>(1, std::min(n_train, K - 1));
    Split sp;
    sp.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    sp.val_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return sp;
}

Matrix take_rows(const Matrix& A, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), A.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < A.cols; ++j) out(i, j) = A(idx[i], j);
    return out;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta{{"format_version", 1},
                        {"problem", ds.problem_id},
                        {"prior_family", to_string(ds.family)},
                        {"K", ds.m.rows},
                        {"sigma_d", ds.sigma_d},
                        {"seed", ds.seed},
                        {"redraws", ds.redraws}};
    std::ofstream mf(dir + "/meta.json");
    mf << meta.dump(2) << "\n";
    write_matrix_csv(dir + "/m.csv", ds.m);
    write_matrix_csv(dir + "/d.csv", ds.d);
}

namespace {

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty csv " + path);
    Matrix A(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < A.rows; ++i) {
        if (rows[i].size() != A.cols) throw std::runtime_error("ragged csv " + path);
        for (std::size_t j = 0; j < A.cols; ++j) A(i, j) = rows[i][j];
    }
    return A;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/meta.json");
    if (!mf) throw std::runtime_error("cannot open " + dir + "/meta.json");
    nlohmann::json meta = nlohmann::json::parse(mf);
    if (meta.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported dataset format version");
    Dataset ds;
    ds.problem_id = meta.at("problem").get<std::string>();
    ds.family = prior_family_from_string(meta.at("prior_family").get<std::string>());
    ds.sigma_d = meta.at("sigma_d").get<double>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.redraws = meta.at("redraws").get<std::size_t>();
    ds.m = read_matrix_csv(dir + "/m.csv");
    ds.d = read_matrix_csv(dir + "/d.csv");
    return ds;
}

}  // namespace invlab
