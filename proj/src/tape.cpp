#include "invlab/tape.hpp"

#include "invlab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace invlab {

namespace {

constexpr double INV_SQRT2 = 0.70710678118654752440;
constexpr double INV_SQRT_2PI = 0.39894228040143267794;

double norm_cdf(double x) { return 0.5 * std::erfc(-x * INV_SQRT2); }
double norm_pdf(double x) { return INV_SQRT_2PI * std::exp(-0.5 * x * x); }

double softplus_val(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols) throw ShapeError(what);
}

}  // namespace

int Tape::leaf(Matrix v) {
    Node n;
    n.op = Op::leaf;
    n.val = std::move(v);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::matmul;
    n.in = {a, b};
    n.val = invlab::matmul(value(a), value(b));
    return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
    Node n;
    n.op = Op::matmul_nt;
    n.in = {a, b};
    n.val = invlab::matmul_nt(value(a), value(b));
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    check_same_shape(value(a), value(b), "add: shape mismatch");
    Node n;
    n.op = Op::add;
    n.in = {a, b};
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.a.size(); ++i) n.val.a[i] += value(b).a[i];
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    check_same_shape(value(a), value(b), "sub: shape mismatch");
    Node n;
    n.op = Op::sub;
    n.in = {a, b};
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.a.size(); ++i) n.val.a[i] -= value(b).a[i];
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    check_same_shape(value(a), value(b), "mul: shape mismatch");
    Node n;
    n.op = Op::mul;
    n.in = {a, b};
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.a.size(); ++i) n.val.a[i] *= value(b).a[i];
    return push(std::move(n));
}

int Tape::cmul(int a, Matrix mask) {
    check_same_shape(value(a), mask, "cmul: shape mismatch");
    Node n;
    n.op = Op::cmul;
    n.in = {a};
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.a.size(); ++i) n.val.a[i] *= mask.a[i];
    n.aux = std::move(mask);
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::scale;
    n.in = {a};
    n.c = c;
    n.val = value(a);
    for (auto& v : n.val.a) v *= c;
    return push(std::move(n));
}

int Tape::col_affine(int a, Vector s, Vector t) {
    const Matrix& x = value(a);
    if (s.size() != x.cols || t.size() != x.cols) throw ShapeError("col_affine: coefficient length mismatch");
    Node n;
    n.op = Op::col_affine;
    n.in = {a};
    n.val = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) n.val(i, j) = x(i, j) * s[j] + t[j];
    n.s = std::move(s);
    n.t = std::move(t);
    return push(std::move(n));
}

int Tape::bias_add(int a, int bias, std::size_t positions) {
    const Matrix& x = value(a);
    const Matrix& b = value(bias);
    if (b.rows != 1 || b.cols * positions != x.cols) throw ShapeError("bias_add: channel layout mismatch");
    Node n;
    n.op = Op::bias_add;
    n.in = {a, bias};
    n.len = positions;
    n.val = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t c = 0; c < b.cols; ++c)
            for (std::size_t p = 0; p < positions; ++p) n.val(i, c * positions + p) += b(0, c);
    return push(std::move(n));
}

int Tape::gelu(int a) {
    Node n;
    n.op = Op::gelu;
    n.in = {a};
    n.val = value(a);
    for (auto& v : n.val.a) v = v * norm_cdf(v);
    return push(std::move(n));
}

int Tape::softplus(int a) {
    Node n;
    n.op = Op::softplus;
    n.in = {a};
    n.val = value(a);
    for (auto& v : n.val.a) v = softplus_val(v);
    return push(std::move(n));
}

int Tape::tanh_(int a) {
    Node n;
    n.op = Op::tanh_;
    n.in = {a};
    n.val = value(a);
    for (auto& v : n.val.a) v = std::tanh(v);
    return push(std::move(n));
}

int Tape::sin_(int a) {
    Node n;
    n.op = Op::sin_;
    n.in = {a};
    n.val = value(a);
    for (auto& v : n.val.a) v = std::sin(v);
    return push(std::move(n));
}

int Tape::cos_(int a) {
    Node n;
    n.op = Op::cos_;
    n.in = {a};
    n.val = value(a);
    for (auto& v : n.val.a) v = std::cos(v);
    return push(std::move(n));
}

int Tape::conv1d(int x, int w, std::size_t c_in, std::size_t c_out, std::size_t len, std::size_t k) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    if (k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
    if (xv.cols != c_in * len) throw ShapeError("conv1d: input layout mismatch");
    if (wv.rows != c_out || wv.cols != c_in * k) throw ShapeError("conv1d: weight layout mismatch");
    const std::size_t B = xv.rows;
    const std::size_t pad = (k - 1) / 2;

    // im2col: row (b*len + p), column (ci*k + t) = x[b, ci, p + t - pad].
    Matrix col(B * len, c_in * k);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < len; ++p) {
            double* crow = &col.a[(b * len + p) * col.cols];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                const double* xrow = &xv.a[b * xv.cols + ci * len];
                for (std::size_t t = 0; t < k; ++t) {
                    const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p + t) - static_cast<std::ptrdiff_t>(pad);
                    crow[ci * k + t] = (q >= 0 && q < static_cast<std::ptrdiff_t>(len)) ? xrow[q] : 0.0;
                }
            }
        }

    Matrix y2 = invlab::matmul_nt(col, wv);  // (B*len, c_out)
    Node n;
    n.op = Op::conv1d;
    n.in = {x, w};
    n.c_in = c_in;
    n.c_out = c_out;
    n.len = len;
    n.k = k;
    n.val = Matrix(B, c_out * len);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < len; ++p)
            for (std::size_t co = 0; co < c_out; ++co)
                n.val(b, co * len + p) = y2(b * len + p, co);
    n.aux = std::move(col);
    return push(std::move(n));
}

int Tape::gap(int a, std::size_t channels, std::size_t positions) {
    const Matrix& x = value(a);
    if (x.cols != channels * positions) throw ShapeError("gap: layout mismatch");
    Node n;
    n.op = Op::gap;
    n.in = {a};
    n.c_in = channels;
    n.len = positions;
    n.val = Matrix(x.rows, channels);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < positions; ++p) s += x(i, c * positions + p);
            n.val(i, c) = s / static_cast<double>(positions);
        }
    return push(std::move(n));
}

int Tape::batchnorm(int x, int gamma, int beta, std::size_t channels, std::size_t positions,
                    bool training, BnState* state) {
    const Matrix& xv = value(x);
    const Matrix& g = value(gamma);
    const Matrix& b = value(beta);
    if (xv.cols != channels * positions) throw ShapeError("batchnorm: layout mismatch");
    if (g.rows != 1 || g.cols != channels || b.rows != 1 || b.cols != channels)
        throw ShapeError("batchnorm: gamma/beta layout mismatch");
    if (state->running_mean.size() != channels) throw ShapeError("batchnorm: state channel mismatch");
    constexpr double eps_bn = 1e-5;
    constexpr double momentum = 0.9;
    const std::size_t B = xv.rows;
    const double cnt = static_cast<double>(B * positions);

    Node n;
    n.op = Op::batchnorm;
    n.in = {x, gamma, beta};
    n.c_in = channels;
    n.len = positions;
    n.training = training;
    n.aux = Matrix(B, channels * positions);  // xhat
    n.s.assign(channels, 0.0);                // inv_std actually used to normalize
    n.val = Matrix(B, channels * positions);

    for (std::size_t c = 0; c < channels; ++c) {
        double mu, var;
        if (training) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t p = 0; p < positions; ++p) {
                    const double v = xv(i, c * positions + p);
                    s1 += v;
                    s2 += v * v;
                }
            mu = s1 / cnt;
            var = std::max(0.0, s2 / cnt - mu * mu);
            state->running_mean[c] = momentum * state->running_mean[c] + (1.0 - momentum) * mu;
            state->running_var[c] = momentum * state->running_var[c] + (1.0 - momentum) * var;
        } else {
            mu = state->running_mean[c];
            var = state->running_var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + eps_bn);
        n.s[c] = inv_std;
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t p = 0; p < positions; ++p) {
                const std::size_t j = c * positions + p;
                const double xh = (xv(i, j) - mu) * inv_std;
                n.aux(i, j) = xh;
                n.val(i, j) = g(0, c) * xh + b(0, c);
            }
    }
    return push(std::move(n));
}

int Tape::mse(int a, int b) {
    check_same_shape(value(a), value(b), "mse: shape mismatch");
    Node n;
    n.op = Op::mse;
    n.in = {a, b};
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    double s = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        const double d = x.a[i] - y.a[i];
        s += d * d;
    }
    n.val = Matrix(1, 1, s / static_cast<double>(x.a.size()));
    return push(std::move(n));
}

int Tape::sumsq(int a) {
    Node n;
    n.op = Op::sumsq;
    n.in = {a};
    double s = 0.0;
    for (double v : value(a).a) s += v * v;
    n.val = Matrix(1, 1, s);
    return push(std::move(n));
}

int Tape::concat(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const std::size_t rows = value(parts[0]).rows;
    std::size_t cols = 0;
    for (int p : parts) {
        if (value(p).rows != rows) throw ShapeError("concat: row mismatch");
        cols += value(p).cols;
    }
    Node n;
    n.op = Op::concat;
    n.in = parts;
    n.val = Matrix(rows, cols);
    std::size_t off = 0;
    for (int p : parts) {
        const Matrix& x = value(p);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) n.val(i, off + j) = x(i, j);
        off += x.cols;
    }
    return push(std::move(n));
}

int Tape::model_apply(int a, const RowwiseModel* model) {
    const Matrix& x = value(a);
    if (x.cols != model->in_dim()) throw ShapeError("model_apply: row dimension mismatch");
    Node n;
    n.op = Op::model_apply;
    n.in = {a};
    n.model = model;
    n.val = Matrix(x.rows, model->out_dim());
    if (const Matrix* G = model->linear_matrix()) {
        n.val = invlab::matmul_nt(x, *G);
    } else {
        Vector row(x.cols);
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < x.cols; ++j) row[j] = x(i, j);
            Vector y = model->apply_row(row);
            for (std::size_t j = 0; j < y.size(); ++j) n.val(i, j) = y[j];
        }
    }
    return push(std::move(n));
}

void Tape::backward(int output) {
    Node& out = at(output);
    if (out.val.rows != 1 || out.val.cols != 1)
        throw NonScalarOutput("backward: output node is not scalar");
    for (auto& n : nodes_) {
        n.grad = Matrix(n.val.rows, n.val.cols);
    }
    out.grad(0, 0) = 1.0;
    for (int id = output; id >= 0; --id) {
        Node& n = at(id);
        bool nonzero = false;
        for (double v : n.grad.a)
            if (v != 0.0) { nonzero = true; break; }
        if (nonzero) backprop(n);
    }
}

void Tape::backprop(Node& n) {
    const Matrix& dy = n.grad;
    switch (n.op) {
        case Op::leaf:
            break;
        case Op::matmul: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            Matrix dA = invlab::matmul_nt(dy, B.val);
            Matrix dB = invlab::matmul_tn(A.val, dy);
            for (std::size_t i = 0; i < dA.a.size(); ++i) A.grad.a[i] += dA.a[i];
            for (std::size_t i = 0; i < dB.a.size(); ++i) B.grad.a[i] += dB.a[i];
            break;
        }
        case Op::matmul_nt: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            Matrix dA = invlab::matmul(dy, B.val);
            Matrix dB = invlab::matmul_tn(dy, A.val);
            for (std::size_t i = 0; i < dA.a.size(); ++i) A.grad.a[i] += dA.a[i];
            for (std::size_t i = 0; i < dB.a.size(); ++i) B.grad.a[i] += dB.a[i];
            break;
        }
        case Op::add: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) {
                A.grad.a[i] += dy.a[i];
                B.grad.a[i] += dy.a[i];
            }
            break;
        }
        case Op::sub: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) {
                A.grad.a[i] += dy.a[i];
                B.grad.a[i] -= dy.a[i];
            }
            break;
        }
        case Op::mul: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) {
                A.grad.a[i] += dy.a[i] * B.val.a[i];
                B.grad.a[i] += dy.a[i] * A.val.a[i];
            }
            break;
        }
        case Op::cmul: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) A.grad.a[i] += dy.a[i] * n.aux.a[i];
            break;
        }
        case Op::scale: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) A.grad.a[i] += n.c * dy.a[i];
            break;
        }
        case Op::col_affine: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.rows; ++i)
                for (std::size_t j = 0; j < dy.cols; ++j) A.grad(i, j) += dy(i, j) * n.s[j];
            break;
        }
        case Op::bias_add: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            const std::size_t positions = n.len;
            const std::size_t channels = B.val.cols;
            for (std::size_t i = 0; i < dy.a.size(); ++i) A.grad.a[i] += dy.a[i];
            for (std::size_t i = 0; i < dy.rows; ++i)
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t p = 0; p < positions; ++p)
                        B.grad(0, c) += dy(i, c * positions + p);
            break;
        }
        case Op::gelu: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i) {
                const double x = A.val.a[i];
                A.grad.a[i] += dy.a[i] * (norm_cdf(x) + x * norm_pdf(x));
            }
            break;
        }
        case Op::softplus: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i)
                A.grad.a[i] += dy.a[i] * sigmoid(A.val.a[i]);
            break;
        }
        case Op::tanh_: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i)
                A.grad.a[i] += dy.a[i] * (1.0 - n.val.a[i] * n.val.a[i]);
            break;
        }
        case Op::sin_: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i)
                A.grad.a[i] += dy.a[i] * std::cos(A.val.a[i]);
            break;
        }
        case Op::cos_: {
            Node& A = at(n.in[0]);
            for (std::size_t i = 0; i < dy.a.size(); ++i)
                A.grad.a[i] -= dy.a[i] * std::sin(A.val.a[i]);
            break;
        }
        case Op::conv1d: {
            Node& X = at(n.in[0]);
            Node& W = at(n.in[1]);
            const std::size_t B = X.val.rows;
            const std::size_t c_in = n.c_in, c_out = n.c_out, len = n.len, k = n.k;
            const std::size_t pad = (k - 1) / 2;
            Matrix dy2(B * len, c_out);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t p = 0; p < len; ++p)
                    for (std::size_t co = 0; co < c_out; ++co)
                        dy2(b * len + p, co) = dy(b, co * len + p);
            Matrix dW = invlab::matmul_tn(dy2, n.aux);  // (c_out, c_in*k)
            for (std::size_t i = 0; i < dW.a.size(); ++i) W.grad.a[i] += dW.a[i];
            Matrix dcol = invlab::matmul(dy2, W.val);  // (B*len, c_in*k)
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t p = 0; p < len; ++p) {
                    const double* crow = &dcol.a[(b * len + p) * dcol.cols];
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        double* xrow = &X.grad.a[b * X.grad.cols + ci * len];
                        for (std::size_t t = 0; t < k; ++t) {
                            const std::ptrdiff_t q =
                                static_cast<std::ptrdiff_t>(p + t) - static_cast<std::ptrdiff_t>(pad);
                            if (q >= 0 && q < static_cast<std::ptrdiff_t>(len)) xrow[q] += crow[ci * k + t];
                        }
                    }
                }
            break;
        }
        case Op::gap: {
            Node& A = at(n.in[0]);
            const double inv = 1.0 / static_cast<double>(n.len);
            for (std::size_t i = 0; i < dy.rows; ++i)
                for (std::size_t c = 0; c < n.c_in; ++c) {
                    const double g = dy(i, c) * inv;
                    for (std::size_t p = 0; p < n.len; ++p) A.grad(i, c * n.len + p) += g;
                }
            break;
        }
        case Op::batchnorm: {
            Node& X = at(n.in[0]);
            Node& G = at(n.in[1]);
            Node& Bt = at(n.in[2]);
            const std::size_t B = X.val.rows;
            const std::size_t positions = n.len;
            const double cnt = static_cast<double>(B * positions);
            for (std::size_t c = 0; c < n.c_in; ++c) {
                const double gamma = G.val(0, c);
                const double inv_std = n.s[c];
                double dgamma = 0.0, dbeta = 0.0, sum1 = 0.0, sum2 = 0.0;
                for (std::size_t i = 0; i < B; ++i)
                    for (std::size_t p = 0; p < positions; ++p) {
                        const std::size_t j = c * positions + p;
                        const double g = dy(i, j);
                        const double xh = n.aux(i, j);
                        dgamma += g * xh;
                        dbeta += g;
                        sum1 += g * gamma;
                        sum2 += g * gamma * xh;
                    }
                G.grad(0, c) += dgamma;
                Bt.grad(0, c) += dbeta;
                if (n.training) {
                    for (std::size_t i = 0; i < B; ++i)
                        for (std::size_t p = 0; p < positions; ++p) {
                            const std::size_t j = c * positions + p;
                            const double dxhat = dy(i, j) * gamma;
                            X.grad(i, j) +=
                                inv_std * (dxhat - (sum1 + n.aux(i, j) * sum2) / cnt);
                        }
                } else {
                    for (std::size_t i = 0; i < B; ++i)
                        for (std::size_t p = 0; p < positions; ++p) {
                            const std::size_t j = c * positions + p;
                            X.grad(i, j) += dy(i, j) * gamma * inv_std;
                        }
                }
            }
            break;
        }
        case Op::mse: {
            Node& A = at(n.in[0]);
            Node& B = at(n.in[1]);
            const double g = dy(0, 0) * 2.0 / static_cast<double>(A.val.a.size());
            for (std::size_t i = 0; i < A.val.a.size(); ++i) {
                const double d = g * (A.val.a[i] - B.val.a[i]);
                A.grad.a[i] += d;
                B.grad.a[i] -= d;
            }
            break;
        }
        case Op::sumsq: {
            Node& A = at(n.in[0]);
            const double g = dy(0, 0) * 2.0;
            for (std::size_t i = 0; i < A.val.a.size(); ++i) A.grad.a[i] += g * A.val.a[i];
            break;
        }
        case Op::concat: {
            std::size_t off = 0;
            for (int p : n.in) {
                Node& A = at(p);
                for (std::size_t i = 0; i < A.val.rows; ++i)
                    for (std::size_t j = 0; j < A.val.cols; ++j) A.grad(i, j) += dy(i, off + j);
                off += A.val.cols;
            }
            break;
        }
        case Op::model_apply: {
            Node& A = at(n.in[0]);
            if (const Matrix* G = n.model->linear_matrix()) {
                Matrix dA = invlab::matmul(dy, *G);
                for (std::size_t i = 0; i < dA.a.size(); ++i) A.grad.a[i] += dA.a[i];
            } else {
                Vector row(A.val.cols), gy(dy.cols);
                for (std::size_t i = 0; i < A.val.rows; ++i) {
                    for (std::size_t j = 0; j < row.size(); ++j) row[j] = A.val(i, j);
                    for (std::size_t j = 0; j < gy.size(); ++j) gy[j] = dy(i, j);
                    Vector dm = n.model->adjoint_row(row, gy);
                    for (std::size_t j = 0; j < dm.size(); ++j) A.grad(i, j) += dm[j];
                }
            }
            break;
        }
    }
}

double grad_check(const std::function<GraphBuild(Tape&)>& build,
                  const std::vector<Matrix*>& params, double eps,
                  std::size_t max_coords, std::uint64_t subsample_seed) {
    Tape t0;
    GraphBuild g0 = build(t0);
    if (g0.checked_leaves.size() != params.size())
        throw ShapeError("grad_check: leaves/params count mismatch");
    t0.backward(g0.output);
    std::vector<Matrix> ad;
    ad.reserve(params.size());
    for (int leaf : g0.checked_leaves) ad.push_back(t0.grad(leaf));

    auto eval = [&]() {
        Tape t;
        GraphBuild g = build(t);
        return t.value(g.output)(0, 0);
    };

    RngStream pick(subsample_seed, 0x6fd7);
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Matrix& P = *params[pi];
        std::vector<std::size_t> coords;
        if (P.a.size() <= max_coords) {
            coords.resize(P.a.size());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < max_coords; ++i)
                coords.push_back(static_cast<std::size_t>(pick.uniform() * static_cast<double>(P.a.size())));
        }
        for (std::size_t ci : coords) {
            const double saved = P.a[ci];
            P.a[ci] = saved + eps;
            const double fp = eval();
            P.a[ci] = saved - eps;
            const double fm = eval();
            P.a[ci] = saved;
            const double fd = (fp - fm) / (2.0 * eps);
            const double gad = ad[pi].a[ci];
            const double rel = std::abs(gad - fd) / std::max(1e-5, std::abs(gad) + std::abs(fd));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace invlab
