#include "invlab/forward_models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace invlab {

WingModel::WingModel(std::size_t N_, std::size_t M_) : N(N_), M(M_) {
    if (N < 2 || M < 2) throw ShapeError("wing_operator: N, M >= 2 required");
    dt = 1.0 / static_cast<double>(N);
    t_grid.resize(N);
    s_grid.resize(M);
    for (std::size_t j = 0; j < N; ++j) t_grid[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(N);
    for (std::size_t i = 0; i < M; ++i) s_grid[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(M);
    G = Matrix(M, N);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j)
            G(i, j) = t_grid[j] * std::exp(-s_grid[i] * t_grid[j] * t_grid[j]) * dt;
}

Vector WingModel::evaluate(const Vector& m) const {
    if (m.size() != N) throw ShapeError("wing evaluate: dimension mismatch");
    return matvec(G, m);
}

InterfaceModel::InterfaceModel(std::size_t N_, std::size_t M_) : N(N_), M(M_) {
    dw = extent / static_cast<double>(N);
    w_grid.resize(N);
    x_grid.resize(M);
    for (std::size_t j = 0; j < N; ++j) w_grid[j] = (static_cast<double>(j) + 0.5) * dw;
    const double dx = extent / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) x_grid[i] = (static_cast<double>(i) + 0.5) * dx;
}

bool InterfaceModel::admissible(const Vector& z) const {
    // guard band keeps the log argument away from the z = H singularity;
    // the boundary value itself is admissible so projection onto it is valid
    for (double v : z)
        if (!(v <= H - 1e-6)) return false;
    return true;
}

Vector InterfaceModel::evaluate(const Vector& z) const {
    if (z.size() != N) throw ShapeError("interface evaluate: dimension mismatch");
    if (!admissible(z)) throw DomainError("interface evaluate: z >= H - 1e-6");
    Vector d(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const double r2 = (x_grid[i] - w_grid[j]) * (x_grid[i] - w_grid[j]);
            const double hz = H - z[j];
            acc += std::log((r2 + H * H) / (r2 + hz * hz));
        }
        d[i] = acc * dw;
    }
    return d;
}

Matrix InterfaceModel::jacobian(const Vector& z) const {
    if (z.size() != N) throw ShapeError("interface jacobian: dimension mismatch");
    if (!admissible(z)) throw DomainError("interface jacobian: z >= H - 1e-6");
    Matrix J(M, N);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            const double r2 = (x_grid[i] - w_grid[j]) * (x_grid[i] - w_grid[j]);
            const double hz = H - z[j];
            J(i, j) = dw * 2.0 * hz / (r2 + hz * hz);
        }
    return J;
}

TomoModel::TomoModel(bool bending_on) : bending(bending_on) {
    N = nx * ny;
    M = nx * ny;  // 7 sources x 7 receivers
    const double h = cell_size();
    for (std::size_t i = 0; i < ny; ++i) {
        const double y = (static_cast<double>(i) + 0.5) * h;
        sources.push_back({0.0, y});
        receivers.push_back({extent, y});
    }
    L0 = Matrix(M, N);
    std::size_t row = 0;
    for (const auto& s : sources)
        for (const auto& r : receivers) {
            RayPath p = trace_straight_ray(s, r);
            for (std::size_t k = 0; k < N; ++k) L0(row, k) = p.cell_lengths[k];
            ++row;
        }
}

void TomoModel::traverse_segment(std::pair<double, double> a, std::pair<double, double> b,
                                 Vector& out) const {
    const double h = cell_size();
    const double dx = b.first - a.first, dy = b.second - a.second;
    const double len = std::hypot(dx, dy);
    if (len == 0.0) return;
    std::vector<double> ts{0.0, 1.0};
    for (std::size_t k = 1; k < nx; ++k) {
        const double line = static_cast<double>(k) * h;
        if (dx != 0.0) {
            const double t = (line - a.first) / dx;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
    }
    for (std::size_t k = 1; k < ny; ++k) {
        const double line = static_cast<double>(k) * h;
        if (dy != 0.0) {
            const double t = (line - a.second) / dy;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
        const double t0 = ts[s], t1 = ts[s + 1];
        if (t1 <= t0) continue;
        const double tm = 0.5 * (t0 + t1);
        const double px = a.first + tm * dx, py = a.second + tm * dy;
        const auto ix = std::min(nx - 1, static_cast<std::size_t>(std::max(0.0, std::floor(px / h))));
        const auto iy = std::min(ny - 1, static_cast<std::size_t>(std::max(0.0, std::floor(py / h))));
        out[iy * nx + ix] += len * (t1 - t0);
    }
}

RayPath TomoModel::trace_straight_ray(std::pair<double, double> src,
                                      std::pair<double, double> rcv) const {
    RayPath p;
    p.nodes = {src, rcv};
    p.cell_lengths.assign(N, 0.0);
    traverse_segment(src, rcv, p.cell_lengths);
    return p;
}

namespace {

double price(const std::vector<std::pair<double, double>>& nodes, const TomoModel& tm,
             const Vector& m, Vector& scratch) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        tm.traverse_segment(nodes[i], nodes[i + 1], scratch);
    return dot(scratch, m);
}

double local_tt(const std::pair<double, double>& a, const std::pair<double, double>& mid,
                const std::pair<double, double>& c, const TomoModel& tm, const Vector& m,
                Vector& scratch) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    tm.traverse_segment(a, mid, scratch);
    tm.traverse_segment(mid, c, scratch);
    return dot(scratch, m);
}

}  // namespace

RayPath TomoModel::bend_ray(const Vector& m, const RayPath& straight) const {
    const auto src = straight.nodes.front();
    const auto rcv = straight.nodes.back();
    constexpr std::size_t n_interior = 9;
    std::vector<std::pair<double, double>> nodes(n_interior + 2);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(nodes.size() - 1);
        nodes[i] = {src.first + t * (rcv.first - src.first),
                    src.second + t * (rcv.second - src.second)};
    }
    Vector scratch(N, 0.0);
    double tt = price(nodes, *this, m, scratch);
    double step = cell_size() / 2.0;
    const double step_min = cell_size() / 64.0;
    bool converged = false;
    for (std::size_t iter = 0; iter < max_bend_iters; ++iter) {
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
            const double cx = nodes[i + 1].first - nodes[i - 1].first;
            const double cy = nodes[i + 1].second - nodes[i - 1].second;
            const double cl = std::hypot(cx, cy);
            const double nxv = cl > 0.0 ? -cy / cl : 0.0;
            const double nyv = cl > 0.0 ? cx / cl : 1.0;
            double best = local_tt(nodes[i - 1], nodes[i], nodes[i + 1], *this, m, scratch);
            std::pair<double, double> best_pos = nodes[i];
            for (double off : {step, -step}) {
                std::pair<double, double> cand{
                    std::clamp(nodes[i].first + off * nxv, 0.0, extent),
                    std::clamp(nodes[i].second + off * nyv, 0.0, extent)};
                const double c = local_tt(nodes[i - 1], cand, nodes[i + 1], *this, m, scratch);
                if (c < best) {
                    best = c;
                    best_pos = cand;
                }
            }
            nodes[i] = best_pos;
        }
        const double tt_new = price(nodes, *this, m, scratch);
        const double rel = tt > 0.0 ? (tt - tt_new) / tt : 0.0;
        tt = tt_new;
        if (rel < bend_tol) {
            if (step > step_min) {
                step *= 0.5;
            } else {
                converged = true;
                break;
            }
        }
    }
    RayPath out;
    out.nodes = std::move(nodes);
    out.cell_lengths.assign(N, 0.0);
    for (std::size_t i = 0; i + 1 < out.nodes.size(); ++i)
        traverse_segment(out.nodes[i], out.nodes[i + 1], out.cell_lengths);
    out.traveltime = dot(out.cell_lengths, m);
    out.converged = converged;
    return out;
}

bool TomoModel::admissible(const Vector& m) const {
    for (double v : m)
        if (!(v > 0.0)) return false;
    return true;
}

Matrix TomoModel::build_path_matrix(const Vector& m) const {
    if (!bending) return L0;
    if (!admissible(m)) throw DomainError("tomo path matrix: slowness must be positive");
    Matrix L(M, N);
    std::size_t row = 0;
    for (const auto& s : sources)
        for (const auto& r : receivers) {
            RayPath p = bend_ray(m, trace_straight_ray(s, r));
            for (std::size_t k = 0; k < N; ++k) L(row, k) = p.cell_lengths[k];
            ++row;
        }
    return L;
}

Vector TomoModel::evaluate(const Vector& m) const {
    if (m.size() != N) throw ShapeError("tomo evaluate: dimension mismatch");
    if (!admissible(m)) throw DomainError("tomo evaluate: slowness must be positive");
    if (!bending) return matvec(L0, m);
    return matvec(build_path_matrix(m), m);
}

Matrix TomoModel::jacobian(const Vector& m) const {
    if (m.size() != N) throw ShapeError("tomo jacobian: dimension mismatch");
    if (!admissible(m)) throw DomainError("tomo jacobian: slowness must be positive");
    return build_path_matrix(m);
}

Vector true_model(const std::string& problem_id) {
    if (problem_id == "wing") {
        WingModel wm;
        Vector m(wm.N, 0.0);
        for (std::size_t j = 0; j < wm.N; ++j)
            if (wm.t_grid[j] > 1.0 / 3.0 && wm.t_grid[j] < 2.0 / 3.0) m[j] = 1.0;
        return m;
    }
    if (problem_id == "interface") {
        InterfaceModel im;
        Vector z(im.N);
        const double w0 = 50.5, zmax = 2.5;
        for (std::size_t j = 0; j < im.N; ++j) {
            const double dwj = im.w_grid[j] - w0;
            z[j] = zmax * std::exp(-5.0 * dwj * dwj / static_cast<double>(im.N));
        }
        return z;
    }
    if (problem_id == "tomo") {
        TomoModel tm;
        const double v0 = 2900.0, gamma = 4e-5;
        const double fx = 1200.0, fy = 400.0;   // fast anomaly center
        const double sx = 400.0, sy = 1200.0;   // slow anomaly center
        const double h = tm.cell_size();
        Vector m(tm.N);
        for (std::size_t iy = 0; iy < tm.ny; ++iy)
            for (std::size_t ix = 0; ix < tm.nx; ++ix) {
                const double cx = (static_cast<double>(ix) + 0.5) * h;
                const double cy = (static_cast<double>(iy) + 0.5) * h;
                const double df = (cx - fx) * (cx - fx) + (cy - fy) * (cy - fy);
                const double ds = (cx - sx) * (cx - sx) + (cy - sy) * (cy - sy);
                const double v = v0 * (1.0 + 0.10 * std::exp(-gamma * df)) *
                                 (1.0 - 0.15 * std::exp(-gamma * ds));
                m[iy * tm.nx + ix] = 1.0 / v;
            }
        return m;
    }
    throw DomainError("true_model: unknown problem id '" + problem_id + "'");
}

Vector ModelRowAdapter::apply_row(const Vector& m) const {
    if (cap.empty()) return fm->evaluate(m);
    Vector mc = m;
    for (std::size_t j = 0; j < mc.size(); ++j)
        if (mc[j] > cap[j]) {
            mc[j] = cap[j];
            ++clamp_count;
        }
    return fm->evaluate(mc);
}

Vector ModelRowAdapter::adjoint_row(const Vector& m, const Vector& dy) const {
    Vector mc = m;
    std::vector<char> clamped(m.size(), 0);
    if (!cap.empty())
        for (std::size_t j = 0; j < mc.size(); ++j)
            if (mc[j] > cap[j]) {
                mc[j] = cap[j];
                clamped[j] = 1;
            }
    Matrix J = fm->jacobian(mc);
    Vector g = matvec_t(J, dy);
    for (std::size_t j = 0; j < g.size(); ++j)
        if (clamped[j]) g[j] = 0.0;
    return g;
}

void write_matrix_csv(const std::string& path, const Matrix& A) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    char buf[40];
    for (std::size_t i = 0; i < A.rows; ++i) {
        for (std::size_t j = 0; j < A.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", A(i, j));
            f << buf << (j + 1 < A.cols ? "," : "");
        }
        f << "\n";
    }
}

void write_vector_csv(const std::string& path, const Vector& v) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    char buf[40];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        f << buf << "\n";
    }
}

}  // namespace invlab
