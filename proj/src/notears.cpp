#include "tabspec/graphs.hpp"
#include "tabspec/optim.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <deque>
#include <limits>

namespace tabspec::optim {

BoundedLbfgsResult minimize_bounded(const Objective& fn, Vector x0, const Vector& lower, const Vector& upper,
                                    const BoundedLbfgsOptions& options) {
    const Eigen::Index n = x0.size();
    auto project = [&](Vector& x) { x = x.cwiseMax(lower).cwiseMin(upper); };
    project(x0);

    BoundedLbfgsResult res;
    res.x = std::move(x0);
    Vector g(n);
    res.f = fn(res.x, g);

    std::deque<Vector> S, Y;
    std::deque<double> rho;

    auto projected_gradient = [&](const Vector& x, const Vector& grad) {
        Vector pg = grad;
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0)) pg[i] = 0.0;
        }
        return pg;
    };

    for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
        const Vector pg = projected_gradient(res.x, g);
        if (pg.lpNorm<Eigen::Infinity>() <= options.pgtol) {
            res.converged = true;
            break;
        }
        // Variables pinned at an active bound are held fixed for this step.
        Vector free(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool pinned = lower[i] >= upper[i] || (res.x[i] <= lower[i] && g[i] > 0.0) ||
                                (res.x[i] >= upper[i] && g[i] < 0.0);
            free[i] = pinned ? 0.0 : 1.0;
        }
        Vector q = pg;
        std::vector<double> a(S.size());
        for (std::size_t k = S.size(); k-- > 0;) {
            a[k] = rho[k] * S[k].cwiseProduct(free).dot(q);
            q -= a[k] * Y[k].cwiseProduct(free);
        }
        if (!S.empty()) {
            const double sy = S.back().dot(Y.back());
            const double yy = Y.back().squaredNorm();
            if (yy > 0.0) q *= sy / yy;
        }
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double b = rho[k] * Y[k].cwiseProduct(free).dot(q);
            q += (a[k] - b) * S[k].cwiseProduct(free);
        }
        Vector dir = -q.cwiseProduct(free);
        if (dir.dot(pg) >= 0.0) {
            dir = -pg;
            S.clear();
            Y.clear();
            rho.clear();
        }

        double step = 1.0;
        if (S.empty()) step = std::min(1.0, 1.0 / std::max(pg.lpNorm<Eigen::Infinity>(), 1e-300));
        Vector x_new(n), g_new(n);
        double f_new = res.f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * dir;
            project(x_new);
            f_new = fn(x_new, g_new);
            const double decrease = g.dot(x_new - res.x);
            if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * decrease) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!S.empty()) {  // retry from steepest descent with fresh memory
                S.clear();
                Y.clear();
                rho.clear();
                continue;
            }
            res.converged = true;  // no descent possible at working precision
            break;
        }
        const Vector s = x_new - res.x;
        const Vector y = g_new - g;
        const double f_old = res.f;
        res.x = x_new;
        g = g_new;
        res.f = f_new;
        const double sy = s.dot(y);
        if (sy > 1e-12 * y.squaredNorm()) {
            S.push_back(s);
            Y.push_back(y);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > options.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        if (f_old - res.f <= options.ftol * std::max({std::abs(f_old), std::abs(res.f), 1.0})) {
            res.converged = true;
            ++res.iterations;
            break;
        }
    }
    return res;
}

}  // namespace tabspec::optim

namespace tabspec::graphs {

std::pair<double, Matrix> acyclicity(const Matrix& W) {
    const Matrix E = W.cwiseProduct(W).exp();
    const double h = E.trace() - static_cast<double>(W.rows());
    return {h, E.transpose().cwiseProduct(2.0 * W)};
}

NotearsResult notears(const Matrix& X_in, const NotearsOptions& opt) {
    const Eigen::Index d = X_in.cols();
    const double m = static_cast<double>(X_in.rows());
    if (d < 1 || X_in.rows() < 2) throw Error("notears needs at least 2 samples and 1 column");
    const Matrix X = X_in.rowwise() - X_in.colwise().mean();
    const Matrix XtX = X.transpose() * X;

    const Eigen::Index dd = d * d;
    auto unpack = [&](const Vector& w) {
        Matrix W(d, d);
        for (Eigen::Index k = 0; k < dd; ++k) W(k % d, k / d) = w[k] - w[dd + k];
        return W;
    };

    // w = [w+ ; w-], both >= 0, diagonal pinned to 0.
    Vector lower = Vector::Zero(2 * dd);
    Vector upper = Vector::Constant(2 * dd, std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < d; ++i) {
        upper[i * d + i] = 0.0;
        upper[dd + i * d + i] = 0.0;
    }

    double rho = 1.0;
    double alpha = 0.0;
    double h = std::numeric_limits<double>::infinity();
    Vector w_est = Vector::Zero(2 * dd);

    auto objective = [&](const Vector& w, Vector& grad) {
        const Matrix W = unpack(w);
        // (1/2m)||X - XW||^2 = (1/2m) tr((I-W)^T XtX (I-W))
        const Matrix IW = Matrix::Identity(d, d) - W;
        const Matrix XtXIW = XtX * IW;
        const double loss = 0.5 / m * (IW.transpose() * XtXIW).trace();
        const Matrix g_loss = -XtXIW / m;
        const auto [hv, g_h] = acyclicity(W);
        const double obj = loss + 0.5 * rho * hv * hv + alpha * hv + opt.lambda1 * w.sum();
        const Matrix g_smooth = g_loss + (rho * hv + alpha) * g_h;
        grad.resize(2 * dd);
        for (Eigen::Index k = 0; k < dd; ++k) {
            const double gs = g_smooth(k % d, k / d);
            grad[k] = gs + opt.lambda1;
            grad[dd + k] = -gs + opt.lambda1;
        }
        return obj;
    };

    NotearsResult res;
    for (int it = 0; it < opt.max_iter; ++it) {
        Vector w_new = w_est;
        double h_new = h;
        while (rho < opt.rho_max) {
            auto sol = optim::minimize_bounded(objective, w_est, lower, upper);
            w_new = sol.x;
            h_new = acyclicity(unpack(w_new)).first;
            if (h_new > 0.25 * h)
                rho *= 10.0;
            else
                break;
        }
        w_est = w_new;
        h = h_new;
        alpha += rho * h;
        res.outer_iterations = it + 1;
        if (h <= opt.h_tol || rho >= opt.rho_max) break;
    }

    res.raw_weights = unpack(w_est);
    res.h = h;
    res.converged = h <= opt.h_tol;

    Matrix W = res.raw_weights.cwiseAbs();
    for (Eigen::Index k = 0; k < W.size(); ++k)
        if (W.data()[k] < opt.w_threshold) W.data()[k] = 0.0;
    W.diagonal().setZero();
    res.cycles_broken = break_cycles(W);

    res.graph = FeatureGraph{W, true, GraphMethod::notears, {}};
    res.graph.params = {{"lambda1", std::to_string(opt.lambda1)},
                        {"max_iter", std::to_string(opt.max_iter)},
                        {"h_tol", std::to_string(opt.h_tol)},
                        {"rho_max", std::to_string(opt.rho_max)},
                        {"w_threshold", std::to_string(opt.w_threshold)},
                        {"converged", res.converged ? "true" : "false"}};
    return res;
}

}  // namespace tabspec::graphs
