#include "snekhorn/optim.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace snekhorn {

Adam::Adam(std::size_t dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0), v_(dim, 0.0) {}

void Adam::step(std::span<double> x, std::span<const double> grad) {
    ++t_;
    p1_ *= beta1_;
    p2_ *= beta2_;
    const double c1 = 1.0 - p1_;
    const double c2 = 1.0 - p2_;
    for (std::size_t k = 0; k < x.size(); ++k) {
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
        x[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

} // namespace

LbfgsResult minimize_lbfgs(std::vector<double>& x,
                           const std::function<double(std::span<const double>, std::span<double>)>& fg,
                           const std::function<bool()>& done, const LbfgsOptions& options) {
    const std::size_t d = x.size();
    std::vector<double> g(d), d_dir(d), x_new(d), g_new(d);
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> alpha(options.memory);

    LbfgsResult res;
    double f = fg(x, g);
    res.value = f;
    if (done()) {
        res.stopped = true;
        return res;
    }
    for (; res.iterations < options.max_iter; ++res.iterations) {
        // two-loop recursion
        d_dir = g;
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = rho_hist[k] * dot(s_hist[k], d_dir);
            for (std::size_t t = 0; t < d; ++t) d_dir[t] -= alpha[k] * y_hist[k][t];
        }
        double scale = 1.0;
        if (!s_hist.empty()) scale = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        else scale = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
        for (double& v : d_dir) v *= scale;
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], d_dir);
            for (std::size_t t = 0; t < d; ++t) d_dir[t] += s_hist[k][t] * (alpha[k] - beta);
        }
        for (double& v : d_dir) v = -v;
        double slope = dot(g, d_dir);
        if (!(slope < 0.0)) {  // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            const double gn = std::sqrt(dot(g, g));
            for (std::size_t t = 0; t < d; ++t) d_dir[t] = -g[t] / std::max(1.0, gn);
            slope = dot(g, d_dir);
        }

        double step = 1.0;
        double f_new = 0.0;
        bool accepted = false;
        for (std::size_t b = 0; b < options.max_backtracks; ++b) {
            for (std::size_t t = 0; t < d; ++t) x_new[t] = x[t] + step * d_dir[t];
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // restore gradient state at x for the caller
            fg(x, g);
            res.line_search_failed = true;
            break;
        }

        std::vector<double> s(d), y(d);
        for (std::size_t t = 0; t < d; ++t) {
            s[t] = x_new[t] - x[t];
            y[t] = g_new[t] - g[t];
        }
        const double sy = dot(s, y);
        if (sy > 1e-300) {
            if (s_hist.size() == options.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        res.value = f;
        if (done()) {
            res.stopped = true;
            ++res.iterations;
            break;
        }
    }
    return res;
}

} // namespace snekhorn
