#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace snekhorn {

// Adaptive-moment first-order minimizer (bias-corrected).
class Adam {
public:
    explicit Adam(std::size_t dim, double lr = 0.1, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // x <- x - lr * m_hat / (sqrt(v_hat) + eps)
    void step(std::span<double> x, std::span<const double> grad);

    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
    double p1_ = 1.0, p2_ = 1.0;  // beta1^t, beta2^t
};

struct LbfgsOptions {
    std::size_t memory = 10;
    std::size_t max_iter = 1000;
    std::size_t max_backtracks = 60;
};

struct LbfgsResult {
    std::size_t iterations = 0;
    bool stopped = false;       // `done` returned true
    bool line_search_failed = false;
    double value = 0.0;
};

// Limited-memory BFGS with Armijo backtracking. `fg(x, grad)` returns f(x) and
// writes its gradient; `done()` is queried after every evaluation at an
// accepted point and ends the run when it returns true.
LbfgsResult minimize_lbfgs(std::vector<double>& x,
                           const std::function<double(std::span<const double>, std::span<double>)>& fg,
                           const std::function<bool()>& done, const LbfgsOptions& options = {});

} // namespace snekhorn
