#include "fgp/neldermead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fgp::optim {

namespace {

std::vector<double> centroid_excluding_worst(const std::vector<std::vector<double>>& pts,
                                             const std::vector<std::size_t>& order) {
    const std::size_t n = pts.front().size();
    std::vector<double> c(n, 0.0);
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) c[i] += pts[order[k]][i];
    for (double& v : c) v /= static_cast<double>(order.size() - 1);
    return c;
}

std::vector<double> blend(const std::vector<double>& a, const std::vector<double>& b,
                          double t) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
}

}  // namespace

NelderMeadResult nelder_mead_minimize(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x0, const NelderMeadOptions& opts) {
    const std::size_t n = x0.size();
    NelderMeadResult result;
    result.x = x0;

    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    if (n == 0) {
        result.value = eval(x0);
        result.evaluations = evals;
        result.converged = true;
        return result;
    }

    // adaptive coefficients (better behaved as dimension grows)
    const double nd = static_cast<double>(n);
    const double alpha = 1.0;
    const double gamma = 1.0 + 2.0 / nd;
    const double rho = 0.75 - 1.0 / (2.0 * nd);
    const double sigma = 1.0 - 1.0 / nd;

    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i)
        pts[i + 1][i] += (x0[i] != 0.0 ? opts.initial_step * std::abs(x0[i]) : opts.initial_step);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();

        double spread_f = std::abs(vals[worst] - vals[best]);
        double spread_x = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            spread_x = std::max(spread_x, std::abs(pts[worst][i] - pts[best][i]));
        if (std::isfinite(vals[best]) &&
            (spread_f <= opts.f_tolerance * (1.0 + std::abs(vals[best])) &&
             spread_x <= opts.x_tolerance)) {
            result.converged = true;
            break;
        }
        if (evals >= opts.max_evaluations) break;

        const std::vector<double> c = centroid_excluding_worst(pts, order);
        const std::vector<double> xr = blend(c, pts[worst], -alpha);
        const double fr = eval(xr);

        if (fr < vals[order[0]]) {
            const std::vector<double> xe = blend(c, pts[worst], -alpha * gamma);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[order[n - 1]]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const std::vector<double> xc =
                outside ? blend(c, pts[worst], -alpha * rho) : blend(c, pts[worst], rho);
            const double fc = eval(xc);
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                // shrink toward the best point
                for (std::size_t k = 1; k <= n; ++k) {
                    const std::size_t idx = order[k];
                    pts[idx] = blend(pts[order[0]], pts[idx], sigma);
                    vals[idx] = eval(pts[idx]);
                }
            }
        }
    }

    const std::size_t best =
        static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    result.x = pts[best];
    result.value = vals[best];
    result.evaluations = evals;
    return result;
}

}  // namespace fgp::optim
