#include "selbounds/parametric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "selbounds/rng.hpp"

namespace selbounds {

namespace {

// effective_lower replaces a vacuous (b = 1) lower link bound when the
// caller needs a bounded region; NaN keeps the vacuous side open.
AlphaPolytope build_polytope(const ObservationSet& obs, const WeightBox& box,
                             const ParametricFamily& family, double effective_lower) {
    const std::size_t d = family.selection_columns.size();
    if (!family.sign_constraints.empty() && family.sign_constraints.size() != d)
        throw InvalidParameter("sign constraint count does not match selection column count");
    for (std::size_t col : family.selection_columns)
        if (col >= obs.cols()) throw InvalidParameter("selection column is out of range");

    AlphaPolytope poly;
    poly.dim = d + 1;
    poly.pinned.assign(poly.dim, false);

    // logit link: h(u) = 1 + exp(u), h^{-1}(v) = log(v - 1)
    poly.link_upper = std::log(box.hi() - 1.0);
    if (!(box.hi() > 1.0))
        throw BoundaryLinkError("logit link cannot reach weights at or below 1 (need a < 1)");
    const bool vacuous_lower = box.lo() <= 1.0;
    poly.link_lower =
        vacuous_lower ? -std::numeric_limits<double>::infinity() : std::log(box.lo() - 1.0);
    double lower_row_bound = poly.link_lower;
    if (vacuous_lower && !std::isnan(effective_lower)) lower_row_bound = effective_lower;

    for (std::size_t j = 0; j < family.sign_constraints.size(); ++j) {
        switch (family.sign_constraints[j]) {
            case SignConstraint::Free: break;
            case SignConstraint::Zero: poly.pinned[j + 1] = true; break;
            case SignConstraint::NonNegative: {
                std::vector<double> row(poly.dim, 0.0);
                row[j + 1] = -1.0; // -alpha_j <= 0
                poly.A.insert(poly.A.end(), row.begin(), row.end());
                poly.rhs.push_back(0.0);
                break;
            }
            case SignConstraint::NonPositive: {
                std::vector<double> row(poly.dim, 0.0);
                row[j + 1] = 1.0;
                poly.A.insert(poly.A.end(), row.begin(), row.end());
                poly.rhs.push_back(0.0);
                break;
            }
        }
    }

    // deduplicated row half-spaces
    std::set<std::vector<double>> seen;
    for (std::size_t i = 0; i < obs.rows(); ++i) {
        std::vector<double> x(poly.dim);
        x[0] = 1.0;
        const auto row = obs.row(i);
        for (std::size_t j = 0; j < d; ++j) x[j + 1] = row[family.selection_columns[j]];
        if (!seen.insert(x).second) continue;
        poly.A.insert(poly.A.end(), x.begin(), x.end());
        poly.rhs.push_back(poly.link_upper);
        if (std::isfinite(lower_row_bound)) {
            for (double& v : x) v = -v;
            poly.A.insert(poly.A.end(), x.begin(), x.end());
            poly.rhs.push_back(-lower_row_bound);
        }
    }
    return poly;
}

} // namespace

AlphaPolytope feasible_alpha_polytope(const ObservationSet& obs, const WeightBox& box,
                                      const ParametricFamily& family) {
    return build_polytope(obs, box, family, std::numeric_limits<double>::quiet_NaN());
}

namespace {

// objective/constraint workspace in the reduced (non-pinned) coordinates
class ParametricProgram {
public:
    ParametricProgram(const ObservationSet& obs, const Estimand& est, const AlphaPolytope& poly,
                      const std::vector<std::size_t>& selection_columns)
        : poly_(poly), n_(obs.rows()) {
        for (std::size_t j = 0; j < poly.dim; ++j)
            if (!poly.pinned[j]) free_.push_back(j);
        rdim_ = free_.size();
        f_.resize(n_);
        g_.resize(n_);
        // design x_i = (1, D_i) restricted to free coordinates, kept per row
        // so duplicate rows retain their multiplicity in the objective
        x_.resize(n_ * rdim_);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto row = obs.row(i);
            f_[i] = est.f(row);
            g_[i] = est.g(row);
            if (!std::isfinite(f_[i])) throw NonFiniteEvaluation(i, "f");
            if (!std::isfinite(g_[i])) throw NonFiniteEvaluation(i, "g");
            for (std::size_t j = 0; j < rdim_; ++j) {
                const std::size_t coord = free_[j];
                x_[i * rdim_ + j] = coord == 0 ? 1.0 : row[selection_columns[coord - 1]];
            }
        }
        ar_.resize(poly.rows() * rdim_);
        for (std::size_t r = 0; r < poly.rows(); ++r)
            for (std::size_t j = 0; j < rdim_; ++j)
                ar_[r * rdim_ + j] = poly.A[r * poly.dim + free_[j]];
    }

    std::size_t rdim() const { return rdim_; }
    std::size_t rows() const { return poly_.rows(); }

    double slack(std::size_t r, std::span<const double> alpha) const {
        double dot = 0.0;
        for (std::size_t j = 0; j < rdim_; ++j) dot += ar_[r * rdim_ + j] * alpha[j];
        return poly_.rhs[r] - dot;
    }

    double min_slack(std::span<const double> alpha) const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < rows(); ++r) m = std::min(m, slack(r, alpha));
        return m;
    }

    /// ratio value; returns false when the weighted denominator is not
    /// safely positive at alpha
    bool ratio(std::span<const double> alpha, double& beta) const {
        double num = 0.0, den = 0.0, den_mag = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double u = 0.0;
            for (std::size_t j = 0; j < rdim_; ++j) u += x_[i * rdim_ + j] * alpha[j];
            const double lam = 1.0 + std::exp(u);
            num += lam * f_[i];
            const double term = lam * g_[i];
            den += term;
            den_mag += std::fabs(term);
        }
        if (!(den > 1e-12 * den_mag)) return false;
        beta = num / den;
        return true;
    }

    bool ratio_grad(std::span<const double> alpha, double& beta,
                    std::span<double> grad) const {
        double num = 0.0, den = 0.0, den_mag = 0.0;
        std::vector<double>& eu = scratch_;
        eu.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double u = 0.0;
            for (std::size_t j = 0; j < rdim_; ++j) u += x_[i * rdim_ + j] * alpha[j];
            eu[i] = std::exp(u);
            const double lam = 1.0 + eu[i];
            num += lam * f_[i];
            const double term = lam * g_[i];
            den += term;
            den_mag += std::fabs(term);
        }
        if (!(den > 1e-12 * den_mag)) return false;
        beta = num / den;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double c = eu[i] * (f_[i] - beta * g_[i]) / den;
            for (std::size_t j = 0; j < rdim_; ++j) grad[j] += c * x_[i * rdim_ + j];
        }
        return true;
    }

    std::vector<double> expand(std::span<const double> alpha) const {
        std::vector<double> full(poly_.dim, 0.0);
        for (std::size_t j = 0; j < rdim_; ++j) full[free_[j]] = alpha[j];
        return full;
    }

    const double* constraint_row(std::size_t r) const { return ar_.data() + r * rdim_; }

private:
    const AlphaPolytope& poly_;
    std::size_t n_;
    std::size_t rdim_ = 0;
    std::vector<std::size_t> free_;
    std::vector<double> f_, g_, x_, ar_;
    mutable std::vector<double> scratch_;
};

// strictly interior anchor: centered intercept, then max-min-slack ascent
// until the point is comfortably interior (the polytope can be unbounded, so
// the ascent stops at a fixed slack target instead of centering fully)
std::vector<double> interior_anchor(const ParametricProgram& prog, const AlphaPolytope& poly,
                                    std::size_t intercept_reduced_index) {
    std::vector<double> alpha(prog.rdim(), 0.0);
    const double upper = poly.link_upper;
    const double lower = std::isfinite(poly.link_lower) ? poly.link_lower : upper - 4.0;
    alpha[intercept_reduced_index] = 0.5 * (lower + upper);

    std::vector<double> norms(prog.rows());
    for (std::size_t r = 0; r < prog.rows(); ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < prog.rdim(); ++j) {
            const double v = prog.constraint_row(r)[j];
            s += v * v;
        }
        norms[r] = std::sqrt(std::max(s, 1e-300));
    }
    const double target = 0.25 * (upper - lower + 1e-3);
    std::vector<double> best = alpha;
    double best_val = -std::numeric_limits<double>::infinity();
    double step = 0.25 * (upper - lower + 1.0);
    for (int it = 0; it < 400; ++it) {
        std::size_t worst = 0;
        double val = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < prog.rows(); ++r) {
            const double s = prog.slack(r, alpha) / norms[r];
            if (s < val) {
                val = s;
                worst = r;
            }
        }
        if (val > best_val) {
            best_val = val;
            best = alpha;
        }
        if (best_val >= target) break;
        for (std::size_t j = 0; j < prog.rdim(); ++j)
            alpha[j] -= step * prog.constraint_row(worst)[j] / norms[worst];
        step *= 0.99;
    }
    if (best_val <= 1e-10)
        throw InfeasiblePolytope("no strictly interior selection coefficients exist");
    return best;
}

struct BarrierPoint {
    std::vector<double> alpha;
    double beta = 0.0;
    bool valid = false;
};

// sign = -1 maximizes the ratio, +1 minimizes it
BarrierPoint barrier_solve(const ParametricProgram& prog, std::vector<double> alpha, double sign,
                           std::size_t max_iters) {
    const std::size_t d = prog.rdim();
    const std::size_t m = prog.rows();
    std::vector<double> grad(d), obj_grad(d), dir(d), alpha_new(d), grad_new(d);
    std::vector<double> hess(d * d);

    // the barrier is averaged over rows and scaled to the objective so the
    // early stages cannot drag the iterate into the saturated interior
    double beta0 = 0.0;
    if (!prog.ratio_grad(alpha, beta0, obj_grad)) return {};
    double g1 = 0.0;
    for (double g : obj_grad) g1 += std::fabs(g);
    const double beta_scale = std::max(1e-2, std::fabs(beta0) + 4.0 * g1);

    auto eval = [&](std::span<const double> a, double mu, double& beta) {
        if (!prog.ratio(a, beta)) return std::numeric_limits<double>::infinity();
        double val = sign * beta;
        for (std::size_t r = 0; r < m; ++r) {
            const double s = prog.slack(r, a);
            if (s <= 0.0) return std::numeric_limits<double>::infinity();
            val -= mu * std::log(s);
        }
        return val;
    };
    auto eval_grad = [&](std::span<const double> a, double mu, double& beta,
                         std::span<double> out) {
        if (!prog.ratio_grad(a, beta, obj_grad)) return false;
        for (std::size_t j = 0; j < d; ++j) out[j] = sign * obj_grad[j];
        for (std::size_t r = 0; r < m; ++r) {
            const double s = prog.slack(r, a);
            if (s <= 0.0) return false;
            const double c = mu / s;
            for (std::size_t j = 0; j < d; ++j) out[j] += c * prog.constraint_row(r)[j];
        }
        return true;
    };

    BarrierPoint out;
    BarrierPoint best;
    double beta = 0.0;
    for (const double mu_rel : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        const double mu = mu_rel * beta_scale / static_cast<double>(m);
        if (!eval_grad(alpha, mu, beta, grad)) return best.valid ? best : out;
        if (!best.valid || sign * beta < sign * best.beta) {
            best.alpha = alpha;
            best.beta = beta;
            best.valid = true;
        }
        double fval = eval(alpha, mu, beta);
        double g0 = 0.0;
        for (double g : grad) g0 = std::max(g0, std::fabs(g));
        const double stage_tol = std::max(1e-10, 1e-3 * g0);
        // restart BFGS, scaled so the first step moves a few units of u
        const double h0 = std::clamp(2.0 / std::max(g0, 1e-12), 1e-2, 1e6);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t j = 0; j < d; ++j) hess[j * d + j] = h0;
        for (std::size_t it = 0; it < max_iters; ++it) {
            double gnorm = 0.0;
            for (double g : grad) gnorm = std::max(gnorm, std::fabs(g));
            if (gnorm <= stage_tol) break;

            for (std::size_t j = 0; j < d; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < d; ++l) s += hess[j * d + l] * grad[l];
                dir[j] = -s;
            }
            double descent = 0.0;
            for (std::size_t j = 0; j < d; ++j) descent += dir[j] * grad[j];
            if (descent >= 0.0) { // reset to scaled steepest descent
                for (std::size_t j = 0; j < d; ++j) dir[j] = -h0 * grad[j];
                descent = 0.0;
                for (std::size_t j = 0; j < d; ++j) descent += dir[j] * grad[j];
                std::fill(hess.begin(), hess.end(), 0.0);
                for (std::size_t j = 0; j < d; ++j) hess[j * d + j] = h0;
            }

            // fraction-to-boundary cap, then Armijo backtracking
            double t_max = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < m; ++r) {
                double adir = 0.0;
                for (std::size_t j = 0; j < d; ++j) adir += prog.constraint_row(r)[j] * dir[j];
                if (adir > 0.0) t_max = std::min(t_max, prog.slack(r, alpha) / adir);
            }
            double t = std::min(1.0, 0.995 * t_max);
            bool stepped = false;
            for (int ls = 0; ls < 50 && t > 1e-16; ++ls, t *= 0.5) {
                for (std::size_t j = 0; j < d; ++j) alpha_new[j] = alpha[j] + t * dir[j];
                const double f_new = eval(alpha_new, mu, beta);
                if (f_new <= fval + 1e-4 * t * descent) {
                    stepped = true;
                    break;
                }
            }
            if (!stepped) break;

            if (!eval_grad(alpha_new, mu, beta, grad_new)) break;
            // BFGS update on the inverse Hessian
            double sy = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                sy += (alpha_new[j] - alpha[j]) * (grad_new[j] - grad[j]);
            double ss = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double s = alpha_new[j] - alpha[j];
                const double y = grad_new[j] - grad[j];
                ss += s * s;
                yy += y * y;
            }
            if (sy > 1e-10 * std::sqrt(ss * yy)) {
                // H <- (I - s y'/sy) H (I - y s'/sy) + s s'/sy
                std::vector<double> hy(d, 0.0);
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t l = 0; l < d; ++l)
                        hy[j] += hess[j * d + l] * (grad_new[l] - grad[l]);
                double yhy = 0.0;
                for (std::size_t j = 0; j < d; ++j) yhy += (grad_new[j] - grad[j]) * hy[j];
                for (std::size_t j = 0; j < d; ++j) {
                    const double sj = alpha_new[j] - alpha[j];
                    for (std::size_t l = 0; l < d; ++l) {
                        const double sl = alpha_new[l] - alpha[l];
                        hess[j * d + l] += ((sy + yhy) * sj * sl) / (sy * sy) -
                                           (hy[j] * sl + sj * hy[l]) / sy;
                    }
                }
            }
            alpha = alpha_new;
            grad = grad_new;
            fval = eval(alpha, mu, beta);
            if (prog.min_slack(alpha) > 0.0 && (!best.valid || sign * beta < sign * best.beta)) {
                best.alpha = alpha;
                best.beta = beta;
                best.valid = true;
            }
        }
    }
    if (prog.ratio(alpha, beta) && prog.min_slack(alpha) > 0.0 &&
        (!best.valid || sign * beta < sign * best.beta)) {
        best.alpha = std::move(alpha);
        best.beta = beta;
        best.valid = true;
    }
    return best.valid ? best : out;
}

} // namespace

ParametricInterval solve_parametric_bounds(const ObservationSet& obs, const Estimand& est,
                                           const WeightBox& box, const ParametricFamily& family,
                                           const ParametricOptions& options) {
    const std::size_t d = family.selection_columns.size();
    if (d + 1 > 20)
        throw InvalidParameter("parametric solver supports at most 20 coefficients");

    if (box.degenerate()) {
        // constant weights: the ratio is the unweighted estimate
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < obs.rows(); ++i) {
            num += est.f(obs.row(i));
            den += est.g(obs.row(i));
        }
        if (den == 0.0) throw ZeroDenominator("unweighted denominator vanishes");
        ParametricInterval out;
        out.beta_lo = out.beta_hi = num / den;
        out.alpha_lo.assign(d + 1, 0.0);
        out.alpha_lo[0] = std::log(box.hi() - 1.0);
        out.alpha_hi = out.alpha_lo;
        return out;
    }

    // The barrier subproblems need a bounded region. With b = 1 the feasible
    // set is open below; weights at u = U - 45 are numerically 1, so closing
    // it there excludes nothing the objective can distinguish.
    const double virtual_lower = std::log(box.hi() - 1.0) - 45.0;
    AlphaPolytope poly = build_polytope(obs, box, family, virtual_lower);
    ParametricProgram prog(obs, est, poly, family.selection_columns);

    // the intercept is never pinned, so its reduced index is 0
    const std::vector<double> anchor = interior_anchor(prog, poly, 0);

    // starts: the anchor, ramp profiles along each selection column (weights
    // switching from ~1 to ~hi across a cut), then random dilations
    std::vector<std::vector<double>> starts;
    starts.push_back(anchor);
    const double u_hi = poly.link_upper;
    for (std::size_t j = 0; j + 1 < poly.dim; ++j) {
        if (poly.pinned[j + 1]) continue;
        double cmin = 1e300, cmax = -1e300;
        for (std::size_t i = 0; i < obs.rows(); ++i) {
            const double v = obs.row(i)[family.selection_columns[j]];
            cmin = std::min(cmin, v);
            cmax = std::max(cmax, v);
        }
        const double range = std::max(cmax - cmin, 1e-6);
        // reduced coordinate of alpha_{j+1}
        std::size_t rj = 1;
        for (std::size_t q = 1; q <= j; ++q)
            if (!poly.pinned[q]) ++rj;
        for (const double sgn : {1.0, -1.0}) {
            for (const double sharp : {4.0, 8.0, 16.0}) {
                const double slope = sharp / range;
                const double d_anchor = sgn > 0.0 ? cmax : cmin;
                std::vector<double> start(prog.rdim(), 0.0);
                start[rj] = sgn * slope;
                start[0] = (u_hi - 2.0) - sgn * slope * d_anchor;
                if (prog.min_slack(start) > 1e-9) starts.push_back(std::move(start));
            }
        }
    }
    std::size_t s = 0;
    while (starts.size() < options.multistarts + 12) {
        RandomStream gen(options.seed, stream_tag::multistart, s++);
        std::vector<double> dir(prog.rdim());
        double norm = 0.0;
        for (double& v : dir) {
            v = gen.normal();
            norm += v * v;
        }
        norm = std::sqrt(std::max(norm, 1e-300));
        for (double& v : dir) v /= norm;
        double t_max = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < prog.rows(); ++r) {
            double adir = 0.0;
            for (std::size_t j = 0; j < prog.rdim(); ++j)
                adir += prog.constraint_row(r)[j] * dir[j];
            if (adir > 0.0) t_max = std::min(t_max, prog.slack(r, anchor) / adir);
        }
        if (!std::isfinite(t_max)) t_max = 40.0;
        const double t = 0.9 * t_max * gen.uniform01();
        std::vector<double> start(anchor);
        for (std::size_t j = 0; j < prog.rdim(); ++j) start[j] += t * dir[j];
        starts.push_back(std::move(start));
    }

    BarrierPoint best_hi, best_lo;
    std::size_t restarts = 0;
    for (const double sign : {-1.0, +1.0}) {
        for (const auto& start : starts) {
            ++restarts;
            BarrierPoint pt = barrier_solve(prog, start, sign, options.max_iterations);
            if (!pt.valid) continue;
            if (!best_hi.valid || pt.beta > best_hi.beta) best_hi = pt;
            if (!best_lo.valid || pt.beta < best_lo.beta) best_lo = pt;
        }
    }
    if (!best_hi.valid || !best_lo.valid)
        throw ZeroDenominator(
            "no parametric coefficients with a positive weighted denominator were found");
    // polish each incumbent with a longer run from where it stopped
    for (int pass = 0; pass < 2; ++pass) {
        BarrierPoint up = barrier_solve(prog, best_hi.alpha, -1.0, 2 * options.max_iterations);
        if (up.valid && up.beta > best_hi.beta) best_hi = up;
        BarrierPoint down = barrier_solve(prog, best_lo.alpha, +1.0, 2 * options.max_iterations);
        if (down.valid && down.beta < best_lo.beta) best_lo = down;
    }

    ParametricInterval out;
    out.beta_lo = best_lo.beta;
    out.beta_hi = best_hi.beta;
    out.alpha_lo = prog.expand(best_lo.alpha);
    out.alpha_hi = prog.expand(best_hi.alpha);
    out.diagnostics.restarts = restarts;
    for (std::size_t r = 0; r < prog.rows(); ++r) {
        const double tol = 1e-6 * (1.0 + std::fabs(poly.rhs[r]));
        if (prog.slack(r, best_lo.alpha) <= tol) out.diagnostics.active_constraints_lo.push_back(r);
        if (prog.slack(r, best_hi.alpha) <= tol) out.diagnostics.active_constraints_hi.push_back(r);
    }
    return out;
}

} // namespace selbounds
