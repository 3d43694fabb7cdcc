#include "selbounds/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "selbounds/normal.hpp"
#include "selbounds/rng.hpp"

namespace selbounds {

namespace {

double capped_upper_quantile(double a) {
    const double z = upper_quantile(a);
    if (!std::isfinite(z)) return 1e8;
    return std::min(z, 1e8);
}

} // namespace

RelaxedConstraint build_relaxed_constraint(const AuxConstraint& c, const SupportTable& table,
                                           const WeightBox& box, std::size_t n) {
    if (!(c.alpha_share > 0.0 && c.alpha_share < 1.0))
        throw InvalidParameter("constraint alpha share must lie in (0, 1)");
    if (n < 2) throw InvalidParameter("constraint relaxation needs n >= 2");
    const std::size_t k = table.num_cells();
    const double root_n = std::sqrt(static_cast<double>(n));

    RelaxedConstraint out;
    switch (c.kind) {
        case AuxConstraint::Kind::ResponseRate: {
            if (!(c.response_rate > 0.0 && c.response_rate <= 1.0))
                throw InvalidParameter("response rate must lie in (0, 1]");
            const double wo = 1.0 / c.response_rate;
            if (wo < box.lo() - 1e-12 || wo > box.hi() + 1e-12)
                throw InfeasibleByConstruction(
                    "inverse response rate " + std::to_string(wo) +
                    " lies outside the weight box [" + std::to_string(box.lo()) + ", " +
                    std::to_string(box.hi()) + "]");
            const double cn = capped_upper_quantile(c.alpha_share / 2.0) / root_n;
            const double cn2 = cn * cn;
            std::vector<double> p(table.phat);
            out.value = [p, wo, cn2](std::span<const double> w) {
                double s = 0.0, t = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double d = w[i] - wo;
                    s += d * p[i];
                    t += d * d * p[i];
                }
                return (1.0 + cn2) * s * s - cn2 * t;
            };
            out.gradient = [p, wo, cn2](std::span<const double> w, std::span<double> grad) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) s += (w[i] - wo) * p[i];
                const double c1 = 2.0 * (1.0 + cn2) * s;
                for (std::size_t i = 0; i < p.size(); ++i)
                    grad[i] = c1 * p[i] - 2.0 * cn2 * (w[i] - wo) * p[i];
            };
            out.label = "response_rate";
            break;
        }
        case AuxConstraint::Kind::CovariateMean: {
            if (c.column >= table.dim)
                throw InvalidParameter("covariate-mean constraint column is out of range");
            const double cn = capped_upper_quantile(c.alpha_share / 2.0) / root_n;
            const double cn2 = cn * cn;
            std::vector<double> dp(k), ddp(k);
            for (std::size_t i = 0; i < k; ++i) {
                const double d = table.cell(i)[c.column] - c.qbar;
                dp[i] = d * table.phat[i];
                ddp[i] = d * d * table.phat[i];
            }
            out.value = [dp, ddp, cn2](std::span<const double> w) {
                double s = 0.0, t = 0.0;
                for (std::size_t i = 0; i < dp.size(); ++i) {
                    s += w[i] * dp[i];
                    t += w[i] * w[i] * ddp[i];
                }
                return (1.0 + cn2) * s * s - cn2 * t;
            };
            out.gradient = [dp, ddp, cn2](std::span<const double> w, std::span<double> grad) {
                double s = 0.0;
                for (std::size_t i = 0; i < dp.size(); ++i) s += w[i] * dp[i];
                const double c1 = 2.0 * (1.0 + cn2) * s;
                for (std::size_t i = 0; i < dp.size(); ++i)
                    grad[i] = c1 * dp[i] - 2.0 * cn2 * w[i] * ddp[i];
            };
            out.label = "covariate_mean";
            break;
        }
        case AuxConstraint::Kind::GenericLinearMoment: {
            if (!c.moment)
                throw InvalidParameter("generic moment constraint needs an H function");
            const double z = capped_upper_quantile(c.alpha_share);
            std::vector<double> h(k), hp(k), p(table.phat);
            for (std::size_t i = 0; i < k; ++i) {
                h[i] = c.moment(table.cell(i));
                if (!std::isfinite(h[i])) throw NonFiniteEvaluation(i, "H");
                hp[i] = h[i] * table.phat[i];
            }
            out.value = [h, hp, p, z, root_n](std::span<const double> w) {
                double hbar = 0.0, m2 = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    hbar += w[i] * hp[i];
                    m2 += w[i] * w[i] * h[i] * h[i] * p[i];
                }
                const double var = std::max(m2 - hbar * hbar, 0.0);
                return hbar - z * std::sqrt(var) / root_n;
            };
            out.gradient = [h, hp, p, z, root_n](std::span<const double> w,
                                                 std::span<double> grad) {
                double hbar = 0.0, m2 = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    hbar += w[i] * hp[i];
                    m2 += w[i] * w[i] * h[i] * h[i] * p[i];
                }
                const double sd = std::sqrt(std::max(m2 - hbar * hbar, 0.0));
                const double c2 = sd > 1e-12 ? z / (2.0 * sd * root_n) : 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double dvar = 2.0 * w[i] * h[i] * h[i] * p[i] - 2.0 * hbar * hp[i];
                    grad[i] = hp[i] - c2 * dvar;
                }
            };
            out.label = "generic_moment";
            break;
        }
    }

    // Normalize to O(1) at representative points so the solver's penalty
    // parameters behave uniformly across constraint kinds.
    {
        std::vector<double> probe(k);
        double mag = 0.0;
        for (double v : {box.lo(), 0.5 * (box.lo() + box.hi()), box.hi()}) {
            std::fill(probe.begin(), probe.end(), v);
            mag = std::max(mag, std::fabs(out.value(probe)));
        }
        out.scale = 1.0 / std::max(mag, 1e-12);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equality-constrained fractional program (Dinkelbach).
// ---------------------------------------------------------------------------

namespace {

struct EqualityLpResult {
    double objective;
    std::vector<double> w;
};

// maximize sum_k c_k w_k subject to sum_k a_k w_k = 0 over the box. The KKT
// multiplier sweep flips cells in breakpoint order; one coordinate may end
// fractional to meet the equality exactly.
EqualityLpResult equality_lp_max(std::span<const double> c, std::span<const double> a, double lo,
                                 double hi) {
    const std::size_t k = c.size();
    std::vector<double> w(k);
    double balance = 0.0;
    std::vector<std::pair<double, std::uint32_t>> breakpoints;
    for (std::size_t i = 0; i < k; ++i) {
        if (a[i] > 0.0) {
            w[i] = hi;
            balance += a[i] * hi;
            breakpoints.emplace_back(c[i] / a[i], static_cast<std::uint32_t>(i));
        } else if (a[i] < 0.0) {
            w[i] = lo;
            balance += a[i] * lo;
            breakpoints.emplace_back(c[i] / a[i], static_cast<std::uint32_t>(i));
        } else {
            w[i] = c[i] > 0.0 ? hi : lo;
        }
    }
    if (balance < 0.0)
        throw InfeasibleConstraints("moment equality cannot be met inside the weight box");
    if (balance > 0.0) {
        std::sort(breakpoints.begin(), breakpoints.end());
        bool met = false;
        for (const auto& [nu, idx] : breakpoints) {
            const double from = w[idx];
            const double to = a[idx] > 0.0 ? lo : hi;
            const double delta = a[idx] * (to - from); // < 0
            if (balance + delta <= 0.0) {
                const double theta = balance / -delta;
                w[idx] = from + theta * (to - from);
                balance = 0.0;
                met = true;
                break;
            }
            w[idx] = to;
            balance += delta;
        }
        if (!met)
            throw InfeasibleConstraints("moment equality cannot be met inside the weight box");
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < k; ++i) obj += c[i] * w[i];
    return {obj, std::move(w)};
}

struct RatioParts {
    double num, den;
};

RatioParts ratio_parts(const SupportTable& t, std::span<const double> w) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.num_cells(); ++i) {
        num += w[i] * t.f[i] * t.phat[i];
        den += w[i] * t.g[i] * t.phat[i];
    }
    return {num, den};
}

// expects sign = +1 for the maximum, -1 for the minimum (applied to f)
std::pair<double, std::vector<double>> dinkelbach(const SupportTable& t, const WeightBox& box,
                                                  std::span<const double> a, double sign) {
    const std::size_t k = t.num_cells();
    std::vector<double> c(k);
    // start from any feasible point (beta = 0 objective)
    for (std::size_t i = 0; i < k; ++i) c[i] = sign * t.f[i] * t.phat[i];
    EqualityLpResult lp = equality_lp_max(c, a, box.lo(), box.hi());
    RatioParts parts = ratio_parts(t, lp.w);
    if (!(parts.den > 0.0))
        throw ZeroDenominator("weighted denominator is not positive at a feasible point");
    double beta = sign * parts.num / parts.den;
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < k; ++i)
            c[i] = (sign * t.f[i] - beta * t.g[i]) * t.phat[i];
        lp = equality_lp_max(c, a, box.lo(), box.hi());
        parts = ratio_parts(t, lp.w);
        if (!(parts.den > 0.0))
            throw ZeroDenominator("weighted denominator is not positive at a feasible point");
        const double beta_new = sign * parts.num / parts.den;
        if (std::fabs(beta_new - beta) <= 1e-13 * (1.0 + std::fabs(beta_new))) {
            beta = beta_new;
            break;
        }
        beta = beta_new;
    }
    return {sign * beta, std::move(lp.w)};
}

} // namespace

EqualityBounds solve_moment_equality_bounds(const SupportTable& table, const WeightBox& box,
                                            std::span<const double> m_coeff) {
    const std::size_t k = table.num_cells();
    if (m_coeff.size() != k)
        throw InvalidParameter("moment coefficient length does not match cell count");
    // denominator must stay positive over the box
    double den_min = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        den_min += table.phat[i] * table.g[i] * (table.g[i] > 0.0 ? box.lo() : box.hi());
    if (!(den_min > 0.0))
        throw ZeroDenominator("weighted denominator is not positive over the weight box");

    std::vector<double> a(k);
    for (std::size_t i = 0; i < k; ++i) a[i] = m_coeff[i] * table.phat[i];

    EqualityBounds out;
    auto [hi, w_hi] = dinkelbach(table, box, a, +1.0);
    auto [lo, w_lo] = dinkelbach(table, box, a, -1.0);
    out.beta_hi = hi;
    out.beta_lo = lo;
    out.w_hi = std::move(w_hi);
    out.w_lo = std::move(w_lo);
    return out;
}

// ---------------------------------------------------------------------------
// Augmented-Lagrangian multi-start solver.
// ---------------------------------------------------------------------------

namespace {

struct WorkingSet {
    const SupportTable* table;
    WeightBox box;
    const std::vector<RelaxedConstraint>* cons;
    double sign; // -1: maximize beta (minimize -beta); +1: minimize beta
};

double beta_value(const WorkingSet& ws, std::span<const double> w) {
    const SupportTable& t = *ws.table;
    const std::size_t k = t.num_cells();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        num += w[i] * t.f[i] * t.phat[i];
        den += w[i] * t.g[i] * t.phat[i];
    }
    return num / den;
}

double beta_and_grad(const WorkingSet& ws, std::span<const double> w, std::span<double> grad) {
    const SupportTable& t = *ws.table;
    const std::size_t k = t.num_cells();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        num += w[i] * t.f[i] * t.phat[i];
        den += w[i] * t.g[i] * t.phat[i];
    }
    const double beta = num / den;
    for (std::size_t i = 0; i < k; ++i)
        grad[i] = ws.sign * t.phat[i] * (t.f[i] - beta * t.g[i]) / den;
    return beta;
}

struct AlPoint {
    std::vector<double> w;
    double beta = 0.0;
    double raw_violation = 0.0;    // max over constraints of unscaled c_j(w)
    double kkt_residual = 0.0;     // scaled stationarity + complementarity
    bool feasible = false;
    std::vector<double> lambda;    // multipliers at exit, for warm restarts
    double mu = 50.0;
};

struct RunBudget {
    std::size_t max_outer;
    std::size_t max_inner;
    double inner_tol;
};

class AlSolver {
public:
    AlSolver(const WorkingSet& ws, const SolverOptions& opt)
        : ws_(ws), opt_(opt), k_(ws.table->num_cells()), j_(ws.cons->size()),
          grad_obj_(k_), grad_con_(k_), grad_total_(k_), trial_(k_), cvals_(j_) {}

    AlPoint run(std::vector<double> w, const RunBudget& budget,
                const std::vector<double>* warm_lambda = nullptr, double warm_mu = 50.0) {
        project(w);
        std::vector<double> lambda =
            warm_lambda ? *warm_lambda : std::vector<double>(j_, 0.0);
        double mu = warm_lambda ? warm_mu : 50.0;
        double prev_viol = std::numeric_limits<double>::infinity();
        double inner_tol = budget.inner_tol;

        for (std::size_t outer = 0; outer < budget.max_outer; ++outer) {
            inner_minimize(w, lambda, mu, inner_tol, budget.max_inner);
            const double viol = scaled_violation(w);
            const double kkt = kkt_residual(w, lambda, mu);
#ifdef SELBOUNDS_DEBUG_AL
            std::fprintf(stderr, "AL outer %zu: viol %.3e kkt %.3e mu %.1e lambda %.3e beta %.6f\n",
                         outer, viol, kkt, mu, lambda.empty() ? 0.0 : lambda[0],
                         beta_value(ws_, w));
#endif
            if (viol <= 1e-10 && kkt <= opt_.kkt_tol) break;
            for (std::size_t j = 0; j < j_; ++j)
                lambda[j] = std::max(0.0, lambda[j] + mu * cvals_[j]);
            if (viol > 1e-8 && viol > 0.25 * prev_viol) mu = std::min(mu * 10.0, 1e8);
            prev_viol = viol;
            inner_tol = std::max(inner_tol * 0.25, 1e-12);
        }
        // restoration pass if the constraints are still violated
        if (scaled_violation(w) > 1e-9) {
            restore_feasibility(w);
            std::fill(lambda.begin(), lambda.end(), 0.0);
            mu = 200.0;
            inner_tol = budget.inner_tol * 1e-2;
            for (std::size_t outer = 0; outer < budget.max_outer; ++outer) {
                inner_minimize(w, lambda, mu, inner_tol, budget.max_inner);
                const double viol = scaled_violation(w);
                const double kkt = kkt_residual(w, lambda, mu);
                if (viol <= 1e-10 && kkt <= opt_.kkt_tol) break;
                for (std::size_t j = 0; j < j_; ++j)
                    lambda[j] = std::max(0.0, lambda[j] + mu * cvals_[j]);
                if (viol > 1e-8 && viol > 0.25 * prev_viol) mu = std::min(mu * 10.0, 1e8);
                prev_viol = viol;
                inner_tol = std::max(inner_tol * 0.25, 1e-12);
            }
        }

        AlPoint out;
        out.kkt_residual = kkt_residual(w, lambda, mu);
        out.raw_violation = raw_violation(w);
        out.feasible = out.raw_violation <= 1e-8;
        out.beta = beta_value(ws_, w);
        out.w = std::move(w);
        out.lambda = std::move(lambda);
        out.mu = mu;
        return out;
    }

private:
    void project(std::vector<double>& w) const {
        for (double& v : w) v = std::clamp(v, ws_.box.lo(), ws_.box.hi());
    }

    double eval_constraints(std::span<const double> w) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < j_; ++j) {
            cvals_[j] = (*ws_.cons)[j].value(w) * (*ws_.cons)[j].scale;
            worst = std::max(worst, cvals_[j]);
        }
        return worst;
    }

    double scaled_violation(std::span<const double> w) {
        if (j_ == 0) return 0.0;
        return std::max(0.0, eval_constraints(w));
    }

    double raw_violation(std::span<const double> w) {
        double worst = 0.0;
        for (std::size_t j = 0; j < j_; ++j)
            worst = std::max(worst, (*ws_.cons)[j].value(w));
        return worst;
    }

    double lagrangian(std::span<const double> w, const std::vector<double>& lambda, double mu) {
        double val = ws_.sign * beta_value(ws_, w);
        eval_constraints(w);
        for (std::size_t j = 0; j < j_; ++j) {
            const double m = std::max(0.0, lambda[j] + mu * cvals_[j]);
            val += (m * m - lambda[j] * lambda[j]) / (2.0 * mu);
        }
        return val;
    }

    // gradient of the augmented Lagrangian at w into grad_total_
    double lagrangian_with_grad(std::span<const double> w, const std::vector<double>& lambda,
                                double mu) {
        const double beta = beta_and_grad(ws_, w, grad_obj_);
        std::copy(grad_obj_.begin(), grad_obj_.end(), grad_total_.begin());
        double val = ws_.sign * beta;
        eval_constraints(w);
        for (std::size_t j = 0; j < j_; ++j) {
            const double m = std::max(0.0, lambda[j] + mu * cvals_[j]);
            val += (m * m - lambda[j] * lambda[j]) / (2.0 * mu);
            if (m > 0.0) {
                (*ws_.cons)[j].gradient(w, grad_con_);
                const double mscale = m * (*ws_.cons)[j].scale;
                for (std::size_t i = 0; i < k_; ++i) grad_total_[i] += mscale * grad_con_[i];
            }
        }
        return val;
    }

    // spectral projected gradient with a nonmonotone (8-window) line search
    void inner_minimize(std::vector<double>& w, const std::vector<double>& lambda, double mu,
                        double tol, std::size_t max_inner) {
        double fval = lagrangian_with_grad(w, lambda, mu);
        std::vector<double> w_prev(w), g_prev(grad_total_);
        constexpr std::size_t window = 8;
        std::vector<double> recent(window, fval);
        double step = 1.0;
        bool have_prev = false;
        for (std::size_t it = 0; it < max_inner; ++it) {
            // projected-gradient optimality measure
            double resid = 0.0;
            for (std::size_t i = 0; i < k_; ++i) {
                const double moved =
                    std::clamp(w[i] - grad_total_[i], ws_.box.lo(), ws_.box.hi());
                resid = std::max(resid, std::fabs(moved - w[i]));
            }
            if (resid <= tol) break;

            if (have_prev) {
                double ss = 0.0, sy = 0.0;
                for (std::size_t i = 0; i < k_; ++i) {
                    const double s = w[i] - w_prev[i];
                    const double y = grad_total_[i] - g_prev[i];
                    ss += s * s;
                    sy += s * y;
                }
                step = sy > 1e-300 ? std::clamp(ss / sy, 1e-12, 1e8) : 1.0;
            }
            w_prev = w;
            g_prev = grad_total_;
            const double f_ref = *std::max_element(recent.begin(), recent.end());
            double t = step;
            bool stepped = false;
            for (int ls = 0; ls < 60; ++ls) {
                double descent = 0.0;
                for (std::size_t i = 0; i < k_; ++i) {
                    trial_[i] = std::clamp(w[i] - t * g_prev[i], ws_.box.lo(), ws_.box.hi());
                    descent += g_prev[i] * (trial_[i] - w[i]);
                }
                const double f_new = lagrangian(trial_, lambda, mu);
                if (f_new <= f_ref + 1e-4 * descent) {
                    w = trial_;
                    fval = f_new;
                    stepped = true;
                    break;
                }
                t *= 0.5;
                if (t < 1e-16) break;
            }
            if (!stepped) break; // no acceptable step at any scale
            lagrangian_with_grad(w, lambda, mu);
            recent[it % window] = fval;
            have_prev = true;
        }
    }

public:
    // Gradient projection along the active-constraint surface with Newton
    // restoration, for endpoints where one constraint is weakly active and
    // the augmented-Lagrangian path crawls. Returns the improved point with
    // a fresh KKT certificate.
    AlPoint surface_polish(const AlPoint& start) {
        const double lo = ws_.box.lo(), hi = ws_.box.hi();
        const double edge = 1e-10 * (hi - lo);
        std::vector<double> w = start.w;
        std::vector<double> gc(k_);

        // the near-active constraint, if there is exactly one
        eval_constraints(w);
        std::ptrdiff_t act = -1;
        for (std::size_t j = 0; j < j_; ++j) {
            if (cvals_[j] >= -1e-5) {
                if (act >= 0) return start; // several active: out of scope
                act = static_cast<std::ptrdiff_t>(j);
            }
        }

        AlPoint best = start;
        double step = 1.0;
        for (std::size_t it = 0; it < 800; ++it) {
            if (act >= 0) {
                for (int r = 0; r < 6; ++r) { // Newton restoration onto c = 0
                    const double cj =
                        (*ws_.cons)[act].value(w) * (*ws_.cons)[act].scale;
                    if (cj <= 1e-13) break;
                    (*ws_.cons)[act].gradient(w, grad_con_);
                    double gg = 0.0;
                    for (std::size_t i = 0; i < k_; ++i) {
                        gc[i] = grad_con_[i] * (*ws_.cons)[act].scale;
                        gg += gc[i] * gc[i];
                    }
                    if (gg <= 1e-300) break;
                    for (std::size_t i = 0; i < k_; ++i)
                        w[i] = std::clamp(w[i] - cj / gg * gc[i], lo, hi);
                }
            }
            if (raw_violation(w) <= 1e-8) {
                const double beta = beta_value(ws_, w);
                if (ws_.sign * beta < ws_.sign * best.beta || !best.feasible) {
                    best.w = w;
                    best.beta = beta;
                    best.feasible = true;
                }
            }
            beta_and_grad(ws_, w, grad_obj_);
            double lam = 0.0, gg = 0.0;
            if (act >= 0) {
                (*ws_.cons)[act].gradient(w, grad_con_);
                double num = 0.0;
                for (std::size_t i = 0; i < k_; ++i) {
                    gc[i] = grad_con_[i] * (*ws_.cons)[act].scale;
                    if (w[i] - lo > edge && hi - w[i] > edge) {
                        num += grad_obj_[i] * gc[i];
                        gg += gc[i] * gc[i];
                    }
                }
                lam = gg > 1e-300 ? std::max(0.0, -num / gg) : 0.0;
            }
            double resid = 0.0;
            for (std::size_t i = 0; i < k_; ++i) {
                double d = -(grad_obj_[i] + (act >= 0 ? lam * gc[i] : 0.0));
                if (w[i] - lo <= edge && d < 0.0) d = 0.0;
                if (hi - w[i] <= edge && d > 0.0) d = 0.0;
                trial_[i] = d;
                resid = std::max(resid, std::fabs(d));
            }
            if (resid <= 0.2 * opt_.kkt_tol) break;
            // cautious adaptive step on the raw objective; restoration
            // re-centers the iterate on the surface next round
            const double f_old = ws_.sign * beta_value(ws_, w);
            std::vector<double> w_new(k_);
            for (std::size_t i = 0; i < k_; ++i)
                w_new[i] = std::clamp(w[i] + step * trial_[i], lo, hi);
            const double f_new = ws_.sign * beta_value(ws_, w_new);
            if (f_new < f_old) {
                w = std::move(w_new);
                step = std::min(step * 1.5, 1e6);
            } else {
                step = std::max(step * 0.4, 1e-12);
            }
        }

        if (best.feasible) {
            std::vector<double> lam_full(j_, 0.0);
            best.kkt_residual = kkt_residual(best.w, lam_full, 1.0);
            best.raw_violation = raw_violation(best.w);
        }
        return best;
    }

private:
    // minimize the squared scaled violation to find a feasible point
    void restore_feasibility(std::vector<double>& w) {
        for (std::size_t it = 0; it < 600; ++it) {
            eval_constraints(w);
            double total = 0.0;
            std::fill(grad_total_.begin(), grad_total_.end(), 0.0);
            for (std::size_t j = 0; j < j_; ++j) {
                const double v = std::max(0.0, cvals_[j]);
                if (v > 0.0) {
                    total += v * v;
                    (*ws_.cons)[j].gradient(w, grad_con_);
                    const double c2 = 2.0 * v * (*ws_.cons)[j].scale;
                    for (std::size_t i = 0; i < k_; ++i) grad_total_[i] += c2 * grad_con_[i];
                }
            }
            if (total <= 1e-22) return;
            double gnorm2 = 0.0;
            for (double g : grad_total_) gnorm2 += g * g;
            if (gnorm2 <= 1e-300) return;
            double t = total / gnorm2; // exact line minimum for a quadratic model
            for (int ls = 0; ls < 40; ++ls) {
                for (std::size_t i = 0; i < k_; ++i)
                    trial_[i] = std::clamp(w[i] - t * grad_total_[i], ws_.box.lo(), ws_.box.hi());
                double total_new = 0.0;
                for (std::size_t j = 0; j < j_; ++j) {
                    const double v = std::max(0.0, (*ws_.cons)[j].value(trial_) *
                                                       (*ws_.cons)[j].scale);
                    total_new += v * v;
                }
                if (total_new < total || t < 1e-14) {
                    w = trial_;
                    break;
                }
                t *= 0.5;
            }
        }
    }

    // One-sided stationarity violation at lambda for a single coordinate:
    // interior coordinates must have a zero Lagrangian gradient; bound
    // coordinates only penalize the inward-pointing component.
    // coord_state: 0 interior, 1 at lo, 2 at hi.
    static double coord_violation(double r, int state) {
        if (state == 1) return std::max(0.0, -r);
        if (state == 2) return std::max(0.0, r);
        return r;
    }

    /// Duals re-estimated at the candidate point: the AL multipliers round
    /// weakly-active duals to zero. Each lambda_j minimizes the convex
    /// one-sided stationarity objective (coordinate descent over the active
    /// constraints, bisection on the subgradient per coordinate).
    void estimate_duals(std::span<const double> w, const std::vector<std::vector<double>>& gc,
                        std::vector<double>& lhat, std::vector<int>& state) {
        const double lo = ws_.box.lo(), hi = ws_.box.hi();
        const double edge = 1e-9 * (hi - lo);
        state.resize(k_);
        for (std::size_t i = 0; i < k_; ++i)
            state[i] = w[i] - lo <= edge ? 1 : (hi - w[i] <= edge ? 2 : 0);

        const std::size_t na = gc.size();
        std::fill(lhat.begin(), lhat.end(), 0.0);
        std::vector<double> base(k_);
        for (int sweep = 0; sweep < 40; ++sweep) {
            double moved = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                for (std::size_t i = 0; i < k_; ++i) {
                    base[i] = grad_obj_[i];
                    for (std::size_t b = 0; b < na; ++b)
                        if (b != a) base[i] += lhat[b] * gc[b][i];
                }
                // F(l) = sum_i viol(base_i + l g_i)^2 is convex; bisect on F'
                auto deriv = [&](double l) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < k_; ++i) {
                        const double r = base[i] + l * gc[a][i];
                        if (state[i] == 0) {
                            d += 2.0 * r * gc[a][i];
                        } else if (state[i] == 1) {
                            d -= 2.0 * std::max(0.0, -r) * gc[a][i];
                        } else {
                            d += 2.0 * std::max(0.0, r) * gc[a][i];
                        }
                    }
                    return d;
                };
                double l_lo = 0.0, l_hi = 1.0;
                double next;
                if (deriv(0.0) >= 0.0) {
                    next = 0.0;
                } else {
                    while (deriv(l_hi) < 0.0 && l_hi < 1e12) l_hi *= 4.0;
                    for (int it = 0; it < 80; ++it) {
                        const double mid = 0.5 * (l_lo + l_hi);
                        (deriv(mid) < 0.0 ? l_lo : l_hi) = mid;
                    }
                    next = 0.5 * (l_lo + l_hi);
                }
                moved = std::max(moved, std::fabs(next - lhat[a]));
                lhat[a] = next;
            }
            if (moved < 1e-14) break;
        }
    }

    double kkt_residual(std::span<const double> w, const std::vector<double>& lambda,
                        double /*mu*/) {
        beta_and_grad(ws_, w, grad_obj_);
        eval_constraints(w);

        std::vector<std::size_t> active;
        std::vector<std::vector<double>> gc;
        for (std::size_t j = 0; j < j_; ++j) {
            if (cvals_[j] < -1e-5 && lambda[j] <= 0.0) continue;
            (*ws_.cons)[j].gradient(w, grad_con_);
            std::vector<double> gj(k_);
            for (std::size_t i = 0; i < k_; ++i)
                gj[i] = grad_con_[i] * (*ws_.cons)[j].scale;
            active.push_back(j);
            gc.push_back(std::move(gj));
        }
        std::vector<double> lhat(active.size());
        std::vector<int> state;
        estimate_duals(w, gc, lhat, state);

        double gscale = 1.0;
        for (double g : grad_obj_) gscale = std::max(gscale, std::fabs(g));
        double stat = 0.0;
        for (std::size_t i = 0; i < k_; ++i) {
            double r = grad_obj_[i];
            for (std::size_t a = 0; a < active.size(); ++a) r += lhat[a] * gc[a][i];
            stat = std::max(stat, std::fabs(coord_violation(r, state[i])));
        }
        double comp = 0.0;
        for (std::size_t a = 0; a < active.size(); ++a)
            comp = std::max(comp, std::fabs(lhat[a] * cvals_[active[a]]));
        return std::max(stat / gscale, std::min(comp, 1.0));
    }

    WorkingSet ws_;
    SolverOptions opt_;
    std::size_t k_, j_;
    std::vector<double> grad_obj_, grad_con_, grad_total_, trial_, cvals_;
};

std::vector<std::vector<double>> make_starts(const SupportTable& table, const WeightBox& box,
                                             const std::vector<AuxConstraint>& constraints,
                                             const IntervalEstimate& unconstrained, bool maximize,
                                             const SolverOptions& opt) {
    const std::size_t k = table.num_cells();
    std::vector<std::vector<double>> starts;
    starts.push_back(maximize ? unconstrained.w_hi : unconstrained.w_lo);
    starts.push_back(maximize ? unconstrained.w_lo : unconstrained.w_hi);

    double center = 0.5 * (box.lo() + box.hi());
    for (const auto& c : constraints)
        if (c.kind == AuxConstraint::Kind::ResponseRate)
            center = std::clamp(1.0 / c.response_rate, box.lo(), box.hi());
    starts.emplace_back(k, center);

    // feasible anchor: exact moment-equality solution for the first
    // covariate-mean constraint (its relaxation always contains it)
    for (const auto& c : constraints) {
        if (c.kind == AuxConstraint::Kind::CovariateMean) {
            std::vector<double> m(k);
            for (std::size_t i = 0; i < k; ++i) m[i] = table.cell(i)[c.column] - c.qbar;
            try {
                EqualityBounds eq = solve_moment_equality_bounds(table, box, m);
                starts.push_back(maximize ? eq.w_hi : eq.w_lo);
            } catch (const Error&) {
                // no exact-equality point inside the box; other starts remain
            }
            break;
        }
    }

    const std::uint64_t dir_tag = maximize ? 1 : 2;
    std::size_t s = 0;
    while (starts.size() < opt.multistarts) {
        RandomStream gen(opt.seed, stream_tag::multistart, dir_tag, s++);
        std::vector<double> w(k);
        for (double& v : w) v = box.lo() + (box.hi() - box.lo()) * gen.uniform01();
        starts.push_back(std::move(w));
    }
    return starts;
}

} // namespace

ConstrainedInterval solve_constrained_bounds(const SupportTable& table, const WeightBox& box,
                                             const std::vector<AuxConstraint>& constraints,
                                             double alpha1, double alpha2,
                                             const SolverOptions& options) {
    const IntervalEstimate unconstrained = solve_bounds(table, box);

    ConstrainedInterval out;
    out.alpha1 = alpha1;
    out.alpha2 = alpha2;
    if (constraints.empty()) {
        out.beta_lo = unconstrained.beta_lo;
        out.beta_hi = unconstrained.beta_hi;
        out.w_lo = unconstrained.w_lo;
        out.w_hi = unconstrained.w_hi;
        return out;
    }

    double share_sum = 0.0;
    for (const auto& c : constraints) share_sum += c.alpha_share;
    if (std::fabs(share_sum - alpha1) > 1e-9)
        throw InvalidParameter("constraint alpha shares sum to " + std::to_string(share_sum) +
                               ", expected alpha1 = " + std::to_string(alpha1));

    std::vector<RelaxedConstraint> relaxed;
    relaxed.reserve(constraints.size());
    for (const auto& c : constraints)
        relaxed.push_back(build_relaxed_constraint(c, table, box, table.n));

    AlPoint best_hi, best_lo;
    bool have_hi = false, have_lo = false;
    std::size_t restarts = 0;

    // cheap scouting pass over every start, full-precision polish of the
    // direction winner only
    const RunBudget scout{10, 120, 1e-3};
    const RunBudget polish{options.max_outer, options.max_inner, 1e-5};
    for (const bool maximize : {true, false}) {
        WorkingSet ws{&table, box, &relaxed, maximize ? -1.0 : 1.0};
        AlSolver solver(ws, options);
        const auto starts = make_starts(table, box, constraints, unconstrained, maximize, options);
        std::vector<AlPoint> scouts;
        for (const auto& start : starts) {
            ++restarts;
            AlPoint pt = solver.run(start, scout);
            if (pt.feasible) scouts.push_back(std::move(pt));
        }
        if (scouts.empty()) continue;
        std::sort(scouts.begin(), scouts.end(), [&](const AlPoint& a, const AlPoint& b) {
            return maximize ? a.beta > b.beta : a.beta < b.beta;
        });
        // converged candidates outrank unconverged ones; ties go to the bound
        const auto better = [&](const AlPoint& a, const AlPoint& b) {
            const bool ca = a.kkt_residual <= options.kkt_tol;
            const bool cb = b.kkt_residual <= options.kkt_tol;
            if (ca != cb) return ca;
            return maximize ? a.beta > b.beta : a.beta < b.beta;
        };
        AlPoint incumbent;
        bool have = false;
        for (std::size_t i = 0; i < scouts.size() && i < 3; ++i) {
            AlPoint cand =
                solver.run(scouts[i].w, polish, &scouts[i].lambda, scouts[i].mu);
            if (!cand.feasible) cand = std::move(scouts[i]);
            if (!have || better(cand, incumbent)) {
                incumbent = std::move(cand);
                have = true;
            }
            if (i == 0 && incumbent.kkt_residual <= options.kkt_tol) break;
        }
        if (!have) continue;
        if (incumbent.kkt_residual > options.kkt_tol) {
            AlPoint rescue = solver.run(incumbent.w, RunBudget{80, 4 * options.max_inner, 1e-6},
                                        &incumbent.lambda, incumbent.mu);
            if (rescue.feasible && rescue.kkt_residual < incumbent.kkt_residual)
                incumbent = std::move(rescue);
        }
        if (incumbent.kkt_residual > options.kkt_tol) {
            AlPoint surfaced = solver.surface_polish(incumbent);
            if (surfaced.feasible &&
                (surfaced.kkt_residual < incumbent.kkt_residual ||
                 (maximize ? surfaced.beta > incumbent.beta : surfaced.beta < incumbent.beta)))
                incumbent = std::move(surfaced);
        }
        // every feasible point bounds both endpoints
        if (!have_hi || incumbent.beta > best_hi.beta) {
            best_hi = incumbent;
            have_hi = true;
        }
        if (!have_lo || incumbent.beta < best_lo.beta) {
            best_lo = std::move(incumbent);
            have_lo = true;
        }
    }

    if (!have_hi || !have_lo)
        throw InfeasibleConstraints(
            "no weight vector satisfying all relaxed constraints was found");
    const double worst_kkt = std::max(best_hi.kkt_residual, best_lo.kkt_residual);
    if (worst_kkt > options.kkt_tol)
        throw NonConvergence("constrained solver exhausted its restart budget at KKT residual " +
                                 std::to_string(worst_kkt),
                             worst_kkt);

    out.beta_lo = best_lo.beta;
    out.beta_hi = best_hi.beta;
    out.w_lo = std::move(best_lo.w);
    out.w_hi = std::move(best_hi.w);
    out.diagnostics.restarts = restarts;
    out.diagnostics.best_kkt_residual = std::max(best_lo.kkt_residual, best_hi.kkt_residual);
    out.diagnostics.slack_lo.reserve(relaxed.size());
    out.diagnostics.slack_hi.reserve(relaxed.size());
    for (const auto& rc : relaxed) {
        out.diagnostics.slack_lo.push_back(-rc.value(out.w_lo));
        out.diagnostics.slack_hi.push_back(-rc.value(out.w_hi));
    }
    return out;
}

AsymptoticCI theorem3_ci(const ConstrainedInterval& ci, const SupportTable& table, double alpha2) {
    IntervalEstimate ie;
    ie.beta_lo = ci.beta_lo;
    ie.beta_hi = ci.beta_hi;
    ie.w_lo = ci.w_lo;
    ie.w_hi = ci.w_hi;
    return confidence_interval(ie, table, alpha2);
}

TuneResult tune_alpha_split(const ConstrainedProblem& problem, double total_alpha,
                            const std::vector<AlphaSplit>& splits, const SolverOptions& options) {
    if (splits.empty()) throw InvalidParameter("tune_alpha_split needs at least one split");
    if (problem.table == nullptr) throw InvalidParameter("tune_alpha_split needs a support table");
    double base_sum = 0.0;
    for (const auto& c : problem.constraints) base_sum += c.alpha_share;
    if (!(base_sum > 0.0))
        throw InvalidParameter("tune_alpha_split needs constraints with positive shares");

    TuneResult out;
    out.splits = splits;
    out.widths.reserve(splits.size());
    for (const auto& split : splits) {
        if (std::fabs(split.alpha1 + split.alpha2 - total_alpha) > 1e-9)
            throw InvalidParameter("alpha split does not sum to the total budget");
        std::vector<AuxConstraint> scaled = problem.constraints;
        for (auto& c : scaled) c.alpha_share *= split.alpha1 / base_sum;
        const ConstrainedInterval ci = solve_constrained_bounds(
            *problem.table, problem.box, scaled, split.alpha1, split.alpha2, options);
        out.widths.push_back(theorem3_ci(ci, *problem.table, split.alpha2).width());
    }
    out.best_index = 0;
    for (std::size_t i = 1; i < out.widths.size(); ++i)
        if (out.widths[i] < out.widths[out.best_index]) out.best_index = i;
    return out;
}

} // namespace selbounds
