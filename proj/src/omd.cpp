#include "ssplab/omd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssplab {

namespace {

constexpr double kGradTol = 1e-10;
constexpr int kIterCap = 10000;
constexpr double kInf = std::numeric_limits<double>::infinity();

double clamped_log(double x) { return std::log(std::max(x, 1e-300)); }

}  // namespace

// ---------------------------------------------------------------------------
// Entropic projections
// ---------------------------------------------------------------------------

EntropicSolver::EntropicSolver(FlowPolytope poly) : poly_(std::move(poly)) {}

namespace {

struct EntropicEval {
    Eigen::VectorXd q;
    double value = kInf;
    Eigen::VectorXd grad_alpha;
    double grad_mu = 0.0;
};

/// q(alpha, mu) and the dual objective
/// F = sum_i (w_i/eta) q_i + alpha . rhs + mu T.
EntropicEval eval_dual(const FlowPolytope& poly, const Eigen::VectorXd& ln_qref, double eta,
                       const Eigen::VectorXd& alpha, double mu, bool need_grad) {
    EntropicEval ev;
    const int n = static_cast<int>(ln_qref.size());
    Eigen::VectorXd u = poly.flow.transpose() * alpha;
    ev.q.resize(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double expo = ln_qref(i) - (eta / poly.weight(i)) * (u(i) + mu * poly.mass_coef(i));
        if (expo > 709.0) {
            ev.value = kInf;
            return ev;
        }
        ev.q(i) = std::exp(expo);
        sum += (poly.weight(i) / eta) * ev.q(i);
    }
    ev.value = sum + alpha.dot(poly.rhs) + mu * poly.mass_bound;
    if (need_grad) {
        ev.grad_alpha = poly.rhs - poly.flow * ev.q;
        ev.grad_mu = poly.mass_bound - poly.mass_coef.dot(ev.q);
    }
    return ev;
}

}  // namespace

void EntropicSolver::reset() { analyzed_ = false; }

EntropicResult EntropicSolver::project(const Eigen::VectorXd& ln_qref, double eta) {
    const int m = static_cast<int>(poly_.rhs.size());
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
    double mu = 0.0;
    bool with_mu = false;
    int total_iters = 0;
    bool fallback_used = false;

    Eigen::SparseMatrix<double> identity(m, m);
    identity.setIdentity();

    auto newton_phase = [&]() {
        double reg = 0.0;
        EntropicEval cur = eval_dual(poly_, ln_qref, eta, alpha, mu, true);
        if (!std::isfinite(cur.value)) {  // degenerate start; back off to zero duals
            alpha.setZero();
            mu = 0.0;
            cur = eval_dual(poly_, ln_qref, eta, alpha, mu, true);
        }
        while (total_iters < kIterCap) {
            ++total_iters;
            double gnorm = cur.grad_alpha.cwiseAbs().maxCoeff();
            if (with_mu) gnorm = std::max(gnorm, std::abs(cur.grad_mu));
            if (gnorm <= kGradTol) return true;

            // Dual Hessian blocks from d_i = eta q_i / w_i.
            Eigen::VectorXd d = (eta * cur.q.array() / poly_.weight.array()).matrix();
            Eigen::SparseMatrix<double> H =
                poly_.flow * d.asDiagonal() * Eigen::SparseMatrix<double>(poly_.flow.transpose());

            bool stepped = false;
            while (!stepped && reg <= 1e10) {
                Eigen::SparseMatrix<double> Hreg = H + std::max(reg, 1e-13) * identity;
                if (!analyzed_) {
                    ldlt_.analyzePattern(Hreg);
                    analyzed_ = true;
                }
                ldlt_.factorize(Hreg);
                if (ldlt_.info() != Eigen::Success) {
                    reg = std::max(reg * 10.0, 1e-10);
                    continue;
                }
                Eigen::VectorXd da;
                double dmu = 0.0;
                if (!with_mu) {
                    da = ldlt_.solve(-cur.grad_alpha);
                } else {
                    Eigen::VectorXd b = poly_.flow * d.cwiseProduct(poly_.mass_coef);
                    double c = d.dot(poly_.mass_coef.cwiseProduct(poly_.mass_coef)) +
                               std::max(reg, 1e-13);
                    Eigen::VectorXd hu = ldlt_.solve(cur.grad_alpha);
                    Eigen::VectorXd hv = ldlt_.solve(b);
                    double denom = c - b.dot(hv);
                    if (denom <= 0.0) {
                        reg = std::max(reg * 10.0, 1e-10);
                        continue;
                    }
                    dmu = (b.dot(hu) - cur.grad_mu) / denom;
                    da = -hu - hv * dmu;
                }
                double descent = cur.grad_alpha.dot(da) + cur.grad_mu * dmu * (with_mu ? 1.0 : 0.0);
                if (!std::isfinite(descent) || descent >= 0.0) {
                    reg = std::max(reg * 10.0, 1e-10);
                    continue;
                }
                double step = 1.0;
                for (int ls = 0; ls < 60; ++ls) {
                    EntropicEval trial = eval_dual(poly_, ln_qref, eta, alpha + step * da,
                                                   mu + step * dmu, true);
                    if (trial.value <= cur.value + 1e-4 * step * descent) {
                        alpha += step * da;
                        if (with_mu) mu += step * dmu;
                        cur = std::move(trial);
                        stepped = true;
                        reg = std::max(reg / 4.0, 0.0);
                        break;
                    }
                    step *= 0.5;
                }
                if (!stepped) reg = std::max(reg * 10.0, 1e-10);
            }
            if (!stepped) {
                // Projected-gradient fallback.
                fallback_used = true;
                double step = 1.0;
                bool moved = false;
                double g2 = cur.grad_alpha.squaredNorm() + cur.grad_mu * cur.grad_mu;
                for (int ls = 0; ls < 200 && !moved; ++ls) {
                    EntropicEval trial =
                        eval_dual(poly_, ln_qref, eta, alpha - step * cur.grad_alpha,
                                  mu - (with_mu ? step * cur.grad_mu : 0.0), true);
                    if (trial.value <= cur.value - 1e-4 * step * g2) {
                        alpha -= step * cur.grad_alpha;
                        if (with_mu) mu -= step * cur.grad_mu;
                        cur = std::move(trial);
                        moved = true;
                    }
                    step *= 0.5;
                }
                if (!moved) return false;
                reg = 0.0;
            }
        }
        return false;
    };

    if (!newton_phase())
        throw SolverFailureError("entropic projection: phase without mass constraint stalled");
    EntropicEval ev = eval_dual(poly_, ln_qref, eta, alpha, mu, true);
    if (poly_.mass_coef.dot(ev.q) > poly_.mass_bound + 1e-9) {
        with_mu = true;
        if (!newton_phase())
            throw SolverFailureError("entropic projection: mass-constrained phase stalled");
        ev = eval_dual(poly_, ln_qref, eta, alpha, mu, true);
        mu = std::max(mu, 0.0);
    }

    EntropicResult res;
    res.q = ev.q;
    res.alpha = alpha;
    res.mu = mu;
    res.diag.iterations = total_iters;
    res.diag.used_fallback = fallback_used;
    double flow_res = ev.grad_alpha.cwiseAbs().maxCoeff();
    double mass = poly_.mass_coef.dot(ev.q);
    double mass_excess = std::max(0.0, mass - poly_.mass_bound);
    double compl_res = std::abs(mu * (poly_.mass_bound - mass));
    res.diag.dual_gradient = std::max(flow_res, with_mu ? std::abs(ev.grad_mu) : 0.0);
    res.diag.kkt_residual = std::max({flow_res, mass_excess, compl_res});
    return res;
}

double entropic_objective(const FlowPolytope& poly, const Eigen::VectorXd& cost,
                          const Eigen::VectorXd& q_prev, double eta, const Eigen::VectorXd& q) {
    double total = 0.0;
    for (int i = 0; i < q.size(); ++i) {
        double qp = std::max(q_prev(i), 1e-300);
        double breg = qp;
        if (q(i) > 0.0) breg = q(i) * (std::log(q(i) / qp) - 1.0) + qp;
        total += poly.weight(i) * (cost(i) * q(i) + breg / eta);
    }
    return total;
}

EntropicResult omd_step_entropy(EntropicSolver& solver, const Eigen::VectorXd& q_prev,
                                const Eigen::VectorXd& cost, double eta) {
    Eigen::VectorXd ln_qref(q_prev.size());
    for (int i = 0; i < q_prev.size(); ++i) ln_qref(i) = clamped_log(q_prev(i)) - eta * cost(i);
    return solver.project(ln_qref, eta);
}

// ---------------------------------------------------------------------------
// Aggregated log-barrier steps
// ---------------------------------------------------------------------------

BarrierStepper::BarrierStepper(FlowPolytope poly, Eigen::SparseMatrix<double> agg_weighted,
                               Eigen::SparseMatrix<double> agg_plain, double floor)
    : poly_(std::move(poly)),
      agg_w_(std::move(agg_weighted)),
      agg_1_(std::move(agg_plain)),
      floor_(floor) {
    const int n = static_cast<int>(poly_.weight.size());
    const int pairs = static_cast<int>(agg_w_.rows());
    const int p = pairs + 1 + (floor_ > 0.0 ? pairs : 0);
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < agg_w_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(agg_w_, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.col()), static_cast<int>(it.row()), it.value());
    for (int i = 0; i < n; ++i)
        if (poly_.mass_coef(i) != 0.0) trip.emplace_back(i, pairs, poly_.mass_coef(i));
    if (floor_ > 0.0)
        for (int k = 0; k < agg_1_.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(agg_1_, k); it; ++it)
                trip.emplace_back(static_cast<int>(it.col()), pairs + 1 + static_cast<int>(it.row()),
                                  it.value());
    basis_.resize(n, p);
    basis_.setFromTriplets(trip.begin(), trip.end());
}

namespace {

struct PhiDerivs {
    double value = 0.0;
    Eigen::VectorXd d1;
    Eigen::VectorXd d2;
};

PhiDerivs eval_phi(const BarrierObjective& obj, const Eigen::VectorXd& z) {
    PhiDerivs out;
    const int m = static_cast<int>(z.size());
    out.d1.resize(m);
    out.d2.resize(m);
    for (int j = 0; j < m; ++j) {
        if (z(j) <= 0.0) {
            out.value = kInf;
            return out;
        }
        const double r = obj.inv_rate(j);
        if (obj.init_mode) {
            out.value += -r * std::log(z(j));
            out.d1(j) = -r / z(j);
        } else {
            out.value += obj.loss(j) * z(j) + r * (z(j) / obj.z_prev(j) - std::log(z(j)));
            out.d1(j) = obj.loss(j) + r * (1.0 / obj.z_prev(j) - 1.0 / z(j));
        }
        out.d2(j) = r / (z(j) * z(j));
    }
    return out;
}

}  // namespace

double barrier_objective_value(const BarrierObjective& objective, const Eigen::VectorXd& z) {
    if (objective.init_mode) {
        double v = 0.0;
        for (int j = 0; j < z.size(); ++j) v += -objective.inv_rate(j) * std::log(z(j));
        return v;
    }
    double v = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        const double zp = objective.z_prev(j);
        v += objective.loss(j) * z(j) +
             objective.inv_rate(j) * (std::log(zp / z(j)) + z(j) / zp - 1.0);
    }
    return v;
}

BarrierResult BarrierStepper::step(const BarrierObjective& objective,
                                   const Eigen::VectorXd& q_start, bool warm) {
    const int n = static_cast<int>(poly_.weight.size());
    const int pairs = static_cast<int>(agg_w_.rows());
    const bool floored = floor_ > 0.0;
    const double t_end = 1e10;

    Eigen::VectorXd q = q_start;

    auto barrier_value = [&](const Eigen::VectorXd& x, double t) {
        Eigen::VectorXd z = agg_w_ * x;
        PhiDerivs phi = eval_phi(objective, z);
        if (!std::isfinite(phi.value)) return kInf;
        double slack = poly_.mass_bound - poly_.mass_coef.dot(x);
        if (slack <= 0.0) return kInf;
        double v = t * phi.value - std::log(slack);
        for (int i = 0; i < n; ++i) {
            if (x(i) <= 0.0) return kInf;
            v -= std::log(x(i));
        }
        if (floored) {
            Eigen::VectorXd u = agg_1_ * x;
            for (int j = 0; j < pairs; ++j) {
                if (u(j) <= floor_) return kInf;
                v -= std::log(u(j) - floor_);
            }
        }
        return v;
    };

    if (!std::isfinite(barrier_value(q, 1.0)))
        throw InfeasibleFloorError("log-barrier step: start point is not strictly feasible");

    double t = warm ? 1e6 : 1.0;
    int total_iters = 0;
    bool fallback_used = false;
    double stationarity = kInf;
    int rounds_at_end = 0;
    bool done = false;

    while (!done) {
        // Centering at the current t. The Newton decrement is
        // affine-invariant, so the threshold below is absolute.
        int stage_iters = 0;
        bool centered = false;
        while (!centered && stage_iters < 60) {
            if (++total_iters > kIterCap)
                throw SolverFailureError("log-barrier step: iteration cap exceeded");
            ++stage_iters;
            Eigen::VectorXd z = agg_w_ * q;
            PhiDerivs phi = eval_phi(objective, z);
            double slack = poly_.mass_bound - poly_.mass_coef.dot(q);
            Eigen::VectorXd u;
            if (floored) u = (agg_1_ * q).array() - floor_;

            Eigen::VectorXd g = agg_w_.transpose() * (t * phi.d1).eval();
            g -= q.cwiseInverse();
            g += poly_.mass_coef / slack;
            if (floored) g -= agg_1_.transpose() * u.cwiseInverse();

            // Hessian H = diag(1/q^2) + U C U^T with fixed U.
            Eigen::VectorXd cdiag(basis_.cols());
            for (int j = 0; j < pairs; ++j) cdiag(j) = t * phi.d2(j);
            cdiag(pairs) = 1.0 / (slack * slack);
            if (floored)
                for (int j = 0; j < pairs; ++j) cdiag(pairs + 1 + j) = 1.0 / (u(j) * u(j));

            Eigen::VectorXd dinv = q.cwiseProduct(q);  // inverse of diag(1/q^2)
            auto hinv_apply = [&](const Eigen::VectorXd& x, const Eigen::LDLT<Eigen::MatrixXd>& W)
                -> Eigen::VectorXd {
                Eigen::VectorXd a = dinv.cwiseProduct(x);
                Eigen::VectorXd small = basis_.transpose() * a;
                Eigen::VectorXd corr = W.solve(small);
                return a - dinv.cwiseProduct(basis_ * corr);
            };

            // W = C^{-1} + U^T diag(q^2) U.
            Eigen::MatrixXd W = (basis_.transpose() * dinv.asDiagonal() * basis_).toDense();
            for (int j = 0; j < W.rows(); ++j) W(j, j) += 1.0 / cdiag(j);
            Eigen::LDLT<Eigen::MatrixXd> Wldlt(W);

            // Schur system on the flow rows: S y = -E H^{-1} g.
            Eigen::SparseMatrix<double> S0 =
                poly_.flow * dinv.asDiagonal() * Eigen::SparseMatrix<double>(poly_.flow.transpose());
            if (!analyzed_) {
                ldlt_.analyzePattern(S0);
                analyzed_ = true;
            }
            ldlt_.factorize(S0);
            Eigen::VectorXd dq;
            bool linear_ok = ldlt_.info() == Eigen::Success && Wldlt.info() == Eigen::Success;
            if (linear_ok) {
                Eigen::MatrixXd EDU = poly_.flow * dinv.asDiagonal() * basis_;  // V, m x p
                Eigen::VectorXd hg = hinv_apply(g, Wldlt);
                Eigen::VectorXd r = -(poly_.flow * hg);
                Eigen::VectorXd y0 = ldlt_.solve(r);
                Eigen::MatrixXd X = ldlt_.solve(EDU);
                Eigen::MatrixXd inner = W - EDU.transpose() * X;
                Eigen::PartialPivLU<Eigen::MatrixXd> ilu(inner);
                Eigen::VectorXd y = y0 + X * ilu.solve(EDU.transpose() * y0);
                dq = -hinv_apply(g + poly_.flow.transpose() * y, Wldlt);
                stationarity = (g + poly_.flow.transpose() * y).cwiseAbs().maxCoeff() / t;
                if (!dq.allFinite()) linear_ok = false;
            }
            if (!linear_ok) {
                // Dense fallback on the full KKT system.
                fallback_used = true;
                const int mrows = static_cast<int>(poly_.rhs.size());
                Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
                Eigen::MatrixXd Ub = basis_.toDense();
                H = Ub * cdiag.asDiagonal() * Ub.transpose();
                for (int i = 0; i < n; ++i) H(i, i) += 1.0 / (q(i) * q(i));
                Eigen::MatrixXd KKT = Eigen::MatrixXd::Zero(n + mrows, n + mrows);
                KKT.topLeftCorner(n, n) = H;
                KKT.topRightCorner(n, mrows) = Eigen::MatrixXd(poly_.flow.transpose());
                KKT.bottomLeftCorner(mrows, n) = Eigen::MatrixXd(poly_.flow);
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + mrows);
                rhs.head(n) = -g;
                Eigen::VectorXd sol = KKT.partialPivLu().solve(rhs);
                dq = sol.head(n);
                stationarity =
                    (g + poly_.flow.transpose() * sol.tail(mrows)).cwiseAbs().maxCoeff() / t;
                if (!dq.allFinite())
                    throw SolverFailureError("log-barrier step: singular KKT system");
            }

            double decrement2 = -g.dot(dq);
            if (decrement2 <= 1e-12) {
                centered = true;
                break;
            }

            // Fraction to boundary, then Armijo backtracking.
            double theta = 1.0;
            for (int i = 0; i < n; ++i)
                if (dq(i) < 0.0) theta = std::min(theta, -0.995 * q(i) / dq(i));
            double dslack = -poly_.mass_coef.dot(dq);
            if (dslack < 0.0) theta = std::min(theta, -0.995 * slack / dslack);
            if (floored) {
                Eigen::VectorXd du = agg_1_ * dq;
                for (int j = 0; j < pairs; ++j)
                    if (du(j) < 0.0) theta = std::min(theta, -0.995 * u(j) / du(j));
            }
            double base = barrier_value(q, t);
            bool moved = false;
            double accepted = base;
            for (int ls = 0; ls < 60; ++ls) {
                Eigen::VectorXd trial = q + theta * dq;
                double v = barrier_value(trial, t);
                if (v <= base - 1e-4 * theta * decrement2) {
                    q = trial;
                    accepted = v;
                    moved = true;
                    break;
                }
                theta *= 0.5;
            }
            if (!moved) {
                if (warm && t > 1.0) {  // restart the path from scratch
                    t = 1.0;
                    warm = false;
                    stage_iters = 0;
                    continue;
                }
                throw SolverFailureError("log-barrier step: line search stalled");
            }
            if (base - accepted <= 1e-13 * (1.0 + std::abs(base))) centered = true;
        }
        if (t >= t_end) {
            if (centered || ++rounds_at_end >= 3) done = true;
        } else {
            t = std::min(t * 10.0, t_end);
        }
    }

    BarrierResult res;
    res.q = q;
    res.z = agg_w_ * q;
    res.diag.iterations = total_iters;
    res.diag.used_fallback = fallback_used;
    double flow_res = (poly_.flow * q - poly_.rhs).cwiseAbs().maxCoeff();
    double compl_res = 1.0 / t_end;
    res.diag.dual_gradient = stationarity;
    res.diag.kkt_residual = std::max({flow_res, compl_res, stationarity});
    return res;
}

// ---------------------------------------------------------------------------
// Multi-scale experts
// ---------------------------------------------------------------------------

ExpertState multiscale_init(double t_fast, int episodes, double diameter) {
    if (t_fast < 1.0 || episodes < 2)
        throw ParameterViolationError("multiscale_init needs T_fast >= 1 and K >= 2");
    auto ceil_log2 = [](double x) {
        int n = 0;
        double p = 1.0;
        while (p < x) {
            p *= 2.0;
            ++n;
        }
        return n;
    };
    ExpertState st;
    st.j0 = ceil_log2(t_fast) - 1;
    int N = std::max(1, ceil_log2(static_cast<double>(episodes)) - st.j0);
    st.scale.resize(N);
    st.rate.resize(N);
    for (int j = 1; j <= N; ++j) {
        st.scale[j - 1] = std::ldexp(1.0, st.j0 + j);  // 2^{j0+j}
        st.rate[j - 1] =
            1.0 / std::sqrt(st.scale[j - 1] * episodes * std::max(diameter, 16.0));
    }
    st.p.assign(N, 0.0);
    double rest = 0.0;
    for (int j = 2; j <= N; ++j) {
        st.p[j - 1] = st.rate[j - 1] / (N * st.rate[0]);
        rest += st.p[j - 1];
    }
    st.p[0] = 1.0 - rest;
    return st;
}

void multiscale_update(ExpertState& state, const std::vector<double>& losses) {
    const int N = state.size();
    // Log-domain multiplicative update with the squared-loss correction.
    std::vector<double> lp(N);
    for (int j = 0; j < N; ++j) {
        double corrected = losses[j] + 4.0 * state.rate[j] * losses[j] * losses[j];
        lp[j] = clamped_log(state.p[j]) - state.rate[j] * corrected;
    }
    // Weighted-entropy Bregman normalization: find nu with
    // sum_j exp(lp_j - nu eta_j) = 1 by bisection.
    auto total = [&](double nu) {
        double s = 0.0;
        for (int j = 0; j < N; ++j) s += std::exp(lp[j] - nu * state.rate[j]);
        return s;
    };
    double lo = 0.0, hi = 0.0;
    if (total(0.0) >= 1.0) {
        hi = 1.0;
        while (total(hi) > 1.0) hi *= 2.0;
    } else {
        lo = -1.0;
        while (total(lo) < 1.0) lo *= 2.0;
    }
    double nu = 0.0;
    for (int it = 0; it < 200; ++it) {
        nu = 0.5 * (lo + hi);
        double s = total(nu);
        if (std::abs(s - 1.0) <= 1e-12) break;
        if (s > 1.0)
            lo = nu;
        else
            hi = nu;
    }
    double sum = 0.0;
    for (int j = 0; j < N; ++j) {
        state.p[j] = std::exp(lp[j] - nu * state.rate[j]);
        sum += state.p[j];
    }
    for (int j = 0; j < N; ++j) state.p[j] /= sum;
}

}  // namespace ssplab
