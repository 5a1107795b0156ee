#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <optional>
#include <vector>

#include "ssplab/occupancy.hpp"

namespace ssplab {

struct SolveDiagnostics {
    int iterations = 0;
    double kkt_residual = 0.0;   // max of flow / mass / complementarity residuals
    double dual_gradient = 0.0;  // final dual (or reduced) gradient norm
    bool used_fallback = false;
};

struct EntropicResult {
    Eigen::VectorXd q;
    Eigen::VectorXd alpha;  // flow multipliers
    double mu = 0.0;        // total-mass multiplier (>= 0)
    SolveDiagnostics diag;
};

/// Bregman projection onto a FlowPolytope under the weighted negative
/// entropy psi(q) = (1/eta) sum_i w_i q_i ln(w_i q_i), solved by damped
/// Newton on the smooth dual with a projected-gradient fallback. The
/// point to project is given through its logarithm: the minimizer has the
/// closed form q_i = exp(ln_qref_i - (eta/w_i)((E^T alpha)_i + mu m_i)).
///
/// An OMD step q_{k+1} = argmin <q~, c> + D_psi(q~, q~_k) corresponds to
/// ln_qref_i = ln q_k,i - eta c_i; the regularizer minimizer (used for
/// initialization) to ln_qref_i = -1 - ln w_i.
class EntropicSolver {
  public:
    explicit EntropicSolver(FlowPolytope poly);

    EntropicResult project(const Eigen::VectorXd& ln_qref, double eta);

    const FlowPolytope& polytope() const { return poly_; }
    /// Forget the previous solution (projections are otherwise
    /// warm-started from the last call's dual variables).
    void reset();

  private:
    FlowPolytope poly_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool analyzed_ = false;
    std::optional<Eigen::VectorXd> warm_alpha_;
    double warm_mu_ = 0.0;
};

/// Objective value <q~, c> + D_psi(q~, q~_k) of a weighted-entropy OMD
/// step, evaluated in collapsed coordinates (used by the optimality
/// audits). q_prev is clamped to 1e-300 before logarithms.
double entropic_objective(const FlowPolytope& poly, const Eigen::VectorXd& cost,
                          const Eigen::VectorXd& q_prev, double eta, const Eigen::VectorXd& q);

/// One entropic OMD step on the flat space Delta(T).
EntropicResult omd_step_entropy(EntropicSolver& solver, const Eigen::VectorXd& q_prev,
                                const Eigen::VectorXd& cost, double eta);

/// One entropic OMD step on the skewed layered space Omega (the skew is
/// baked into the polytope weights; lambda = 0 recovers the plain
/// loop-free step).
inline EntropicResult omd_step_skewed(EntropicSolver& solver, const Eigen::VectorXd& q_prev,
                                      const Eigen::VectorXd& cost, double eta) {
    return omd_step_entropy(solver, q_prev, cost, eta);
}

/// Loss side of a log-barrier OMD step over aggregated variables
/// z(s,a) = sum_h (1+lambda h) q(s,a,h).
struct BarrierObjective {
    Eigen::VectorXd loss;      // per pair; cost estimate, possibly bias-corrected
    Eigen::VectorXd z_prev;    // previous aggregates (ignored in init mode)
    Eigen::VectorXd inv_rate;  // 1/eta(s,a) per pair
    bool init_mode = false;    // minimize the regularizer alone
};

struct BarrierResult {
    Eigen::VectorXd q;  // collapsed layered variables
    Eigen::VectorXd z;  // aggregates A_w q
    SolveDiagnostics diag;
};

/// Interior-point solver for OMD steps with the aggregated log-barrier
/// regularizer psi(q~) = sum_(s,a) (1/eta(s,a)) ln(1/q~(s,a)): the
/// objective lives on the aggregates while the constraints (flows, total
/// mass, optional per-pair floors) live on the layered variables. Path
/// following drives the barrier parameter until every complementarity
/// product is below 1e-10.
class BarrierStepper {
  public:
    BarrierStepper(FlowPolytope poly, Eigen::SparseMatrix<double> agg_weighted,
                   Eigen::SparseMatrix<double> agg_plain, double floor);

    /// q_start must be strictly feasible; subsequent calls may pass the
    /// previous result for warm starting.
    BarrierResult step(const BarrierObjective& objective, const Eigen::VectorXd& q_start,
                       bool warm = false);

    const FlowPolytope& polytope() const { return poly_; }
    double floor() const { return floor_; }

  private:
    FlowPolytope poly_;
    Eigen::SparseMatrix<double> agg_w_;   // m~ x n, skew-weighted
    Eigen::SparseMatrix<double> agg_1_;   // m~ x n, plain (floor constraints)
    double floor_;
    Eigen::SparseMatrix<double> basis_;   // U = [A_w^T | mass | A_1^T]
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool analyzed_ = false;
};

/// Objective value of the aggregated log-barrier step at aggregates z.
double barrier_objective_value(const BarrierObjective& objective, const Eigen::VectorXd& z);

/// Multi-scale experts state: one expert per candidate hitting-time scale
/// b(j) = 2^{j0+j}, with per-expert rates eta_j = 1/sqrt(b(j) K max(D,16)).
struct ExpertState {
    int j0 = 0;
    std::vector<double> scale;  // b(j)
    std::vector<double> rate;   // eta_j
    std::vector<double> p;      // current distribution

    int size() const { return static_cast<int>(p.size()); }
};

/// j0 = ceil(log2 T^{pi_f}(s0)) - 1, N = max(1, ceil(log2 K) - j0),
/// p_1(j) = eta_j / (N eta_1) for j != 1.
ExpertState multiscale_init(double t_fast, int episodes, double diameter);

/// OMD step with the weighted negative entropy over the simplex: the
/// multiplicative update with losses l + a, a_j = 4 eta_j l_j^2, followed
/// by the Bregman normalization (1-D dual bisection, tolerance 1e-12).
void multiscale_update(ExpertState& state, const std::vector<double>& losses);

}  // namespace ssplab
