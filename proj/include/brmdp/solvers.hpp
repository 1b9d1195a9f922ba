#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "brmdp/belief_store.hpp"
#include "brmdp/model.hpp"
#include "brmdp/posterior.hpp"
#include "brmdp/risk.hpp"
#include "brmdp/rng.hpp"
#include "brmdp/value_table.hpp"

namespace brmdp {

struct SolveStats {
    std::size_t augmented_states = 0;
    std::size_t beliefs = 0;
    std::size_t pruned_actions = 0;
};

struct SolveResult {
    std::shared_ptr<ValueTable> table;
    Policy policy;
    double value = 0.0;  // stage-0 value at the root
    int action = -1;     // stage-0 action at the root
    BeliefId root = 0;
    SolveStats stats;
};

// ---------------------------------------------------------------------------
// Exact dynamic programming over the reachable augmented states.

struct ExactOptions {
    double grid = 1e-6;
    double tail_tol = 1e-10;
    /// Cells used to discretize a continuous family (single-atom Theta only).
    int quadrature_points = 256;
    std::size_t max_states = 5'000'000;
    bool prune = true;
};

/// Memoized backward recursion from a root; values are computed on demand so
/// callers can also query single nodes (used as an oracle by the tests).
class ExactSolver {
public:
    ExactSolver(const Environment& env, RiskFunctional rho, ExactOptions opts = {});

    BeliefId intern(const Posterior& mu) { return store_->intern(mu); }
    /// Optimal (value, action) at stage t; (0, -1) past the horizon or at a
    /// terminal state.
    StageEntry value(int t, int state, BeliefId b);
    /// Q-values of every admissible action, in the order of env.actions[state].
    Eigen::VectorXd q_values(int t, int state, BeliefId b);

    [[nodiscard]] const TruncatedSupport& support() const noexcept { return support_; }
    [[nodiscard]] std::shared_ptr<BeliefStore> store() const noexcept { return store_; }
    [[nodiscard]] std::shared_ptr<ValueTable> table() const noexcept { return table_; }
    [[nodiscard]] const SolveStats& stats() const noexcept { return stats_; }

private:
    struct Kernel {
        Eigen::VectorXd cost;    // per support point
        std::vector<int> next;   // per support point
    };
    const Kernel& kernel(int state, int action);
    double lower_bound(int t, int state, BeliefId b, int action);
    double q_value(int t, int state, BeliefId b, int action);

    const Environment& env_;
    RiskFunctional rho_;
    ExactOptions opts_;
    int horizon_;
    TruncatedSupport support_;
    std::shared_ptr<BeliefStore> store_;
    std::shared_ptr<ValueTable> table_;
    std::unordered_map<std::uint64_t, Kernel> kernels_;
    SolveStats stats_;
};

SolveResult exact_dp(const Environment& env, const Posterior& mu0, const RiskFunctional& rho,
                     const ExactOptions& opts = {});

// ---------------------------------------------------------------------------
// Nested simulation optimization.

struct NsoBudget {
    int outer = 100;  // N: theta draws per action
    int inner = 100;  // K: xi draws per theta
    /// Reuse one set of draws for every action at a node instead of drawing
    /// per action.
    bool common_draws = false;
};

struct StageResult {
    double value = 0.0;
    int action = -1;
    Eigen::VectorXd q;  // per admissible action; +inf where pruned
};

/// Value of (t+1, next_state, updated belief) after taking `action` and
/// observing xi (xi is NaN at non-observing states).
using NextValue = std::function<double(int action, int next_state, double xi)>;
/// Lower bound on the value of (t+1, next_state, any belief).
using NextBound = std::function<double(int next_state)>;

/// One NSO stage at (state, mu) given a next-stage value oracle. If `bound` is
/// set, actions whose sampled lower bound already exceeds the incumbent are
/// skipped; this never changes the returned value or action.
StageResult nso_stage(const Environment& env, int state, const Posterior& mu, const RiskFunctional& rho,
                      const NextValue& next, NsoBudget budget, Stream stream,
                      const NextBound& bound = nullptr);

/// Convenience form whose oracle receives the updated posterior directly.
StageResult nso_stage(const Environment& env, int state, const Posterior& mu, const RiskFunctional& rho,
                      const std::function<double(int next_state, const Posterior& next)>& v_next,
                      NsoBudget budget, Stream stream);

struct NsoOptions {
    NsoBudget budget;
    double grid = 1e-6;
    bool snap = false;  // snap normal-mean beliefs to grid-cell centres
    std::size_t max_states = 5'000'000;
    bool prune = true;
};

SolveResult nso_solve(const Environment& env, const Posterior& mu0, const RiskFunctional& rho,
                      const NsoOptions& opts, Stream stream);

// ---------------------------------------------------------------------------
// UCB adaptive sampling (expectation only, finite Theta).

struct UcbStageResult {
    double value = 0.0;
    int action = -1;  // most-played action, ties to the lowest index
    Eigen::VectorXd q;
    Eigen::VectorXi counts;
};

/// `cost_scale` multiplies Q-estimates inside the selection index only.
UcbStageResult ucb_stage(const Environment& env, int state, const FinitePosterior& mu,
                         const NextValue& next, int budget, double cost_scale, Stream stream);

struct UcbOptions {
    int budget = 1000;  // N_t, same at every stage
    /// Scale applied to costs in the selection index; <= 0 selects
    /// 1 / (cost_bound * horizon).
    double cost_scale = 0.0;
    double grid = 1e-6;
    std::size_t max_states = 5'000'000;
};

[[nodiscard]] double default_ucb_scale(const Environment& env);

SolveResult ucb_solve(const Environment& env, const Posterior& mu0, const UcbOptions& opts, Stream stream);

}  // namespace brmdp
