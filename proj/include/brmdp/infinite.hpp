#pragma once

#include <Eigen/Core>

#include <functional>
#include <map>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "brmdp/belief_store.hpp"
#include "brmdp/model.hpp"
#include "brmdp/posterior.hpp"
#include "brmdp/risk.hpp"
#include "brmdp/rng.hpp"
#include "brmdp/solvers.hpp"

namespace brmdp {

enum class Backend { exact, nso };

struct OperatorOptions {
    Backend backend = Backend::exact;
    NsoBudget budget;          // nso backend
    std::uint64_t seed = 1;    // nso backend; fixed draws give common random numbers
    double grid = 1e-6;
    double tail_tol = 1e-10;
    /// Map successors outside the universe to the nearest key at the same
    /// state; when false such a successor is an error.
    bool project = true;
};

/// Risk-adjusted Bellman operator on a finite universe of augmented states.
/// Node i is the pair nodes()[i] = (state, belief id).
class OperatorContext {
public:
    OperatorContext(const Environment& env, RiskFunctional rho,
                    const std::vector<std::pair<int, Posterior>>& universe, OperatorOptions opts = {});

    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(nodes_.size()); }
    [[nodiscard]] const std::vector<std::pair<int, BeliefId>>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const Environment& env() const noexcept { return env_; }
    [[nodiscard]] const RiskFunctional& rho() const noexcept { return rho_; }
    [[nodiscard]] std::shared_ptr<BeliefStore> store() const noexcept { return store_; }
    [[nodiscard]] std::size_t projections() const noexcept { return projections_; }

    /// Universe index of (state, belief), projecting when allowed.
    Eigen::Index locate(int state, BeliefId b);

    /// (TV)(i) for every node; greedy actions go to `actions` when non-null.
    Eigen::VectorXd apply(const Eigen::VectorXd& v, Eigen::VectorXi* actions = nullptr);

private:
    struct Branch {
        Eigen::VectorXd cost;            // per support point
        std::vector<Eigen::Index> next;  // per support point
    };
    const Branch& branch(Eigen::Index node, int action);
    double exact_q(Eigen::Index node, int action, const Eigen::VectorXd& v);

    const Environment& env_;
    RiskFunctional rho_;
    OperatorOptions opts_;
    std::shared_ptr<BeliefStore> store_;
    TruncatedSupport support_;
    std::vector<std::pair<int, BeliefId>> nodes_;
    std::unordered_map<std::uint64_t, Eigen::Index> index_;
    std::vector<std::vector<BeliefId>> by_state_;
    std::unordered_map<std::uint64_t, Branch> branches_;
    std::vector<std::map<std::pair<int, std::uint64_t>, Eigen::Index>> nso_next_;
    std::size_t projections_ = 0;
};

/// One application of the operator.
Eigen::VectorXd bellman_apply(OperatorContext& ctx, const Eigen::VectorXd& v, Eigen::VectorXi* actions = nullptr);

struct ValueIterationResult {
    Eigen::VectorXd value;
    Eigen::VectorXi actions;  // greedy in the final value
    int iterations = 0;
    bool converged = false;
    double residual = INFINITY;  // last sup-norm step
};

/// Iterates V <- TV until ||TV - V|| <= eps (1 - gamma) / gamma. `on_sweep`
/// sees (k, T^k V0) after every sweep.
ValueIterationResult value_iteration(OperatorContext& ctx, const Eigen::VectorXd& v0, double eps = 1e-6,
                                     int max_iters = 10000,
                                     const std::function<void(int, const Eigen::VectorXd&)>& on_sweep = nullptr);

/// Augmented states reachable from (initial_state, mu0) in at most `depth`
/// stages over the truncated support, breadth first, capped at `max_size`.
std::vector<std::pair<int, Posterior>> reachable_universe(const Environment& env, const Posterior& mu0, int depth,
                                                          std::size_t max_size, double grid = 1e-6,
                                                          double tail_tol = 1e-10);

}  // namespace brmdp
