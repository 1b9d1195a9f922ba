#include "brmdp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brmdp {

namespace {

std::uint64_t pack(int s, int a) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) | static_cast<std::uint32_t>(a);
}

bool better(double v, int a, double best, int best_a) {
    const double tol = 1e-9 * std::max(1.0, std::abs(best));
    if (v < best - tol) return true;
    return v <= best + tol && a < best_a;
}

}  // namespace

ExactSolver::ExactSolver(const Environment& env, RiskFunctional rho, ExactOptions opts)
    : env_(env), rho_(rho), opts_(opts) {
    env.validate();
    if (!env.horizon) throw ConfigError("exact DP needs a finite horizon");
    if (!env.family.space().is_finite()) throw ConfigError("exact DP needs a finite parameter space");
    horizon_ = *env.horizon;
    const auto& atoms = env.family.space().atoms();
    if (env.family.is_discrete()) {
        support_ = truncate_support(env.family, atoms, opts.tail_tol);
    } else if (atoms.size() == 1) {
        support_ = quantile_support(env.family, atoms[0], opts.quadrature_points);
    } else {
        throw ConfigError("exact DP over a continuous family needs a single-atom Theta");
    }
    store_ = std::make_shared<BeliefStore>(env.family, opts.grid);
    table_ = std::make_shared<ValueTable>(store_, horizon_);
}

const ExactSolver::Kernel& ExactSolver::kernel(int state, int action) {
    const auto key = pack(state, action);
    if (auto it = kernels_.find(key); it != kernels_.end()) return it->second;
    const auto m = support_.values.size();
    Kernel k;
    k.cost.resize(m);
    k.next.resize(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto r = step(env_, state, action, support_.values[j]);
        k.cost[j] = r.cost;
        k.next[static_cast<std::size_t>(j)] = r.next_state;
    }
    return kernels_.emplace(key, std::move(k)).first->second;
}

double ExactSolver::lower_bound(int t, int state, BeliefId b, int action) {
    if (!opts_.prune || !env_.value_lower_bound) return -INFINITY;
    const int rem = horizon_ - t - 1;
    const auto next_lb = [&](int s2) {
        return (rem <= 0 || env_.is_terminal(s2)) ? 0.0 : env_.value_lower_bound(s2, rem);
    };
    if (!env_.observes_at(state)) {
        const auto r = step(env_, state, action, NAN);
        return r.cost + env_.discount * next_lb(r.next_state);
    }
    const auto& k = kernel(state, action);
    const auto& w = std::get<FinitePosterior>(store_->posterior(b)).weights;
    const Eigen::VectorXd ec = support_.probs * k.cost;
    double lb = INFINITY;
    for (int s2 : k.next) lb = std::min(lb, next_lb(s2));
    return apply(rho_, ec, w) + env_.discount * lb;
}

double ExactSolver::q_value(int t, int state, BeliefId b, int action) {
    if (!env_.observes_at(state)) {
        const auto r = step(env_, state, action, NAN);
        return r.cost + env_.discount * value(t + 1, r.next_state, b).value;
    }
    const auto& k = kernel(state, action);
    const Eigen::VectorXd w = std::get<FinitePosterior>(store_->posterior(b)).weights;
    const Eigen::VectorXd mix = support_.probs.transpose() * w;
    Eigen::VectorXd g = k.cost;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (!(mix[j] > 0.0)) continue;  // no atom in the belief can produce this xi
        const BeliefId nb = store_->successor(b, support_.values[j]);
        g[j] += env_.discount * value(t + 1, k.next[static_cast<std::size_t>(j)], nb).value;
    }
    const Eigen::VectorXd per_atom = support_.probs * g;
    return apply(rho_, per_atom, w);
}

StageEntry ExactSolver::value(int t, int state, BeliefId b) {
    if (t >= horizon_ || env_.is_terminal(state)) return {0.0, -1};
    if (const auto* e = table_->get(t, state, b)) return *e;

    const auto& acts = env_.actions[static_cast<std::size_t>(state)];
    std::vector<double> lb(acts.size());
    for (std::size_t i = 0; i < acts.size(); ++i) lb[i] = lower_bound(t, state, b, acts[i]);
    std::vector<std::size_t> order(acts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return lb[x] < lb[y]; });

    double best = INFINITY;
    int best_a = -1;
    for (auto i : order) {
        if (best_a >= 0 && lb[i] > best + 1e-9 * std::max(1.0, std::abs(best))) {
            ++stats_.pruned_actions;
            continue;
        }
        const double q = q_value(t, state, b, acts[i]);
        if (best_a < 0 || better(q, acts[i], best, best_a)) {
            best = q;
            best_a = acts[i];
        }
    }
    if (table_->size() >= opts_.max_states)
        throw ConfigError("exact DP exceeded the augmented-state cap of " + std::to_string(opts_.max_states));
    const StageEntry e{best, best_a};
    table_->set(t, state, b, e);
    return e;
}

Eigen::VectorXd ExactSolver::q_values(int t, int state, BeliefId b) {
    const auto& acts = env_.actions.at(static_cast<std::size_t>(state));
    Eigen::VectorXd q(static_cast<Eigen::Index>(acts.size()));
    for (std::size_t i = 0; i < acts.size(); ++i)
        q[static_cast<Eigen::Index>(i)] = q_value(t, state, b, acts[i]);
    return q;
}

SolveResult exact_dp(const Environment& env, const Posterior& mu0, const RiskFunctional& rho,
                     const ExactOptions& opts) {
    if (!std::holds_alternative<FinitePosterior>(mu0)) throw ConfigError("exact DP needs a finite posterior");
    ExactSolver solver(env, rho, opts);
    const BeliefId root = solver.intern(mu0);
    const StageEntry e = solver.value(0, env.initial_state, root);
    SolveStats stats = solver.stats();
    stats.augmented_states = solver.table()->size();
    stats.beliefs = solver.store()->size();
    return SolveResult{solver.table(), Policy(solver.table()), e.value, e.action, root, stats};
}

}  // namespace brmdp
