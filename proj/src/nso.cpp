#include "brmdp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brmdp {

namespace {

bool better(double v, int a, double best, int best_a) {
    const double tol = 1e-9 * std::max(1.0, std::abs(best));
    if (v < best - tol) return true;
    return v <= best + tol && a < best_a;
}

// Replays the (theta_i, xi_i1..xi_iK) draws of one outer sample; a pure
// function of the stream so both passes see identical numbers.
template <class F>
void for_each_draw(const Environment& env, const Posterior& mu, const Stream& action_stream, int i,
                   Eigen::VectorXd& buf, F&& f) {
    Stream s = action_stream.child(static_cast<std::uint64_t>(i));
    const double theta = sample_theta(mu, s);
    env.family.sample(theta, s, buf);
    for (double xi : buf) f(xi);
}

}  // namespace

StageResult nso_stage(const Environment& env, int state, const Posterior& mu, const RiskFunctional& rho,
                      const NextValue& next, NsoBudget budget, Stream stream, const NextBound& bound) {
    if (budget.outer < 1 || budget.inner < 1) throw ConfigError("NSO budgets must be positive");
    const auto& acts = env.actions.at(static_cast<std::size_t>(state));
    const auto na = static_cast<Eigen::Index>(acts.size());
    StageResult out;
    out.q = Eigen::VectorXd::Constant(na, INFINITY);
    const double gamma = env.discount;

    if (!env.observes_at(state)) {
        for (Eigen::Index i = 0; i < na; ++i) {
            const int a = acts[static_cast<std::size_t>(i)];
            const auto r = step(env, state, a, NAN);
            out.q[i] = r.cost + gamma * next(a, r.next_state, NAN);
            if (out.action < 0 || better(out.q[i], a, out.value, out.action)) {
                out.value = out.q[i];
                out.action = a;
            }
        }
        return out;
    }

    const int n = budget.outer, k = budget.inner;
    Eigen::VectorXd buf(k);
    Eigen::VectorXd lb = Eigen::VectorXd::Constant(na, -INFINITY);
    if (bound) {
        Eigen::VectorXd cbar(n);
        for (Eigen::Index ai = 0; ai < na; ++ai) {
            const int a = acts[static_cast<std::size_t>(ai)];
            const Stream as = budget.common_draws ? stream : stream.child(static_cast<std::uint64_t>(a));
            double min_next = INFINITY;
            for (int i = 0; i < n; ++i) {
                double sum = 0.0;
                for_each_draw(env, mu, as, i, buf, [&](double xi) {
                    const auto r = step(env, state, a, xi);
                    sum += r.cost;
                    min_next = std::min(min_next, bound(r.next_state));
                });
                cbar[i] = sum / k;
            }
            lb[ai] = apply(rho, cbar) + gamma * min_next;
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(na));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return lb[x] < lb[y]; });

    Eigen::VectorXd hbar(n);
    for (auto ai : order) {
        const int a = acts[static_cast<std::size_t>(ai)];
        if (out.action >= 0 && lb[ai] > out.value + 1e-9 * std::max(1.0, std::abs(out.value))) continue;
        const Stream as = budget.common_draws ? stream : stream.child(static_cast<std::uint64_t>(a));
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for_each_draw(env, mu, as, i, buf, [&](double xi) {
                const auto r = step(env, state, a, xi);
                sum += r.cost + gamma * next(a, r.next_state, xi);
            });
            hbar[i] = sum / k;
        }
        out.q[ai] = apply(rho, hbar);
        if (out.action < 0 || better(out.q[ai], a, out.value, out.action)) {
            out.value = out.q[ai];
            out.action = a;
        }
    }
    return out;
}

StageResult nso_stage(const Environment& env, int state, const Posterior& mu, const RiskFunctional& rho,
                      const std::function<double(int, const Posterior&)>& v_next, NsoBudget budget,
                      Stream stream) {
    const NextValue next = [&](int, int s2, double xi) {
        return std::isnan(xi) ? v_next(s2, mu) : v_next(s2, update(mu, env.family, xi));
    };
    return nso_stage(env, state, mu, rho, next, budget, stream);
}

namespace {

class NsoSolver {
public:
    NsoSolver(const Environment& env, const RiskFunctional& rho, const NsoOptions& opts, Stream stream)
        : env_(env), rho_(rho), opts_(opts), stream_(stream), horizon_(*env.horizon),
          store_(std::make_shared<BeliefStore>(env.family, opts.grid, opts.snap)),
          table_(std::make_shared<ValueTable>(store_, horizon_)) {}

    StageEntry value(int t, int s, BeliefId b) {
        if (t >= horizon_ || env_.is_terminal(s)) return {0.0, -1};
        if (const auto* e = table_->get(t, s, b)) return *e;

        const NextValue next = [&](int, int s2, double xi) {
            const BeliefId nb = std::isnan(xi) ? b : store_->successor(b, xi);
            return value(t + 1, s2, nb).value;
        };
        NextBound bound;
        if (opts_.prune && env_.pathwise_lower_bound) {
            const int rem = horizon_ - t - 1;
            bound = [this, rem](int s2) {
                return (rem <= 0 || env_.is_terminal(s2)) ? 0.0 : env_.pathwise_lower_bound(s2, rem);
            };
        }
        Stream node = stream_;
        Posterior mu;
        if (env_.observes_at(s)) {
            node = stream_.child({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(s),
                                  PosteriorKeyHash{}(store_->key(b))});
            // Copy: the store may reallocate while the stage recurses.
            mu = store_->posterior(b);
        }
        const StageResult r = nso_stage(env_, s, mu, rho_, next, opts_.budget, node, bound);
        if (table_->size() >= opts_.max_states)
            throw ConfigError("NSO exceeded the augmented-state cap of " + std::to_string(opts_.max_states));
        const StageEntry e{r.value, r.action};
        table_->set(t, s, b, e);
        return e;
    }

    const Environment& env_;
    RiskFunctional rho_;
    NsoOptions opts_;
    Stream stream_;
    int horizon_;
    std::shared_ptr<BeliefStore> store_;
    std::shared_ptr<ValueTable> table_;
};

}  // namespace

SolveResult nso_solve(const Environment& env, const Posterior& mu0, const RiskFunctional& rho,
                      const NsoOptions& opts, Stream stream) {
    env.validate();
    if (!env.horizon) throw ConfigError("nso_solve needs a finite horizon");
    NsoSolver solver(env, rho, opts, stream);
    const BeliefId root = solver.store_->intern(mu0);
    const StageEntry e = solver.value(0, env.initial_state, root);
    SolveStats stats;
    stats.augmented_states = solver.table_->size();
    stats.beliefs = solver.store_->size();
    return SolveResult{solver.table_, Policy(solver.table_), e.value, e.action, root, stats};
}

}  // namespace brmdp
