#include "brmdp/infinite.hpp"

#include <cmath>
#include <cstring>
#include <deque>

namespace brmdp {

namespace {

std::uint64_t pack(int s, std::uint32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) | b;
}

std::uint64_t bits(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

bool better(double v, int a, double best, int best_a) {
    const double tol = 1e-9 * std::max(1.0, std::abs(best));
    if (v < best - tol) return true;
    return v <= best + tol && a < best_a;
}

TruncatedSupport support_for(const ParametricFamily& family, double tail_tol) {
    const auto& atoms = family.space().atoms();
    if (family.is_discrete()) return truncate_support(family, atoms, tail_tol);
    if (atoms.size() == 1) return quantile_support(family, atoms[0], 256);
    throw ConfigError("the exact backend over a continuous family needs a single-atom Theta");
}

}  // namespace

OperatorContext::OperatorContext(const Environment& env, RiskFunctional rho,
                                 const std::vector<std::pair<int, Posterior>>& universe, OperatorOptions opts)
    : env_(env), rho_(rho), opts_(opts) {
    env.validate();
    if (env.horizon) throw ConfigError("the infinite-horizon operator needs an environment without a horizon");
    if (!(env.discount > 0.0 && env.discount < 1.0))
        throw ConfigError("the infinite-horizon operator needs a discount in (0, 1)");
    if (universe.empty()) throw ConfigError("the universe is empty");
    store_ = std::make_shared<BeliefStore>(env.family, opts.grid);
    by_state_.resize(static_cast<std::size_t>(env.num_states));

    if (opts.backend == Backend::exact) {
        if (!env.family.space().is_finite()) throw ConfigError("the exact backend needs a finite parameter space");
        support_ = support_for(env.family, opts.tail_tol);
        for (int s = 0; s < env.num_states; ++s) {
            if (env.is_terminal(s)) continue;
            for (int a : env.actions[static_cast<std::size_t>(s)]) {
                const Eigen::Index m = env.observes_at(s) ? support_.values.size() : 1;
                for (Eigen::Index j = 0; j < m; ++j) {
                    const double xi = env.observes_at(s) ? support_.values[j] : NAN;
                    if (std::abs(step(env, s, a, xi).cost) > env.cost_bound + 1e-12)
                        throw ConfigError("stage cost exceeds the declared bound Z");
                }
            }
        }
    }

    for (const auto& [s, mu] : universe) {
        if (s < 0 || s >= env.num_states) throw ConfigError("universe state out of range");
        if (opts.backend == Backend::exact && !std::holds_alternative<FinitePosterior>(mu))
            throw ConfigError("the exact backend needs finite posteriors");
        const BeliefId b = store_->intern(mu);
        const auto key = pack(s, b);
        if (index_.contains(key)) throw ConfigError("duplicate augmented state in the universe");
        index_.emplace(key, static_cast<Eigen::Index>(nodes_.size()));
        nodes_.emplace_back(s, b);
        by_state_[static_cast<std::size_t>(s)].push_back(b);
    }
    nso_next_.resize(nodes_.size());
}

Eigen::Index OperatorContext::locate(int state, BeliefId b) {
    if (env_.is_terminal(state)) return -1;
    if (auto it = index_.find(pack(state, b)); it != index_.end()) return it->second;
    if (!opts_.project) throw ConfigError("successor leaves the universe and projection is disabled");
    const auto& cands = by_state_.at(static_cast<std::size_t>(state));
    if (cands.empty()) throw ConfigError("no universe node at state " + std::to_string(state));
    const auto& key = store_->key(b);
    Eigen::Index best = -1;
    double best_d = INFINITY;
    for (BeliefId c : cands) {
        const double d = key_distance(store_->key(c), key);
        const Eigen::Index idx = index_.at(pack(state, c));
        if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
        }
    }
    if (best < 0) throw ConfigError("no comparable universe node at state " + std::to_string(state));
    ++projections_;
    index_.emplace(pack(state, b), best);  // memoize the projection
    return best;
}

const OperatorContext::Branch& OperatorContext::branch(Eigen::Index node, int action) {
    const auto key = pack(static_cast<int>(node), static_cast<std::uint32_t>(action));
    if (auto it = branches_.find(key); it != branches_.end()) return it->second;
    const auto [s, b] = nodes_[static_cast<std::size_t>(node)];
    Branch br;
    if (!env_.observes_at(s)) {
        const auto r = step(env_, s, action, NAN);
        br.cost = Eigen::VectorXd::Constant(1, r.cost);
        br.next = {locate(r.next_state, b)};
    } else {
        const auto& w = std::get<FinitePosterior>(store_->posterior(b)).weights;
        const Eigen::VectorXd mix = support_.probs.transpose() * w;
        const auto m = support_.values.size();
        br.cost.resize(m);
        br.next.assign(static_cast<std::size_t>(m), -1);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto r = step(env_, s, action, support_.values[j]);
            br.cost[j] = r.cost;
            if (mix[j] > 0.0) br.next[static_cast<std::size_t>(j)] = locate(r.next_state, store_->successor(b, support_.values[j]));
        }
    }
    return branches_.emplace(key, std::move(br)).first->second;
}

double OperatorContext::exact_q(Eigen::Index node, int action, const Eigen::VectorXd& v) {
    const Branch& br = branch(node, action);
    Eigen::VectorXd g = br.cost;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        const Eigen::Index nx = br.next[static_cast<std::size_t>(j)];
        if (nx >= 0) g[j] += env_.discount * v[nx];
    }
    const auto [s, b] = nodes_[static_cast<std::size_t>(node)];
    if (!env_.observes_at(s)) return g[0];
    const auto& w = std::get<FinitePosterior>(store_->posterior(b)).weights;
    const Eigen::VectorXd per_atom = support_.probs * g;
    return brmdp::apply(rho_, per_atom, w);
}

Eigen::VectorXd OperatorContext::apply(const Eigen::VectorXd& v, Eigen::VectorXi* actions) {
    if (v.size() != size()) throw ConfigError("value vector does not match the universe");
    Eigen::VectorXd out(size());
    if (actions) actions->setConstant(size(), -1);
    const Stream root = Stream::keyed({opts_.seed});
    for (Eigen::Index i = 0; i < size(); ++i) {
        const auto [s, b] = nodes_[static_cast<std::size_t>(i)];
        if (env_.is_terminal(s)) {
            out[i] = 0.0;
            continue;
        }
        double best = INFINITY;
        int best_a = -1;
        if (opts_.backend == Backend::exact) {
            for (int a : env_.actions[static_cast<std::size_t>(s)]) {
                const double q = exact_q(i, a, v);
                if (best_a < 0 || better(q, a, best, best_a)) {
                    best = q;
                    best_a = a;
                }
            }
        } else {
            auto& cache = nso_next_[static_cast<std::size_t>(i)];
            const NextValue next = [&, b = b](int, int s2, double xi) {
                const std::pair<int, std::uint64_t> k{s2, bits(xi)};
                auto it = cache.find(k);
                if (it == cache.end()) {
                    const BeliefId nb = std::isnan(xi) ? b : store_->successor(b, xi);
                    it = cache.emplace(k, locate(s2, nb)).first;
                }
                return it->second < 0 ? 0.0 : v[it->second];
            };
            const auto r = nso_stage(env_, s, store_->posterior(b), rho_, next, opts_.budget,
                                     root.child(static_cast<std::uint64_t>(i)));
            best = r.value;
            best_a = r.action;
        }
        out[i] = best;
        if (actions) (*actions)[i] = best_a;
    }
    return out;
}

Eigen::VectorXd bellman_apply(OperatorContext& ctx, const Eigen::VectorXd& v, Eigen::VectorXi* actions) {
    return ctx.apply(v, actions);
}

ValueIterationResult value_iteration(OperatorContext& ctx, const Eigen::VectorXd& v0, double eps, int max_iters,
                                     const std::function<void(int, const Eigen::VectorXd&)>& on_sweep) {
    if (!(eps > 0.0)) throw ConfigError("tolerance must be positive");
    if (max_iters < 1) throw ConfigError("max iterations must be positive");
    const double gamma = ctx.env().discount;
    const double threshold = eps * (1.0 - gamma) / gamma;
    ValueIterationResult res;
    res.value = v0;
    for (int k = 1; k <= max_iters; ++k) {
        Eigen::VectorXd tv = ctx.apply(res.value);
        res.residual = (tv - res.value).lpNorm<Eigen::Infinity>();
        res.value = std::move(tv);
        res.iterations = k;
        if (on_sweep) on_sweep(k, res.value);
        if (res.residual <= threshold) {
            res.converged = true;
            break;
        }
    }
    ctx.apply(res.value, &res.actions);
    return res;
}

std::vector<std::pair<int, Posterior>> reachable_universe(const Environment& env, const Posterior& mu0, int depth,
                                                          std::size_t max_size, double grid, double tail_tol) {
    if (!std::holds_alternative<FinitePosterior>(mu0)) throw ConfigError("universe enumeration needs a finite posterior");
    if (depth < 0) throw ConfigError("universe depth must be non-negative");
    if (max_size < 1) throw ConfigError("universe size must be positive");
    const TruncatedSupport sup = support_for(env.family, tail_tol);
    BeliefStore store(env.family, grid);
    std::vector<std::pair<int, Posterior>> out;
    std::unordered_map<std::uint64_t, bool> seen;
    std::deque<std::tuple<int, BeliefId, int>> queue;

    const auto push = [&](int s, BeliefId b, int d) {
        if (env.is_terminal(s) || out.size() >= max_size) return;
        if (!seen.emplace(pack(s, b), true).second) return;
        out.emplace_back(s, store.posterior(b));
        queue.emplace_back(s, b, d);
    };
    push(env.initial_state, store.intern(mu0), 0);
    while (!queue.empty()) {
        const auto [s, b, d] = queue.front();
        queue.pop_front();
        if (d >= depth) continue;
        for (int a : env.actions[static_cast<std::size_t>(s)]) {
            if (!env.observes_at(s)) {
                push(step(env, s, a, NAN).next_state, b, d + 1);
                continue;
            }
            const auto& w = std::get<FinitePosterior>(store.posterior(b)).weights;
            const Eigen::VectorXd mix = sup.probs.transpose() * w;
            for (Eigen::Index j = 0; j < sup.values.size(); ++j) {
                if (!(mix[j] > 0.0)) continue;
                push(step(env, s, a, sup.values[j]).next_state, store.successor(b, sup.values[j]), d + 1);
            }
        }
    }
    return out;
}

}  // namespace brmdp
