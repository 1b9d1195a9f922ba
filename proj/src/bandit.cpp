#include "brmdp/bandit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "brmdp/model.hpp"

namespace brmdp {

CostSampler CostSampler::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bernoulli p must lie in [0, 1]");
    CostSampler c;
    c.kind = Kind::bernoulli;
    c.p = p;
    return c;
}

CostSampler CostSampler::uniform(double lo, double hi) {
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("uniform costs need 0 <= lo <= hi <= 1");
    CostSampler c;
    c.kind = Kind::uniform;
    c.lo = lo;
    c.hi = hi;
    return c;
}

CostSampler CostSampler::discrete(Eigen::VectorXd values, Eigen::VectorXd probs) {
    if (values.size() == 0 || values.size() != probs.size())
        throw ConfigError("discrete costs need matching non-empty values and probs");
    if ((values.array() < 0.0).any() || (values.array() > 1.0).any())
        throw ConfigError("discrete cost values must lie in [0, 1]");
    if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > 1e-9)
        throw ConfigError("discrete cost probs must form a probability vector");
    CostSampler c;
    c.kind = Kind::discrete;
    c.values = std::move(values);
    c.probs = std::move(probs);
    return c;
}

double CostSampler::mean() const {
    switch (kind) {
        case Kind::bernoulli: return p;
        case Kind::uniform: return 0.5 * (lo + hi);
        case Kind::discrete: return values.dot(probs);
    }
    return NAN;
}

double CostSampler::sample(Stream& stream) const {
    const double u = stream.uniform();
    switch (kind) {
        case Kind::bernoulli: return u < p ? 1.0 : 0.0;
        case Kind::uniform: return lo + (hi - lo) * u;
        case Kind::discrete: {
            double c = 0.0;
            for (Eigen::Index i = 0; i < probs.size(); ++i) {
                c += probs[i];
                if (u < c) return values[i];
            }
            return values[values.size() - 1];
        }
    }
    return NAN;
}

Eigen::VectorXd BanditInstance::scenario_weights() const {
    const int k = scenarios();
    if (weights.size() == 0) return Eigen::VectorXd::Constant(k, 1.0 / k);
    return weights;
}

Eigen::VectorXd BanditInstance::values() const {
    const Eigen::VectorXd w = scenario_weights();
    Eigen::VectorXd v(machines());
    Eigen::VectorXd m(scenarios());
    for (int i = 0; i < machines(); ++i) {
        for (int j = 0; j < scenarios(); ++j) m[j] = costs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].mean();
        v[i] = apply(rho, m, w);
    }
    return v;
}

void BanditInstance::validate() const {
    if (costs.empty()) throw ConfigError("a bandit needs at least one machine");
    const auto k = costs[0].size();
    if (k == 0) throw ConfigError("a bandit machine needs at least one scenario");
    for (const auto& row : costs)
        if (row.size() != k) throw ConfigError("every machine needs the same number of scenarios");
    if (weights.size() != 0) {
        if (weights.size() != static_cast<Eigen::Index>(k))
            throw ConfigError("scenario weights must have one entry per scenario");
        if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
            throw ConfigError("scenario weights must form a probability vector");
    }
}

RegretLedger::RegretLedger(const BanditInstance& inst)
    : plays(Eigen::VectorXi::Zero(inst.machines())),
      sums(Eigen::MatrixXd::Zero(inst.machines(), inst.scenarios())),
      values(inst.values()) {
    v_star = values.minCoeff();
    gaps = values.array() - v_star;
}

void RegretLedger::record(int machine, const Eigen::Ref<const Eigen::VectorXd>& scenario_costs,
                          const Eigen::Ref<const Eigen::VectorXd>& weights) {
    ++plays[machine];
    sums.row(machine) += scenario_costs.transpose();
    ++total;
    realized_cost += weights.dot(scenario_costs);
}

BanditRun play_ucb(const BanditInstance& inst, long long n, Stream stream) {
    inst.validate();
    const int L = inst.machines(), k = inst.scenarios();
    if (n < L) throw ConfigError("UCB needs at least one play per machine");
    const Eigen::VectorXd w = inst.scenario_weights();
    BanditRun run{{}, RegretLedger(inst)};
    run.history.reserve(static_cast<std::size_t>(n));
    Eigen::VectorXd x(k), avg(k);

    const auto play = [&](int i) {
        for (int j = 0; j < k; ++j)
            x[j] = inst.costs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].sample(stream);
        run.ledger.record(i, x, w);
        run.history.push_back(i);
    };

    for (int i = 0; i < L; ++i) play(i);
    for (long long t = L; t < n; ++t) {
        const double log_n = std::log(static_cast<double>(run.ledger.total));
        int best = 0;
        double best_index = INFINITY;
        for (int i = 0; i < L; ++i) {
            const double ni = run.ledger.plays[i];
            avg = run.ledger.sums.row(i).transpose() / ni;
            const double index = apply(inst.rho, avg, w) - std::sqrt(2.0 * log_n / ni);
            if (index < best_index) {
                best_index = index;
                best = i;
            }
        }
        play(best);
    }
    return run;
}

double regret(const RegretLedger& ledger) { return ledger.gaps.dot(ledger.plays.cast<double>()); }

double realized_regret(const RegretLedger& ledger) {
    return ledger.realized_cost - static_cast<double>(ledger.total) * ledger.v_star;
}

double regret_bound(const Eigen::Ref<const Eigen::VectorXd>& gaps, long long n) {
    if (n < 1) throw ConfigError("the regret bound needs n >= 1");
    const double log_n = std::log(static_cast<double>(n));
    double b = 0.0;
    for (Eigen::Index i = 0; i < gaps.size(); ++i)
        if (gaps[i] > 0.0) b += 8.0 * log_n / gaps[i];
    return b + (1.0 + std::numbers::pi * std::numbers::pi / 3.0) * gaps.sum();
}

std::vector<RegretPoint> regret_curve(const BanditInstance& inst, const std::vector<long long>& checkpoints,
                                      int runs, Stream stream, int threads) {
    if (checkpoints.empty()) throw ConfigError("regret curve needs at least one checkpoint");
    if (runs < 1) throw ConfigError("regret curve needs at least one run");
    std::vector<long long> cps = checkpoints;
    std::sort(cps.begin(), cps.end());
    const long long n_max = cps.back();
    const Eigen::VectorXd gaps = RegretLedger(inst).gaps;

    Eigen::MatrixXd r(runs, static_cast<Eigen::Index>(cps.size()));
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int run_i; (run_i = next.fetch_add(1)) < runs;) {
            const BanditRun run = play_ucb(inst, n_max, stream.child(static_cast<std::uint64_t>(run_i)));
            double acc = 0.0;
            std::size_t c = 0;
            for (long long t = 0; t < n_max && c < cps.size(); ++t) {
                acc += gaps[run.history[static_cast<std::size_t>(t)]];
                while (c < cps.size() && cps[c] == t + 1) r(run_i, static_cast<Eigen::Index>(c++)) = acc;
            }
        }
    };
    const int nt = std::max(1, std::min(threads, runs));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    }

    std::vector<RegretPoint> out;
    for (std::size_t c = 0; c < cps.size(); ++c) {
        const auto col = r.col(static_cast<Eigen::Index>(c));
        const double mean = col.mean();
        const double var = runs > 1 ? (col.array() - mean).square().sum() / (runs - 1) : 0.0;
        out.push_back({cps[c], mean, std::sqrt(var / runs), regret_bound(gaps, cps[c])});
    }
    return out;
}

}  // namespace brmdp
