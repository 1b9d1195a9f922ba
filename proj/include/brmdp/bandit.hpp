#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "brmdp/risk.hpp"
#include "brmdp/rng.hpp"

namespace brmdp {

/// Cost distribution on [0, 1] for one (machine, scenario) cell.
struct CostSampler {
    enum class Kind { bernoulli, uniform, discrete };
    Kind kind = Kind::bernoulli;
    double p = 0.5;              // bernoulli
    double lo = 0.0, hi = 1.0;   // uniform
    Eigen::VectorXd values;      // discrete
    Eigen::VectorXd probs;       // discrete

    static CostSampler bernoulli(double p);
    static CostSampler uniform(double lo, double hi);
    static CostSampler discrete(Eigen::VectorXd values, Eigen::VectorXd probs);

    [[nodiscard]] double mean() const;
    double sample(Stream& stream) const;
};

/// L machines, each with k scenarios. A play of machine i draws one cost per
/// scenario; the scenarios are aggregated with `rho` under `weights`.
struct BanditInstance {
    std::vector<std::vector<CostSampler>> costs;  // [machine][scenario]
    Eigen::VectorXd weights;                      // over scenarios; empty = uniform
    RiskFunctional rho;

    [[nodiscard]] int machines() const noexcept { return static_cast<int>(costs.size()); }
    [[nodiscard]] int scenarios() const noexcept { return costs.empty() ? 0 : static_cast<int>(costs[0].size()); }
    [[nodiscard]] Eigen::VectorXd scenario_weights() const;
    /// Risk-adjusted true value v_i of every machine.
    [[nodiscard]] Eigen::VectorXd values() const;
    /// Throws ConfigError on a ragged table, bad weights or out-of-range costs.
    void validate() const;
};

struct RegretLedger {
    Eigen::VectorXi plays;     // T_i(n)
    Eigen::MatrixXd sums;      // running cost sums per (machine, scenario)
    Eigen::VectorXd values;    // v_i
    double v_star = 0.0;
    Eigen::VectorXd gaps;      // v_i - v_star
    long long total = 0;       // n
    double realized_cost = 0.0;  // sum over plays of the weighted scenario costs

    explicit RegretLedger(const BanditInstance& inst);
    void record(int machine, const Eigen::Ref<const Eigen::VectorXd>& scenario_costs,
                const Eigen::Ref<const Eigen::VectorXd>& weights);
};

struct BanditRun {
    std::vector<int> history;
    RegretLedger ledger;
};

/// UCB play rule: each machine once, then the argmin of the risk-adjusted
/// sample average minus sqrt(2 ln n / n_i), n counting every play so far.
/// Ties go to the lowest machine index. Throws ConfigError if n < L.
BanditRun play_ucb(const BanditInstance& inst, long long n, Stream stream);

/// Decomposed regret sum_i gap_i * T_i(n) of one run.
[[nodiscard]] double regret(const RegretLedger& ledger);
/// Realized regret: total weighted cost paid minus n * v_star.
[[nodiscard]] double realized_regret(const RegretLedger& ledger);

/// 8 sum_{gap>0} ln n / gap + (1 + pi^2/3) sum gap.
[[nodiscard]] double regret_bound(const Eigen::Ref<const Eigen::VectorXd>& gaps, long long n);

struct RegretPoint {
    long long n = 0;
    double mean_regret = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
};

/// Mean decomposed regret over `runs` seeds at each checkpoint. Run r uses
/// stream.child(r); a single run to the largest checkpoint is read at every
/// prefix, so the curve is consistent across checkpoints.
std::vector<RegretPoint> regret_curve(const BanditInstance& inst, const std::vector<long long>& checkpoints,
                                      int runs, Stream stream, int threads = 1);

}  // namespace brmdp
