#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "brmdp/rng.hpp"

namespace brmdp {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The set Theta of admissible parameter values.
class ParameterSpace {
public:
    enum class Kind { finite, continuous };

    /// Finite set of atoms; must be strictly increasing.
    static ParameterSpace finite(Eigen::VectorXd atoms);
    static ParameterSpace continuous(double lower, std::optional<double> upper = std::nullopt);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_finite() const noexcept { return kind_ == Kind::finite; }
    [[nodiscard]] const Eigen::VectorXd& atoms() const;
    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] std::optional<double> upper() const noexcept { return upper_; }
    [[nodiscard]] bool contains(double theta) const noexcept;
    /// Index of the atom equal to theta, if any.
    [[nodiscard]] std::optional<Eigen::Index> atom_index(double theta) const noexcept;

private:
    Kind kind_ = Kind::continuous;
    Eigen::VectorXd atoms_;
    double lower_ = -INFINITY;
    std::optional<double> upper_;
};

/// Parametric randomness model f(xi; theta).
///
///  - poisson:          mean theta, support {0, 1, ...}
///  - geometric:        success probability theta, support {1, 2, ...}
///  - truncated_normal: N(theta, sigma^2) conditioned on xi >= lower_truncation
///  - bernoulli:        P(xi = 1) = theta, support {0, 1}
class ParametricFamily {
public:
    enum class Kind { poisson, geometric, truncated_normal, bernoulli };

    static ParametricFamily poisson(ParameterSpace space);
    static ParametricFamily geometric(ParameterSpace space);
    static ParametricFamily bernoulli(ParameterSpace space);
    static ParametricFamily truncated_normal(ParameterSpace space, double stddev,
                                             double lower_truncation = 1.0);

    /// Same family over a different parameter space.
    [[nodiscard]] ParametricFamily with_space(ParameterSpace space) const {
        ParametricFamily f = *this;
        f.space_ = std::move(space);
        return f;
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const ParameterSpace& space() const noexcept { return space_; }
    [[nodiscard]] double stddev() const noexcept { return stddev_; }
    [[nodiscard]] double lower_truncation() const noexcept { return truncation_; }
    [[nodiscard]] bool is_discrete() const noexcept { return kind_ != Kind::truncated_normal; }
    [[nodiscard]] std::string name() const;

    /// Throws DomainError unless theta lies in Theta and is a valid parameter.
    void check_parameter(double theta) const;
    [[nodiscard]] bool in_support(double xi) const noexcept;

    /// pmf/pdf; zero outside the support.
    [[nodiscard]] double density(double theta, double xi) const;
    [[nodiscard]] double log_density(double theta, double xi) const;
    [[nodiscard]] double sample(double theta, Stream& stream) const;
    /// Fills `out` with iid draws; same stream use as repeated scalar calls.
    void sample(double theta, Stream& stream, Eigen::Ref<Eigen::VectorXd> out) const;
    [[nodiscard]] double mean(double theta) const;
    /// Smallest value of the support.
    [[nodiscard]] double support_min() const noexcept;

private:
    [[nodiscard]] double log_density_unchecked(double theta, double xi) const noexcept;
    // `mass` is the untruncated tail above the cutoff (truncated normal only).
    [[nodiscard]] double draw(double theta, double mass, Stream& stream) const;
    [[nodiscard]] double tail_mass(double theta) const noexcept;

    Kind kind_ = Kind::poisson;
    ParameterSpace space_;
    double stddev_ = 0.0;
    double truncation_ = 1.0;
};

/// Finite truncation of a discrete family's support for a set of parameter
/// values: probs(i, k) is the mass of values[k] under thetas[i], with the tail
/// beyond the last value folded into it.
struct TruncatedSupport {
    Eigen::VectorXd values;
    Eigen::MatrixXd probs;
};

/// Truncates at the smallest M with tail mass < tail_tol under every theta.
TruncatedSupport truncate_support(const ParametricFamily& family,
                                  const Eigen::Ref<const Eigen::VectorXd>& thetas,
                                  double tail_tol = 1e-10);

/// Discretization of a single continuous f(.; theta) into `points` cells of
/// equal probability, each represented by its conditional mean (so the mean
/// is preserved exactly). Discrete families fall back to truncate_support.
TruncatedSupport quantile_support(const ParametricFamily& family, double theta, int points);

double sample_xi(const ParametricFamily& family, double theta, Stream& stream);
double density(const ParametricFamily& family, double theta, double xi);

/// State-equation MDP with parametric randomness.
///
/// States are dense indices 0..num_states-1. Each state lists its admissible
/// actions as indices; what an index means is up to the environment.
struct Environment {
    using Transition = std::function<int(int state, int action, double xi)>;
    using Cost = std::function<double(int state, int action, double xi)>;
    using Observes = std::function<bool(int state)>;
    using LowerBound = std::function<double(int state, int stages_remaining)>;

    std::string name;
    int num_states = 0;
    std::vector<std::vector<int>> actions;
    Transition transition;
    Cost cost;
    /// Whether the stage at this state draws xi (and so updates the belief).
    /// When false, transition and cost ignore xi.
    Observes observes;
    /// Number of stages; nullopt for an infinite horizon.
    std::optional<int> horizon;
    double discount = 1.0;
    ParametricFamily family;
    /// Declared bound Z on |cost| over the (truncated) support.
    double cost_bound = 0.0;
    int initial_state = 0;
    /// States from which no further cost accrues (absorbing, zero cost).
    std::function<bool(int state)> terminal;
    /// Optional bound V_t(s, mu) >= lb(s, T - t) valid for every belief; used to
    /// skip actions that provably cannot attain the minimum.
    LowerBound value_lower_bound;
    /// Like value_lower_bound but valid for every realization of the costs, so
    /// it also bounds sampled value estimates.
    LowerBound pathwise_lower_bound;
    /// Human-readable state names, e.g. "level=2" or "(0,3)".
    std::function<std::string(int state)> describe_state;

    [[nodiscard]] bool admissible(int state, int action) const noexcept;
    [[nodiscard]] bool observes_at(int state) const { return !observes || observes(state); }
    [[nodiscard]] bool is_terminal(int state) const { return terminal && terminal(state); }
    /// Checks the model-level invariants; throws ConfigError.
    void validate() const;
};

struct StepResult {
    int next_state;
    double cost;
};

/// One application of the state equation and stage cost.
StepResult step(const Environment& env, int state, int action, double xi);

}  // namespace brmdp
