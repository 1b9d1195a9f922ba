#pragma once

#include <Eigen/Core>

#include <string>

namespace brmdp {

struct RiskFunctional {
    enum class Kind { expectation, var, cvar };
    Kind kind = Kind::expectation;
    double alpha = 0.5;  // used by var and cvar

    static RiskFunctional expectation() { return {}; }
    static RiskFunctional var(double alpha);
    static RiskFunctional cvar(double alpha);
    /// "mean"/"expectation", "var", "cvar".
    static RiskFunctional parse(const std::string& kind, double alpha);

    [[nodiscard]] std::string name() const;
};

/// Equal-weight scenarios. VaR takes the ceil(alpha N)-th smallest value; CVaR
/// averages the values strictly above that index (the maximum if none).
double apply(const RiskFunctional& rho, const Eigen::Ref<const Eigen::VectorXd>& values);

/// Weighted scenarios through the weighted empirical CDF F:
/// VaR = inf{t : F(t) >= alpha}, CVaR = (1/(1-alpha)) * integral of VaR_r over r in (alpha, 1).
double apply(const RiskFunctional& rho, const Eigen::Ref<const Eigen::VectorXd>& values,
             const Eigen::Ref<const Eigen::VectorXd>& weights);

// Every supported functional has both properties; the solvers check them anyway.
constexpr bool is_translation_invariant(const RiskFunctional&) noexcept { return true; }
constexpr bool is_positively_homogeneous(const RiskFunctional&) noexcept { return true; }

}  // namespace brmdp
