#include "brmdp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "brmdp/model.hpp"

namespace brmdp {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("risk level alpha must lie in (0, 1)");
}

}  // namespace

RiskFunctional RiskFunctional::var(double alpha) {
    check_alpha(alpha);
    return {Kind::var, alpha};
}

RiskFunctional RiskFunctional::cvar(double alpha) {
    check_alpha(alpha);
    return {Kind::cvar, alpha};
}

RiskFunctional RiskFunctional::parse(const std::string& kind, double alpha) {
    if (kind == "mean" || kind == "expectation") return expectation();
    if (kind == "var" || kind == "VaR") return var(alpha);
    if (kind == "cvar" || kind == "CVaR") return cvar(alpha);
    throw ConfigError("unknown risk functional '" + kind + "'");
}

std::string RiskFunctional::name() const {
    switch (kind) {
        case Kind::expectation: return "mean";
        case Kind::var: return "var";
        case Kind::cvar: return "cvar";
    }
    return "?";
}

double apply(const RiskFunctional& rho, const Eigen::Ref<const Eigen::VectorXd>& values) {
    const auto n = values.size();
    if (n == 0) throw DomainError("risk functional applied to an empty sample");
    if (rho.kind == RiskFunctional::Kind::expectation) return values.mean();

    std::vector<double> v(values.data(), values.data() + n);
    std::stable_sort(v.begin(), v.end());
    // alpha*N can land a hair above an integer through representation error.
    auto k = static_cast<Eigen::Index>(std::ceil(rho.alpha * static_cast<double>(n) - 1e-9));
    k = std::clamp<Eigen::Index>(k, 1, n);
    if (rho.kind == RiskFunctional::Kind::var) return v[static_cast<std::size_t>(k - 1)];
    if (k == n) return v.back();
    const double tail = std::accumulate(v.begin() + k, v.end(), 0.0);
    return tail / static_cast<double>(n - k);
}

double apply(const RiskFunctional& rho, const Eigen::Ref<const Eigen::VectorXd>& values,
             const Eigen::Ref<const Eigen::VectorXd>& weights) {
    const auto n = values.size();
    if (n == 0) throw DomainError("risk functional applied to an empty sample");
    if (weights.size() != n) throw DomainError("risk weights and values differ in length");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
        throw DomainError("risk weights must form a probability vector");
    if (rho.kind == RiskFunctional::Kind::expectation) return values.dot(weights);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });

    constexpr double tol = 1e-12;
    const double alpha = rho.alpha;
    if (rho.kind == RiskFunctional::Kind::var) {
        double cdf = 0.0;
        for (auto i : order) {
            cdf += weights[i];
            if (weights[i] > 0.0 && cdf >= alpha - tol) return values[i];
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if (weights[*it] > 0.0) return values[*it];
        return values[order.back()];
    }

    double cdf = 0.0, acc = 0.0;
    for (auto i : order) {
        const double lo = std::max(cdf, alpha);
        cdf += weights[i];
        const double hi = std::min(cdf, 1.0);
        if (hi > lo) acc += (hi - lo) * values[i];
    }
    // Mass lost to rounding above cdf is attributed to the largest value.
    if (cdf < 1.0) acc += (1.0 - std::max(cdf, alpha)) * values[order.back()];
    return acc / (1.0 - alpha);
}

}  // namespace brmdp
