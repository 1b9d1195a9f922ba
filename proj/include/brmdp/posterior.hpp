#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "brmdp/model.hpp"
#include "brmdp/rng.hpp"

namespace brmdp {

/// Belief over a finite Theta. `atoms` is shared by every posterior derived
/// from the same prior.
struct FinitePosterior {
    std::shared_ptr<const Eigen::VectorXd> atoms;
    Eigen::VectorXd weights;
};

/// Normal belief N(mean, variance) over the mean of a normal observation model
/// with known stddev `obs_stddev`; draws are kept inside [lower, upper].
struct NormalMeanPosterior {
    double mean = 0.0;
    double variance = 1.0;
    double obs_stddev = 1.0;
    double lower = -INFINITY;
    std::optional<double> upper;
};

using Posterior = std::variant<FinitePosterior, NormalMeanPosterior>;

Posterior uniform_prior(const ParameterSpace& space);
Posterior point_mass(const ParameterSpace& space, double theta);
Posterior finite_prior(const ParameterSpace& space, Eigen::VectorXd weights);
Posterior normal_prior(const ParameterSpace& space, double mean, double variance, double obs_stddev);

/// One Bayes step on observation xi. Throws DomainError if no atom can
/// produce xi.
Posterior update(const Posterior& mu, const ParametricFamily& family, double xi);

/// Bayes update on a batch of i.i.d. observations (log space for finite Theta).
Posterior init_from_data(const Posterior& prior, const ParametricFamily& family,
                         std::span<const double> data);

double sample_theta(const Posterior& mu, Stream& stream);

/// Posterior mean of theta.
double posterior_mean(const Posterior& mu);

/// Quantized, hashable form of a posterior. Finite: weights / grid.
/// Normal-mean: (mean, precision) / grid.
struct PosteriorKey {
    std::vector<std::int64_t> coords;

    bool operator==(const PosteriorKey&) const = default;
};

struct PosteriorKeyHash {
    std::size_t operator()(const PosteriorKey& k) const noexcept;
};

/// Round-half-even per coordinate. grid must be positive.
PosteriorKey quantize(const Posterior& mu, double grid);

/// L1 distance in grid units; infinite for keys of different shape.
double key_distance(const PosteriorKey& a, const PosteriorKey& b) noexcept;

}  // namespace brmdp
