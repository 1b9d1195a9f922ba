#include "brmdp/posterior.hpp"

#include <algorithm>
#include <cmath>

namespace brmdp {

namespace {

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// Normalizes log-weights in place into probabilities.
Eigen::VectorXd normalize_log(const Eigen::VectorXd& lw) {
    const double mx = lw.maxCoeff();
    if (!std::isfinite(mx)) throw DomainError("impossible observation: every atom has zero likelihood");
    Eigen::VectorXd w = (lw.array() - mx).exp().matrix();
    w /= w.sum();
    return w;
}

Eigen::VectorXd log_weights(const Eigen::VectorXd& w) {
    return w.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : -INFINITY; });
}

FinitePosterior make_finite(const ParameterSpace& space, Eigen::VectorXd weights) {
    FinitePosterior p;
    p.atoms = std::make_shared<const Eigen::VectorXd>(space.atoms());
    p.weights = std::move(weights);
    return p;
}

}  // namespace

Posterior uniform_prior(const ParameterSpace& space) {
    const auto n = space.atoms().size();
    return make_finite(space, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

Posterior point_mass(const ParameterSpace& space, double theta) {
    const auto idx = space.atom_index(theta);
    if (!idx) throw DomainError("point mass must sit on an atom of Theta");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(space.atoms().size());
    w[*idx] = 1.0;
    return make_finite(space, std::move(w));
}

Posterior finite_prior(const ParameterSpace& space, Eigen::VectorXd weights) {
    if (weights.size() != space.atoms().size()) throw ConfigError("prior weights must match the atoms");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw ConfigError("prior weights must be finite and non-negative");
    const double s = weights.sum();
    if (!(s > 0.0)) throw ConfigError("prior weights must not all be zero");
    return make_finite(space, weights / s);
}

Posterior normal_prior(const ParameterSpace& space, double mean, double variance, double obs_stddev) {
    if (space.is_finite()) throw ConfigError("normal-mean prior needs a continuous Theta");
    if (!(variance > 0.0) || !(obs_stddev > 0.0))
        throw ConfigError("normal-mean prior needs positive variance and observation stddev");
    return NormalMeanPosterior{mean, variance, obs_stddev, space.lower(), space.upper()};
}

Posterior update(const Posterior& mu, const ParametricFamily& family, double xi) {
    return std::visit(
        overloaded{
            [&](const FinitePosterior& p) -> Posterior {
                const auto& atoms = *p.atoms;
                Eigen::VectorXd lw = log_weights(p.weights);
                for (Eigen::Index i = 0; i < atoms.size(); ++i)
                    if (std::isfinite(lw[i])) lw[i] += family.log_density(atoms[i], xi);
                return FinitePosterior{p.atoms, normalize_log(lw)};
            },
            [&](const NormalMeanPosterior& p) -> Posterior {
                if (!std::isfinite(xi)) throw DomainError("observation must be finite");
                // Untruncated conjugate step, also used for the truncated family.
                const double s2 = p.obs_stddev * p.obs_stddev;
                NormalMeanPosterior q = p;
                q.mean = (s2 * p.mean + p.variance * xi) / (s2 + p.variance);
                q.variance = p.variance * s2 / (p.variance + s2);
                return q;
            },
        },
        mu);
}

Posterior init_from_data(const Posterior& prior, const ParametricFamily& family,
                         std::span<const double> data) {
    if (data.empty()) return prior;
    return std::visit(
        overloaded{
            [&](const FinitePosterior& p) -> Posterior {
                const auto& atoms = *p.atoms;
                Eigen::VectorXd lw = log_weights(p.weights);
                for (Eigen::Index i = 0; i < atoms.size(); ++i) {
                    if (!std::isfinite(lw[i])) continue;
                    for (double x : data) lw[i] += family.log_density(atoms[i], x);
                }
                return FinitePosterior{p.atoms, normalize_log(lw)};
            },
            [&](const NormalMeanPosterior& p) -> Posterior {
                double sum = 0.0;
                for (double x : data) {
                    if (!std::isfinite(x)) throw DomainError("observation must be finite");
                    sum += x;
                }
                const double n = static_cast<double>(data.size());
                const double s2 = p.obs_stddev * p.obs_stddev;
                const double prec = 1.0 / p.variance + n / s2;
                NormalMeanPosterior q = p;
                q.variance = 1.0 / prec;
                q.mean = (p.mean / p.variance + sum / s2) / prec;
                return q;
            },
        },
        prior);
}

double sample_theta(const Posterior& mu, Stream& stream) {
    return std::visit(
        overloaded{
            [&](const FinitePosterior& p) {
                const auto& w = p.weights;
                const double u = stream.uniform();
                double acc = 0.0;
                Eigen::Index last = 0;
                for (Eigen::Index i = 0; i < w.size(); ++i) {
                    if (w[i] <= 0.0) continue;
                    last = i;
                    acc += w[i];
                    if (u < acc) return (*p.atoms)[i];
                }
                return (*p.atoms)[last];
            },
            [&](const NormalMeanPosterior& p) {
                const double sd = std::sqrt(p.variance);
                const auto inside = [&](double t) { return t >= p.lower && (!p.upper || t <= *p.upper); };
                double t = p.mean;
                for (int k = 0; k < 100; ++k) {
                    t = p.mean + sd * stream.normal();
                    if (inside(t)) return t;
                }
                t = std::max(t, p.lower);
                if (p.upper) t = std::min(t, *p.upper);
                return t;
            },
        },
        mu);
}

double posterior_mean(const Posterior& mu) {
    return std::visit(overloaded{
                          [](const FinitePosterior& p) { return p.atoms->dot(p.weights); },
                          [](const NormalMeanPosterior& p) { return p.mean; },
                      },
                      mu);
}

PosteriorKey quantize(const Posterior& mu, double grid) {
    if (!(grid > 0.0)) throw ConfigError("quantization grid must be positive");
    const auto q = [grid](double v) {
        const double r = std::nearbyint(v / grid);  // default rounding mode: ties to even
        return static_cast<std::int64_t>(std::clamp(r, -9.0e18, 9.0e18));
    };
    PosteriorKey key;
    std::visit(overloaded{
                   [&](const FinitePosterior& p) {
                       key.coords.reserve(static_cast<std::size_t>(p.weights.size()));
                       for (double w : p.weights) key.coords.push_back(q(w));
                   },
                   [&](const NormalMeanPosterior& p) {
                       key.coords = {q(p.mean), q(1.0 / p.variance)};
                   },
               },
               mu);
    return key;
}

std::size_t PosteriorKeyHash::operator()(const PosteriorKey& k) const noexcept {
    std::uint64_t h = 0x2545F4914F6CDD1DULL ^ k.coords.size();
    for (auto c : k.coords) h = hash_combine(h, static_cast<std::uint64_t>(c));
    return static_cast<std::size_t>(h);
}

double key_distance(const PosteriorKey& a, const PosteriorKey& b) noexcept {
    if (a.coords.size() != b.coords.size()) return INFINITY;
    double d = 0.0;
    for (std::size_t i = 0; i < a.coords.size(); ++i)
        d += std::abs(static_cast<double>(a.coords[i]) - static_cast<double>(b.coords[i]));
    return d;
}

}  // namespace brmdp
