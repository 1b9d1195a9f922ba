#include "brmdp/model.hpp"

#include <algorithm>
#include <cmath>

#include "brmdp/special.hpp"

namespace brmdp {

namespace {

bool is_integer(double x) noexcept { return std::isfinite(x) && x == std::floor(x); }

// Exponential-proposal rejection sampler for N(0,1) restricted to [a, inf).
double tail_normal_rejection(double a, Stream& stream) {
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double z = a - std::log(stream.uniform()) / rate;
        const double d = z - rate;
        if (stream.uniform() <= std::exp(-0.5 * d * d)) return z;
    }
}

}  // namespace

// --- ParameterSpace ---------------------------------------------------------

ParameterSpace ParameterSpace::finite(Eigen::VectorXd atoms) {
    if (atoms.size() == 0) throw ConfigError("finite parameter space needs at least one atom");
    for (Eigen::Index i = 0; i < atoms.size(); ++i) {
        if (!std::isfinite(atoms[i])) throw ConfigError("parameter atoms must be finite");
        if (i > 0 && !(atoms[i] > atoms[i - 1]))
            throw ConfigError("parameter atoms must be strictly increasing");
    }
    ParameterSpace s;
    s.kind_ = Kind::finite;
    s.lower_ = atoms[0];
    s.upper_ = atoms[atoms.size() - 1];
    s.atoms_ = std::move(atoms);
    return s;
}

ParameterSpace ParameterSpace::continuous(double lower, std::optional<double> upper) {
    if (upper && !(lower < *upper)) throw ConfigError("continuous parameter space needs lower < upper");
    ParameterSpace s;
    s.kind_ = Kind::continuous;
    s.lower_ = lower;
    s.upper_ = upper;
    return s;
}

const Eigen::VectorXd& ParameterSpace::atoms() const {
    if (!is_finite()) throw DomainError("continuous parameter space has no atoms");
    return atoms_;
}

std::optional<Eigen::Index> ParameterSpace::atom_index(double theta) const noexcept {
    for (Eigen::Index i = 0; i < atoms_.size(); ++i) {
        const double a = atoms_[i];
        if (std::abs(a - theta) <= 1e-12 * std::max(1.0, std::abs(a))) return i;
    }
    return std::nullopt;
}

bool ParameterSpace::contains(double theta) const noexcept {
    if (!std::isfinite(theta)) return false;
    if (is_finite()) return atom_index(theta).has_value();
    if (theta < lower_) return false;
    return !upper_ || theta <= *upper_;
}

// --- ParametricFamily -------------------------------------------------------

ParametricFamily ParametricFamily::poisson(ParameterSpace space) {
    ParametricFamily f;
    f.kind_ = Kind::poisson;
    f.space_ = std::move(space);
    return f;
}

ParametricFamily ParametricFamily::geometric(ParameterSpace space) {
    ParametricFamily f;
    f.kind_ = Kind::geometric;
    f.space_ = std::move(space);
    return f;
}

ParametricFamily ParametricFamily::bernoulli(ParameterSpace space) {
    ParametricFamily f;
    f.kind_ = Kind::bernoulli;
    f.space_ = std::move(space);
    return f;
}

ParametricFamily ParametricFamily::truncated_normal(ParameterSpace space, double stddev,
                                                    double lower_truncation) {
    if (!(stddev > 0.0)) throw ConfigError("truncated normal needs a positive stddev");
    ParametricFamily f;
    f.kind_ = Kind::truncated_normal;
    f.space_ = std::move(space);
    f.stddev_ = stddev;
    f.truncation_ = lower_truncation;
    return f;
}

std::string ParametricFamily::name() const {
    switch (kind_) {
        case Kind::poisson: return "poisson";
        case Kind::geometric: return "geometric";
        case Kind::truncated_normal: return "truncated_normal";
        case Kind::bernoulli: return "bernoulli";
    }
    return "?";
}

void ParametricFamily::check_parameter(double theta) const {
    if (!space_.contains(theta))
        throw DomainError("parameter " + std::to_string(theta) + " is outside Theta");
    switch (kind_) {
        case Kind::poisson:
            if (!(theta > 0.0)) throw DomainError("poisson mean must be positive");
            break;
        case Kind::geometric:
            if (!(theta > 0.0 && theta <= 1.0))
                throw DomainError("geometric success probability must lie in (0, 1]");
            break;
        case Kind::truncated_normal: break;
        case Kind::bernoulli:
            if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("bernoulli probability must lie in [0, 1]");
            break;
    }
}

bool ParametricFamily::in_support(double xi) const noexcept {
    switch (kind_) {
        case Kind::poisson: return is_integer(xi) && xi >= 0.0;
        case Kind::geometric: return is_integer(xi) && xi >= 1.0;
        case Kind::truncated_normal: return std::isfinite(xi) && xi >= truncation_;
        case Kind::bernoulli: return xi == 0.0 || xi == 1.0;
    }
    return false;
}

double ParametricFamily::support_min() const noexcept {
    switch (kind_) {
        case Kind::poisson: return 0.0;
        case Kind::geometric: return 1.0;
        case Kind::truncated_normal: return truncation_;
        case Kind::bernoulli: return 0.0;
    }
    return 0.0;
}

double ParametricFamily::log_density_unchecked(double theta, double xi) const noexcept {
    if (!in_support(xi)) return -INFINITY;
    switch (kind_) {
        case Kind::poisson: return xi * std::log(theta) - theta - std::lgamma(xi + 1.0);
        case Kind::geometric:
            if (theta == 1.0) return xi == 1.0 ? 0.0 : -INFINITY;
            return std::log(theta) + (xi - 1.0) * std::log1p(-theta);
        case Kind::truncated_normal: {
            const double z = (xi - theta) / stddev_;
            const double za = (truncation_ - theta) / stddev_;
            return -0.5 * z * z - std::log(stddev_) - 0.91893853320467274178 - log_normal_sf(za);
        }
        case Kind::bernoulli: return xi == 1.0 ? std::log(theta) : std::log1p(-theta);
    }
    return -INFINITY;
}

double ParametricFamily::log_density(double theta, double xi) const {
    check_parameter(theta);
    return log_density_unchecked(theta, xi);
}

double ParametricFamily::density(double theta, double xi) const {
    return std::exp(log_density(theta, xi));
}

double ParametricFamily::mean(double theta) const {
    check_parameter(theta);
    switch (kind_) {
        case Kind::poisson: return theta;
        case Kind::geometric: return 1.0 / theta;
        case Kind::bernoulli: return theta;
        case Kind::truncated_normal: {
            const double za = (truncation_ - theta) / stddev_;
            // phi(za) / sf(za) computed in log space for large za.
            return theta + stddev_ * std::exp(-0.5 * za * za - 0.91893853320467274178 - log_normal_sf(za));
        }
    }
    return NAN;
}

double ParametricFamily::draw(double theta, double mass, Stream& stream) const {
    switch (kind_) {
        case Kind::poisson: {
            if (theta > 700.0) throw DomainError("poisson mean too large for the inversion sampler");
            const double u = stream.uniform();
            double p = std::exp(-theta);
            double cdf = p;
            double k = 0.0;
            while (u > cdf) {
                k += 1.0;
                p *= theta / k;
                const double next = cdf + p;
                if (next == cdf) break;  // u beyond representable mass
                cdf = next;
            }
            return k;
        }
        case Kind::geometric: {
            if (theta == 1.0) return 1.0;
            const double u = stream.uniform();
            return std::max(1.0, std::ceil(std::log(u) / std::log1p(-theta)));
        }
        case Kind::truncated_normal: {
            double z;
            if (mass >= 1e-6) {
                z = normal_upper_quantile(stream.uniform() * mass);
            } else {
                z = tail_normal_rejection((truncation_ - theta) / stddev_, stream);
            }
            return std::max(truncation_, theta + stddev_ * z);
        }
        case Kind::bernoulli: return stream.uniform() < theta ? 1.0 : 0.0;
    }
    return NAN;
}

double ParametricFamily::tail_mass(double theta) const noexcept {
    return kind_ == Kind::truncated_normal ? normal_sf((truncation_ - theta) / stddev_) : 1.0;
}

double ParametricFamily::sample(double theta, Stream& stream) const {
    check_parameter(theta);
    return draw(theta, tail_mass(theta), stream);
}

void ParametricFamily::sample(double theta, Stream& stream, Eigen::Ref<Eigen::VectorXd> out) const {
    check_parameter(theta);
    const double mass = tail_mass(theta);
    for (auto& x : out) x = draw(theta, mass, stream);
}

double sample_xi(const ParametricFamily& family, double theta, Stream& stream) {
    return family.sample(theta, stream);
}

double density(const ParametricFamily& family, double theta, double xi) {
    return family.density(theta, xi);
}

TruncatedSupport truncate_support(const ParametricFamily& family,
                                  const Eigen::Ref<const Eigen::VectorXd>& thetas,
                                  double tail_tol) {
    if (!family.is_discrete())
        throw ConfigError("exact expectation needs a discrete family; " + family.name() +
                          " is continuous");
    if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw ConfigError("tail tolerance must lie in (0, 1)");
    constexpr long kMaxSupport = 200000;

    const double lo = family.support_min();
    long last = static_cast<long>(lo);
    for (Eigen::Index i = 0; i < thetas.size(); ++i) {
        const double th = thetas[i];
        family.check_parameter(th);
        long m = static_cast<long>(lo);
        if (family.kind() == ParametricFamily::Kind::geometric) {
            if (th < 1.0) m = std::max(1L, static_cast<long>(std::ceil(std::log(tail_tol) / std::log1p(-th))));
        } else {
            double cdf = 0.0;
            for (m = 0;; ++m) {
                cdf += family.density(th, static_cast<double>(m));
                if (1.0 - cdf < tail_tol && static_cast<double>(m) >= th) break;
                if (m > kMaxSupport) break;
            }
        }
        if (m > kMaxSupport) throw ConfigError("truncated support exceeds the size cap");
        last = std::max(last, m);
    }

    const long n = last - static_cast<long>(lo) + 1;
    TruncatedSupport out;
    out.values.resize(n);
    for (long k = 0; k < n; ++k) out.values[k] = lo + static_cast<double>(k);
    out.probs.resize(thetas.size(), n);
    for (Eigen::Index i = 0; i < thetas.size(); ++i) {
        double total = 0.0;
        for (long k = 0; k < n; ++k) {
            out.probs(i, k) = family.density(thetas[i], out.values[k]);
            total += out.probs(i, k);
        }
        out.probs(i, n - 1) += std::max(0.0, 1.0 - total);
    }
    return out;
}

TruncatedSupport quantile_support(const ParametricFamily& family, double theta, int points) {
    if (family.is_discrete()) {
        Eigen::VectorXd th(1);
        th << theta;
        return truncate_support(family, th);
    }
    if (points < 1) throw ConfigError("quadrature needs at least one point");
    family.check_parameter(theta);
    const double sd = family.stddev();
    const double za = (family.lower_truncation() - theta) / sd;
    const double mass = normal_sf(za);
    TruncatedSupport out;
    out.values.resize(points);
    out.probs = Eigen::MatrixXd::Constant(1, points, 1.0 / points);
    // Cell k spans upper-tail masses [mass*(1-(k+1)/M), mass*(1-k/M)].
    double z_lo = za;
    for (int k = 0; k < points; ++k) {
        const double q_hi = mass * (1.0 - static_cast<double>(k + 1) / points);
        const double z_hi = k + 1 == points ? INFINITY : normal_upper_quantile(q_hi);
        const double phi_hi = std::isfinite(z_hi) ? normal_pdf(z_hi) : 0.0;
        const double cell_mean = (normal_pdf(z_lo) - phi_hi) / (mass / points);
        out.values[k] = std::max(family.lower_truncation(), theta + sd * cell_mean);
        z_lo = z_hi;
    }
    return out;
}

// --- Environment ------------------------------------------------------------

bool Environment::admissible(int state, int action) const noexcept {
    if (state < 0 || state >= num_states) return false;
    const auto& acts = actions[static_cast<std::size_t>(state)];
    return std::find(acts.begin(), acts.end(), action) != acts.end();
}

void Environment::validate() const {
    if (num_states <= 0) throw ConfigError(name + ": needs at least one state");
    if (static_cast<int>(actions.size()) != num_states)
        throw ConfigError(name + ": action lists must cover every state");
    for (const auto& a : actions)
        if (a.empty()) throw ConfigError(name + ": every state needs an admissible action");
    if (!transition || !cost) throw ConfigError(name + ": transition and cost are required");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError(name + ": discount must lie in (0, 1]");
    if (!horizon && !(discount < 1.0))
        throw ConfigError(name + ": an infinite horizon needs discount < 1");
    if (horizon && *horizon <= 0) throw ConfigError(name + ": horizon must be positive");
    if (initial_state < 0 || initial_state >= num_states)
        throw ConfigError(name + ": initial state out of range");
    if (!(cost_bound >= 0.0)) throw ConfigError(name + ": cost bound must be non-negative");
}

StepResult step(const Environment& env, int state, int action, double xi) {
    if (!env.admissible(state, action))
        throw DomainError("action " + std::to_string(action) + " is not admissible at state " +
                          std::to_string(state));
    if (env.observes_at(state) && !env.family.in_support(xi))
        throw DomainError("xi = " + std::to_string(xi) + " is outside the support of " + env.family.name());
    return {env.transition(state, action, xi), env.cost(state, action, xi)};
}

}  // namespace brmdp
