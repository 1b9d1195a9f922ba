#include "brmdp/belief_store.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace brmdp {

BeliefStore::BeliefStore(ParametricFamily family, double grid, bool snap)
    : family_(std::move(family)), grid_(grid), snap_(snap) {
    if (!(grid > 0.0)) throw ConfigError("quantization grid must be positive");
}

std::size_t BeliefStore::PairHash::operator()(const std::pair<BeliefId, std::uint64_t>& p) const noexcept {
    return static_cast<std::size_t>(hash_combine(p.first, p.second));
}

BeliefId BeliefStore::intern(const Posterior& mu) {
    PosteriorKey key = quantize(mu, grid_);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    if (beliefs_.size() >= std::numeric_limits<BeliefId>::max())
        throw ConfigError("belief store is full");
    const auto id = static_cast<BeliefId>(beliefs_.size());
    Posterior rep = mu;
    if (snap_) {
        if (auto* n = std::get_if<NormalMeanPosterior>(&rep)) {
            n->mean = static_cast<double>(key.coords[0]) * grid_;
            const double prec = static_cast<double>(key.coords[1]) * grid_;
            if (prec > 0.0) n->variance = 1.0 / prec;
        }
    }
    beliefs_.push_back(std::move(rep));
    keys_.push_back(key);
    index_.emplace(std::move(key), id);
    return id;
}

std::int64_t BeliefStore::find(const PosteriorKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int64_t BeliefStore::find(const Posterior& mu) const { return find(quantize(mu, grid_)); }

BeliefId BeliefStore::successor(BeliefId id, double xi) {
    if (!family_.is_discrete()) {
        // Observations never repeat, but successors of one belief differ only
        // in the mean cell, so cache on that.
        Posterior next = update(beliefs_[id], family_, xi);
        const auto* n = std::get_if<NormalMeanPosterior>(&next);
        if (!n) return intern(next);
        const double cell = std::nearbyint(n->mean / grid_);
        const std::pair<BeliefId, std::uint64_t> k{id, std::bit_cast<std::uint64_t>(cell)};
        if (auto it = succ_.find(k); it != succ_.end()) return it->second;
        const BeliefId nb = intern(next);
        succ_.emplace(k, nb);
        return nb;
    }
    const std::pair<BeliefId, std::uint64_t> k{id, std::bit_cast<std::uint64_t>(xi)};
    if (auto it = succ_.find(k); it != succ_.end()) return it->second;
    const BeliefId next = intern(update(beliefs_[id], family_, xi));
    succ_.emplace(k, next);
    return next;
}

}  // namespace brmdp
