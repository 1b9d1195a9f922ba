#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "brmdp/model.hpp"
#include "brmdp/posterior.hpp"

namespace brmdp {

using BeliefId = std::uint32_t;

/// Interns posteriors by quantized key and caches Bayes successors.
///
/// The first posterior seen for a key becomes its representative. With
/// `snap` set, normal-mean posteriors are instead replaced by the centre of
/// their grid cell, which makes the representative independent of visit order.
class BeliefStore {
public:
    BeliefStore(ParametricFamily family, double grid, bool snap = false);

    BeliefId intern(const Posterior& mu);
    /// Id of an already interned posterior with the same key, or -1.
    [[nodiscard]] std::int64_t find(const Posterior& mu) const;
    [[nodiscard]] std::int64_t find(const PosteriorKey& key) const;

    /// Interned Bayes update of belief `id` on observation xi.
    BeliefId successor(BeliefId id, double xi);

    [[nodiscard]] const Posterior& posterior(BeliefId id) const { return beliefs_[id]; }
    [[nodiscard]] const PosteriorKey& key(BeliefId id) const { return keys_[id]; }
    [[nodiscard]] std::size_t size() const noexcept { return beliefs_.size(); }
    [[nodiscard]] double grid() const noexcept { return grid_; }
    [[nodiscard]] const ParametricFamily& family() const noexcept { return family_; }

private:
    struct PairHash {
        std::size_t operator()(const std::pair<BeliefId, std::uint64_t>& p) const noexcept;
    };

    ParametricFamily family_;
    double grid_;
    bool snap_;
    std::vector<Posterior> beliefs_;
    std::vector<PosteriorKey> keys_;
    std::unordered_map<PosteriorKey, BeliefId, PosteriorKeyHash> index_;
    std::unordered_map<std::pair<BeliefId, std::uint64_t>, BeliefId, PairHash> succ_;
};

}  // namespace brmdp
