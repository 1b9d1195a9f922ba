#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "brmdp/belief_store.hpp"
#include "brmdp/model.hpp"

namespace brmdp {

struct StageEntry {
    double value = 0.0;
    int action = -1;
};

/// Stage-indexed values and greedy actions over augmented states
/// (state, belief id). A stationary table has a single stage that answers
/// every t.
class ValueTable {
public:
    ValueTable(std::shared_ptr<BeliefStore> beliefs, int stages, bool stationary = false);

    void set(int t, int state, BeliefId b, StageEntry e);
    [[nodiscard]] const StageEntry* get(int t, int state, BeliefId b) const;

    [[nodiscard]] int stages() const noexcept { return static_cast<int>(stages_.size()); }
    [[nodiscard]] bool stationary() const noexcept { return stationary_; }
    [[nodiscard]] std::size_t size(int t) const { return stages_.at(static_cast<std::size_t>(t)).size(); }
    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] const BeliefStore& beliefs() const noexcept { return *beliefs_; }
    [[nodiscard]] std::shared_ptr<BeliefStore> belief_store() const noexcept { return beliefs_; }

    template <class F>
    void for_each(int t, F&& f) const {
        for (const auto& [k, e] : stages_.at(static_cast<std::size_t>(t)))
            f(static_cast<int>(k >> 32), static_cast<BeliefId>(k & 0xffffffffu), e);
    }

    [[nodiscard]] int stage_index(int t) const noexcept { return stationary_ ? 0 : t; }

private:
    static std::uint64_t pack(int s, BeliefId b) noexcept {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) | b;
    }

    std::shared_ptr<BeliefStore> beliefs_;
    std::vector<std::unordered_map<std::uint64_t, StageEntry>> stages_;
    bool stationary_;
};

/// Deterministic Markov policy read off a ValueTable. Unseen beliefs use the
/// stored belief at the same (t, state) nearest in L1 key distance; if the
/// state was never stored, the first admissible action.
class Policy {
public:
    explicit Policy(std::shared_ptr<const ValueTable> table);

    [[nodiscard]] int action(const Environment& env, int t, int state, const Posterior& mu) const;
    [[nodiscard]] const ValueTable& table() const noexcept { return *table_; }

private:
    std::shared_ptr<const ValueTable> table_;
};

}  // namespace brmdp
