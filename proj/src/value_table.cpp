#include "brmdp/value_table.hpp"

#include <cmath>

namespace brmdp {

ValueTable::ValueTable(std::shared_ptr<BeliefStore> beliefs, int stages, bool stationary)
    : beliefs_(std::move(beliefs)), stages_(static_cast<std::size_t>(stationary ? 1 : stages)),
      stationary_(stationary) {
    if (stages <= 0) throw ConfigError("value table needs at least one stage");
}

void ValueTable::set(int t, int state, BeliefId b, StageEntry e) {
    if (!std::isfinite(e.value)) throw DomainError("value table entries must be finite");
    stages_.at(static_cast<std::size_t>(stage_index(t)))[pack(state, b)] = e;
}

const StageEntry* ValueTable::get(int t, int state, BeliefId b) const {
    const auto idx = static_cast<std::size_t>(stage_index(t));
    if (idx >= stages_.size()) return nullptr;
    const auto& m = stages_[idx];
    auto it = m.find(pack(state, b));
    return it == m.end() ? nullptr : &it->second;
}

std::size_t ValueTable::size() const noexcept {
    std::size_t n = 0;
    for (const auto& m : stages_) n += m.size();
    return n;
}

Policy::Policy(std::shared_ptr<const ValueTable> table) : table_(std::move(table)) {}

int Policy::action(const Environment& env, int t, int state, const Posterior& mu) const {
    const auto fallback = env.actions.at(static_cast<std::size_t>(state)).front();
    const int idx = table_->stage_index(t);
    if (idx < 0 || idx >= table_->stages()) return fallback;

    const PosteriorKey key = quantize(mu, table_->beliefs().grid());
    const auto id = table_->beliefs().find(key);
    if (id >= 0) {
        if (const auto* e = table_->get(t, state, static_cast<BeliefId>(id)); e && e->action >= 0)
            return e->action;
    }

    // Nearest stored belief at the same (t, state); ties go to the lower id.
    double best = INFINITY;
    BeliefId best_id = 0;
    int best_action = -1;
    table_->for_each(idx, [&](int s, BeliefId b, const StageEntry& e) {
        if (s != state || e.action < 0) return;
        const double d = key_distance(key, table_->beliefs().key(b));
        if (d < best || (d == best && b < best_id)) {
            best = d;
            best_id = b;
            best_action = e.action;
        }
    });
    return best_action >= 0 ? best_action : fallback;
}

}  // namespace brmdp
