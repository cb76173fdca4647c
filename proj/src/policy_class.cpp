#include "offpol/policy_class.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "offpol/error.hpp"

namespace offpol {

PolicyClass::PolicyClass(std::size_t num_contexts, std::size_t num_actions,
                         std::vector<Policy> policies, std::optional<std::size_t> declared_ndim)
    : num_contexts_(num_contexts),
      num_actions_(num_actions),
      policies_(std::move(policies)),
      declared_ndim_(declared_ndim) {
    if (num_actions < 2) throw InvalidArgument("policy class needs K >= 2");
    std::sort(policies_.begin(), policies_.end(),
              [](const Policy& a, const Policy& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < policies_.size(); ++i) {
        const Policy& p = policies_[i];
        if (i > 0 && policies_[i - 1].id == p.id)
            throw InvalidArgument("duplicate policy id " + std::to_string(p.id));
        if (p.actions.size() != num_contexts)
            throw InvalidArgument("policy " + std::to_string(p.id) + " is not total on the context domain");
        for (Action a : p.actions)
            if (a >= num_actions)
                throw InvalidArgument("policy " + std::to_string(p.id) + " uses an action outside [0,K)");
    }
}

PolicyClass PolicyClass::all_maps(std::size_t num_contexts, std::size_t num_actions) {
    const double count = std::pow(static_cast<double>(num_actions), static_cast<double>(num_contexts));
    if (count > static_cast<double>(kMaxBruteForcePolicies))
        throw SizeError("all-maps class with K^n = " + std::to_string(count) + " policies is too large");
    const auto total = static_cast<std::size_t>(std::llround(count));
    std::vector<Policy> policies;
    policies.reserve(total);
    for (std::size_t id = 0; id < total; ++id) {
        PolicyMap map(num_contexts);
        std::size_t code = id;
        for (std::size_t x = 0; x < num_contexts; ++x) {
            map[x] = static_cast<Action>(code % num_actions);
            code /= num_actions;
        }
        policies.push_back(Policy{id, std::move(map)});
    }
    PolicyClass cls(num_contexts, num_actions, std::move(policies), num_contexts);
    cls.generator_.name = "all-maps";
    return cls;
}

PolicyClass PolicyClass::threshold(std::size_t num_contexts, std::size_t num_actions, Action below,
                                   Action above) {
    if (below == above) throw InvalidArgument("threshold class needs distinct actions");
    std::vector<Policy> policies;
    for (std::size_t c = 0; c <= num_contexts; ++c) {
        PolicyMap map(num_contexts);
        for (std::size_t x = 0; x < num_contexts; ++x) map[x] = x < c ? below : above;
        policies.push_back(Policy{c, std::move(map)});
    }
    PolicyClass cls(num_contexts, num_actions, std::move(policies));
    cls.generator_ = ClassGenerator{"threshold", below, above};
    return cls;
}

const Policy* PolicyClass::find(PolicyId id) const {
    auto it = std::lower_bound(policies_.begin(), policies_.end(), id,
                               [](const Policy& p, PolicyId v) { return p.id < v; });
    return (it != policies_.end() && it->id == id) ? &*it : nullptr;
}

const Policy& PolicyClass::at(PolicyId id) const {
    const Policy* p = find(id);
    if (p == nullptr) throw InvalidArgument("unknown policy id " + std::to_string(id));
    return *p;
}

std::vector<std::vector<PolicyId>> PolicyClass::duplicate_groups() const {
    std::map<PolicyMap, std::vector<PolicyId>> groups;
    for (const Policy& p : policies_) groups[p.actions].push_back(p.id);
    std::vector<std::vector<PolicyId>> out;
    for (auto& [map, ids] : groups)
        if (ids.size() > 1) out.push_back(std::move(ids));
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Distinct restrictions of the class to `subset`, each with its smallest id.
std::vector<std::pair<PolicyMap, PolicyId>> project(const PolicyClass& cls,
                                                    const std::vector<Context>& subset) {
    std::map<PolicyMap, PolicyId> seen;
    PolicyMap key(subset.size());
    for (const Policy& p : cls.policies()) {
        for (std::size_t j = 0; j < subset.size(); ++j) key[j] = p.actions[subset[j]];
        seen.emplace(key, p.id);  // ids arrive in increasing order, first wins
    }
    return {seen.begin(), seen.end()};
}

std::optional<ShatteringWitness> shattered_by(const PolicyClass& cls, const std::vector<Context>& subset) {
    const std::size_t m = subset.size();
    const auto projections = project(cls, subset);
    if (projections.size() < (std::size_t{1} << m)) return std::nullopt;

    auto lookup = [&](const PolicyMap& key) -> const PolicyId* {
        auto it = std::lower_bound(projections.begin(), projections.end(), key,
                                   [](const auto& entry, const PolicyMap& k) { return entry.first < k; });
        return (it != projections.end() && it->first == key) ? &it->second : nullptr;
    };

    // f1 and f2 are themselves realized (mask all-ones and all-zeros), so
    // candidates come from the projections.
    PolicyMap mixture(m);
    std::vector<PolicyId> realizing(std::size_t{1} << m);
    for (std::size_t i = 0; i < projections.size(); ++i) {
        const PolicyMap& f1 = projections[i].first;
        for (std::size_t j = i + 1; j < projections.size(); ++j) {
            const PolicyMap& f2 = projections[j].first;
            bool differs_everywhere = true;
            for (std::size_t c = 0; c < m && differs_everywhere; ++c) differs_everywhere = f1[c] != f2[c];
            if (!differs_everywhere) continue;
            bool ok = true;
            for (std::size_t mask = 0; mask < realizing.size() && ok; ++mask) {
                for (std::size_t c = 0; c < m; ++c) mixture[c] = (mask >> c) & 1U ? f1[c] : f2[c];
                const PolicyId* id = lookup(mixture);
                if (id == nullptr)
                    ok = false;
                else
                    realizing[mask] = *id;
            }
            if (ok) return ShatteringWitness{subset, f1, f2, realizing};
        }
    }
    return std::nullopt;
}

bool next_combination(std::vector<Context>& comb, std::size_t n) {
    const std::size_t m = comb.size();
    for (std::size_t i = m; i-- > 0;) {
        if (comb[i] < n - m + i) {
            ++comb[i];
            for (std::size_t j = i + 1; j < m; ++j) comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

NatarajanResult natarajan_search(const PolicyClass& cls) {
    if (cls.num_contexts() > kMaxBruteForceContexts)
        throw SizeError("natarajan_dimension: more than 20 contexts");
    if (cls.size() > kMaxBruteForcePolicies)
        throw SizeError("natarajan_dimension: more than 10^6 policies");

    NatarajanResult result;
    // Subsets of a shattered set are shattered, so the first size with no
    // shattered subset ends the search.
    for (std::size_t m = 1; m <= cls.num_contexts(); ++m) {
        if ((std::size_t{1} << m) > cls.size()) break;
        std::vector<Context> comb(m);
        for (std::size_t i = 0; i < m; ++i) comb[i] = static_cast<Context>(i);
        std::optional<ShatteringWitness> found;
        do {
            found = shattered_by(cls, comb);
        } while (!found && next_combination(comb, cls.num_contexts()));
        if (!found) break;
        result.dimension = m;
        result.witness = std::move(found);
    }
    return result;
}

std::size_t natarajan_dimension(const PolicyClass& cls) { return natarajan_search(cls).dimension; }

bool verify_witness(const PolicyClass& cls, const ShatteringWitness& w) {
    const std::size_t m = w.subset.size();
    if (w.f1.size() != m || w.f2.size() != m || w.realizing.size() != (std::size_t{1} << m)) return false;
    for (Context x : w.subset)
        if (x >= cls.num_contexts()) return false;
    for (std::size_t c = 0; c < m; ++c)
        if (w.f1[c] == w.f2[c]) return false;
    for (std::size_t mask = 0; mask < w.realizing.size(); ++mask) {
        const Policy* p = cls.find(w.realizing[mask]);
        if (p == nullptr) return false;
        for (std::size_t c = 0; c < m; ++c) {
            const Action expected = (mask >> c) & 1U ? w.f1[c] : w.f2[c];
            if (p->actions[w.subset[c]] != expected) return false;
        }
    }
    return true;
}

RealizedActionSet realized_actions(const PolicyClass& cls, std::span<const Context> contexts_seq) {
    RealizedActionSet out;
    out.contexts_seq.assign(contexts_seq.begin(), contexts_seq.end());
    for (Context x : contexts_seq)
        if (x >= cls.num_contexts()) throw InvalidArgument("unknown context " + std::to_string(x));

    std::vector<Context> distinct(contexts_seq.begin(), contexts_seq.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    // Two policies give the same length-T vector iff they agree on the
    // distinct contexts; dedupe there and expand afterwards.
    auto projections = project(cls, distinct);
    std::sort(projections.begin(), projections.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    std::unordered_map<Context, std::size_t> slot;
    for (std::size_t j = 0; j < distinct.size(); ++j) slot[distinct[j]] = j;
    for (const auto& [restriction, id] : projections) {
        PolicyMap vec(contexts_seq.size());
        for (std::size_t t = 0; t < contexts_seq.size(); ++t) vec[t] = restriction[slot[contexts_seq[t]]];
        out.action_vectors.push_back(std::move(vec));
        out.representatives.push_back(id);
    }
    return out;
}

double natarajan_count_bound(std::size_t support, std::size_t num_actions, std::size_t ndim) {
    const double n = static_cast<double>(ndim);
    return std::pow(static_cast<double>(support), n) * std::pow(static_cast<double>(num_actions), 2.0 * n);
}

}  // namespace offpol
