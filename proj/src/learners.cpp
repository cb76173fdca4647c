#include "offpol/learners.hpp"

#include <cmath>

#include "offpol/error.hpp"

namespace offpol {

namespace {

template <typename Score>
PolicyId argmax_rows(const ValueReport& report, Score score, const char* learner) {
    const ValueRow* best = nullptr;
    double best_score = kNegInf;
    for (const ValueRow& row : report.rows) {
        if (!row.feasible()) continue;
        const double s = score(row);
        if (s == kNegInf || std::isnan(s)) continue;
        if (best == nullptr || s > best_score || (s == best_score && row.policy_id < best->policy_id)) {
            best = &row;
            best_score = s;
        }
    }
    if (best == nullptr)
        throw NoFeasiblePolicy(std::string(learner) +
                               ": no policy has a finite estimate (no overlap anywhere in the class)");
    return best->policy_id;
}

}  // namespace

PolicyId pessimistic_select(const ValueReport& report) {
    return argmax_rows(report, [](const ValueRow& r) { return r.q_hat - r.radius; }, "pessimistic_select");
}

PolicyId greedy_select(const ValueReport& report) {
    return argmax_rows(report, [](const ValueRow& r) { return r.q_hat; }, "greedy_select");
}

EventCheck concentration_event_holds(const ValueReport& report, const BanditModel& model,
                                     const PolicyClass& policies) {
    EventCheck check;
    check.holds = true;
    for (const ValueRow& row : report.rows) {
        const double truth = policy_value(model, policies.at(row.policy_id).actions);
        PolicyMargin margin{row.policy_id, kNegInf};
        if (row.feasible()) margin.slack = row.radius - std::abs(row.q_hat - truth);
        if (!(margin.slack >= 0.0)) check.holds = false;
        check.margins.push_back(margin);
    }
    return check;
}

PolicyId certificate_optimum(const ValueReport& report, const BanditModel& model,
                             const PolicyClass& policies) {
    if (policies.empty()) throw InvalidArgument("certificate over an empty class");
    double best = kNegInf;
    for (const Policy& p : policies.policies()) best = std::max(best, policy_value(model, p.actions));
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    PolicyId chosen = 0;
    double chosen_radius = std::numeric_limits<double>::infinity();
    bool have = false;
    for (const Policy& p : policies.policies()) {
        if (policy_value(model, p.actions) < best - tol) continue;
        const ValueRow* row = report.find(p.id);
        const double r = row != nullptr ? row->radius : std::numeric_limits<double>::infinity();
        if (!have || r < chosen_radius) {
            chosen = p.id;
            chosen_radius = r;
            have = true;
        }
    }
    return chosen;
}

Certificate pessimism_certificate(const ValueReport& report, const BanditModel& model,
                                  const PolicyClass& policies) {
    Certificate c;
    c.chosen = pessimistic_select(report);
    c.subopt = suboptimality(model, policies, policies.at(c.chosen).actions);
    c.optimal = certificate_optimum(report, model, policies);
    const ValueRow* opt_row = report.find(c.optimal);
    c.radius_at_opt = opt_row != nullptr ? opt_row->radius : std::numeric_limits<double>::infinity();
    c.bound = 2.0 * c.radius_at_opt;
    c.event = concentration_event_holds(report, model, policies).holds;
    c.ok = !c.event || c.subopt <= c.bound;
    return c;
}

}  // namespace offpol
