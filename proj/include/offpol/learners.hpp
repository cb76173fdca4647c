#pragma once

#include <vector>

#include "offpol/bandit.hpp"
#include "offpol/estimation.hpp"
#include "offpol/policy_class.hpp"

namespace offpol {

/// argmax of q_hat - radius; ties go to the smallest id. Throws
/// NoFeasiblePolicy when no row has a finite lower confidence bound.
PolicyId pessimistic_select(const ValueReport& report);

/// argmax of q_hat; ties go to the smallest id.
PolicyId greedy_select(const ValueReport& report);

struct PolicyMargin {
    PolicyId policy_id = 0;
    double slack = 0.0;  // radius - |q_hat - Q|; -inf for an infeasible policy
};

struct EventCheck {
    bool holds = false;
    std::vector<PolicyMargin> margins;
};

/// Whether |q_hat(pi) - Q(pi)| <= radius(pi) for every policy, with an
/// infeasible row counting as a violation.
EventCheck concentration_event_holds(const ValueReport& report, const BanditModel& model,
                                     const PolicyClass& policies);

/// Oracle-optimal policy used by certificates: among the value maximizers,
/// the one with the smallest radius in `report` (smallest id on ties).
PolicyId certificate_optimum(const ValueReport& report, const BanditModel& model,
                             const PolicyClass& policies);

struct Certificate {
    PolicyId chosen = 0;
    PolicyId optimal = 0;
    double subopt = 0.0;
    double radius_at_opt = 0.0;
    double bound = 0.0;  // 2 * radius(pi*)
    bool event = false;
    bool ok = true;  // event implies subopt <= bound
};

/// Suboptimality of the pessimistic choice next to the 2 R(pi*) bound that
/// holds on the concentration event. Throws NoFeasiblePolicy when nothing can
/// be selected.
Certificate pessimism_certificate(const ValueReport& report, const BanditModel& model,
                                  const PolicyClass& policies);

}  // namespace offpol
