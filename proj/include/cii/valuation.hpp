#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cii/common.hpp"
#include "cii/markov.hpp"

namespace cii {

enum class PremiumMode { single, level };
enum class DiseaseBenefitForm { lump_sum, annuity };

// Benefit design. The sum assured c splits at the acceleration parameter:
// entering the metastatic stage (state 3) pays lambda*c at once (plus the
// stand-alone disease lump c_ad when lambda = 0), death after metastases
// pays the remaining (1-lambda)*c, and death without metastases (state 7)
// pays the full c. In the annuity form the disease lump is replaced by
// yearly payments b3..b6 while the metastatic stages are occupied.
struct ContractSpec {
    Sex sex = Sex::male;
    int entry_age = 0;
    int term = 0;
    double death_benefit = 0.0;    // c
    double disease_benefit = 0.0;  // c_ad, lump-sum form with lambda = 0 only
    double acceleration = 0.0;     // lambda in [0, 1]
    DiseaseBenefitForm form = DiseaseBenefitForm::lump_sum;
    std::array<double, 4> annuity_rates{};  // b3..b6
    double discount_factor = 1.0;           // v in (0, 1]
    PremiumMode premium_mode = PremiumMode::single;
    // Optional partial disease payment on the first (non-metastatic)
    // diagnosis; the default design pays nothing on entering state 2.
    double state2_fraction = 0.0;

    void validate() const {
        if (entry_age < min_supported_age || entry_age + term > max_supported_age)
            throw std::invalid_argument("contract: ages must fit in [" +
                                        std::to_string(min_supported_age) + ", " +
                                        std::to_string(max_supported_age) + "]");
        if (term < 1) throw std::invalid_argument("contract: term must be at least one year");
        if (!(acceleration >= 0.0 && acceleration <= 1.0))
            throw std::invalid_argument("contract: acceleration must lie in [0, 1]");
        if (!(discount_factor > 0.0 && discount_factor <= 1.0))
            throw std::invalid_argument("contract: discount factor must lie in (0, 1]");
        if (death_benefit < 0.0 || disease_benefit < 0.0)
            throw std::invalid_argument("contract: benefits must be nonnegative");
        if (state2_fraction < 0.0 || state2_fraction > 1.0)
            throw std::invalid_argument("contract: state-2 fraction must lie in [0, 1]");
        bool any_annuity = false;
        for (double b : annuity_rates) {
            if (b < 0.0) throw std::invalid_argument("contract: annuity rates must be nonnegative");
            any_annuity = any_annuity || b > 0.0;
        }
        if (form == DiseaseBenefitForm::lump_sum && any_annuity)
            throw std::invalid_argument("contract: lump-sum design cannot carry annuity rates");
        if (form == DiseaseBenefitForm::annuity && disease_benefit != 0.0)
            throw std::invalid_argument("contract: annuity design replaces the disease lump sum");
    }

    // Lump paid on entering the metastatic stage.
    double disease_lump() const {
        return acceleration * death_benefit + (acceleration == 0.0 ? disease_benefit : 0.0);
    }
};

inline nlohmann::json to_json(const ContractSpec& c) {
    return {{"sex", to_string(c.sex)},
            {"entry_age", c.entry_age},
            {"term", c.term},
            {"death_benefit", c.death_benefit},
            {"disease_benefit", c.disease_benefit},
            {"acceleration", c.acceleration},
            {"form", c.form == DiseaseBenefitForm::lump_sum ? "lump_sum" : "annuity"},
            {"annuity_rates", c.annuity_rates},
            {"discount_factor", c.discount_factor},
            {"premium_mode", c.premium_mode == PremiumMode::single ? "single" : "level"},
            {"state2_fraction", c.state2_fraction}};
}

inline ContractSpec contract_from_json(const nlohmann::json& j) {
    ContractSpec c;
    c.sex = sex_from_string(j.at("sex").get<std::string>());
    c.entry_age = j.at("entry_age").get<int>();
    c.term = j.at("term").get<int>();
    c.death_benefit = j.value("death_benefit", 0.0);
    c.disease_benefit = j.value("disease_benefit", 0.0);
    c.acceleration = j.value("acceleration", 0.0);
    const std::string form = j.value("form", "lump_sum");
    if (form == "lump_sum") c.form = DiseaseBenefitForm::lump_sum;
    else if (form == "annuity") c.form = DiseaseBenefitForm::annuity;
    else throw std::invalid_argument("contract: unknown form '" + form + "'");
    if (j.contains("annuity_rates")) {
        const auto& rates = j.at("annuity_rates");
        if (rates.size() != 4)
            throw std::invalid_argument("contract: annuity_rates must list b3..b6");
        for (std::size_t i = 0; i < 4; ++i) c.annuity_rates[i] = rates[i].get<double>();
    }
    c.discount_factor = j.value("discount_factor", 1.0);
    const std::string mode = j.value("premium_mode", "single");
    if (mode == "single") c.premium_mode = PremiumMode::single;
    else if (mode == "level") c.premium_mode = PremiumMode::level;
    else throw std::invalid_argument("contract: unknown premium mode '" + mode + "'");
    c.state2_fraction = j.value("state2_fraction", 0.0);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Expected cashflows and present values
// ---------------------------------------------------------------------------

// One policy year [k, k+1): benefits fall due at the period end (discount
// v^{k+1}), premiums at the period start while in states 1-2 (discount v^k).
struct CashflowSchedule {
    struct Row {
        int k = 0;
        double benefit = 0.0;
        double benefit_discounted = 0.0;
        double premium_weight = 0.0;  // expected premium units (amount 1)
        double premium_weight_discounted = 0.0;
    };
    std::vector<Row> rows;

    double epv_benefits() const {
        double s = 0.0;
        for (const auto& r : rows) s += r.benefit_discounted;
        return s;
    }
    double premium_annuity() const {
        double s = 0.0;
        for (const auto& r : rows) s += r.premium_weight_discounted;
        return s;
    }
};

namespace detail {

// Probability mass moving into state j during [k, k+1).
inline double entry_mass(const OccupancyTrajectory& traj, const TransitionMatrix& M, int k,
                         int j) {
    double mass = 0.0;
    for (int i = 1; i <= n_states; ++i)
        if (i != j) mass += traj.prob(k, i) * M.at(i, j);
    return mass;
}

}  // namespace detail

// Expected benefit outgo and premium exposure per policy year, for a unit
// premium. The trajectory must have been computed for the contract window;
// an arbitrary start vector is allowed (used for reserves and viaticals).
inline CashflowSchedule expected_cashflows(const ContractSpec& spec, const MatrixSequence& seq,
                                           const OccupancyTrajectory& traj) {
    spec.validate();
    if (seq.sex() != spec.sex)
        throw std::invalid_argument("cashflows: matrix sequence sex does not match contract");
    if (traj.horizon() != spec.term || traj.entry_age != spec.entry_age)
        throw std::invalid_argument("cashflows: trajectory does not match contract window");

    const double v = spec.discount_factor;
    const double lump = spec.disease_lump();
    const double c = spec.death_benefit;
    const double lam = spec.acceleration;

    CashflowSchedule schedule;
    double vk = 1.0;  // v^k
    for (int k = 0; k < spec.term; ++k) {
        const TransitionMatrix& M = seq.at_age(spec.entry_age + k);
        double benefit = 0.0;
        benefit += spec.state2_fraction * lump * detail::entry_mass(traj, M, k, 2);
        benefit += lump * detail::entry_mass(traj, M, k, 3);
        benefit += c * detail::entry_mass(traj, M, k, 7);
        benefit += (1.0 - lam) * c * detail::entry_mass(traj, M, k, 8);
        if (spec.form == DiseaseBenefitForm::annuity)
            for (int j = 3; j <= 6; ++j)
                benefit += spec.annuity_rates[static_cast<std::size_t>(j - 3)] * traj.prob(k, j);

        CashflowSchedule::Row row;
        row.k = k;
        row.benefit = benefit;
        row.benefit_discounted = benefit * vk * v;
        row.premium_weight = traj.prob(k, 1) + traj.prob(k, 2);
        row.premium_weight_discounted = row.premium_weight * vk;
        schedule.rows.push_back(row);
        vk *= v;
    }
    return schedule;
}

inline double epv_benefits(const ContractSpec& spec, const MatrixSequence& seq,
                           const OccupancyTrajectory& traj) {
    return expected_cashflows(spec, seq, traj).epv_benefits();
}

// Equivalence-principle premium: a single premium equals the benefit EPV;
// a level premium spreads it over the expected discounted years in the
// premium-paying states 1-2.
inline double net_premium(const ContractSpec& spec, const MatrixSequence& seq,
                          const OccupancyTrajectory& traj) {
    const CashflowSchedule schedule = expected_cashflows(spec, seq, traj);
    if (spec.premium_mode == PremiumMode::single) return schedule.epv_benefits();
    const double annuity = schedule.premium_annuity();
    if (annuity <= 0.0)
        throw std::runtime_error("net premium: premium annuity factor is zero");
    return schedule.epv_benefits() / annuity;
}

namespace detail {

// Contract window shifted to duration k for conditional valuations.
inline ContractSpec remaining_contract(const ContractSpec& spec, int k) {
    ContractSpec rest = spec;
    rest.entry_age = spec.entry_age + k;
    rest.term = spec.term - k;
    return rest;
}

inline OccupancyTrajectory conditional_trajectory(const MatrixSequence& seq, int age, int term,
                                                  int state) {
    StateVector p0{};
    p0[static_cast<std::size_t>(state - 1)] = 1.0;
    return trajectory(seq, age, term, p0);
}

}  // namespace detail

// Prospective net reserve at duration k, conditional on occupying `state`:
// EPV of future benefits minus EPV of future premiums, both discounted to
// time k. Premiums due at times >= k count as future (so the reserve at
// (1, 0) under an equivalence-principle premium is zero).
inline double reserve(const ContractSpec& spec, const MatrixSequence& seq,
                      const OccupancyTrajectory& traj, int k, int state) {
    spec.validate();
    if (state < 1 || state > 6)
        throw std::invalid_argument("reserve: state must be transient (1..6)");
    if (k < 0 || k > spec.term) throw std::invalid_argument("reserve: duration outside contract");
    if (k == spec.term) return 0.0;

    const ContractSpec rest = detail::remaining_contract(spec, k);
    const OccupancyTrajectory cond =
        detail::conditional_trajectory(seq, rest.entry_age, rest.term, state);
    const CashflowSchedule schedule = expected_cashflows(rest, seq, cond);

    double future_premiums = 0.0;
    if (spec.premium_mode == PremiumMode::level)
        future_premiums = net_premium(spec, seq, traj) * schedule.premium_annuity();
    else if (k == 0)
        future_premiums = net_premium(spec, seq, traj);
    return schedule.epv_benefits() - future_premiums;
}

struct ViaticalQuote {
    double value = 0.0;  // purchaser's conditional net value of the policy
    double price = 0.0;  // offered price = purchase_fraction * value
};

// Value of buying the policy from an insured currently in metastatic state
// 3..6 at duration k: the conditional EPV of the death benefit still
// payable (death after metastases enters state 8 and pays (1-lambda)*c,
// within at most 4-(state-3) years) minus the EPV of the premiums the
// purchaser must keep paying while the insured is alive. A nonpositive
// value is returned as computed, not clamped.
inline ViaticalQuote viatical_value(const ContractSpec& spec, const MatrixSequence& seq,
                                    const OccupancyTrajectory& traj, int state, int k,
                                    double purchase_fraction) {
    spec.validate();
    if (state < 3 || state > 6)
        throw std::invalid_argument("viatical: state must be metastatic (3..6)");
    if (k < 0 || k >= spec.term)
        throw std::invalid_argument("viatical: duration must precede the term");
    if (!(purchase_fraction > 0.0 && purchase_fraction <= 1.0))
        throw std::invalid_argument("viatical: purchase fraction must lie in (0, 1]");

    const int remaining = spec.term - k;
    const int age = spec.entry_age + k;
    const OccupancyTrajectory cond = detail::conditional_trajectory(seq, age, remaining, state);

    const double v = spec.discount_factor;
    const double death_amount = (1.0 - spec.acceleration) * spec.death_benefit;

    // Level premiums stay due at each period start while the insured is
    // alive (the purchaser takes them over); a single premium was paid at
    // issue, so nothing remains.
    double premium = 0.0;
    if (spec.premium_mode == PremiumMode::level) premium = net_premium(spec, seq, traj);

    double benefit_epv = 0.0;
    double premium_epv = 0.0;
    double vk = 1.0;
    for (int m = 0; m < remaining; ++m) {
        const TransitionMatrix& M = seq.at_age(age + m);
        benefit_epv += death_amount * detail::entry_mass(cond, M, m, 8) * vk * v;
        double alive = 0.0;
        for (int j = 1; j <= 6; ++j) alive += cond.prob(m, j);
        premium_epv += premium * alive * vk;
        vk *= v;
    }
    ViaticalQuote quote;
    quote.value = benefit_epv - premium_epv;
    quote.price = purchase_fraction * quote.value;
    return quote;
}

}  // namespace cii
