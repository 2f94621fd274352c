#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cii/common.hpp"
#include "cii/tables.hpp"

namespace cii {

// Everything the transition estimators need for one sex: the life table
// q_s, the averaged crude incidence and cancer-mortality rates, the share
// of diagnoses presenting with metastases, and the regression coefficients.
// Immutable after construction; all estimators are pure functions of it.
struct EstimatorContext {
    Sex sex = Sex::male;
    LifeTable life;
    BandedRateTable zeta;   // crude cancer incidence, per person
    BandedRateTable varpi;  // crude cancer mortality, per person
    BandedRateTable beta;   // metastatic share among new diagnoses
    CoefficientSet coeffs;

    static EstimatorContext make(Sex sex, LifeTable life, BandedRateTable zeta,
                                 BandedRateTable varpi, BandedRateTable beta,
                                 CoefficientSet coeffs) {
        if (life.sex != sex || zeta.sex != sex || varpi.sex != sex || beta.sex != sex)
            throw std::invalid_argument("estimator context: component sex mismatch");
        if (zeta.purpose != RatePurpose::incidence)
            throw std::invalid_argument("estimator context: zeta table is not an incidence table");
        if (varpi.purpose != RatePurpose::cancer_mortality)
            throw std::invalid_argument(
                "estimator context: varpi table is not a cancer-mortality table");
        if (beta.purpose != RatePurpose::metastasis_share)
            throw std::invalid_argument(
                "estimator context: beta table is not a metastasis-share table");
        coeffs.validate();
        for (int s = min_supported_age; s <= max_supported_age; ++s)
            if (!life.covers(s) || !zeta.covers(s) || !varpi.covers(s) || !beta.covers(s))
                throw std::invalid_argument("estimator context: tables do not cover age " +
                                            std::to_string(s));
        return EstimatorContext{sex, std::move(life), std::move(zeta), std::move(varpi),
                                std::move(beta), std::move(coeffs)};
    }
};

namespace detail {

inline double logistic(double z) {
    if (z < 0.0) {
        const double e = std::exp(z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(-z));
}

inline void check_age(int s) {
    if (s < min_supported_age || s > max_supported_age)
        throw std::out_of_range("age " + std::to_string(s) + " outside supported range [" +
                                std::to_string(min_supported_age) + ", " +
                                std::to_string(max_supported_age) + "]");
}

}  // namespace detail

// --- state 1 (healthy) ------------------------------------------------------

// Lung cancer diagnosed without distant metastases: zeta * (1 - beta).
inline double q12(const EstimatorContext& ctx, int s) {
    detail::check_age(s);
    return band_lookup(ctx.zeta, s) * (1.0 - band_lookup(ctx.beta, s));
}

// Lung cancer diagnosed with distant metastases: zeta * beta.
inline double q13(const EstimatorContext& ctx, int s) {
    detail::check_age(s);
    return band_lookup(ctx.zeta, s) * band_lookup(ctx.beta, s);
}

// Death for a reason other than lung cancer: q_s - varpi.
inline double q17(const EstimatorContext& ctx, int s) {
    detail::check_age(s);
    const double q = ctx.life.q(s);
    const double vp = band_lookup(ctx.varpi, s);
    if (q < vp)
        throw std::runtime_error("q17: life-table q below crude cancer mortality at age " +
                                 std::to_string(s) + " (inconsistent inputs)");
    return q - vp;
}

inline double q11(const EstimatorContext& ctx, int s) {
    const double v = 1.0 - q17(ctx, s) - band_lookup(ctx.zeta, s);
    if (v < 0.0 || v > 1.0)
        throw std::runtime_error("q11 outside [0,1] at age " + std::to_string(s));
    return v;
}

// --- state 2 (cancer without metastases) ------------------------------------

// Probability that a patient without metastases is diagnosed with them
// during the year. Logit in age; fitted for ages >= 45 (two segments for
// men, one for women), held flat below 45 at the 45-year value
// (nearest-neighbor rule).
inline double varrho(const EstimatorContext& ctx, int s) {
    detail::check_age(s);
    const auto& c = ctx.coeffs;
    if (ctx.sex == Sex::female)
        return detail::logistic(c.female_varrho_slope * std::max(s, 45));
    const int s_eff = std::max(s, 45);
    if (s_eff <= 59)
        return detail::logistic(c.male_varrho_45_59_const + c.male_varrho_45_59_slope * s_eff);
    return detail::logistic(c.male_varrho_above_59_const + c.male_varrho_above_59_slope * s_eff);
}

// The two male varrho segments are separate fits and do not join at the
// 59/60 boundary. Reports the step of the fitted curve across the break
// (value at 60 from the upper model minus value at 59 from the lower one).
inline double varrho_break_jump(const CoefficientSet& c) {
    return detail::logistic(c.male_varrho_above_59_const + c.male_varrho_above_59_slope * 60.0) -
           detail::logistic(c.male_varrho_45_59_const + c.male_varrho_45_59_slope * 59.0);
}

struct Q2Row {
    double q22 = 0.0;
    double q23 = 0.0;
    double q27 = 0.0;
};

// Row 2 of the transition matrix. A patient without metastases carries the
// whole life-table mortality (q27 = q_s) on top of the metastasis hazard.
inline Q2Row q2_row(const EstimatorContext& ctx, int s) {
    const double rho = varrho(ctx, s);
    const double q = ctx.life.q(s);
    if (q + rho > 1.0)
        throw std::runtime_error("q22 would be negative at age " + std::to_string(s));
    return Q2Row{1.0 - q - rho, rho, q};
}

// --- states 3..6 (metastatic, terminal) --------------------------------------

struct TerminalDeathProbs {
    double q38 = 0.0;
    double q48 = 0.0;
    double q58 = 0.0;
    double q68 = 1.0;  // nobody survives the fourth year after metastases
};

namespace detail {

// Both terminal models are fitted on ages >= 40; below that the
// nearest-neighbor rule pins everything at the 40-year value.
inline double clamp40(int s) { return static_cast<double>(std::max(s, 40)); }

}  // namespace detail

// Survival after metastatic diagnosis, men: ordered logit for P(T<=1) and
// P(T<=2), cohort weights w0/w1 splitting the first two years.
inline TerminalDeathProbs terminal_probs_male(const CoefficientSet& c, int s) {
    detail::check_age(s);
    const double age = detail::clamp40(s);
    const double m = detail::logistic(c.male_terminal_slope * age);
    const double p_le2 = detail::logistic(c.male_terminal_const3 + c.male_terminal_slope * age);
    TerminalDeathProbs t;
    t.q38 = c.male_terminal_w0 * m;
    t.q48 = c.male_terminal_w1 * m / (1.0 - c.male_terminal_w0 * m);
    // Conditional probability P(T=2 | T>1); the denominator is the
    // survivors of the first two years, 1 - m.
    t.q58 = (p_le2 - m) / (1.0 - m);
    t.q68 = 1.0;
    return t;
}

// Survival after metastatic diagnosis, women: Poisson counts with identity
// link, lambda = w(s).
inline TerminalDeathProbs terminal_probs_female(const CoefficientSet& c, int s) {
    detail::check_age(s);
    const double age = detail::clamp40(s);
    const double w = c.female_terminal_const + c.female_terminal_slope * age;
    if (w <= 0.0)
        throw std::runtime_error("female terminal model: nonpositive Poisson mean at age " +
                                 std::to_string(s));
    const double ew = std::exp(-w);
    TerminalDeathProbs t;
    t.q38 = ew;
    t.q48 = w * ew / (1.0 - ew);
    t.q58 = 0.5 * w * w * ew / (1.0 - (1.0 + w) * ew);
    t.q68 = 1.0;
    return t;
}

inline TerminalDeathProbs terminal_probs(const EstimatorContext& ctx, int s) {
    return ctx.sex == Sex::male ? terminal_probs_male(ctx.coeffs, s)
                                : terminal_probs_female(ctx.coeffs, s);
}

// Distribution of T_s, the number of whole years an s-year-old survives
// after metastatic diagnosis (T_s in {0,1,2,3}). The terminal q_i8 above
// are exactly the hazards of this distribution.
inline std::array<double, 4> survival_pmf(const EstimatorContext& ctx, int s) {
    detail::check_age(s);
    const auto& c = ctx.coeffs;
    const double age = detail::clamp40(s);
    std::array<double, 4> pmf{};
    if (ctx.sex == Sex::male) {
        const double p_le1 = detail::logistic(c.male_terminal_slope * age);
        const double p_le2 = detail::logistic(c.male_terminal_const3 + c.male_terminal_slope * age);
        pmf[0] = c.male_terminal_w0 * p_le1;
        pmf[1] = c.male_terminal_w1 * p_le1;
        pmf[2] = p_le2 - p_le1;
        pmf[3] = 1.0 - p_le2;
    } else {
        const double w = c.female_terminal_const + c.female_terminal_slope * age;
        if (w <= 0.0)
            throw std::runtime_error("female terminal model: nonpositive Poisson mean at age " +
                                     std::to_string(s));
        const double ew = std::exp(-w);
        pmf[0] = ew;
        pmf[1] = w * ew;
        pmf[2] = 0.5 * w * w * ew;
        pmf[3] = 1.0 - pmf[0] - pmf[1] - pmf[2];
    }
    return pmf;
}

}  // namespace cii
