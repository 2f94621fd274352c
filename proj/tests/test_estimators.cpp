#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support.hpp"

using namespace cii;
using Catch::Matchers::WithinAbs;

namespace {

// Context with handcrafted tables, for edge cases the bundled data cannot
// reach. Each table is a single band over the supported range.
EstimatorContext custom_context(Sex sex, double flat_q, double zeta, double varpi, double beta,
                                CoefficientSet coeffs = default_coefficients()) {
    std::vector<double> q(101, flat_q);
    auto banded = [&](RatePurpose purpose, double value) {
        BandedRateTable t;
        t.sex = sex;
        t.purpose = purpose;
        t.bands = {{AgeBand{20, 100}, value}};
        return t;
    };
    return EstimatorContext::make(sex, life_table_from_q(sex, 0, q),
                                  banded(RatePurpose::incidence, zeta),
                                  banded(RatePurpose::cancer_mortality, varpi),
                                  banded(RatePurpose::metastasis_share, beta), coeffs);
}

}  // namespace

TEST_CASE("q12/q13 split the incidence by the metastasis share") {
    const EstimatorContext& male = test_context(Sex::male);
    const EstimatorContext& female = test_context(Sex::female);
    // 0.00302086 * (1 - 0.50166) and the female pair at 57.
    CHECK_THAT(q12(male, 62), WithinAbs(0.0015054153724, 1e-12));
    CHECK_THAT(q12(female, 57), WithinAbs(0.000406331972, 1e-12));
    CHECK_THAT(q13(female, 57), WithinAbs(0.000476768028, 1e-12));

    SECTION("q12 + q13 recovers the incidence rate at every age") {
        for (const EstimatorContext* ctx : {&male, &female})
            for (int s = min_supported_age; s <= max_supported_age; ++s)
                CHECK_THAT(q12(*ctx, s) + q13(*ctx, s),
                           WithinAbs(band_lookup(ctx->zeta, s), 1e-15));
    }
    SECTION("degenerate shares") {
        const EstimatorContext all = custom_context(Sex::male, 0.01, 0.002, 0.001, 1.0);
        CHECK(q12(all, 50) == 0.0);
        CHECK_THAT(q13(all, 50), WithinAbs(0.002, 1e-15));
        const EstimatorContext none = custom_context(Sex::male, 0.01, 0.002, 0.001, 0.0);
        CHECK(q13(none, 50) == 0.0);
        CHECK_THAT(q12(none, 50), WithinAbs(0.002, 1e-15));
    }
    SECTION("age outside the supported range") {
        CHECK_THROWS_AS(q12(male, 19), std::out_of_range);
        CHECK_THROWS_AS(q13(male, 101), std::out_of_range);
    }
}

TEST_CASE("q17 subtracts the crude cancer mortality from q") {
    const EstimatorContext flat = custom_context(Sex::male, 0.02, 0.003, 0.00297606, 0.5);
    CHECK_THAT(q17(flat, 62), WithinAbs(0.01702394, 1e-15));

    const EstimatorContext zero_varpi = custom_context(Sex::male, 0.02, 0.003, 0.0, 0.5);
    CHECK(q17(zero_varpi, 62) == 0.02);

    // q below the crude cancer mortality signals inconsistent inputs.
    const EstimatorContext bad = custom_context(Sex::male, 0.001, 0.003, 0.00297606, 0.5);
    CHECK_THROWS_AS(q17(bad, 62), std::runtime_error);
}

TEST_CASE("q11 completes row 1 to probability one") {
    for (Sex sex : {Sex::male, Sex::female}) {
        const EstimatorContext& ctx = test_context(sex);
        for (int s = min_supported_age; s <= max_supported_age; ++s)
            CHECK_THAT(q11(ctx, s) + q12(ctx, s) + q13(ctx, s) + q17(ctx, s),
                       WithinAbs(1.0, 1e-15));
    }
    const EstimatorContext plain = custom_context(Sex::male, 0.02, 0.0, 0.0, 0.5);
    CHECK_THAT(q11(plain, 40), WithinAbs(0.98, 1e-15));
}

TEST_CASE("varrho follows the fitted logit segments") {
    const EstimatorContext& male = test_context(Sex::male);
    const EstimatorContext& female = test_context(Sex::female);

    CHECK_THAT(varrho(male, 50), WithinAbs(0.1581470578, 1e-10));
    CHECK_THAT(varrho(male, 65), WithinAbs(0.1939100414, 1e-10));
    CHECK_THAT(varrho(female, 60), WithinAbs(0.1872346199, 1e-10));

    SECTION("nearest-neighbor plateau below 45, exactly") {
        for (int s = min_supported_age; s < 45; ++s) {
            CHECK(varrho(male, s) == varrho(male, 45));
            CHECK(varrho(female, s) == varrho(female, 45));
        }
        CHECK_THAT(varrho(male, 45), WithinAbs(0.105946629491, 1e-10));
        CHECK_THAT(varrho(female, 45), WithinAbs(0.249541335024, 1e-10));
    }
    SECTION("male segments hand over after age 59 with a reported jump") {
        CHECK_THAT(varrho(male, 59), WithinAbs(0.300960126156, 1e-10));
        CHECK_THAT(varrho(male, 60), WithinAbs(0.25921722777, 1e-10));
        CHECK_THAT(varrho_break_jump(male.coeffs), WithinAbs(-0.041742898, 1e-8));
    }
}

TEST_CASE("row 2 combines metastasis hazard with full life-table mortality") {
    for (Sex sex : {Sex::male, Sex::female}) {
        const EstimatorContext& ctx = test_context(sex);
        for (int s = min_supported_age; s <= max_supported_age; ++s) {
            const Q2Row r = q2_row(ctx, s);
            CHECK_THAT(r.q22 + r.q23 + r.q27, WithinAbs(1.0, 1e-15));
            CHECK(r.q27 == ctx.life.q(s));
            CHECK(r.q23 == varrho(ctx, s));
        }
    }
    SECTION("vanishing metastasis hazard leaves (1-q, 0, q)") {
        CoefficientSet coeffs = default_coefficients();
        coeffs.female_varrho_slope = -1000.0;  // logistic underflows to 0
        const EstimatorContext ctx = custom_context(Sex::female, 0.01, 0.001, 0.0005, 0.5, coeffs);
        const Q2Row r = q2_row(ctx, 50);
        CHECK(r.q23 == 0.0);
        CHECK(r.q27 == 0.01);
        CHECK_THAT(r.q22, WithinAbs(0.99, 1e-15));
    }
    SECTION("q + varrho above one is rejected") {
        const EstimatorContext ctx = custom_context(Sex::female, 0.9, 0.001, 0.0005, 0.5);
        CHECK_THROWS_AS(q2_row(ctx, 50), std::runtime_error);
    }
}

TEST_CASE("male terminal model reproduces the published constants") {
    const CoefficientSet c = default_coefficients();
    // Flat on [20, 40] by the nearest-neighbor rule, equal to the printed
    // piecewise constants within 1e-5.
    for (int s : {20, 30, 40}) {
        const TerminalDeathProbs t = terminal_probs_male(c, s);
        CHECK_THAT(t.q38, WithinAbs(0.768485, 1e-5));
        CHECK_THAT(t.q48, WithinAbs(0.380912, 1e-5));
        CHECK_THAT(t.q58, WithinAbs(0.953154, 1e-5));
        CHECK(t.q68 == 1.0);
    }
    const TerminalDeathProbs at40 = terminal_probs_male(c, 40);
    for (int s = 20; s <= 40; ++s) {
        const TerminalDeathProbs t = terminal_probs_male(c, s);
        CHECK(t.q38 == at40.q38);
        CHECK(t.q48 == at40.q48);
        CHECK(t.q58 == at40.q58);
    }
    // Spot values from an independent evaluation of the fitted formulas.
    CHECK_THAT(terminal_probs_male(c, 70).q38, WithinAbs(0.8594431797, 1e-9));
    const TerminalDeathProbs t50 = terminal_probs_male(c, 50);
    CHECK_THAT(t50.q38, WithinAbs(0.810349328848, 1e-10));
    CHECK_THAT(t50.q48, WithinAbs(0.490326389661, 1e-10));
    CHECK_THAT(t50.q58, WithinAbs(0.955466283752, 1e-10));
    const TerminalDeathProbs t100 = terminal_probs_male(c, 100);
    CHECK_THAT(t100.q38, WithinAbs(0.886904295661, 1e-10));
    CHECK_THAT(t100.q48, WithinAbs(0.899907815958, 1e-10));
    CHECK_THAT(t100.q58, WithinAbs(0.959153287435, 1e-10));
}

TEST_CASE("female terminal model reproduces the published constants") {
    const CoefficientSet c = default_coefficients();
    for (int s : {20, 30, 40}) {
        const TerminalDeathProbs t = terminal_probs_female(c, s);
        CHECK_THAT(t.q38, WithinAbs(0.715503, 1e-5));
        CHECK_THAT(t.q48, WithinAbs(0.841937, 1e-5));
        CHECK_THAT(t.q58, WithinAbs(0.891591, 1e-5));
        CHECK(t.q68 == 1.0);
    }
    const TerminalDeathProbs at40 = terminal_probs_female(c, 40);
    for (int s = 20; s <= 40; ++s) {
        const TerminalDeathProbs t = terminal_probs_female(c, s);
        CHECK(t.q38 == at40.q38);
        CHECK(t.q48 == at40.q48);
        CHECK(t.q58 == at40.q58);
    }
    CHECK_THAT(terminal_probs_female(c, 60).q38, WithinAbs(0.7976550844, 1e-9));
    const TerminalDeathProbs t80 = terminal_probs_female(c, 80);
    CHECK_THAT(t80.q38, WithinAbs(0.889248104258, 1e-10));
    CHECK_THAT(t80.q48, WithinAbs(0.942458388906, 1e-10));
    CHECK_THAT(t80.q58, WithinAbs(0.961259348909, 1e-10));

    // The Poisson mean stays positive on the supported domain; a coefficient
    // set that drives it negative is reported.
    CoefficientSet broken = c;
    broken.female_terminal_const = -1.0;
    CHECK_THROWS_AS(terminal_probs_female(broken, 50), std::runtime_error);
}

TEST_CASE("terminal probabilities are the hazards of the survival pmf") {
    for (Sex sex : {Sex::male, Sex::female}) {
        const EstimatorContext& ctx = test_context(sex);
        for (int s = min_supported_age; s <= max_supported_age; ++s) {
            const auto pmf = survival_pmf(ctx, s);
            const TerminalDeathProbs t = terminal_probs(ctx, s);
            double total = 0.0;
            for (double p : pmf) {
                CHECK(p >= 0.0);
                total += p;
            }
            CHECK_THAT(total, WithinAbs(1.0, 1e-15));
            CHECK_THAT(t.q38, WithinAbs(pmf[0], 1e-15));
            // The two evaluation routes cancel differently; near the top of
            // the age range the pmf denominators shrink to ~4e-5, so allow
            // for the amplified rounding noise.
            CHECK_THAT(t.q48, WithinAbs(pmf[1] / (1.0 - pmf[0]), 1e-10));
            CHECK_THAT(t.q58, WithinAbs(pmf[2] / (1.0 - pmf[0] - pmf[1]), 1e-10));
        }
    }
    // Female spot value: P(T=0) at 60 is exp(-w(60)).
    CHECK_THAT(survival_pmf(test_context(Sex::female), 60)[0], WithinAbs(0.7976550844, 1e-9));
}

TEST_CASE("terminal death probabilities increase with age beyond 40") {
    const CoefficientSet c = default_coefficients();
    for (int s = 41; s <= max_supported_age; ++s) {
        CHECK(terminal_probs_male(c, s).q38 > terminal_probs_male(c, s - 1).q38);
        CHECK(terminal_probs_female(c, s).q38 > terminal_probs_female(c, s - 1).q38);
    }
}

TEST_CASE("all estimator outputs are probabilities") {
    for (Sex sex : {Sex::male, Sex::female}) {
        const EstimatorContext& ctx = test_context(sex);
        for (int s = min_supported_age; s <= max_supported_age; ++s) {
            for (double v : {q11(ctx, s), q12(ctx, s), q13(ctx, s), q17(ctx, s), varrho(ctx, s)}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            const TerminalDeathProbs t = terminal_probs(ctx, s);
            for (double v : {t.q38, t.q48, t.q58, t.q68}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}
