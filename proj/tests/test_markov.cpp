#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace cii;
using Catch::Matchers::WithinAbs;

namespace {

using Matrix8 = std::array<std::array<double, n_states>, n_states>;

Matrix8 multiply(const Matrix8& a, const Matrix8& b) {
    Matrix8 out{};
    for (std::size_t i = 0; i < n_states; ++i)
        for (std::size_t k = 0; k < n_states; ++k) {
            if (a[i][k] == 0.0) continue;
            for (std::size_t j = 0; j < n_states; ++j) out[i][j] += a[i][k] * b[k][j];
        }
    return out;
}

}  // namespace

TEST_CASE("assembled matrices are stochastic with the model's sparsity") {
    const MultiStateModel model = build_cii_model();
    for (Sex sex : {Sex::male, Sex::female}) {
        const MatrixSequence& seq = test_sequence(sex);
        for (int s = min_supported_age; s <= max_supported_age; ++s) {
            const TransitionMatrix& M = seq.at_age(s);
            for (int i = 1; i <= n_states; ++i) {
                CHECK_THAT(M.row_sum(i), WithinAbs(1.0, 1e-12));
                for (int j = 1; j <= n_states; ++j) {
                    const double v = M.at(i, j);
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                    if (i != j) {
                        // Off-diagonal support must equal the transition set.
                        if (model.has_transition(i, j)) CHECK(v > 0.0);
                        else CHECK(v == 0.0);
                    }
                }
            }
            // Absorbing rows are unit self-loops.
            CHECK(M.at(7, 7) == 1.0);
            CHECK(M.at(8, 8) == 1.0);
            // Reflex states never stay put.
            for (int i = 3; i <= 6; ++i) CHECK(M.at(i, i) == 0.0);
        }
    }
}

TEST_CASE("matrix entries match the published terminal constants") {
    const TransitionMatrix& M = test_sequence(Sex::male).at_age(30);
    CHECK_THAT(M.at(3, 8), WithinAbs(0.768485, 1e-5));
    CHECK_THAT(M.at(6, 8), WithinAbs(1.0, 0.0));
}

TEST_CASE("trajectory propagates the occupancy distribution") {
    const MatrixSequence& seq = test_sequence(Sex::male);
    const EstimatorContext& ctx = test_context(Sex::male);

    SECTION("zero-term trajectory is just the start vector") {
        const OccupancyTrajectory traj = trajectory(seq, 50, 0);
        REQUIRE(traj.p.size() == 1);
        CHECK(traj.prob(0, 1) == 1.0);
        for (int j = 2; j <= n_states; ++j) CHECK(traj.prob(0, j) == 0.0);
    }
    SECTION("one step from state 1 lands in state 2 with q12") {
        const OccupancyTrajectory traj = trajectory(seq, 50, 1);
        CHECK(traj.prob(1, 2) == q12(ctx, 50));
        CHECK(traj.prob(1, 3) == q13(ctx, 50));
        CHECK(traj.prob(1, 7) == q17(ctx, 50));
    }
    SECTION("mass is conserved and absorption is monotone") {
        const OccupancyTrajectory traj = trajectory(seq, 20, 80);
        double prev_absorbed = 0.0;
        for (int k = 0; k <= traj.horizon(); ++k) {
            double total = 0.0;
            for (int j = 1; j <= n_states; ++j) total += traj.prob(k, j);
            CHECK_THAT(total, WithinAbs(1.0, 1e-12));
            const double absorbed = traj.prob(k, 7) + traj.prob(k, 8);
            CHECK(absorbed >= prev_absorbed);
            prev_absorbed = absorbed;
        }
    }
    SECTION("window preconditions") {
        CHECK_THROWS_AS(trajectory(seq, 19, 5), std::invalid_argument);
        CHECK_THROWS_AS(trajectory(seq, 50, 51), std::invalid_argument);
        CHECK_THROWS_AS(trajectory(seq, 50, -1), std::invalid_argument);
    }
}

TEST_CASE("trajectory equals the matrix-product recomputation") {
    // Chapman-Kolmogorov check against an independent full-matrix product.
    for (Sex sex : {Sex::male, Sex::female}) {
        const MatrixSequence& seq = test_sequence(sex);
        const int x = 40, n = 30;
        const OccupancyTrajectory traj = trajectory(seq, x, n);

        Matrix8 product = seq.at_age(x).q;
        for (int k = 1; k < n; ++k) product = multiply(product, seq.at_age(x + k).q);
        for (int j = 1; j <= n_states; ++j)
            CHECK_THAT(traj.prob(n, j), WithinAbs(product[0][static_cast<std::size_t>(j - 1)], 1e-12));
    }
}

TEST_CASE("aggregation view reindexes the base sequence by attained age") {
    const MatrixSequence& seq = test_sequence(Sex::female);
    const AggregationView view{&seq, 47};
    for (int k = 0; k <= 53; ++k) {
        const TransitionMatrix& by_duration = view.at_duration(k);
        const TransitionMatrix& by_age = seq.at_age(47 + k);
        CHECK(&by_duration == &by_age);  // same cached matrix, exact equality
        CHECK(by_duration.age == 47 + k);
    }
}

TEST_CASE("simulation is reproducible and respects absorption") {
    const MatrixSequence& seq = test_sequence(Sex::male);

    SECTION("a fixed seed reproduces the run bit for bit") {
        const SimulationResult a = simulate(seq, 50, 20, 5000, 12345);
        const SimulationResult b = simulate(seq, 50, 20, 5000, 12345);
        CHECK(a.occupancy_counts == b.occupancy_counts);
        CHECK(a.transition_counts == b.transition_counts);
        const SimulationResult c = simulate(seq, 50, 20, 5000, 54321);
        CHECK(a.occupancy_counts != c.occupancy_counts);
    }
    SECTION("worker split does not change the merged counts") {
        const SimulationResult a = simulate(seq, 50, 20, 20000, 99, 1);
        const SimulationResult b = simulate(seq, 50, 20, 20000, 99, 4);
        CHECK(a.occupancy_counts == b.occupancy_counts);
        CHECK(a.transition_counts == b.transition_counts);
    }
    SECTION("single path walks the chain") {
        const SimulationResult one = simulate(seq, 50, 20, 1, 7);
        for (const auto& counts : one.occupancy_counts) {
            std::uint64_t total = 0;
            for (std::uint64_t c : counts) total += c;
            CHECK(total == 1);
        }
    }
    SECTION("paths never leave the absorbing states") {
        const SimulationResult sim = simulate(seq, 20, 80, 20000, 4242);
        for (int i : {7, 8})
            for (int j = 1; j <= n_states; ++j)
                if (j != i)
                    CHECK(sim.transition_counts[static_cast<std::size_t>(i - 1)]
                                               [static_cast<std::size_t>(j - 1)] == 0);
    }
    SECTION("empirical occupancy approaches the analytic trajectory") {
        const OccupancyTrajectory traj = trajectory(seq, 50, 20);
        const SimulationResult sim = simulate(seq, 50, 20, 100000, 20080101);
        CHECK(max_abs_deviation(sim, traj) < 0.008);
    }
    SECTION("at least one path required") {
        CHECK_THROWS_AS(simulate(seq, 50, 10, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("increment-decrement table synthesis") {
    const double radix = 100000.0;
    for (Sex sex : {Sex::male, Sex::female}) {
        const MatrixSequence& seq = test_sequence(sex);
        const IncrementDecrementTable table = synthesize_idtable(seq, radix, 20, 100);

        SECTION("cohort starts healthy at the radix (" + to_string(sex) + ")") {
            CHECK(table.rows.front().l[0] == radix);
            for (int i = 1; i < 6; ++i) CHECK(table.rows.front().l[static_cast<std::size_t>(i)] == 0.0);
        }
        SECTION("lives plus cumulative deaths conserve the radix (" + to_string(sex) + ")") {
            double cumulative_deaths = 0.0;
            for (const auto& row : table.rows) {
                double alive = 0.0;
                for (double l : row.l) alive += l;
                CHECK_THAT(alive + cumulative_deaths, WithinAbs(radix, 1e-6));
                // transitions into 7 or 8: indices of (1,7),(2,7),(3,8),(4,8),(5,8),(6,8)
                for (std::size_t t = 0; t < cii_transitions.size(); ++t)
                    if (cii_transitions[t].second >= 7) cumulative_deaths += row.d[t];
            }
        }
        SECTION("state 6 holds exactly the previous year's inflow (" + to_string(sex) + ")") {
            for (std::size_t r = 1; r < table.rows.size(); ++r) {
                // d(5,6) is column 9 in the canonical transition order.
                CHECK(table.rows[r].l[5] == table.rows[r - 1].d[9]);
            }
        }
        SECTION("the advance satisfies the increment-decrement recurrence (" + to_string(sex) +
                ")") {
            // next l = l - outflow + inflow, up to rounding at the radix scale.
            for (std::size_t r = 1; r < table.rows.size(); ++r) {
                const auto& prev = table.rows[r - 1];
                for (int i = 1; i <= 6; ++i) {
                    double expected = prev.l[static_cast<std::size_t>(i - 1)];
                    for (std::size_t t = 0; t < cii_transitions.size(); ++t) {
                        if (cii_transitions[t].first == i) expected -= prev.d[t];
                        if (cii_transitions[t].second == i) expected += prev.d[t];
                    }
                    CHECK_THAT(table.rows[r].l[static_cast<std::size_t>(i - 1)],
                               WithinAbs(expected, 1e-9));
                    CHECK(table.rows[r].l[static_cast<std::size_t>(i - 1)] >= 0.0);
                }
            }
        }
        SECTION("inversion recovers every transition probability (" + to_string(sex) + ")") {
            double worst = 0.0;
            for (const auto& row : table.rows) {
                const TransitionMatrix recovered = transition_probs_from_table(table, row.age);
                const TransitionMatrix& original = seq.at_age(row.age);
                for (int i = 1; i <= 6; ++i) {
                    if (row.l[static_cast<std::size_t>(i - 1)] <= 0.0) continue;
                    for (int j = 1; j <= n_states; ++j)
                        worst = std::max(worst,
                                         std::abs(recovered.at(i, j) - original.at(i, j)));
                }
            }
            CHECK(worst < 1e-9);
        }
    }
    SECTION("bad parameters are rejected") {
        const MatrixSequence& seq = test_sequence(Sex::male);
        CHECK_THROWS_AS(synthesize_idtable(seq, 0.0, 20, 100), std::invalid_argument);
        CHECK_THROWS_AS(synthesize_idtable(seq, 1.0, 10, 100), std::invalid_argument);
        CHECK_THROWS_AS(synthesize_idtable(seq, 1.0, 60, 101), std::invalid_argument);
    }
    SECTION("rounded copy is integer-valued and leaves the original intact") {
        const MatrixSequence& seq = test_sequence(Sex::male);
        const IncrementDecrementTable table = synthesize_idtable(seq, radix, 20, 100);
        const IncrementDecrementTable rounded = rounded_idtable(table);
        bool any_fractional = false;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            for (double l : rounded.rows[r].l) CHECK(l == std::round(l));
            for (double d : rounded.rows[r].d) CHECK(d == std::round(d));
            for (double l : table.rows[r].l) any_fractional = any_fractional || l != std::round(l);
        }
        CHECK(any_fractional);  // the working table keeps exact expected counts
    }
}
