#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cii/common.hpp"
#include "cii/estimators.hpp"
#include "cii/state_model.hpp"

namespace cii {

inline constexpr int n_states = 8;

using StateVector = std::array<double, n_states>;

// One-year transition matrix at a given attained age. Entries are stored
// row-major with 0-based indices; at(i, j) takes the 1-based state labels.
struct TransitionMatrix {
    int age = 0;
    std::array<std::array<double, n_states>, n_states> q{};

    double at(int i, int j) const {
        return q[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
    }
    double row_sum(int i) const {
        double s = 0.0;
        for (double v : q[static_cast<std::size_t>(i - 1)]) s += v;
        return s;
    }
};

// Fills the matrix for attained age s from the fitted estimators. Rows 1
// and 2 close with their own survival complements, rows 3..5 pair the
// next-stage move with the terminal death probability, row 6 moves to
// state 8 with certainty, and rows 7..8 are absorbing.
inline TransitionMatrix assemble(const EstimatorContext& ctx, int s) {
    TransitionMatrix M;
    M.age = s;
    auto set = [&M](int i, int j, double v) {
        M.q[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = v;
    };
    set(1, 1, q11(ctx, s));
    set(1, 2, q12(ctx, s));
    set(1, 3, q13(ctx, s));
    set(1, 7, q17(ctx, s));

    const Q2Row r2 = q2_row(ctx, s);
    set(2, 2, r2.q22);
    set(2, 3, r2.q23);
    set(2, 7, r2.q27);

    const TerminalDeathProbs t = terminal_probs(ctx, s);
    set(3, 4, 1.0 - t.q38);
    set(3, 8, t.q38);
    set(4, 5, 1.0 - t.q48);
    set(4, 8, t.q48);
    set(5, 6, 1.0 - t.q58);
    set(5, 8, t.q58);
    set(6, 8, t.q68);

    set(7, 7, 1.0);
    set(8, 8, 1.0);
    return M;
}

// The full age-indexed matrix sequence for one sex, precomputed over the
// supported range and immutable afterwards. Contracts share it freely.
class MatrixSequence {
public:
    explicit MatrixSequence(const EstimatorContext& ctx) : sex_(ctx.sex) {
        matrices_.reserve(max_supported_age - min_supported_age + 1);
        for (int s = min_supported_age; s <= max_supported_age; ++s)
            matrices_.push_back(assemble(ctx, s));
    }

    Sex sex() const { return sex_; }
    int first_age() const { return min_supported_age; }
    int last_age() const { return max_supported_age; }

    const TransitionMatrix& at_age(int s) const {
        if (s < min_supported_age || s > max_supported_age)
            throw std::out_of_range("matrix sequence: age " + std::to_string(s) +
                                    " outside supported range");
        return matrices_[static_cast<std::size_t>(s - min_supported_age)];
    }

private:
    Sex sex_;
    std::vector<TransitionMatrix> matrices_;
};

// Attained-age view of the sequence for a given entry age: the matrix for
// duration k is the base matrix at age x+k (hypothesis of aggregation).
struct AggregationView {
    const MatrixSequence* base = nullptr;
    int entry_age = 0;

    const TransitionMatrix& at_duration(int k) const { return base->at_age(entry_age + k); }
};

// State distribution vectors P(0..n) for a cohort entering at age x.
struct OccupancyTrajectory {
    int entry_age = 0;
    std::vector<StateVector> p;  // p[k][state-1]

    int horizon() const { return static_cast<int>(p.size()) - 1; }
    double prob(int k, int state) const {
        return p[static_cast<std::size_t>(k)][static_cast<std::size_t>(state - 1)];
    }
};

namespace detail {

inline void check_projection_window(int entry_age, int term) {
    if (entry_age < min_supported_age)
        throw std::invalid_argument("entry age must be at least " +
                                    std::to_string(min_supported_age));
    if (term < 0) throw std::invalid_argument("term must be nonnegative");
    if (entry_age + term > max_supported_age)
        throw std::invalid_argument("entry age + term exceeds supported age " +
                                    std::to_string(max_supported_age));
}

inline StateVector step(const StateVector& p, const TransitionMatrix& M) {
    StateVector next{};
    for (std::size_t i = 0; i < n_states; ++i) {
        const double pi = p[i];
        if (pi == 0.0) continue;
        for (std::size_t j = 0; j < n_states; ++j) next[j] += pi * M.q[i][j];
    }
    return next;
}

}  // namespace detail

inline OccupancyTrajectory trajectory(const MatrixSequence& seq, int entry_age, int term,
                                      const StateVector& p0) {
    detail::check_projection_window(entry_age, term);
    OccupancyTrajectory traj;
    traj.entry_age = entry_age;
    traj.p.reserve(static_cast<std::size_t>(term) + 1);
    traj.p.push_back(p0);
    for (int k = 0; k < term; ++k)
        traj.p.push_back(detail::step(traj.p.back(), seq.at_age(entry_age + k)));
    return traj;
}

// Default start: everyone healthy (unit mass on state 1).
inline OccupancyTrajectory trajectory(const MatrixSequence& seq, int entry_age, int term) {
    StateVector p0{};
    p0[0] = 1.0;
    return trajectory(seq, entry_age, term, p0);
}

// ---------------------------------------------------------------------------
// Monte Carlo simulation
// ---------------------------------------------------------------------------

// Counter-based generator used for simulation so that runs reproduce
// bit-identically across platforms and thread counts given (algorithm,
// seed). Each path draws from its own substream derived from (seed, path).
inline constexpr const char* rng_algorithm = "splitmix64";

struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g{seed ^ (0x9E3779B97F4A7C15ULL * (index + 1))};
    return g.next();
}

struct SimulationResult {
    int entry_age = 0;
    std::uint64_t paths = 0;
    std::uint64_t seed = 0;
    std::string rng_name = rng_algorithm;
    // occupancy_counts[k][state-1]: paths in `state` at duration k.
    std::vector<std::array<std::uint64_t, n_states>> occupancy_counts;
    // transition_counts[i-1][j-1]: one-step moves i -> j summed over paths
    // and durations (self-loops included).
    std::array<std::array<std::uint64_t, n_states>, n_states> transition_counts{};

    std::vector<StateVector> frequencies() const {
        std::vector<StateVector> freq(occupancy_counts.size());
        for (std::size_t k = 0; k < occupancy_counts.size(); ++k)
            for (std::size_t j = 0; j < n_states; ++j)
                freq[k][j] = static_cast<double>(occupancy_counts[k][j]) /
                             static_cast<double>(paths);
        return freq;
    }
};

namespace detail {

inline int sample_next_state(const TransitionMatrix& M, int state, double u) {
    const auto& row = M.q[static_cast<std::size_t>(state - 1)];
    double cum = 0.0;
    int last_positive = state;
    for (int j = 0; j < n_states; ++j) {
        if (row[static_cast<std::size_t>(j)] <= 0.0) continue;
        cum += row[static_cast<std::size_t>(j)];
        last_positive = j + 1;
        if (u < cum) return j + 1;
    }
    // Row sums can fall a few ulp short of 1; the draw then lands on the
    // last reachable state.
    return last_positive;
}

struct SimShard {
    std::vector<std::array<std::uint64_t, n_states>> occupancy;
    std::array<std::array<std::uint64_t, n_states>, n_states> transitions{};
};

inline void simulate_range(const MatrixSequence& seq, int entry_age, int term,
                           std::uint64_t seed, std::uint64_t first_path,
                           std::uint64_t last_path, SimShard& shard) {
    shard.occupancy.assign(static_cast<std::size_t>(term) + 1, {});
    for (std::uint64_t p = first_path; p < last_path; ++p) {
        SplitMix64 gen{substream_seed(seed, p)};
        int state = 1;
        ++shard.occupancy[0][static_cast<std::size_t>(state - 1)];
        for (int k = 0; k < term; ++k) {
            const TransitionMatrix& M = seq.at_age(entry_age + k);
            const int next = sample_next_state(M, state, gen.next_unit());
            ++shard.transitions[static_cast<std::size_t>(state - 1)]
                               [static_cast<std::size_t>(next - 1)];
            state = next;
            ++shard.occupancy[static_cast<std::size_t>(k) + 1]
                             [static_cast<std::size_t>(state - 1)];
        }
    }
}

}  // namespace detail

// Simulates i.i.d. chain paths starting in state 1. Deterministic given
// (seed, paths): the per-path substreams make the merged counts independent
// of the worker split. threads = 0 picks the hardware concurrency.
inline SimulationResult simulate(const MatrixSequence& seq, int entry_age, int term,
                                 std::uint64_t paths, std::uint64_t seed,
                                 unsigned threads = 1) {
    detail::check_projection_window(entry_age, term);
    if (paths < 1) throw std::invalid_argument("simulate: need at least one path");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, paths));

    std::vector<detail::SimShard> shards(threads);
    if (threads == 1) {
        detail::simulate_range(seq, entry_age, term, seed, 0, paths, shards[0]);
    } else {
        std::vector<std::thread> workers;
        const std::uint64_t chunk = (paths + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint64_t lo = t * chunk;
            const std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, paths);
            workers.emplace_back([&, lo, hi, t] {
                detail::simulate_range(seq, entry_age, term, seed, lo, hi, shards[t]);
            });
        }
        for (auto& w : workers) w.join();
    }

    SimulationResult result;
    result.entry_age = entry_age;
    result.paths = paths;
    result.seed = seed;
    result.occupancy_counts.assign(static_cast<std::size_t>(term) + 1, {});
    for (const auto& shard : shards) {
        for (std::size_t k = 0; k < result.occupancy_counts.size(); ++k)
            for (std::size_t j = 0; j < n_states; ++j)
                result.occupancy_counts[k][j] += shard.occupancy[k][j];
        for (std::size_t i = 0; i < n_states; ++i)
            for (std::size_t j = 0; j < n_states; ++j)
                result.transition_counts[i][j] += shard.transitions[i][j];
    }
    return result;
}

// Largest |empirical - analytic| over all durations and states.
inline double max_abs_deviation(const SimulationResult& sim, const OccupancyTrajectory& traj) {
    if (sim.occupancy_counts.size() != traj.p.size())
        throw std::invalid_argument("deviation: horizon mismatch");
    const auto freq = sim.frequencies();
    double worst = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k)
        for (std::size_t j = 0; j < n_states; ++j)
            worst = std::max(worst, std::abs(freq[k][j] - traj.p[k][j]));
    return worst;
}

// ---------------------------------------------------------------------------
// Multiple increment-decrement table
// ---------------------------------------------------------------------------

struct IdTableRow {
    int age = 0;
    std::array<double, 6> l{};   // occupants of transient states 1..6
    std::array<double, 12> d{};  // decrements, in cii_transitions order
};

// Synthesized cohort table: expected (fractional) counts, so that the
// transition probabilities can be recovered exactly by division.
struct IncrementDecrementTable {
    Sex sex = Sex::male;
    double radix = 0.0;
    std::vector<IdTableRow> rows;

    int first_age() const { return rows.front().age; }
    int last_age() const { return rows.back().age; }

    const IdTableRow& at_age(int s) const {
        if (rows.empty() || s < first_age() || s > last_age())
            throw std::out_of_range("increment-decrement table does not cover age " +
                                    std::to_string(s));
        return rows[static_cast<std::size_t>(s - first_age())];
    }
};

// Starts a cohort of `radix` healthy lives at age_lo and advances the
// state counts one year at a time: decrements are expected flows
// d^{ij} = l^i q_ij, and each next l collects stayers plus inflows.
inline IncrementDecrementTable synthesize_idtable(const MatrixSequence& seq, double radix,
                                                  int age_lo, int age_hi) {
    if (radix <= 0.0) throw std::invalid_argument("radix must be positive");
    if (age_lo < min_supported_age || age_hi > max_supported_age || age_lo > age_hi)
        throw std::invalid_argument("idtable: bad age range");

    IncrementDecrementTable table;
    table.sex = seq.sex();
    table.radix = radix;

    std::array<double, 6> l{};
    l[0] = radix;
    for (int s = age_lo; s <= age_hi; ++s) {
        const TransitionMatrix& M = seq.at_age(s);
        IdTableRow row;
        row.age = s;
        row.l = l;
        for (std::size_t t = 0; t < cii_transitions.size(); ++t) {
            const auto [i, j] = cii_transitions[t];
            row.d[t] = l[static_cast<std::size_t>(i - 1)] * M.at(i, j);
        }
        std::array<double, 6> next{};
        for (int i = 1; i <= 6; ++i)
            next[static_cast<std::size_t>(i - 1)] =
                l[static_cast<std::size_t>(i - 1)] * M.at(i, i);
        for (std::size_t t = 0; t < cii_transitions.size(); ++t) {
            const auto [i, j] = cii_transitions[t];
            if (j <= 6) next[static_cast<std::size_t>(j - 1)] += row.d[t];
        }
        table.rows.push_back(row);
        l = next;
    }
    return table;
}

// Integer-rounded copy for presentation. Rounding breaks the exact
// recurrence and the inversion, so only the fractional table is ever fed
// back into computations.
inline IncrementDecrementTable rounded_idtable(const IncrementDecrementTable& table) {
    IncrementDecrementTable out = table;
    for (auto& row : out.rows) {
        for (double& l : row.l) l = std::round(l);
        for (double& d : row.d) d = std::round(d);
    }
    return out;
}

// Recovers the transition matrix at age s from the table counts: for a
// transient state, q_ij = d^{ij}/l^i and the diagonal takes the rest; an
// absorbing state keeps its unit self-loop. States with no occupants have
// no defined probabilities and are left as unit self-loops.
inline TransitionMatrix transition_probs_from_table(const IncrementDecrementTable& table, int s) {
    const IdTableRow& row = table.at_age(s);
    TransitionMatrix M;
    M.age = s;
    for (int i = 1; i <= 6; ++i) {
        const double li = row.l[static_cast<std::size_t>(i - 1)];
        if (li <= 0.0) {
            M.q[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(i - 1)] = 1.0;
            continue;
        }
        double outflow = 0.0;
        for (std::size_t t = 0; t < cii_transitions.size(); ++t) {
            const auto [from, to] = cii_transitions[t];
            if (from != i) continue;
            const double qij = row.d[t] / li;
            M.q[static_cast<std::size_t>(from - 1)][static_cast<std::size_t>(to - 1)] = qij;
            outflow += qij;
        }
        M.q[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(i - 1)] = 1.0 - outflow;
    }
    M.q[6][6] = 1.0;
    M.q[7][7] = 1.0;
    return M;
}

}  // namespace cii
