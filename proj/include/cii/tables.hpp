#pragma once

#include <cmath>
#include <cstdlib>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cii/common.hpp"
#include "cii/io.hpp"

namespace cii {

// ---------------------------------------------------------------------------
// Life table
// ---------------------------------------------------------------------------

struct LifeTableRow {
    double l = 0.0;  // alive at exact age s
    double d = 0.0;  // deaths during [s, s+1)
    double q = 0.0;  // one-year death probability
};

struct LifeTable {
    Sex sex = Sex::male;
    int first_age = 0;
    std::vector<LifeTableRow> rows;

    int last_age() const { return first_age + static_cast<int>(rows.size()) - 1; }
    bool covers(int age) const { return age >= first_age && age <= last_age(); }

    const LifeTableRow& row(int age) const {
        if (!covers(age))
            throw std::out_of_range("life table (" + to_string(sex) + ") does not cover age " +
                                    std::to_string(age));
        return rows[static_cast<std::size_t>(age - first_age)];
    }
    double q(int age) const { return row(age).q; }
    double l(int age) const { return row(age).l; }
    double d(int age) const { return row(age).d; }
};

namespace detail {

inline void check_life_table(const LifeTable& t) {
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const int age = t.first_age + static_cast<int>(i);
        if (r.l < 0.0 || r.d < 0.0)
            throw std::runtime_error("life table: negative l or d at age " + std::to_string(age));
        if (r.d > r.l)
            throw std::runtime_error("life table: d exceeds l at age " + std::to_string(age));
        if (r.q < 0.0 || r.q > 1.0)
            throw std::runtime_error("life table: q outside [0,1] at age " + std::to_string(age));
        if (r.l > 0.0 && std::abs(r.q - r.d / r.l) > 1e-9)
            throw std::runtime_error("life table: q != d/l at age " + std::to_string(age));
        if (i + 1 < t.rows.size()) {
            const auto& next = t.rows[i + 1];
            if (next.l > r.l)
                throw std::runtime_error("life table: l increases with age at age " +
                                         std::to_string(age + 1));
            if (std::abs(next.l - (r.l - r.d)) > 1e-6 * (r.l + 1.0))
                throw std::runtime_error("life table: l(s+1) != l(s) - d(s) at age " +
                                         std::to_string(age));
        }
    }
}

}  // namespace detail

// Builds the l/d columns from a q column and a starting radix.
inline LifeTable life_table_from_q(Sex sex, int first_age, std::span<const double> q,
                                   double radix = 100000.0) {
    LifeTable t;
    t.sex = sex;
    t.first_age = first_age;
    t.rows.resize(q.size());
    double l = radix;
    for (std::size_t i = 0; i < q.size(); ++i) {
        t.rows[i].l = l;
        t.rows[i].q = q[i];
        t.rows[i].d = l * q[i];
        l -= t.rows[i].d;
    }
    detail::check_life_table(t);
    return t;
}

// CSV loader. Accepts `age,l,d` or `age,q` (radix 100000 in the latter
// case). Ages must be contiguous integers.
inline LifeTable load_life_table(std::istream& in, Sex sex) {
    const CsvTable csv = read_csv(in);
    const bool has_ld = csv.header.size() == 3 && csv.header[0] == "age" &&
                        csv.header[1] == "l" && csv.header[2] == "d";
    const bool has_q = csv.header.size() == 2 && csv.header[0] == "age" && csv.header[1] == "q";
    if (!has_ld && !has_q)
        throw std::runtime_error("life table: header must be 'age,l,d' or 'age,q'");
    if (csv.rows.empty()) throw std::runtime_error("life table: no data rows");

    const int first_age = static_cast<int>(csv.rows.front()[0]);
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const double age = csv.rows[i][0];
        if (age != std::floor(age) || age != first_age + static_cast<double>(i))
            throw std::runtime_error("life table: ages must be contiguous integers (row " +
                                     std::to_string(i + 1) + ")");
    }

    if (has_q) {
        std::vector<double> q;
        q.reserve(csv.rows.size());
        for (const auto& row : csv.rows) q.push_back(row[1]);
        for (double v : q)
            if (v < 0.0 || v > 1.0) throw std::runtime_error("life table: q outside [0,1]");
        return life_table_from_q(sex, first_age, q);
    }

    LifeTable t;
    t.sex = sex;
    t.first_age = first_age;
    t.rows.resize(csv.rows.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        t.rows[i].l = csv.rows[i][1];
        t.rows[i].d = csv.rows[i][2];
        t.rows[i].q = t.rows[i].l > 0.0 ? t.rows[i].d / t.rows[i].l : 0.0;
    }
    detail::check_life_table(t);
    return t;
}

inline LifeTable load_life_table_file(const std::filesystem::path& path, Sex sex) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    try {
        return load_life_table(in, sex);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Banded rate tables (five-year age groups, step function over ages)
// ---------------------------------------------------------------------------

struct AgeBand {
    int lo = 0;  // inclusive
    int hi = 0;  // inclusive

    bool contains(int age) const { return age >= lo && age <= hi; }
};

struct BandedRateTable {
    Sex sex = Sex::male;
    RatePurpose purpose = RatePurpose::incidence;
    std::vector<std::pair<AgeBand, double>> bands;  // ascending, contiguous

    int min_age() const { return bands.front().first.lo; }
    int max_age() const { return bands.back().first.hi; }
    bool covers(int age) const { return age >= min_age() && age <= max_age(); }
};

namespace detail {

inline void check_banded_table(const BandedRateTable& t) {
    if (t.bands.empty()) throw std::runtime_error("banded table: no bands");
    const bool crude =
        t.purpose == RatePurpose::incidence || t.purpose == RatePurpose::cancer_mortality;
    for (std::size_t i = 0; i < t.bands.size(); ++i) {
        const auto& [band, value] = t.bands[i];
        if (band.lo > band.hi)
            throw std::runtime_error("banded table: band lo > hi at row " + std::to_string(i + 1));
        if (i + 1 < t.bands.size() && t.bands[i + 1].first.lo != band.hi + 1)
            throw std::runtime_error("banded table: bands must be contiguous and disjoint (row " +
                                     std::to_string(i + 2) + ")");
        if (value < 0.0 || value > 1.0)
            throw std::runtime_error("banded table: value outside [0,1] at row " +
                                     std::to_string(i + 1));
        // Crude lung-cancer rates above 5% per year would mean corrupt input.
        if (crude && value >= 0.05)
            throw std::runtime_error("banded table: implausibly large crude rate at row " +
                                     std::to_string(i + 1));
    }
}

}  // namespace detail

// CSV loader, header `age_lo,age_hi,value` with both bounds inclusive.
// Incidence and cancer-mortality values are published per 100000 and are
// converted to per-person rates here; shares/probabilities load as-is.
inline BandedRateTable load_banded_table(std::istream& in, Sex sex, RatePurpose purpose) {
    const CsvTable csv = read_csv(in);
    if (csv.header != std::vector<std::string>{"age_lo", "age_hi", "value"})
        throw std::runtime_error("banded table: header must be 'age_lo,age_hi,value'");
    const bool per_100k =
        purpose == RatePurpose::incidence || purpose == RatePurpose::cancer_mortality;
    BandedRateTable t;
    t.sex = sex;
    t.purpose = purpose;
    for (const auto& row : csv.rows) {
        AgeBand band{static_cast<int>(row[0]), static_cast<int>(row[1])};
        double value = per_100k ? row[2] / 100000.0 : row[2];
        t.bands.emplace_back(band, value);
    }
    detail::check_banded_table(t);
    return t;
}

inline BandedRateTable load_banded_table_file(const std::filesystem::path& path, Sex sex,
                                              RatePurpose purpose) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    try {
        return load_banded_table(in, sex, purpose);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// Step-function lookup: the value of the band containing `age`.
inline double band_lookup(const BandedRateTable& t, int age) {
    for (const auto& [band, value] : t.bands)
        if (band.contains(age)) return value;
    throw std::out_of_range(to_string(t.purpose) + " table (" + to_string(t.sex) +
                            ") does not cover age " + std::to_string(age));
}

// Per-band arithmetic mean of several years of crude rates. All inputs must
// share sex, purpose, and band layout.
inline BandedRateTable average_crude_rates(std::span<const BandedRateTable> per_year) {
    if (per_year.empty()) throw std::invalid_argument("average_crude_rates: no tables");
    BandedRateTable avg = per_year.front();
    for (std::size_t y = 1; y < per_year.size(); ++y) {
        const auto& t = per_year[y];
        if (t.sex != avg.sex || t.purpose != avg.purpose)
            throw std::invalid_argument("average_crude_rates: mixed sex or purpose");
        if (t.bands.size() != avg.bands.size())
            throw std::invalid_argument("average_crude_rates: mismatched bands");
        for (std::size_t b = 0; b < avg.bands.size(); ++b) {
            if (t.bands[b].first.lo != avg.bands[b].first.lo ||
                t.bands[b].first.hi != avg.bands[b].first.hi)
                throw std::invalid_argument("average_crude_rates: mismatched bands");
            avg.bands[b].second += t.bands[b].second;
        }
    }
    for (auto& [band, value] : avg.bands) value /= static_cast<double>(per_year.size());
    return avg;
}

// ---------------------------------------------------------------------------
// Regression coefficients
// ---------------------------------------------------------------------------

// Fitted coefficients of the metastasis-diagnosis logit models and the
// terminal survival models. Loaded from JSON; the values bundled under
// data/ are the checked-in defaults.
struct CoefficientSet {
    double female_varrho_slope = 0.0;
    double male_varrho_45_59_const = 0.0;
    double male_varrho_45_59_slope = 0.0;
    double male_varrho_above_59_const = 0.0;
    double male_varrho_above_59_slope = 0.0;
    double male_terminal_const3 = 0.0;
    double male_terminal_slope = 0.0;
    double male_terminal_w0 = 0.0;
    double male_terminal_w1 = 0.0;
    double female_terminal_const = 0.0;
    double female_terminal_slope = 0.0;
    std::string note;

    void validate() const {
        const double coeffs[] = {female_varrho_slope,        male_varrho_45_59_const,
                                 male_varrho_45_59_slope,    male_varrho_above_59_const,
                                 male_varrho_above_59_slope, male_terminal_const3,
                                 male_terminal_slope,        male_terminal_w0,
                                 male_terminal_w1,           female_terminal_const,
                                 female_terminal_slope};
        for (double c : coeffs)
            if (!std::isfinite(c)) throw std::runtime_error("coefficient set: non-finite value");
        if (std::abs(male_terminal_w0 + male_terminal_w1 - 1.0) > 1e-9)
            throw std::runtime_error("coefficient set: w0 + w1 != 1");
    }
};

// The coefficient values shipped in data/coefficients.json.
inline CoefficientSet default_coefficients() {
    CoefficientSet c;
    c.female_varrho_slope = -0.024468;
    c.male_varrho_45_59_const = -6.27958;
    c.male_varrho_45_59_slope = 0.09215;
    c.male_varrho_above_59_const = 3.447079;
    c.male_varrho_above_59_slope = -0.074952;
    c.male_terminal_const3 = 3.208851;
    c.male_terminal_slope = 0.044698;
    c.male_terminal_w0 = 0.897059;
    c.male_terminal_w1 = 0.102941;
    c.female_terminal_const = 0.552179;
    c.female_terminal_slope = -0.005435;
    c.note = "bundled defaults";
    c.validate();
    return c;
}

inline CoefficientSet load_coefficients(std::istream& in) {
    nlohmann::json j;
    in >> j;
    CoefficientSet c;
    auto get = [&](const char* key) {
        if (!j.contains(key))
            throw std::runtime_error(std::string("coefficient set: missing key '") + key + "'");
        return j.at(key).get<double>();
    };
    c.female_varrho_slope = get("female_varrho_slope");
    c.male_varrho_45_59_const = get("male_varrho_45_59_const");
    c.male_varrho_45_59_slope = get("male_varrho_45_59_slope");
    c.male_varrho_above_59_const = get("male_varrho_above_59_const");
    c.male_varrho_above_59_slope = get("male_varrho_above_59_slope");
    c.male_terminal_const3 = get("male_terminal_const3");
    c.male_terminal_slope = get("male_terminal_slope");
    c.male_terminal_w0 = get("male_terminal_w0");
    c.male_terminal_w1 = get("male_terminal_w1");
    c.female_terminal_const = get("female_terminal_const");
    c.female_terminal_slope = get("female_terminal_slope");
    c.note = j.value("note", "");
    c.validate();
    return c;
}

inline CoefficientSet load_coefficients_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    try {
        return load_coefficients(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

inline nlohmann::json to_json(const CoefficientSet& c) {
    return {{"note", c.note},
            {"female_varrho_slope", c.female_varrho_slope},
            {"male_varrho_45_59_const", c.male_varrho_45_59_const},
            {"male_varrho_45_59_slope", c.male_varrho_45_59_slope},
            {"male_varrho_above_59_const", c.male_varrho_above_59_const},
            {"male_varrho_above_59_slope", c.male_varrho_above_59_slope},
            {"male_terminal_const3", c.male_terminal_const3},
            {"male_terminal_slope", c.male_terminal_slope},
            {"male_terminal_w0", c.male_terminal_w0},
            {"male_terminal_w1", c.male_terminal_w1},
            {"female_terminal_const", c.female_terminal_const},
            {"female_terminal_slope", c.female_terminal_slope}};
}

}  // namespace cii
