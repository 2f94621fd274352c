#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cii {

// Integer ages (in years) for which transition probabilities are defined.
// Data below 20 is out of coverage; lookups there throw instead of
// extrapolating.
inline constexpr int min_supported_age = 20;
inline constexpr int max_supported_age = 100;

enum class Sex { male, female };

inline std::string to_string(Sex sex) {
    return sex == Sex::male ? "male" : "female";
}

inline Sex sex_from_string(std::string_view s) {
    if (s == "male" || s == "m") return Sex::male;
    if (s == "female" || s == "f") return Sex::female;
    throw std::invalid_argument("unknown sex: '" + std::string(s) + "'");
}

enum class StateKind { transient, reflex, absorbing };

inline std::string to_string(StateKind kind) {
    switch (kind) {
        case StateKind::transient: return "transient";
        case StateKind::reflex: return "reflex";
        case StateKind::absorbing: return "absorbing";
    }
    throw std::logic_error("bad StateKind");
}

inline StateKind state_kind_from_string(std::string_view s) {
    if (s == "transient") return StateKind::transient;
    if (s == "reflex") return StateKind::reflex;
    if (s == "absorbing") return StateKind::absorbing;
    throw std::invalid_argument("unknown state kind: '" + std::string(s) + "'");
}

// What a banded rate table measures. incidence and cancer_mortality are
// crude per-person rates; metastasis_share and year_metastasis are
// plain probabilities.
enum class RatePurpose { incidence, cancer_mortality, metastasis_share, year_metastasis };

inline std::string to_string(RatePurpose p) {
    switch (p) {
        case RatePurpose::incidence: return "incidence";
        case RatePurpose::cancer_mortality: return "cancer_mortality";
        case RatePurpose::metastasis_share: return "metastasis_share";
        case RatePurpose::year_metastasis: return "year_metastasis";
    }
    throw std::logic_error("bad RatePurpose");
}

}  // namespace cii
