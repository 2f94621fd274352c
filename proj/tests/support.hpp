#pragma once

#include <filesystem>
#include <string>

#include "cii/cii.hpp"

// Shared fixtures over the bundled data set.

inline std::filesystem::path test_data_dir() {
#ifdef CII_TEST_DATA_DIR
    return std::filesystem::path(CII_TEST_DATA_DIR);
#else
    return std::filesystem::path("data");
#endif
}

inline cii::EstimatorContext load_test_context(cii::Sex sex) {
    const auto dir = test_data_dir();
    const std::string suffix = "_" + cii::to_string(sex) + ".csv";
    return cii::EstimatorContext::make(
        sex, cii::load_life_table_file(dir / ("demo_life" + suffix), sex),
        cii::load_banded_table_file(dir / ("incidence" + suffix), sex,
                                    cii::RatePurpose::incidence),
        cii::load_banded_table_file(dir / ("cancer_mortality" + suffix), sex,
                                    cii::RatePurpose::cancer_mortality),
        cii::load_banded_table_file(dir / ("metastasis" + suffix), sex,
                                    cii::RatePurpose::metastasis_share),
        cii::load_coefficients_file(dir / "coefficients.json"));
}

inline const cii::EstimatorContext& test_context(cii::Sex sex) {
    static const cii::EstimatorContext male = load_test_context(cii::Sex::male);
    static const cii::EstimatorContext female = load_test_context(cii::Sex::female);
    return sex == cii::Sex::male ? male : female;
}

inline const cii::MatrixSequence& test_sequence(cii::Sex sex) {
    static const cii::MatrixSequence male(test_context(cii::Sex::male));
    static const cii::MatrixSequence female(test_context(cii::Sex::female));
    return sex == cii::Sex::male ? male : female;
}
