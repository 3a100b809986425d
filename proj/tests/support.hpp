#pragma once

// GoogleTest assertion helpers on top of the oracles.

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace marvin::test {

inline ::testing::AssertionResult near(const Vec3& a, const Vec3& b, double tol) {
    const double d = distance(a, b);
    if (d <= tol) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << a << " vs " << b << " differ by " << d << " > " << tol;
}

/// |a - b| <= rel * max(|a|, |b|), with an absolute floor for zero vectors.
inline ::testing::AssertionResult rel_near(const Vec3& a, const Vec3& b, double rel) {
    const double scale = std::max({norm(a), norm(b), 1e-300});
    const double d = distance(a, b);
    if (d <= rel * scale) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << a << " vs " << b << " relative difference " << d / scale;
}

} // namespace marvin::test
