#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "saul/errors.hpp"

namespace saul {

using SampleId = std::uint64_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNormTolerance = 1e-9;

struct LabeledSample {
    SampleId id = 0;
    Vector x;
    int y = 1;  // +1 or -1

    friend bool operator==(const LabeledSample& a, const LabeledSample& b) {
        return a.id == b.id && a.y == b.y && a.x.size() == b.x.size() && a.x == b.x;
    }
};

inline void check_unit_ball(const Vector& x) {
    const double n = x.norm();
    if (!(n <= 1.0 + kNormTolerance)) {
        throw DomainViolation("feature vector norm " + std::to_string(n) + " exceeds 1");
    }
}

inline void check_label(int y) {
    if (y != 1 && y != -1) throw InvalidArgument("label must be +1 or -1, got " + std::to_string(y));
}

// Validates a dataset: consistent dimension, unit-ball features, binary labels, unique ids.
inline void validate_samples(std::span<const LabeledSample> samples) {
    std::unordered_set<SampleId> seen;
    seen.reserve(samples.size());
    const auto dim = samples.empty() ? Eigen::Index{0} : samples.front().x.size();
    for (const auto& s : samples) {
        if (s.x.size() != dim) throw InvalidArgument("inconsistent feature dimension");
        check_unit_ball(s.x);
        check_label(s.y);
        if (!seen.insert(s.id).second) throw InvalidArgument("duplicate sample id " + std::to_string(s.id));
    }
}

// sign with sign(0) := +1
inline int sign_label(double v) { return v >= 0.0 ? 1 : -1; }

}  // namespace saul
