#include "memfly/vector_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memfly/error.hpp"

namespace memfly {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "dot of " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double l2_norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void normalize_in_place(Vector& v) {
    const double n = l2_norm(v);
    if (n == 0.0 || !std::isfinite(n)) {
        throw Error(ErrorCode::ZeroVector, "cannot normalize a zero or non-finite vector");
    }
    for (double& x : v) x /= n;
}

Vector normalized(Vector v) {
    normalize_in_place(v);
    return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

bool is_unit(std::span<const double> v, double tol) {
    return std::abs(l2_norm(v) - 1.0) <= tol;
}

} // namespace memfly
