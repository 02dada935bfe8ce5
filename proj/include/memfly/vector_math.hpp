#pragma once

#include <span>
#include <vector>

namespace memfly {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scales v to unit length in place. Throws ZeroVector when ‖v‖ = 0.
void normalize_in_place(Vector& v);
Vector normalized(Vector v);

/// Standard cosine similarity, clamped to [-1, 1].
/// Throws DimensionMismatch or ZeroVector.
double cosine(std::span<const double> a, std::span<const double> b);

bool is_unit(std::span<const double> v, double tol = 1e-6);

} // namespace memfly
