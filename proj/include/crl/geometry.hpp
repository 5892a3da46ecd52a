#pragma once

#include "crl/cmdp.hpp"

#include <cstddef>
#include <span>
#include <variant>

namespace crl {

/// {z : z >= 0, sum z = 1}
struct Simplex {
    std::size_t dim;
};

/// {z : z >= 0, sum z <= radius}
struct NonnegL1Ball {
    std::size_t dim;
    double radius;
};

/// {z : lower <= z <= upper}
struct Box {
    Vec lower;
    Vec upper;
};

/**
 * Closed convex projection target. Projections are exact Euclidean
 * nearest-point maps; the simplex result is renormalized so that its sum is
 * one to machine precision.
 */
class ConvexSet {
public:
    using Shape = std::variant<Simplex, NonnegL1Ball, Box>;

    static ConvexSet simplex(std::size_t dim);
    static ConvexSet nonneg_l1_ball(std::size_t dim, double radius);
    static ConvexSet box(Vec lower, Vec upper);
    /// Cube [lower, upper]^dim.
    static ConvexSet box(std::size_t dim, double lower, double upper);

    std::size_t dimension() const;
    const Shape& shape() const { return shape_; }

    bool contains(std::span<const double> x, double tol = 1e-9) const;

    Vec project(std::span<const double> y) const;
    void project_in_place(std::span<double> y) const;

private:
    explicit ConvexSet(Shape shape) : shape_(std::move(shape)) {}
    Shape shape_;
};

inline Vec project(const ConvexSet& set, std::span<const double> y) { return set.project(y); }

/// Forward-Euler realization of the projected vector field: project(x + delta * direction).
/// Throws std::invalid_argument when x lies outside the set by more than 1e-9.
Vec projected_step(const ConvexSet& set, std::span<const double> x, std::span<const double> direction, double delta);

/// <b - P(c), c - P(c)>, nonpositive for every b in the set.
double variational_inequality_gap(const ConvexSet& set, std::span<const double> b, std::span<const double> c);

}  // namespace crl
