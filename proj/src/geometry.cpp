#include "crl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace crl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_dimension(std::size_t expected, std::size_t got) {
    if (expected != got)
        throw std::invalid_argument("dimension mismatch: set has " + std::to_string(expected) + ", vector has " +
                                    std::to_string(got));
}

// Sort-threshold projection onto {z >= 0, sum z = radius}.
void project_scaled_simplex(std::span<double> y, double radius) {
    Vec sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) threshold = candidate;
    }
    double total = 0.0;
    for (double& x : y) {
        x = std::max(x - threshold, 0.0);
        total += x;
    }
    if (total > 0.0) {
        const double fix = radius / total;
        for (double& x : y) x *= fix;
    }
}

}  // namespace

ConvexSet ConvexSet::simplex(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("simplex dimension must be at least 1");
    return ConvexSet(Simplex{dim});
}

ConvexSet ConvexSet::nonneg_l1_ball(std::size_t dim, double radius) {
    if (dim == 0) throw std::invalid_argument("L1 ball dimension must be at least 1");
    if (!(radius > 0.0)) throw std::invalid_argument("L1 ball radius must be positive");
    return ConvexSet(NonnegL1Ball{dim, radius});
}

ConvexSet ConvexSet::box(Vec lower, Vec upper) {
    if (lower.empty() || lower.size() != upper.size()) throw std::invalid_argument("box bounds must be non-empty and equal length");
    for (std::size_t k = 0; k < lower.size(); ++k)
        if (!(lower[k] <= upper[k])) throw std::invalid_argument("box lower bound exceeds upper bound");
    return ConvexSet(Box{std::move(lower), std::move(upper)});
}

ConvexSet ConvexSet::box(std::size_t dim, double lower, double upper) {
    return box(Vec(dim, lower), Vec(dim, upper));
}

std::size_t ConvexSet::dimension() const {
    return std::visit(Overloaded{[](const Simplex& s) { return s.dim; },
                                 [](const NonnegL1Ball& b) { return b.dim; },
                                 [](const Box& b) { return b.lower.size(); }},
                      shape_);
}

bool ConvexSet::contains(std::span<const double> x, double tol) const {
    if (x.size() != dimension()) return false;
    return std::visit(Overloaded{[&](const Simplex&) {
                                     double sum = 0.0;
                                     for (double v : x) {
                                         if (!(v >= -tol)) return false;
                                         sum += v;
                                     }
                                     return std::abs(sum - 1.0) <= tol;
                                 },
                                 [&](const NonnegL1Ball& ball) {
                                     double sum = 0.0;
                                     for (double v : x) {
                                         if (!(v >= -tol)) return false;
                                         sum += std::max(v, 0.0);
                                     }
                                     return sum <= ball.radius + tol;
                                 },
                                 [&](const Box& box) {
                                     for (std::size_t k = 0; k < x.size(); ++k)
                                         if (!(x[k] >= box.lower[k] - tol && x[k] <= box.upper[k] + tol)) return false;
                                     return true;
                                 }},
                      shape_);
}

void ConvexSet::project_in_place(std::span<double> y) const {
    require_dimension(dimension(), y.size());
    std::visit(Overloaded{[&](const Simplex&) { project_scaled_simplex(y, 1.0); },
                          [&](const NonnegL1Ball& ball) {
                              double sum = 0.0;
                              for (double& v : y) {
                                  v = std::max(v, 0.0);
                                  sum += v;
                              }
                              if (sum > ball.radius) project_scaled_simplex(y, ball.radius);
                          },
                          [&](const Box& box) {
                              for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::clamp(y[k], box.lower[k], box.upper[k]);
                          }},
               shape_);
}

Vec ConvexSet::project(std::span<const double> y) const {
    Vec out(y.begin(), y.end());
    project_in_place(out);
    return out;
}

Vec projected_step(const ConvexSet& set, std::span<const double> x, std::span<const double> direction, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("step must be positive");
    require_dimension(set.dimension(), x.size());
    require_dimension(set.dimension(), direction.size());
    if (!set.contains(x, 1e-9)) throw std::invalid_argument("projected_step: starting point lies outside the set");
    Vec out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] + delta * direction[k];
    set.project_in_place(out);
    return out;
}

double variational_inequality_gap(const ConvexSet& set, std::span<const double> b, std::span<const double> c) {
    require_dimension(set.dimension(), b.size());
    const Vec p = set.project(c);
    double gap = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) gap += (b[k] - p[k]) * (c[k] - p[k]);
    return gap;
}

}  // namespace crl
