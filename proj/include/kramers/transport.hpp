#ifndef KRAMERS_TRANSPORT_HPP_
#define KRAMERS_TRANSPORT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kramers/ergodic.hpp"

namespace kramers {

enum class TransportMethod { sorted_1d, assignment_lp, sliced };

std::string to_string(TransportMethod m);
TransportMethod transport_method_from_string(const std::string& s);

struct TransportResult {
  double value = 0.0;
  TransportMethod method = TransportMethod::sorted_1d;
  std::size_t n_a = 0, n_b = 0;
  std::optional<double> std_error;
  std::optional<double> self_distance_baseline;
  std::vector<double> per_direction;  // sliced only: W1 of each projection
};

// W1 between two 1D samples: (1/n) sum |a_(i) - b_(i)| for equal counts,
// the integral of |F_a^{-1} - F_b^{-1}| over the merged quantile grid
// otherwise. Throws ArgumentError on empty input.
double w1_sorted_values(std::vector<double> a, std::vector<double> b);

// Sorted 1D W1 of two one-dimensional measures. The standard error is the
// delta-method (influence function) error with autocorrelation-corrected
// sample sizes; it is unreliable when the two laws coincide. Throws
// ArgumentError when either dimension is not 1.
TransportResult w1_sorted_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

inline constexpr std::size_t kDefaultAssignmentCap = 2048;

// Exact W1 via the optimal assignment with Euclidean cost. Throws
// ArgumentError on unequal counts, dimension mismatch or n > cap.
TransportResult w1_assignment_exact(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                    std::size_t cap = kDefaultAssignmentCap);

// Optimal assignment for a dense row-major n x n cost matrix
// (Jonker-Volgenant). Returns the column assigned to each row.
std::vector<int> solve_assignment(std::span<const double> cost, int n);

// n_proj unit directions in R^d, row-major, from Gaussian draws.
std::vector<double> sliced_directions(int dimension, int n_proj, std::uint64_t seed);

// Sliced W1: mean over directions of the sorted 1D W1 of the projections.
// A lower-bound flavoured proxy, not W1 itself. Throws ArgumentError for
// d < 2 or n_proj < 1.
TransportResult w1_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_proj,
                          std::uint64_t seed);
TransportResult w1_sliced_directions(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                     std::span<const double> directions);

// Evenly spaced subsample of n points (the whole measure when n >= size).
EmpiricalMeasure thin_measure(const EmpiricalMeasure& mu, std::size_t n);

}  // namespace kramers

#endif  // KRAMERS_TRANSPORT_HPP_
