#include "kramers/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kramers/errors.hpp"
#include "kramers/parallel.hpp"
#include "kramers/rng.hpp"
#include "kramers/stats.hpp"

namespace kramers {

namespace {

class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

double sorted_w1(std::span<const double> a, std::span<const double> b) {
  const std::uint64_t na = a.size(), nb = b.size();
  CompensatedSum acc;
  if (na == nb) {
    for (std::size_t i = 0; i < na; ++i) acc.add(std::abs(a[i] - b[i]));
    return acc.value() / static_cast<double>(na);
  }
  // Quantile breakpoints i/na and j/nb compared exactly as i*nb vs j*na.
  std::uint64_t i = 0, j = 0, pos = 0;
  const std::uint64_t total = na * nb;
  while (pos < total) {
    const std::uint64_t next = std::min((i + 1) * nb, (j + 1) * na);
    acc.add(static_cast<double>(next - pos) * std::abs(a[i] - b[j]));
    pos = next;
    if (pos == (i + 1) * nb) ++i;
    if (pos == (j + 1) * na) ++j;
  }
  return acc.value() / static_cast<double>(total);
}

std::vector<std::size_t> argsort(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
  return idx;
}

// S(x) = int_x^inf sign(F_a - F_b)(t) dt evaluated at every sample.
void influence_values(std::span<const double> a, const std::vector<std::size_t>& ia,
                      std::span<const double> b, const std::vector<std::size_t>& ib,
                      std::vector<double>& sa, std::vector<double>& sb) {
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  struct Point {
    double z;
    bool from_a;
    std::size_t idx;
  };
  std::vector<Point> pts;
  pts.reserve(n);
  std::size_t p = 0, q = 0;
  while (p < na || q < nb) {
    if (q >= nb || (p < na && a[ia[p]] <= b[ib[q]])) {
      pts.push_back({a[ia[p]], true, ia[p]});
      ++p;
    } else {
      pts.push_back({b[ib[q]], false, ib[q]});
      ++q;
    }
  }
  std::vector<double> sign(n, 0.0);
  std::size_t ca = 0, cb = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (pts[k].from_a ? ca : cb)++;
    const double diff = static_cast<double>(ca) / na - static_cast<double>(cb) / nb;
    sign[k] = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
  }
  sa.assign(na, 0.0);
  sb.assign(nb, 0.0);
  double s = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) s += sign[k] * (pts[k + 1].z - pts[k].z);
    (pts[k].from_a ? sa : sb)[pts[k].idx] = s;
  }
  // Tied values share the value at the largest index of the tie.
  for (std::size_t k = n - 1; k-- > 0;) {
    if (pts[k].z == pts[k + 1].z) {
      const double v = (pts[k + 1].from_a ? sa : sb)[pts[k + 1].idx];
      (pts[k].from_a ? sa : sb)[pts[k].idx] = v;
    }
  }
}

void require_1d(const EmpiricalMeasure& mu) {
  if (mu.dimension() != 1) throw ArgumentError("sorted W1 needs one-dimensional measures");
}

}  // namespace

std::string to_string(TransportMethod m) {
  switch (m) {
    case TransportMethod::sorted_1d:
      return "sorted_1d";
    case TransportMethod::assignment_lp:
      return "assignment_lp";
    case TransportMethod::sliced:
      return "sliced";
  }
  return "unknown";
}

TransportMethod transport_method_from_string(const std::string& s) {
  if (s == "sorted_1d") return TransportMethod::sorted_1d;
  if (s == "assignment_lp") return TransportMethod::assignment_lp;
  if (s == "sliced") return TransportMethod::sliced;
  throw ArgumentError("unknown transport method '" + s + "'");
}

double w1_sorted_values(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("W1 needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return sorted_w1(a, b);
}

TransportResult w1_sorted_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_1d(a);
  require_1d(b);
  auto va = a.positions();
  auto vb = b.positions();
  auto ia = argsort(va), ib = argsort(vb);
  std::vector<double> sa(va.size()), sb(vb.size());
  for (std::size_t i = 0; i < ia.size(); ++i) sa[i] = va[ia[i]];
  for (std::size_t i = 0; i < ib.size(); ++i) sb[i] = vb[ib[i]];

  TransportResult r;
  r.method = TransportMethod::sorted_1d;
  r.n_a = va.size();
  r.n_b = vb.size();
  r.value = sorted_w1(sa, sb);

  std::vector<double> infa, infb;
  influence_values(va, ia, vb, ib, infa, infb);
  double var = 0.0;
  if (infa.size() >= 2) {
    const double ess = stats::effective_sample_size(infa, a.chain_lengths());
    var += stats::variance(infa) / std::max(ess, 1.0);
  }
  if (infb.size() >= 2) {
    const double ess = stats::effective_sample_size(infb, b.chain_lengths());
    var += stats::variance(infb) / std::max(ess, 1.0);
  }
  r.std_error = std::sqrt(var);
  return r;
}

// ---- Assignment ---------------------------------------------------------

std::vector<int> solve_assignment(std::span<const double> cost, int n) {
  if (n < 1 || cost.size() != static_cast<std::size_t>(n) * n)
    throw ArgumentError("assignment needs an n x n cost matrix");
  auto c = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * n + j]; };
  const double big = std::numeric_limits<double>::infinity();
  std::vector<int> rowsol(n, -1), colsol(n, -1), matches(n, 0), free_rows(n), collist(n),
      pred(n);
  std::vector<double> v(n), d(n);

  // Column reduction.
  for (int j = n; j-- > 0;) {
    double mn = c(0, j);
    int imin = 0;
    for (int i = 1; i < n; ++i)
      if (c(i, j) < mn) {
        mn = c(i, j);
        imin = i;
      }
    v[j] = mn;
    if (++matches[imin] == 1) {
      rowsol[imin] = j;
      colsol[j] = imin;
    } else {
      colsol[j] = -1;
    }
  }

  // Reduction transfer.
  int numfree = 0;
  for (int i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      free_rows[numfree++] = i;
    } else if (matches[i] == 1) {
      const int j1 = rowsol[i];
      double mn = big;
      for (int j = 0; j < n; ++j)
        if (j != j1 && c(i, j) - v[j] < mn) mn = c(i, j) - v[j];
      if (mn < big) v[j1] -= mn;
    }
  }

  // Augmenting row reduction, two passes with a cap on reinsertions.
  long budget = 64L * n + 1024;
  for (int pass = 0; pass < 2 && numfree > 0; ++pass) {
    int k = 0;
    const int prvnumfree = numfree;
    numfree = 0;
    while (k < prvnumfree) {
      const int i = free_rows[k++];
      double umin = c(i, 0) - v[0], usubmin = big;
      int j1 = 0, j2 = -1;
      for (int j = 1; j < n; ++j) {
        const double h = c(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      int i0 = colsol[j1];
      const bool strict = umin < usubmin;
      if (strict) {
        v[j1] -= usubmin - umin;
      } else if (i0 > -1 && j2 >= 0) {
        j1 = j2;
        i0 = colsol[j2];
      }
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 > -1) {
        rowsol[i0] = -1;
        if (strict && --budget > 0)
          free_rows[--k] = i0;
        else
          free_rows[numfree++] = i0;
      }
    }
  }

  // Shortest augmenting paths for the remaining free rows.
  for (int f = 0; f < numfree; ++f) {
    const int freerow = free_rows[f];
    for (int j = 0; j < n; ++j) {
      d[j] = c(freerow, j) - v[j];
      pred[j] = freerow;
      collist[j] = j;
    }
    int low = 0, up = 0, last = 0, endofpath = -1;
    double mn = 0.0;
    bool found = false;
    while (!found) {
      if (up == low) {
        last = low - 1;
        mn = d[collist[up++]];
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double h = d[j];
          if (h <= mn) {
            if (h < mn) {
              up = low;
              mn = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (int k = low; k < up; ++k)
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            found = true;
            break;
          }
      }
      if (!found) {
        const int j1 = collist[low++];
        const int i = colsol[j1];
        const double h = c(i, j1) - v[j1] - mn;
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double v2 = c(i, j) - v[j] - h;
          if (v2 < d[j]) {
            pred[j] = i;
            if (v2 == mn) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            d[j] = v2;
          }
        }
      }
    }
    for (int k = 0; k <= last; ++k) {
      const int j1 = collist[k];
      v[j1] += d[j1] - mn;
    }
    int i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      const int j1 = endofpath;
      endofpath = rowsol[i];
      rowsol[i] = j1;
    } while (i != freerow);
  }
  return rowsol;
}

TransportResult w1_assignment_exact(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                    std::size_t cap) {
  if (a.dimension() != b.dimension()) throw ArgumentError("measures differ in dimension");
  if (a.size() != b.size()) throw ArgumentError("assignment W1 needs equal sample counts");
  if (a.size() > cap)
    throw ArgumentError("assignment W1: " + std::to_string(a.size()) +
                        " samples exceed the cap of " + std::to_string(cap));
  const int n = static_cast<int>(a.size());
  const int d = a.dimension();
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    auto x = a.position(i);
    for (int j = 0; j < n; ++j) {
      auto y = b.position(j);
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
      cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
    }
  }
  auto rows = solve_assignment(cost, n);
  CompensatedSum acc;
  for (int i = 0; i < n; ++i) acc.add(cost[static_cast<std::size_t>(i) * n + rows[i]]);
  TransportResult r;
  r.method = TransportMethod::assignment_lp;
  r.n_a = r.n_b = a.size();
  r.value = acc.value() / n;
  return r;
}

// ---- Sliced -------------------------------------------------------------

std::vector<double> sliced_directions(int dimension, int n_proj, std::uint64_t seed) {
  if (dimension < 1 || n_proj < 1) throw ArgumentError("need d >= 1 and n_proj >= 1");
  std::vector<double> dirs(static_cast<std::size_t>(dimension) * n_proj);
  for (int k = 0; k < n_proj; ++k) {
    Rng rng(derive_seed(seed, {stream_tag::kTransport, static_cast<std::uint64_t>(k)}));
    double n2 = 0.0;
    while (n2 == 0.0) {
      n2 = 0.0;
      for (int i = 0; i < dimension; ++i) {
        const double g = rng.normal();
        dirs[k * dimension + i] = g;
        n2 += g * g;
      }
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < dimension; ++i) dirs[k * dimension + i] *= inv;
  }
  return dirs;
}

TransportResult w1_sliced_directions(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                     std::span<const double> directions) {
  const int d = a.dimension();
  if (b.dimension() != d) throw ArgumentError("measures differ in dimension");
  if (d < 2) throw ArgumentError("sliced W1 needs d >= 2");
  if (directions.empty() || directions.size() % d != 0)
    throw ArgumentError("directions must hold whole d-vectors");
  const std::size_t n_proj = directions.size() / d;
  TransportResult r;
  r.method = TransportMethod::sliced;
  r.n_a = a.size();
  r.n_b = b.size();
  r.per_direction.assign(n_proj, 0.0);
  parallel_for(n_proj, [&](std::size_t k) {
    std::vector<double> theta(directions.begin() + k * d, directions.begin() + (k + 1) * d);
    double n2 = 0.0;
    for (double t : theta) n2 += t * t;
    if (!(n2 > 0.0)) throw ArgumentError("zero direction");
    for (double& t : theta) t /= std::sqrt(n2);
    auto project = [&](const EmpiricalMeasure& mu) {
      std::vector<double> p(mu.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        auto x = mu.position(i);
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += theta[j] * x[j];
        p[i] = s;
      }
      return p;
    };
    r.per_direction[k] = w1_sorted_values(project(a), project(b));
  });
  r.value = stats::mean(r.per_direction);
  r.std_error = n_proj > 1 ? std::sqrt(stats::variance(r.per_direction) / n_proj) : 0.0;
  return r;
}

TransportResult w1_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_proj,
                          std::uint64_t seed) {
  if (a.dimension() < 2) throw ArgumentError("sliced W1 needs d >= 2");
  if (n_proj < 1) throw ArgumentError("n_proj must be >= 1");
  auto dirs = sliced_directions(a.dimension(), n_proj, seed);
  return w1_sliced_directions(a, b, dirs);
}

EmpiricalMeasure thin_measure(const EmpiricalMeasure& mu, std::size_t n) {
  if (n == 0) throw ArgumentError("cannot thin to zero samples");
  const std::size_t total = mu.size();
  if (n >= total) return mu;
  const int d = mu.dimension();
  std::vector<double> pos, vel;
  pos.reserve(n * d);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = k * total / n;
    auto x = mu.position(i);
    pos.insert(pos.end(), x.begin(), x.end());
    if (mu.has_velocities()) {
      auto y = mu.velocity(i);
      vel.insert(vel.end(), y.begin(), y.end());
    }
  }
  return EmpiricalMeasure(d, std::move(pos), std::move(vel), {}, mu.provenance());
}

}  // namespace kramers
