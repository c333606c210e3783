#pragma once
// Real trigonometric eigenbasis on the torus [-1,1)^d with the uniform
// probability measure, and Sobolev-type spectra over it.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace diagkernel {

enum class Phase : std::uint8_t { constant = 0, cosine = 1, sine = 2 };

struct MultiIndex {
  std::vector<std::int64_t> m;
  std::vector<Phase> phase;

  std::size_t dim() const noexcept { return m.size(); }
  double norm2() const noexcept {
    double s = 0;
    for (auto k : m) s += static_cast<double>(k) * static_cast<double>(k);
    return s;
  }
  bool valid() const noexcept {
    if (m.size() != phase.size() || m.empty()) return false;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] < 0) return false;
      if ((m[i] == 0) != (phase[i] == Phase::constant)) return false;
    }
    return true;
  }
  // Ordering key: (|m|^2, m, phase code).
  friend bool operator<(const MultiIndex& x, const MultiIndex& y) {
    // |m|^2 is compared exactly in integers; frequencies stay far below 2^31.
    auto sq = [](const MultiIndex& v) {
      unsigned __int128 s = 0;
      for (auto k : v.m) s += static_cast<unsigned __int128>(k) * static_cast<unsigned __int128>(k);
      return s;
    };
    auto sx = sq(x), sy = sq(y);
    if (sx != sy) return sx < sy;
    if (x.m != y.m) return x.m < y.m;
    return x.phase < y.phase;
  }
  friend bool operator==(const MultiIndex& x, const MultiIndex& y) {
    return x.m == y.m && x.phase == y.phase;
  }
  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(m[i]);
      s += phase[i] == Phase::constant ? "" : (phase[i] == Phase::cosine ? "c" : "s");
    }
    return s + ")";
  }
};

struct BasisElement {
  MultiIndex idx;
  double norm_const = 1.0;
};

inline BasisElement make_element(MultiIndex idx) {
  if (!idx.valid()) throw std::invalid_argument("invalid multi-index " + idx.str());
  double c = 1.0;
  for (auto p : idx.phase)
    if (p != Phase::constant) c *= std::numbers::sqrt2;
  return {std::move(idx), c};
}

// k*x reduced into [-1,1) (mod 2). The product error is recovered with an fma so
// frequencies in the billions keep full phase accuracy.
inline double reduced_phase(std::int64_t k, double x) noexcept {
  const double kd = static_cast<double>(k);
  const double p = kd * x;
  const double e = std::fma(kd, x, -p);
  double r = std::fmod(p, 2.0) + e;
  r = std::fmod(r, 2.0);
  if (r >= 1.0) r -= 2.0;
  if (r < -1.0) r += 2.0;
  return r;
}

inline double wrap_coordinate(double x) noexcept {
  if (x >= -1.0 && x < 1.0) return x;
  double r = std::fmod(x + 1.0, 2.0);
  if (r < 0) r += 2.0;
  r -= 1.0;
  return r >= 1.0 ? -1.0 : r;
}

inline double axis_factor(std::int64_t k, Phase ph, double x) noexcept {
  if (ph == Phase::constant) return 1.0;
  const double t = std::numbers::pi * reduced_phase(k, wrap_coordinate(x));
  return std::numbers::sqrt2 * (ph == Phase::cosine ? std::cos(t) : std::sin(t));
}

// Point is anything indexable with size() >= d.
template <class Point>
double eval_basis(const BasisElement& el, const Point& x) {
  double v = 1.0;
  for (std::size_t a = 0; a < el.idx.dim(); ++a) {
    if (el.idx.phase[a] == Phase::constant) continue;
    v *= axis_factor(el.idx.m[a], el.idx.phase[a], static_cast<double>(x[a]));
  }
  return v;
}

inline std::vector<BasisElement> enumerate_basis(int d, std::int64_t max_freq) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (max_freq < 0) throw std::invalid_argument("max_freq must be >= 0");
  const std::int64_t per_axis = 2 * max_freq + 1;
  std::size_t count = 1;
  for (int a = 0; a < d; ++a) count *= static_cast<std::size_t>(per_axis);
  std::vector<MultiIndex> idx;
  idx.reserve(count);
  std::vector<std::int64_t> code(d, 0);
  for (std::size_t c = 0; c < count; ++c) {
    MultiIndex mi;
    mi.m.resize(d);
    mi.phase.resize(d);
    for (int a = 0; a < d; ++a) {
      // 0 -> const, 2k-1 -> cos k, 2k -> sin k
      const auto v = code[a];
      mi.m[a] = (v + 1) / 2;
      mi.phase[a] = v == 0 ? Phase::constant : (v % 2 ? Phase::cosine : Phase::sine);
    }
    idx.push_back(std::move(mi));
    for (int a = d - 1; a >= 0; --a) {
      if (++code[a] < per_axis) break;
      code[a] = 0;
    }
  }
  std::sort(idx.begin(), idx.end());
  std::vector<BasisElement> out;
  out.reserve(count);
  for (auto& mi : idx) out.push_back(make_element(std::move(mi)));
  return out;
}

// Element at 1-based flat rank j of the one-dimensional ordering:
// 1 -> const, 2k -> cos k, 2k+1 -> sin k.
inline BasisElement element_1d(std::int64_t rank) {
  if (rank < 1) throw std::invalid_argument("rank must be >= 1");
  MultiIndex mi{{rank / 2}, {Phase::constant}};
  if (rank > 1) mi.phase[0] = rank % 2 == 0 ? Phase::cosine : Phase::sine;
  return make_element(std::move(mi));
}

inline double sobolev_eigenvalue(const MultiIndex& idx, double r) {
  const double d = static_cast<double>(idx.dim());
  if (!(r > d / 2.0))
    throw std::domain_error("summability error: Sobolev exponent r must exceed d/2");
  return std::pow(1.0 + idx.norm2(), -r);
}

struct OrderedSpectrum {
  int d = 1;
  std::vector<BasisElement> elements;
  std::vector<double> eigenvalues;
  std::vector<std::int64_t> ranks;  // 1-based flat rank of each entry in the full ordering

  std::size_t size() const noexcept { return elements.size(); }
  bool frozen(std::size_t j) const noexcept { return eigenvalues[j] == 0.0; }

  // Position of a multi-index, or -1.
  std::ptrdiff_t find(const MultiIndex& mi) const {
    for (std::size_t j = 0; j < elements.size(); ++j)
      if (elements[j].idx == mi) return static_cast<std::ptrdiff_t>(j);
    return -1;
  }

  std::map<std::int64_t, std::size_t> rank_map() const {
    std::map<std::int64_t, std::size_t> out;
    for (std::size_t j = 0; j < ranks.size(); ++j) out.emplace(ranks[j], j);
    return out;
  }

  bool sorted_descending() const noexcept {
    for (std::size_t j = 1; j < eigenvalues.size(); ++j)
      if (eigenvalues[j] > eigenvalues[j - 1]) return false;
    return true;
  }
};

inline OrderedSpectrum sobolev_spectrum(int d, std::int64_t max_freq, double r) {
  if (!(r > d / 2.0))
    throw std::domain_error("summability error: Sobolev exponent r must exceed d/2");
  OrderedSpectrum s;
  s.d = d;
  s.elements = enumerate_basis(d, max_freq);
  s.eigenvalues.reserve(s.elements.size());
  s.ranks.reserve(s.elements.size());
  for (std::size_t j = 0; j < s.elements.size(); ++j) {
    s.eigenvalues.push_back(sobolev_eigenvalue(s.elements[j].idx, r));
    s.ranks.push_back(static_cast<std::int64_t>(j + 1));
  }
  return s;
}

// One-dimensional Sobolev spectrum restricted to the given flat ranks (sorted,
// unique). Lets experiments keep a few far-out ranks without the dense block
// between them.
inline OrderedSpectrum sobolev_spectrum_1d(std::vector<std::int64_t> ranks, double r) {
  if (!(r > 0.5)) throw std::domain_error("summability error: Sobolev exponent r must exceed d/2");
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  OrderedSpectrum s;
  s.d = 1;
  for (auto j : ranks) {
    s.elements.push_back(element_1d(j));
    s.eigenvalues.push_back(sobolev_eigenvalue(s.elements.back().idx, r));
  }
  s.ranks = std::move(ranks);
  return s;
}

// Zeroes every eigenvalue whose element oscillates along an axis >= d0 and
// moves those entries behind the active ones (stable).
inline OrderedSpectrum low_dim_spectrum(const OrderedSpectrum& spec, int d0) {
  if (d0 < 1 || d0 > spec.d) throw std::invalid_argument("active dims must lie in [1, d]");
  std::vector<std::size_t> order(spec.size());
  std::vector<double> lam(spec.eigenvalues);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    order[j] = j;
    const auto& m = spec.elements[j].idx.m;
    for (int a = d0; a < spec.d; ++a)
      if (m[a] != 0) lam[j] = 0.0;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return lam[x] > lam[y]; });
  OrderedSpectrum out;
  out.d = spec.d;
  for (auto j : order) {
    out.elements.push_back(spec.elements[j]);
    out.eigenvalues.push_back(lam[j]);
    out.ranks.push_back(spec.ranks[j]);
  }
  return out;
}

}  // namespace diagkernel
