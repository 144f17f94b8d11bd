#ifndef SBR_CASCADE_HPP
#define SBR_CASCADE_HPP

#include <cstddef>
#include <memory>
#include <vector>

#include <gmpxx.h>

#include "sbr/filters.hpp"
#include "sbr/interval.hpp"

namespace sbr {

// Filter of the n-th derivative refinement scheme:
// u^(n+1)_k = 2 sum_{i=0}^{k} (-1)^i u^(n)_{k-i}, kept at the full 2K length
// (entries beyond index 2K-1-n enclose exact zeros).
struct DerivedFilter {
  int n = 0;
  int K = 0;
  std::vector<Interval> coeffs;
};

// Requires n <= bank.N: beyond the vanishing-moment count the true derived
// filter is no longer supported on 2K taps and the cascade would be unsound.
DerivedFilter derive_filter(const FilterBank& bank, int n,
                            const PrecisionContext& ctx);

// Arc of level-j cells a..b (taken mod 2^j, so b may exceed 2^j - 1 to
// represent wrap-around), identifying I = 2^(-j)[a, b+1) + Z.
struct TorusWindow {
  long level = 0;
  mpz_class a, b;
  bool full_flag = true;

  static TorusWindow full(long level);
  static TorusWindow arc(long level, mpz_class a, mpz_class b);
  mpz_class cell_count() const { return b - a + 1; }
  mpz_class modulus() const;  // 2^level
};

// J(l) = [floor(2^(l-j) a) - 2K + 2, floor(2^(l-j) b)] + 2^l Z.
struct WindowIndexSet {
  long level = 0;
  mpz_class lo, hi;

  mpz_class count() const { return hi - lo + 1; }
  // membership of an absolute index by residue class mod 2^level
  bool contains(const mpz_class& k) const;
};

WindowIndexSet window_indices(long j, const mpz_class& a, const mpz_class& b,
                              long l, int K);

// One sealed refinement level: for every arc coordinate r in [lo, hi] the
// 2K-1 branch values g_{level, (r mod 2^level) + 2^level * m}. Arcs longer
// than 2^level simply carry duplicate residues with identical values.
struct LevelData {
  long level = 0;
  int K = 0;
  mpz_class lo, hi;
  std::vector<Interval> g;

  long count() const;
  int branches() const { return 2 * K - 1; }
  const Interval& at(long offset, int m) const {
    return g[static_cast<std::size_t>(offset) * branches() + m];
  }
  Interval& at(long offset, int m) {
    return g[static_cast<std::size_t>(offset) * branches() + m];
  }
  // value by absolute index k in [0, 2^level (2K-1)); null when the residue
  // is not retained in the arc
  const Interval* lookup(const mpz_class& k) const;
};

// Cellwise enclosure of f^(n) at level j on a window: f^(n)(x) lies in
// cell(floor(2^j (x + K - 1))) +- eps.hi for every x covered by the window.
// eps is finite only when alpha.lo > 0 or c_const is exactly zero.
struct FunctionEnclosure {
  int n = 0;
  long j = 0;
  int K = 0;
  TorusWindow window;
  mpz_class lo, hi;             // retained arc J(j)
  std::vector<Interval> cells;  // offset-major, 2K-1 branches per offset
  Interval alpha{2}, c_const{2}, eps{2};
  long certificate_level = -1;  // level the certificate was taken from

  int branches() const { return 2 * K - 1; }
  long count() const;
  const Interval& cell_at(long offset, int m) const {
    return cells[static_cast<std::size_t>(offset) * branches() + m];
  }
  // lookup by absolute index; throws IntervalError outside the retained set
  const Interval& cell(const mpz_class& k) const;
  const Interval* find(const mpz_class& k) const;
};

// floor(2^j (x + K - 1)) for exact rational x, the paper's evaluation index.
mpz_class cell_index(const mpq_class& x, long j, int K);

// Incremental ladder over derived orders 0..max_order sharing one window
// path. Levels are sealed in sequence; certificates record per-level row-sum
// and f-maximum statistics so the tightest valid error bound over all
// certified levels can be used at the current depth.
class CascadeLadder {
 public:
  CascadeLadder(const FilterBank& bank, int max_order,
                const PrecisionContext& ctx, std::size_t max_entries = 0,
                const TorusWindow& start = TorusWindow::full(0));

  long level() const { return window_.level; }
  int max_order() const { return static_cast<int>(filters_.size()) - 1; }
  const TorusWindow& window() const { return window_; }
  const DerivedFilter& filter(int order) const { return filters_[order]; }
  const LevelData& data(int order) const { return *levels_[order]; }
  std::shared_ptr<const LevelData> data_ptr(int order) const {
    return levels_[order];
  }

  // entries one more level would need under the given window
  std::size_t entries_for(const TorusWindow& next) const;
  // advance all orders to next.level == level()+1; next must satisfy
  // a' >= 2a and b' <= 2b+1 so the dependency cone stays covered
  void step(const TorusWindow& next);

  struct Certificate {
    Interval alpha{2}, c{2}, eps{2};
    long from_level = -1;
    bool valid = false;
  };
  // best certificate for enclosing f^(n) at the current level (n+1 must be
  // within max_order)
  Certificate certificate(int n) const;
  // decay exponent 1 - log2(max windowed row sum of g^(n+1)) / l at level l
  Interval alpha_at(int n, long l) const;
  // error constant at level l; throws when no contraction holds there
  Interval c_at(int n, long l) const;

  // third factor of the error constant: max_m sum_k |partial parity sums
  // of u^(n) minus 1|
  const Interval& third_factor(int n) const { return third_[n]; }
  // per-level statistics, exposed for tests
  const Interval& row_sum_max(int order, long l) const {
    return rows_[order][l];
  }
  const Interval& f_abs_max(int order, long l) const {
    return fmax_[order][l];
  }

  FunctionEnclosure enclosure(int n, bool allow_uncertified = false) const;

 private:
  void record_stats();
  void cache_certificates();

  PrecisionContext ctx_;
  std::size_t max_entries_;
  std::vector<DerivedFilter> filters_;
  std::vector<std::shared_ptr<const LevelData>> levels_;
  std::vector<Interval> third_;
  std::vector<std::vector<Interval>> coefs_;  // signed binomial rows
  std::vector<std::vector<Interval>> rows_;  // [order][level]
  std::vector<std::vector<Interval>> fmax_;
  struct CertPair {
    long level;
    Interval alpha, c;
  };
  std::vector<std::vector<CertPair>> certs_;  // [n][...]
  TorusWindow window_;
};

// One-shot operations; windowed runs follow the ancestor windows
// floor(a / 2^(j-l)), floor(b / 2^(j-l)), i.e. exactly the J(l) ladder.
LevelData cascade_g(const DerivedFilter& filter, long j,
                    const TorusWindow& window, const PrecisionContext& ctx);
FunctionEnclosure cascade_f(const FilterBank& bank, int n, long j,
                            const TorusWindow& window,
                            const PrecisionContext& ctx,
                            bool allow_uncertified = false);
Interval alpha_bound(const FilterBank& bank, int n, long j,
                     const TorusWindow& window, const PrecisionContext& ctx);
Interval error_constant(const FilterBank& bank, int n, long j,
                        const TorusWindow& window, const PrecisionContext& ctx);

}  // namespace sbr

#endif
