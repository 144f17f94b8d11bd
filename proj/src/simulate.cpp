#include "sbr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <utility>

#include "sbr/asymptotics.hpp"
#include "kernels/path_kernel.hpp"

namespace sbr {

namespace {

// SplitMix64 with a double-mixed per-rep key: substreams start at scrambled
// positions of the underlying counter sequence, so distinct reps share no
// draws except with probability ~ (total draws)^2 / 2^64.
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Stream {
  std::uint64_t s;
  explicit Stream(std::uint64_t s0) : s(s0) {}
  std::uint64_t next() {
    s += kGolden;
    return mix64(s);
  }
};

std::uint64_t substream_key(std::uint64_t seed, std::uint64_t rep) {
  return mix64(seed ^ mix64(rep * kGolden + 0x243F6A8885A308D3ULL));
}

// uniform in [2^-54, 1 - 2^-54], symmetric around 1/2, never an endpoint
double u01(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double horner8(const double* c, double r) {
  double acc = c[7];
  for (int k = 6; k >= 0; --k) acc = acc * r + c[k];
  return acc;
}

// extra margin on the pruning bound for double rounding in the fma chains
constexpr double kFloatSlop = 1e-9;

FilterBank make_bank(const SimulationConfig& cfg, const PrecisionContext& ctx) {
  switch (cfg.family) {
    case Family::daubechies:
      return daubechies_filter(cfg.N, ctx);
    case Family::symlet:
      return symlet_filter(cfg.N, ctx);
    case Family::custom:
      if (cfg.bank_path.empty()) {
        throw std::invalid_argument("custom family requires bank_path");
      }
      return load_filter(cfg.bank_path, ctx);
  }
  throw std::invalid_argument("unknown filter family");
}

}  // namespace

double normal_quantile(double p) {
  // Wichura's algorithm AS 241, PPND16 coefficient set.
  static constexpr double A[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2,
      1.9715909503065514427e3,  1.3731693765509461125e4,
      4.5921953931549871457e4,  6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static constexpr double B[8] = {
      1.0,                      4.2313330701600911252e1,
      6.8718700749205790830e2,  5.3941960214247511077e3,
      2.1213794301586595867e4,  3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static constexpr double C[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0,
      5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double D[8] = {
      1.0,                      2.05319162663775882187e0,
      1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double E[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0,
      1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double F[8] = {
      1.0,                      5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile requires p in (0, 1)");
  }
  double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    double r = 0.180625 - q * q;
    return q * horner8(A, r) / horner8(B, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = horner8(C, r) / horner8(D, r);
  } else {
    r -= 5.0;
    val = horner8(E, r) / horner8(F, r);
  }
  return q < 0.0 ? -val : val;
}

struct PathSampler::Impl {
  SimulationConfig cfg;
  PrecisionContext ctx;
  FilterBank bank;
  bool indicator = false;
  bool verified = false;
  VerificationReport vr;
  Interval sigma_bar_sq{2};
  Interval upsilon_iv{2};
  double inv_sigma = 1.0;

  long j = 0, m = 0, jphi = 0;
  long cells = 0;  // 2^j unit intervals
  long nz = 0;     // weights per path
  int taps = 0;    // 2K - 1 active shifts

  double table_err = 0.0;  // certified |phi/sigma_bar - table| sup bound
  double s1_ub = 0.0;      // certified sup_t sum_k |phi'(t-k)| / sigma_bar

  std::vector<long> depths;  // scan depths, last == m
  std::vector<std::vector<double>> tables;  // per depth: (2K-1) 2^d + 1
  std::vector<double> bound_coef;           // pruning slope per depth

  kern::unit_max_fn kern_fn = nullptr;
  const char* kern_name = "scalar";

  void fill_z(std::uint64_t rep, std::vector<double>& z, double* zmax) const {
    Stream st(substream_key(cfg.seed, rep));
    double zm = 0.0;
    for (long i = 0; i < nz; ++i) {
      double g = normal_quantile(u01(st.next()));
      z[static_cast<std::size_t>(i)] = g;
      double mag = std::fabs(g);
      if (mag > zm) zm = mag;
    }
    if (zmax != nullptr) *zmax = zm;
  }
};

PathSampler::PathSampler(const SimulationConfig& cfg,
                         const PrecisionContext& ctx)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  im.cfg = cfg;
  im.ctx = ctx;
  if (cfg.j < 0 || cfg.j > 28) {
    throw std::invalid_argument("domain level j must be in [0, 28]");
  }
  if (cfg.reps < 1) throw std::invalid_argument("reps must be positive");
  if (cfg.phi_level < 1 || cfg.phi_level > 26) {
    throw std::invalid_argument("phi_level must be in [1, 26]");
  }
  if (cfg.coarse_depth < 1) {
    throw std::invalid_argument("coarse_depth must be positive");
  }

  im.bank = make_bank(cfg, ctx);
  const int K = im.bank.K;
  im.indicator = (K == 1);
  im.j = cfg.j;
  im.m = cfg.grid_depth;
  im.jphi = im.indicator ? 0 : cfg.phi_level;
  // the grid must resolve the cells the values were certified on
  if (im.m < 3 + im.jphi) {
    throw std::invalid_argument("grid_depth must be at least phi_level + 3");
  }
  if (im.m > 26) throw std::invalid_argument("grid_depth too large");
  im.cells = 1L << im.j;
  im.taps = 2 * K - 1;
  im.nz = im.cells + 2L * K - 2;

  std::vector<double> cell_mid;  // scaled midpoints per absolute cell index
  if (im.indicator) {
    im.sigma_bar_sq = Interval::point_si(1, ctx);
    // no curvature constant exists for the indicator scheme
    im.upsilon_iv = Interval::from_strings("-inf", "inf", ctx);
    im.inv_sigma = 1.0;
    cell_mid.assign(static_cast<std::size_t>(1) << im.jphi, 1.0);
  } else {
    im.vr = verify_assumption(im.bank, cfg.constants_tol,
                              cfg.verify_max_level, ctx);
    if (!im.vr.verified) {
      throw std::invalid_argument("variance constants not verified: " +
                                  im.vr.note);
    }
    im.verified = true;
    im.sigma_bar_sq = im.vr.sigma_bar_sq;
    im.upsilon_iv = im.vr.upsilon;
    im.inv_sigma = 1.0 / std::sqrt(im.sigma_bar_sq.mid_double());

    CascadeLadder ladder(im.bank, 2, ctx);
    for (long l = 1; l <= im.jphi; ++l) {
      ladder.step(TorusWindow::full(l));
    }
    FunctionEnclosure e0 = ladder.enclosure(0);
    FunctionEnclosure e1 = ladder.enclosure(1);
    if (!e0.eps.is_finite() || !e1.eps.is_finite()) {
      throw std::invalid_argument(
          "cascade error bounds not certified at the value table level");
    }

    const long total = (static_cast<long>(im.taps)) << im.jphi;
    cell_mid.resize(static_cast<std::size_t>(total));
    double max_hw = 0.0;
    for (long k = 0; k < total; ++k) {
      const Interval& c = e0.cell(mpz_class(k));
      cell_mid[static_cast<std::size_t>(k)] = c.mid_double() * im.inv_sigma;
      double hw = 0.5 * c.width_double();
      if (hw > max_hw) max_hw = hw;
    }
    im.table_err = (e0.eps.hi_double() + max_hw) * im.inv_sigma;

    double s1_raw = 0.0;
    const double eps1 = e1.eps.hi_double();
    for (long o = 0; o < e1.count(); ++o) {
      double row = 0.0;
      for (int b = 0; b < im.taps; ++b) {
        const Interval& c = e1.cell_at(o, b);
        row += std::max(std::fabs(c.lo_double()), std::fabs(c.hi_double()));
      }
      if (row > s1_raw) s1_raw = row;
    }
    im.s1_ub = (s1_raw + im.taps * eps1) * im.inv_sigma;
  }

  long m0 = std::min(cfg.coarse_depth, im.m);
  for (long d = m0; d < im.m; d += 3) im.depths.push_back(d);
  im.depths.push_back(im.m);

  // value tables per scan depth; grid points index the certified cells
  // exactly (both grids are dyadic), so coarse tables are restrictions of
  // the fine one and a rescan can only increase a cell maximum
  for (long d : im.depths) {
    const long tm = 1L << d;
    std::vector<double> tbl(static_cast<std::size_t>(im.taps) * tm + 1, 0.0);
    for (int a = 0; a < im.taps; ++a) {
      for (long i = 0; i < tm; ++i) {
        const long g = static_cast<long>(a) * tm + i;
        const long q = d >= im.jphi ? (g >> (d - im.jphi))
                                    : (g << (im.jphi - d));
        tbl[static_cast<std::size_t>(g)] = cell_mid[static_cast<std::size_t>(q)];
      }
    }
    im.tables.push_back(std::move(tbl));
    // fine maximum over one unit cell exceeds the depth-d scan by at most
    // the oscillation of the table process between neighbouring points
    im.bound_coef.push_back(
        im.s1_ub * (std::ldexp(1.0, static_cast<int>(-d)) +
                    std::ldexp(1.0, static_cast<int>(-im.jphi))) +
        2.0 * im.taps * im.table_err);
  }

  im.kern_fn = kern::select_unit_max();
  im.kern_name = kern::selected_kernel_name();
}

PathSampler::~PathSampler() = default;

double PathSampler::sup_one(std::uint64_t rep, double* zmax_out) const {
  const Impl& im = *impl_;
  std::vector<double> z(static_cast<std::size_t>(im.nz));
  im.fill_z(rep, z, zmax_out);

  std::vector<double> zmu(static_cast<std::size_t>(im.cells));
  for (long u = 0; u < im.cells; ++u) {
    double zm = 0.0;
    for (int a = 0; a < im.taps; ++a) {
      double mag = std::fabs(z[static_cast<std::size_t>(u + a)]);
      if (mag > zm) zm = mag;
    }
    zmu[static_cast<std::size_t>(u)] = zm;
  }

  const long tm0 = 1L << im.depths[0];
  std::vector<double> cmax(static_cast<std::size_t>(im.cells));
  double best = 0.0;
  for (long u = 0; u < im.cells; ++u) {
    const long cnt = tm0 + (u == im.cells - 1 ? 1 : 0);
    double v = im.kern_fn(z.data() + u + im.taps - 1,
                          im.tables[0].data(), tm0, im.taps, cnt);
    cmax[static_cast<std::size_t>(u)] = v;
    if (v > best) best = v;
  }

  struct Cand {
    double score;
    long u;
  };
  std::vector<long> alive(static_cast<std::size_t>(im.cells));
  for (long u = 0; u < im.cells; ++u) alive[static_cast<std::size_t>(u)] = u;

  std::vector<Cand> cands;
  for (std::size_t s = 1; s < im.depths.size(); ++s) {
    const double coef = im.bound_coef[s - 1];
    cands.clear();
    for (long u : alive) {
      double score = cmax[static_cast<std::size_t>(u)] +
                     coef * zmu[static_cast<std::size_t>(u)] + kFloatSlop;
      if (score > best) cands.push_back({score, u});
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& x, const Cand& y) { return x.score > y.score; });
    const long tm = 1L << im.depths[s];
    std::vector<long> next;
    next.reserve(cands.size());
    for (const Cand& c : cands) {
      if (c.score <= best) break;  // sorted: nothing later can pass either
      const long cnt = tm + (c.u == im.cells - 1 ? 1 : 0);
      double v = im.kern_fn(z.data() + c.u + im.taps - 1,
                            im.tables[s].data(), tm, im.taps, cnt);
      cmax[static_cast<std::size_t>(c.u)] = v;
      if (v > best) best = v;
      next.push_back(c.u);
    }
    alive = std::move(next);
    if (alive.empty()) break;
  }
  return best;
}

double PathSampler::value_at(std::uint64_t rep, long fine_index) const {
  const Impl& im = *impl_;
  const long tm = 1L << im.m;
  const long last = im.cells * tm;
  if (fine_index < 0 || fine_index > last) {
    throw std::invalid_argument("grid index out of range");
  }
  long u = fine_index >> im.m;
  if (u == im.cells) --u;  // right endpoint of the domain
  const long i = fine_index - (u << im.m);

  std::vector<double> z(static_cast<std::size_t>(im.nz));
  im.fill_z(rep, z, nullptr);
  const double* ztop = z.data() + u + im.taps - 1;
  const std::vector<double>& tbl = im.tables.back();
  double acc = 0.0;
  for (int a = 0; a < im.taps; ++a) {
    acc = std::fma(ztop[-a], tbl[static_cast<std::size_t>(a) * tm + i], acc);
  }
  return acc;
}

long PathSampler::fine_points() const {
  return impl_->cells * (1L << impl_->m) + 1;
}
const SimulationConfig& PathSampler::config() const { return impl_->cfg; }
bool PathSampler::indicator_scheme() const { return impl_->indicator; }
const FilterBank& PathSampler::bank() const { return impl_->bank; }
const Interval& PathSampler::sigma_bar_sq() const {
  return impl_->sigma_bar_sq;
}
const Interval& PathSampler::upsilon() const { return impl_->upsilon_iv; }
bool PathSampler::constants_verified() const { return impl_->verified; }
const VerificationReport& PathSampler::verification() const {
  if (impl_->indicator) {
    throw std::logic_error("indicator scheme carries no verification report");
  }
  return impl_->vr;
}
double PathSampler::table_error() const { return impl_->table_err; }
double PathSampler::deriv_sum_bound() const { return impl_->s1_ub; }
const char* PathSampler::kernel_name() const { return impl_->kern_name; }

double simulate_sup(const SimulationConfig& cfg, std::uint64_t rep,
                    const PrecisionContext& ctx) {
  return PathSampler(cfg, ctx).sup_one(rep);
}

SimulationReport mc_exceedance(const SimulationConfig& cfg,
                               const PrecisionContext& ctx) {
  if (cfg.gammas.empty()) {
    throw std::invalid_argument("at least one gamma level is required");
  }
  for (double g : cfg.gammas) {
    if (!(g > 0.0 && g < 1.0)) {
      throw std::invalid_argument("gamma levels must lie in (0, 1)");
    }
  }
  if (cfg.j < 1) {
    throw std::invalid_argument("threshold evaluation needs j >= 1");
  }

  PathSampler sampler(cfg, ctx);
  if (!sampler.constants_verified()) {
    throw std::invalid_argument(
        "exceedance thresholds need verified variance constants");
  }

  const long reps = cfg.reps;
  std::vector<double> sups(static_cast<std::size_t>(reps));
  std::vector<double> zmaxs(static_cast<std::size_t>(reps));
  int threads = std::max(cfg.threads, 1);
  if (threads > reps) threads = static_cast<int>(reps);
  auto worker = [&](int t) {
    for (long r = t; r < reps; r += threads) {
      sups[static_cast<std::size_t>(r)] =
          sampler.sup_one(static_cast<std::uint64_t>(r),
                          &zmaxs[static_cast<std::size_t>(r)]);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (std::thread& th : pool) th.join();
  }

  SimulationReport rep;
  rep.config = cfg;
  rep.sigma_bar_sq = sampler.sigma_bar_sq();
  rep.upsilon = sampler.upsilon();
  rep.kernel = sampler.kernel_name();

  const double ups = rep.upsilon.mid_double();
  const double jd = static_cast<double>(cfg.j);
  rep.a_j = a_of(jd);
  rep.b_j = b_of(jd, ups);

  for (double g : cfg.gammas) {
    GammaRow row;
    row.gamma = g;
    row.threshold = normalized_threshold({jd, g}, ups);
    long cnt = 0;
    for (double s : sups) {
      if (s > row.threshold) ++cnt;
    }
    row.exceed_count = cnt;
    row.exceed_fraction =
        static_cast<double>(cnt) / static_cast<double>(reps);
    row.ratio = row.exceed_fraction / g;
    row.stderr_binomial = std::sqrt(
        row.exceed_fraction * (1.0 - row.exceed_fraction) /
        static_cast<double>(reps));
    rep.rows.push_back(row);
  }

  // KS distance of a(j)(sup - b(j)) against the Gumbel law; aggregation is
  // a plain sequential sum in rep order, bit-identical across thread counts
  std::vector<double> ys(sups);
  for (double& y : ys) y = rep.a_j * (y - rep.b_j);
  std::sort(ys.begin(), ys.end());
  const double n = static_cast<double>(reps);
  double ks = 0.0;
  for (long i = 0; i < reps; ++i) {
    double gi = std::exp(-std::exp(-ys[static_cast<std::size_t>(i)]));
    ks = std::max(ks, gi - static_cast<double>(i) / n);
    ks = std::max(ks, static_cast<double>(i + 1) / n - gi);
  }
  rep.ks_distance = ks;

  double zmax = 0.0;
  for (double zm : zmaxs) zmax = std::max(zmax, zm);
  rep.zmax = zmax;
  const int taps = 2 * sampler.bank().K - 1;
  rep.grid_sup_bias_bound =
      (sampler.deriv_sum_bound() *
           std::ldexp(1.0, static_cast<int>(-cfg.grid_depth - 1)) +
       taps * sampler.table_error()) *
      zmax;

  double smin = sups[0], smax = sups[0], ssum = 0.0;
  for (double s : sups) {
    smin = std::min(smin, s);
    smax = std::max(smax, s);
    ssum += s;
  }
  rep.sup_min = smin;
  rep.sup_max = smax;
  rep.sup_mean = ssum / n;

  double gmin = *std::min_element(cfg.gammas.begin(), cfg.gammas.end());
  rep.rep_warning = static_cast<double>(reps) < 100.0 / gmin;
  if (rep.rep_warning) {
    rep.note = "reps below 100/min(gamma); exceedance estimates are noisy";
  }
  rep.sups = std::move(sups);
  return rep;
}

namespace {

// shared-table point evaluation used by the kernel identity check
struct PointTable {
  long gd = 0;
  int K = 0;
  std::vector<double> phi;  // index (x + K - 1) 2^gd over [0, (2K-1) 2^gd]
  std::vector<double> psi;  // index x 2^gd - psi_lo over the psi support
  long psi_lo = 0;

  double phi_at(long h) const {
    const long t = h + (static_cast<long>(K) - 1) * (1L << gd);
    if (t < 0 || t >= static_cast<long>(phi.size())) return 0.0;
    return phi[static_cast<std::size_t>(t)];
  }
  double psi_at(long h) const {
    const long t = h - psi_lo;
    if (t < 0 || t >= static_cast<long>(psi.size())) return 0.0;
    return psi[static_cast<std::size_t>(t)];
  }
};

}  // namespace

KernelIdentityResult kernel_identity_check(const FilterBank& bank, long j0,
                                           long j, long grid_depth,
                                           long phi_level,
                                           const PrecisionContext& ctx) {
  if (j0 < 0 || j < j0) {
    throw std::invalid_argument("levels must satisfy 0 <= j0 <= j");
  }
  if (grid_depth < std::max(j, 3L) || grid_depth > 22) {
    throw std::invalid_argument("grid_depth must lie in [max(j, 3), 22]");
  }
  if (phi_level < 1 || phi_level > 22) {
    throw std::invalid_argument("phi_level must lie in [1, 22]");
  }

  const int K = bank.K;
  const int taps = 2 * K - 1;
  const long gd = grid_depth;
  const long tg = 1L << gd;

  KernelIdentityResult res;
  PointTable tab;
  tab.gd = gd;
  tab.K = K;
  tab.phi.assign(static_cast<std::size_t>(taps) * tg + 1, 0.0);

  if (K == 1) {
    for (long g = 0; g < tg; ++g) tab.phi[static_cast<std::size_t>(g)] = 1.0;
    res.table_eps = 0.0;
  } else {
    CascadeLadder ladder(bank, 1, ctx);
    for (long l = 1; l <= phi_level; ++l) {
      ladder.step(TorusWindow::full(l));
    }
    FunctionEnclosure e0 = ladder.enclosure(0);
    if (!e0.eps.is_finite()) {
      throw std::invalid_argument(
          "cascade error bound not certified at the requested level");
    }
    const long total = static_cast<long>(taps) << phi_level;
    std::vector<double> mids(static_cast<std::size_t>(total));
    double max_hw = 0.0;
    for (long k = 0; k < total; ++k) {
      const Interval& c = e0.cell(mpz_class(k));
      mids[static_cast<std::size_t>(k)] = c.mid_double();
      max_hw = std::max(max_hw, 0.5 * c.width_double());
    }
    for (long g = 0; g < static_cast<long>(taps) * tg; ++g) {
      const long q = gd >= phi_level ? (g >> (gd - phi_level))
                                     : (g << (phi_level - gd));
      tab.phi[static_cast<std::size_t>(g)] = mids[static_cast<std::size_t>(q)];
    }
    res.table_eps = e0.eps.hi_double() + max_hw;
  }
  for (double v : tab.phi) res.phi_abs_max = std::max(res.phi_abs_max, std::fabs(v));

  // mirror filter v_k = (-1)^k u_{2K-1-k}; psi(x) = sum_k v_k phi(2x - k)
  std::vector<double> v(static_cast<std::size_t>(2 * K));
  for (int k = 0; k < 2 * K; ++k) {
    double uk = bank.u0[static_cast<std::size_t>(2 * K - 1 - k)].mid_double();
    v[static_cast<std::size_t>(k)] = (k % 2 == 0) ? uk : -uk;
  }
  tab.psi_lo = (1 - static_cast<long>(K)) * (tg / 2);
  tab.psi.assign(static_cast<std::size_t>(taps) * tg + 1, 0.0);
  for (long t = 0; t < static_cast<long>(tab.psi.size()); ++t) {
    const long h = tab.psi_lo + t;  // x 2^gd
    double acc = 0.0;
    for (int k = 0; k < 2 * K; ++k) {
      acc += v[static_cast<std::size_t>(k)] *
             tab.phi_at(2 * h - static_cast<long>(k) * tg);
    }
    tab.psi[static_cast<std::size_t>(t)] = acc;
  }

  // level-l reproducing kernels on the (s, t) grid; S, T are s 2^gd, t 2^gd
  auto bkern = [&](long l, long S, long T) {
    const double xs = std::ldexp(static_cast<double>(S), static_cast<int>(l - gd));
    const double xt = std::ldexp(static_cast<double>(T), static_cast<int>(l - gd));
    const long klo = static_cast<long>(std::floor(std::min(xs, xt))) - K;
    const long khi = static_cast<long>(std::ceil(std::max(xs, xt))) + K;
    double acc = 0.0;
    for (long k = klo; k <= khi; ++k) {
      acc += tab.phi_at((S << l) - k * tg) * tab.phi_at((T << l) - k * tg);
    }
    return std::ldexp(acc, static_cast<int>(l));
  };
  auto wkern = [&](long l, long S, long T) {
    const double xs = std::ldexp(static_cast<double>(S), static_cast<int>(l - gd));
    const double xt = std::ldexp(static_cast<double>(T), static_cast<int>(l - gd));
    const long klo = static_cast<long>(std::floor(std::min(xs, xt))) - 2 * K;
    const long khi = static_cast<long>(std::ceil(std::max(xs, xt))) + 2 * K;
    double acc = 0.0;
    for (long k = klo; k <= khi; ++k) {
      acc += tab.psi_at((S << l) - k * tg) * tab.psi_at((T << l) - k * tg);
    }
    return std::ldexp(acc, static_cast<int>(l));
  };

  const long span = 2L * K + 1;          // covers separated pairs
  const long steps = span * 8;           // grid step 1/8
  const long stride = tg / 8;            // gd >= 3
  res.diag_min = bkern(j, 0, 0);
  res.diag_max = res.diag_min;
  for (long is = 0; is <= steps; ++is) {
    const long S = is * stride;
    for (long it = is; it <= steps; ++it) {
      const long T = it * stride;
      double a = bkern(j0, S, T);
      for (long l = j0; l < j; ++l) a += wkern(l, S, T);
      const double b = bkern(j, S, T);
      res.max_deviation = std::max(res.max_deviation, std::fabs(a - b));
      if (it == is) {
        res.diag_min = std::min(res.diag_min, b);
        res.diag_max = std::max(res.diag_max, b);
      }
      if (it - is >= (2 * K - 1) * 8) {
        res.separated_max =
            std::max({res.separated_max, std::fabs(a), std::fabs(b)});
      }
    }
  }
  return res;
}

double haar_exact_exceedance(long j, double u, const PrecisionContext& ctx) {
  if (j < 0 || j > 40) throw std::invalid_argument("j must lie in [0, 40]");
  if (!(u >= 0.0) || !std::isfinite(u)) {
    throw std::invalid_argument("threshold u must be finite and >= 0");
  }
  if (u == 0.0) return 1.0;
  Interval one = Interval::point_si(1, ctx);
  Interval phi = iv_normal_cdf(Interval::point_double(u, ctx), ctx);
  Interval base = iv_sub(iv_mul_2si(phi, 1, ctx), one, ctx);
  for (long l = 0; l < j; ++l) base = iv_sqr(base, ctx);
  return iv_sub(one, base, ctx).mid_double();
}

}  // namespace sbr
