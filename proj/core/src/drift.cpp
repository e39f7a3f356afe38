#include "certkit/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "certkit/random.hpp"

namespace certkit {

std::string_view to_string(ShiftMethod m) noexcept {
  return m == ShiftMethod::univariate_bonferroni ? "univariate_bonferroni" : "mmd_permutation";
}

ShiftMethod parse_shift_method(std::string_view text) {
  if (text == "univariate_bonferroni") return ShiftMethod::univariate_bonferroni;
  if (text == "mmd_permutation") return ShiftMethod::mmd_permutation;
  throw Error(ErrorCode::ConfigInvalid, "unknown shift method '" + std::string(text) + "'");
}

std::string_view to_string(ShiftClass c) noexcept { return c == ShiftClass::benign ? "benign" : "malignant"; }

EncodedBatch EncodedBatch::from_dataset(const Dataset& dataset, std::string encoder_id) {
  EncodedBatch b;
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.schema().features.size();
  b.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      b.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dataset.row(i).features[j];
    }
  }
  for (const auto& f : dataset.schema().features) b.kinds.push_back(f.kind);
  if (n > 0) b.source = dataset.row(0).split;
  if (dataset.schema().has_timestamp && n > 0) {
    std::int64_t lo = *dataset.row(0).timestamp;
    std::int64_t hi = lo;
    for (const auto& r : dataset.rows()) {
      lo = std::min(lo, *r.timestamp);
      hi = std::max(hi, *r.timestamp);
    }
    b.window_start = lo;
    b.window_end = hi;
  }
  b.encoder_id = std::move(encoder_id);
  return b;
}

void EncodedBatch::validate() const {
  if (!data.allFinite()) throw Error(ErrorCode::InvalidArgument, "encoded batch has non-finite entries");
  if (!kinds.empty() && kinds.size() != dims()) throw Error(ErrorCode::DimensionMismatch, "kinds length != dims");
}

double ks_statistic(std::span<const double> x, std::span<const double> y) {
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form, converges fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 50; ++j) {
      const double t = std::exp(-static_cast<double>((2 * j - 1) * (2 * j - 1)) * c);
      sum += t;
      if (t < 1e-18) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double t = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * t;
    if (t < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_exact_pvalue(std::size_t n, std::size_t m, double d_observed) {
  if (n == 0 || m == 0) throw Error(ErrorCode::TooFewSamples, "empty sample");
  // Work with integer band half-width: a lattice point (i, j) is outside
  // when |i*m - j*n| >= threshold.
  const double scaled = d_observed * static_cast<double>(n) * static_cast<double>(m);
  const auto threshold = static_cast<long long>(std::llround(scaled));
  if (threshold <= 0) return 1.0;
  const auto outside = [&](std::size_t i, std::size_t j) {
    return std::llabs(static_cast<long long>(i * m) - static_cast<long long>(j * n)) >= threshold;
  };
  // Probability mass of paths that stayed inside, propagated row by row.
  // Each step is normalised by the total path count, so this is a
  // probability rather than a raw count.
  std::vector<double> row(m + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      double v;
      if (i == 0 && j == 0) {
        v = 1.0;
      } else {
        // P(path passes (i,j)) recursion with hypergeometric step weights.
        const double from_up = i > 0 ? row[j] * static_cast<double>(i) / static_cast<double>(i + j) : 0.0;
        const double from_left = j > 0 ? row[j - 1] * static_cast<double>(j) / static_cast<double>(i + j) : 0.0;
        v = from_up + from_left;
      }
      row[j] = outside(i, j) ? 0.0 : v;
    }
  }
  return std::clamp(1.0 - row[m], 0.0, 1.0);
}

namespace {

bool has_ties(std::span<const double> x, std::span<const double> y) {
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  return std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end();
}

}  // namespace

TestResult ks_two_sample(std::span<const double> x, std::span<const double> y) {
  if (x.size() < kKsMinSamples || y.size() < kKsMinSamples) {
    throw Error(ErrorCode::TooFewSamples, "KS test needs at least 5 samples per side");
  }
  TestResult r;
  r.test_id = "ks_two_sample";
  r.n = x.size() + y.size();
  r.statistic = ks_statistic(x, y);
  r.conf_bound = std::numeric_limits<double>::quiet_NaN();
  r.direction = Direction::at_most;

  const std::size_t n = x.size();
  const std::size_t m = y.size();
  if (std::max(n, m) <= kKsExactLimit) {
    if (!has_ties(x, y)) {
      r.p_value = ks_exact_pvalue(n, m, r.statistic);
    } else {
      std::vector<double> pooled(x.begin(), x.end());
      pooled.insert(pooled.end(), y.begin(), y.end());
      constexpr std::uint64_t kTieSeed = 0x4B53'5045'524DULL;
      std::size_t extreme = 0;
      for (std::size_t b = 0; b < kKsTiePermutations; ++b) {
        Rng rng(derive_seed(kTieSeed, b));
        rng.shuffle(std::span(pooled));
        const double d = ks_statistic(std::span(pooled).first(n), std::span(pooled).subspan(n));
        extreme += d >= r.statistic - 1e-12 ? 1 : 0;
      }
      r.p_value = static_cast<double>(extreme + 1) / static_cast<double>(kKsTiePermutations + 1);
      r.seed = kTieSeed;
      r.resamples = kKsTiePermutations;
    }
  } else {
    const double en = std::sqrt(static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m));
    r.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * r.statistic);
  }
  r.set_alpha(0.0);
  return r;
}

TestResult chi2_two_sample(std::span<const std::int64_t> x, std::span<const std::int64_t> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::DegenerateTable, "both samples must be non-empty");
  std::map<std::int64_t, std::pair<double, double>> counts;
  for (auto c : x) counts[c].first += 1.0;
  for (auto c : y) counts[c].second += 1.0;
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double total = nx + ny;
  const double smaller_row = std::min(nx, ny);
  const auto min_expected = [&](const std::pair<double, double>& c) {
    return (c.first + c.second) * smaller_row / total;
  };

  std::vector<std::pair<double, double>> buckets;
  std::pair<double, double> rare{0.0, 0.0};
  for (const auto& [code, c] : counts) {
    if (min_expected(c) < 5.0) {
      rare.first += c.first;
      rare.second += c.second;
    } else {
      buckets.push_back(c);
    }
  }
  if (rare.first + rare.second > 0.0) {
    while (min_expected(rare) < 5.0 && !buckets.empty()) {
      auto smallest = std::min_element(buckets.begin(), buckets.end(), [](const auto& a, const auto& b) {
        return a.first + a.second < b.first + b.second;
      });
      rare.first += smallest->first;
      rare.second += smallest->second;
      buckets.erase(smallest);
    }
    buckets.push_back(rare);
  }
  if (buckets.size() < 2) throw Error(ErrorCode::DegenerateTable, "fewer than two categories after merging");

  double stat = 0.0;
  for (const auto& c : buckets) {
    const double col = c.first + c.second;
    const double ex = col * nx / total;
    const double ey = col * ny / total;
    stat += (c.first - ex) * (c.first - ex) / ex + (c.second - ey) * (c.second - ey) / ey;
  }
  const double df = static_cast<double>(buckets.size() - 1);

  TestResult r;
  r.test_id = "chi2_two_sample";
  r.n = x.size() + y.size();
  r.statistic = stat;
  r.p_value = stat <= 0.0 ? 1.0 : boost::math::gamma_q(df / 2.0, stat / 2.0);
  r.conf_bound = std::numeric_limits<double>::quiet_NaN();
  r.threshold = df;  // degrees of freedom, for reproduction
  r.direction = Direction::at_most;
  r.set_alpha(0.0);
  return r;
}

double median_heuristic(const Eigen::MatrixXd& pooled) {
  const Eigen::Index n = pooled.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (dist.empty()) return 1.0;
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (dist.size() % 2 == 0) med = 0.5 * (med + *std::max_element(dist.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

namespace {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& pooled, double bandwidth) {
  const Eigen::Index n = pooled.rows();
  const Eigen::VectorXd sq = pooled.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * pooled * pooled.transpose();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) k(i, j) = std::exp(std::max(0.0, d2(i, j)) * scale);
    k(j, j) = 1.0;
  }
  return k;
}

/// MMD^2_u given the Gram matrix and a 0/1 mask selecting the first sample.
double mmd2_from_gram(const Eigen::MatrixXd& k, const Eigen::VectorXd& row_totals, double off_diagonal_total,
                      const Eigen::VectorXd& mask, std::size_t m) {
  const Eigen::VectorXd within_x = k * mask;  // column-major: K symmetric
  const auto N = static_cast<std::size_t>(k.rows());
  const std::size_t n = N - m;
  double sxx = 0.0;
  double syy = 0.0;
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    if (mask(i) > 0.5) {
      sxx += within_x(i) - k(i, i);
    } else {
      syy += row_totals(i) - within_x(i) - k(i, i);
    }
  }
  const double sxy = 0.5 * (off_diagonal_total - sxx - syy);
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  return sxx / (dm * (dm - 1.0)) + syy / (dn * (dn - 1.0)) - 2.0 * sxy / (dm * dn);
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  return pooled;
}

}  // namespace

double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
  if (x.rows() < 2 || y.rows() < 2) throw Error(ErrorCode::TooFewSamples, "MMD needs at least 2 rows per sample");
  if (x.cols() != y.cols()) throw Error(ErrorCode::DimensionMismatch, "column counts differ");
  const Eigen::MatrixXd k = rbf_gram(stack(x, y), bandwidth);
  const Eigen::VectorXd totals = k.rowwise().sum();
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(k.rows());
  mask.head(x.rows()).setOnes();
  return mmd2_from_gram(k, totals, totals.sum() - k.trace(), mask, static_cast<std::size_t>(x.rows()));
}

ShiftVerdict multivariate_shift_test(const EncodedBatch& reference, const EncodedBatch& production,
                                     const ShiftOptions& options) {
  reference.validate();
  production.validate();
  if (reference.dims() != production.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "reference has " + std::to_string(reference.dims()) +
                                                  " dims, production has " + std::to_string(production.dims()));
  }
  if (reference.dims() == 0) throw Error(ErrorCode::DimensionMismatch, "batches have no dimensions");
  if (reference.rows() == 0 || production.rows() == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");

  ShiftVerdict v;
  v.method = options.method;
  v.alpha = options.alpha;
  v.seed = options.seed;
  v.encoder_id = production.encoder_id;

  if (options.method == ShiftMethod::univariate_bonferroni) {
    const std::size_t d = reference.dims();
    const double level = options.alpha / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const bool categorical = !reference.kinds.empty() && reference.kinds[j] == FeatureKind::categorical;
      TestResult r;
      if (categorical) {
        std::vector<std::int64_t> a(reference.rows());
        std::vector<std::int64_t> b(production.rows());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::llround(reference.data(static_cast<Eigen::Index>(i), col));
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::llround(production.data(static_cast<Eigen::Index>(i), col));
        r = chi2_two_sample(a, b);
      } else {
        const Eigen::VectorXd a = reference.data.col(col);
        const Eigen::VectorXd b = production.data.col(col);
        r = ks_two_sample(std::span(a.data(), static_cast<std::size_t>(a.size())),
                          std::span(b.data(), static_cast<std::size_t>(b.size())));
      }
      r.set_alpha(level);
      v.shift = v.shift || r.decision == Decision::reject_H0;
      v.per_feature.push_back(std::move(r));
    }
    return v;
  }

  if (options.permutations == 0) throw Error(ErrorCode::InvalidResampleCount, "permutations must be positive");
  const std::size_t m = reference.rows();
  const Eigen::MatrixXd pooled = stack(reference.data, production.data);
  const double bandwidth = median_heuristic(pooled);
  const Eigen::MatrixXd k = rbf_gram(pooled, bandwidth);
  const Eigen::VectorXd totals = k.rowwise().sum();
  const double off_diagonal = totals.sum() - k.trace();
  const std::size_t N = static_cast<std::size_t>(pooled.rows());
  if (m < 2 || N - m < 2) throw Error(ErrorCode::TooFewSamples, "MMD needs at least 2 rows per batch");

  Eigen::VectorXd mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  mask.head(static_cast<Eigen::Index>(m)).setOnes();
  const double observed = mmd2_from_gram(k, totals, off_diagonal, mask, m);

  std::vector<std::size_t> labels(N);
  std::size_t extreme = 0;
  for (std::size_t b = 0; b < options.permutations; ++b) {
    std::iota(labels.begin(), labels.end(), 0);
    Rng rng(derive_seed(options.seed, b));
    rng.shuffle(std::span(labels));
    mask.setZero();
    for (std::size_t i = 0; i < m; ++i) mask(static_cast<Eigen::Index>(labels[i])) = 1.0;
    extreme += mmd2_from_gram(k, totals, off_diagonal, mask, m) >= observed ? 1 : 0;
  }

  TestResult r;
  r.test_id = "mmd_permutation";
  r.n = N;
  r.statistic = observed;
  r.p_value = static_cast<double>(extreme + 1) / static_cast<double>(options.permutations + 1);
  r.conf_bound = std::numeric_limits<double>::quiet_NaN();
  r.direction = Direction::at_most;
  r.seed = options.seed;
  r.resamples = options.permutations;
  r.set_alpha(options.alpha);
  v.shift = r.decision == Decision::reject_H0;
  v.severity = observed;
  v.bandwidth = bandwidth;
  v.permutations = options.permutations;
  v.per_feature.push_back(std::move(r));
  return v;
}

DiscreteDistribution::DiscreteDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
  if (p_.empty()) throw Error(ErrorCode::InvalidArgument, "distribution needs a non-empty support");
  double sum = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative or NaN probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "probabilities must sum to 1");
}

double total_variation_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::SupportMismatch, "supports differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

ShiftBound shift_bound_check(std::span<const double> h, std::span<const double> f, const DiscreteDistribution& p,
                             const DiscreteDistribution& q) {
  if (h.size() != p.size() || f.size() != p.size() || q.size() != p.size()) {
    throw Error(ErrorCode::DomainMismatch, "h, f, p and q must share one support");
  }
  ShiftBound b;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(h[i] >= 0.0 && h[i] <= 1.0 && f[i] >= 0.0 && f[i] <= 1.0)) {
      throw Error(ErrorCode::DomainMismatch, "h and f must map into [0,1]");
    }
    const double loss = std::abs(h[i] - f[i]);
    b.err_p += p[i] * loss;
    b.err_q += q[i] * loss;
  }
  b.gap = std::abs(b.err_p - b.err_q);
  b.tv = total_variation_discrete(p, q);
  b.holds = b.gap <= b.tv + 1e-12;
  return b;
}

ShiftClassification classify_shift(const ShiftVerdict& verdict, const Dataset& point_check, const MprSpec& mpr,
                                   double alpha, std::uint64_t seed) {
  if (!verdict.shift) throw Error(ErrorCode::NoShiftToClassify, "verdict reports no shift");
  auto [metric, test] = evaluate_mpr(point_check, mpr, alpha, seed);
  ShiftClassification c;
  c.verdict = test.decision == Decision::reject_H0 ? ShiftClass::benign : ShiftClass::malignant;
  c.metric = std::move(metric);
  c.test = std::move(test);
  return c;
}

}  // namespace certkit
