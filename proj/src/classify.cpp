#include "spamprop/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"

namespace spamprop {

RawLabel parse_raw_label(std::string_view text) {
  if (text == "spam") return RawLabel::spam;
  if (text == "app") return RawLabel::app;
  if (text == "quote") return RawLabel::quote;
  if (text == "normal") return RawLabel::normal;
  if (text == "unknown") return RawLabel::unknown;
  throw DataError("unknown label '" + std::string(text) + "'");
}

std::string_view to_string(RawLabel label) {
  switch (label) {
    case RawLabel::spam: return "spam";
    case RawLabel::app: return "app";
    case RawLabel::quote: return "quote";
    case RawLabel::normal: return "normal";
    case RawLabel::unknown: return "unknown";
  }
  return "unknown";
}

Combination combination_from_int(int value) {
  if (value < 1 || value > 3) throw ConfigError("label combination must be 1, 2 or 3");
  return static_cast<Combination>(value);
}

std::optional<bool> apply_combination(RawLabel label, Combination combination) {
  switch (label) {
    case RawLabel::unknown:
      return std::nullopt;
    case RawLabel::spam:
      return true;
    case RawLabel::normal:
      return false;
    case RawLabel::app:
      if (combination == Combination::comb2) return std::nullopt;
      return combination == Combination::comb3;
    case RawLabel::quote:
      if (combination == Combination::comb2) return std::nullopt;
      return false;
  }
  return std::nullopt;
}

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

std::vector<FeatureRow> smote(std::span<const FeatureRow> minority, std::size_t target_count,
                              std::size_t k_neighbors, std::uint64_t seed) {
  if (minority.empty()) throw DataError("SMOTE needs at least one minority row");
  if (k_neighbors == 0) throw ConfigError("SMOTE needs k_neighbors >= 1");
  std::vector<FeatureRow> out;
  if (target_count <= minority.size()) return out;
  const std::size_t needed = target_count - minority.size();
  out.reserve(needed);
  Rng rng(seed);

  if (minority.size() == 1) {
    for (std::size_t i = 0; i < needed; ++i) out.push_back(minority[0]);
    return out;
  }

  const std::size_t n = minority.size();
  const std::size_t k = std::min(k_neighbors, n - 1);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t f = 0; f < minority[i].size(); ++f) {
        const double diff = minority[i][f] - minority[j][f];
        d += diff * diff;
      }
      dist.emplace_back(d, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t r = 0; r < k; ++r) neighbors[i].push_back(dist[r].second);
  }

  for (std::size_t s = 0; s < needed; ++s) {
    const auto i = rng.below(n);
    const auto j = neighbors[i][rng.below(k)];
    const double u = rng.uniform();
    FeatureRow row(minority[i].size());
    for (std::size_t f = 0; f < row.size(); ++f) {
      row[f] = minority[i][f] + u * (minority[j][f] - minority[i][f]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

Dataset balance_with_smote(const Dataset& data, std::size_t k_neighbors, std::uint64_t seed) {
  const auto spam = data.count(1);
  const auto benign = data.count(0);
  Dataset out = data;
  if (spam == benign || spam == 0 || benign == 0) return out;
  const int minority_label = spam < benign ? 1 : 0;
  std::vector<FeatureRow> minority;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == minority_label) minority.push_back(data.rows[i]);
  }
  for (auto& row : smote(minority, std::max(spam, benign), k_neighbors, seed)) {
    out.add(std::move(row), minority_label);
  }
  return out;
}

ClassifierKind parse_classifier_kind(std::string_view text) {
  if (text == "linear-svm" || text == "svm") return ClassifierKind::linear_svm;
  if (text == "gaussian-nb" || text == "nb") return ClassifierKind::gaussian_nb;
  throw ConfigError("unknown classifier '" + std::string(text) + "'");
}

std::string_view to_string(ClassifierKind kind) {
  return kind == ClassifierKind::linear_svm ? "linear-svm" : "gaussian-nb";
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace

double ClassifierModel::decision(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw DataError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                    std::to_string(dim_));
  }
  if (kind_ == ClassifierKind::linear_svm) {
    double s = bias_;
    for (std::size_t f = 0; f < dim_; ++f) s += weights_[f] * x[f];
    return s;
  }
  double odds = log_prior_[1] - log_prior_[0];
  for (std::size_t f = 0; f < dim_; ++f) {
    odds += log_normal(x[f], mean_[1][f], var_[1][f]) - log_normal(x[f], mean_[0][f], var_[0][f]);
  }
  return odds;
}

ClassifierModel train(const Dataset& data, ClassifierKind kind, std::uint64_t seed,
                      const SvmParams& params) {
  if (data.count(0) == 0 || data.count(1) == 0) {
    throw DataError("training data must contain both spam and benign rows");
  }
  ClassifierModel model;
  model.kind_ = kind;
  model.seed_ = seed;
  model.dim_ = data.rows.front().size();
  for (const auto& row : data.rows) {
    if (row.size() != model.dim_) throw DataError("inconsistent feature dimension");
  }
  const auto dim = model.dim_;

  if (kind == ClassifierKind::linear_svm) {
    // Hinge loss, L2 on weights, unregularized bias; step eta0/(1+lambda*eta0*t).
    model.weights_.assign(dim, 0.0);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    double t = 0.0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (auto i : order) {
        const double eta = params.eta0 / (1.0 + params.lambda * params.eta0 * t);
        const double y = data.labels[i] == 1 ? 1.0 : -1.0;
        const auto& x = data.rows[i];
        double s = model.bias_;
        for (std::size_t f = 0; f < dim; ++f) s += model.weights_[f] * x[f];
        const double shrink = 1.0 - eta * params.lambda;
        for (auto& w : model.weights_) w *= shrink;
        if (y * s < 1.0) {
          for (std::size_t f = 0; f < dim; ++f) model.weights_[f] += eta * y * x[f];
          model.bias_ += eta * y;
        }
        t += 1.0;
      }
    }
    return model;
  }

  std::array<std::size_t, 2> n{0, 0};
  for (int c = 0; c < 2; ++c) {
    model.mean_[c].assign(dim, 0.0);
    model.var_[c].assign(dim, 0.0);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data.labels[i];
    ++n[c];
    for (std::size_t f = 0; f < dim; ++f) model.mean_[c][f] += data.rows[i][f];
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& m : model.mean_[c]) m /= static_cast<double>(n[c]);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data.labels[i];
    for (std::size_t f = 0; f < dim; ++f) {
      const double d = data.rows[i][f] - model.mean_[c][f];
      model.var_[c][f] += d * d;
    }
  }
  // Variance floor relative to the widest feature, as in common NB toolkits.
  double max_var = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (auto& v : model.var_[c]) {
      v /= static_cast<double>(n[c]);
      max_var = std::max(max_var, v);
    }
  }
  const double floor = 1e-9 * max_var + 1e-12;
  for (int c = 0; c < 2; ++c) {
    for (auto& v : model.var_[c]) v += floor;
  }
  const double total = static_cast<double>(n[0] + n[1]);
  model.log_prior_ = {std::log(static_cast<double>(n[0]) / total),
                      std::log(static_cast<double>(n[1]) / total)};
  return model;
}

Metrics metrics_from(const Confusion& c) {
  Metrics m;
  const double total = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
  m.accuracy = total > 0 ? static_cast<double>(c.tp + c.tn) / total : 0.0;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Confusion confusion(const ClassifierModel& model, const Dataset& data) {
  Confusion c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int p = model.predict(data.rows[i]);
    const int y = data.labels[i];
    if (p == 1 && y == 1) ++c.tp;
    else if (p == 1) ++c.fp;
    else if (y == 1) ++c.fn;
    else ++c.tn;
  }
  return c;
}

EvalReport summarize(std::vector<Metrics> values) {
  EvalReport report;
  report.folds = std::move(values);
  const auto n = static_cast<double>(report.folds.size());
  if (report.folds.empty()) return report;
  auto field = [&](double Metrics::*member, double& mean_out, double& se_out) {
    double sum = 0.0;
    for (const auto& m : report.folds) sum += m.*member;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& m : report.folds) ss += (m.*member - mean) * (m.*member - mean);
    mean_out = mean;
    se_out = n > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0;
  };
  field(&Metrics::accuracy, report.mean.accuracy, report.std_error.accuracy);
  field(&Metrics::precision, report.mean.precision, report.std_error.precision);
  field(&Metrics::recall, report.mean.recall, report.std_error.recall);
  field(&Metrics::f1, report.mean.f1, report.std_error.f1);
  return report;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  std::vector<std::size_t> fold_of(labels.size(), 0);
  Rng rng(seed);
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t r = 0; r < idx.size(); ++r) fold_of[idx[r]] = r % folds;
  }
  return fold_of;
}

EvalReport cross_validate(const Dataset& data, const CvOptions& options, std::uint64_t seed,
                          std::string_view context) {
  const std::string where = context.empty() ? std::string("dataset") : std::string(context);
  if (options.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (data.count(1) < options.folds || data.count(0) < options.folds) {
    throw DataError(where + ": too few rows for " + std::to_string(options.folds) +
                    "-fold cross-validation (" + std::to_string(data.count(1)) + " spam, " +
                    std::to_string(data.count(0)) + " benign)");
  }
  const auto fold_of = stratified_folds(data.labels, options.folds, derive_seed(seed, "folds"));
  std::vector<Metrics> per_fold;
  per_fold.reserve(options.folds);
  for (std::size_t k = 0; k < options.folds; ++k) {
    Dataset train_split;
    Dataset test_split;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (fold_of[i] == k ? test_split : train_split).add(data.rows[i], data.labels[i]);
    }
    const auto balanced =
        balance_with_smote(train_split, options.smote_neighbors, derive_seed(seed, 2 * k + 1));
    const auto model = train(balanced, options.kind, derive_seed(seed, 2 * k + 2), options.svm);
    per_fold.push_back(metrics_from(confusion(model, test_split)));
  }
  return summarize(std::move(per_fold));
}

std::map<std::string, bool> label_accounts(const std::map<std::string, AccountCounts>& counts,
                                           double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0, 1]");
  std::map<std::string, bool> out;
  for (const auto& [user, c] : counts) {
    if (c.total == 0) continue;
    // Ratios equal to tau up to rounding count as spam.
    const double s = static_cast<double>(c.spam) / static_cast<double>(c.total);
    out[user] = s >= tau || std::abs(s - tau) <= 1e-12;
  }
  return out;
}

}  // namespace spamprop
