#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spamprop {

enum class RawLabel { spam, app, quote, normal, unknown };

RawLabel parse_raw_label(std::string_view text);
std::string_view to_string(RawLabel label);

/// Policies mapping manual labels onto spam/benign.
///   comb1: spam={spam}       benign={normal,quote,app}
///   comb2: spam={spam}       benign={normal}          (app, quote dropped)
///   comb3: spam={spam,app}   benign={normal,quote}
enum class Combination { comb1 = 1, comb2 = 2, comb3 = 3 };

Combination combination_from_int(int value);

/// true = spam, false = benign, nullopt = row dropped.
std::optional<bool> apply_combination(RawLabel label, Combination combination);

using FeatureRow = std::vector<double>;

struct Dataset {
  std::vector<FeatureRow> rows;
  std::vector<int> labels;  // 1 = spam, 0 = benign

  std::size_t size() const { return rows.size(); }
  std::size_t count(int label) const;
  void add(FeatureRow row, int label) {
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
};

/// Synthetic minority rows x + u * (nn - x), nn drawn from the k nearest
/// minority neighbours of a random minority point x. Returns
/// target_count - minority.size() rows (none if already at target).
std::vector<FeatureRow> smote(std::span<const FeatureRow> minority, std::size_t target_count,
                              std::size_t k_neighbors, std::uint64_t seed);

/// Oversamples the minority class with SMOTE until class counts are equal.
Dataset balance_with_smote(const Dataset& data, std::size_t k_neighbors, std::uint64_t seed);

enum class ClassifierKind { linear_svm, gaussian_nb };

ClassifierKind parse_classifier_kind(std::string_view text);
std::string_view to_string(ClassifierKind kind);

struct SvmParams {
  double lambda = 1e-4;
  std::size_t epochs = 60;
  double eta0 = 1.0;
};

class ClassifierModel {
 public:
  ClassifierKind kind() const { return kind_; }
  std::size_t dimension() const { return dim_; }

  /// Positive means spam: SVM margin, or NB log posterior odds.
  double decision(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return decision(x) > 0.0 ? 1 : 0; }

  // Gaussian NB statistics (empty for SVM), index 0 = benign, 1 = spam.
  const std::array<std::vector<double>, 2>& means() const { return mean_; }
  const std::array<std::vector<double>, 2>& variances() const { return var_; }
  const std::array<double, 2>& log_priors() const { return log_prior_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

  friend ClassifierModel train(const Dataset& data, ClassifierKind kind, std::uint64_t seed,
                               const SvmParams& params);
  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  ClassifierKind kind_ = ClassifierKind::linear_svm;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> weights_;
  double bias_ = 0.0;
  std::array<std::vector<double>, 2> mean_;
  std::array<std::vector<double>, 2> var_;
  std::array<double, 2> log_prior_{};
};

/// Throws DataError unless both classes are present.
ClassifierModel train(const Dataset& data, ClassifierKind kind, std::uint64_t seed,
                      const SvmParams& params = {});

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Spam is the positive class; undefined ratios are reported as 0.
Metrics metrics_from(const Confusion& c);
Confusion confusion(const ClassifierModel& model, const Dataset& data);

struct EvalReport {
  Metrics mean;
  Metrics std_error;
  std::vector<Metrics> folds;
};

/// Mean and standard error of a sequence of metric sets.
EvalReport summarize(std::vector<Metrics> values);

/// Stratified fold assignment: fold index for every row.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

struct CvOptions {
  std::size_t folds = 10;
  std::size_t smote_neighbors = 5;
  ClassifierKind kind = ClassifierKind::linear_svm;
  SvmParams svm;
};

/// Stratified k-fold CV; SMOTE is applied to each training split only.
/// `context` names the data (e.g. the neighborhood) in error messages.
EvalReport cross_validate(const Dataset& data, const CvOptions& options, std::uint64_t seed,
                          std::string_view context = {});

struct AccountCounts {
  std::size_t spam = 0;
  std::size_t total = 0;
};

/// Spam iff spam/total >= tau; users with no messages are left out.
std::map<std::string, bool> label_accounts(const std::map<std::string, AccountCounts>& counts,
                                           double tau);

}  // namespace spamprop
