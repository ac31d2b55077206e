#pragma once

#include <string>
#include <vector>

#include "sso/perm.hpp"

namespace sso::metrics {

// N rows of unnormalized scores over the k! ordering classes, with truths.
class PredictionBatch {
 public:
  PredictionBatch(int k, std::vector<double> logits, std::vector<int> truths);

  int k() const { return k_; }
  int num_classes() const { return num_classes_; }
  int size() const { return static_cast<int>(truths_.size()); }

  const double* row(int i) const { return logits_.data() + static_cast<std::size_t>(i) * num_classes_; }
  int truth(int i) const { return truths_[static_cast<std::size_t>(i)]; }

  const std::vector<double>& logits() const { return logits_; }
  const std::vector<int>& truths() const { return truths_; }

 private:
  int k_;
  int num_classes_;
  std::vector<double> logits_;
  std::vector<int> truths_;
};

struct MetricsReport {
  double top1 = 0.0;
  double topk = 0.0;
  double mean_ktd = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  int top_k_used = 1;

  bool operator==(const MetricsReport& other) const = default;

  // Flat JSON with fixed keys: top1_accuracy, topk_accuracy,
  // kendall_tau_distance, recall, precision, top_k_used.
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

// argmax of a logit row; ties broken toward the lowest class index.
int argmax_row(const double* row, int num_classes);

double top1_accuracy(const PredictionBatch& batch);

// Truth within the top_k highest logits; ties toward lower index.
double topk_accuracy(const PredictionBatch& batch, int top_k);

// Mean over rows of K[argmax(logits), truth].
double mean_kendall_tau(const PredictionBatch& batch, const perm::KtdMatrix& K);

// Macro averages over argmax predictions. Classes with zero support are
// excluded from the recall average; classes with support but never predicted
// contribute precision 0.
double macro_recall(const PredictionBatch& batch);
double macro_precision(const PredictionBatch& batch);

MetricsReport compute_report(const PredictionBatch& batch, const perm::KtdMatrix& K, int top_k);

}  // namespace sso::metrics
