#include "sso/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sso/error.hpp"
#include "sso/stats.hpp"

namespace sso::metrics {

PredictionBatch::PredictionBatch(int k, std::vector<double> logits, std::vector<int> truths)
    : k_(k),
      num_classes_(static_cast<int>(perm::factorial(k))),
      logits_(std::move(logits)),
      truths_(std::move(truths)) {
  if (truths_.empty()) throw DimensionError("PredictionBatch: batch must contain at least one row");
  if (logits_.size() != truths_.size() * static_cast<std::size_t>(num_classes_)) {
    throw DimensionError("PredictionBatch: logits row width must equal k!");
  }
  for (int t : truths_) {
    if (t < 0 || t >= num_classes_) throw RangeError("PredictionBatch: truth label outside [0, k!)");
  }
  for (double v : logits_) {
    if (!std::isfinite(v)) throw NumericError("PredictionBatch: non-finite logit");
  }
}

int argmax_row(const double* row, int num_classes) {
  int best = 0;
  for (int c = 1; c < num_classes; ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double top1_accuracy(const PredictionBatch& batch) {
  std::vector<double> hits(static_cast<std::size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    hits[static_cast<std::size_t>(i)] =
        argmax_row(batch.row(i), batch.num_classes()) == batch.truth(i) ? 1.0 : 0.0;
  }
  return stats::mean(hits);
}

double topk_accuracy(const PredictionBatch& batch, int top_k) {
  if (top_k < 1 || top_k > batch.num_classes()) {
    throw RangeError("topk_accuracy: top_k outside [1, k!]");
  }
  const int c = batch.num_classes();
  std::vector<int> order(static_cast<std::size_t>(c));
  std::vector<double> hits(static_cast<std::size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    const double* row = batch.row(i);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [row](int a, int b) { return row[a] > row[b]; });
    bool found = false;
    for (int r = 0; r < top_k; ++r) {
      if (order[static_cast<std::size_t>(r)] == batch.truth(i)) {
        found = true;
        break;
      }
    }
    hits[static_cast<std::size_t>(i)] = found ? 1.0 : 0.0;
  }
  return stats::mean(hits);
}

double mean_kendall_tau(const PredictionBatch& batch, const perm::KtdMatrix& K) {
  if (K.k() != batch.k()) throw DimensionError("mean_kendall_tau: matrix k does not match batch k");
  std::vector<double> dists(static_cast<std::size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    const int pred = argmax_row(batch.row(i), batch.num_classes());
    dists[static_cast<std::size_t>(i)] = static_cast<double>(K.at(pred, batch.truth(i)));
  }
  return stats::mean(dists);
}

namespace {

struct Confusion {
  std::vector<long long> support;    // truth counts per class
  std::vector<long long> predicted;  // prediction counts per class
  std::vector<long long> correct;    // true positives per class
};

Confusion confusion_counts(const PredictionBatch& batch) {
  const auto c = static_cast<std::size_t>(batch.num_classes());
  Confusion cf{std::vector<long long>(c, 0), std::vector<long long>(c, 0),
               std::vector<long long>(c, 0)};
  for (int i = 0; i < batch.size(); ++i) {
    const int truth = batch.truth(i);
    const int pred = argmax_row(batch.row(i), batch.num_classes());
    ++cf.support[static_cast<std::size_t>(truth)];
    ++cf.predicted[static_cast<std::size_t>(pred)];
    if (pred == truth) ++cf.correct[static_cast<std::size_t>(truth)];
  }
  return cf;
}

}  // namespace

double macro_recall(const PredictionBatch& batch) {
  const Confusion cf = confusion_counts(batch);
  std::vector<double> per_class;
  for (std::size_t c = 0; c < cf.support.size(); ++c) {
    if (cf.support[c] == 0) continue;
    per_class.push_back(static_cast<double>(cf.correct[c]) / static_cast<double>(cf.support[c]));
  }
  return stats::mean(per_class);
}

double macro_precision(const PredictionBatch& batch) {
  const Confusion cf = confusion_counts(batch);
  std::vector<double> per_class;
  for (std::size_t c = 0; c < cf.support.size(); ++c) {
    if (cf.predicted[c] > 0) {
      per_class.push_back(static_cast<double>(cf.correct[c]) /
                          static_cast<double>(cf.predicted[c]));
    } else if (cf.support[c] > 0) {
      per_class.push_back(0.0);
    }
  }
  return stats::mean(per_class);
}

MetricsReport compute_report(const PredictionBatch& batch, const perm::KtdMatrix& K, int top_k) {
  MetricsReport r;
  r.top1 = top1_accuracy(batch);
  r.topk = topk_accuracy(batch, top_k);
  r.mean_ktd = mean_kendall_tau(batch, K);
  r.recall = macro_recall(batch);
  r.precision = macro_precision(batch);
  r.top_k_used = top_k;
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["top1_accuracy"] = top1;
  j["topk_accuracy"] = topk;
  j["kendall_tau_distance"] = mean_ktd;
  j["recall"] = recall;
  j["precision"] = precision;
  j["top_k_used"] = top_k_used;
  return j.dump();
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.top1 = j.at("top1_accuracy").get<double>();
  r.topk = j.at("topk_accuracy").get<double>();
  r.mean_ktd = j.at("kendall_tau_distance").get<double>();
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.top_k_used = j.at("top_k_used").get<int>();
  return r;
}

}  // namespace sso::metrics
