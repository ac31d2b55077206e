#include "sso/ktdce.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sso/error.hpp"
#include "sso/metrics.hpp"
#include "sso/stats.hpp"

namespace sso::ktdce {

namespace {

void check_shapes(std::span<const double> logits, std::span<const int> truths,
                  const perm::KtdMatrix& K, const OffsetMatrix& O) {
  if (K.k() != O.k()) throw DimensionError("ktdce: K and O sizes differ");
  const auto c = static_cast<std::size_t>(K.num_classes());
  if (truths.empty()) throw DimensionError("ktdce: batch must contain at least one row");
  if (logits.size() != truths.size() * c) {
    throw DimensionError("ktdce: logits size does not match truths * k!");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("ktdce: non-finite logit");
  }
  for (int t : truths) {
    if (t < 0 || t >= K.num_classes()) throw RangeError("ktdce: truth label outside [0, k!)");
  }
}

double distance_at(const perm::KtdMatrix& K, const OffsetMatrix& O, IndexOrder order,
                   int pred, int truth) {
  if (order == IndexOrder::predicted_first) return K.at(pred, truth) + O.at(pred, truth);
  return K.at(truth, pred) + O.at(truth, pred);
}

}  // namespace

OffsetMatrix OffsetMatrix::zeros(int k) {
  OffsetMatrix o(k, static_cast<int>(perm::factorial(k)));
  o.entries_.assign(static_cast<std::size_t>(o.num_classes_) * o.num_classes_, 0.0);
  return o;
}

void OffsetMatrix::write_csv(std::ostream& os) const {
  for (int j = 0; j < num_classes_; ++j) {
    if (j) os << ',';
    os << j;
  }
  os << '\n';
  os.precision(17);
  for (int i = 0; i < num_classes_; ++i) {
    for (int j = 0; j < num_classes_; ++j) {
      if (j) os << ',';
      os << at(i, j);
    }
    os << '\n';
  }
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw RangeError("LossConfig: alpha must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw RangeError("LossConfig: beta must be finite and >= 0");
}

void softmax_row(const double* logits, int num_classes, double* probs_out) {
  double max_v = logits[0];
  for (int c = 1; c < num_classes; ++c) max_v = std::max(max_v, logits[c]);
  double denom = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    probs_out[c] = std::exp(logits[c] - max_v);
    denom += probs_out[c];
  }
  for (int c = 0; c < num_classes; ++c) probs_out[c] /= denom;
}

double cross_entropy(std::span<const double> logits, std::span<const int> truths,
                     int num_classes) {
  if (truths.empty()) throw DimensionError("cross_entropy: empty batch");
  if (logits.size() != truths.size() * static_cast<std::size_t>(num_classes)) {
    throw DimensionError("cross_entropy: logits size mismatch");
  }
  const int n = static_cast<int>(truths.size());
  std::vector<double> row_losses(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * num_classes;
    double max_v = row[0];
    for (int c = 1; c < num_classes; ++c) max_v = std::max(max_v, row[c]);
    if (!std::isfinite(max_v)) throw NumericError("cross_entropy: non-finite logit");
    double sum_exp = 0.0;
    for (int c = 0; c < num_classes; ++c) sum_exp += std::exp(row[c] - max_v);
    const double log_z = max_v + std::log(sum_exp);
    row_losses[static_cast<std::size_t>(i)] = log_z - row[static_cast<std::size_t>(truths[i])];
  }
  return stats::mean(row_losses);
}

double ktd_term(std::span<const double> logits, std::span<const int> truths,
                const perm::KtdMatrix& K, const OffsetMatrix& O, KtdMode mode,
                IndexOrder order) {
  check_shapes(logits, truths, K, O);
  const int n = static_cast<int>(truths.size());
  const int c = K.num_classes();
  std::vector<double> row_values(static_cast<std::size_t>(n));
  std::vector<double> probs(static_cast<std::size_t>(c));
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    if (mode == KtdMode::faithful) {
      const int pred = metrics::argmax_row(row, c);
      row_values[static_cast<std::size_t>(i)] = distance_at(K, O, order, pred, truths[i]);
    } else {
      softmax_row(row, c, probs.data());
      double exp_d = 0.0;
      for (int j = 0; j < c; ++j) {
        exp_d += probs[static_cast<std::size_t>(j)] * distance_at(K, O, order, j, truths[i]);
      }
      row_values[static_cast<std::size_t>(i)] = exp_d;
    }
  }
  return stats::mean(row_values);
}

double l1_reg(const OffsetMatrix& O) {
  std::vector<double> abs_entries(O.entries().size());
  std::transform(O.entries().begin(), O.entries().end(), abs_entries.begin(),
                 [](double v) { return std::abs(v); });
  return stats::pairwise_sum(abs_entries);
}

LossValue ktdce_loss(std::span<const double> logits, std::span<const int> truths,
                     const perm::KtdMatrix& K, const OffsetMatrix& O,
                     const LossConfig& config) {
  config.validate();
  check_shapes(logits, truths, K, O);
  LossValue v;
  v.ce_part = cross_entropy(logits, truths, K.num_classes());
  v.ktd_part = ktd_term(logits, truths, K, O, config.mode, config.order);
  v.l1_part = l1_reg(O);
  v.total = v.ce_part + config.alpha * v.ktd_part + config.beta * v.l1_part;
  return v;
}

std::vector<double> grad_logits(std::span<const double> logits, std::span<const int> truths,
                                const perm::KtdMatrix& K, const OffsetMatrix& O,
                                const LossConfig& config) {
  config.validate();
  check_shapes(logits, truths, K, O);
  const int n = static_cast<int>(truths.size());
  const int c = K.num_classes();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(logits.size(), 0.0);
  std::vector<double> probs(static_cast<std::size_t>(c));
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    double* g = grad.data() + static_cast<std::size_t>(i) * c;
    softmax_row(row, c, probs.data());
    for (int j = 0; j < c; ++j) g[j] = probs[static_cast<std::size_t>(j)] * inv_n;
    g[static_cast<std::size_t>(truths[i])] -= inv_n;
    if (config.mode == KtdMode::soft && config.alpha != 0.0) {
      double exp_d = 0.0;
      for (int j = 0; j < c; ++j) {
        exp_d += probs[static_cast<std::size_t>(j)] *
                 distance_at(K, O, config.order, j, truths[i]);
      }
      for (int j = 0; j < c; ++j) {
        const double dj = distance_at(K, O, config.order, j, truths[i]);
        g[j] += config.alpha * inv_n * probs[static_cast<std::size_t>(j)] * (dj - exp_d);
      }
    }
  }
  return grad;
}

std::vector<double> grad_offset(std::span<const double> logits, std::span<const int> truths,
                                const perm::KtdMatrix& K, const OffsetMatrix& O,
                                const LossConfig& config) {
  config.validate();
  check_shapes(logits, truths, K, O);
  const int n = static_cast<int>(truths.size());
  const int c = K.num_classes();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(static_cast<std::size_t>(c) * c, 0.0);
  std::vector<double> probs(static_cast<std::size_t>(c));
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    if (config.mode == KtdMode::faithful) {
      const int pred = metrics::argmax_row(row, c);
      const int r = config.order == IndexOrder::predicted_first ? pred : truths[i];
      const int col = config.order == IndexOrder::predicted_first ? truths[i] : pred;
      grad[static_cast<std::size_t>(r) * c + col] += config.alpha * inv_n;
    } else {
      softmax_row(row, c, probs.data());
      for (int j = 0; j < c; ++j) {
        const int r = config.order == IndexOrder::predicted_first ? j : truths[i];
        const int col = config.order == IndexOrder::predicted_first ? truths[i] : j;
        grad[static_cast<std::size_t>(r) * c + col] +=
            config.alpha * inv_n * probs[static_cast<std::size_t>(j)];
      }
    }
  }
  for (std::size_t e = 0; e < grad.size(); ++e) {
    const double o = O.entries()[e];
    if (o > 0.0) grad[e] += config.beta;
    else if (o < 0.0) grad[e] -= config.beta;
  }
  return grad;
}

}  // namespace sso::ktdce
