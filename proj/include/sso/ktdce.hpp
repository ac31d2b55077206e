#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "sso/perm.hpp"

namespace sso::ktdce {

// Trainable additive correction to the fixed KTD matrix. Starts at zero.
class OffsetMatrix {
 public:
  static OffsetMatrix zeros(int k);

  int k() const { return k_; }
  int num_classes() const { return num_classes_; }

  double at(int i, int j) const { return entries_[index(i, j)]; }
  void set(int i, int j, double v) { entries_[index(i, j)] = v; }

  std::vector<double>& entries() { return entries_; }
  const std::vector<double>& entries() const { return entries_; }

  bool trainable = true;

  void write_csv(std::ostream& os) const;

 private:
  OffsetMatrix(int k, int num_classes) : k_(k), num_classes_(num_classes) {}

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(num_classes_) +
           static_cast<std::size_t>(j);
  }

  int k_ = 2;
  int num_classes_ = 2;
  std::vector<double> entries_;
};

// faithful: distance term indexed by the argmax prediction (pseudocode form,
// piecewise constant in the logits). soft: softmax-expected distance, a
// documented extension with a nonzero logits gradient.
enum class KtdMode { faithful, soft };

// predicted_first follows the pseudocode, (K+O)[argmax(pred), truth];
// truth_first is the alternative reading, (K+O)[truth, argmax(pred)].
// K is symmetric, so only the offset matrix is affected by the choice.
enum class IndexOrder { predicted_first, truth_first };

struct LossConfig {
  double alpha = 1.0;
  double beta = 0.1;
  KtdMode mode = KtdMode::faithful;
  IndexOrder order = IndexOrder::predicted_first;

  void validate() const;
};

struct LossValue {
  double total = 0.0;
  double ce_part = 0.0;
  double ktd_part = 0.0;
  double l1_part = 0.0;
};

// Softmax of one logit row with log-sum-exp stabilization.
void softmax_row(const double* logits, int num_classes, double* probs_out);

// Mean over rows of -log softmax(logits)[truth].
double cross_entropy(std::span<const double> logits, std::span<const int> truths,
                     int num_classes);

// The distance part of the loss, before the alpha weight.
double ktd_term(std::span<const double> logits, std::span<const int> truths,
                const perm::KtdMatrix& K, const OffsetMatrix& O, KtdMode mode,
                IndexOrder order = IndexOrder::predicted_first);

// Sum of absolute values of all offset entries.
double l1_reg(const OffsetMatrix& O);

LossValue ktdce_loss(std::span<const double> logits, std::span<const int> truths,
                     const perm::KtdMatrix& K, const OffsetMatrix& O,
                     const LossConfig& config);

// d(total)/d(logits), N x k! row-major. In faithful mode this is exactly the
// cross-entropy gradient (the distance term is piecewise constant in logits);
// both modes share the same cross-entropy code path.
std::vector<double> grad_logits(std::span<const double> logits, std::span<const int> truths,
                                const perm::KtdMatrix& K, const OffsetMatrix& O,
                                const LossConfig& config);

// d(total)/dO, k! x k! row-major. Faithful: alpha * visit frequency of
// [pred, truth] plus beta * sign(O); soft: alpha * softmax visit mass plus
// beta * sign(O). sign(0) is 0.
std::vector<double> grad_offset(std::span<const double> logits, std::span<const int> truths,
                                const perm::KtdMatrix& K, const OffsetMatrix& O,
                                const LossConfig& config);

}  // namespace sso::ktdce
