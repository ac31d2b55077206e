#pragma once

#include <string>
#include <vector>

#include "sso/ktdce.hpp"
#include "sso/nn/model.hpp"

namespace sso::nn {

struct SgdConfig {
  double base_lr = 0.01;
  double momentum = 0.5;
  double weight_decay = 0.0005;
};

// base_lr until the first drop, /10 until the second, /100 after. Drop epochs
// sit at 15/30 and 25/30 of the total and scale proportionally when the total
// differs from 30.
double lr_schedule(int epoch, double base_lr, int total_epochs = 30);

// SGD with momentum: v = mu*v + (g + wd*theta); theta -= lr*v. Weight decay
// applies to model weights only; the offset matrix carries its own L1 term.
class SgdOptimizer {
 public:
  SgdOptimizer(const OrderTransformer& model, const ktdce::OffsetMatrix& offset,
               SgdConfig config);

  const SgdConfig& config() const { return config_; }

  void step(OrderTransformer& model, const std::vector<DenseArray>& param_grads,
            ktdce::OffsetMatrix& offset, const std::vector<double>& offset_grad,
            double lr);

  std::vector<DenseArray>& velocities() { return velocity_; }
  const std::vector<DenseArray>& velocities() const { return velocity_; }
  std::vector<double>& offset_velocity() { return offset_velocity_; }
  const std::vector<double>& offset_velocity() const { return offset_velocity_; }

 private:
  SgdConfig config_;
  std::vector<DenseArray> velocity_;
  std::vector<double> offset_velocity_;
};

// Forward + KTD-CE loss + backward + one optimizer update.
// Throws TrainingError on a non-finite loss.
ktdce::LossValue train_step(OrderTransformer& model, const ModelBatch& batch,
                            const perm::KtdMatrix& K, ktdce::OffsetMatrix& offset,
                            SgdOptimizer& optimizer, const ktdce::LossConfig& loss_config,
                            double lr);

// Loss and parameter gradients without an update (shared by train_step and
// the finite-difference checker).
ktdce::LossValue loss_and_grads(const OrderTransformer& model, const ModelBatch& batch,
                                const perm::KtdMatrix& K, const ktdce::OffsetMatrix& offset,
                                const ktdce::LossConfig& loss_config,
                                std::vector<DenseArray>* param_grads,
                                std::vector<double>* offset_grads);

}  // namespace sso::nn
