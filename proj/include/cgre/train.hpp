#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cgre/model.hpp"

namespace cgre {

struct TrainOptions {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.1;
  // Called after each epoch with the epoch index (1-based) and its mean loss.
  std::function<void(int, double, const ModelParams&)> on_epoch;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
};

// Drops instances whose entity types contradict their bag's label and removes
// bags that end up empty. Only meaningful for training data (one label per
// bag). Removing every bag is a configuration problem, not a silent no-op.
inline std::vector<EncodedBag> filter_violating_instances(
    const std::vector<EncodedBag>& bags, const ConstraintGraph& g) {
  std::vector<EncodedBag> out;
  out.reserve(bags.size());
  for (const EncodedBag& bag : bags) {
    if (bag.label_set.size() != 1)
      throw DomainError("constraint filter: bag '" + bag.pair_id() +
                        "' must carry exactly one label");
    EncodedBag kept;
    kept.head = bag.head;
    kept.tail = bag.tail;
    kept.label_set = bag.label_set;
    for (std::size_t i = 0; i < bag.instances.size(); ++i)
      if (!check_constraint_violation(bag.instances[i], g, bag.label_set[0])) {
        kept.instances.push_back(bag.instances[i]);
        kept.valid.push_back(bag.valid[i]);
      }
    if (!kept.instances.empty()) out.push_back(std::move(kept));
  }
  if (out.empty())
    throw ConfigError(
        "constraint filter: every training instance violates its bag label");
  return out;
}

// Mini-batch SGD over shuffled bags. Bag order is reshuffled every epoch with
// the caller's generator, so a fixed seed reproduces the run bit for bit. The
// base_const variant trains on the constraint-filtered corpus.
inline std::vector<EpochStats> train_model(ModelParams& params,
                                           std::vector<EncodedBag> bags,
                                           const ConstraintGraph& graph,
                                           const TrainOptions& opt, Rng& rng) {
  if (opt.epochs < 1) throw ConfigError("train: epochs must be positive");
  if (opt.batch_size < 1) throw ConfigError("train: batch size must be positive");
  if (!(opt.learning_rate >= 0.0))
    throw ConfigError("train: learning rate must be non-negative");
  if (bags.empty()) throw ConfigError("train: no training bags");
  for (const EncodedBag& bag : bags)
    if (bag.label_set.size() != 1)
      throw DomainError("train: bag '" + bag.pair_id() +
                        "' must carry exactly one label");

  if (params.variant == VariantMode::base_const)
    bags = filter_violating_instances(bags, graph);

  auto named = params.named_params();
  std::vector<EpochStats> stats;
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      std::vector<const EncodedBag*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&bags[order[i]]);

      for (auto& [name, tensor] : named) tensor->zero_grad();
      Tensor loss = bag_loss(batch, params, graph, rng);
      backward(loss);
      for (auto& [name, tensor] : named)
        *tensor = sgd_step(*tensor, tensor->grad_view(), opt.learning_rate);
      loss_sum += loss.value() * static_cast<double>(batch.size());
    }
    EpochStats s;
    s.epoch = epoch;
    s.mean_loss = loss_sum / static_cast<double>(bags.size());
    stats.push_back(s);
    if (opt.on_epoch) opt.on_epoch(epoch, s.mean_loss, params);
  }
  return stats;
}

}  // namespace cgre
