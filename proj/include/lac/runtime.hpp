#pragma once

#include <memory>
#include <stdexcept>

#include "lac/tensor.hpp"

namespace lac {

// Forward-pass context. Eval mode (the default) makes dropout the identity
// and batchnorm use its stored running statistics.
struct Runtime {
  bool training = false;
  bool batchnorm_batch_stats = false;
  double dropout_rate = 0.1;
  std::shared_ptr<Rng> rng;  // required when training

  Rng& rng_ref() const {
    if (!rng) throw std::runtime_error("Runtime: training mode needs a seeded rng");
    return *rng;
  }

  static Runtime train_mode(double rate, std::uint64_t seed) {
    Runtime rt;
    rt.training = true;
    rt.dropout_rate = rate;
    rt.rng = std::make_shared<Rng>(seed);
    return rt;
  }
};

}  // namespace lac
