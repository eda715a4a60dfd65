#pragma once

#include "coxmix/data.hpp"
#include "coxmix/rng.hpp"
#include "coxmix/simgen.hpp"

#include <vector>

namespace testing_support {

// Small random dataset; `ties` rounds times so that some coincide.
inline coxmix::Dataset random_dataset(std::size_t n, std::size_t p, std::uint64_t seed, bool ties = false,
                                      double censor_prob = 0.3) {
  coxmix::Rng rng(seed);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<int> d(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    double t = rng.exponential();
    if (ties) t = std::round(t * 4.0) / 4.0 + 0.25;
    y[static_cast<Eigen::Index>(i)] = t;
    d[i] = rng.uniform() < censor_prob ? 0 : 1;
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
  }
  d[0] = 1;
  return coxmix::Dataset(std::move(y), std::move(d), std::move(x));
}

inline std::vector<double> times_of(const coxmix::Dataset& data) {
  return {data.times().data(), data.times().data() + data.times().size()};
}

inline coxmix::SimulatedData simulated(std::size_t n, double censor, std::uint64_t seed) {
  coxmix::SimConfig cfg;
  cfg.n = n;
  cfg.censor_target = censor;
  cfg.seed = seed;
  cfg.pilot_size = 20000;
  coxmix::Rng rng(seed);
  return coxmix::generate_dataset(cfg, rng);
}

}  // namespace testing_support
