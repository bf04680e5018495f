#pragma once

// Mean-field baseline: a single vertex of degree k ~ theta whose neighbors
// are replaced by a closure of the current marginal.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "locfield/graphs.hpp"
#include "locfield/integrator.hpp"
#include "locfield/model.hpp"

namespace locfield {

enum class MeanFieldClosure {
  independent_neighbors,  // neighbors i.i.d. from mu_t, exact multiset sum
  complete_graph,         // neighbor counts replaced by k * mu_t
};

class MeanFieldOde {
 public:
  MeanFieldOde(ModelSpec model, DegreeDistribution theta,
               MeanFieldClosure closure = MeanFieldClosure::independent_neighbors)
      : model_(std::move(model)), theta_(std::move(theta)), closure_(closure) {
    const int m = model_.num_states();
    for (int k : theta_.support()) {
      Block block{k, theta_(k), {}, {}};
      if (closure_ == MeanFieldClosure::independent_neighbors) {
        std::vector<int> counts(m, 0);
        enumerate(block, counts, 0, k);
      }
      blocks_.push_back(std::move(block));
    }
  }

  void rhs(double t, std::span<const double> mu, std::span<double> dmu) const {
    const int m = model_.num_states();
    const std::size_t nj = model_.num_jumps();
    std::fill(dmu.begin(), dmu.end(), 0.0);
    std::vector<double> expected(static_cast<std::size_t>(m) * nj, 0.0);
    std::vector<double> counts(m);
    for (const auto& block : blocks_) {
      if (closure_ == MeanFieldClosure::complete_graph) {
        for (int x = 0; x < m; ++x) counts[x] = block.k * mu[x];
        for (int a = 0; a < m; ++a) {
          for (std::size_t j = 0; j < nj; ++j) {
            expected[a * nj + j] += block.weight * model_.rate(j, t, a, counts, block.k);
          }
        }
        continue;
      }
      const std::size_t nms = block.coefficients.size();
      for (std::size_t s = 0; s < nms; ++s) {
        double prob = block.coefficients[s];
        for (int x = 0; x < m && prob != 0.0; ++x) {
          prob *= std::pow(mu[x], block.counts[s * m + x]);
        }
        if (prob == 0.0) continue;
        for (int x = 0; x < m; ++x) counts[x] = block.counts[s * m + x];
        for (int a = 0; a < m; ++a) {
          for (std::size_t j = 0; j < nj; ++j) {
            expected[a * nj + j] += block.weight * prob * model_.rate(j, t, a, counts, block.k);
          }
        }
      }
    }
    for (int a = 0; a < m; ++a) {
      for (std::size_t j = 0; j < nj; ++j) {
        const int b = model_.jump_target(a, j);
        if (b == kStar) continue;
        const double flux = mu[a] * expected[a * nj + j];
        dmu[a] -= flux;
        dmu[b] += flux;
      }
    }
  }

 private:
  struct Block {
    int k;
    double weight;
    std::vector<double> coefficients;  // multinomial k! / prod n_x!
    std::vector<double> counts;        // flattened, m per multiset
  };

  void enumerate(Block& block, std::vector<int>& counts, int x, int left) {
    const int m = model_.num_states();
    if (x == m - 1) {
      counts[x] = left;
      double coef = 1.0;
      for (int r = 2; r <= block.k; ++r) coef *= r;
      for (int n : counts) {
        for (int r = 2; r <= n; ++r) coef /= r;
      }
      block.coefficients.push_back(coef);
      block.counts.insert(block.counts.end(), counts.begin(), counts.end());
      return;
    }
    for (int n = 0; n <= left; ++n) {
      counts[x] = n;
      enumerate(block, counts, x + 1, left - n);
    }
  }

  ModelSpec model_;
  DegreeDistribution theta_;
  MeanFieldClosure closure_;
  std::vector<Block> blocks_;
};

struct MeanFieldSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> marginals;
  IntegrationStats stats;
};

inline MeanFieldSolution mean_field_ode(const ModelSpec& model, const DegreeDistribution& theta,
                                        std::span<const double> mu0,
                                        std::span<const double> output_times,
                                        MeanFieldClosure closure = MeanFieldClosure::independent_neighbors,
                                        const SolverOptions& opts = {}) {
  if (static_cast<int>(mu0.size()) != model.num_states()) {
    throw ModelError("mean field: initial marginal has the wrong number of states");
  }
  MeanFieldOde ode(model, theta, closure);
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) { ode.rhs(t, y, dy); };
  Trajectory tr = integrate_probability_flow(rhs, std::vector<double>(mu0.begin(), mu0.end()),
                                             output_times, opts);
  return {std::move(tr.times), std::move(tr.states), tr.stats};
}

}  // namespace locfield
