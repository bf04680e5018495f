#pragma once

// The local-field ODE for root-neighborhood laws on unimodular Galton–Watson
// trees, written in the canonical (sorted-neighbor) basis.
//
// A neighbor in state y of a root in state x jumps by j at rate
//
//   Psi(y, x, j) = sum_c P(c) n_x(c) rho^j(c) [root(c) = y]
//                / sum_c P(c) n_x(c) [root(c) = y]          (0/0 = 0)
//
// where P(c) is the class mass and n_x(c) the number of neighbors of c in
// state x. This is the degree-weighted conditional rate of a root in state y
// given that one particular neighbor is in state x.

#include <algorithm>
#include <memory>
#include <span>
#include <vector>

#include "locfield/config_space.hpp"
#include "locfield/errors.hpp"
#include "locfield/integrator.hpp"
#include "locfield/model.hpp"

namespace locfield {

class LocalFieldOde {
 public:
  LocalFieldOde(ModelSpec model, std::shared_ptr<const ConfigSpace> space)
      : model_(std::move(model)), space_(std::move(space)) {
    if (space_->num_states() != model_.num_states()) {
      throw ModelError(model_.name() + ": configuration space has the wrong number of states");
    }
    const std::size_t nc = space_->size(), nj = model_.num_jumps();
    const int m = model_.num_states();
    root_target_.assign(nc * nj, ConfigSpace::npos);
    nb_target_.assign(nc * m * nj, ConfigSpace::npos);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& cfg = space_->config(c);
      for (std::size_t j = 0; j < nj; ++j) {
        const int b = model_.jump_target(cfg.root(), j);
        if (b != kStar) {
          NeighborhoodConfig moved = cfg;
          moved.entries[0] = b;
          root_target_[c * nj + j] = space_->index_of(moved);
        }
        for (int y = 0; y < m; ++y) {
          if (space_->neighbor_counts(c)[y] == 0.0) continue;
          const int z = model_.jump_target(y, j);
          if (z == kStar) continue;
          NeighborhoodConfig moved = cfg;
          *std::find(moved.entries.begin() + 1, moved.entries.end(), y) = z;
          nb_target_[(c * m + y) * nj + j] = space_->index_of(moved);
        }
      }
    }
  }

  const ModelSpec& model() const { return model_; }
  const ConfigSpace& space() const { return *space_; }
  const std::shared_ptr<const ConfigSpace>& space_ptr() const { return space_; }

  /// rates[c * J + j] = rho^j(t, class c).
  void root_rates(double t, std::vector<double>& rates) const {
    const std::size_t nc = space_->size(), nj = model_.num_jumps();
    rates.resize(nc * nj);
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t j = 0; j < nj; ++j) {
        rates[c * nj + j] = model_.rate(j, t, space_->root(c), space_->neighbor_counts(c),
                                        space_->degree(c));
      }
    }
  }

  /// table[(y * m + x) * J + j] = Psi(y, x, j) for the law `mass`. Negative
  /// round-off entries get weight zero, so Psi stays an average of rates.
  void neighbor_rates(std::span<const double> mass, std::span<const double> rates,
                      std::vector<double>& table) const {
    const std::size_t nj = model_.num_jumps();
    const int m = model_.num_states();
    table.assign(static_cast<std::size_t>(m) * m * nj, 0.0);
    std::vector<double> den(static_cast<std::size_t>(m) * m, 0.0);
    for (std::size_t c = 0; c < space_->size(); ++c) {
      const int y = space_->root(c);
      const auto counts = space_->neighbor_counts(c);
      for (int x = 0; x < m; ++x) {
        if (counts[x] == 0.0) continue;
        const double w = std::max(0.0, mass[c]) * counts[x];
        den[y * m + x] += w;
        for (std::size_t j = 0; j < nj; ++j) table[(y * m + x) * nj + j] += w * rates[c * nj + j];
      }
    }
    for (std::size_t cell = 0; cell < den.size(); ++cell) {
      for (std::size_t j = 0; j < nj; ++j) {
        table[cell * nj + j] = den[cell] > 0.0 ? table[cell * nj + j] / den[cell] : 0.0;
      }
    }
  }

  void neighbor_rates(double t, std::span<const double> mass, std::vector<double>& table) const {
    std::vector<double> rates;
    root_rates(t, rates);
    neighbor_rates(mass, rates, table);
  }

  /// Time derivative of the class masses. Each term moves mass from a class
  /// to the class reached by one root or neighbor jump, so the total is kept.
  void rhs(double t, std::span<const double> mass, std::span<double> dmass) const {
    const std::size_t nc = space_->size(), nj = model_.num_jumps();
    const int m = model_.num_states();
    std::vector<double> rates, table;
    root_rates(t, rates);
    neighbor_rates(mass, rates, table);
    std::fill(dmass.begin(), dmass.end(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      if (mass[c] == 0.0) continue;
      const int x = space_->root(c);
      const auto counts = space_->neighbor_counts(c);
      for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t to = root_target_[c * nj + j];
        if (to != ConfigSpace::npos) {
          const double flux = mass[c] * rates[c * nj + j];
          dmass[c] -= flux;
          dmass[to] += flux;
        }
        for (int y = 0; y < m; ++y) {
          if (counts[y] == 0.0) continue;
          const std::size_t nto = nb_target_[(c * m + y) * nj + j];
          if (nto == ConfigSpace::npos) continue;
          const double flux = mass[c] * counts[y] * table[(y * m + x) * nj + j];
          dmass[c] -= flux;
          dmass[nto] += flux;
        }
      }
    }
  }

  /// Psi_v^{l,j}(t, f, a): v = 0 is the root rate at a with the root shifted
  /// back by l; v >= 1 is the neighbor rate for slot v shifted back by l.
  /// `shift` is a jump code (0 or the code of jump j).
  double psi(double t, std::span<const double> mass, const NeighborhoodConfig& a, int v,
             int shift, std::size_t j) const {
    const int k = a.degree();
    if (v < 0 || v > k) throw ModelError("psi: slot index out of range");
    const int shifted = model_.index_of_code(model_.code(a.entries[v]) - shift);
    if (shifted == kStar) return 0.0;
    if (v == 0) {
      if (space_->theta()(k) <= 0.0) return 0.0;
      std::vector<double> counts(model_.num_states(), 0.0);
      for (int x : a.neighbors()) counts[x] += 1.0;
      return model_.rate(j, t, shifted, counts, k);
    }
    std::vector<double> table;
    neighbor_rates(t, mass, table);
    const int m = model_.num_states();
    return table[(static_cast<std::size_t>(shifted) * m + a.root()) * model_.num_jumps() + j];
  }

  std::size_t root_target(std::size_t c, std::size_t j) const {
    return root_target_[c * model_.num_jumps() + j];
  }
  std::size_t neighbor_target(std::size_t c, int y, std::size_t j) const {
    return nb_target_[(c * model_.num_states() + y) * model_.num_jumps() + j];
  }

 private:
  ModelSpec model_;
  std::shared_ptr<const ConfigSpace> space_;
  std::vector<std::size_t> root_target_;
  std::vector<std::size_t> nb_target_;
};

inline std::vector<double> ode_rhs(const ModelSpec& model, double t, const LawVector& p) {
  LocalFieldOde ode(model, p.space_ptr());
  std::vector<double> out(p.size());
  ode.rhs(t, p.values(), out);
  return out;
}

struct OdeSolution {
  std::shared_ptr<const ConfigSpace> space;
  std::vector<double> times;
  std::vector<std::vector<double>> laws;
  IntegrationStats stats;

  LawVector law(std::size_t i) const { return LawVector(space, laws[i]); }

  std::vector<std::vector<double>> marginals() const {
    std::vector<std::vector<double>> out;
    for (const auto& l : laws) out.push_back(marginalize(*space, l));
    return out;
  }
};

struct IntegrateOptions {
  SolverOptions solver;
  bool allow_cyclic = false;
};

/// Solves the local-field ODE from p0 through every output time (the first
/// output time is the initial time).
inline OdeSolution integrate(const ModelSpec& model, const LawVector& p0,
                             std::span<const double> output_times,
                             const IntegrateOptions& opts = {}) {
  if (!opts.allow_cyclic) require_acyclic(model);
  LocalFieldOde ode(model, p0.space_ptr());
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) { ode.rhs(t, y, dy); };
  std::vector<double> y0(p0.values().begin(), p0.values().end());
  Trajectory tr = integrate_probability_flow(rhs, std::move(y0), output_times, opts.solver);
  return {p0.space_ptr(), std::move(tr.times), std::move(tr.states), tr.stats};
}

inline OdeSolution integrate(const ModelSpec& model, const DegreeDistribution& theta,
                             std::span<const double> q, std::span<const double> output_times,
                             const IntegrateOptions& opts = {}) {
  return integrate(model, build_initial_law(enumerate_configs(theta, model.num_states()), q),
                   output_times, opts);
}

}  // namespace locfield
