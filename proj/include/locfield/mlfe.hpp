#pragma once

// Particle approximation of the Markov local-field equation. Each copy is a
// root with its k ~ theta neighbor slots, stored as a canonical class index.
// Roots jump at their true rates. A neighbor in state y of a root in state x
// jumps at the ensemble estimate of Psi(y, x, .), the degree-weighted
// conditional root rate given a neighbor in state x, computed over every
// neighbor slot of every copy. Time advances in thinned Euler steps of
// length dt.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <thread>
#include <vector>

#include "locfield/config_space.hpp"
#include "locfield/errors.hpp"
#include "locfield/local_field_ode.hpp"
#include "locfield/model.hpp"
#include "locfield/random.hpp"

namespace locfield {

struct MlfeOptions {
  std::size_t copies = 10'000;
  double dt = 1e-3;
  std::size_t chunk_size = 64;  // copies sharing one random stream
  unsigned threads = 1;
  bool allow_cyclic = false;
  bool enforce_limits = true;  // copies >= 1000 and dt * envelope <= 0.1
};

struct MlfeResult {
  std::shared_ptr<const ConfigSpace> space;
  std::vector<double> times;
  std::vector<std::vector<double>> laws;  // class fractions
  std::vector<std::vector<double>> marginals;
};

namespace detail {

template <class Fn>
void parallel_chunks(std::size_t chunks, unsigned threads, Fn&& fn) {
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += nt) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::size_t pick_jump(Engine& rng, std::span<const double> rates, double total) {
  if (rates.size() == 1) return 0;
  double u = uniform01(rng) * total;
  std::size_t last = 0;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    if (rates[j] <= 0.0) continue;
    last = j;
    if (u < rates[j]) return j;
    u -= rates[j];
  }
  return last;
}

}  // namespace detail

inline MlfeResult mlfe_ensemble(const ModelSpec& model, const LawVector& p0,
                                std::span<const double> output_times, std::uint64_t seed,
                                const MlfeOptions& opts = {}) {
  if (!opts.allow_cyclic) require_acyclic(model);
  if (output_times.empty()) throw ConfigError("mlfe: no output times");
  if (opts.copies == 0 || opts.chunk_size == 0) throw ConfigError("mlfe: empty ensemble");
  if (!(opts.dt > 0.0)) throw ConfigError("mlfe: dt must be positive");
  const auto space = p0.space_ptr();
  const LocalFieldOde ode(model, space);
  const std::size_t nc = space->size(), nj = model.num_jumps();
  const int m = model.num_states();
  const double t0 = output_times.front(), t_end = output_times.back();

  if (opts.enforce_limits) {
    if (opts.copies < 1000) throw ConfigError("mlfe: at least 1000 copies are required");
    const double envelope = nj * model.rate_bound(space->d_max() + 1, t_end);
    if (opts.dt * envelope > 0.1 + 1e-12) {
      throw ConfigError("mlfe: dt * envelope rate = " + std::to_string(opts.dt * envelope) +
                        " exceeds 0.1");
    }
  }
  std::vector<std::size_t> output_steps;
  for (double t : output_times) {
    const double steps = (t - t0) / opts.dt;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-6 * std::max(1.0, rounded)) {
      throw ConfigError("mlfe: output time " + std::to_string(t) + " is not a multiple of dt");
    }
    if (!output_steps.empty() && static_cast<std::size_t>(rounded) <= output_steps.back()) {
      throw ConfigError("mlfe: output times must be strictly increasing");
    }
    output_steps.push_back(static_cast<std::size_t>(rounded));
  }

  const std::size_t n = opts.copies;
  const std::size_t chunks = (n + opts.chunk_size - 1) / opts.chunk_size;
  std::vector<Engine> streams;
  for (std::size_t c = 0; c < chunks; ++c) streams.push_back(make_stream(seed, c));

  // Initial classes by inverse-CDF sampling from p0.
  std::vector<double> cdf(nc);
  double acc = 0.0;
  for (std::size_t c = 0; c < nc; ++c) cdf[c] = acc += std::max(0.0, p0[c]);
  std::vector<std::uint32_t> cls(n);
  detail::parallel_chunks(chunks, opts.threads, [&](std::size_t ch) {
    for (std::size_t i = ch * opts.chunk_size; i < std::min(n, (ch + 1) * opts.chunk_size); ++i) {
      const double u = uniform01(streams[ch]) * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      cls[i] = static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf.begin(), nc - 1));
    }
  });

  // Occupied neighbor states per class.
  std::vector<std::vector<std::pair<int, int>>> occupied(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto counts = space->neighbor_counts(c);
    for (int y = 0; y < m; ++y) {
      if (counts[y] > 0.0) occupied[c].emplace_back(y, static_cast<int>(counts[y]));
    }
  }

  MlfeResult out;
  out.space = space;
  std::vector<double> hist(nc), rates, table, root_p(nc), cell_p(static_cast<std::size_t>(m) * m),
      cell_total(static_cast<std::size_t>(m) * m), root_total(nc);
  auto histogram = [&] {
    std::fill(hist.begin(), hist.end(), 0.0);
    for (auto c : cls) hist[c] += 1.0;
  };
  auto record = [&](double t) {
    std::vector<double> law(nc);
    for (std::size_t c = 0; c < nc; ++c) law[c] = hist[c] / static_cast<double>(n);
    out.times.push_back(t);
    out.marginals.push_back(marginalize(*space, law));
    out.laws.push_back(std::move(law));
  };

  std::size_t next_out = 0;
  const std::size_t total_steps = output_steps.back();
  for (std::size_t step = 0;; ++step) {
    histogram();
    const double t = t0 + static_cast<double>(step) * opts.dt;
    if (next_out < output_steps.size() && output_steps[next_out] == step) {
      record(output_times[next_out]);
      ++next_out;
    }
    if (step == total_steps) break;

    ode.root_rates(t, rates);
    for (std::size_t c = 0; c < nc; ++c) {
      const double bound = model.rate_bound(space->degree(c) + 1, t);
      double total = 0.0;
      for (std::size_t j = 0; j < nj; ++j) {
        const double r = rates[c * nj + j];
        if (!(r >= 0.0) || r > bound) {
          throw ModelError(model.name() + ": rate " + std::to_string(r) + " in configuration " +
                           to_string(space->config(c), model) + " violates the envelope " +
                           std::to_string(bound));
        }
        if (r > 0.0 && ode.root_target(c, j) == ConfigSpace::npos) {
          throw ModelError(model.name() + ": positive rate leaving the state space in " +
                           to_string(space->config(c), model));
        }
        total += r;
      }
      root_total[c] = total;
      root_p[c] = -std::expm1(-total * opts.dt);
    }
    ode.neighbor_rates(hist, rates, table);
    for (std::size_t cell = 0; cell < cell_p.size(); ++cell) {
      double total = 0.0;
      for (std::size_t j = 0; j < nj; ++j) total += table[cell * nj + j];
      cell_total[cell] = total;
      cell_p[cell] = -std::expm1(-total * opts.dt);
    }

    detail::parallel_chunks(chunks, opts.threads, [&](std::size_t ch) {
      Engine& rng = streams[ch];
      for (std::size_t i = ch * opts.chunk_size; i < std::min(n, (ch + 1) * opts.chunk_size); ++i) {
        const std::size_t c = cls[i];
        std::size_t cur = c;
        if (root_p[c] > 0.0 && uniform01(rng) < root_p[c]) {
          const std::size_t j = detail::pick_jump(
              rng, std::span<const double>(rates).subspan(c * nj, nj), root_total[c]);
          cur = ode.root_target(c, j);
        }
        const int x = space->root(c);
        for (auto [y, count] : occupied[c]) {
          const std::size_t cell = static_cast<std::size_t>(y) * m + x;
          const double p = cell_p[cell];
          if (p <= 0.0) continue;
          for (int r = 0; r < count; ++r) {
            if (uniform01(rng) >= p) continue;
            const std::size_t j = detail::pick_jump(
                rng, std::span<const double>(table).subspan(cell * nj, nj), cell_total[cell]);
            cur = ode.neighbor_target(cur, y, j);
          }
        }
        cls[i] = static_cast<std::uint32_t>(cur);
      }
    });
  }
  return out;
}

}  // namespace locfield
