#include "jys/brute.hpp"

#include <algorithm>
#include <cmath>

#include "jys/error.hpp"

namespace jys {

std::string to_string(BruteStep s) {
  switch (s) {
    case BruteStep::Euler: return "euler";
    case BruteStep::ExactHold: return "exact_hold";
    case BruteStep::ExactMarginal: return "exact_marginal";
  }
  return "unknown";
}

BruteStep brute_step_from_string(const std::string& s) {
  if (s == "exact_marginal" || s == "exact-marginal") return BruteStep::ExactMarginal;
  return to_brute_step(step_kernel_from_string(s));
}

BruteStep to_brute_step(StepKernel k) { return k == StepKernel::Euler ? BruteStep::Euler : BruteStep::ExactHold; }

namespace {

// Reverse generator on the full product space at one time, stored as a transition list.
struct FullGenerator {
  std::vector<std::int64_t> from;
  std::vector<std::int64_t> to;
  std::vector<double> rate;
  std::vector<double> exit;
};

FullGenerator build_generator(const ReverseOracle& oracle, double t) {
  const StateSpace sp = oracle.space();
  const auto n = sp.total_states();
  const Pmf qt = oracle.marginal(t);
  const auto q = qt.probs();
  const int dims = sp.num_dims();
  const int s = sp.vocab_size();
  const double b = oracle.kernel().beta(t);
  const Matrix& shape = oracle.kernel().shape();
  std::vector<std::int64_t> stride(static_cast<std::size_t>(dims), 1);
  for (int d = 1; d < dims; ++d) stride[static_cast<std::size_t>(d)] = stride[static_cast<std::size_t>(d) - 1] * s;

  FullGenerator g;
  g.exit.assign(static_cast<std::size_t>(n), 0.0);
  State x(static_cast<std::size_t>(dims));
  for (std::int64_t i = 0; i < n; ++i) {
    const double qx = q[static_cast<std::size_t>(i)];
    if (!(qx > 0.0)) continue;  // unreachable under the exact process; left frozen
    sp.decode_into(i, x);
    for (int d = 0; d < dims; ++d) {
      const int xd = x[static_cast<std::size_t>(d)];
      for (int v = 0; v < s; ++v) {
        if (v == xd || shape(v, xd) == 0.0) continue;
        const std::int64_t j = i + (v - xd) * stride[static_cast<std::size_t>(d)];
        const double qy = q[static_cast<std::size_t>(j)];
        if (!(qy > 0.0)) continue;
        const double r = b * shape(v, xd) * qy / qx;
        g.from.push_back(i);
        g.to.push_back(j);
        g.rate.push_back(r);
        g.exit[static_cast<std::size_t>(i)] += r;
      }
    }
  }
  return g;
}

// rows * G for a block of row vectors (one column per state).
Matrix apply_generator(const FullGenerator& g, const Matrix& rows) {
  Matrix out = Matrix::Zero(rows.rows(), rows.cols());
  for (std::size_t e = 0; e < g.rate.size(); ++e) out.col(g.to[e]) += g.rate[e] * rows.col(g.from[e]);
  for (Eigen::Index x = 0; x < rows.cols(); ++x) {
    const double ex = g.exit[static_cast<std::size_t>(x)];
    if (ex != 0.0) out.col(x) -= ex * rows.col(x);
  }
  return out;
}

}  // namespace

Matrix propagate_reverse(const ReverseOracle& oracle, const Matrix& rows, double from, double to,
                         const IntegratorOptions& opts) {
  if (!(from >= to)) throw IntervalError("propagate_reverse: requires from >= to");
  if (rows.cols() != oracle.space().total_states()) throw DomainError("propagate_reverse: wrong row length");
  Matrix y = rows;
  if (from == to) return y;

  // Generators are rebuilt per stage time; a handful of recent times are kept.
  std::vector<std::pair<double, FullGenerator>> cache;
  auto gen_at = [&](double t) -> const FullGenerator& {
    for (auto& [time, g] : cache) {
      if (time == t) return g;
    }
    if (cache.size() >= 8) cache.erase(cache.begin());
    cache.emplace_back(t, build_generator(oracle, t));
    return cache.back().second;
  };
  // Time runs backwards: dy/dtau = y G(from - tau).
  auto rk4 = [&](const Matrix& y0, double t, double h) {
    const Matrix k1 = apply_generator(gen_at(t), y0);
    const Matrix k2 = apply_generator(gen_at(t - 0.5 * h), y0 + 0.5 * h * k1);
    const Matrix k3 = apply_generator(gen_at(t - 0.5 * h), y0 + 0.5 * h * k2);
    const Matrix k4 = apply_generator(gen_at(t - h), y0 + h * k3);
    return Matrix(y0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  };

  double t = from;
  double max_exit = 0.0;
  for (double e : gen_at(from).exit) max_exit = std::max(max_exit, e);
  double h = std::min(from - to, max_exit > 0.0 ? 0.5 / max_exit : from - to);
  int steps = 0;
  while (t > to) {
    if (++steps > opts.max_steps) throw IntegrationError("propagate_reverse: step budget exhausted");
    const bool last = h >= t - to;
    if (last) h = t - to;
    const Matrix full = rk4(y, t, h);
    const Matrix half = rk4(y, t, 0.5 * h);
    const Matrix two = rk4(half, t - 0.5 * h, 0.5 * h);
    const double err = (two - full).cwiseAbs().maxCoeff();
    if (!std::isfinite(err)) throw IntegrationError("propagate_reverse: non-finite state");
    if (err <= opts.tolerance) {
      y = two + (two - full) / 15.0;
      t = last ? to : t - h;
    }
    const double factor = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(opts.tolerance / err, 0.2), 0.2, 4.0);
    h *= factor;
    if (!(h > 0.0) || h < 1e-300) throw IntegrationError("propagate_reverse: step size underflow");
  }
  return y;
}

Matrix reverse_transition_matrix(const ReverseOracle& oracle, double from, double to, const IntegratorOptions& opts) {
  const auto n = oracle.space().total_states();
  return propagate_reverse(oracle, Matrix::Identity(n, n), from, to, opts);
}

namespace {

std::vector<double> cleaned(std::vector<double> p) {
  double sum = 0.0;
  for (double& v : p) {
    v = std::max(0.0, v);
    sum += v;
  }
  if (!(sum > 0.0)) throw IntegrationError("propagated law lost all its mass");
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> row_vector(const Matrix& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

// Adds weight * prod_d rows[d][y_d] to out[y] for every y.
void scatter_product(const std::vector<std::vector<double>>& rows, const StateSpace& sp, double weight,
                     std::vector<double>& out) {
  const int dims = sp.num_dims();
  std::vector<std::vector<std::pair<int, double>>> support(static_cast<std::size_t>(dims));
  for (int d = 0; d < dims; ++d) {
    for (int v = 0; v < sp.vocab_size(); ++v) {
      const double p = rows[static_cast<std::size_t>(d)][static_cast<std::size_t>(v)];
      if (p > 0.0) support[static_cast<std::size_t>(d)].emplace_back(v, p);
    }
    if (support[static_cast<std::size_t>(d)].empty()) return;
  }
  std::vector<std::int64_t> stride(static_cast<std::size_t>(dims), 1);
  for (int d = 1; d < dims; ++d) stride[static_cast<std::size_t>(d)] = stride[static_cast<std::size_t>(d) - 1] * sp.vocab_size();
  std::vector<std::size_t> pos(static_cast<std::size_t>(dims), 0);
  for (;;) {
    double p = weight;
    std::int64_t idx = 0;
    for (int d = 0; d < dims; ++d) {
      const auto& [v, w] = support[static_cast<std::size_t>(d)][pos[static_cast<std::size_t>(d)]];
      p *= w;
      idx += v * stride[static_cast<std::size_t>(d)];
    }
    out[static_cast<std::size_t>(idx)] += p;
    int d = 0;
    while (d < dims && ++pos[static_cast<std::size_t>(d)] == support[static_cast<std::size_t>(d)].size()) {
      pos[static_cast<std::size_t>(d)] = 0;
      ++d;
    }
    if (d == dims) break;
  }
}

// Per-dimension marginals of a flat joint row.
std::vector<std::vector<double>> dim_marginals(const std::vector<double>& joint, const StateSpace& sp) {
  std::vector<std::vector<double>> m(static_cast<std::size_t>(sp.num_dims()),
                                     std::vector<double>(static_cast<std::size_t>(sp.vocab_size()), 0.0));
  State x(static_cast<std::size_t>(sp.num_dims()));
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] == 0.0) continue;
    sp.decode_into(static_cast<std::int64_t>(i), x);
    for (int d = 0; d < sp.num_dims(); ++d) m[static_cast<std::size_t>(d)][static_cast<std::size_t>(x[d])] += joint[i];
  }
  return m;
}

CdeReport cde_from_matrix(const Matrix& phi, const Pmf& start, double s, double t) {
  const StateSpace& sp = start.space();
  CdeReport r;
  r.s = s;
  r.t = t;
  r.start_probs.assign(start.probs().begin(), start.probs().end());
  const auto n = static_cast<std::size_t>(sp.total_states());
  r.conditional_cde.assign(n, 0.0);
  r.conditional_mi.assign(n, 0.0);
  std::vector<double> weighted(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    if (sp.num_dims() < 2) continue;
    const Pmf joint(sp, cleaned(row_vector(phi, static_cast<Eigen::Index>(x))));
    const Pmf prod = product_of_marginals(joint);
    const double c = kl_divergence(joint, prod);
    const double mi = mutual_information(joint);
    r.conditional_cde[x] = c;
    r.conditional_mi[x] = mi;
    r.max_identity_gap = std::max(r.max_identity_gap, std::abs(c - mi));
    weighted[x] = r.start_probs[x] * c;
  }
  double total = 0.0;
  for (double w : weighted) total += w;
  r.marginal_cde = total;
  return r;
}

}  // namespace

std::vector<Pmf> exact_reverse_marginals(const ReverseOracle& oracle, std::span<const double> grid,
                                         const IntegratorOptions& opts) {
  if (grid.empty()) throw DomainError("exact_reverse_marginals: empty grid");
  std::vector<Pmf> out;
  const Pmf first = oracle.marginal(grid[0]);
  out.push_back(first);
  Matrix row(1, static_cast<Eigen::Index>(first.size()));
  for (std::size_t i = 0; i < first.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = first.probs()[i];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] < grid[i - 1])) throw DomainError("exact_reverse_marginals: grid must decrease");
    row = propagate_reverse(oracle, row, grid[i - 1], grid[i], opts);
    out.emplace_back(first.space(), cleaned(row_vector(row, 0)));
  }
  return out;
}

Pmf schedule_distribution(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                          const Pmf& start, const IntegratorOptions& opts) {
  if (timesteps.size() < 2) throw DomainError("schedule_distribution: need at least two timesteps");
  const StateSpace sp = oracle.space();
  if (!(start.space() == sp)) throw DomainError("schedule_distribution: start law lives on another space");
  const auto n = static_cast<std::size_t>(sp.total_states());
  const int dims = sp.num_dims();
  std::vector<double> q(start.probs().begin(), start.probs().end());
  State x(static_cast<std::size_t>(dims));
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(dims));
  for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
    const double hi = timesteps[i];
    const double lo = timesteps[i + 1];
    if (!(lo < hi)) throw DomainError("schedule_distribution: timesteps must decrease strictly");
    Matrix phi;
    if (step == BruteStep::ExactMarginal) phi = reverse_transition_matrix(oracle, hi, lo, opts);
    std::vector<double> next(n, 0.0);
    for (std::size_t idx = 0; idx < n; ++idx) {
      if (!(q[idx] > 0.0)) continue;
      sp.decode_into(static_cast<std::int64_t>(idx), x);
      if (step == BruteStep::ExactMarginal) {
        rows = dim_marginals(cleaned(row_vector(phi, static_cast<Eigen::Index>(idx))), sp);
      } else {
        if (!(oracle.prob(x, hi) > 0.0)) {
          next[idx] += q[idx];  // no reverse rates out of a zero-probability state
          continue;
        }
        const auto rates = oracle.reverse_rates(x, hi);
        const StepKernel k = step == BruteStep::Euler ? StepKernel::Euler : StepKernel::ExactHold;
        for (int d = 0; d < dims; ++d) rows[static_cast<std::size_t>(d)] = step_row(rates, d, x[d], hi - lo, k);
      }
      scatter_product(rows, sp, q[idx], next);
    }
    q = std::move(next);
  }
  return Pmf(sp, cleaned(std::move(q)));
}

Pmf schedule_distribution(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                          const IntegratorOptions& opts) {
  return schedule_distribution(oracle, timesteps, step, oracle.marginal(timesteps.front()), opts);
}

CdeReport cde(const ReverseOracle& oracle, double s, double t, const IntegratorOptions& opts) {
  if (!(s > t)) throw IntervalError("cde: requires s > t");
  return cde_from_matrix(reverse_transition_matrix(oracle, s, t, opts), oracle.marginal(s), s, t);
}

CdeBoundReport verify_cde_bound(const ReverseOracle& oracle, std::span<const double> timesteps, BruteStep step,
                               double slack, const IntegratorOptions& opts) {
  CdeBoundReport r;
  for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
    r.segment_cde.push_back(cde(oracle, timesteps[i], timesteps[i + 1], opts).marginal_cde);
    r.rhs += r.segment_cde.back();
  }
  const Pmf q = schedule_distribution(oracle, timesteps, step, opts);
  r.lhs = kl_divergence(oracle.marginal(timesteps.back()), q);
  r.holds = r.lhs <= r.rhs + slack;
  return r;
}

PathKlBoundReport verify_path_kl_bound(const ReverseOracle& oracle, std::span<const double> segment, int num_paths,
                               std::uint64_t seed, const IntegratorOptions& opts) {
  if (segment.size() < 2) throw DomainError("verify_path_kl_bound: segment needs at least two timesteps");
  if (num_paths < 2) throw DomainError("verify_path_kl_bound: need at least two paths");
  const double s = segment.front();
  const double t = segment.back();
  const Pmf qs = oracle.marginal(s);
  PathKlBoundReport r;
  r.endpoint_kl = kl_divergence(oracle.marginal(t), schedule_distribution(oracle, segment, BruteStep::ExactHold, qs, opts));

  std::vector<Path> paths;
  paths.reserve(static_cast<std::size_t>(num_paths));
  for (int i = 0; i < num_paths; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int idx = Rng::categorical(qs.probs(), rng.uniform());
    paths.push_back(gillespie_exact(oracle, qs.space().decode(idx), s, t, rng));
  }
  const ExactProcess exact(oracle);
  const FrozenProcess frozen(oracle, std::vector<double>(segment.begin(), segment.end()));
  r.path_kl = path_kl_functional(paths, exact, frozen, PathKlForm::Girsanov);
  r.event_only = path_kl_functional(paths, exact, frozen, PathKlForm::EventOnly);
  r.holds = r.endpoint_kl <= r.path_kl.value + 3.0 * r.path_kl.standard_error;
  return r;
}

nlohmann::json to_json(const CdeReport& r) {
  return {{"s", r.s},
          {"t", r.t},
          {"marginal_cde", r.marginal_cde},
          {"max_identity_gap", r.max_identity_gap},
          {"conditional_cde", r.conditional_cde},
          {"conditional_mi", r.conditional_mi}};
}

nlohmann::json to_json(const CdeBoundReport& r) {
  return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"segment_cde", r.segment_cde}, {"holds", r.holds}};
}

nlohmann::json to_json(const PathKlBoundReport& r) {
  return {{"endpoint_kl", r.endpoint_kl},
          {"path_kl", to_json(r.path_kl)},
          {"event_only", to_json(r.event_only)},
          {"holds", r.holds}};
}

}  // namespace jys
