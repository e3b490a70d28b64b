#include "ipslab/evolve.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipslab/entropy.hpp"

namespace ipslab {

namespace {

DenseMeasure like(const DenseMeasure& m, std::vector<double> w) {
  if (m.torus()) return DenseMeasure::normalized_on_torus(*m.torus(), m.q(), std::move(w));
  return DenseMeasure::normalized(m.window(), m.q(), std::move(w));
}

void check_shapes(const DenseMeasure& m, const GeneratorMatrix& g) {
  if (m.size() != g.space.size()) throw std::invalid_argument("measure and generator sizes differ");
}

double max_exit_rate(const SparseQ& Q) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) r = std::max(r, -Q.coeff(i, i));
  return r;
}

}  // namespace

DenseMeasure evolve(const DenseMeasure& nu0, const GeneratorMatrix& g, double t, double tol) {
  check_shapes(nu0, g);
  if (t < 0.0) throw std::invalid_argument("evolve: negative time");
  const double lam = max_exit_rate(g.q);
  if (t == 0.0 || lam == 0.0) return nu0;
  // keep each Poisson mean moderate so e^{-mean} does not underflow
  const int steps = std::max(1, static_cast<int>(std::ceil(lam * t / 20.0)));
  const double mean = lam * t / steps;
  const double step_tol = tol / steps;
  const SparseQ Qt = g.q.transpose();
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(nu0.weights().data(), nu0.size());
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd v = p, acc = Eigen::VectorXd::Zero(p.size());
    double w = std::exp(-mean), mass = 0.0;
    for (int k = 0;; ++k) {
      acc += w * v;
      mass += w;
      if (1.0 - mass <= step_tol || k > 10000) break;
      v = v + (Qt * v) / lam;
      w *= mean / (k + 1);
      // tail below tolerance once the weights decay past the mean
      if (k > mean && w < step_tol * 1e-3) break;
    }
    p = acc.cwiseMax(0.0);
    p /= p.sum();
  }
  return like(nu0, std::vector<double>(p.data(), p.data() + p.size()));
}

DenseMeasure evolve_backward(const DenseMeasure& nu0, const GeneratorMatrix& g, double t) {
  check_shapes(nu0, g);
  const double lam = max_exit_rate(g.q);
  if (lam * t > 0.5) throw std::invalid_argument("evolve_backward: step too large for the series");
  const SparseQ Qt = g.q.transpose();
  Eigen::VectorXd term = Eigen::Map<const Eigen::VectorXd>(nu0.weights().data(), nu0.size());
  Eigen::VectorXd acc = term;
  for (int k = 1; k < 200; ++k) {
    term = (Qt * term) * (-t / k);
    acc += term;
    if (term.lpNorm<1>() < 1e-18) break;
  }
  if (acc.minCoeff() < 0.0) throw std::domain_error("evolve_backward: weights turned negative");
  return like(nu0, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

namespace {

// strongly connected components (iterative Tarjan) of the positive-rate graph
std::vector<int> components(const SparseQ& Q, int& count) {
  const Eigen::Index n = Q.rows();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on(n, 0);
  std::vector<Eigen::Index> stack;
  int next = 0;
  count = 0;
  struct Frame {
    Eigen::Index v;
    SparseQ::InnerIterator it;
  };
  for (Eigen::Index root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call;
    auto open = [&](Eigen::Index v) {
      index[v] = low[v] = next++;
      stack.push_back(v);
      on[v] = 1;
      call.push_back({v, SparseQ::InnerIterator(Q, v)});
    };
    open(root);
    while (!call.empty()) {
      Frame& f = call.back();
      bool descended = false;
      for (; f.it; ++f.it) {
        Eigen::Index w = f.it.col();
        if (w == f.v || f.it.value() <= 0.0) continue;
        if (index[w] < 0) {
          ++f.it;
          open(w);
          descended = true;
          break;
        }
        if (on[w]) low[f.v] = std::min(low[f.v], index[w]);
      }
      if (descended) continue;
      Eigen::Index v = f.v;
      if (low[v] == index[v]) {
        Eigen::Index w;
        do {
          w = stack.back();
          stack.pop_back();
          on[w] = 0;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  return comp;
}

}  // namespace

std::vector<DenseMeasure> stationary(const GeneratorMatrix& g) {
  const SparseQ& Q = g.q;
  const Eigen::Index n = Q.rows();
  int count = 0;
  auto comp = components(Q, count);
  std::vector<char> closed(count, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (SparseQ::InnerIterator it(Q, i); it; ++it)
      if (it.col() != i && it.value() > 0.0 && comp[it.col()] != comp[i]) closed[comp[i]] = 0;
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(Q.coeff(i, i)));

  std::vector<DenseMeasure> out;
  for (int c = 0; c < count; ++c) {
    if (!closed[c]) continue;
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (comp[i] == c) members.push_back(i);
    const Eigen::Index m = static_cast<Eigen::Index>(members.size());
    std::vector<double> w(n, 0.0);
    if (m == 1) {
      w[members[0]] = 1.0;
    } else {
      std::vector<Eigen::Index> local(n, -1);
      for (Eigen::Index k = 0; k < m; ++k) local[members[k]] = k;
      // pi Q_CC = 0 with the last equation replaced by sum(pi) = 1
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index k = 0; k < m; ++k)
        for (SparseQ::InnerIterator it(Q, members[k]); it; ++it) {
          Eigen::Index j = local[it.col()];
          if (j < 0 || j == m - 1) continue;
          trip.emplace_back(j, k, it.value());
        }
      for (Eigen::Index k = 0; k < m; ++k) trip.emplace_back(m - 1, k, 1.0);
      Eigen::SparseMatrix<double> A(m, m);
      A.setFromTriplets(trip.begin(), trip.end());
      A.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(A);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
      rhs(m - 1) = 1.0;
      Eigen::VectorXd pi;
      if (lu.info() == Eigen::Success) pi = lu.solve(rhs);
      bool ok = lu.info() == Eigen::Success && pi.allFinite();
      if (m <= 512) {
        Eigen::MatrixXd dense(m, m);
        dense.setZero();
        for (Eigen::Index k = 0; k < m; ++k)
          for (SparseQ::InnerIterator it(Q, members[k]); it; ++it)
            if (local[it.col()] >= 0) dense(k, local[it.col()]) = it.value();
        Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(dense).singularValues();
        // exactly one singular value at zero for a single closed class
        if (sv(m - 2) <= 1e-10 * scale || !ok)
          throw StationaryError("stationary: null space of the generator is not one-dimensional",
                                std::vector<double>(sv.data(), sv.data() + sv.size()));
      } else if (!ok) {
        throw StationaryError("stationary: sparse solve failed", {});
      }
      for (Eigen::Index k = 0; k < m; ++k) w[members[k]] = std::max(0.0, pi(k));
    }
    if (g.torus)
      out.push_back(DenseMeasure::normalized_on_torus(*g.torus, g.space.q(), std::move(w)));
    else
      out.push_back(DenseMeasure::normalized(g.window, g.space.q(), std::move(w)));
  }
  return out;
}

DenseMeasure stationary_measure(const GeneratorMatrix& g) {
  auto all = stationary(g);
  if (all.size() != 1)
    throw StationaryError("stationary: " + std::to_string(all.size()) + " closed classes", {});
  return all.front();
}

double spectral_gap(const GeneratorMatrix& g) {
  const Eigen::Index n = g.q.rows();
  if (n > 2048) throw std::length_error("spectral_gap: state space too large for a dense solve");
  Eigen::MatrixXd dense = Eigen::MatrixXd(g.q);
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
  double scale = dense.cwiseAbs().maxCoeff();
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    auto lam = es.eigenvalues()(k);
    if (std::abs(lam) <= 1e-9 * std::max(1.0, scale)) continue;
    gap = std::min(gap, std::abs(lam.real()));
  }
  return gap;
}

OracleValue entropy_derivative_oracle(const DenseMeasure& nu, const DenseMeasure& mu,
                                      const GeneratorMatrix& g, const Window& lambda, double dt) {
  auto central = [&](double h) {
    double up = local_relative_entropy(evolve(nu, g, h, 1e-16), mu, lambda);
    double down = local_relative_entropy(evolve_backward(nu, g, h), mu, lambda);
    return (up - down) / (2.0 * h);
  };
  double coarse = central(dt), fine = central(dt / 2.0);
  OracleValue o;
  o.value = (4.0 * fine - coarse) / 3.0;
  o.error = std::abs(o.value - fine);
  return o;
}

std::vector<double> linear_grid(double t_end, int points) {
  if (points < 2) throw std::invalid_argument("time grid needs at least two points");
  std::vector<double> g(points);
  for (int k = 0; k < points; ++k) g[k] = t_end * k / (points - 1);
  return g;
}

Trajectory run_trajectory(const DenseMeasure& nu0, const RateFamily& rates, const DenseMeasure& mu,
                          const std::vector<double>& grid, const std::vector<Window>& windows,
                          double tol) {
  const Torus& torus = nu0.require_torus();
  GeneratorMatrix g = generator_matrix(rates, torus);
  Window all = torus.all_sites();
  Trajectory tr;
  tr.windows = windows;
  DenseMeasure cur = nu0;
  double prev_t = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (k && grid[k] < grid[k - 1]) throw std::invalid_argument("time grid must be non-decreasing");
    cur = evolve(cur, g, grid[k] - prev_t);
    prev_t = grid[k];
    TrajectoryRow row;
    row.t = grid[k];
    row.h = local_relative_entropy(cur, mu, all);
    for (const auto& w : windows) row.h_window.push_back(local_relative_entropy(cur, mu, w));
    row.g = entropy_loss_finite(cur, mu, rates, all).per_site();
    if (!tr.rows.empty() && row.h > tr.rows.back().h + tol) {
      row.violation = true;
      tr.monotone = false;
    }
    tr.rows.push_back(std::move(row));
  }
  tr.final_measure = cur;
  return tr;
}

}  // namespace ipslab
