#ifndef HWSAFE__PLANNER__QP_HPP_
#define HWSAFE__PLANNER__QP_HPP_

/**
 * @file
 * @brief Convex QP solver based on operator splitting (ADMM).
 *
 * Solves
 *
 *   min  1/2 x' P x + q' x
 *   s.t. l <= A x <= u
 *
 * with P symmetric positive semidefinite. Equality rows have l == u. The iteration follows the
 * standard splitting with relaxation, Ruiz equilibration, adaptive step size and an active-set
 * polishing step that recovers high-accuracy solutions.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string_view>

namespace hwsafe {

inline constexpr double kQpInf = std::numeric_limits<double>::infinity();

struct QpProblem
{
  /// symmetric, full storage
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  /// constant added to the reported objective
  double constant{0.0};

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }

  double objective(const Eigen::VectorXd & x) const { return 0.5 * x.dot(P * x) + q.dot(x) + constant; }
};

enum class QpStatus { Optimal, MaxIter, Infeasible, Unbounded };

constexpr std::string_view to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

struct QpSettings
{
  /// absolute tolerance on primal and dual residuals
  double tol{1e-6};
  int max_iter{4000};

  double rho{0.1};
  double sigma{1e-6};
  /// relaxation parameter
  double alpha{1.6};

  bool scaling{true};
  int scaling_iter{10};

  bool adaptive_rho{true};
  int adaptive_rho_interval{25};
  double adaptive_rho_tolerance{5.0};

  int check_interval{5};

  double eps_prim_inf{1e-7};
  double eps_dual_inf{1e-7};

  bool polish{true};
  /// polishing is attempted once scaled residuals fall below this
  double polish_trigger{1e-2};
  double polish_delta{1e-9};
  int polish_refine_iter{5};
  /// active-set repair rounds per polish attempt
  int polish_max_rounds{8};
};

struct QpSolution
{
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  QpStatus status{QpStatus::MaxIter};
  int iterations{0};
  double objective{kQpInf};
  double prim_res{kQpInf};
  double dual_res{kQpInf};
  bool polished{false};
  /// primal infeasibility certificate (dual ray) when status is Infeasible
  Eigen::VectorXd certificate;
  double solve_time{0.0};
};

/// Residuals of the KKT conditions at (x, y), unscaled, infinity norms.
struct KktResidual
{
  double primal;
  double dual;
  double complementarity;

  double max() const { return std::max({primal, dual, complementarity}); }
};

inline KktResidual kkt_residual(const QpProblem & pbm, const Eigen::VectorXd & x, const Eigen::VectorXd & y)
{
  const Eigen::VectorXd Ax = pbm.A * x;
  KktResidual r{0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < Ax.size(); ++i) {
    r.primal         = std::max({r.primal, pbm.l(i) - Ax(i), Ax(i) - pbm.u(i)});
    const double upp = std::min(std::max(y(i), 0.0), pbm.u(i) - Ax(i));
    const double low = std::min(std::max(-y(i), 0.0), Ax(i) - pbm.l(i));
    r.complementarity = std::max({r.complementarity, std::abs(upp), std::abs(low)});
  }
  r.dual = (pbm.P * x + pbm.q + pbm.A.transpose() * y).lpNorm<Eigen::Infinity>();
  return r;
}

namespace detail {

inline double inf_norm(const Eigen::VectorXd & v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

/// Ruiz equilibration of the KKT matrix [P A'; A 0].
struct QpScaling
{
  Eigen::VectorXd D;
  Eigen::VectorXd E;
  double c{1.0};
};

inline QpScaling ruiz_scale(QpProblem & s, int iters)
{
  const Eigen::Index n = s.num_vars(), m = s.num_constraints();
  QpScaling sc{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(m), 1.0};
  auto clip = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };

  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < s.P.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator itp(s.P, k); itp; ++itp) {
        col_norm(itp.col()) = std::max(col_norm(itp.col()), std::abs(itp.value()));
      }
    }
    for (int k = 0; k < s.A.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator ita(s.A, k); ita; ++ita) {
        const double a      = std::abs(ita.value());
        col_norm(ita.col()) = std::max(col_norm(ita.col()), a);
        row_norm(ita.row()) = std::max(row_norm(ita.row()), a);
      }
    }
    Eigen::VectorXd d(n), e(m);
    for (Eigen::Index j = 0; j < n; ++j) { d(j) = 1.0 / std::sqrt(clip(col_norm(j))); }
    for (Eigen::Index i = 0; i < m; ++i) { e(i) = 1.0 / std::sqrt(clip(row_norm(i))); }

    s.P = d.asDiagonal() * s.P * d.asDiagonal();
    s.q = d.cwiseProduct(s.q);
    s.A = e.asDiagonal() * s.A * d.asDiagonal();
    sc.D = sc.D.cwiseProduct(d);
    sc.E = sc.E.cwiseProduct(e);

    // cost scaling
    Eigen::VectorXd pcol = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < s.P.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator itp(s.P, k); itp; ++itp) {
        pcol(itp.col()) = std::max(pcol(itp.col()), std::abs(itp.value()));
      }
    }
    const double mean_p = n ? pcol.mean() : 0.0;
    const double gamma  = 1.0 / clip(std::max(mean_p, inf_norm(s.q)));
    s.P *= gamma;
    s.q *= gamma;
    sc.c *= gamma;
  }
  s.l = sc.E.cwiseProduct(s.l);
  s.u = sc.E.cwiseProduct(s.u);
  return sc;
}

}  // namespace detail

/**
 * @brief Solve a convex QP.
 *
 * Returns status Optimal once unscaled primal and dual residuals are below settings.tol,
 * Infeasible or Unbounded when the corresponding certificate test passes, and MaxIter
 * with the last iterate otherwise.
 */
inline QpSolution solve_qp(const QpProblem & problem, const QpSettings & prm = {})
{
  using Vec = Eigen::VectorXd;
  using Sp  = Eigen::SparseMatrix<double>;

  const auto t0        = std::chrono::steady_clock::now();
  const Eigen::Index n = problem.num_vars(), m = problem.num_constraints();

  QpSolution sol;
  sol.x = Vec::Zero(n);
  sol.y = Vec::Zero(m);

  auto finish = [&](QpSolution & s) -> QpSolution {
    if (s.status == QpStatus::Optimal || s.status == QpStatus::MaxIter) { s.objective = problem.objective(s.x); }
    s.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  };

  for (Eigen::Index i = 0; i < m; ++i) {
    if (problem.l(i) > problem.u(i) || problem.l(i) == kQpInf || problem.u(i) == -kQpInf) {
      sol.status      = QpStatus::Infeasible;
      sol.certificate = Vec::Zero(m);
      return finish(sol);
    }
  }

  // scaled working copy
  QpProblem s = problem;
  s.P.makeCompressed();
  s.A.makeCompressed();
  detail::QpScaling sc{Vec::Ones(n), Vec::Ones(m), 1.0};
  if (prm.scaling && prm.scaling_iter > 0) { sc = detail::ruiz_scale(s, prm.scaling_iter); }
  const Sp At = s.A.transpose();

  // unscaled evaluation of an iterate in scaled variables
  auto unscale_x = [&](const Vec & xs) -> Vec { return sc.D.cwiseProduct(xs); };
  auto unscale_y = [&](const Vec & ys) -> Vec { return sc.E.cwiseProduct(ys) / sc.c; };

  auto residuals = [&](const Vec & xu, const Vec & yu, double & rp, double & rd) {
    const Vec Ax = problem.A * xu;
    rp           = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) { rp = std::max({rp, problem.l(i) - Ax(i), Ax(i) - problem.u(i)}); }
    rd = detail::inf_norm(problem.P * xu + problem.q + problem.A.transpose() * yu);
  };

  // step sizes per constraint: loose for free rows, stiff for equalities
  Vec rho_vec(m);
  double rho = prm.rho;
  auto set_rho = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.l(i) == -kQpInf && s.u(i) == kQpInf) {
        rho_vec(i) = 1e-6;
      } else if (std::abs(s.u(i) - s.l(i)) < 1e-4) {
        rho_vec(i) = 1e3 * rho;
      } else {
        rho_vec(i) = rho;
      }
    }
  };
  set_rho();

  Eigen::SimplicialLDLT<Sp> kkt;
  auto factor = [&]() -> bool {
    Sp K = s.P + Sp(At * rho_vec.asDiagonal() * s.A);
    for (Eigen::Index j = 0; j < n; ++j) { K.coeffRef(j, j) += prm.sigma; }
    K.makeCompressed();
    kkt.compute(K);
    return kkt.info() == Eigen::Success;
  };
  if (!factor()) {
    sol.status = QpStatus::MaxIter;
    return finish(sol);
  }

  // polishing: solve the equality-constrained problem on a guessed active set, then repair the
  // guess a few times by releasing rows with wrong-signed multipliers and adding violated rows
  auto polish = [&](const Vec & zs, const Vec & ys, Vec & xu_out, Vec & yu_out) -> bool {
    // side: -1 lower bound active, +1 upper bound active, 0 inactive
    std::vector<int> side(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.l(i) > -kQpInf && zs(i) - s.l(i) < -ys(i)) {
        side[i] = -1;
      } else if (s.u(i) < kQpInf && s.u(i) - zs(i) < ys(i)) {
        side[i] = 1;
      }
    }
    const Eigen::MatrixXd Pd = Eigen::MatrixXd(s.P);
    for (int round = 0; round < prm.polish_max_rounds; ++round) {
      std::vector<Eigen::Index> act;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (side[i] != 0) { act.push_back(i); }
      }
      const Eigen::Index na = static_cast<Eigen::Index>(act.size());
      Eigen::MatrixXd H     = Eigen::MatrixXd::Zero(n + na, n + na);
      H.topLeftCorner(n, n) = Pd;
      Vec rhs(n + na);
      rhs.head(n) = -s.q;
      for (Eigen::Index k = 0; k < na; ++k) {
        const Eigen::Index i = act[k];
        for (Sp::InnerIterator it(At, i); it; ++it) {
          H(it.row(), n + k) = it.value();
          H(n + k, it.row()) = it.value();
        }
        rhs(n + k) = side[i] < 0 ? s.l(i) : s.u(i);
      }
      Eigen::MatrixXd Hp = H;
      Hp.topLeftCorner(n, n).diagonal().array() += prm.polish_delta;
      Hp.bottomRightCorner(na, na).diagonal().array() -= prm.polish_delta;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hp);
      if (ldlt.info() != Eigen::Success) { return false; }
      Vec t = ldlt.solve(rhs);
      for (int r = 0; r < prm.polish_refine_iter; ++r) { t += ldlt.solve(rhs - H * t); }
      if (!t.allFinite()) { return false; }

      Vec yp = Vec::Zero(m);
      for (Eigen::Index k = 0; k < na; ++k) { yp(act[k]) = t(n + k); }
      const Vec Axp = s.A * t.head(n);
      bool changed  = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double tol_i = prm.tol * sc.E(i);
        if (side[i] != 0 && s.l(i) != s.u(i) && yp(i) * side[i] < 0.0) {
          side[i] = 0;
          changed = true;
        } else if (side[i] == 0 && Axp(i) < s.l(i) - tol_i) {
          side[i] = -1;
          changed = true;
        } else if (side[i] == 0 && Axp(i) > s.u(i) + tol_i) {
          side[i] = 1;
          changed = true;
        }
      }
      xu_out = unscale_x(t.head(n));
      yu_out = unscale_y(yp);
      if (!changed) { return true; }
    }
    return true;
  };

  Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
  Vec x_prev = x, y_prev = y;
  double last_polish_res = kQpInf;

  for (int iter = 1; iter <= prm.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;

    const Vec rhs     = prm.sigma * x - s.q + At * (rho_vec.cwiseProduct(z) - y);
    const Vec x_tilde = kkt.solve(rhs);
    const Vec z_tilde = s.A * x_tilde;
    x                 = prm.alpha * x_tilde + (1.0 - prm.alpha) * x_prev;
    const Vec z_relax = prm.alpha * z_tilde + (1.0 - prm.alpha) * z;
    const Vec z_new   = (z_relax + y.cwiseQuotient(rho_vec)).cwiseMax(s.l).cwiseMin(s.u);
    y += rho_vec.cwiseProduct(z_relax - z_new);
    z = z_new;

    sol.iterations = iter;
    if (iter % prm.check_interval != 0 && iter != prm.max_iter) { continue; }

    const Vec xu = unscale_x(x), yu = unscale_y(y);
    double rp, rd;
    residuals(xu, yu, rp, rd);
    sol.x        = xu;
    sol.y        = yu;
    sol.prim_res = rp;
    sol.dual_res = rd;
    if (rp < prm.tol && rd < prm.tol) {
      sol.status = QpStatus::Optimal;
      return finish(sol);
    }

    // scaled residuals drive polishing and step-size adaptation
    const Vec Px = s.P * x, Aty = At * y, Ax = s.A * x;
    const double rp_s = detail::inf_norm(Ax - z), rd_s = detail::inf_norm(Px + s.q + Aty);

    if (prm.polish && std::max(rp_s, rd_s) < prm.polish_trigger && std::max(rp_s, rd_s) < 0.5 * last_polish_res) {
      last_polish_res = std::max(rp_s, rd_s);
      Vec xp, yp;
      if (polish(z, y, xp, yp)) {
        double prp, prd;
        residuals(xp, yp, prp, prd);
        if (prp < prm.tol && prd < prm.tol && yp.allFinite()) {
          // multiplier signs must match the active side
          bool sign_ok  = true;
          const Vec Axp = problem.A * xp;
          for (Eigen::Index i = 0; i < m && sign_ok; ++i) {
            if (yp(i) > prm.tol && problem.u(i) - Axp(i) > prm.tol) { sign_ok = false; }
            if (yp(i) < -prm.tol && Axp(i) - problem.l(i) > prm.tol) { sign_ok = false; }
          }
          if (sign_ok) {
            sol.x        = xp;
            sol.y        = yp;
            sol.prim_res = prp;
            sol.dual_res = prd;
            sol.polished = true;
            sol.status   = QpStatus::Optimal;
            return finish(sol);
          }
        }
      }
    }

    // primal infeasibility: dual ray dy with A' dy = 0 and support function negative
    const Vec dy_s = y - y_prev;
    const double dy_norm = detail::inf_norm(sc.E.cwiseProduct(dy_s));
    if (dy_norm > 1e-12) {
      const Vec dy    = sc.E.cwiseProduct(dy_s);
      const Vec Atdy  = problem.A.transpose() * dy;
      double support  = 0.0;
      bool finite_ok  = true;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (dy(i) > prm.eps_prim_inf * dy_norm) {
          if (problem.u(i) == kQpInf) { finite_ok = false; break; }
          support += problem.u(i) * dy(i);
        } else if (dy(i) < -prm.eps_prim_inf * dy_norm) {
          if (problem.l(i) == -kQpInf) { finite_ok = false; break; }
          support += problem.l(i) * dy(i);
        }
      }
      if (finite_ok && detail::inf_norm(Atdy) < prm.eps_prim_inf * dy_norm && support < -prm.eps_prim_inf * dy_norm) {
        sol.status      = QpStatus::Infeasible;
        sol.certificate = (dy / dy_norm).unaryExpr([&](double v) { return std::abs(v) > prm.eps_prim_inf ? v : 0.0; });
        return finish(sol);
      }
    }

    // dual infeasibility: primal ray dx with P dx = 0, q' dx < 0, A dx in the recession cone
    const Vec dx_s = x - x_prev;
    const double dx_norm = detail::inf_norm(sc.D.cwiseProduct(dx_s));
    if (dx_norm > 1e-12) {
      const Vec dx   = sc.D.cwiseProduct(dx_s);
      const Vec Adx  = problem.A * dx;
      const double e = prm.eps_dual_inf * dx_norm;
      bool ray       = detail::inf_norm(problem.P * dx) < e && problem.q.dot(dx) < -e;
      for (Eigen::Index i = 0; i < m && ray; ++i) {
        const bool lo_fin = problem.l(i) > -kQpInf, up_fin = problem.u(i) < kQpInf;
        if (up_fin && Adx(i) > e) { ray = false; }
        if (lo_fin && Adx(i) < -e) { ray = false; }
      }
      if (ray) {
        sol.status = QpStatus::Unbounded;
        return finish(sol);
      }
    }

    if (prm.adaptive_rho && iter % prm.adaptive_rho_interval == 0) {
      const double prim_scale = std::max({detail::inf_norm(Ax), detail::inf_norm(z), 1e-12});
      const double dual_scale = std::max({detail::inf_norm(Px), detail::inf_norm(Aty), detail::inf_norm(s.q), 1e-12});
      const double ratio      = (rp_s / prim_scale) / std::max(rd_s / dual_scale, 1e-30);
      const double rho_new    = std::clamp(rho * std::sqrt(ratio), 1e-6, 1e6);
      if (rho_new > prm.adaptive_rho_tolerance * rho || rho_new < rho / prm.adaptive_rho_tolerance) {
        rho = rho_new;
        set_rho();
        if (!factor()) { break; }
      }
    }
  }

  sol.status = QpStatus::MaxIter;
  return finish(sol);
}

}  // namespace hwsafe

#endif  // HWSAFE__PLANNER__QP_HPP_
