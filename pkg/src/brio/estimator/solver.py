"""Iteratively reweighted Levenberg-Marquardt on the window problem."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from brio.estimator.graph import EstimatorError, Problem, Values

# Relative size below which a diagonal entry of H counts as unconstrained.
ZERO_DIAGONAL = 1e-14


@dataclass
class SolveReport:
    iterations: int = 0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    costs: list[float] = field(default_factory=list)
    rejected_steps: int = 0
    converged: bool = False
    final_lambda: float = 0.0


def _check_constrained(problem: Problem, H) -> None:
    d = H.diagonal()
    scale = max(float(np.max(np.abs(d))), 1.0)
    bad = np.flatnonzero(~(d > ZERO_DIAGONAL * scale))
    if len(bad):
        names = ", ".join(problem.describe(int(i)) for i in bad[:6])
        more = f" and {len(bad) - 6} more" if len(bad) > 6 else ""
        raise EstimatorError(f"unconstrained variables: {names}{more}")


def _damped_solve(H, g, lam):
    A = H + lam * sp.identity(H.shape[0], format="csc")
    with warnings.catch_warnings():
        warnings.simplefilter("error", category=spla.MatrixRankWarning)
        try:
            step = spla.splu(A.tocsc()).solve(-g)
        except (RuntimeError, spla.MatrixRankWarning):
            return None
    if not np.all(np.isfinite(step)):
        return None
    return step


def solve_problem(problem: Problem, values: Values | None = None) -> tuple[Values, SolveReport]:
    """Minimize the robust window cost starting from ``values``.

    Each outer iteration freezes robust weights at the current residuals,
    forms the damped normal equations and accepts the step only if the true
    robust cost decreases.  Accepted costs are therefore non-increasing.
    """
    cfg = problem.config
    x = problem.values if values is None else values
    ev = problem.evaluate(x, jacobians=True)
    report = SolveReport(initial_cost=ev.cost, costs=[ev.cost])
    lam = cfg.initial_lambda
    for it in range(cfg.max_iterations):
        report.iterations = it + 1
        H, g = problem.normal_equations(ev)
        if it == 0:
            _check_constrained(problem, H)
        if ev.cost == 0.0 or not np.any(g):
            report.converged = True
            break
        accepted = False
        while lam <= cfg.max_lambda:
            step = _damped_solve(H, g, lam)
            if step is None:
                lam *= cfg.lambda_up
                report.rejected_steps += 1
                continue
            x_new = x.retract(step)
            ev_new = problem.evaluate(x_new, jacobians=False)
            if ev_new.cost < ev.cost:
                accepted = True
                break
            lam *= cfg.lambda_up
            report.rejected_steps += 1
        if not accepted:
            if it == 0 and step is None:
                raise EstimatorError("normal equations are singular even with maximal damping")
            report.converged = True
            break
        drop = ev.cost - ev_new.cost
        decrease = drop / max(ev.cost, 1e-300)
        x = x_new
        ev = problem.evaluate(x, jacobians=True)
        report.costs.append(ev.cost)
        lam = max(lam * cfg.lambda_down, 1e-12)
        if decrease < cfg.relative_tolerance or drop < cfg.absolute_tolerance or np.max(np.abs(step)) < cfg.step_tolerance:
            report.converged = True
            break
    report.final_cost = ev.cost
    report.final_lambda = lam
    problem.last_evaluation = ev
    return x, report
