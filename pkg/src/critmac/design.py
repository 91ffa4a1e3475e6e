"""Protocol design: maximize utilization subject to a delay constraint.

The design problem is max C_norm over (q, r) in [eps, 1-eps]^2 subject to
D_crit <= eta.  Since C_norm = 1/(theta*T_c + 1), maximizing C_norm is the
same as minimizing T_c, which does not depend on theta; the optimizer uses
T_c as its internal objective so unconstrained solutions are bit-identical
across fairness levels.

The search is a coarse grid (step 0.01) over the restricted square followed
by two local refinement passes (step divided by 10 each) around the
incumbent.  The objective costs one small linear solve per point, so grid
search beats gradient machinery here.  For binding interior solutions a
final 1-D bisection along the local utilization gradient lands the solution
on the constraint curve to |D_crit - eta| <= 0.005.  Ties within 1e-9 break
toward smaller q, then smaller r.

D_crit is increasing in both q and r, which yields the regime structure:
the constraint is slack above eta* = D_crit(q*, r*), binding with an
interior tangency in a middle band, and binding at the corner r = eps for
small eta.  Below D_crit(eps, eps) the problem is infeasible.

Grid evaluations are independent and could run in parallel; the argmax
reduction iterates in a fixed order so results do not depend on evaluation
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from .errors import BadParams, SingularSystem
from .markov import (
    channel_utilization,
    contention_time,
    critical_delay,
)
from .protocol import ProtocolParams

_COARSE_STEP = 0.01
_REFINE_PASSES = 2
_TIE_TOL = 1e-9
_BINDING_TOL = 0.005


class SolutionStatus(Enum):
    SLACK_INTERIOR = "slack-interior"
    BINDING_INTERIOR = "binding-interior"
    BINDING_CORNER = "binding-corner"
    INFEASIBLE = "infeasible"


class SweepAxis(Enum):
    QR_GRID = "qr"
    N_RANGE = "n"
    THETA_RANGE = "theta"
    ETA_RANGE = "eta"
    NHAT_RANGE = "nhat"


@dataclass(frozen=True)
class DesignProblem:
    """Inputs of the design problem; eta = inf means unconstrained."""

    n_users: int
    theta: float
    eta: float = math.inf
    epsilon: float = 0.01

    def __post_init__(self) -> None:
        if not isinstance(self.n_users, int) or self.n_users < 2:
            raise BadParams(f"n_users must be an integer >= 2, got {self.n_users!r}")
        if not 0.0 < self.theta <= 1.0:
            raise BadParams(f"theta must lie in (0, 1], got {self.theta!r}")
        if not self.eta > 0.0:
            raise BadParams(f"eta must be positive, got {self.eta!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise BadParams(f"epsilon must lie in (0, 0.5), got {self.epsilon!r}")


@dataclass(frozen=True)
class DesignSolution:
    """Optimizer output; eta_star is D_crit at the unconstrained optimum."""

    q_opt: float
    r_opt: float
    c_norm: float
    d_crit: float
    status: SolutionStatus
    eta: float
    eta_star: float


class _Evaluator:
    """Memoized metric evaluation for one (N, theta)."""

    def __init__(self, n_users: int, theta: float):
        self.n_users = n_users
        self.theta = theta
        self._tc: dict[tuple[float, float], float] = {}
        self._d: dict[tuple[float, float], float] = {}

    def params(self, q: float, r: float) -> ProtocolParams:
        return ProtocolParams(self.n_users, self.theta, q, r)

    def tc(self, q: float, r: float) -> float:
        key = (q, r)
        if key not in self._tc:
            self._tc[key] = contention_time(self.params(q, r))
        return self._tc[key]

    def c_norm(self, q: float, r: float) -> float:
        return 1.0 / (self.theta * self.tc(q, r) + 1.0)

    def d_crit(self, q: float, r: float) -> float:
        key = (q, r)
        if key not in self._d:
            self._d[key] = critical_delay(self.params(q, r))
        return self._d[key]


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(round((hi - lo) / step))
    pts = lo + step * np.arange(count + 1)
    return np.clip(pts, lo, hi)


def _argmin_tc(
    ev: _Evaluator,
    qs: Iterable[float],
    rs: Iterable[float],
    feasible: Callable[[float, float], bool] | None,
    incumbent: tuple[float, float, float] | None,
) -> tuple[float, float, float] | None:
    """Scan a grid for the smallest T_c; strict-improvement keeps ties at small (q, r)."""
    best = incumbent
    for q in qs:
        for r in rs:
            if feasible is not None and not feasible(q, r):
                continue
            t = ev.tc(q, r)
            if best is None or t < best[2] - _TIE_TOL:
                best = (q, r, t)
    return best


def _grid_search(
    ev: _Evaluator,
    eps: float,
    feasible: Callable[[float, float], bool] | None,
) -> tuple[float, float] | None:
    lo, hi = eps, 1.0 - eps
    pts = _axis(lo, hi, _COARSE_STEP)
    best = _argmin_tc(ev, pts, pts, feasible, None)
    if best is None:
        return None
    step = _COARSE_STEP
    for _ in range(_REFINE_PASSES):
        span, step = step, step / 10.0
        q0, r0, _ = best
        qs = _axis(max(lo, q0 - span), min(hi, q0 + span), step)
        rs = _axis(max(lo, r0 - span), min(hi, r0 + span), step)
        best = _argmin_tc(ev, qs, rs, feasible, best)
    return float(best[0]), float(best[1])


def _final_step() -> float:
    return _COARSE_STEP / 10 ** _REFINE_PASSES


def _gradient(f: Callable[[float, float], float], q: float, r: float, eps: float) -> np.ndarray:
    h = 1e-6
    lo, hi = eps, 1.0 - eps
    gq = (f(min(q + h, hi), r) - f(max(q - h, lo), r)) / (min(q + h, hi) - max(q - h, lo))
    gr = (f(q, min(r + h, hi)) - f(q, max(r - h, lo))) / (min(r + h, hi) - max(r - h, lo))
    return np.array([gq, gr])


def _polish_to_constraint(
    ev: _Evaluator, q: float, r: float, eta: float, eps: float
) -> tuple[float, float]:
    """Bisect from (q, r) along the steepest-ascent direction until D_crit = eta.

    The incumbent sits on the feasible side of the constraint curve within
    one fine grid step; movement is tiny, so the utilization change is
    negligible while the constraint residual drops below tolerance.  Near
    the slack boundary the utilization gradient vanishes, in which case the
    delay gradient (which never vanishes, D_crit being strictly increasing)
    is used instead; at a tangency the two directions coincide.
    """
    lo, hi = eps, 1.0 - eps
    x = np.array([q, r])
    grad = _gradient(ev.c_norm, q, r, eps)
    if np.linalg.norm(grad) < 1e-8:
        grad = _gradient(ev.d_crit, q, r, eps)
    if np.linalg.norm(grad) < 1e-12:
        return q, r
    direction = grad / np.linalg.norm(grad)
    # keep the ray inside the box (at the corner the r-component would exit)
    for i in range(2):
        if (x[i] <= lo and direction[i] < 0) or (x[i] >= hi and direction[i] > 0):
            direction[i] = 0.0
    if np.linalg.norm(direction) < 1e-12:
        return q, r
    direction /= np.linalg.norm(direction)

    def d_at(t: float) -> float:
        p = np.clip(x + t * direction, lo, hi)
        return ev.d_crit(float(p[0]), float(p[1]))

    t_max = 0.0
    for i in range(2):
        if direction[i] > 0:
            t_max = max(t_max, (hi - x[i]) / direction[i])
        elif direction[i] < 0:
            t_max = max(t_max, (x[i] - lo) / -direction[i])
    t_hi = min(_final_step(), t_max)
    while d_at(t_hi) < eta and t_hi < t_max:
        t_hi = min(t_hi * 2.0, t_max)
    if d_at(t_hi) < eta:
        return q, r  # constraint unreachable along this ray; keep incumbent
    t_lo = 0.0
    for _ in range(60):
        mid = 0.5 * (t_lo + t_hi)
        if d_at(mid) < eta:
            t_lo = mid
        else:
            t_hi = mid
    p = np.clip(x + t_hi * direction, lo, hi)
    return float(p[0]), float(p[1])


def _edge_candidate(
    ev: _Evaluator, eps: float, eta: float, edge: str
) -> tuple[float, float] | None:
    """Best feasible point on the r = eps (edge="r") or q = eps (edge="q") boundary.

    Small-eta optima sit on the r = eps edge inside a feasible sliver thinner
    than the coarse grid step, so the edges get a dedicated 1-D search:
    bisect the feasibility limit of the free coordinate (D_crit is strictly
    increasing in it), then grid-refine the utilization along the feasible
    segment.
    """

    def point(v: float) -> tuple[float, float]:
        return (v, eps) if edge == "r" else (eps, v)

    lo, hi = eps, 1.0 - eps
    if ev.d_crit(*point(lo)) > eta:
        return None
    if ev.d_crit(*point(hi)) <= eta:
        v_max = hi
    else:
        a, b = lo, hi
        for _ in range(60):
            mid = 0.5 * (a + b)
            if ev.d_crit(*point(mid)) <= eta:
                a = mid
            else:
                b = mid
        v_max = a
    step = max((v_max - lo) / 100.0, 1e-6)
    best = None
    for v in _axis(lo, v_max, step):
        t = ev.tc(*point(float(v)))
        if best is None or t < best[1] - _TIE_TOL:
            best = (float(v), t)
    for _ in range(_REFINE_PASSES):
        span, step = step, step / 10.0
        v0 = best[0]
        for v in _axis(max(lo, v0 - span), min(v_max, v0 + span), step):
            t = ev.tc(*point(float(v)))
            if t < best[1] - _TIE_TOL:
                best = (float(v), t)
    return point(best[0])


def _pick_candidate(
    ev: _Evaluator, candidates: list[tuple[float, float] | None]
) -> tuple[float, float]:
    """Lowest-T_c candidate; ties break toward smaller q, then smaller r."""
    best = None
    for cand in candidates:
        if cand is None:
            continue
        q, r = cand
        t = ev.tc(q, r)
        if best is None or t < best[2] - _TIE_TOL or (
            abs(t - best[2]) <= _TIE_TOL and (q, r) < (best[0], best[1])
        ):
            best = (q, r, t)
    return best[0], best[1]


def _constrained_solution(
    ev: _Evaluator,
    prob: DesignProblem,
    eta: float,
    eta_star: float,
    coarse_incumbent: tuple[float, float, float] | None = None,
) -> DesignSolution:
    """Constrained solve given that the unconstrained optimum is infeasible."""
    eps = prob.epsilon
    if ev.d_crit(eps, eps) > eta:
        # D_crit is increasing in q and r, so (eps, eps) is its minimum.
        return DesignSolution(
            q_opt=eps,
            r_opt=eps,
            c_norm=ev.c_norm(eps, eps),
            d_crit=ev.d_crit(eps, eps),
            status=SolutionStatus.INFEASIBLE,
            eta=eta,
            eta_star=eta_star,
        )

    def feasible(q: float, r: float) -> bool:
        return ev.d_crit(q, r) <= eta

    if coarse_incumbent is None:
        interior = _grid_search(ev, eps, feasible)
    else:
        best = coarse_incumbent
        step = _COARSE_STEP
        lo, hi = eps, 1.0 - eps
        for _ in range(_REFINE_PASSES):
            span, step = step, step / 10.0
            q0, r0, _ = best
            qs = _axis(max(lo, q0 - span), min(hi, q0 + span), step)
            rs = _axis(max(lo, r0 - span), min(hi, r0 + span), step)
            best = _argmin_tc(ev, qs, rs, feasible, best)
        interior = (float(best[0]), float(best[1]))
    q, r = _pick_candidate(
        ev,
        [
            interior,
            _edge_candidate(ev, eps, eta, "r"),
            _edge_candidate(ev, eps, eta, "q"),
        ],
    )
    corner = r <= eps + 1.5 * _final_step()
    if corner:
        r = eps
    if abs(ev.d_crit(q, r) - eta) > _BINDING_TOL:
        q, r = _polish_to_constraint(ev, q, r, eta, eps)
    status = SolutionStatus.BINDING_CORNER if corner else SolutionStatus.BINDING_INTERIOR
    return DesignSolution(
        q_opt=q,
        r_opt=r,
        c_norm=ev.c_norm(q, r),
        d_crit=ev.d_crit(q, r),
        status=status,
        eta=eta,
        eta_star=eta_star,
    )


def maximize_utilization(prob: DesignProblem) -> DesignSolution:
    """Unconstrained maximizer of C_norm over the restricted square."""
    ev = _Evaluator(prob.n_users, prob.theta)
    q, r = _grid_search(ev, prob.epsilon, None)
    d = ev.d_crit(q, r)
    return DesignSolution(
        q_opt=q,
        r_opt=r,
        c_norm=ev.c_norm(q, r),
        d_crit=d,
        status=SolutionStatus.SLACK_INTERIOR,
        eta=prob.eta,
        eta_star=d,
    )


def critical_eta(prob: DesignProblem) -> float:
    """D_crit at the unconstrained optimum: the slack/binding threshold eta*."""
    return maximize_utilization(prob).d_crit


def solve_design_problem(prob: DesignProblem) -> DesignSolution:
    """Solve the constrained design problem; Infeasible is a status, not an error."""
    unconstrained = maximize_utilization(prob)
    if math.isinf(prob.eta):
        return unconstrained
    if unconstrained.d_crit <= prob.eta:
        return unconstrained
    ev = _Evaluator(prob.n_users, prob.theta)
    return _constrained_solution(ev, prob, prob.eta, unconstrained.eta_star)


def _solution_row(sol: DesignSolution) -> dict:
    return {
        "q_opt": sol.q_opt,
        "r_opt": sol.r_opt,
        "c_norm": sol.c_norm,
        "d_crit": sol.d_crit,
        "status": sol.status.value,
        "eta_star": sol.eta_star,
    }


def _sweep_eta(prob: DesignProblem, etas: Iterable[float]) -> list[dict]:
    """Eta sweep sharing one metric grid across all eta values.

    The coarse-grid metric values do not depend on eta, so they are computed
    once; each eta then reduces to a masked argmax plus local refinement.
    """
    ev = _Evaluator(prob.n_users, prob.theta)
    eps = prob.epsilon
    pts = _axis(eps, 1.0 - eps, _COARSE_STEP)
    tc_grid = np.array([[ev.tc(q, r) for r in pts] for q in pts])
    d_grid = np.array([[ev.d_crit(q, r) for r in pts] for q in pts])
    unconstrained = maximize_utilization(prob)
    eta_star = unconstrained.eta_star
    d_min = d_grid[0, 0]

    rows = []
    for eta in etas:
        if unconstrained.d_crit <= eta:
            sol = replace(unconstrained, eta=eta)
        elif d_min > eta:
            sol = DesignSolution(eps, eps, ev.c_norm(eps, eps), d_min,
                                 SolutionStatus.INFEASIBLE, eta, eta_star)
        else:
            mask = d_grid <= eta
            tc_masked = np.where(mask, tc_grid, np.inf)
            i, j = np.unravel_index(np.argmin(tc_masked), tc_masked.shape)
            incumbent = (float(pts[i]), float(pts[j]), float(tc_masked[i, j]))
            sol = _constrained_solution(ev, prob, eta, eta_star, coarse_incumbent=incumbent)
        rows.append({"eta": eta, **_solution_row(sol)})
    return rows


def sweep(
    prob: DesignProblem,
    axis: SweepAxis,
    *,
    start: float | None = None,
    stop: float | None = None,
    step: float | None = None,
) -> list[dict]:
    """Tabulate metrics or optimal protocols along one axis.

    QR_GRID tabulates raw C_norm/D_crit over the restricted square for
    contour plotting (grid points that fail to evaluate are kept with an
    error marker).  N_RANGE, THETA_RANGE and ETA_RANGE re-solve the design
    problem along the respective axis.  NHAT_RANGE solves the problem for an
    estimated user count nhat and evaluates the resulting protocol with the
    true n_users, flagging delay-constraint violations.
    """
    if axis is SweepAxis.QR_GRID:
        grid_step = step if step is not None else 0.01
        lo = start if start is not None else prob.epsilon
        hi = stop if stop is not None else 1.0 - prob.epsilon
        pts = _axis(lo, hi, grid_step)
        rows = []
        for q in pts:
            for r in pts:
                row = {"q": float(q), "r": float(r), "c_norm": None, "d_crit": None, "error": ""}
                try:
                    params = ProtocolParams(prob.n_users, prob.theta, float(q), float(r))
                    row["c_norm"] = channel_utilization(params)
                    row["d_crit"] = critical_delay(params)
                except (SingularSystem, BadParams) as exc:
                    row["error"] = type(exc).__name__
                rows.append(row)
        return rows

    if start is None or stop is None:
        raise BadParams(f"{axis.value} sweep requires start and stop")

    if axis is SweepAxis.N_RANGE:
        ns = range(int(start), int(stop) + 1, int(step) if step else 1)
        return [
            {"n": n, **_solution_row(solve_design_problem(replace(prob, n_users=n)))}
            for n in ns
        ]

    if axis is SweepAxis.THETA_RANGE:
        thetas = _axis(start, stop, step if step else 0.01)
        return [
            {"theta": float(t), **_solution_row(solve_design_problem(replace(prob, theta=float(t))))}
            for t in thetas
        ]

    if axis is SweepAxis.ETA_RANGE:
        etas = [float(e) for e in _axis(start, stop, step if step else 0.01)]
        return _sweep_eta(prob, etas)

    if axis is SweepAxis.NHAT_RANGE:
        rows = []
        for nhat in range(int(start), int(stop) + 1, int(step) if step else 1):
            sol = solve_design_problem(replace(prob, n_users=nhat))
            true_params = ProtocolParams(prob.n_users, prob.theta, sol.q_opt, sol.r_opt)
            c = channel_utilization(true_params)
            d = critical_delay(true_params)
            row = {
                "nhat": nhat,
                "q_opt": sol.q_opt,
                "r_opt": sol.r_opt,
                "c_norm": c,
                "d_crit": d,
                "constraint_satisfied": bool(d <= prob.eta + _BINDING_TOL),
            }
            rows.append(row)
        return rows

    raise BadParams(f"unknown sweep axis {axis!r}")
