"""Payment rules over elicited candidate sets: VCG and VCG-nearest.

Both rules run on the same inputs as winner determination: per-bidder
candidate sets of (bundle, inferred value) and the inferred-welfare-optimal
allocation.  VCG charges each winner the externality she imposes; VCG-nearest
picks, inside the revealed minimum-revenue core, the payment vector closest
to VCG in Euclidean distance.  Coalitional welfare terms are computed exactly
by enumerating all 2^n bidder subsets, so the rule is capped at small n.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from . import domain, oracles
from .domain import Allocation, Capacities
from .errors import DomainError, ResourceLimitError

#: coalition enumeration is 2^n; refuse beyond this many bidders
DEFAULT_COALITION_CAP = 12

#: constraint slack accepted when verifying core membership
CORE_TOL = 1e-9


def _allocation_values(candidates, allocation) -> list[float]:
    values = []
    for cands, bundle in zip(candidates, allocation):
        value = cands.get(tuple(bundle))
        if value is None:
            if all(x == 0 for x in bundle):
                value = 0.0
            else:
                raise DomainError(f"allocated bundle {tuple(bundle)} not in candidate set")
        values.append(float(value))
    return values


def vcg_payments(
    candidates: Sequence[oracles.CandidateSet],
    allocation: Allocation,
    capacities: Sequence[int],
) -> tuple[float, ...]:
    """Externality payments: welfare of the others without me, minus with me.

    The allocation must be the winner-determination optimum for the given
    candidate sets.  Each payment lands in [0, inferred value of the won
    bundle]; tiny negative float residue is clamped to zero.
    """
    caps = domain.check_capacities(capacities)
    values = _allocation_values(candidates, allocation)
    payments = []
    for i in range(len(candidates)):
        others = [c for j, c in enumerate(candidates) if j != i]
        _, welfare_without = oracles.select_allocation(others, caps)
        welfare_others = sum(v for j, v in enumerate(values) if j != i)
        payments.append(max(0.0, welfare_without - welfare_others))
    return tuple(payments)


def core_constraints(
    candidates: Sequence[oracles.CandidateSet],
    allocation: Allocation,
    capacities: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """All 2^n revealed-core constraints as rows A pi >= b.

    For every coalition L, the bidders outside L must pay at least what L
    could generate on its own beyond what its members already receive.
    Trivial rows (empty and full coalition) are included for completeness.
    """
    caps = domain.check_capacities(capacities)
    n = len(candidates)
    values = _allocation_values(candidates, allocation)
    rows, rhs = [], []
    for mask in range(2**n):
        coalition = [i for i in range(n) if mask & (1 << i)]
        inside = [candidates[i] for i in coalition]
        if inside:
            _, coalition_welfare = oracles.select_allocation(inside, caps)
        else:
            coalition_welfare = 0.0
        row = np.array([0.0 if i in coalition else 1.0 for i in range(n)])
        rows.append(row)
        rhs.append(coalition_welfare - sum(values[i] for i in coalition))
    return np.array(rows), np.array(rhs)


def _project_onto_core_face(
    target: np.ndarray,
    a_mat: np.ndarray,
    b_vec: np.ndarray,
    upper: np.ndarray,
    revenue: float,
) -> np.ndarray:
    """Closest point to target in {A pi >= b, 0 <= pi <= upper, sum pi = revenue}.

    SLSQP does the heavy lifting; an exact equality-constrained projection on
    the detected active set then polishes the solution, which matters because
    core membership is verified at 1e-7.
    """
    n = len(target)
    x0, _ = _min_revenue_point(a_mat, b_vec, upper)

    cons = [
        {"type": "eq", "fun": lambda x: np.sum(x) - revenue,
         "jac": lambda x: np.ones(n)},
        {"type": "ineq", "fun": lambda x: a_mat @ x - b_vec, "jac": lambda x: a_mat},
    ]
    res = minimize(
        lambda x: np.sum((x - target) ** 2),
        x0,
        jac=lambda x: 2.0 * (x - target),
        bounds=[(0.0, u) for u in upper],
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-16, "maxiter": 1000},
    )
    x = res.x

    # active-set polish: re-project exactly onto the affine hull of the
    # constraints the solver left (near-)tight
    act_tol = 1e-6
    eq_rows = [np.ones(n)]
    eq_rhs = [revenue]
    for row, b in zip(a_mat, b_vec):
        if row @ x - b <= act_tol:
            eq_rows.append(row)
            eq_rhs.append(b)
    for i in range(n):
        if x[i] <= act_tol:
            e = np.zeros(n); e[i] = 1.0
            eq_rows.append(e); eq_rhs.append(0.0)
        elif upper[i] - x[i] <= act_tol:
            e = np.zeros(n); e[i] = 1.0
            eq_rows.append(e); eq_rhs.append(upper[i])
    e_mat = np.array(eq_rows)
    e_rhs = np.array(eq_rhs)
    shift, *_ = np.linalg.lstsq(e_mat, e_rhs - e_mat @ target, rcond=None)
    polished = target + shift

    def feasible(p):
        return (
            np.all(a_mat @ p >= b_vec - CORE_TOL)
            and np.all(p >= -CORE_TOL)
            and np.all(p <= upper + CORE_TOL)
            and abs(np.sum(p) - revenue) <= CORE_TOL
        )

    if feasible(polished) and (
        not feasible(x) or np.sum((polished - target) ** 2) <= np.sum((x - target) ** 2) + 1e-12
    ):
        return np.clip(polished, 0.0, upper)
    return np.clip(x, 0.0, upper)


def _min_revenue_point(a_mat, b_vec, upper) -> tuple[np.ndarray, float]:
    n = a_mat.shape[1]
    res = linprog(
        c=np.ones(n),
        A_ub=-a_mat,
        b_ub=-b_vec,
        bounds=[(0.0, u) for u in upper],
        method="highs",
    )
    if not res.success:
        raise DomainError(f"minimum-revenue core LP failed: {res.message}")
    return res.x, float(res.fun)


def vcg_nearest_payments(
    candidates: Sequence[oracles.CandidateSet],
    allocation: Allocation,
    capacities: Sequence[int],
    coalition_cap: int = DEFAULT_COALITION_CAP,
) -> tuple[float, ...]:
    """Minimum-revenue core payments closest to VCG in the L2 norm."""
    n = len(candidates)
    if n > coalition_cap:
        raise ResourceLimitError(f"{n} bidders exceed the 2^n coalition cap {coalition_cap}")
    caps = domain.check_capacities(capacities)
    vcg = np.array(vcg_payments(candidates, allocation, caps))
    values = np.array(_allocation_values(candidates, allocation))
    a_mat, b_vec = core_constraints(candidates, allocation, caps)

    if np.all(a_mat @ vcg >= b_vec - CORE_TOL):
        # VCG already sits in the core, hence in its minimum-revenue face
        return tuple(float(p) for p in vcg)

    _, min_revenue = _min_revenue_point(a_mat, b_vec, values)
    projected = _project_onto_core_face(vcg, a_mat, b_vec, values, min_revenue)
    return tuple(float(p) for p in projected)
