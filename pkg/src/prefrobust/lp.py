"""Deterministic linear-programming layer.

Every reformulation in this package (metric computations, one-stage worst
cases, scenario-tree programs) bottoms out in a sparse LP assembled row by
row and handed to a single deterministic backend.  The default backend is
HiGHS dual simplex via scipy.optimize.linprog: it handles free variables and
equality rows natively, reports row/bound marginals, and is bit-stable for a
fixed input.  The backend is pluggable through ``solve(backend=...)`` so a
different engine can be swapped in without touching the builders.

The module also provides a mechanical dualizer.  Several published dual
formulations in this problem family carry typographical sign slips, so
downstream code never transcribes duals by hand: it calls :func:`dualize`
on the primal it already trusts.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

LEQ = "<="
EQ = "="
GEQ = ">="
_RELS = (LEQ, EQ, GEQ)

#: Environment variable overriding the solver feasibility tolerances.
LP_TOL_ENV = "PREFROBUST_LP_TOL"
DEFAULT_TOL = 1e-8


def solver_tolerance(explicit=None):
    """Resolve the solver tolerance: explicit argument > env var > default."""
    if explicit is not None:
        return float(explicit)
    raw = os.environ.get(LP_TOL_ENV)
    if raw:
        try:
            return float(raw)
        except ValueError:
            log.warning("ignoring non-numeric %s=%r", LP_TOL_ENV, raw)
    return DEFAULT_TOL


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    #: numerical breakdown or iteration limit -- never silently treated as solved
    FAILED = "failed"


@dataclass
class LpSolution:
    """Result of one solve.

    ``duals`` holds one multiplier per row, in the row order of the program,
    with the orientation that makes the dual objective equal the primal
    objective at an optimum:

    * minimization: ``>=`` rows have duals >= 0, ``<=`` rows <= 0;
    * maximization: the reverse.

    ``reduced_costs`` are the bound multipliers under the same orientation,
    and ``dual_objective`` is ``b'y + l'rc_lower + u'rc_upper`` so the strong
    duality gap ``|objective - dual_objective|`` can be checked directly.
    """

    status: LpStatus
    objective: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float | None = None
    message: str = ""

    @property
    def is_optimal(self):
        return self.status is LpStatus.OPTIMAL


class LinearProgram:
    """A sparse LP with named variables and rows.

    Variables carry plain box bounds (default ``[0, inf)``); rows are
    ``coefs . x  rel  rhs`` with ``rel`` one of ``<=``, ``=``, ``>=``.
    Rows and variables keep their insertion indices, which is what the
    dualizer's positional correspondence relies on.
    """

    def __init__(self, sense="min", name=""):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.name = name
        self._obj = []
        self._lb = []
        self._ub = []
        self._var_names = []
        self._row_cols = []
        self._row_vals = []
        self._rels = []
        self._rhs = []
        self._row_names = []

    # ------------------------------------------------------------------ build
    @property
    def num_vars(self):
        return len(self._obj)

    @property
    def num_rows(self):
        return len(self._rhs)

    def add_var(self, name=None, lb=0.0, ub=math.inf, obj=0.0):
        """Add one variable, returning its index."""
        if not (lb <= ub):
            raise ValueError(f"variable {name!r}: lb {lb} > ub {ub}")
        self._obj.append(float(obj))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._var_names.append(name)
        return len(self._obj) - 1

    def add_vars(self, n, name=None, lb=0.0, ub=math.inf, obj=0.0):
        """Add ``n`` variables sharing bounds; returns an index array."""
        base = self.num_vars
        objs = np.broadcast_to(np.asarray(obj, dtype=float), (n,))
        for i in range(n):
            nm = f"{name}[{i}]" if name is not None else None
            self.add_var(nm, lb=lb, ub=ub, obj=float(objs[i]))
        return np.arange(base, base + n)

    def set_obj(self, idx, coef):
        self._obj[idx] = float(coef)

    def add_row(self, coefs, rel, rhs, name=None):
        """Add a row.  ``coefs`` is a mapping var index -> coefficient or a
        pair of (indices, values) sequences.  Returns the row index."""
        if rel not in _RELS:
            raise ValueError(f"relation must be one of {_RELS}, got {rel!r}")
        if isinstance(coefs, dict):
            idx = np.fromiter(coefs.keys(), dtype=np.int64, count=len(coefs))
            val = np.fromiter(coefs.values(), dtype=float, count=len(coefs))
        else:
            idx, val = coefs
            idx = np.asarray(idx, dtype=np.int64)
            val = np.asarray(val, dtype=float)
        if idx.size != val.size:
            raise ValueError("index and value lists differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise ValueError(f"row {name!r} references undeclared variable")
        self._row_cols.append(idx)
        self._row_vals.append(val)
        self._rels.append(rel)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return len(self._rhs) - 1

    # ---------------------------------------------------------------- access
    @property
    def objective(self):
        return np.asarray(self._obj, dtype=float)

    @property
    def lower(self):
        return np.asarray(self._lb, dtype=float)

    @property
    def upper(self):
        return np.asarray(self._ub, dtype=float)

    @property
    def relations(self):
        return list(self._rels)

    @property
    def rhs(self):
        return np.asarray(self._rhs, dtype=float)

    def row_matrix(self):
        """The full constraint matrix as CSR (one row per added row)."""
        m, n = self.num_rows, self.num_vars
        if m == 0:
            return sp.csr_matrix((0, n))
        counts = [c.size for c in self._row_cols]
        rows = np.repeat(np.arange(m), counts)
        cols = np.concatenate(self._row_cols) if rows.size else np.empty(0, dtype=np.int64)
        vals = np.concatenate(self._row_vals) if rows.size else np.empty(0)
        return sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()

    def var_name(self, j):
        return self._var_names[j] or f"x{j}"

    def row_name(self, k):
        return self._row_names[k] or f"r{k}"

    def dump(self):
        """Plain-text rendering, one constraint per line (debugging aid)."""
        out = [f"{self.sense} " + " + ".join(
            f"{c:g}*{self.var_name(j)}" for j, c in enumerate(self._obj) if c != 0.0)]
        for k in range(self.num_rows):
            terms = " + ".join(
                f"{v:g}*{self.var_name(j)}"
                for j, v in zip(self._row_cols[k], self._row_vals[k]))
            out.append(f"{self.row_name(k)}: {terms or '0'} {self._rels[k]} {self._rhs[k]:g}")
        for j in range(self.num_vars):
            lo, hi = self._lb[j], self._ub[j]
            if (lo, hi) != (0.0, math.inf):
                out.append(f"bound: {lo:g} <= {self.var_name(j)} <= {hi:g}")
        return "\n".join(out)

    # ----------------------------------------------------------------- solve
    def solve(self, tol=None, backend=None):
        """Solve and return an :class:`LpSolution`.

        ``backend`` may be a callable with the same signature as
        :func:`_solve_highs` for tests or alternative engines.
        """
        if self.num_vars == 0:
            raise ValueError("cannot solve an LP with no variables")
        backend = backend or _solve_highs
        return backend(self, solver_tolerance(tol))


def _solve_highs(lp: LinearProgram, tol: float) -> LpSolution:
    """Default backend: HiGHS dual simplex through scipy.linprog."""
    n = lp.num_vars
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.objective

    A = lp.row_matrix()
    rels = np.asarray(lp.relations)
    rhs = lp.rhs

    is_eq = rels == EQ
    is_le = rels == LEQ
    is_ge = rels == GEQ
    # >= rows are negated into <= form; remember the flip to restore duals.
    ub_mask = is_le | is_ge
    flip = np.where(is_ge[ub_mask], -1.0, 1.0)

    A_ub = b_ub = A_eq = b_eq = None
    if ub_mask.any():
        A_ub = sp.diags(flip) @ A[ub_mask]
        b_ub = flip * rhs[ub_mask]
    if is_eq.any():
        A_eq = A[is_eq]
        b_eq = rhs[is_eq]

    bounds = [(lo if lo > -math.inf else None, hi if hi < math.inf else None)
              for lo, hi in zip(lp.lower, lp.upper)]

    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": tol,
            "dual_feasibility_tolerance": tol,
        },
    )

    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, message=res.message)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, message=res.message)
    if res.status != 0 or res.x is None:
        log.warning("LP %s: solver breakdown (%s)", lp.name or "<unnamed>", res.message)
        return LpSolution(LpStatus.FAILED, message=res.message)

    x = np.asarray(res.x)
    obj = float(lp.objective @ x)

    # Reassemble one dual per original row; scipy reports marginals for the
    # minimized, <=-oriented problem, so undo the sense flip and row flips.
    duals = np.zeros(lp.num_rows)
    if A_ub is not None:
        duals[ub_mask] = flip * res.ineqlin.marginals
    if A_eq is not None:
        duals[is_eq] = res.eqlin.marginals
    duals *= sign

    rc = sign * (np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals))

    dual_obj = float(rhs @ duals)
    lo, hi = lp.lower, lp.upper
    lo_m = sign * np.asarray(res.lower.marginals)
    hi_m = sign * np.asarray(res.upper.marginals)
    finite_lo = lo > -math.inf
    finite_hi = hi < math.inf
    dual_obj += float(lo[finite_lo] @ lo_m[finite_lo])
    dual_obj += float(hi[finite_hi] @ hi_m[finite_hi])

    return LpSolution(LpStatus.OPTIMAL, objective=obj, x=x, duals=duals,
                      reduced_costs=rc, dual_objective=dual_obj, message=res.message)


# --------------------------------------------------------------------- duality
_SIGN_FREE = "free"
_SIGN_NONNEG = "nonneg"
_SIGN_NONPOS = "nonpos"


def _sign_type(lo, hi, name):
    if lo == 0.0 and hi == math.inf:
        return _SIGN_NONNEG
    if lo == -math.inf and hi == math.inf:
        return _SIGN_FREE
    if lo == -math.inf and hi == 0.0:
        return _SIGN_NONPOS
    raise ValueError(
        f"dualize() needs sign-typed bounds; variable {name} has [{lo}, {hi}]. "
        "Fold finite bounds into explicit rows first.")


def dualize(lp: LinearProgram) -> LinearProgram:
    """Mechanical LP dual.

    Requires every variable bound to be one of ``[0, inf)``, ``(-inf, inf)``
    or ``(-inf, 0]``.  The correspondence is positional: dual variable ``k``
    multiplies primal row ``k``, and dual row ``j`` is the stationarity
    condition of primal variable ``j`` — so a solve of the dual returns the
    primal solution in its row marginals.  Strong duality ties the two
    objective values together; tests rely on both facts.
    """
    n, m = lp.num_vars, lp.num_rows
    sense = lp.sense
    dual = LinearProgram(sense="max" if sense == "min" else "min",
                         name=f"dual({lp.name})" if lp.name else "dual")

    rels = lp.relations
    rhs = lp.rhs
    for k in range(m):
        rel = rels[k]
        if sense == "min":
            lo, hi = {LEQ: (-math.inf, 0.0), EQ: (-math.inf, math.inf),
                      GEQ: (0.0, math.inf)}[rel]
        else:
            lo, hi = {LEQ: (0.0, math.inf), EQ: (-math.inf, math.inf),
                      GEQ: (-math.inf, 0.0)}[rel]
        dual.add_var(name=f"y_{lp.row_name(k)}", lb=lo, ub=hi, obj=rhs[k])

    # Column view of the primal matrix for the stationarity rows.
    A_csc = lp.row_matrix().tocsc()
    c = lp.objective
    for j in range(n):
        stype = _sign_type(lp.lower[j], lp.upper[j], lp.var_name(j))
        if sense == "min":
            rel = {_SIGN_NONNEG: LEQ, _SIGN_FREE: EQ, _SIGN_NONPOS: GEQ}[stype]
        else:
            rel = {_SIGN_NONNEG: GEQ, _SIGN_FREE: EQ, _SIGN_NONPOS: LEQ}[stype]
        start, end = A_csc.indptr[j], A_csc.indptr[j + 1]
        dual.add_row((A_csc.indices[start:end], A_csc.data[start:end]),
                     rel, c[j], name=f"stat_{lp.var_name(j)}")
    return dual
