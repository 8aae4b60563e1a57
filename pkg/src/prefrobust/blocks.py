"""Reusable LP blocks describing sets of piecewise-linear utilities.

Every optimization in this package works over normalized nondecreasing PL
utilities on a fixed grid, encoded by value variables alpha_j at breakpoints
and slope variables beta_j per segment.  The row families here are shared by
the ambiguity-set feasibility checker, the one-stage worst-case LPs, and the
scenario-tree assembly, so their exact shape (what is a row, what is a
bound) is fixed in one place: slope nonnegativity is a variable bound, while
normalization, value/slope linkage, concavity, the Lipschitz cap, and the
slope-variation cap are rows, because downstream code reads their duals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram


@dataclass
class UtilityBlock:
    """Variable/row indices of one PL-utility block inside a larger LP."""

    grid: np.ndarray
    alpha: np.ndarray  # value variables, one per breakpoint
    beta: np.ndarray  # slope variables, one per segment
    rows: dict = field(default_factory=dict)


def append_utility_block(lp: LinearProgram, grid, L, L_tilde, concave=True, tag="u"):
    """Add alpha/beta variables and the shape rows of the utility class.

    Rows (names prefixed by ``tag``): ``norm0``/``norm1`` pin alpha at the
    endpoints to 0 and 1; ``link[i]`` ties alpha increments to beta; with
    ``concave`` the rows ``concave[i]``: alpha_{i+1} - alpha_i -
    beta_{i+1} * delta_i >= 0 force nonincreasing slopes; ``lip[i]`` caps
    beta at L; ``curve_lo/hi[i]`` cap the slope variation
    |beta_{i+1} - beta_i| by L_tilde * (y_{i+2} - y_i).
    """
    y = np.asarray(grid, dtype=float)
    if y.ndim != 1 or y.size < 2 or np.any(np.diff(y) <= 0):
        raise ValueError("grid must be strictly increasing with at least 2 points")
    if not (L > 0 and L_tilde > 0 and math.isfinite(L) and math.isfinite(L_tilde)):
        raise ValueError("L and L_tilde must be finite and positive")
    delta = np.diff(y)
    n_seg = delta.size

    alpha = lp.add_vars(y.size, f"{tag}.alpha", lb=-math.inf)
    beta = lp.add_vars(n_seg, f"{tag}.beta", lb=0.0)
    rows = {
        "norm0": lp.add_row({alpha[0]: 1.0}, "=", 0.0, name=f"{tag}.norm0"),
        "norm1": lp.add_row({alpha[-1]: 1.0}, "=", 1.0, name=f"{tag}.norm1"),
        "link": [
            lp.add_row(
                {alpha[i + 1]: 1.0, alpha[i]: -1.0, beta[i]: -delta[i]},
                "=",
                0.0,
                name=f"{tag}.link[{i}]",
            )
            for i in range(n_seg)
        ],
        "lip": [
            lp.add_row({beta[i]: 1.0}, "<=", L, name=f"{tag}.lip[{i}]")
            for i in range(n_seg)
        ],
    }
    if concave:
        rows["concave"] = [
            lp.add_row(
                {alpha[i + 1]: 1.0, alpha[i]: -1.0, beta[i + 1]: -delta[i]},
                ">=",
                0.0,
                name=f"{tag}.concave[{i}]",
            )
            for i in range(n_seg - 1)
        ]
    rows["curve_lo"], rows["curve_hi"] = [], []
    for i in range(n_seg - 1):
        cap = L_tilde * (y[i + 2] - y[i])
        rows["curve_hi"].append(
            lp.add_row({beta[i + 1]: 1.0, beta[i]: -1.0}, "<=", cap, name=f"{tag}.curve_hi[{i}]")
        )
        rows["curve_lo"].append(
            lp.add_row({beta[i + 1]: -1.0, beta[i]: 1.0}, "<=", cap, name=f"{tag}.curve_lo[{i}]")
        )
    return UtilityBlock(grid=y, alpha=alpha, beta=beta, rows=rows)


def append_ball_membership(lp: LinearProgram, beta, nominal_slopes, grid, radius, tag="ball"):
    """Rows certifying that the slopes ``beta`` stay within LP-Kantorovich
    distance ``radius`` of ``nominal_slopes``.

    This is the multiplier form of the metric LP: four nonnegative
    multiplier families (lam, mu, rho, phi), a budget row bounding
    sum of delta_i^2/2 * (lam+mu+rho+phi) by the radius, one matching row
    per segment tying multipliers to beta - nominal, and telescoping rows
    at the left end, between consecutive segments, and at the right end.
    Membership in this ball implies membership in the exact-distance ball.
    """
    y = np.asarray(grid, dtype=float)
    delta = np.diff(y)
    n_seg = delta.size
    bnom = np.asarray(nominal_slopes, dtype=float)
    if bnom.shape != (n_seg,):
        raise ValueError("nominal_slopes must have one entry per grid segment")
    if radius < 0:
        raise ValueError("radius must be nonnegative")

    lam = lp.add_vars(n_seg, f"{tag}.lam")
    mu = lp.add_vars(n_seg, f"{tag}.mu")
    rho = lp.add_vars(n_seg, f"{tag}.rho")
    phi = lp.add_vars(n_seg, f"{tag}.phi")

    budget = {}
    for i in range(n_seg):
        half = 0.5 * delta[i] ** 2
        for v in (lam[i], mu[i], rho[i], phi[i]):
            budget[v] = half
    rows = {"budget": lp.add_row(budget, "<=", float(radius), name=f"{tag}.budget")}
    rows["match"] = [
        lp.add_row(
            {beta[i]: -1.0, lam[i]: 1.0, mu[i]: -1.0, rho[i]: 1.0, phi[i]: -1.0},
            "=",
            -bnom[i],
            name=f"{tag}.match[{i}]",
        )
        for i in range(n_seg)
    ]
    rows["left"] = lp.add_row(
        {mu[0]: delta[0], lam[0]: -delta[0]}, "=", 0.0, name=f"{tag}.left"
    )
    rows["mid"] = [
        lp.add_row(
            {
                mu[i + 1]: delta[i + 1],
                lam[i + 1]: -delta[i + 1],
                phi[i]: delta[i],
                rho[i]: -delta[i],
            },
            "=",
            0.0,
            name=f"{tag}.mid[{i}]",
        )
        for i in range(n_seg - 1)
    ]
    rows["right"] = lp.add_row(
        {phi[n_seg - 1]: delta[n_seg - 1], rho[n_seg - 1]: -delta[n_seg - 1]},
        "=",
        0.0,
        name=f"{tag}.right",
    )
    return {"lam": lam, "mu": mu, "rho": rho, "phi": phi, "rows": rows}


def lottery_grid_probs(grid, lottery):
    """Probability mass of a lottery on each grid point (support must lie on
    the grid within 1e-9)."""
    y = np.asarray(grid, dtype=float)
    mass = np.zeros(y.size)
    for x, p in zip(lottery.support, lottery.probs):
        j = int(np.argmin(np.abs(y - x)))
        if abs(y[j] - x) > 1e-9:
            raise ValueError(f"lottery outcome {x!r} is not a grid point")
        mass[j] += p
    return mass


def append_pairwise_rows(lp: LinearProgram, alpha, grid, pairs, margin=0.0, tag="pc"):
    """One row per elicited comparison (W_k, Y_k, z_k):
    z_k * sum_j (P[W_k = y_j] - P[Y_k = y_j]) * alpha_j >= margin."""
    rows = []
    for k, (w, yk, z) in enumerate(pairs):
        diff = lottery_grid_probs(grid, w) - lottery_grid_probs(grid, yk)
        coefs = {alpha[j]: z * diff[j] for j in range(len(alpha)) if diff[j] != 0.0}
        rows.append(lp.add_row(coefs, ">=", margin, name=f"{tag}[{k}]"))
    return rows
