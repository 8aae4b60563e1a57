#!/usr/bin/env python3
"""Anatomy of a one-stage worst case over a Kantorovich ball.

A single decision node faces a lottery over outcomes in [0, 1] and is scored
by the least favorable utility in a ball around a nominal one.  This script
shows what the adversary actually does with its budget:

  * against a *concave, curved* nominal it flattens the utility where the
    lottery puts mass, trading value there for value it does not care about;
  * against a *linear* nominal it is powerless — every normalized concave
    utility lies on or above the identity (its own chord), so the worst case
    equals the nominal no matter the radius.  Robustness is free when the
    nominal is risk-neutral; the price of robustness is curvature.

Each solve is done twice, from the primal LP and from its mechanical dual,
to show they price the same utility.
"""

import numpy as np

from prefrobust import (
    ClosedFormUtility,
    KantorovichBallSpec,
    OutcomeDistribution,
    project,
    uniform_grid,
    worst_case_kantorovich_dual,
    worst_case_kantorovich_primal,
)

RADII = (0.0, 0.01, 0.05, 0.1, 0.3)


def sweep(dist, nominal, label):
    print(f"worst-case expected utility, {label} nominal:")
    print(f"{'radius':>8} {'primal':>10} {'dual':>10} {'|gap|':>9}")
    values = []
    for radius in RADII:
        spec = KantorovichBallSpec(nominal, radius)
        primal = worst_case_kantorovich_primal(dist, spec)
        dual = worst_case_kantorovich_dual(dist, spec)
        gap = abs(primal.value - dual.value)
        print(f"{radius:>8.3f} {primal.value:>10.6f} {dual.value:>10.6f} {gap:>9.1e}")
        values.append(primal)
    return values


def main():
    grid = uniform_grid(0.0, 1.0, 21)
    dist = OutcomeDistribution((0.15, 0.45, 0.9), (0.3, 0.5, 0.2))
    print("lottery:", dict(zip(dist.values, dist.probs)))
    print()

    curved = project(ClosedFormUtility.exponential(3.0), grid)
    results = sweep(dist, curved, "exponential(3)")
    print()

    # Where did the budget go?  Compare the slopes of the nominal and of the
    # adversarial utility at the largest radius: mass-bearing segments get
    # flattened first.
    worst = results[-1].utility
    seg = np.searchsorted(grid, np.array(dist.values)) - 1
    print("slope of nominal vs worst utility on the segments carrying mass:")
    for s, x in zip(seg, dist.values):
        print(f"  outcome {x:.2f}: {curved.slopes[s]:>7.4f} -> {worst.slopes[s]:>7.4f}")
    print()

    linear = project(ClosedFormUtility.linear(), grid)
    sweep(dist, linear, "linear")
    print()
    print("The linear column is flat: within the concave class the identity is")
    print("its own worst case at every radius, so a risk-neutral nominal gets")
    print("robustness for free.  Only curved preferences pay a premium.")


if __name__ == "__main__":
    main()
