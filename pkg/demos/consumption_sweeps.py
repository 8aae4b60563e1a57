#!/usr/bin/env python3
"""Robust investment-consumption on a synthetic tree: what robustness costs.

A three-stage market with two risky assets and an oil-indexed consumption
good is solved under four preference models of decreasing knowledge:

  msp_true   the modeller knows the utility exactly (fine-mesh stand-in),
  msp_pln    the utility is projected onto a coarse working mesh,
  pro_kan    only a Kantorovich ball around that projection is trusted,
  pro_pc     only answers to K pairwise-comparison questionnaires are known.

Two sweeps tell the story.  Growing the ball radius decays the guaranteed
value monotonically from the nominal toward the concave-class floor; asking
more questionnaire questions climbs back from that floor toward (but never
beyond) the true-utility value.  The tables below are exactly what the CLI
emits as CSV; here they are aggregated and annotated.
"""

import dataclasses

from prefrobust import ExperimentConfig, aggregate, generate_tree, run_one, sweep

RADII = [0.0, 0.001, 0.01, 0.1, 0.3]
QUESTIONNAIRES = [0, 10, 50, 200]
SEEDS = tuple(range(5))


def main():
    cfg = ExperimentConfig()  # 3x3x3 tree, 20 breakpoints, mixed oil regimes
    tree = generate_tree(cfg.branching, cfg.tree_seed, cfg.returns)
    print(f"tree: branching {cfg.branching}, horizon {cfg.horizon}, "
          f"{len(tree.nodes)} nodes, working mesh N = {cfg.n_breakpoints}")

    anchors = {}
    for model in ("msp_true", "msp_pln"):
        anchors[model] = run_one(tree, dataclasses.replace(cfg, model=model), 0).value
    print(f"anchor values: true-utility {anchors['msp_true']:.4f}, "
          f"projected nominal {anchors['msp_pln']:.4f}")
    print()

    print("radius sweep (pro_kan, worst case over a Kantorovich ball):")
    print(f"{'R':>8} {'value':>10} {'vs nominal':>12}")
    for row in sweep(dataclasses.replace(cfg, model="pro_kan", seeds=(0,)), "R", RADII):
        print(f"{row.R:>8g} {row.value:>10.4f} {row.value - anchors['msp_pln']:>+12.4f}")
    print("value(R=0) recovers the nominal; the premium grows with the radius")
    print("because only the curved-regime nodes give the adversary room to move.")
    print()

    print(f"questionnaire sweep (pro_pc, {len(SEEDS)} elicitation seeds):")
    print(f"{'K':>8} {'mean':>10} {'std':>9} {'vs true':>10}")
    rows = sweep(dataclasses.replace(cfg, model="pro_pc", seeds=SEEDS), "K", QUESTIONNAIRES)
    for entry in aggregate(rows):
        print(f"{entry['K']:>8d} {entry['mean']:>10.4f} {entry['std']:>9.4f} "
              f"{entry['mean'] - anchors['msp_true']:>+10.4f}")
    print("K = 0 is the concave-class floor (no preference information beyond")
    print("normalization, monotonicity, concavity and the slope caps); each")
    print("answered comparison cuts the ambiguity set and lifts the guarantee")
    print("toward the true-utility value without ever crossing it.")


if __name__ == "__main__":
    main()
