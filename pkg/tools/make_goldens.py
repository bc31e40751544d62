"""Regenerate the committed golden files under tests/golden/.

Two artifact families:
  - h_coeffs_{n}_{k}.json: fitted identity coefficients for the reference
    cells, stored with the seed and budget that produced them.
  - moment_baselines.json: empirical suprema of the smoothing ratio and the
    per-(i, l) difference-term moments over a fixed random-table protocol.
    The smoothing side is computed here with the naive stencil convolution
    on purpose, so the committed numbers are independent of the separable
    fast path they are later compared against.

Rerun only to change the protocol; commit the diff.
"""

import json
import pathlib

import numpy as np

from enflolab.averaging import build_even_box, convolve
from enflolab.identity import decomposition_moment, fit_identity_coefficients
from enflolab.inequalities import _diagonal_smoothing_moment, edge_energy
from enflolab.torus import FunctionTable, TorusGeometry, as_norm

GOLDEN_DIR = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden"

FIT_CELLS = [(1, 3), (2, 1), (2, 3), (3, 3)]
FIT_M = 8
FIT_BUDGET = 120
FIT_HELDOUT = 200

MOMENT_CELLS = [(2, 8, 3), (3, 12, 5)]
MOMENT_TABLES = 200
MOMENT_SEED_TAG = 8301
MOMENT_P = 2.0
MOMENT_Q = 2.0


def cell_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def naive_smoothing_ratio(f: FunctionTable, k: int, norm, p: float):
    """Smoothing ratio through the naive stencil, bypassing the fast path."""
    g = f.geometry
    smooth = convolve(f, build_even_box(g, range(g.n), k))
    lhs = _diagonal_smoothing_moment(smooth.nd_view(), g.n, norm, p)
    rhs = edge_energy(f, norm, p)
    return None if rhs == 0.0 else lhs / rhs


def make_fit_goldens() -> None:
    for n, k in FIT_CELLS:
        geometry = TorusGeometry(n, FIT_M)
        seed = cell_seed(MOMENT_SEED_TAG, n, FIT_M, k)
        coeffs = fit_identity_coefficients(geometry, k, FIT_BUDGET, seed, FIT_HELDOUT)
        path = GOLDEN_DIR / f"h_coeffs_{n}_{k}.json"
        path.write_text(json.dumps(coeffs.to_json_dict(), sort_keys=True, indent=2) + "\n")
        print(f"wrote {path.name}: residual={coeffs.residual:.3e}")


def make_moment_baselines() -> None:
    norm = as_norm(MOMENT_Q)
    cells = []
    for n, m, k in MOMENT_CELLS:
        geometry = TorusGeometry(n, m)
        rng = np.random.default_rng([MOMENT_SEED_TAG, n, m, k])
        pairs = [(i, l) for i in range(n) for l in range(i + 1)]
        smoothing_sup = 0.0
        moment_sup = {pair: 0.0 for pair in pairs}
        for _ in range(MOMENT_TABLES):
            f = FunctionTable.random_gaussian(geometry, 1, rng)
            ratio = naive_smoothing_ratio(f, k, norm, MOMENT_P)
            if ratio is not None:
                smoothing_sup = max(smoothing_sup, ratio)
            for pair in pairs:
                rep = decomposition_moment(f, pair[0], pair[1], k, norm, MOMENT_P)
                if rep.ratio is not None:
                    moment_sup[pair] = max(moment_sup[pair], rep.ratio)
        cells.append(
            {
                "n": n,
                "m": m,
                "k": k,
                "smoothing_sup": smoothing_sup,
                "moment_sup": {f"{i},{l}": v for (i, l), v in moment_sup.items()},
            }
        )
        print(f"cell ({n},{m},{k}): smoothing_sup={smoothing_sup:.6f}")
    payload = {
        "protocol": {
            "seed_tag": MOMENT_SEED_TAG,
            "tables_per_cell": MOMENT_TABLES,
            "p": MOMENT_P,
            "q": MOMENT_Q,
            "d": 1,
            "rng": "default_rng([seed_tag, n, m, k])",
        },
        "cells": cells,
    }
    path = GOLDEN_DIR / "moment_baselines.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"wrote {path.name}")


if __name__ == "__main__":
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    make_fit_goldens()
    make_moment_baselines()
