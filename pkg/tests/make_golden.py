"""Regenerate the shipped bump sample and its golden values.

Run ``python3 tests/make_golden.py`` from the repository root. The grid
values are regression anchors; the radial values are the independent oracle.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracles import bump, radial_ladder_max, radial_morrey_sup, radial_weighted_norm  # noqa: E402

from elmorrey.fieldio import write_field  # noqa: E402
from elmorrey.grid import Grid3, ScalarField, cutoff_profile  # noqa: E402
from elmorrey.morrey import MorreyParams, geometric_ladder, local_morrey_norm, weighted_lebesgue_norm  # noqa: E402

N, BOX, RHO, P, GAMMA = 32, 4.0, 3.0, 3.0, 1.0
DATA = Path(__file__).resolve().parents[1] / "src" / "elmorrey" / "data"


def main():
    grid = Grid3(N, BOX)
    f = ScalarField(grid, cutoff_profile(grid.radius / RHO)[0])
    write_field(DATA / "bump.elf3", f)
    radii = geometric_ladder(BOX)
    params = MorreyParams(P, GAMMA)

    def prof(r):
        return bump(r / RHO)

    breaks = (RHO / 2, RHO)
    golden = {
        "field": {"n": N, "box": BOX, "rho": RHO, "profile": "bump(|x|/rho)"},
        "p": P,
        "gamma": GAMMA,
        "radii": [float(r) for r in radii],
        "local_norm": local_morrey_norm(f, params, radii).value,
        "weighted_norm": weighted_lebesgue_norm(f, P, GAMMA),
        "oracle": {
            "local_sup": radial_morrey_sup(prof, P, GAMMA, float(radii[-1]), breaks),
            "local_ladder": radial_ladder_max(prof, P, GAMMA, radii, breaks),
            "weighted": radial_weighted_norm(prof, P, GAMMA, RHO, breaks),
        },
    }
    (DATA / "bump.golden.json").write_text(json.dumps(golden, indent=2) + "\n")
    print(json.dumps(golden, indent=2))


if __name__ == "__main__":
    main()
