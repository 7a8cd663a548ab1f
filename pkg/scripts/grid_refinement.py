"""Amplitude norm of the A0 = 0.43 phantom under grid refinement.

    python scripts/grid_refinement.py 2 1.3333 1 0.6667
"""

import argparse

import numpy as np

from tomolab.background import Wavenumber
from tomolab.forward import forward_amplitude
from tomolab.metrics import amplitude_norm
from tomolab.model import Grid2D, PhantomSpec, build_phantom


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("steps", nargs="*", type=float, default=[2.0, 4 / 3, 1.0, 2 / 3])
    args = p.parse_args()
    k = Wavenumber.from_wavelength(8.0)
    angles = 2 * np.pi * np.arange(60) / 60
    prev = None
    for h in args.steps:
        grid = Grid2D.centered(int(np.ceil(57 / h)), h, radius=28.0)
        norm = 3 * np.pi * amplitude_norm(forward_amplitude(build_phantom(PhantomSpec.two_blob(0.43), k, grid), angles))
        change = "" if prev is None else f"  change {abs(norm - prev) / norm:.2%}"
        print(f"h={h:.4f} cells={grid.n_active:5d} 3pi|f|={norm:.4f}{change}")
        prev = norm


if __name__ == "__main__":
    main()
