"""Run the figure presets and print one summary line per run.

    python scripts/run_figures.py --out runs fig2 fig3 fig4

Each preset writes its report, convergence curve and field dumps to
``OUT/<preset>``. With no preset names every preset except ``custom`` runs.
"""

import argparse
import os
import time

from tomolab.cli import PRESETS, run_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("presets", nargs="*", default=[n for n in PRESETS if n != "custom"])
    p.add_argument("--out", default="runs")
    args = p.parse_args()
    for name in args.presets:
        t0 = time.perf_counter()
        code, rep = run_scenario(name, out_dir=os.path.join(args.out, name))
        if code:
            print(f"{name}: failed with {rep['error']}: {rep['message']}")
            continue
        m = rep["metrics"]
        print(
            f"{name:11s} {m['status']:17s} born dv={m['born_delta_v']:.4f} "
            f"final dv={m['final_delta_v']:.4f} df={m['final_delta_f']:.2e} "
            f"(n={m['best_iteration']}) 3pi|f|={m['amplitude_norm_times_3pi'][0]:.2f} "
            f"{time.perf_counter() - t0:.0f}s"
        )


if __name__ == "__main__":
    main()
