"""Noisy single-frequency and multifrequency reconstructions of the
resolution phantom against the noiseless run.

    python scripts/noise_study.py --frequencies 40 --n-max 6
"""

import argparse
import time

from tomolab.cli import run_scenario


def summary(label, rep, t0):
    m = rep["metrics"]
    ns = max(m["noise_to_signal"]) if m["noise_to_signal"] else 0.0
    print(
        f"{label:26s} dv={m['final_delta_v']:.4f} (born {m['born_delta_v']:.4f}) "
        f"N/S={ns:.3f} {m['status']} {time.perf_counter() - t0:.0f}s"
    )
    return m["final_delta_v"]


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--frequencies", type=int, default=40)
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--band", type=float, default=1.1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    t0 = time.perf_counter()
    clean = summary("noiseless", run_scenario("fig5-noise", {"noise": {"level": 0.0}})[1], t0)
    t0 = time.perf_counter()
    noisy = summary("noisy, 1 frequency", run_scenario("fig5-noise", seed=args.seed)[1], t0)
    multi = {
        "medium": {"n_frequencies": args.frequencies, "band": args.band},
        "inversion": {"n_max": args.n_max},
    }
    t0 = time.perf_counter()
    avg = summary(f"noisy, {args.frequencies} frequencies", run_scenario("fig5-noise", multi, seed=args.seed)[1], t0)
    print(f"ratios to noiseless: single {noisy / clean:.2f}, averaged {avg / clean:.2f}")


if __name__ == "__main__":
    main()
