"""Print the scale function W of a configured model next to its limits.

    python3 scripts/scale_table.py configs/model_a.json [--x-max 5] [--every 0.25]
"""
import argparse

import numpy as np

from levybranch.config import RunConfig
from levybranch.levy_model import phi, scale_W


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--x-max", type=float)
    ap.add_argument("--every", type=float, default=0.25)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    model = cfg.model
    x_max = args.x_max or cfg.x_max
    W = scale_W(model, x_max, tol=cfg.tol, step=cfg.step)
    beta0 = phi(model, 0.0)
    print(f"# c={model.c:g} <Pi,rho>={model.measure.mean():g} Phi(0)={beta0:.10g} "
          f"terms={W.n_terms} truncation bound={W.truncation_bound:.3g}")
    print("x\tW(x)\texp(-Phi(0) x) W(x)")
    for x in np.arange(0.0, x_max + 1e-12, args.every):
        w = float(W(x))
        print(f"{x:.4g}\t{w:.12g}\t{np.exp(-beta0 * x) * w:.12g}")


if __name__ == "__main__":
    main()
