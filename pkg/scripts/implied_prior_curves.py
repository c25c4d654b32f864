"""Implied prior densities of phi for the local-level model under each scaling."""
import argparse

import numpy as np

from lgmstd.effects import make_rw
from lgmstd.priors import PRIOR_PRESETS, effective_constant, implied_phi_density
from lgmstd.standardize import standardize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=25)
    ap.add_argument("--grid", type=int, default=199)
    ap.add_argument("--out", default="implied_priors.csv")
    args = ap.parse_args()
    s = standardize(make_rw(args.K, 1), with_reference=True)
    print(f"C = {s.C:.4f}, sigma2_ref = {s.sigma2_ref:.4f}")
    phi = np.linspace(0, 1, args.grid + 2)[1:-1]
    cols, names = [phi], ["phi"]
    for name, make in PRIOR_PRESETS.items():
        for scaling in ("expectation", "geometric_mean", "none"):
            C = effective_constant(scaling, s.C, s.sigma2_ref)
            cols.append(implied_phi_density(make(), C, phi))
            names.append(f"{name}_{scaling}")
    np.savetxt(args.out, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.6g")


if __name__ == "__main__":
    main()
