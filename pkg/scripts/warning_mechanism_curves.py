#!/usr/bin/env python3
"""Sweep the adversary fraction and tabulate i-QoS for all four warning
mechanisms, for both the smart-user and naive-user benchmark configs.

Writes wm_iqos_curves.csv with columns profile,mua,eo,ea,eh,eh2.
"""

import argparse
import sys

import numpy as np

from bpviral.wm import (PostModel, UserMix, design_ea, design_eh, design_eh2,
                        optimize_eo)

PROFILES = {
    "smart": (PostModel(m_f=28, eta_f=0.08, eta_r=0.05, eta_a=0.55, gamma=0.1,
                        rho=0.9, alpha_x_f=0.85, alpha_y_f=0.6375,
                        alpha_x_r=0.3, alpha_y_r=0.09),
              dict(mu1=0.0, mu2=0.5, delta=0.02)),
    "naive": (PostModel(m_f=30, eta_f=0.52, eta_r=0.4, eta_a=0.55, gamma=0.1,
                        rho=0.9, alpha_x_f=0.3, alpha_y_f=0.225,
                        alpha_x_r=0.12, alpha_y_r=0.09),
              dict(mu1=0.15, mu2=0.5, delta=0.05)),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="wm_iqos_curves.csv")
    ap.add_argument("--mua-max", type=float, default=0.3)
    ap.add_argument("--steps", type=int, default=13)
    args = ap.parse_args(argv)

    rows = []
    for name, (post, cfg) in PROFILES.items():
        mu1, mu2, delta = cfg["mu1"], cfg["mu2"], cfg["delta"]
        for mua in np.linspace(0.0, args.mua_max, args.steps):
            mua = round(float(mua), 6)
            mix = UserMix(mu0=1 - mu1 - mu2 - mua, mu1=mu1, mu2=mu2, mua=mua)
            vals = {}
            vals["eo"] = optimize_eo(post, mix, delta).iqos
            if mua > 0:
                vals["ea"] = design_ea(post, mix, delta)[0].iqos
                vals["eh"] = design_eh(post, mix, delta).iqos
            else:
                vals["ea"] = vals["eh"] = vals["eo"]
            vals["eh2"] = design_eh2(post, mix, delta).iqos
            rows.append((name, mua, vals["eo"], vals["ea"], vals["eh"], vals["eh2"]))
            print(f"{name} mua={mua:.3f}: " +
                  " ".join(f"{k}={v:.4f}" for k, v in vals.items()))
    with open(args.out, "w") as fh:
        fh.write("profile,mua,eo,ea,eh,eh2\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
