#!/usr/bin/env python3
"""Fractions of learning runs whose mechanism reaches the perfect-knowledge
i-QoS within 0.05, as a function of the sample budget."""

import argparse
import sys

from bpviral.wm import PostModel, UserMix, design_eh2, learned_design
from bpviral.wm_dynamics import LearnConfig, learn_wm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--budgets", default="10000,25000,50000,75000,100000")
    ap.add_argument("--mua", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=61_000)
    args = ap.parse_args(argv)

    post = PostModel(m_f=30, eta_f=0.52, eta_r=0.4, eta_a=0.55, gamma=0.1,
                     rho=0.9, alpha_x_f=0.3, alpha_y_f=0.225,
                     alpha_x_r=0.12, alpha_y_r=0.09)
    mix = UserMix(mu0=0.35 - args.mua, mu1=0.15, mu2=0.5, mua=args.mua)
    perfect = design_eh2(post, mix, 0.05, iqos=True)
    print(f"perfect-knowledge i-QoS: {perfect.iqos:.4f}")
    kappa = 1 - post.alpha_y_r / post.alpha_x_r + 1e-3
    for budget in (int(b) for b in args.budgets.split(",")):
        cfg = LearnConfig(budget=budget, kappa=kappa)
        hits = 0
        for s in range(args.runs):
            res = learn_wm(cfg, post, mix, target_beta=0.05, seed=args.seed + s)
            d = learned_design(res.w, res.b, post, mix, 0.05, iqos=True)
            hits += abs(d.iqos - perfect.iqos) <= 0.05
        print(f"budget {budget:>7d}: fraction within 0.05 = {hits / args.runs:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
