#!/usr/bin/env python3
"""Generate frozen test fixtures using independent reference implementations.

Outputs (committed under crates/core/tests/data/):
  angle_oracle.json  -- random unit vectors with gaze angles evaluated in
                        50-digit arithmetic via mpmath
  ttest_oracle.json  -- fixed datasets with paired/Welch/pooled t statistics
                        and two-sided p-values from scipy.stats

Run once; the JSON files are checked in so the Rust test suite does not
depend on Python.
"""

import json
import math
import os
import random

import mpmath
from scipy import stats

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data")

mpmath.mp.dps = 50
DEG = mpmath.mpf(180) / mpmath.pi


def gaze_angles_hp(x, y, z):
    """Horizontal/vertical gaze angles (degrees) at 50-digit precision."""
    mx, my, mz = mpmath.mpf(x), mpmath.mpf(y), mpmath.mpf(z)
    theta_h = DEG * mpmath.atan2(mx, mpmath.sqrt(my * my + mz * mz))
    theta_v = DEG * mpmath.atan2(my, mz)
    return theta_h, theta_v


def gen_angle_oracle(n=1000, seed=20240917):
    rng = random.Random(seed)
    cases = []
    for _ in range(n):
        # uniform direction on the sphere; forward hemisphere biased is not
        # needed since atan2 is defined everywhere
        while True:
            v = [rng.gauss(0.0, 1.0) for _ in range(3)]
            norm = math.sqrt(sum(c * c for c in v))
            if norm > 1e-3:
                break
        v = [c / norm for c in v]
        th, tv = gaze_angles_hp(*v)
        cases.append({
            "x": v[0], "y": v[1], "z": v[2],
            "theta_h": float(mpmath.nstr(th, 20)),
            "theta_v": float(mpmath.nstr(tv, 20)),
        })
    return cases


def summarize(a):
    return [float(x) for x in a]


def gen_ttest_oracle(seed=987654321):
    rng = random.Random(seed)
    datasets = []
    # 10 paired datasets of assorted sizes and effect sizes
    for i in range(10):
        n = rng.choice([5, 8, 12, 20, 30, 45, 60])
        mu_shift = rng.uniform(-1.0, 1.0)
        a = [rng.gauss(0.0, 1.0) for _ in range(n)]
        b = [ai + mu_shift + rng.gauss(0.0, 0.8) for ai in a]
        t, p = stats.ttest_rel(a, b)
        datasets.append({
            "kind": "paired",
            "a": summarize(a),
            "b": summarize(b),
            "t": float(t),
            "p": float(p),
            "df": float(n - 1),
        })
    # 10 two-sample datasets: store Welch and pooled results
    for i in range(10):
        na = rng.choice([5, 10, 17, 25, 40])
        nb = rng.choice([6, 9, 20, 33, 50])
        mu_b = rng.uniform(-1.5, 1.5)
        sd_b = rng.uniform(0.5, 2.5)
        a = [rng.gauss(0.0, 1.0) for _ in range(na)]
        b = [rng.gauss(mu_b, sd_b) for _ in range(nb)]
        tw, pw = stats.ttest_ind(a, b, equal_var=False)
        tp, pp = stats.ttest_ind(a, b, equal_var=True)
        va = stats.tvar(a)
        vb = stats.tvar(b)
        df_w = (va / na + vb / nb) ** 2 / (
            (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
        )
        datasets.append({
            "kind": "two_sample",
            "a": summarize(a),
            "b": summarize(b),
            "welch_t": float(tw),
            "welch_p": float(pw),
            "welch_df": float(df_w),
            "pooled_t": float(tp),
            "pooled_p": float(pp),
            "pooled_df": float(na + nb - 2),
        })
    return datasets


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    angle = gen_angle_oracle()
    with open(os.path.join(OUT_DIR, "angle_oracle.json"), "w") as f:
        json.dump(angle, f, indent=None, separators=(",", ":"))
        f.write("\n")
    tt = gen_ttest_oracle()
    with open(os.path.join(OUT_DIR, "ttest_oracle.json"), "w") as f:
        json.dump(tt, f, indent=None, separators=(",", ":"))
        f.write("\n")
    print(f"wrote {len(angle)} angle cases, {len(tt)} t-test datasets to {OUT_DIR}")


if __name__ == "__main__":
    main()
