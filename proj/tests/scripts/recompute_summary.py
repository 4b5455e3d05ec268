#!/usr/bin/env python3
"""Recompute summary.csv from results.csv with pandas/numpy and compare.

Runs a small scenario through the command-line tool, then rebuilds every
summary row independently: type-7 quantiles (numpy's "linear" method) over
non-diverged replicates, with the dispersion RMSE first cut at its own 95th
percentile when the run truncates.
"""
import argparse
import json
import math
import pathlib
import shutil
import subprocess
import sys

import numpy as np
import pandas as pd

CONFIG = {
    "family": "gaussian",
    "n": 60,
    "replicates": 11,
    "cv_samples": 2,
    "cv_folds": 3,
    "mean_knots": 8,
    "disp_knots": 6,
    "grid_intervals": 50,
    "optim": {"max_iterations": 1500},
}


def run(tool, workdir, name, truncate):
    cfg = dict(CONFIG, truncate_disp=truncate)
    path = workdir / f"{name}.json"
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    out = workdir / name
    subprocess.run([tool, "-q", "scenario", "-c", str(path), "-s", "17", "-m", "bernoulli,pmle",
                    "-o", str(out)], check=True, stdout=subprocess.DEVNULL)
    return pd.read_csv(out / "results.csv"), pd.read_csv(out / "summary.csv")


def expected_rows(results, truncate):
    rows = []
    for (method, n), g in results.groupby(["method", "n"], sort=False):
        ok = g[g["diverged"] == 0]
        for measure in ("rmse_mean", "rmse_disp"):
            v = ok[measure].to_numpy(dtype=float)
            cut = measure == "rmse_disp" and truncate
            if cut and v.size:
                v = v[v <= np.quantile(v, 0.95, method="linear")]
            q = np.quantile(v, [0.25, 0.5, 0.75], method="linear") if v.size else [math.nan] * 3
            rows.append({"method": method, "n": n, "measure": measure, "count": v.size,
                         "min": v.min() if v.size else math.nan, "q25": q[0], "median": q[1],
                         "q75": q[2], "max": v.max() if v.size else math.nan,
                         "truncated": int(cut)})
    return pd.DataFrame(rows)


def compare(got, want, label):
    bad = []
    if len(got) != len(want):
        return [f"{label}: {len(got)} summary rows, expected {len(want)}"]
    for (_, g), (_, w) in zip(got.iterrows(), want.iterrows()):
        for key in ("method", "n", "measure", "count", "truncated"):
            if g[key] != w[key]:
                bad.append(f"{label}: {key} {g[key]} != {w[key]}")
        for key in ("min", "q25", "median", "q75", "max"):
            a, b = float(g[key]), float(w[key])
            if not (math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12) or (math.isnan(a) and math.isnan(b))):
                bad.append(f"{label}: {g['method']} {g['measure']} {key} {a!r} != {b!r}")
    return bad


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tool", required=True)
    ap.add_argument("--workdir", required=True)
    args = ap.parse_args()
    workdir = pathlib.Path(args.workdir)
    shutil.rmtree(workdir, ignore_errors=True)
    workdir.mkdir(parents=True)

    problems = []
    for name, truncate in (("truncated", True), ("plain", False)):
        results, summary = run(args.tool, workdir, name, truncate)
        problems += compare(summary, expected_rows(results, truncate), name)
        if truncate:
            disp = summary[summary["measure"] == "rmse_disp"]
            if not (disp["count"] < 11).all():
                problems.append("truncation did not drop the top replicate")
    for p in problems:
        print("MISMATCH", p)
    print("summary recomputation:", "PASS" if not problems else "FAIL")
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
