"""Experiment orchestration: q-sweeps, scaling fits, density estimates.

A sweep writes one CSV per q value plus a manifest JSON recording seeds,
package version and wall-clock times; the manifest is written last and
atomically, so its presence certifies a complete sweep.  Fits regress the
log of a measured time against a fixed family of predictors in q and
report every fit, flagging a winner by R².
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import __version__
from .bootstrap import median_bootstrap_time
from .exact import build_generator, mean_hitting, spectral_gap
from .families import UpdateFamily, load_family
from .geometry import Region
from .kcm import (
    SimParams,
    batch_tau0,
    east_chain_region,
    frozen_boundary_for,
)

PREDICTORS = {
    "log_sq": lambda q: math.log(q) ** 2,
    "inv_q": lambda q: 1.0 / q,
    "log_sq_over_q": lambda q: math.log(q) ** 2 / q,
    "log_4_over_q_sq": lambda q: math.log(q) ** 4 / q ** 2,
}


def thread_budget() -> int:
    """Worker cap from KCMLAB_THREADS; execution here is serial, the budget
    is recorded in manifests for reproducibility."""
    try:
        return max(1, int(os.environ.get("KCMLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    kind: str  # kcm | bootstrap | exact
    family: str
    qs: List[float]
    box: int
    trials: int = 100
    t_max: float = 1e5
    seed: int = 0
    persistence: bool = False
    out_dir: str = "."

    def __post_init__(self):
        if self.kind not in ("kcm", "bootstrap", "exact"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.qs:
            raise ValueError("q list must be nonempty")
        for q in self.qs:
            if not 0.0 < q < 1.0:
                raise ValueError(f"q={q} outside (0,1)")
        self.qs = sorted(self.qs, reverse=True)


def csv_header_comment(seed: int) -> str:
    return f"# kcm-lab v{__version__} seed={seed}"


def region_for(family: UpdateFamily, box: int) -> Region:
    """Simulation window with the tracked origin at (0,0): a left-anchored
    chain for east1d, a lower-left-anchored square otherwise."""
    if family.name == "east1d":
        return east_chain_region(box)
    return Region.rectangle(-box + 1, 0, -box + 1, 0)


def _write_kcm_csv(path: str, config: ExperimentConfig, q: float) -> Dict[str, object]:
    fam = load_family(config.family)
    region = region_for(fam, config.box)
    boundary = frozen_boundary_for(fam, region)
    params = SimParams(
        family=fam, q=q, region=region, boundary=boundary,
        t_max=config.t_max, seed=config.seed,
    )
    results, summary = batch_tau0(params, config.trials, persistence=config.persistence)
    with open(path, "w") as fh:
        fh.write(csv_header_comment(config.seed) + "\n")
        fh.write("trial,seed,q,tau0,censored,events,legal_updates\n")
        for trial, r in enumerate(results):
            fh.write(
                f"{trial},{config.seed},{q:.17g},{r.tau0:.17g},"
                f"{int(r.censored)},{r.events},{r.legal_updates}\n"
            )
    return {
        "median": summary.median,
        "mean": summary.mean,
        "censor_fraction": summary.censor_fraction,
        "standard_error": summary.standard_error,
    }


def _write_bootstrap_csv(path: str, config: ExperimentConfig, q: float) -> Dict[str, object]:
    fam = load_family(config.family)
    out = median_bootstrap_time(fam, q, config.box, config.trials, config.seed)
    with open(path, "w") as fh:
        fh.write(csv_header_comment(config.seed) + "\n")
        fh.write("trial,seed,q,steps,censored\n")
        for trial, t in enumerate(out["times"]):
            censored = int(math.isinf(t))
            val = "inf" if censored else f"{t:.17g}"
            fh.write(f"{trial},{config.seed},{q:.17g},{val},{censored}\n")
    return {
        "median": out["median"],
        "q1": out["q1"],
        "q3": out["q3"],
        "censored": out["censored"],
        "censor_fraction": out["censored"] / out["trials"],
    }


def exact_report(family: UpdateFamily, box: int, q: float) -> Dict[str, object]:
    region = region_for(family, box)
    boundary = frozen_boundary_for(family, region)
    gen = build_generator(family, region, q, exterior=boundary)
    sg = spectral_gap(gen)
    mh = mean_hitting(gen)
    return {
        "gap": sg["gap"],
        "t_rel": sg["t_rel"],
        "e_mu_tau0": mh["e_mu_tau0"],
        "ratio_check": bool(q * mh["e_mu_tau0"] <= sg["t_rel"] * (1 + 1e-12)),
        "residuals": {"eigen": sg["residual"], "hitting": mh["residual"]},
    }


def _write_exact_json(path: str, config: ExperimentConfig, q: float) -> Dict[str, object]:
    fam = load_family(config.family)
    report = exact_report(fam, config.box, q)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


_RUNNERS = {
    "kcm": (_write_kcm_csv, "csv"),
    "bootstrap": (_write_bootstrap_csv, "csv"),
    "exact": (_write_exact_json, "json"),
}


def run_sweep(config: ExperimentConfig) -> Dict[str, object]:
    """One output file per q plus an atomically written manifest."""
    os.makedirs(config.out_dir, exist_ok=True)
    runner, ext = _RUNNERS[config.kind]
    cells = []
    ok = True
    for q in config.qs:
        fname = f"{config.kind}_q{q:.4f}.{ext}"
        path = os.path.join(config.out_dir, fname)
        t0 = time.monotonic()
        try:
            summary = runner(path, config, q)
            cells.append({
                "q": q, "file": fname, "status": "ok",
                "wall_seconds": time.monotonic() - t0, "summary": summary,
            })
        except Exception as exc:  # partial failure stays in the manifest
            ok = False
            cells.append({
                "q": q, "file": fname, "status": "error",
                "wall_seconds": time.monotonic() - t0, "error": str(exc),
            })
    manifest = {
        "version": __version__,
        "kind": config.kind,
        "family": config.family,
        "seed": config.seed,
        "box": config.box,
        "trials": config.trials,
        "t_max": config.t_max,
        "persistence": config.persistence,
        "threads": thread_budget(),
        "status": "ok" if ok else "partial-failure",
        "cells": cells,
    }
    fd, tmp = tempfile.mkstemp(dir=config.out_dir, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, os.path.join(config.out_dir, "manifest.json"))
    return manifest


@dataclass
class FitReport:
    fits: Dict[str, Dict[str, float]]
    winner: str
    n_points: int
    excluded: int

    def to_json(self) -> str:
        return json.dumps(
            {"fits": self.fits, "winner": self.winner,
             "n_points": self.n_points, "excluded": self.excluded},
            indent=2,
        )


def fit_scaling(points: Sequence[Tuple[float, float]]) -> FitReport:
    """Least squares of log(time) against each predictor of q.

    Nonpositive or nonfinite times are excluded (and counted); at least
    three usable points are required.  The winner is the predictor with the
    highest R², or "indeterminate" when even the best R² is below 0.5.
    """
    usable = [(q, t) for q, t in points if math.isfinite(t) and t > 0]
    excluded = len(points) - len(usable)
    if len(usable) < 3:
        raise ValueError(f"need >= 3 usable points, have {len(usable)}")
    y = np.array([math.log(t) for _, t in usable])
    fits: Dict[str, Dict[str, float]] = {}
    for name, fn in PREDICTORS.items():
        x = np.array([fn(q) for q, _ in usable])
        slope, intercept = np.polyfit(x, y, 1)
        pred = slope * x + intercept
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
        fits[name] = {"slope": float(slope), "intercept": float(intercept),
                      "r_squared": max(0.0, min(1.0, r2))}
    winner = max(fits, key=lambda k: fits[k]["r_squared"])
    if fits[winner]["r_squared"] < 0.5:
        winner = "indeterminate"
    return FitReport(fits=fits, winner=winner, n_points=len(usable), excluded=excluded)


def medians_from_manifest(manifest: Dict[str, object],
                          max_censored: float = 0.2) -> List[Tuple[float, float]]:
    """(q, median) pairs from a sweep manifest; censored-heavy cells are
    dropped since their medians are biased."""
    points = []
    for cell in manifest["cells"]:
        if cell["status"] != "ok":
            continue
        s = cell["summary"]
        if s.get("censor_fraction", 0.0) > max_censored:
            continue
        points.append((cell["q"], s["median"]))
    return points
