"""Replicated simulation studies.

``local_level``: one noisy observation per level of a standardized RW1 on
1..25, true total variance one and signal share ``phi``; fitted under each
prior set and scaling strategy.

``spline``: linear trend plus ``cos(2 pi x)`` on uniform
covariates, fitted with the modified and the original P-spline structure.

Replicate ``i`` draws its data from ``make_rng(seed + i)``; the local-level
study reuses the same standard-normal draws across ``phi`` values.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .effects import make_rw
from .gmrf import covariance_factor
from .inference import GridOptions, LinearPlusSpline, LocalLevel, fit_grid
from .rng import make_rng
from .standardize import standardize

STUDIES = ("local_level", "spline")
# short identifiers accepted for the same two studies
STUDY_ALIASES = {"s51": "local_level", "s52": "spline"}


@dataclass
class SimulationConfig:
    study: str = "local_level"
    reps: int = 200
    seed: int = 0
    priors: tuple = ("ig", "pc", "vp")
    phis: tuple = (0.2, 0.5, 0.8)
    scalings: tuple = ("expectation", "geometric_mean", "none")
    modified: tuple = (True, False)
    K: int | None = None
    N: int = 300
    level: float = 0.9
    grid_points: int = 80
    grid_decades: float = 6.0
    jobs: int = 1

    def __post_init__(self):
        self.study = STUDY_ALIASES.get(self.study, self.study)
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}")
        if self.K is None:
            self.K = 25 if self.study == "local_level" else 10
        for name in ("priors", "phis", "scalings", "modified"):
            setattr(self, name, tuple(getattr(self, name)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_json(cls, text: str) -> "SimulationConfig":
        return cls(**json.loads(text))


def _covered(interval, truth):
    return bool(interval[0] <= truth <= interval[1])


def _replicate_local_level(cfg: SimulationConfig, i: int) -> list:
    rng = make_rng(cfg.seed + i)
    truth = standardize(make_rw(cfg.K, 1))
    L = covariance_factor(truth.covariance / truth.C)
    z_u = rng.standard_normal(L.shape[1])
    z_e = rng.standard_normal(cfg.K)
    model = LocalLevel(cfg.K)
    opts = GridOptions(cfg.grid_points, cfg.grid_decades)
    rows = []
    for phi in cfg.phis:
        y = np.sqrt(phi) * (L @ z_u) + np.sqrt(1 - phi) * z_e
        for prior in cfg.priors:
            for scaling in cfg.scalings:
                post = fit_grid(y, model, prior, scaling, opts=opts)
                ci_phi = post.interval("phi", cfg.level)
                ci_T = post.interval("T", cfg.level)
                rows.append({"replicate": i, "arm": f"{prior}/{scaling}", "prior": prior,
                             "scaling": scaling, "phi_true": phi,
                             "phi_hat": post.mean("phi"), "T_hat": post.mean("T"),
                             "covered_phi": _covered(ci_phi, phi),
                             "covered_T": _covered(ci_T, 1.0)})
    return rows


def _replicate_spline(cfg: SimulationConfig, i: int) -> list:
    rng = make_rng(cfg.seed + i)
    beta = np.sqrt(0.5)
    x = rng.uniform(0.0, 1.0, cfg.N)
    y = (x - 0.5) * np.sqrt(12) * beta + np.cos(2 * np.pi * x) + rng.standard_normal(cfg.N)
    opts = GridOptions(cfg.grid_points, cfg.grid_decades)
    rows = []
    for modified in cfg.modified:
        model = LinearPlusSpline(cfg.K, modified)
        for prior in cfg.priors:
            post = fit_grid(y, model, prior, "expectation", x=x, opts=opts, coef_of=("t",))
            arm = f"{prior}/{'modified' if modified else 'original'}"
            rows.append({"replicate": i, "arm": arm, "prior": prior, "modified": modified,
                         "phi_true": 0.5, "phi_hat": post.mean("phi"), "T_hat": post.mean("T"),
                         "beta_hat": post.mean("t"),
                         "covered_phi": _covered(post.interval("phi", cfg.level), 0.5),
                         "covered_T": _covered(post.interval("T", cfg.level), 2.0)})
    return rows


def run_replicate(cfg: SimulationConfig, i: int) -> list:
    return (_replicate_local_level if cfg.study == "local_level" else _replicate_spline)(cfg, i)


@dataclass
class SimulationResult:
    config: SimulationConfig
    rows: list = field(default_factory=list)

    def column(self, name, **where):
        return np.array([r[name] for r in self.rows
                         if all(r[k] == v for k, v in where.items())])

    def fieldnames(self):
        base = ["replicate", "arm", "phi_true", "phi_hat", "T_hat"]
        if self.config.study == "spline":
            base.append("beta_hat")
        return base + ["covered_phi", "covered_T"]

    def to_csv(self, fh=None) -> str:
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.fieldnames()
        w.writerow(names)
        for r in self.rows:
            w.writerow([_fmt(r[n]) for n in names])
        return buf.getvalue() if fh is None else ""

    def summary(self) -> list:
        """Median bias and coverage per arm (and per phi for the local-level study)."""
        keys = []
        for r in self.rows:
            k = (r["arm"], r["phi_true"])
            if k not in keys:
                keys.append(k)
        out = []
        for arm, phi in keys:
            sel = [r for r in self.rows if r["arm"] == arm and r["phi_true"] == phi]
            row = {"arm": arm, "phi_true": phi, "n": len(sel),
                   "median_bias_phi": float(np.median([r["phi_hat"] - phi for r in sel])),
                   "coverage_phi": float(np.mean([r["covered_phi"] for r in sel])),
                   "coverage_T": float(np.mean([r["covered_T"] for r in sel]))}
            if "beta_hat" in sel[0]:
                row["median_abs_bias_beta"] = float(
                    np.median([abs(r["beta_hat"] - np.sqrt(0.5)) for r in sel]))
            out.append(row)
        return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return v


def run_study(cfg: SimulationConfig) -> SimulationResult:
    """Run all replicates; rows come back ordered by replicate index."""
    idx = range(cfg.reps)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            chunks = list(pool.map(run_replicate, [cfg] * cfg.reps, idx))
    else:
        chunks = [run_replicate(cfg, i) for i in idx]
    return SimulationResult(cfg, [r for chunk in chunks for r in chunk])
