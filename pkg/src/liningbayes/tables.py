"""Comma-separated tables and JSON records written by the pipeline.

Floats are written with ``repr`` (shortest round-trip form), so reading a
table back gives the exact values and reruns produce identical bytes.

Column layouts
--------------
samples.csv      iteration, chain, q1 .. qn
summary.csv      angle_deg, mean_kPa, std_kPa, p05, p50, p95
density.csv      angle_deg, pressure_bin_kPa, probability
observations.csv baseline_angle_deg, reading_mm, sigma_mm
force.csv        angle_deg, force_kN, sigma_kN          (only with a force reading)
diagnostics.csv  iteration, parameter, rhat
acceptance.csv   iteration, accepted
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .demc import ChainEnsemble, PosteriorSummary
from .response import ObservationSet

__all__ = [
    "fmt",
    "write_table",
    "read_table",
    "write_json",
    "write_samples",
    "read_samples",
    "write_summary",
    "write_density",
    "write_observations",
    "read_observations",
    "write_diagnostics",
    "write_acceptance",
]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path):
    """Header and a float array of the rows."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r if row]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def write_json(path, record) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_samples(path, ensemble: ChainEnsemble) -> Path:
    hist = ensemble.history
    n = ensemble.n_params
    header = ["iteration", "chain"] + [f"q{k + 1}" for k in range(n)]

    def rows():
        for s, it in enumerate(ensemble.history_iterations):
            for c in range(ensemble.n_chains):
                yield [int(it), c, *hist[s, c]]

    return write_table(path, header, rows())


def read_samples(path):
    """History array (S, T, n) and its iteration numbers from samples.csv."""
    header, data = read_table(path)
    n = len(header) - 2
    iters = data[:, 0].astype(int)
    T = int(data[:, 1].max()) + 1
    S = data.shape[0] // T
    hist = data[:, 2:].reshape(S, T, n)
    return hist, iters.reshape(S, T)[:, 0]


def write_summary(path, summary: PosteriorSummary) -> Path:
    rows = zip(summary.angles, summary.mean, summary.std, *summary.quantiles)
    return write_table(path, ["angle_deg", "mean_kPa", "std_kPa", "p05", "p50", "p95"], rows)


def write_density(path, summary: PosteriorSummary) -> Path:
    centers = summary.bin_centers

    def rows():
        for a, col in zip(summary.angles, summary.density):
            for c, p in zip(centers, col):
                yield a, c, p

    return write_table(path, ["angle_deg", "pressure_bin_kPa", "probability"], rows())


def write_observations(directory, obs: ObservationSet):
    directory = Path(directory)
    paths = [
        write_table(
            directory / "observations.csv",
            ["baseline_angle_deg", "reading_mm", "sigma_mm"],
            ((a, d, obs.sigma) for a, d in zip(obs.angles, obs.readings)),
        )
    ]
    if obs.has_force:
        paths.append(
            write_table(
                directory / "force.csv",
                ["angle_deg", "force_kN", "sigma_kN"],
                [(obs.force_angle, obs.force, obs.force_sigma)],
            )
        )
    return paths


def read_observations(directory, sigma: float | None = None) -> ObservationSet:
    """Observation set from observations.csv (+ force.csv when present)."""
    directory = Path(directory)
    _, data = read_table(directory / "observations.csv")
    kwargs = {}
    force_path = directory / "force.csv"
    if force_path.exists():
        _, f = read_table(force_path)
        kwargs = dict(force_angle=f[0, 0], force=f[0, 1], force_sigma=f[0, 2])
    s = float(data[0, 2]) if sigma is None else sigma
    return ObservationSet(angles=data[:, 0], readings=data[:, 1], sigma=s, **kwargs)


def write_diagnostics(path, ensemble: ChainEnsemble) -> Path:
    def rows():
        for it, r in zip(ensemble.rhat_iterations, ensemble.rhat):
            for k, v in enumerate(r):
                yield int(it), k + 1, v

    return write_table(path, ["iteration", "parameter", "rhat"], rows())


def write_acceptance(path, ensemble: ChainEnsemble) -> Path:
    rows = ((t + 1, int(a)) for t, a in enumerate(ensemble.accepted))
    return write_table(path, ["iteration", "accepted"], rows)
