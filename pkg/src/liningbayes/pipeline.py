"""End-to-end experiments driven by a :class:`~liningbayes.scenario.Scenario`.

Every operation writes comma-separated tables plus a ``manifest.json`` into
its output directory. The manifest holds the resolved scenario, the
operation and its arguments, the derived seeds, the file list and wall-clock
timings; :func:`replay` re-executes it, and apart from the timings the
outputs come out byte-for-byte identical.

Seeds
-----
All randomness derives from the scenario's master seed through labelled
sub-streams (:func:`~liningbayes.scenario.derive_seed`):

* ``"observations"``: observation noise, shared by every case so that the
  data ladder uses nested subsets of one noisy record, and the noise ladder
  scales one noise pattern;
* ``"sampler"``: DE-MC streams of case inversions (paired comparisons);
* ``("trial", n)`` and ``("preset", label)``: knot trials and preset runs.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import lsq_linear, minimize

from . import fem, tables
from .bayes import LikelihoodSpec, LogPosterior
from .demc import ChainEnsemble, PosteriorSummary, run, summarize_samples
from .fem import ConfigurationError
from .metrics import MetricReport, monitoring_angles, report as metric_report, total_variation
from .parameterization import PressureField, interpolation_matrix
from .response import (
    ObservationSet,
    ResponseOperator,
    baselines_at,
    convergence,
    full_baselines,
    select_baselines,
    synthesize_observations,
)
from .scenario import CaseSpec, Scenario, derive_seed, load_scenario

__all__ = [
    "RHAT_LIMIT",
    "ConvergenceWarning",
    "Study",
    "RunRecord",
    "BaselineResult",
    "TrialReport",
    "run_forward",
    "weighted_system",
    "synthesize",
    "run_inversion",
    "deterministic_baseline",
    "knot_count_trial",
    "sensitivity_presets",
    "report",
    "resummarize",
    "replay",
]

log = logging.getLogger(__name__)

RHAT_LIMIT = 1.2
MANIFEST = "manifest.json"


class ConvergenceWarning(UserWarning):
    """Some chain parameter has R-hat at or above the convergence limit."""


class Study:
    """Scenario plus the meshes, truth and operators derived from it (cached)."""

    def __init__(self, scenario):
        self.scenario = load_scenario(scenario)
        self._operators = {}

    @cached_property
    def model(self) -> fem.LiningModel:
        return self.scenario.model()

    @cached_property
    def mesh(self) -> fem.Mesh:
        return fem.build_mesh(self.model)

    @cached_property
    def truth(self) -> PressureField | None:
        return self.scenario.truth()

    @cached_property
    def truth_model(self) -> fem.LiningModel:
        return self.scenario.truth_model()

    @cached_property
    def truth_mesh(self) -> fem.Mesh:
        return fem.build_mesh(self.truth_model)

    @cached_property
    def truth_solution(self) -> fem.SolveResult:
        self._require_truth()
        return fem.solve(self.truth_model, self.truth_mesh, self.truth)

    @cached_property
    def angles(self) -> np.ndarray:
        return monitoring_angles(int(self.scenario.raw["inversion"]["monitoring_points"]))

    def operator(self, n: int | None = None) -> ResponseOperator:
        n = self.scenario.n_knots if n is None else int(n)
        if n not in self._operators:
            self._operators[n] = ResponseOperator.build(self.model, self.mesh, n)
        return self._operators[n]

    def _require_truth(self):
        if self.truth is None:
            raise ConfigurationError("the scenario has no truth field")

    def truth_curves(self) -> dict:
        """Truth total and net pressure at the monitoring angles."""
        self._require_truth()
        total = self.truth(self.angles)
        reaction = fem.reaction_pressure(self.truth_solution, self.truth_model, self.truth_mesh)
        net_nodes = fem.net_pressure(self.truth, reaction)
        net = interpolation_matrix(self.truth_mesh.n_nodes, self.angles) @ net_nodes
        return {"total": total, "net": net}

    def net_matrix(self, n: int | None = None) -> np.ndarray:
        """Map from knots to net pressure at the monitoring angles."""
        nodes = self.operator(n).net_pressure_matrix()
        return interpolation_matrix(self.mesh.n_nodes, self.angles) @ nodes


@dataclass(eq=False)
class RunRecord:
    """Result of one inversion: summaries, scores, diagnostics and artifacts."""

    label: str
    scenario: dict = field(repr=False)
    observations: ObservationSet = field(repr=False)
    ensemble: ChainEnsemble = field(repr=False)
    summary: PosteriorSummary = field(repr=False)
    net_summary: PosteriorSummary | None = field(default=None, repr=False)
    metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def target_summary(self) -> PosteriorSummary:
        if self.scenario["inversion"]["target"] == "net" and self.net_summary is not None:
            return self.net_summary
        return self.summary

    @property
    def primary(self) -> MetricReport | None:
        """Scores of the scenario's target quantity (total or net)."""
        return self.metrics.get(self.scenario["inversion"]["target"])

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", False))


@dataclass(eq=False)
class BaselineResult:
    """Bounded least-squares inversion (the optimal solution, OS)."""

    knots: np.ndarray
    misfit: float
    rms_residual: float
    status: int
    message: str
    metrics: MetricReport | None = None
    files: list = field(default_factory=list)


@dataclass(eq=False)
class TrialReport:
    counts: list
    curves: dict
    successive_rmse: list
    tolerance: float
    stabilized_at: tuple | None
    chains: dict
    files: list = field(default_factory=list)


# --------------------------------------------------------------------------
# helpers


def _out_dir(study: Study, out, *parts) -> Path:
    base = Path(out) if out is not None else study.scenario.output_dir
    path = base.joinpath(*parts)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _relative(paths, root: Path) -> list:
    return sorted(str(Path(p).relative_to(root)) for p in paths)


def _write_manifest(root: Path, operation: str, args: dict, scenario: Scenario, seeds: dict,
                    files, timings: dict) -> Path:
    from . import __version__

    record = {
        "operation": operation,
        "arguments": args,
        "scenario": scenario.to_dict(),
        "seeds": seeds,
        "files": _relative(files, root),
        "timings": timings,
        "version": __version__,
    }
    return tables.write_json(root / MANIFEST, record)


def _scenario_from(study_or_scenario) -> Study:
    if isinstance(study_or_scenario, Study):
        return study_or_scenario
    return Study(study_or_scenario)


# --------------------------------------------------------------------------
# forward runs and observations


def run_forward(scenario, field: PressureField | None = None, out=None) -> dict:
    """Response of the scenario's lining to the truth field (or `field`).

    Writes ``nodes.csv`` (node_angle_deg, ux_mm, uy_mm, rotation_rad,
    radial_mm, hoop_kN, reaction_kPa, net_kPa) and ``convergence.csv``
    (baseline_angle_deg, convergence_mm); returns the same columns as arrays.
    """
    study = _scenario_from(scenario)
    t0 = time.perf_counter()
    q = field if field is not None else study.truth
    if q is None:
        raise ConfigurationError("forward run needs a truth field or an explicit field")
    model, mesh = study.model, study.mesh
    try:
        result = fem.solve(model, mesh, q)
    except fem.SingularSystemError as exc:
        raise fem.SingularSystemError(f"forward run of scenario {study.scenario.name!r}: {exc}") from exc
    u = result.nodal
    radial = fem.radial_displacements(result.displacements, mesh)
    hoop = fem.hoop_forces(result.element_forces)
    reaction = fem.reaction_pressure(result, model, mesh)
    net = fem.net_pressure(q, reaction)
    baselines = full_baselines(mesh)
    conv = convergence(result, mesh, baselines)
    out_tables = {
        "node_angle_deg": mesh.node_angles,
        "ux_mm": u[:, 0] * 1000.0,
        "uy_mm": u[:, 1] * 1000.0,
        "rotation_rad": u[:, 2],
        "radial_mm": radial * 1000.0,
        "hoop_kN": hoop,
        "reaction_kPa": reaction,
        "net_kPa": net,
        "baseline_angle_deg": baselines.angles,
        "convergence_mm": conv,
        "residual": result.residual,
    }
    if out is not None:
        root = _out_dir(study, out)
        node_cols = list(out_tables)[:8]
        files = [
            tables.write_table(root / "nodes.csv", node_cols,
                               zip(*(out_tables[c] for c in node_cols))),
            tables.write_table(root / "convergence.csv", ["baseline_angle_deg", "convergence_mm"],
                               zip(baselines.angles, conv)),
        ]
        args = {} if field is None else {"knots": [float(v) for v in field.knots]}
        _write_manifest(root, "forward", args, study.scenario, {}, files,
                        {"total_s": time.perf_counter() - t0})
    return out_tables


def synthesize(scenario, noise_std: float | None = None, out=None) -> ObservationSet:
    """Noisy readings on the scenario's full baseline set (plus the force).

    The truth is solved on the finer truth mesh and read at the inversion
    mesh's baseline angles. `noise_std` overrides the scenario's value while
    keeping the same noise seed.
    """
    study = _scenario_from(scenario)
    t0 = time.perf_counter()
    sc = study.scenario
    ob = sc.raw["observations"]
    noise = float(ob["noise_std"]) if noise_std is None else float(noise_std)
    chosen = select_baselines(full_baselines(study.mesh), sc.n_baselines)
    seed = derive_seed(sc.seed, "observations")
    force_angle = ob["force_angle"]
    force_noise = None
    if force_angle is not None:
        clean = fem.hoop_force_at(study.truth_solution, study.truth_mesh, float(force_angle))
        force_noise = float(ob["force_noise"]) * abs(clean)
    obs = synthesize_observations(
        study.truth, study.truth_model, study.truth_mesh,
        baselines_at(study.truth_mesh, chosen.angles), noise,
        force_angle=None if force_angle is None else float(force_angle),
        force_noise_std=force_noise, seed=seed, sigma=float(ob["sigma"]),
    )
    if out is not None:
        root = _out_dir(study, out)
        files = tables.write_observations(root, obs)
        args = {} if noise_std is None else {"noise_std": noise}
        _write_manifest(root, "synthesize", args, sc, {"observations": seed}, files,
                        {"total_s": time.perf_counter() - t0})
    return obs


def case_observations(observations: ObservationSet, study: Study, case: CaseSpec) -> ObservationSet:
    """Subset of a full observation record for one case of the plan."""
    mesh_set = baselines_at(study.mesh, observations.angles)
    chosen = select_baselines(mesh_set, case.baselines)
    obs = observations.subset(chosen.angles)
    return obs if case.force else obs.without_force()


# --------------------------------------------------------------------------
# Bayesian inversion


def _score(study: Study, summary: PosteriorSummary, curve: np.ndarray) -> MetricReport:
    return metric_report(summary.mean, curve, summary.std)


def invert_observations(study: Study, obs: ObservationSet, label: str, sampler_seed: int,
                        n_knots: int | None = None, use_likelihood: bool = True) -> RunRecord:
    """Sample the posterior for `obs` and summarize it (no files written)."""
    sc = study.scenario
    n = sc.n_knots if n_knots is None else int(n_knots)
    prior = sc.prior(n)
    cfg = sc.sampler(seed=sampler_seed)
    if cfg.n_chains < 2 * n:
        log.info("raising the chain count from %d to %d for %d knots", cfg.n_chains, 2 * n, n)
        cfg = sc.sampler(seed=sampler_seed, n_chains=2 * n)
    op = study.operator(n)
    lik = LikelihoodSpec(obs, op) if use_likelihood else None
    t0 = time.perf_counter()
    ens = run(LogPosterior(prior, lik), prior, cfg)
    t_sample = time.perf_counter() - t0

    final = ens.final_rhat()
    converged = bool(np.all(final < RHAT_LIMIT))
    if not converged:
        msg = (f"case {label}: R-hat reaches {final.max():.3f} (limit {RHAT_LIMIT}); "
               "summarizing anyway")
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
        log.warning(msg)

    t1 = time.perf_counter()
    samples = ens.samples()
    grid = sc.pressure_grid()
    summary = summarize_samples(samples, interpolation_matrix(n, study.angles), study.angles, grid)
    net_summary = None
    if sc.target == "net":
        net_summary = summarize_samples(samples, study.net_matrix(n), study.angles, grid)
    metrics = {}
    if study.truth is not None:
        truth = study.truth_curves()
        metrics["total"] = _score(study, summary, truth["total"])
        if net_summary is not None:
            metrics["net"] = _score(study, net_summary, truth["net"])
    diagnostics = {
        "acceptance_rate": ens.acceptance_rate(),
        "rhat_max": float(final.max()),
        "rhat_limit": RHAT_LIMIT,
        "converged": converged,
        "n_chains": cfg.n_chains,
        "iterations": cfg.iterations,
        "n_samples": summary.n_samples,
        "first_converged_iteration": _first_converged(ens),
    }
    return RunRecord(
        label=label, scenario=sc.to_dict(), observations=obs, ensemble=ens, summary=summary,
        net_summary=net_summary, metrics=metrics, diagnostics=diagnostics,
        seeds={"sampler": sampler_seed},
        timings={"sampling_s": t_sample, "summary_s": time.perf_counter() - t1},
    )


def _first_converged(ens: ChainEnsemble):
    ok = np.all(ens.rhat < RHAT_LIMIT, axis=1) if ens.rhat.size else np.zeros(0, bool)
    for k in range(ok.size):
        if ok[k:].all():
            return int(ens.rhat_iterations[k])
    return None


def _write_record(record: RunRecord, root: Path, study: Study) -> list:
    sc = study.scenario
    files = tables.write_observations(root, record.observations)
    if sc.raw["inversion"]["write_samples"]:
        files.append(tables.write_samples(root / "samples.csv", record.ensemble))
    files.append(tables.write_summary(root / "summary.csv", record.summary))
    files.append(tables.write_density(root / "density.csv", record.summary))
    if record.net_summary is not None:
        files.append(tables.write_summary(root / "net_summary.csv", record.net_summary))
        files.append(tables.write_density(root / "net_density.csv", record.net_summary))
    if study.truth is not None:
        truth = study.truth_curves()
        files.append(tables.write_table(root / "truth.csv", ["angle_deg", "total_kPa", "net_kPa"],
                                        zip(study.angles, truth["total"], truth["net"])))
    files.append(tables.write_diagnostics(root / "diagnostics.csv", record.ensemble))
    files.append(tables.write_acceptance(root / "acceptance.csv", record.ensemble))
    metrics = {
        "label": record.label,
        "target": sc.target,
        "scores": {k: v.as_dict() for k, v in record.metrics.items()},
        "diagnostics": record.diagnostics,
        "observations": {"baselines": len(record.observations),
                         "force": record.observations.has_force},
    }
    files.append(tables.write_json(root / "metrics.json", metrics))
    return files


def run_inversion(scenario, case: str, out=None, observations: ObservationSet | None = None,
                  observations_path=None, use_likelihood: bool = True,
                  force: bool | None = None) -> RunRecord:
    """Invert one case of the scenario's observation plan.

    Observations are synthesized from the truth unless given directly or as
    a directory holding ``observations.csv`` (and ``force.csv``). `force`
    overrides the case's force-reading flag. With `out` the tables and a
    manifest are written to ``out/<case>``.
    """
    study = _scenario_from(scenario)
    sc = study.scenario
    t0 = time.perf_counter()
    spec = sc.case(case)
    if force is not None:
        spec = CaseSpec(spec.label, spec.baselines, bool(force))
    if observations is None and observations_path is not None:
        observations = tables.read_observations(observations_path)
    if observations is None:
        obs = case_observations(synthesize(study), study, spec)
    else:
        obs = observations if spec.force else observations.without_force()
    seed = derive_seed(sc.seed, "sampler")
    record = invert_observations(study, obs, spec.label, seed, use_likelihood=use_likelihood)
    record.seeds["observations"] = derive_seed(sc.seed, "observations")
    if out is not None:
        root = _out_dir(study, out, spec.label)
        record.files = _write_record(record, root, study)
        record.timings["total_s"] = time.perf_counter() - t0
        args = {"case": case, "use_likelihood": use_likelihood, "force": force}
        if observations_path is not None:
            args["observations_path"] = str(Path(observations_path).resolve())
        _write_manifest(root, "invert", args, sc, record.seeds, record.files, record.timings)
    return record


# --------------------------------------------------------------------------
# deterministic baseline


def weighted_system(obs: ObservationSet, op: ResponseOperator):
    """Rows ``A`` and targets ``y`` with ``|A q - y|^2`` the weighted misfit."""
    lik = LikelihoodSpec(obs, op)
    A = lik.G / lik.sigma
    y = obs.readings / lik.sigma
    if lik.has_force:
        A = np.vstack([A, lik.h / lik.force_sigma])
        y = np.r_[y, obs.force / lik.force_sigma]
    return A, y


def _projected_gradient(q, g, q_min, q_max):
    pg = g.copy()
    pg[(q <= q_min) & (g > 0)] = 0.0
    pg[(q >= q_max) & (g < 0)] = 0.0
    return pg


def box_descent(A, y, q_min, q_max, start, max_iter: int = 20000, gtol: float = 1e-6):
    """Local minimization of ``|A q - y|^2`` over a box from one start (L-BFGS-B).

    Null directions of `A` carry zero gradient, so the point reached keeps
    the start's component along them. Returns (q, misfit, converged), where
    convergence means the projected gradient is below `gtol` relative to
    ``|A^T y|``.
    """

    def fun(q):
        r = A @ q - y
        return r @ r, 2.0 * (A.T @ r)

    res = minimize(fun, np.clip(start, q_min, q_max), jac=True, method="L-BFGS-B",
                   bounds=[(q_min, q_max)] * A.shape[1],
                   options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-12, "maxcor": 30})
    q = np.clip(res.x, q_min, q_max)
    misfit, grad = fun(q)
    scale = max(np.linalg.norm(2.0 * (A.T @ y)), 1e-300)
    ok = np.linalg.norm(_projected_gradient(q, grad, q_min, q_max)) <= gtol * scale
    return q, float(misfit), bool(ok)


def bounded_least_squares(obs: ObservationSet, op: ResponseOperator, q_min: float, q_max: float,
                          n_starts: int = 8, seed: int = 0):
    """Box-constrained weighted least squares from several prior draws.

    The misfit is quadratic in the knots, so the minimum value is unique;
    where the data leave null directions the minimizer found depends on the
    start (non-uniqueness). The lowest misfit wins, the first start on ties.
    Returns (knots, weighted misfit, RMS convergence residual in mm, status,
    message); status 0 means the best start did not meet the gradient test.
    """
    A, y = weighted_system(obs, op)
    rng = np.random.default_rng(seed)
    best = None
    for start in rng.uniform(q_min, q_max, size=(n_starts, A.shape[1])):
        q, misfit, ok = box_descent(A, y, q_min, q_max, start)
        if best is None or misfit < best[1]:
            best = (q, misfit, ok)
    q, misfit, ok = best
    d, _ = LikelihoodSpec(obs, op).predict(q)
    rms = float(np.sqrt(np.mean((obs.readings - d) ** 2)))
    if ok:
        return q, misfit, rms, 1, "converged"
    return q, misfit, rms, 0, "projected gradient test not met; returning the best point found"


def minimum_misfit(obs: ObservationSet, op: ResponseOperator, q_min: float, q_max: float) -> float:
    """Global minimum of the weighted misfit over the box (BVLS reference)."""
    A, y = weighted_system(obs, op)
    res = lsq_linear(A, y, bounds=(q_min, q_max), method="bvls")
    return float(np.sum((A @ res.x - y) ** 2))


def deterministic_baseline(scenario, case: str, out=None,
                           observations: ObservationSet | None = None) -> BaselineResult:
    """Optimal solution (OS) of the box-constrained misfit for one case."""
    study = _scenario_from(scenario)
    sc = study.scenario
    t0 = time.perf_counter()
    spec = sc.case(case)
    obs = observations if observations is not None else case_observations(synthesize(study), study, spec)
    prior = sc.prior()
    seed = derive_seed(sc.seed, "baseline")
    q, misfit, rms, status, message = bounded_least_squares(obs, study.operator(), prior.q_min,
                                                            prior.q_max, seed=seed)
    if status < 1:
        log.warning("case %s: optimizer stopped without convergence (%s)", case, message)
    result = BaselineResult(q, misfit, rms, status, message)
    curve = interpolation_matrix(sc.n_knots, study.angles) @ q
    truth = study.truth_curves()["total"] if study.truth is not None else None
    if truth is not None:
        result.metrics = metric_report(curve, truth)
    if out is not None:
        root = _out_dir(study, out, spec.label)
        cols = {"angle_deg": study.angles, "os_kPa": curve}
        if truth is not None:
            cols["truth_kPa"] = truth
        files = [tables.write_table(root / "optimal.csv", list(cols), zip(*cols.values()))]
        record = {
            "label": spec.label,
            "knots": q,
            "misfit": misfit,
            "rms_residual_mm": rms,
            "status": status,
            "message": message,
            "total_variation": total_variation(curve),
            "scores": result.metrics.as_dict() if result.metrics else None,
        }
        files.append(tables.write_json(root / "optimal.json", record))
        result.files = files
        _write_manifest(root, "baseline", {"case": case}, sc,
                        {"observations": derive_seed(sc.seed, "observations"), "baseline": seed},
                        files,
                        {"total_s": time.perf_counter() - t0})
    return result


# --------------------------------------------------------------------------
# knot-count trials


def knot_count_trial(scenario, counts=None, case: str | None = None, out=None,
                     tolerance: float | None = None) -> TrialReport:
    """Invert with increasing knot counts and watch the posterior mean settle.

    Stabilization is flagged at the first step whose RMSE between successive
    posterior-mean curves falls below `tolerance` (kPa). The chain count is
    raised to 2n where needed.
    """
    study = _scenario_from(scenario)
    sc = study.scenario
    t0 = time.perf_counter()
    counts = [int(c) for c in (counts or sc.raw["trial"]["counts"])]
    if counts != sorted(counts) or len(set(counts)) != len(counts):
        raise ConfigurationError("knot counts must be strictly ascending")
    tol = float(sc.raw["trial"]["tolerance"] if tolerance is None else tolerance)
    cases = sc.cases()
    label = case or (max(cases, key=lambda k: (cases[k].force, cases[k].baselines))
                     if cases else None)
    full = synthesize(study)
    obs = case_observations(full, study, sc.case(label)) if label else full
    seed = derive_seed(sc.seed, "trial")
    curves, chains, records = {}, {}, {}
    for n in counts:
        rec = invert_observations(study, obs, f"n{n}", seed, n_knots=n)
        curves[n] = rec.summary.mean
        chains[n] = rec.ensemble.n_chains
        records[n] = rec
    steps = [float(np.sqrt(np.mean((curves[b] - curves[a]) ** 2)))
             for a, b in zip(counts[:-1], counts[1:])]
    stable = None
    for (a, b), r in zip(zip(counts[:-1], counts[1:]), steps):
        if r < tol:
            stable = (a, b)
            break
    report_ = TrialReport(counts, curves, steps, tol, stable, chains)
    if out is not None:
        root = _out_dir(study, out, "trial")
        header = ["angle_deg"] + [f"pm_n{n}_kPa" for n in counts]
        files = [tables.write_table(root / "trial.csv", header,
                                    zip(study.angles, *(curves[n] for n in counts)))]
        files.append(tables.write_json(root / "trial.json", {
            "case": label,
            "counts": counts,
            "chains": {str(n): chains[n] for n in counts},
            "successive_rmse": steps,
            "tolerance": tol,
            "stabilized_at": list(stable) if stable else None,
            "rhat_max": {str(n): records[n].diagnostics["rhat_max"] for n in counts},
        }))
        report_.files = files
        _write_manifest(root, "trial-knots", {"counts": counts, "case": case,
                                              "tolerance": tolerance},
                        sc, {"sampler": seed}, files, {"total_s": time.perf_counter() - t0})
    return report_


# --------------------------------------------------------------------------
# sensitivity presets


def sensitivity_presets(scenario, out=None) -> dict:
    """Noise ladder and spring ladder around one case of the plan.

    The noise ladder re-synthesizes the same noise pattern at each level;
    the spring ladder inverts one observation record with different soil
    springs, keeping the truth generation fixed. A label that appears in
    both ladders with the scenario's own settings is run once.
    """
    study = _scenario_from(scenario)
    sc = study.scenario
    t0 = time.perf_counter()
    pre = sc.raw["presets"]
    spec = sc.case(pre["case"])
    base_noise = float(sc.raw["observations"]["noise_std"])
    base_kf = study.model.k_f
    runs = {}
    plan = [(lab, "noise", float(v), base_kf) for lab, v in (pre["noise"] or {}).items()]
    plan += [(lab, "springs", base_noise, float(v)) for lab, v in (pre["springs"] or {}).items()]
    rows, files, seeds = [], [], {}
    pinned = sc.with_(truth={"k_f": study.truth_model.k_f})
    for label, ladder, noise, k_f in plan:
        if label in runs:
            prev = runs[label]
            if (prev[1], prev[2]) != (noise, k_f):
                raise ConfigurationError(f"preset label {label!r} is used for two settings")
            rows.append((label, ladder, noise, k_f, *prev[3]))
            continue
        sub = Study(pinned.with_(lining={"k_f": k_f}, observations={"noise_std": noise}))
        obs = case_observations(synthesize(sub), sub, spec)
        seed = derive_seed(sc.seed, "preset", label)
        seeds[label] = seed
        rec = invert_observations(sub, obs, label, seed)
        scores = rec.primary
        vals = (scores.IA, scores.RMSE, scores.Std) if scores else (np.nan,) * 3
        runs[label] = (rec, noise, k_f, vals)
        rows.append((label, ladder, noise, k_f, *vals))
        if out is not None:
            root = _out_dir(study, out, "presets", label)
            files += _write_record(rec, root, sub)
    if out is not None:
        root = _out_dir(study, out, "presets")
        files.append(tables.write_table(
            root / "presets.csv", ["label", "ladder", "noise_std_mm", "k_f", "IA", "RMSE", "Std"],
            rows))
        _write_manifest(root, "presets", {}, sc, seeds, files,
                        {"total_s": time.perf_counter() - t0})
    return {
        "runs": {lab: r[0] for lab, r in runs.items()},
        "rows": rows,
    }


# --------------------------------------------------------------------------
# reporting and replay


def report(path) -> list:
    """Scores of every inversion found below `path` (one dict per run)."""
    root = Path(path)
    rows = []
    for mfile in sorted(root.rglob("metrics.json")):
        with open(mfile) as fh:
            rec = json.load(fh)
        target = rec.get("target", "total")
        score = rec.get("scores", {}).get(target) or {}
        rows.append({
            "run": str(mfile.parent.relative_to(root)) or ".",
            "target": target,
            "baselines": rec["observations"]["baselines"],
            "force": rec["observations"]["force"],
            "IA": score.get("IA"),
            "RMSE": score.get("RMSE"),
            "Std": score.get("Std"),
            "rhat_max": rec["diagnostics"]["rhat_max"],
            "converged": rec["diagnostics"]["converged"],
        })
    return rows


def resummarize(run_dir, pressure_grid=None, angles=None, burn_in=None) -> PosteriorSummary:
    """Rebuild the total-pressure summary of a run from its samples table.

    Defaults are read from the run's manifest (or the nearest one above it).
    """
    run_dir = Path(run_dir)
    sc_dict = None
    for d in (run_dir, *run_dir.parents):
        if (d / MANIFEST).exists():
            with open(d / MANIFEST) as fh:
                sc_dict = json.load(fh)["scenario"]
            break
    sc = Scenario.from_dict(sc_dict) if sc_dict else None
    hist, _ = tables.read_samples(run_dir / "samples.csv")
    if burn_in is None:
        burn_in = sc.raw["sampler"]["burn_in"] if sc else 0.5
    if pressure_grid is None:
        pressure_grid = sc.pressure_grid()
    if angles is None:
        angles = monitoring_angles(int(sc.raw["inversion"]["monitoring_points"]))
    retained = hist[int(np.floor(burn_in * hist.shape[0])):]
    samples = retained.reshape(-1, hist.shape[-1])
    matrix = interpolation_matrix(hist.shape[-1], angles)
    return summarize_samples(samples, matrix, angles, pressure_grid)


def replay(manifest_path, out):
    """Re-execute the operation recorded in a manifest.

    `out` plays the role of the original output root: forward and synthesize
    runs write into it directly, the others into the same subdirectory
    (case label, ``trial`` or ``presets``) as before.
    """
    with open(manifest_path) as fh:
        man = json.load(fh)
    sc = Scenario.from_dict(man["scenario"])
    args = man["arguments"]
    op = man["operation"]
    out = Path(out)
    if op == "forward":
        field = PressureField(np.asarray(args["knots"])) if "knots" in args else None
        return run_forward(sc, field, out=out)
    if op == "synthesize":
        return synthesize(sc, args.get("noise_std"), out=out)
    if op == "invert":
        return run_inversion(sc, args["case"], out=out, observations_path=args.get("observations_path"),
                             use_likelihood=args.get("use_likelihood", True), force=args.get("force"))
    if op == "baseline":
        return deterministic_baseline(sc, args["case"], out=out)
    if op == "trial-knots":
        return knot_count_trial(sc, args["counts"], args.get("case"), out=out,
                                tolerance=args.get("tolerance"))
    if op == "presets":
        return sensitivity_presets(sc, out=out)
    raise ConfigurationError(f"unknown operation {op!r} in manifest")
