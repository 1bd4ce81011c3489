"""Declarative experiment scenarios and named truth pressure fields.

A scenario is a YAML mapping; the bundled files under ``scenarios/`` are
the reference for the schema, and :func:`load_scenario` documents every key.
JSON run manifests written by the pipeline are also accepted, since they
embed the resolved scenario.
"""

from __future__ import annotations

import copy
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .bayes import PriorSpec
from .demc import SamplerConfig
from .fem import ConfigurationError, LiningModel, NodeLookupError, build_mesh
from .parameterization import PressureField

__all__ = [
    "TRUTH_PRESETS",
    "CaseSpec",
    "Scenario",
    "angle_gap",
    "truth_preset",
    "derive_seed",
    "bundled_scenarios",
    "load_scenario",
]


def angle_gap(a, b):
    """Signed angular difference a - b wrapped into [-180, 180)."""
    return (np.asarray(a, dtype=float) - b + 180.0) % 360.0 - 180.0


def _bump(theta, center, width):
    return np.exp(-(angle_gap(theta, center) / width) ** 2)


def _illustration(theta):
    r = np.radians(theta)
    return (650.0 + 250.0 * np.cos(2 * r) - 60.0 * np.cos(r)
            + 100.0 * _bump(theta, 50.0, 20.0) + 100.0 * _bump(theta, 230.0, 20.0))


def _surcharge(theta):
    # Lopsided overburden: stronger on one shoulder, with local bulges.
    r = np.radians(theta)
    return (300.0 + 110.0 * np.cos(2 * r) + 45.0 * np.sin(2 * r) - 50.0 * np.cos(r)
            + 60.0 * _bump(theta, 40.0, 25.0) + 60.0 * _bump(theta, 220.0, 25.0))


TRUTH_PRESETS = {
    "illustration": _illustration,
    "surcharge": _surcharge,
}


def truth_preset(name: str, n: int = 720) -> PressureField:
    """Named truth field sampled on `n` knots (dense enough to be smooth)."""
    try:
        func = TRUTH_PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown truth preset {name!r}; choose from {sorted(TRUTH_PRESETS)}"
        ) from None
    return PressureField.from_function(func, n)


def derive_seed(master: int, *labels) -> int:
    """Stable 32-bit seed for a labelled sub-stream of the master seed."""
    key = [int(master)] + [zlib.crc32(str(lab).encode()) for lab in labels]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


@dataclass(frozen=True)
class CaseSpec:
    """One row of the observation plan."""

    label: str
    baselines: int
    force: bool = False


_DEFAULTS = {
    "name": "scenario",
    "seed": 0,
    "output_dir": "runs",
    "lining": {
        "diameter": 6.2,
        "youngs_modulus": 3.5e7,
        "thickness": 0.35,
        "width": 1.0,
        "eta": 1.0,
        "k_f": 1000.0,
        "n_elements": 100,
        "joints": [],
        "k_phi": None,
    },
    "truth": {"preset": None, "knots": None, "mesh_factor": 2, "k_f": None},
    "observations": {
        "baselines": None,
        "noise_std": 1.0 / 3.0,
        "sigma": 1.0,
        "force_angle": 0.0,
        "force_noise": 0.01,
    },
    "cases": {},
    "inversion": {
        "n_knots": 22,
        "prior": [0.0, 3000.0],
        "target": "total",
        "density_bins": 150,
        "monitoring_points": 100,
        "write_samples": True,
    },
    "sampler": {
        "n_chains": 44,
        "iterations": 20000,
        "burn_in": 0.5,
        "thin": 20,
        "jump_rate": None,
        "jitter": None,
        "update": "sequential",
        "rhat_every": 100,
    },
    "trial": {"counts": [8, 16, 22], "tolerance": 25.0},
    "presets": {"case": "F2", "noise": {}, "springs": {}},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if key not in base:
            raise ConfigurationError(f"unknown scenario key '{path}{key}'")
        if isinstance(base[key], dict) and base[key] and isinstance(val, dict):
            out[key] = _merge(base[key], val, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """Resolved scenario.

    `raw` keeps the full key tree (defaults filled in) so the scenario can be
    written into a manifest and rebuilt exactly.
    """

    raw: dict = field(repr=False)

    def __post_init__(self):
        self._validate()

    # --- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(_merge(_DEFAULTS, data))

    def with_(self, **sections) -> "Scenario":
        """Copy with some sections (or top-level keys) overridden."""
        return Scenario(_merge(self.raw, sections))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    # --- simple accessors ----------------------------------------------
    @property
    def name(self) -> str:
        return str(self.raw["name"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def n_knots(self) -> int:
        return int(self.raw["inversion"]["n_knots"])

    @property
    def target(self) -> str:
        return self.raw["inversion"]["target"]

    @property
    def force_angle(self) -> float | None:
        a = self.raw["observations"]["force_angle"]
        return None if a is None else float(a)

    def model(self, **changes) -> LiningModel:
        """Lining model used for inversion (and forward runs)."""
        c = self.raw["lining"]
        kw = dict(
            n_elements=int(c["n_elements"]),
            eta=float(c["eta"]),
            joints=tuple(float(a) for a in c["joints"] or ()),
        )
        if c["k_phi"] is not None:
            kw["k_phi"] = float(c["k_phi"])
        if "EA" in c or "EI" in c:
            raise ConfigurationError("give youngs_modulus and thickness, not EA/EI")
        m = LiningModel.from_section(
            float(c["diameter"]), float(c["youngs_modulus"]), float(c["thickness"]),
            k_f=float(c["k_f"]), width=float(c["width"]), **kw,
        )
        return m.with_(**changes) if changes else m

    def truth_model(self) -> LiningModel:
        """Model the synthetic truth is generated on (finer mesh, own springs)."""
        t = self.raw["truth"]
        base = self.model()
        k_f = base.k_f if t["k_f"] is None else float(t["k_f"])
        return base.with_(n_elements=base.n_elements * int(t["mesh_factor"]), k_f=k_f)

    def truth(self) -> PressureField | None:
        t = self.raw["truth"]
        if t["knots"] is not None:
            return PressureField(np.asarray(t["knots"], dtype=float))
        if t["preset"] is not None:
            return truth_preset(t["preset"])
        return None

    def prior(self, n: int | None = None) -> PriorSpec:
        lo, hi = self.raw["inversion"]["prior"]
        return PriorSpec(float(lo), float(hi), self.n_knots if n is None else int(n))

    def pressure_grid(self) -> np.ndarray:
        lo, hi = self.raw["inversion"]["prior"]
        return np.linspace(float(lo), float(hi), int(self.raw["inversion"]["density_bins"]) + 1)

    def sampler(self, **changes) -> SamplerConfig:
        s = dict(self.raw["sampler"])
        s.update(changes)
        return SamplerConfig(
            n_chains=int(s["n_chains"]),
            iterations=int(s["iterations"]),
            jump_rate=None if s["jump_rate"] is None else float(s["jump_rate"]),
            jitter=None if s["jitter"] is None else float(s["jitter"]),
            burn_in=float(s["burn_in"]),
            thin=int(s["thin"]),
            seed=int(s.get("seed", 0)),
            update=str(s["update"]),
            rhat_every=int(s["rhat_every"]),
        )

    @property
    def n_baselines(self) -> int:
        b = self.raw["observations"]["baselines"]
        return self.model().n_elements // 2 if b is None else int(b)

    def cases(self) -> dict:
        out = {}
        for label, spec in self.raw["cases"].items():
            spec = spec or {}
            out[str(label)] = CaseSpec(
                str(label), int(spec.get("baselines", self.n_baselines)),
                bool(spec.get("force", False)),
            )
        return out

    def case(self, label: str) -> CaseSpec:
        cases = self.cases()
        if label not in cases:
            raise ConfigurationError(f"unknown case {label!r}; defined: {sorted(cases)}")
        return cases[label]

    # --- validation ----------------------------------------------------
    def _validate(self):
        r = self.raw
        model = self.model()
        mesh = build_mesh(model)
        if self.force_angle is not None:
            try:
                mesh.node_at(self.force_angle)
            except NodeLookupError as exc:
                raise ConfigurationError(f"observations.force_angle: {exc.args[0]}") from None
        lo, hi = r["inversion"]["prior"]
        if lo < 0:
            raise ConfigurationError("the prior lower bound must be >= 0 (soil exerts no traction)")
        if not hi > lo:
            raise ConfigurationError("the prior box is empty")
        if r["inversion"]["target"] not in ("total", "net"):
            raise ConfigurationError("inversion.target must be 'total' or 'net'")
        if int(r["truth"]["mesh_factor"]) < 1:
            raise ConfigurationError("truth.mesh_factor must be >= 1")
        n_full = model.n_elements // 2
        if not 0 < self.n_baselines <= n_full or n_full % self.n_baselines:
            raise ConfigurationError(
                f"{self.n_baselines} baselines is not an even subsample of {n_full}"
            )
        for case in self.cases().values():
            if case.baselines <= 0 or self.n_baselines % case.baselines:
                raise ConfigurationError(
                    f"case {case.label}: {case.baselines} baselines is not an even "
                    f"subsample of {self.n_baselines}"
                )
        self.sampler()


def bundled_scenarios() -> dict:
    """Names and paths of the scenario files shipped with the package."""
    root = resources.files("liningbayes") / "scenarios"
    return {p.name.rsplit(".", 1)[0]: Path(str(p)) for p in root.iterdir()
            if p.name.endswith(".yaml")}


def load_scenario(source) -> Scenario:
    """Scenario from a YAML path, a bundled scenario name, a manifest, or a dict.

    Top-level keys
    --------------
    name, seed, output_dir
    lining : diameter (m), youngs_modulus (kPa), thickness (m), width (m),
        eta, k_f (kN/m^3), n_elements, joints (node angles, deg),
        k_phi (kN m/rad)
    truth : preset (name) or knots (list, kPa); mesh_factor (truth mesh is
        this many times finer); k_f (springs used to generate the truth)
    observations : baselines (size of the synthesized set), noise_std (mm),
        sigma (likelihood std, mm), force_angle (deg, null for none),
        force_noise (relative std of the force reading)
    cases : label -> {baselines, force}
    inversion : n_knots, prior [lo, hi], target (total | net),
        density_bins, monitoring_points, write_samples
    sampler : n_chains, iterations, burn_in, thin, jump_rate, jitter,
        update (sequential | snapshot), rhat_every
    trial : counts, tolerance (kPa)
    presets : case, noise (label -> noise_std), springs (label -> k_f)
    """
    if isinstance(source, Scenario):
        return source
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        if not path.exists():
            bundled = bundled_scenarios()
            if str(source) in bundled:
                path = bundled[str(source)]
            else:
                raise FileNotFoundError(f"no scenario file or bundled scenario {source!r}")
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    if "scenario" in data and "operation" in data:
        data = data["scenario"]
    return Scenario.from_dict(data)
