"""Observables of the lining model and synthetic observation sets.

Convergence is the shortening (positive) of a diametral chord in mm. The
hoop force is compression positive in kN. :class:`ResponseOperator` holds
the linear maps from knot values to every observable, so a posterior
evaluation is a matrix product instead of a finite-element solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import ConfigurationError, LiningModel, Mesh, SolveResult
from .parameterization import PressureField, interpolation_matrix

__all__ = [
    "BaselineSet",
    "ObservationSet",
    "ResponseOperator",
    "full_baselines",
    "baselines_at",
    "select_baselines",
    "convergence",
    "synthesize_observations",
]

M_TO_MM = 1000.0


@dataclass(frozen=True)
class BaselineSet:
    """Diametral chords, each from node ``i`` to node ``i + N/2``."""

    n_nodes: int
    starts: tuple

    def __post_init__(self):
        starts = tuple(int(i) for i in self.starts)
        half = self.n_nodes // 2
        if any(not 0 <= i < half for i in starts):
            raise ConfigurationError("baseline start nodes must lie in [0, N/2)")
        if len(set(starts)) != len(starts):
            raise ConfigurationError("duplicate baselines")
        object.__setattr__(self, "starts", starts)

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def pairs(self) -> np.ndarray:
        s = np.asarray(self.starts, dtype=int)
        return np.column_stack([s, s + self.n_nodes // 2])

    @property
    def angles(self) -> np.ndarray:
        return np.asarray(self.starts, dtype=float) * (360.0 / self.n_nodes)


def full_baselines(mesh: Mesh) -> BaselineSet:
    """All N/2 chords, baseline 1 being the crown-invert chord."""
    return BaselineSet(mesh.n_nodes, tuple(range(mesh.n_nodes // 2)))


def baselines_at(mesh: Mesh, angles) -> BaselineSet:
    """Baselines starting at the given angles (each must be a node in [0, 180))."""
    return BaselineSet(mesh.n_nodes, tuple(mesh.node_at(a) for a in angles))


def select_baselines(baselines: BaselineSet, count: int) -> BaselineSet:
    """Evenly spaced subset of `count` baselines starting at the first one."""
    total = len(baselines)
    if count < 1 or total % count:
        raise ConfigurationError(
            f"{count} baselines is not an even subsample of {total}"
        )
    stride = total // count
    return BaselineSet(baselines.n_nodes, baselines.starts[::stride])


def _convergence_from_radial(radial: np.ndarray, baselines: BaselineSet) -> np.ndarray:
    pairs = baselines.pairs
    return M_TO_MM * (radial[pairs[:, 0]] + radial[pairs[:, 1]])


def convergence(result: SolveResult, mesh: Mesh, baselines: BaselineSet) -> np.ndarray:
    """Chord shortening (mm) on each baseline.

    The chord from node i to its opposite node runs along the inward normal
    at i, so the length change is the sum of the two inward radial
    displacements; rigid translations cancel.
    """
    radial = fem.radial_displacements(result.displacements, mesh)
    return _convergence_from_radial(radial, baselines)


@dataclass(frozen=True)
class ObservationSet:
    """Convergence readings with an optional crown-type hoop-force reading.

    `sigma` and `force_sigma` are the error standard deviations assumed by
    the likelihood; `noise_std` and `force_noise_std` record the noise that
    was actually injected when the set is synthetic.
    """

    angles: np.ndarray
    readings: np.ndarray
    sigma: float = 1.0
    force_angle: float | None = None
    force: float | None = None
    force_sigma: float | None = None
    noise_std: float | None = None
    force_noise_std: float | None = None
    seed: int | None = None

    def __post_init__(self):
        angles = np.array(self.angles, dtype=float).ravel()
        readings = np.array(self.readings, dtype=float).ravel()
        if angles.shape != readings.shape:
            raise ValueError("one reading per baseline angle is required")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.force is not None:
            if self.force_angle is None:
                raise ValueError("a force reading needs its location angle")
            if self.force_sigma is None:
                object.__setattr__(self, "force_sigma", 0.01 * abs(self.force))
            if not self.force_sigma > 0:
                raise ValueError("force_sigma must be positive")
        for arr in (angles, readings):
            arr.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "readings", readings)

    @property
    def has_force(self) -> bool:
        return self.force is not None

    def __len__(self) -> int:
        return self.readings.size

    def without_force(self) -> "ObservationSet":
        return ObservationSet(
            self.angles, self.readings, self.sigma,
            noise_std=self.noise_std, seed=self.seed,
        )

    def subset(self, angles) -> "ObservationSet":
        """Keep only the readings on the given baseline angles."""
        idx = [int(np.argmin(np.abs(self.angles - a))) for a in angles]
        if not np.allclose(self.angles[idx], angles, atol=1e-6):
            raise ConfigurationError("requested baseline angles are not observed")
        return ObservationSet(
            self.angles[idx], self.readings[idx], self.sigma,
            self.force_angle, self.force, self.force_sigma,
            self.noise_std, self.force_noise_std, self.seed,
        )


def synthesize_observations(
    truth: PressureField,
    model: LiningModel,
    mesh: Mesh,
    baselines: BaselineSet,
    noise_std: float,
    force_angle: float | None = None,
    force_noise_std: float | None = None,
    seed: int | None = 0,
    sigma: float = 1.0,
    force_sigma: float | None = None,
) -> ObservationSet:
    """Solve under `truth` and corrupt the observables with Gaussian noise.

    Convergence noise is ``noise_std * z`` with ``z`` standard normal, so the
    same seed at a different `noise_std` scales one and the same noise
    pattern. The force noise defaults to 1 % of the noise-free force and the
    likelihood force std to 1 % of the observed force.
    """
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    result = fem.solve(model, mesh, truth)
    clean = convergence(result, mesh, baselines)
    rng = np.random.default_rng(seed)
    readings = clean + noise_std * rng.standard_normal(clean.size)
    force = None
    if force_angle is not None:
        clean_force = fem.hoop_force_at(result, mesh, force_angle)
        if force_noise_std is None:
            force_noise_std = 0.01 * abs(clean_force)
        force = clean_force + force_noise_std * rng.standard_normal()
        if force_sigma is None:
            force_sigma = 0.01 * abs(force)
    return ObservationSet(
        angles=baselines.angles,
        readings=readings,
        sigma=sigma,
        force_angle=force_angle,
        force=force,
        force_sigma=force_sigma,
        noise_std=noise_std,
        force_noise_std=force_noise_std if force_angle is not None else None,
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class ResponseOperator:
    """Linear response of a lining to an n-knot pressure field.

    Built from one factorization with one load case per unit knot; every
    observable of a knot vector ``q`` (or a stack of them, shape (m, n)) is
    a matrix product. Matches :func:`fem.solve` to round-off.
    """

    model: LiningModel
    mesh: Mesh
    n_knots: int
    displacement: np.ndarray = field(repr=False)
    hoop: np.ndarray = field(repr=False)
    radial: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, model: LiningModel, mesh: Mesh, n_knots: int) -> "ResponseOperator":
        K = fem.assemble_stiffness(model, mesh)
        F = fem.load_operator(n_knots, model, mesh)
        U = fem.solve_system(model, mesh, K, F)
        f_local = np.stack(
            [fem.element_load_matrix(n_knots, model, mesh, e) for e in range(mesh.n_elements)]
        )
        forces = fem.element_end_forces(model, mesh, U, f_local)
        hoop = fem.hoop_forces(forces)
        radial = fem.radial_displacements(U, mesh)
        for arr in (U, hoop, radial):
            arr.setflags(write=False)
        return cls(model, mesh, n_knots, U, hoop, radial)

    def convergence_matrix(self, baselines: BaselineSet) -> np.ndarray:
        """(H, n) map from knots to convergence in mm."""
        return _convergence_from_radial(self.radial, baselines)

    def hoop_row(self, theta: float) -> np.ndarray:
        """(n,) map from knots to hoop force (kN) at the node at `theta`."""
        return self.hoop[self.mesh.node_at(theta)]

    def reaction_matrix(self) -> np.ndarray:
        """(N, n) map from knots to nodal reaction pressure (kPa)."""
        return self.model.k_f * self.radial

    def net_pressure_matrix(self) -> np.ndarray:
        """(N, n) map from total-pressure knots to net pressure at the nodes."""
        return interpolation_matrix(self.n_knots, self.mesh.node_angles) - self.reaction_matrix()

    def convergence(self, q, baselines: BaselineSet) -> np.ndarray:
        return np.asarray(q) @ self.convergence_matrix(baselines).T

    def hoop_force(self, q, theta: float):
        return np.asarray(q) @ self.hoop_row(theta)
