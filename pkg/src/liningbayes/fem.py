"""Embedded beam-spring model of a circular lining.

The ring is discretized into straight Euler beam elements (a regular polygon
inscribed in the lining circle) resting on normal Winkler springs. Segment
joints are rotation springs condensed into the adjacent elements.

Conventions
-----------
* Global frame: x to the right, y up, crown on the +y axis. A node at polar
  angle theta (degrees, clockwise from the crown) sits at
  ``R * (sin theta, cos theta)``. Rotations are counterclockwise positive.
* Element ``e`` joins node ``e`` and node ``e + 1`` (mod N). Its local start
  node is ``e + 1`` and its end node is ``e``, so the local x axis runs
  counterclockwise and the local y axis points inward. Inward pressure is a
  positive transverse load.
* Units: m, kN, kPa (= kN/m^2), rad. Pressures act on a ring of unit width
  unless the model says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .parameterization import PressureField, interpolation_matrix

__all__ = [
    "ConfigurationError",
    "SingularSystemError",
    "NodeLookupError",
    "LiningModel",
    "Mesh",
    "SolveResult",
    "build_mesh",
    "fixity_factor",
    "joint_adjustment",
    "element_beam_stiffness",
    "element_foundation_stiffness",
    "element_stiffness",
    "transformation_matrix",
    "transform_to_global",
    "element_load_matrix",
    "consistent_load",
    "assemble_stiffness",
    "load_operator",
    "assemble",
    "solve",
    "solve_system",
    "element_end_forces",
    "hoop_force_at",
    "hoop_forces",
    "radial_displacements",
    "reaction_pressure",
    "net_pressure",
]

SOLVER_RTOL = 1e-10

# 3-point Gauss-Legendre on [0, 1]; exact for the quartic load integrands
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class ConfigurationError(ValueError):
    """Invalid lining model or mesh request."""


class SingularSystemError(np.linalg.LinAlgError):
    """The stiffness system cannot be solved for the given load."""


class NodeLookupError(KeyError):
    """An angle that was expected on a mesh node is not on one."""


@dataclass(frozen=True)
class LiningModel:
    """Geometry and stiffness of a (possibly jointed) lining on soil springs.

    Parameters
    ----------
    diameter : float
        Lining diameter D (m).
    EA : float
        Axial stiffness (kN).
    EI : float
        Nominal bending stiffness (kN m^2); the element matrices use
        ``eta * EI``.
    k_f : float
        Normal soil-spring stiffness (kN/m^3 per unit ring width).
    n_elements : int
        Number of elements around the ring.
    eta : float
        Bending rigidity reduction factor in (0, 1].
    k_phi : float
        Joint rotation stiffness (kN m/rad); only used when `joints` is set.
    joints : tuple of float
        Joint angles in degrees; each must coincide with a mesh node.
    width : float
        Ring width (m) turning pressure (kPa) into line load (kN/m).
    """

    diameter: float
    EA: float
    EI: float
    k_f: float
    n_elements: int = 100
    eta: float = 1.0
    k_phi: float = np.inf
    joints: tuple = field(default_factory=tuple)
    width: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(float(a) % 360.0 for a in self.joints))
        if not self.diameter > 0:
            raise ConfigurationError("diameter must be positive")
        if not (self.EA > 0 and self.EI > 0):
            raise ConfigurationError("EA and EI must be positive")
        if not self.k_f >= 0:
            raise ConfigurationError("k_f must be non-negative")
        if not 0 < self.eta <= 1:
            raise ConfigurationError("eta must lie in (0, 1]")
        if self.joints and not self.k_phi > 0:
            raise ConfigurationError("joints need a positive rotation stiffness k_phi")
        if not self.width > 0:
            raise ConfigurationError("width must be positive")
        n = int(self.n_elements)
        if n != self.n_elements or n < 4 or n % 2:
            raise ConfigurationError(
                f"n_elements must be an even integer >= 4, got {self.n_elements}"
            )

    @classmethod
    def from_section(cls, diameter, youngs_modulus, thickness, k_f, width=1.0, **kwargs):
        """Build from a rectangular section: EA = E b t, EI = E b t^3 / 12."""
        EA = youngs_modulus * width * thickness
        EI = youngs_modulus * width * thickness**3 / 12.0
        return cls(diameter=diameter, EA=EA, EI=EI, k_f=k_f, width=width, **kwargs)

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    @property
    def bending_stiffness(self) -> float:
        """Effective EI after the rigidity reduction."""
        return self.eta * self.EI

    def with_(self, **changes) -> "LiningModel":
        """Copy with some fields replaced."""
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return LiningModel(**values)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Polygonal ring mesh; see module docstring for orientation rules."""

    node_angles: np.ndarray
    coords: np.ndarray
    connectivity: np.ndarray
    element_angles: np.ndarray
    length: float
    radius: float
    joint_nodes: frozenset = frozenset()

    @property
    def n_nodes(self) -> int:
        return self.node_angles.size

    @property
    def n_elements(self) -> int:
        return self.connectivity.shape[0]

    @property
    def n_dof(self) -> int:
        return 3 * self.n_nodes

    @property
    def spacing(self) -> float:
        """Angular node spacing in degrees."""
        return 360.0 / self.n_nodes

    def node_at(self, theta: float) -> int:
        """Index of the node at angle `theta` (degrees)."""
        pos = (float(theta) % 360.0) / self.spacing
        k = int(round(pos))
        if abs(pos - k) > 1e-6:
            raise NodeLookupError(f"{theta} deg is not a node angle")
        return k % self.n_nodes

    def element_dofs(self, e: int) -> np.ndarray:
        i, j = self.connectivity[e]
        return np.r_[3 * i : 3 * i + 3, 3 * j : 3 * j + 3]

    @cached_property
    def inward_normals(self) -> np.ndarray:
        """Unit inward radial vectors at the nodes, shape (N, 2)."""
        t = np.radians(self.node_angles)
        return -np.column_stack([np.sin(t), np.cos(t)])


def build_mesh(model: LiningModel) -> Mesh:
    """Regular polygon mesh with node k at ``k * 360 / N`` degrees from the crown."""
    n = model.n_elements
    if n % 2:
        raise ConfigurationError(f"n_elements must be even, got {n}")
    spacing = 360.0 / n
    angles = np.arange(n) * spacing
    t = np.radians(angles)
    R = model.radius
    coords = R * np.column_stack([np.sin(t), np.cos(t)])
    e = np.arange(n)
    connectivity = np.column_stack([(e + 1) % n, e])
    d = coords[connectivity[:, 1]] - coords[connectivity[:, 0]]
    element_angles = np.arctan2(d[:, 1], d[:, 0])
    length = model.diameter * np.sin(np.pi / n)

    joint_nodes = set()
    for a in model.joints:
        pos = a / spacing
        k = int(round(pos))
        if abs(pos - k) > 1e-6:
            raise ConfigurationError(
                f"joint at {a} deg does not coincide with a node (spacing {spacing} deg)"
            )
        joint_nodes.add(k % n)

    for arr in (angles, coords, connectivity, element_angles):
        arr.setflags(write=False)
    return Mesh(
        node_angles=angles,
        coords=coords,
        connectivity=connectivity,
        element_angles=element_angles,
        length=float(length),
        radius=R,
        joint_nodes=frozenset(joint_nodes),
    )


def fixity_factor(k_phi: float, EI: float, L: float) -> float:
    """End fixity r = 1 / (1 + 3 EI / (k_phi L)); 1 for a rigid connection."""
    if np.isinf(k_phi):
        return 1.0
    return 1.0 / (1.0 + 3.0 * EI / (k_phi * L))


def joint_adjustment(r_i: float, r_j: float, L: float) -> np.ndarray:
    """Map nodal DOFs to beam-end DOFs for an element with end rotation springs.

    The beam-end rotations follow from moment equilibrium between each
    spring and the beam end it restrains; translations pass through
    unchanged. ``k_b @ joint_adjustment(...)`` is the condensed stiffness.
    """
    D = 4.0 - r_i * r_j
    A = np.eye(6)
    # beam-end rotation at i
    c_v = 2.0 * (r_i * r_j + 2.0 * r_i - r_j - 2.0) / (L * D)
    A[2, 1] = c_v
    A[2, 2] = r_i * (4.0 - r_j) / D
    A[2, 4] = -c_v
    A[2, 5] = 2.0 * r_j * (r_i - 1.0) / D
    # beam-end rotation at j
    c_v = 2.0 * (r_i * r_j - r_i + 2.0 * r_j - 2.0) / (L * D)
    A[5, 1] = c_v
    A[5, 2] = 2.0 * r_i * (r_j - 1.0) / D
    A[5, 4] = -c_v
    A[5, 5] = r_j * (4.0 - r_i) / D
    return A


def _plain_beam(EA: float, EI: float, L: float) -> np.ndarray:
    a = EA / L
    b12, b6, b4, b2 = 12 * EI / L**3, 6 * EI / L**2, 4 * EI / L, 2 * EI / L
    return np.array(
        [
            [a, 0, 0, -a, 0, 0],
            [0, b12, b6, 0, -b12, b6],
            [0, b6, b4, 0, -b6, b2],
            [-a, 0, 0, a, 0, 0],
            [0, -b12, -b6, 0, b12, -b6],
            [0, b6, b2, 0, -b6, b4],
        ]
    )


def element_beam_stiffness(model: LiningModel, mesh: Mesh, e: int) -> np.ndarray:
    """Local 6x6 beam stiffness, softened by joint springs at jointed ends."""
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element {e} out of range")
    EI = model.bending_stiffness
    L = mesh.length
    kb = _plain_beam(model.EA, EI, L)
    i, j = mesh.connectivity[e]
    r_i = fixity_factor(model.k_phi, EI, L) if i in mesh.joint_nodes else 1.0
    r_j = fixity_factor(model.k_phi, EI, L) if j in mesh.joint_nodes else 1.0
    if r_i == 1.0 and r_j == 1.0:
        return kb
    return kb @ joint_adjustment(r_i, r_j, L)


def element_foundation_stiffness(model: LiningModel, mesh: Mesh) -> np.ndarray:
    """Local 6x6 consistent Winkler stiffness (transverse springs only)."""
    L = mesh.length
    m = np.zeros((6, 6))
    idx = [1, 2, 4, 5]
    m[np.ix_(idx, idx)] = np.array(
        [
            [13 * L / 35, 11 * L**2 / 210, 9 * L / 70, -13 * L**2 / 420],
            [11 * L**2 / 210, L**3 / 105, 13 * L**2 / 420, -(L**3) / 140],
            [9 * L / 70, 13 * L**2 / 420, 13 * L / 35, -11 * L**2 / 210],
            [-13 * L**2 / 420, -(L**3) / 140, -11 * L**2 / 210, L**3 / 105],
        ]
    )
    return model.k_f * model.width * m


def element_stiffness(model: LiningModel, mesh: Mesh, e: int) -> np.ndarray:
    return element_beam_stiffness(model, mesh, e) + element_foundation_stiffness(model, mesh)


def transformation_matrix(theta_e: float) -> np.ndarray:
    """6x6 local-to-global rotation for an element whose axis makes `theta_e` (rad)."""
    c, s = np.cos(theta_e), np.sin(theta_e)
    block = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    T = np.zeros((6, 6))
    T[:3, :3] = block
    T[3:, 3:] = block
    return T


def transform_to_global(local: np.ndarray, theta_e: float) -> np.ndarray:
    """``T k T^T`` for a 6x6 matrix, ``T f`` for a 6-vector."""
    T = transformation_matrix(theta_e)
    local = np.asarray(local, dtype=float)
    if local.shape == (6, 6):
        return T @ local @ T.T
    if local.shape == (6,):
        return T @ local
    raise ValueError(f"expected a 6x6 matrix or 6-vector, got shape {local.shape}")


def _hermite_moment_matrix(L: float) -> np.ndarray:
    """Maps (0, F0, F1, 0, F2, F3) load moments to consistent nodal loads."""
    return np.array(
        [
            [0, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, -3 / L**2, 2 / L**3],
            [0, 0, 1, 0, -2 / L, 1 / L**2],
            [0, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 3 / L**2, -2 / L**3],
            [0, 0, 0, 0, -1 / L, 1 / L**2],
        ]
    )


def element_load_matrix(n_knots: int, model: LiningModel, mesh: Mesh, e: int) -> np.ndarray:
    """Linear map (6 x n_knots) from knot values to local consistent loads of `e`.

    The position ``s`` along the chord maps linearly onto the polar angle
    spanned by the element. The element is split at every knot angle it
    contains, so each piece carries a linear pressure and the moment
    integrals ``int q(s) s^k ds`` (k = 0..3) are exact under Gauss-Legendre.
    """
    L = mesh.length
    span = mesh.spacing
    start = (e + 1) * span  # local start node, unwrapped
    end = e * span
    knot_step = 360.0 / n_knots
    first = np.floor(end / knot_step + 1e-12) + 1
    cuts = np.arange(first, np.ceil(start / knot_step - 1e-12)) * knot_step
    # breakpoints in local s, ascending
    s_breaks = np.concatenate([[0.0], np.sort((start - cuts) / span * L), [L]])
    s_breaks = np.unique(s_breaks)
    a, b = s_breaks[:-1], s_breaks[1:]
    s = (a[:, None] + (b - a)[:, None] * _GL_X[None, :]).ravel()
    w = ((b - a)[:, None] * _GL_W[None, :]).ravel()
    theta = start - s / L * span
    I = interpolation_matrix(n_knots, theta)
    powers = np.vstack([s**k for k in range(4)]) * w  # (4, n_gauss)
    moments = powers @ I  # (4, n_knots)
    F = np.zeros((6, n_knots))
    F[[1, 2, 4, 5]] = moments
    return model.width * (_hermite_moment_matrix(L) @ F)


def consistent_load(field: PressureField, model: LiningModel, mesh: Mesh, e: int) -> np.ndarray:
    """Local 6-vector of consistent nodal forces for the normal pressure on `e`."""
    return element_load_matrix(field.n, model, mesh, e) @ field.knots


def assemble_stiffness(model: LiningModel, mesh: Mesh) -> np.ndarray:
    n = mesh.n_dof
    K = np.zeros((n, n))
    kf = element_foundation_stiffness(model, mesh)
    for e in range(mesh.n_elements):
        k = element_beam_stiffness(model, mesh, e) + kf
        dofs = mesh.element_dofs(e)
        K[np.ix_(dofs, dofs)] += transform_to_global(k, mesh.element_angles[e])
    return K


def load_operator(n_knots: int, model: LiningModel, mesh: Mesh) -> np.ndarray:
    """Global load per unit knot value, shape (3N, n_knots)."""
    F = np.zeros((mesh.n_dof, n_knots))
    for e in range(mesh.n_elements):
        T = transformation_matrix(mesh.element_angles[e])
        F[mesh.element_dofs(e)] += T @ element_load_matrix(n_knots, model, mesh, e)
    return F


def assemble(model: LiningModel, mesh: Mesh, field: PressureField):
    """Global stiffness matrix and load vector for `field`."""
    K = assemble_stiffness(model, mesh)
    f = load_operator(field.n, model, mesh) @ field.knots
    return K, f


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Displacements (global), element end forces (local) and applied load."""

    displacements: np.ndarray
    element_forces: np.ndarray
    load: np.ndarray
    residual: float

    @property
    def nodal(self) -> np.ndarray:
        """Displacements reshaped to (N, 3): ux, uy, rz."""
        return self.displacements.reshape(-1, 3)


def _load_resultant(mesh: Mesh, f: np.ndarray) -> np.ndarray:
    F = f.reshape(-1, 3)
    x, y = mesh.coords[:, 0], mesh.coords[:, 1]
    moment = np.sum(x * F[:, 1] - y * F[:, 0] + F[:, 2])
    return np.array([F[:, 0].sum(), F[:, 1].sum(), moment])


def solve_system(model: LiningModel, mesh: Mesh, K: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Solve ``K u = f`` for one or several right-hand sides.

    With soil springs the system is positive definite and is solved by
    Cholesky. Without springs the ring floats: a load that is not
    self-equilibrated has no solution, and an equilibrated one is solved in
    the minimum-norm sense (no rigid-body content).
    """
    f = np.asarray(f, dtype=float)
    if model.k_f > 0:
        try:
            factor = scipy.linalg.cho_factor(K)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"stiffness matrix is not positive definite: {exc}")
        u = scipy.linalg.cho_solve(factor, f)
    else:
        cols = f.reshape(f.shape[0], -1)
        scale = np.abs(cols).max() * mesh.radius * mesh.n_nodes + 1e-300
        for col in cols.T:
            res = _load_resultant(mesh, col)
            if np.max(np.abs(res)) > 1e-9 * scale:
                raise SingularSystemError(
                    "load is not self-equilibrated and k_f = 0: soil springs are "
                    "required to counterbalance the asymmetric component of the pressure"
                )
        u = scipy.linalg.lstsq(K, f, cond=1e-12)[0]
    return u


def element_end_forces(model: LiningModel, mesh: Mesh, u: np.ndarray, f_local=None) -> np.ndarray:
    """Local end forces ``k T^T u_e - f_e`` per element.

    Columns are (axial_i, shear_i, moment_i, axial_j, shear_j, moment_j),
    acting on the element. `u` may carry a trailing axis of load cases, in
    which case the result has shape (N_e, 6, m).
    """
    u = np.asarray(u, dtype=float)
    kf = element_foundation_stiffness(model, mesh)
    out = np.empty((mesh.n_elements, 6) + u.shape[1:])
    for e in range(mesh.n_elements):
        k = element_beam_stiffness(model, mesh, e) + kf
        T = transformation_matrix(mesh.element_angles[e])
        out[e] = k @ (T.T @ u[mesh.element_dofs(e)])
    if f_local is not None:
        out -= f_local
    return out


def solve(model: LiningModel, mesh: Mesh, field: PressureField) -> SolveResult:
    """Assemble and solve the lining under `field`; recover element forces."""
    K = assemble_stiffness(model, mesh)
    f_local = np.array(
        [consistent_load(field, model, mesh, e) for e in range(mesh.n_elements)]
    )
    f = np.zeros(mesh.n_dof)
    for e in range(mesh.n_elements):
        f[mesh.element_dofs(e)] += transform_to_global(f_local[e], mesh.element_angles[e])
    u = solve_system(model, mesh, K, f)
    r = np.linalg.norm(K @ u - f)
    fnorm = np.linalg.norm(f)
    residual = float(r / fnorm) if fnorm > 0 else 0.0
    # Large rigid-body motion puts ||K u - f|| / ||f|| at the round-off floor
    # ||K|| ||u|| eps / ||f||, so solver health is judged by backward error.
    backward = r / (np.linalg.norm(K, 1) * np.linalg.norm(u, 1) + np.linalg.norm(f, 1) + 1e-300)
    if backward > SOLVER_RTOL:
        raise SingularSystemError(f"backward error {backward:.3e} exceeds {SOLVER_RTOL}")
    forces = element_end_forces(model, mesh, u, f_local)
    return SolveResult(displacements=u, element_forces=forces, load=f, residual=residual)


def hoop_forces(element_forces: np.ndarray) -> np.ndarray:
    """Nodal hoop force (compression positive), shape (N,) or (N, m).

    Element e has end node e and start node e + 1, so node k averages the
    compression of elements k and k - 1.
    """
    comp = 0.5 * (element_forces[:, 0] - element_forces[:, 3])
    return 0.5 * (comp + np.roll(comp, 1, axis=0))


def hoop_force_at(result: SolveResult, mesh: Mesh, theta: float) -> float:
    """Hoop force (kN, compression positive) at the node at `theta` degrees."""
    k = mesh.node_at(theta)
    return float(hoop_forces(result.element_forces)[k])


def radial_displacements(displacements: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Inward radial displacement at each node (m); accepts (3N,) or (3N, m)."""
    u = np.asarray(displacements)
    ux, uy = u[0::3], u[1::3]
    nx, ny = mesh.inward_normals[:, 0], mesh.inward_normals[:, 1]
    if u.ndim == 2:
        nx, ny = nx[:, None], ny[:, None]
    return ux * nx + uy * ny


def reaction_pressure(result: SolveResult, model: LiningModel, mesh: Mesh) -> np.ndarray:
    """Soil-spring reaction (kPa) at the nodes; positive when resisting inward motion."""
    return model.k_f * radial_displacements(result.displacements, mesh)


def net_pressure(total: PressureField, reaction) -> np.ndarray:
    """Pressure acting directly on the lining at the node angles: total minus reaction."""
    reaction = np.asarray(reaction, dtype=float)
    angles = np.arange(reaction.size) * (360.0 / reaction.size)
    return total(angles) - reaction
