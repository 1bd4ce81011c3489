import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from liningbayes import fem
from liningbayes.fem import (
    ConfigurationError,
    LiningModel,
    NodeLookupError,
    SingularSystemError,
    build_mesh,
    element_beam_stiffness,
    element_foundation_stiffness,
    fixity_factor,
    joint_adjustment,
    transform_to_global,
    transformation_matrix,
)
from liningbayes.parameterization import PressureField

# Reference lining constants: E = 3.5e7 kPa, t = 0.35 m, unit width.
EA_REF = 1.225e7
R_REF = 3.1


def ring(n_elements=24, k_f=1000.0, **kw):
    model = LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=k_f, n_elements=n_elements, **kw)
    return model, build_mesh(model)


def oval(theta):
    r = np.radians(theta)
    return 300.0 + 120.0 * np.cos(2 * r) + 40.0 * np.sin(4 * r)


class TestLiningModel:
    def test_section_constants(self, reference_model):
        assert reference_model.EA == pytest.approx(EA_REF)
        assert reference_model.EI == pytest.approx(1.2505e5, rel=1e-4)
        assert reference_model.radius == pytest.approx(R_REF)

    def test_eta_reduces_bending_only(self):
        m = LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=0.0, eta=0.26)
        assert m.bending_stiffness == pytest.approx(0.26 * m.EI)
        assert m.EA == pytest.approx(EA_REF)

    @pytest.mark.parametrize("bad", [
        dict(n_elements=7), dict(n_elements=2), dict(eta=0.0), dict(eta=1.5),
        dict(k_f=-1.0), dict(joints=(0.0,), k_phi=0.0),
    ])
    def test_invalid(self, bad):
        kw = dict(diameter=6.2, EA=1e7, EI=1e5, k_f=1000.0)
        kw.update(bad)
        with pytest.raises(ConfigurationError):
            LiningModel(**kw)


class TestBuildMesh:
    def test_square(self):
        mesh = build_mesh(LiningModel(2.0, 1.0, 1.0, 0.0, n_elements=4))
        np.testing.assert_allclose(mesh.node_angles, [0, 90, 180, 270])
        assert mesh.length == pytest.approx(np.sqrt(2.0))
        np.testing.assert_allclose(mesh.coords, [[0, 1], [1, 0], [0, -1], [-1, 0]], atol=1e-15)

    def test_reference_element_length(self, reference_mesh):
        assert reference_mesh.length == pytest.approx(6.2 * np.sin(np.radians(1.8)), rel=1e-15)
        assert reference_mesh.length == pytest.approx(0.19477, abs=3e-5)
        assert reference_mesh.n_dof == 300

    def test_nodes_on_circle_and_chords_equal(self, reference_mesh):
        m = reference_mesh
        np.testing.assert_allclose(np.hypot(*m.coords.T), R_REF, rtol=1e-14)
        i, j = m.connectivity.T
        np.testing.assert_allclose(np.linalg.norm(m.coords[i] - m.coords[j], axis=1), m.length)

    def test_closed_ring(self, reference_mesh):
        # every node is the start of one element and the end of another
        i, j = reference_mesh.connectivity.T
        assert sorted(i) == sorted(j) == list(range(100))

    def test_joint_off_node(self):
        model = LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, joints=(17.0,), k_phi=1e4)
        with pytest.raises(ConfigurationError):
            build_mesh(model)

    def test_joint_on_node(self):
        model = LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, joints=(18.0, 378.0),
                                         k_phi=1e4)
        assert build_mesh(model).joint_nodes == {5}

    def test_node_lookup(self, reference_mesh):
        assert reference_mesh.node_at(7.2) == 2
        assert reference_mesh.node_at(-3.6) == 99
        with pytest.raises(NodeLookupError):
            reference_mesh.node_at(1.0)


class TestElementStiffness:
    def test_rigid_joint_limit_is_plain_beam(self):
        model, mesh = ring(joints=(0.0,), k_phi=np.inf)
        plain = element_beam_stiffness(*ring(), 0)
        np.testing.assert_array_equal(element_beam_stiffness(model, mesh, 0), plain)
        np.testing.assert_array_equal(joint_adjustment(1.0, 1.0, 0.5), np.eye(6))

    def test_axial_entry(self, small_model, small_mesh):
        k = element_beam_stiffness(small_model, small_mesh, 3)
        assert k[0, 0] == pytest.approx(small_model.EA / small_mesh.length)

    def test_half_fixity(self):
        EI, L = 2.0e4, 0.4
        assert fixity_factor(3 * EI / L, EI, L) == pytest.approx(0.5)
        assert fixity_factor(np.inf, EI, L) == 1.0

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 2.0))
    def test_condensed_joint_matches_explicit_spring_dofs(self, r_i, r_j, L):
        # Beam with its own end rotations tied to the nodal rotations through
        # springs k = 3 EI r / (L (1 - r)); condensing the beam rotations out
        # must reproduce k_b @ A.
        EI, EA = 1.0e4, 1.0e6
        kb = fem._plain_beam(EA, EI, L)
        springs = [3 * EI * r / (L * (1 - r)) for r in (r_i, r_j)]
        # DOFs: 6 nodal (u_i, v_i, th_i, u_j, v_j, th_j) + 2 beam-end rotations
        K = np.zeros((8, 8))
        beam_map = [0, 1, 6, 3, 4, 7]
        K[np.ix_(beam_map, beam_map)] += kb
        for node_rot, beam_rot, k in ((2, 6, springs[0]), (5, 7, springs[1])):
            K[np.ix_([node_rot, beam_rot], [node_rot, beam_rot])] += k * np.array([[1, -1], [-1, 1]])
        a, b = np.arange(6), np.array([6, 7])
        cond = K[np.ix_(a, a)] - K[np.ix_(a, b)] @ np.linalg.solve(K[np.ix_(b, b)], K[np.ix_(b, a)])
        ours = kb @ joint_adjustment(r_i, r_j, L)
        np.testing.assert_allclose(ours, cond, rtol=1e-9, atol=1e-9 * np.abs(cond).max())

    @given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_jointed_stiffness_symmetric(self, r_i, r_j):
        kb = fem._plain_beam(1e6, 1e4, 0.3)
        k = kb @ joint_adjustment(r_i, r_j, 0.3)
        np.testing.assert_allclose(k, k.T, atol=1e-9 * np.abs(k).max())

    def test_foundation_zero_without_springs(self, small_mesh):
        model = LiningModel(6.2, 1e7, 1e5, k_f=0.0, n_elements=24)
        np.testing.assert_array_equal(element_foundation_stiffness(model, small_mesh), 0.0)

    def test_foundation_entry_and_definiteness(self, small_model, small_mesh):
        m = element_foundation_stiffness(small_model, small_mesh)
        L = small_mesh.length
        assert m[1, 1] == pytest.approx(small_model.k_f * 13 * L / 35)
        np.testing.assert_allclose(m, m.T)
        assert np.linalg.eigvalsh(m).min() > -1e-12 * np.abs(m).max()


class TestTransform:
    def test_zero_angle_is_identity(self):
        k = np.arange(36.0).reshape(6, 6)
        np.testing.assert_array_equal(transform_to_global(k, 0.0), k)

    def test_quarter_turn_axial_force(self):
        g = transform_to_global(np.array([5.0, 0, 0, 0, 0, 0]), np.pi / 2)
        np.testing.assert_allclose(g, [0, 5.0, 0, 0, 0, 0], atol=1e-14)

    @given(st.floats(-10, 10))
    def test_orthogonal(self, theta):
        T = transformation_matrix(theta)
        np.testing.assert_allclose(T @ T.T, np.eye(6), atol=1e-14)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            transform_to_global(np.zeros(3), 0.0)


class TestConsistentLoad:
    @pytest.mark.parametrize("e", [0, 7, 23])
    def test_constant_pressure(self, small_model, small_mesh, e):
        p = 250.0
        L = small_mesh.length
        f = fem.consistent_load(PressureField.constant(p, n=22), small_model, small_mesh, e)
        expected = np.array([0, p * L / 2, p * L**2 / 12, 0, p * L / 2, -p * L**2 / 12])
        np.testing.assert_allclose(f, expected, rtol=1e-12, atol=1e-12 * p * L)

    def test_zero_field(self, small_model, small_mesh):
        f = fem.consistent_load(PressureField(np.zeros(22)), small_model, small_mesh, 4)
        np.testing.assert_array_equal(f, 0.0)

    @given(arrays(np.float64, 22, elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, 22, elements=st.floats(-1e3, 1e3)))
    @settings(max_examples=30)
    def test_linear(self, q1, q2):
        model, mesh = ring(n_elements=16)
        f = lambda q: fem.consistent_load(PressureField(q), model, mesh, 5)
        np.testing.assert_allclose(f(q1 + q2), f(q1) + f(q2), atol=1e-9)

    def test_total_transverse_force_equals_integral(self, small_model, small_mesh):
        # Sum of the two end shears equals the integral of the line load.
        field = PressureField.from_function(oval, 720)
        e = 3
        f = fem.consistent_load(field, small_model, small_mesh, e)
        L, span = small_mesh.length, small_mesh.spacing
        s = np.linspace(0, L, 20001)
        theta = (e + 1) * span - s / L * span
        assert f[1] + f[4] == pytest.approx(np.trapezoid(field(theta), s), rel=1e-7)


class TestAssemble:
    def test_symmetric(self):
        model, mesh = ring(n_elements=24, joints=(0, 90, 180, 270), k_phi=1e4, eta=0.5)
        K, _ = fem.assemble(model, mesh, PressureField.constant(1.0))
        assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()

    def test_positive_definite_with_springs(self):
        model, mesh = ring(n_elements=8)
        K = fem.assemble_stiffness(model, mesh)
        assert np.linalg.eigvalsh(K).min() > 0

    def test_symmetric_pressure_has_zero_resultant(self, small_model, small_mesh):
        _, f = fem.assemble(small_model, small_mesh, PressureField.from_function(oval, 360))
        F = f.reshape(-1, 3)
        assert abs(F[:, 0].sum()) < 1e-9 * np.abs(F).max()
        assert abs(F[:, 1].sum()) < 1e-9 * np.abs(F).max()


class TestSolve:
    def test_uniform_pressure_thin_ring(self, reference_model, reference_mesh):
        q = 200.0
        res = fem.solve(reference_model, reference_mesh, PressureField.constant(q))
        radial = fem.radial_displacements(res.displacements, reference_mesh)
        closed = q * R_REF**2 / (EA_REF + reference_model.k_f * R_REF**2)
        assert closed * 1000 == pytest.approx(0.1568, abs=1e-4)
        np.testing.assert_allclose(radial, closed, rtol=5e-3)
        assert np.ptp(radial) < 1e-9 * closed
        hoop = fem.hoop_forces(res.element_forces)
        assert hoop[0] == pytest.approx(q * R_REF, rel=5e-3)
        assert np.ptp(hoop) < 1e-3 * hoop.mean()
        assert res.residual <= 1e-10

    def test_zero_pressure(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField(np.zeros(4)))
        np.testing.assert_array_equal(res.displacements, 0.0)
        assert fem.hoop_force_at(res, small_mesh, 0.0) == 0.0

    def test_displacement_length(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField.from_function(oval, 90))
        assert res.displacements.shape == (3 * small_mesh.n_elements,)
        assert res.nodal.shape == (small_mesh.n_nodes, 3)

    def test_energy_consistency(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField.from_function(oval, 90))
        K = fem.assemble_stiffness(small_model, small_mesh)
        u = res.displacements
        assert u @ K @ u == pytest.approx(u @ res.load, rel=1e-10)

    def test_asymmetric_load_without_springs(self):
        model, mesh = ring(k_f=0.0)
        lopsided = PressureField.from_function(lambda t: 100 + 80 * np.cos(np.radians(t)), 90)
        with pytest.raises(SingularSystemError, match="soil springs"):
            fem.solve(model, mesh, lopsided)

    def test_equilibrated_load_without_springs(self):
        model, mesh = ring(k_f=0.0)
        res = fem.solve(model, mesh, PressureField.constant(200.0))
        # a free polygon carries the pressure on its chords, at the apothem
        apothem = R_REF * np.cos(np.pi / mesh.n_elements)
        hoop = fem.hoop_forces(res.element_forces)
        np.testing.assert_allclose(hoop, 200 * apothem, rtol=1e-9)

    def test_hoop_force_requires_node(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField.constant(1.0))
        with pytest.raises(NodeLookupError):
            fem.hoop_force_at(res, small_mesh, 1.0)

    def test_deterministic(self, small_model, small_mesh):
        f = PressureField.from_function(oval, 90)
        a = fem.solve(small_model, small_mesh, f)
        b = fem.solve(small_model, small_mesh, f)
        np.testing.assert_array_equal(a.displacements, b.displacements)


class TestReactionAndNet:
    def test_zero_displacement(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField(np.zeros(2)))
        np.testing.assert_array_equal(fem.reaction_pressure(res, small_model, small_mesh), 0.0)

    def test_uniform(self, reference_model, reference_mesh):
        res = fem.solve(reference_model, reference_mesh, PressureField.constant(200.0))
        u = fem.radial_displacements(res.displacements, reference_mesh)
        react = fem.reaction_pressure(res, reference_model, reference_mesh)
        np.testing.assert_allclose(react, reference_model.k_f * u)
        assert (react > 0).all()
        net = fem.net_pressure(PressureField.constant(200.0), react)
        np.testing.assert_allclose(net, 200.0 - reference_model.k_f * u)

    def test_doubling_springs_doubles_reaction(self, small_model, small_mesh):
        res = fem.solve(small_model, small_mesh, PressureField.from_function(oval, 90))
        r1 = fem.reaction_pressure(res, small_model, small_mesh)
        r2 = fem.reaction_pressure(res, small_model.with_(k_f=2 * small_model.k_f), small_mesh)
        np.testing.assert_allclose(r2, 2 * r1)

    def test_zero_reaction(self, small_mesh):
        field = PressureField.from_function(oval, 90)
        np.testing.assert_array_equal(fem.net_pressure(field, np.zeros(small_mesh.n_nodes)),
                                      field(small_mesh.node_angles))

    def test_net_pressure_on_free_ring_reproduces_deformation(self):
        # The net pressure carries the whole load once the springs are gone:
        # applying it to a spring-free ring gives the same convergences up to
        # the discretization of the reaction as a nodal pressure.
        model, mesh = ring(n_elements=96, eta=0.26)
        total = PressureField.from_function(oval, 720)
        res = fem.solve(model, mesh, total)
        net = fem.net_pressure(total, fem.reaction_pressure(res, model, mesh))
        free = model.with_(k_f=0.0)
        res_free = fem.solve(free, mesh, PressureField(net))
        r1 = fem.radial_displacements(res.displacements, mesh)
        r2 = fem.radial_displacements(res_free.displacements, mesh)
        half = mesh.n_nodes // 2
        c1, c2 = r1[:half] + r1[half:], r2[:half] + r2[half:]
        np.testing.assert_allclose(c2, c1, atol=3e-3 * np.abs(c1).max())


class TestProperties:
    @given(arrays(np.float64, 12, elements=st.floats(0, 2000)),
           arrays(np.float64, 12, elements=st.floats(0, 2000)))
    @settings(max_examples=20, deadline=None)
    def test_superposition(self, q1, q2):
        model, mesh = ring(n_elements=24, eta=0.26)
        u = lambda q: fem.solve(model, mesh, PressureField(q)).displacements
        a, b, ab = u(q1), u(q2), u(q1 + q2)
        scale = max(np.abs(ab).max(), 1e-30)
        np.testing.assert_allclose(ab, a + b, atol=1e-9 * scale)

    @given(arrays(np.float64, 24, elements=st.floats(0, 2000)))
    @settings(max_examples=15, deadline=None)
    def test_rotation_by_one_node(self, q):
        model, mesh = ring(n_elements=24, eta=0.26)
        base = fem.solve(model, mesh, PressureField(q)).nodal
        turned = fem.solve(model, mesh, PressureField(q).rotated(1)).nodal
        a = np.radians(mesh.spacing)
        c, s = np.cos(a), np.sin(a)
        # clockwise rotation of the in-plane translation components
        expect = np.column_stack([
            c * base[:, 0] + s * base[:, 1], -s * base[:, 0] + c * base[:, 1], base[:, 2]
        ])
        expect = np.roll(expect, 1, axis=0)
        scale = max(np.abs(base).max(), 1e-30)
        np.testing.assert_allclose(turned, expect, atol=1e-9 * scale)

    def test_joint_softening_is_monotone(self):
        field = PressureField.from_function(oval, 720)
        peaks = []
        for k_phi in [1e7, 1e5, 3e4, 1e4, 3e3, 1e3]:
            model, mesh = ring(n_elements=48, joints=tuple(np.arange(6) * 60.0), k_phi=k_phi)
            res = fem.solve(model, mesh, field)
            r = fem.radial_displacements(res.displacements, mesh)
            peaks.append(np.abs(r[:24] + r[24:]).max())
        assert np.all(np.diff(peaks) >= -1e-15)
        assert peaks[-1] > peaks[0]
