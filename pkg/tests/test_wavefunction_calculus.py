import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from phasebundle import frame_transport as ft
from phasebundle import linear_structures as ls
from phasebundle import parameter_geometry as pg
from phasebundle import wavefunction_calculus as wf
from phasebundle.errors import DomainError, StructuralError

from conftest import OCTANT

G2 = ls.euclidean(2)
J_STD = ls.standard_complex(1)


@pytest.fixture(scope="module")
def plane():
    """n = 1 with the frame e = (1, -i)/2, so that z = x + i y."""
    frame = ft.Frame(J_STD, np.array([[0.5], [-0.5j]]), np.eye(2))
    return frame, wf.PrequantumData.from_metric(G2, J_STD)


def random_setting(seed, n=2):
    form = ls.euclidean(2 * n)
    J = ls.make_random(form, seed)
    X = np.random.default_rng(seed + 100).normal(size=(2 * n, 2 * n))
    return form, J, ft.frame_at(J, form), ls.tangent_projection(J, X - X.T)


def degree_basis(form, frame, top=2):
    n = frame.rank
    states = [wf.vacuum(form)]
    for i in range(n):
        states.append(wf.monomial_state(form, frame, np.eye(n, dtype=int)[i]))
    if top >= 2:
        for i in range(n):
            for j in range(i, n):
                a = np.zeros(n, dtype=int)
                a[i] += 1
                a[j] += 1
                states.append(wf.monomial_state(form, frame, a))
    return states


class TestPolyGaussian:
    def test_requires_metric(self):
        with pytest.raises(StructuralError):
            wf.PolyGaussian(ls.standard_symplectic(1), {(0, 0): 1.0})

    def test_zero_coefficients_pruned(self):
        psi = wf.PolyGaussian(G2, {(0, 0): 1.0, (1, 0): 0.0})
        assert list(psi.coeffs) == [(0, 0)]

    def test_bad_exponent(self):
        with pytest.raises(StructuralError):
            wf.PolyGaussian(G2, {(1,): 1.0})

    def test_pointwise(self):
        psi = wf.PolyGaussian(G2, {(1, 0): 2.0})
        x = np.array([0.3, -0.7])
        assert psi(x) == pytest.approx(0.6 * math.exp(-0.25 * 0.58))

    def test_json_round_trip(self, plane):
        frame, _ = plane
        psi = wf.monomial_state(G2, frame, (2,))
        data = json.loads(json.dumps(psi.to_json()))
        assert {"metric", "terms"} <= set(data)
        back = wf.PolyGaussian.from_json(data)
        assert back.coeffs == psi.coeffs

    def test_metric_mismatch(self):
        other = ls.BilinearForm(2 * np.eye(2), ls.METRIC)
        with pytest.raises(StructuralError):
            wf.inner_product(wf.vacuum(G2), wf.vacuum(other))


class TestPrequantum:
    def test_potential_differential(self):
        form = ls.euclidean(4)
        pre = wf.PrequantumData.from_metric(form, ls.make_random(form, 2))
        np.testing.assert_allclose(pre.theta - pre.theta.T, pre.omega.components, atol=1e-15)

    def test_wrong_potential(self):
        pre = wf.PrequantumData.from_metric(G2, J_STD)
        with pytest.raises(DomainError):
            wf.PrequantumData(J_STD, pre.omega, pre.theta.T)


class TestCovariantDerivative:
    def test_vacuum_is_polarized(self):
        form, J, frame, _ = random_setting(1)
        pre = wf.PrequantumData.from_metric(form, J)
        for e in frame.vectors.T:
            out = wf.covariant_derivative(wf.vacuum(form), e.conj(), pre)
            assert math.sqrt(wf.norm_squared(out)) < 1e-12

    def test_holomorphic_direction_on_vacuum(self, plane):
        frame, pre = plane
        out = wf.covariant_derivative(wf.vacuum(G2), frame.vectors[:, 0], pre)
        zbar = wf.monomial_state(G2, frame, (1,), conjugate=True)
        # proportional to zbar * vacuum
        ratio = {a: out.coeffs[a] / zbar.coeffs[a] for a in zbar.coeffs}
        values = list(ratio.values())
        assert set(out.coeffs) == set(zbar.coeffs)
        assert all(abs(v - values[0]) < 1e-15 for v in values)
        assert values[0] == pytest.approx(-0.5)

    def test_linearity(self, plane):
        frame, pre = plane
        a = wf.monomial_state(G2, frame, (2,))
        b = wf.monomial_state(G2, frame, (1,), conjugate=True)
        u = np.array([0.3 + 1j, -0.2])
        lhs = wf.covariant_derivative(a + b, u, pre)
        rhs = wf.covariant_derivative(a, u, pre) + wf.covariant_derivative(b, u, pre)
        assert (lhs - rhs).coeffs == {}

    def test_finite_differences(self):
        form, J, frame, _ = random_setting(4)
        pre = wf.PrequantumData.from_metric(form, J)
        rng = np.random.default_rng(9)
        psi = wf.monomial_state(form, frame, (1, 1)) + wf.monomial_state(form, frame, (0, 1), conjugate=True)
        u = rng.normal(size=4) + 1j * rng.normal(size=4)
        out = wf.covariant_derivative(psi, u, pre)
        h = 1e-3

        def directional(x, v):
            # fourth-order central difference
            return (-psi(x + 2 * h * v) + 8 * psi(x + h * v) - 8 * psi(x - h * v) + psi(x - 2 * h * v)) / (12 * h)

        for _ in range(10):
            x = rng.normal(size=4)
            expected = directional(x, u.real) + 1j * directional(x, u.imag) - 1j * pre.theta_at(x, u) * psi(x)
            assert abs(out(x) - expected) < 1e-8

    def test_wrong_direction_size(self, plane):
        _, pre = plane
        with pytest.raises(StructuralError):
            wf.covariant_derivative(wf.vacuum(G2), np.ones(3), pre)


class TestInnerProduct:
    def test_vacuum_norm(self):
        assert wf.inner_product(wf.vacuum(G2), wf.vacuum(G2)) == pytest.approx(2 * math.pi)

    def test_odd_moment(self, plane):
        frame, _ = plane
        z = wf.monomial_state(G2, frame, (1,))
        assert wf.inner_product(z, wf.vacuum(G2)) == 0

    def test_z_norm_against_quadrature(self, plane):
        frame, _ = plane
        z = wf.monomial_state(G2, frame, (1,))
        brute, _ = integrate.dblquad(lambda y, x: abs(z(np.array([x, y]))) ** 2, -12, 12, -12, 12,
                                     epsabs=1e-12, epsrel=1e-12)
        assert brute == pytest.approx(4 * math.pi, rel=1e-9)
        assert wf.norm_squared(z) == pytest.approx(4 * math.pi, rel=1e-14)

    def test_vacuum_norm_independent_of_metric(self):
        G = np.array([[2.0, 0.3], [0.3, 1.0]])
        form = ls.BilinearForm(G, ls.METRIC)
        assert wf.norm_squared(wf.vacuum(form)) == pytest.approx(2 * math.pi)

    def test_quadrature_oracle_general_state(self):
        form, J, frame, _ = random_setting(6, n=1)
        psi = wf.monomial_state(form, frame, (2,)) + wf.monomial_state(form, frame, (1,), conjugate=True).scaled(0.5j)
        phi = wf.monomial_state(form, frame, (1,)).times({(1, 0): 1.0})
        brute_re, _ = integrate.dblquad(lambda y, x: (np.conj(psi([x, y])) * phi([x, y])).real, -14, 14, -14, 14,
                                        epsabs=1e-11)
        brute_im, _ = integrate.dblquad(lambda y, x: (np.conj(psi([x, y])) * phi([x, y])).imag, -14, 14, -14, 14,
                                        epsabs=1e-11)
        assert wf.inner_product(psi, phi) == pytest.approx(brute_re + 1j * brute_im, abs=1e-8)

    def test_isserlis(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert wf.gaussian_moment((2, 2), cov) == pytest.approx(2.0 * 1.0 + 2 * 0.25)
        assert wf.gaussian_moment((4, 0), cov) == pytest.approx(3 * 4.0)
        assert wf.gaussian_moment((1, 2), cov) == 0

    def test_hermitian_symmetry(self):
        form, _, frame, _ = random_setting(2)
        a, b = degree_basis(form, frame)[1:3]
        assert wf.inner_product(a, b) == pytest.approx(np.conj(wf.inner_product(b, a)))


class TestHolomorphy:
    def test_vacuum(self, plane):
        frame, pre = plane
        assert wf.holomorphy_residual(wf.vacuum(G2), pre, frame) < 1e-12

    def test_holomorphic_monomials(self):
        form, J, frame, _ = random_setting(3)
        pre = wf.PrequantumData.from_metric(form, J)
        for psi in degree_basis(form, frame):
            assert wf.holomorphy_residual(psi, pre, frame) < 1e-12

    def test_antiholomorphic_positive(self, plane):
        frame, pre = plane
        zbar = wf.monomial_state(G2, frame, (1,), conjugate=True)
        assert wf.holomorphy_residual(zbar, pre, frame) > 0.1

    def test_frame_mismatch(self, plane):
        _, pre = plane
        other = ft.frame_at(ls.ComplexStructure(-J_STD.components))
        with pytest.raises(StructuralError):
            wf.holomorphy_residual(wf.vacuum(G2), pre, other)


class TestTransportState:
    def test_vacuum_unchanged(self):
        form, J, frame, dJ = random_setting(5)
        out = wf.transport_state(wf.vacuum(form), J, dJ, frame)
        assert math.sqrt(wf.norm_squared(out - wf.vacuum(form))) < 1e-12

    def test_dual_basis_rule(self):
        form, J, frame, dJ = random_setting(7)
        t = 1e-3
        C = wf.variation_coefficients(frame, t * dJ)
        n = frame.rank
        for i in range(n):
            psi = wf.monomial_state(form, frame, np.eye(n, dtype=int)[i])
            delta = wf.transport_state(psi, J, t * dJ, frame) - psi
            expected = wf.PolyGaussian(form, {})
            for j in range(n):
                zbar = wf.monomial_state(form, frame, np.eye(n, dtype=int)[j], conjugate=True)
                expected = expected + zbar.scaled(-0.5j * C[i, j])
            assert wf.norm_squared(delta - expected) < 1e-24

    def test_non_tangent_variation(self):
        form, J, frame, _ = random_setting(5)
        with pytest.raises(DomainError):
            wf.transport_state(wf.vacuum(form), J, J.components, frame)

    def test_frame_mismatch(self):
        form, J, _, dJ = random_setting(5)
        with pytest.raises(StructuralError):
            wf.transport_state(wf.vacuum(form), J, dJ, ft.frame_at(ls.make_random(form, 99), form))

    @pytest.mark.parametrize("seed", [0, 1])
    def test_holomorphy_to_second_order(self, seed):
        form, J, frame, dJ = random_setting(seed)
        ts = np.array([1e-2, 1e-3, 1e-4])
        for psi in degree_basis(form, frame):
            res = []
            for t in ts:
                Jt = ls.polar_correct(J.components + t * dJ)
                pre_t = wf.PrequantumData.from_metric(form, Jt)
                moved = wf.transport_state(psi, J, t * dJ, frame)
                total = 0.0
                for e in frame.vectors.T:
                    ebar_t = e.conj() + 0.5j * t * dJ @ e.conj()
                    total += wf.norm_squared(wf.covariant_derivative(moved, ebar_t, pre_t))
                res.append(math.sqrt(total))
            slope = np.polyfit(np.log(ts), np.log(res), 1)[0]
            assert slope >= 1.9

    def test_unitarity_first_order(self):
        form, J, frame, dJ = random_setting(2)
        psi = degree_basis(form, frame)[4]
        n0 = wf.norm_squared(psi)
        drift = [abs(wf.norm_squared(wf.transport_state(psi, J, t * dJ, frame)) - n0) for t in (1e-2, 1e-3)]
        assert drift[0] / drift[1] > 90

    def test_generator_matches_euler_step(self):
        form, J, frame, dJ = random_setting(8)
        t = 1e-3
        K = wf.transport_generator(J, t * dJ)
        psi = wf.monomial_state(form, frame, (1, 0))
        moved = wf.transport_state(psi, J, t * dJ, frame)
        x = np.random.default_rng(0).normal(size=4)
        f = lambda y: psi(y) / wf.vacuum(form)(y)
        h = 1e-5
        deriv = (f(x + h * K.real @ x) - f(x - h * K.real @ x)) / (2 * h) \
            + 1j * (f(x + h * K.imag @ x) - f(x - h * K.imag @ x)) / (2 * h)
        # on a linear holomorphic polynomial the Euler step is exact up to the vacuum factor
        got = moved(x) / wf.vacuum(form)(x) - f(x)
        assert got == pytest.approx(deriv, abs=1e-9)


class TestLoopStateHolonomy:
    @pytest.mark.parametrize("k", [1, 2])
    def test_matches_frame_transport(self, k, quat2):
        loop = pg.polygon_loop(pg.SPHERE, OCTANT, 300).to_structures(quat2)
        frame = ft.frame_at(loop.samples[0])
        base = ft.loop_holonomy(loop, frame, "V")
        mine = wf.loop_state_holonomy(loop, ls.euclidean(4), k, frame)
        theirs = ft.induced_holonomy(base, "Sym^k", k).operator
        assert np.linalg.norm(mine - theirs, 2) < 1e-4

    def test_level_zero_trivial(self, quat2):
        loop = pg.polygon_loop(pg.SPHERE, OCTANT, 100).to_structures(quat2)
        np.testing.assert_allclose(wf.loop_state_holonomy(loop, ls.euclidean(4), 0), [[1.0]], atol=1e-15)

    def test_open_path(self, quat2):
        arc = pg.geodesic_arc(pg.SPHERE, (0, 0, 1), (1, 0, 0), 4).to_structures(quat2)
        with pytest.raises(StructuralError):
            wf.loop_state_holonomy(arc, ls.euclidean(4), 1)

    def test_unknown_scheme(self, quat2):
        loop = pg.polygon_loop(pg.SPHERE, OCTANT, 10).to_structures(quat2)
        with pytest.raises(DomainError):
            wf.loop_state_holonomy(loop, ls.euclidean(4), 1, scheme="rk4")

    def test_euler_first_order_at_level_one(self, quat2):
        loop = pg.polygon_loop(pg.SPHERE, OCTANT, 300).to_structures(quat2)
        a = wf.loop_state_holonomy(loop, ls.euclidean(4), 1, scheme="euler")
        b = wf.loop_state_holonomy(loop, ls.euclidean(4), 1, scheme="pullback")
        np.testing.assert_allclose(a, b, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.floats(-2, 2), st.floats(-2, 2)),
                min_size=1, max_size=4))
def test_norm_is_nonnegative_and_sesquilinear(terms):
    coeffs = {}
    for a, b, re, im in terms:
        coeffs[(a, b)] = coeffs.get((a, b), 0) + complex(re, im)
    psi = wf.PolyGaussian(G2, coeffs)
    assert wf.norm_squared(psi) >= -1e-12
    assert wf.inner_product(psi.scaled(2j), psi) == pytest.approx(-2j * wf.inner_product(psi, psi), abs=1e-9)
