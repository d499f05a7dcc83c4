import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasebundle import linear_structures as ls
from phasebundle.errors import CompatibilityError, DomainError, StructuralError

from conftest import random_unit

J_STD = np.array([[0.0, -1.0], [1.0, 0.0]])


class TestValidate:
    def test_standard_structure_is_compatible(self):
        pair = ls.CompatiblePair(ls.euclidean(2), ls.ComplexStructure(J_STD))
        assert ls.validate(pair) == []

    def test_identity_reports_square_violation(self):
        J = ls.ComplexStructure(np.eye(2), check=False)
        names = [name for name, _ in ls.validate(ls.CompatiblePair(ls.euclidean(2), J))]
        assert "J squared" in names

    def test_random_structure_revalidates(self):
        for form in (ls.euclidean(4), ls.standard_symplectic(2)):
            J = ls.make_random(form, 7)
            assert ls.validate(ls.CompatiblePair(form, J)) == []

    def test_dimension_mismatch(self):
        with pytest.raises(StructuralError):
            ls.validate(ls.CompatiblePair(ls.euclidean(4), ls.ComplexStructure(J_STD)))

    def test_non_square_structure_rejected(self):
        with pytest.raises(DomainError):
            ls.ComplexStructure(np.eye(2))


class TestDerivePartner:
    def test_metric_to_symplectic(self):
        omega = ls.derive_partner(ls.euclidean(2), ls.ComplexStructure(J_STD))
        assert omega.kind == ls.SYMPLECTIC
        e1, e2 = np.eye(2)
        # g(J e1, e2) = 1
        assert omega(e1, e2) == pytest.approx(1.0)
        np.testing.assert_allclose(omega.components, J_STD.T)

    def test_symplectic_round_trip(self):
        omega = ls.BilinearForm(np.array([[0.0, 1.0], [-1.0, 0.0]]), ls.SYMPLECTIC)
        g = ls.derive_partner(omega, ls.ComplexStructure(J_STD))
        np.testing.assert_allclose(g.components, np.eye(2), atol=1e-15)

    def test_quaternionic_partner_is_orthogonal(self, quat2):
        omega1 = ls.derive_partner(ls.euclidean(4), ls.ComplexStructure(quat2.generators[0]))
        W = omega1.components
        np.testing.assert_allclose(W, -W.T)
        np.testing.assert_allclose(W @ W.T, np.eye(4), atol=1e-15)

    def test_incompatible_raises(self):
        J = ls.ComplexStructure(np.array([[0.0, -2.0], [0.5, 0.0]]))
        with pytest.raises(CompatibilityError):
            ls.derive_partner(ls.euclidean(2), J)

    @pytest.mark.parametrize("seed", range(5))
    def test_double_partner_returns_form(self, seed):
        for form in (ls.euclidean(6), ls.standard_symplectic(3)):
            J = ls.make_random(form, seed)
            back = ls.derive_partner(ls.derive_partner(form, J), J)
            assert np.max(np.abs(back.components - form.components)) < 1e-12


class TestTriples:
    def test_quaternionic_product(self, quat2):
        J1, J2, J3 = quat2.generators
        np.testing.assert_array_equal(J1 @ J2, J3)

    def test_paraquaternionic_squares(self, para1):
        J0, J1, J2 = para1.generators
        np.testing.assert_array_equal(J1 @ J1, np.eye(2))
        np.testing.assert_array_equal(J0, [[0, -1], [1, 0]])
        np.testing.assert_array_equal(J1, [[0, 1], [1, 0]])
        np.testing.assert_array_equal(J2, [[1, 0], [0, -1]])

    def test_pauli_product(self, para1):
        # sigma_1 sigma_3 = -i sigma_2 = J0
        J0, J1, J2 = para1.generators
        np.testing.assert_array_equal(J1 @ J2, J0)

    def test_odd_quaternionic_rejected(self):
        with pytest.raises(DomainError):
            ls.standard_triple(ls.QUATERNIONIC, 3)

    @pytest.mark.parametrize("kind,n", [("quaternionic", 2), ("quaternionic", 4), ("quaternionic", 6),
                                        ("paraquaternionic", 1), ("paraquaternionic", 2),
                                        ("paraquaternionic", 3), ("paraquaternionic", 4)])
    def test_relations_all_pairs(self, kind, n):
        assert ls.standard_triple(kind, n).relation_defect() < 1e-12

    def test_signature(self, quat2, para1):
        np.testing.assert_array_equal(quat2.signature, np.eye(3))
        np.testing.assert_array_equal(para1.signature, np.diag([1.0, -1.0, -1.0]))


class TestJXi:
    def test_pole_gives_generator(self, quat2):
        np.testing.assert_array_equal(ls.j_xi(quat2, (0, 0, 1)).components, quat2.generators[2])

    def test_orthogonal_product(self, quat2):
        A = ls.j_xi(quat2, (1, 0, 0)).components
        B = ls.j_xi(quat2, (0, 1, 0)).components
        np.testing.assert_array_equal(A @ B, quat2.generators[2])

    def test_hyperboloid_point_squares(self, para1):
        t = 0.5
        J = ls.j_xi(para1, (np.cosh(t), np.sinh(t), 0.0)).components
        assert np.max(np.abs(J @ J + np.eye(2))) < 1e-12

    @pytest.mark.parametrize("xi", [(1.0, 0.0, 0.1), (0.0, 0.0, 0.0)])
    def test_off_sphere(self, quat2, xi):
        with pytest.raises(DomainError):
            ls.j_xi(quat2, xi)

    def test_lower_sheet_rejected(self, para1):
        with pytest.raises(DomainError):
            ls.j_xi(para1, (-1.0, 0.0, 0.0))

    @pytest.mark.parametrize("kind", ["quaternionic", "paraquaternionic"])
    def test_product_identity_random(self, kind):
        triple = ls.standard_triple(kind, 2)
        manifold = "sphere" if kind == "quaternionic" else "hyperboloid"
        rng = np.random.default_rng(11)
        worst = max(ls.product_identity_defect(triple, random_unit(rng, manifold), random_unit(rng, manifold))
                    for _ in range(100))
        assert worst < 1e-12


class TestMakeRandom:
    def test_orthogonal_structure(self):
        J = ls.make_random(ls.euclidean(2), 1).components
        np.testing.assert_allclose(J.T @ J, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(J @ J, -np.eye(2), atol=1e-12)

    def test_deterministic(self):
        a = ls.make_random(ls.euclidean(4), 2).components
        b = ls.make_random(ls.euclidean(4), 2).components
        np.testing.assert_array_equal(a, b)

    def test_symplectic_positivity(self):
        omega = ls.standard_symplectic(1)
        J = ls.make_random(omega, 3)
        g = omega.components @ J.components
        assert np.linalg.eigvalsh(0.5 * (g + g.T)).min() > 0

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(1, 3), metric=st.booleans())
    def test_always_compatible(self, seed, n, metric):
        form = ls.euclidean(2 * n) if metric else ls.standard_symplectic(n)
        assert ls.validate(ls.CompatiblePair(form, ls.make_random(form, seed))) == []


class TestTangentVariation:
    def test_generator_is_tangent_at_j3(self, quat2):
        tv = ls.TangentVariation(ls.ComplexStructure(quat2.generators[2]), quat2.generators[0])
        assert tv.violations(ls.euclidean(4)) == []

    def test_commuting_variation_flagged(self, quat2):
        J = ls.ComplexStructure(quat2.generators[2])
        tv = ls.TangentVariation(J, J.components)
        assert [n for n, _ in tv.violations()] == ["anticommutation"]

    def test_violations_quadratic_in_t(self):
        form = ls.euclidean(4)
        J = ls.make_random(form, 5)
        X = np.random.default_rng(0).normal(size=(4, 4))
        X = X - X.T
        delta = ls.tangent_projection(J, X)
        tv = ls.TangentVariation(J, delta)
        assert tv.violations(form) == []
        # the polar-corrected step stays on the manifold; the plain step is off by O(t^2)
        for t in (1e-2, 1e-3):
            raw = J.components + t * delta
            square = np.max(np.abs(raw @ raw + np.eye(4)))
            assert square == pytest.approx(t * t * np.max(np.abs(delta @ delta)), rel=1e-6)
            assert ls.validate(ls.CompatiblePair(form, tv.step(t))) == []


class TestSerialization:
    def test_form_round_trip(self):
        form = ls.standard_symplectic(2)
        data = json.loads(json.dumps(form.to_json()))
        assert data["kind"] == "symplectic" and data["dim"] == 4
        back = ls.BilinearForm.from_json(data)
        np.testing.assert_array_equal(back.components, form.components)

    def test_structure_round_trip(self):
        J = ls.make_random(ls.euclidean(4), 9)
        back = ls.structures_from_json([J.to_json()])[0]
        np.testing.assert_array_equal(back.components, J.components)

    def test_values_are_read_only(self):
        form = ls.euclidean(2)
        with pytest.raises(ValueError):
            form.components[0, 0] = 5.0
