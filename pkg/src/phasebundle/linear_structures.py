"""
Symplectic forms, Euclidean metrics, compatible complex structures and
(para)quaternionic triples on a real vector space of dimension 2n.

Conventions used throughout the package:

* a bilinear form acts as ``b(u, v) = u.T @ B @ v`` with ``B`` the stored
  component array;
* a complex structure ``J`` acts on column vectors;
* the partner of a metric ``g`` is ``omega_J(u, v) = g(J u, v)``, i.e. the
  array ``J.T @ G``; the partner of a symplectic form is
  ``g_J(u, v) = omega(u, J v)``, i.e. ``Omega @ J``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List

import numpy as np
import scipy.linalg

from .errors import CompatibilityError, DomainError, StructuralError

INPUT_TOL = 1e-10
EXACT_TOL = 1e-12

METRIC = "metric"
SYMPLECTIC = "symplectic"
QUATERNIONIC = "quaternionic"
PARAQUATERNIONIC = "paraquaternionic"


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _check_square_even(arr: np.ndarray, what: str) -> None:
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StructuralError(f"{what} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] % 2:
        raise StructuralError(f"{what} must have even dimension, got {arr.shape[0]}")


@dataclass(frozen=True)
class BilinearForm:
    """A metric (symmetric positive definite) or symplectic form."""

    components: np.ndarray
    kind: str
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = _frozen(self.components)
        _check_square_even(arr, "form")
        if self.kind not in (METRIC, SYMPLECTIC):
            raise StructuralError(f"unknown form kind {self.kind!r}")
        object.__setattr__(self, "components", arr)
        if self.check:
            problems = form_violations(self)
            if problems:
                raise DomainError("; ".join(f"{name}: {mag:.3g}" for name, mag in problems))

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def half_dim(self) -> int:
        return self.dim // 2

    def __call__(self, u, v):
        return np.asarray(u) @ self.components @ np.asarray(v)

    def hermitian(self) -> np.ndarray:
        """Hermitian form that is positive on every compatible ``V^{1,0}``.

        For a metric this is ``G`` itself; for a symplectic form it is
        ``i * Omega`` (so that ``h(u, v) = conj(u) @ (i Omega) @ v``).
        """
        if self.kind == METRIC:
            return self.components.astype(complex)
        return 1j * self.components

    def to_json(self) -> dict:
        return {"dim": self.dim, "kind": self.kind, "components": self.components.tolist()}

    @classmethod
    def from_json(cls, data) -> "BilinearForm":
        if isinstance(data, str):
            data = json.loads(data)
        form = cls(np.array(data["components"], dtype=float), data["kind"])
        if form.dim != data.get("dim", form.dim):
            raise StructuralError("declared dim does not match components")
        return form


def form_violations(form: BilinearForm) -> List[tuple]:
    B = form.components
    out = []
    if form.kind == METRIC:
        asym = np.max(np.abs(B - B.T))
        if asym > INPUT_TOL:
            out.append(("metric symmetry", asym))
        low = np.min(np.linalg.eigvalsh(0.5 * (B + B.T)))
        if low <= INPUT_TOL:
            out.append(("metric positivity", low))
    else:
        sym = np.max(np.abs(B + B.T))
        if sym > INPUT_TOL:
            out.append(("symplectic antisymmetry", sym))
        det = abs(np.linalg.det(B))
        if det <= INPUT_TOL:
            out.append(("symplectic nondegeneracy", det))
    return out


@dataclass(frozen=True)
class ComplexStructure:
    """A real operator ``J`` with ``J @ J = -I``."""

    components: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = _frozen(self.components)
        _check_square_even(arr, "complex structure")
        object.__setattr__(self, "components", arr)
        if self.check:
            dev = square_defect(arr)
            if dev > INPUT_TOL:
                raise DomainError(f"J squared differs from -I by {dev:.3g}")

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def half_dim(self) -> int:
        return self.dim // 2

    @property
    def projector(self) -> np.ndarray:
        """Projection ``(I - iJ)/2`` onto ``V^{1,0}``, the +i eigenspace."""
        return 0.5 * (np.eye(self.dim) - 1j * self.components)

    @property
    def antiprojector(self) -> np.ndarray:
        return 0.5 * (np.eye(self.dim) + 1j * self.components)

    def to_json(self) -> dict:
        return {"dim": self.dim, "kind": "complex_structure", "components": self.components.tolist()}

    @classmethod
    def from_json(cls, data) -> "ComplexStructure":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("kind", "complex_structure") != "complex_structure":
            raise StructuralError(f"expected a complex structure, got kind {data['kind']!r}")
        return cls(np.array(data["components"], dtype=float))


def square_defect(J) -> float:
    J = np.asarray(J)
    return float(np.max(np.abs(J @ J + np.eye(J.shape[0]))))


@dataclass(frozen=True)
class CompatiblePair:
    """A fixed form together with a complex structure (not validated here)."""

    form: BilinearForm
    J: ComplexStructure

    @property
    def derived(self) -> BilinearForm:
        return derive_partner(self.form, self.J)


def validate(pair: CompatiblePair) -> List[tuple]:
    """Check the compatibility conditions of ``pair``.

    Returns a list of ``(name, magnitude)`` tuples, one per violated
    invariant; the list is empty iff every condition holds within the
    input tolerance.
    """
    form, J = pair.form, np.asarray(pair.J.components)
    if form.dim != J.shape[0]:
        raise StructuralError(f"dimension mismatch: form {form.dim}, J {J.shape[0]}")
    report = list(form_violations(form))
    sq = square_defect(J)
    if sq > INPUT_TOL:
        report.append(("J squared", sq))
    B = form.components
    inv = np.max(np.abs(J.T @ B @ J - B))
    if inv > INPUT_TOL:
        report.append(("J invariance", inv))
    if form.kind == METRIC:
        partner = J.T @ B
        asym = np.max(np.abs(partner + partner.T))
        if asym > INPUT_TOL:
            report.append(("partner antisymmetry", asym))
        if abs(np.linalg.det(partner)) <= INPUT_TOL:
            report.append(("partner nondegeneracy", abs(np.linalg.det(partner))))
    else:
        partner = B @ J
        sym = np.max(np.abs(partner - partner.T))
        if sym > INPUT_TOL:
            report.append(("partner symmetry", sym))
        low = np.min(np.linalg.eigvalsh(0.5 * (partner + partner.T)))
        if low <= INPUT_TOL:
            report.append(("partner positivity", low))
    return report


def derive_partner(form: BilinearForm, J: ComplexStructure) -> BilinearForm:
    """Partner form of a compatible pair.

    A metric ``g`` yields the symplectic form ``g(J., .)``; a symplectic
    form ``omega`` yields the metric ``omega(., J.)``.
    """
    report = validate(CompatiblePair(form, J))
    if report:
        raise CompatibilityError("; ".join(f"{n}: {m:.3g}" for n, m in report))
    Jm = J.components
    if form.kind == METRIC:
        comps = Jm.T @ form.components
        comps = 0.5 * (comps - comps.T)
        return BilinearForm(comps, SYMPLECTIC)
    comps = form.components @ Jm
    comps = 0.5 * (comps + comps.T)
    return BilinearForm(comps, METRIC)


def standard_complex(n: int) -> ComplexStructure:
    """Block-diagonal copies of ``[[0, -1], [1, 0]]``."""
    return ComplexStructure(np.kron(np.eye(n), [[0.0, -1.0], [1.0, 0.0]]))


def standard_symplectic(n: int) -> BilinearForm:
    """``omega = sum dx_i ^ dy_i`` in interleaved coordinates."""
    return BilinearForm(np.kron(np.eye(n), [[0.0, 1.0], [-1.0, 0.0]]), SYMPLECTIC)


def euclidean(dim: int) -> BilinearForm:
    return BilinearForm(np.eye(dim), METRIC)


def polar_correct(A) -> ComplexStructure:
    """Nearest complex structure ``A (-A^2)^{-1/2}``.

    When ``A`` is a small perturbation of a complex structure along a
    tangent direction, the result stays compatible with whatever form the
    perturbation preserved (orthogonal or symplectic), since it is an odd
    function of ``A``.
    """
    A = np.asarray(A, dtype=float)
    root = scipy.linalg.sqrtm(-A @ A)
    J = np.linalg.solve(np.real(root).T, A.T).T
    return ComplexStructure(J)


# -- (para)quaternionic triples ------------------------------------------------

# left multiplication by i and j on H = R^4 with basis (1, i, j, k)
_QI = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
_QJ = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
_QK = _QI @ _QJ

_PAULI_J0 = np.array([[0.0, -1.0], [1.0, 0.0]])  # -i sigma_2
_PAULI_J1 = np.array([[0.0, 1.0], [1.0, 0.0]])  # sigma_1
_PAULI_J2 = np.array([[1.0, 0.0], [0.0, -1.0]])  # sigma_3


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[a, b, c] = 1.0
        eps[b, a, c] = -1.0
    return eps


@dataclass(frozen=True)
class StructureTriple:
    """Generators ``J_a`` with ``J_a J_b = -gamma_ab I + eps_ab^c J_c``."""

    generators: tuple
    kind: str

    def __post_init__(self):
        gens = tuple(_frozen(g) for g in self.generators)
        if len(gens) != 3:
            raise StructuralError("a triple needs exactly three generators")
        dim = gens[0].shape[0]
        for g in gens:
            _check_square_even(g, "generator")
            if g.shape[0] != dim:
                raise StructuralError("generators must share one dimension")
        if self.kind == QUATERNIONIC and dim % 4:
            raise DomainError("quaternionic triples need dimension divisible by 4")
        if self.kind not in (QUATERNIONIC, PARAQUATERNIONIC):
            raise StructuralError(f"unknown triple kind {self.kind!r}")
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    @property
    def half_dim(self) -> int:
        return self.dim // 2

    @property
    def signature(self) -> np.ndarray:
        if self.kind == QUATERNIONIC:
            return np.diag([1.0, 1.0, 1.0])
        return np.diag([1.0, -1.0, -1.0])

    def structure_constants(self) -> np.ndarray:
        """``eps_ab^c = eps_abd gamma^cd``."""
        return np.einsum("abd,cd->abc", levi_civita(), np.linalg.inv(self.signature))

    def relation_defect(self) -> float:
        """Largest entrywise deviation from the defining relations."""
        gamma = self.signature
        eps = self.structure_constants()
        I = np.eye(self.dim)
        worst = 0.0
        for a in range(3):
            for b in range(3):
                lhs = self.generators[a] @ self.generators[b]
                rhs = -gamma[a, b] * I + sum(eps[a, b, c] * self.generators[c] for c in range(3))
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst

    def combine(self, coeffs) -> np.ndarray:
        """``sum_a coeffs[a] J_a`` without domain checks (tangent vectors)."""
        return sum(float(c) * g for c, g in zip(coeffs, self.generators))

    def invariant_form(self) -> BilinearForm:
        """The form preserved by the standard realization.

        Euclidean metric for quaternionic triples; for paraquaternionic
        triples the symplectic form compatible with every ``J_xi`` with
        ``xi`` on the upper sheet.
        """
        if self.kind == QUATERNIONIC:
            return euclidean(self.dim)
        return standard_symplectic(self.half_dim)


def standard_triple(kind: str, n: int) -> StructureTriple:
    """Block sums of the minimal realization on ``R^{2n}``.

    Quaternionic triples use left multiplication by ``i, j, k`` on
    ``H = R^4`` and need ``n`` even; paraquaternionic triples use
    ``(-i sigma_2, sigma_1, sigma_3)`` on ``R^2``.
    """
    if n < 1:
        raise DomainError("half dimension must be positive")
    if kind == QUATERNIONIC:
        if n % 2:
            raise DomainError(f"quaternionic triples need even n, got {n}")
        blocks = (_QI, _QJ, _QK)
        copies = n // 2
    elif kind == PARAQUATERNIONIC:
        blocks = (_PAULI_J0, _PAULI_J1, _PAULI_J2)
        copies = n
    else:
        raise DomainError(f"unknown triple kind {kind!r}")
    gens = tuple(np.kron(np.eye(copies), b) for b in blocks)
    return StructureTriple(gens, kind)


def minkowski(a, b) -> float:
    return float(a[0] * b[0] - a[1] * b[1] - a[2] * b[2])


def j_xi(triple: StructureTriple, xi) -> ComplexStructure:
    """Complex structure ``J_xi = xi^a J_a`` for ``xi`` on S^2 or H^2."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise StructuralError("xi must be a 3-vector")
    if triple.kind == QUATERNIONIC:
        norm = float(xi @ xi)
        if abs(norm - 1.0) > INPUT_TOL:
            raise DomainError(f"xi is off the unit sphere (|xi|^2 = {norm!r})")
    else:
        norm = minkowski(xi, xi)
        if xi[0] <= 0 or abs(norm - 1.0) > INPUT_TOL:
            raise DomainError(f"xi is off the upper hyperboloid sheet (<xi,xi> = {norm!r})")
    return ComplexStructure(triple.combine(xi))


# -- random compatible structures -----------------------------------------------

def product_identity_defect(triple: StructureTriple, xi, eta) -> float:
    """``max |J_xi J_eta + <xi, eta> I - (xi x eta)^c J_c|`` with the triple's signature."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    lhs = triple.combine(xi) @ triple.combine(eta)
    dot = float(xi @ triple.signature @ eta)
    cross = np.einsum("abc,a,b->c", triple.structure_constants(), xi, eta)
    rhs = -dot * np.eye(triple.dim) + triple.combine(cross)
    return float(np.max(np.abs(lhs - rhs)))


def reference_structure(form: BilinearForm) -> ComplexStructure:
    """A canonical complex structure compatible with ``form``."""
    B = form.components
    if form.kind == METRIC:
        half = np.real(scipy.linalg.sqrtm(B))
        J = np.linalg.solve(half, standard_complex(form.half_dim).components @ half)
    else:
        S = B.T @ B
        J = -B @ np.linalg.inv(np.real(scipy.linalg.sqrtm(S)))
    return polar_correct(J)


def make_random(form: BilinearForm, seed, scale: float = 0.5) -> ComplexStructure:
    """Deterministic random complex structure compatible with ``form``.

    Conjugates a reference structure by ``exp(A)`` with ``A`` in the Lie
    algebra preserving the form (g-skew or Hamiltonian), then applies the
    polar correction.
    """
    rng = np.random.default_rng(seed)
    dim = form.dim
    X = rng.normal(scale=scale, size=(dim, dim))
    B = form.components
    if form.kind == METRIC:
        A = np.linalg.solve(B, X - X.T)
    else:
        A = np.linalg.solve(B, X + X.T)
        # the symplectic group is non-compact: bound the squeeze so J stays well conditioned
        A = A / max(1.0, float(np.linalg.norm(A, 2)))
    J0 = reference_structure(form).components
    R = scipy.linalg.expm(A)
    J = R @ J0 @ np.linalg.inv(R)
    return polar_correct(J)


# -- tangent variations ------------------------------------------------------------

@dataclass(frozen=True)
class TangentVariation:
    """An infinitesimal deformation ``delta`` of a complex structure."""

    base: ComplexStructure
    delta: np.ndarray

    def __post_init__(self):
        d = _frozen(self.delta)
        if d.shape != self.base.components.shape:
            raise StructuralError("variation and base have different shapes")
        object.__setattr__(self, "delta", d)

    def violations(self, form: BilinearForm | None = None) -> List[tuple]:
        J, d = self.base.components, self.delta
        out = []
        anti = float(np.max(np.abs(d @ J + J @ d)))
        if anti > INPUT_TOL:
            out.append(("anticommutation", anti))
        if form is not None:
            B = form.components
            # linearization of J^T B J = B, i.e. b(J., dJ.) + b(dJ., J.) = 0
            dev = float(np.max(np.abs(J.T @ B @ d + d.T @ B @ J)))
            if dev > INPUT_TOL:
                out.append(("form compatibility", dev))
        return out

    def step(self, t: float) -> ComplexStructure:
        """Polar-corrected ``J + t delta``."""
        return polar_correct(self.base.components + t * self.delta)


def tangent_projection(J: ComplexStructure, X) -> np.ndarray:
    """Part of ``X`` anticommuting with ``J``."""
    Jm = J.components
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + Jm @ X @ Jm)


def structures_from_json(items: Iterable[dict]) -> list:
    out = []
    for item in items:
        if item.get("kind") == "complex_structure":
            out.append(ComplexStructure.from_json(item))
        else:
            out.append(BilinearForm.from_json(item))
    return out


def as_matrix(x) -> np.ndarray:
    if isinstance(x, (ComplexStructure, BilinearForm)):
        return x.components
    return np.asarray(x)


__all__ = [
    "BilinearForm",
    "ComplexStructure",
    "CompatiblePair",
    "StructureTriple",
    "TangentVariation",
    "validate",
    "derive_partner",
    "standard_triple",
    "j_xi",
    "make_random",
    "polar_correct",
    "standard_complex",
    "standard_symplectic",
    "euclidean",
    "reference_structure",
    "minkowski",
    "tangent_projection",
]
