"""
Polynomial-times-Gaussian wavefunctions on a Euclidean phase space with a
varying compatible complex structure.

A state is ``psi(x) = f(x) exp(-H(x)/2)`` with ``H = g(x, x)/2`` fixed and
``f`` a complex polynomial in the real coordinates.  Holomorphic
coordinates ``z^i`` are derived through a :class:`~phasebundle.frame_transport.Frame`
and never stored.  All integrals are exact Gaussian moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from . import _poly
from .errors import DomainError, StructuralError
from .frame_transport import Frame, frame_at
from .linear_structures import (
    METRIC,
    BilinearForm,
    ComplexStructure,
    TangentVariation,
    derive_partner,
)
from .parameter_geometry import JSPACE, ParameterPath

CANCELLATION_FLOOR = 1e-14


@dataclass(frozen=True)
class PolyGaussian:
    """``sum_alpha c_alpha x^alpha * exp(-g(x, x)/4)``.

    Parameters
    ----------
    metric : BilinearForm
        The fixed Euclidean metric ``g``.
    coeffs : dict
        Exponent tuples over ``x^1 .. x^{2n}`` mapped to complex numbers.
    """

    metric: BilinearForm
    coeffs: Dict[Tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        if self.metric.kind != METRIC:
            raise StructuralError("wavefunctions need a Euclidean metric")
        dim = self.metric.dim
        clean = {}
        for a, c in dict(self.coeffs).items():
            a = tuple(int(v) for v in a)
            if len(a) != dim or min(a) < 0:
                raise StructuralError(f"exponent {a} does not fit dimension {dim}")
            if c != 0:
                clean[a] = clean.get(a, 0) + complex(c)
        object.__setattr__(self, "coeffs", _poly.prune(clean))

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def degree(self) -> int:
        return _poly.degree(self.coeffs)

    def _same_space(self, other: "PolyGaussian"):
        if not np.array_equal(self.metric.components, other.metric.components):
            raise StructuralError("wavefunctions live over different metrics")

    def __add__(self, other: "PolyGaussian") -> "PolyGaussian":
        self._same_space(other)
        return PolyGaussian(self.metric, _poly.add(self.coeffs, other.coeffs))

    def __sub__(self, other: "PolyGaussian") -> "PolyGaussian":
        self._same_space(other)
        return PolyGaussian(self.metric, _poly.add(self.coeffs, other.coeffs, -1.0))

    def scaled(self, s: complex) -> "PolyGaussian":
        return PolyGaussian(self.metric, {a: s * c for a, c in self.coeffs.items()})

    def times(self, p: dict) -> "PolyGaussian":
        """Multiply the polynomial part by a polynomial ``p``."""
        return PolyGaussian(self.metric, _poly.mul(self.coeffs, p))

    def __call__(self, x) -> complex:
        x = np.asarray(x, dtype=float)
        return _poly.evaluate(self.coeffs, x) * np.exp(-0.25 * x @ self.metric.components @ x)

    def to_json(self) -> dict:
        terms = [{"alpha": list(a), "re": float(c.real), "im": float(c.imag)}
                 for a, c in sorted(self.coeffs.items())]
        return {"metric": self.metric.to_json(), "terms": terms}

    @classmethod
    def from_json(cls, data) -> "PolyGaussian":
        coeffs = {tuple(t["alpha"]): complex(t["re"], t["im"]) for t in data["terms"]}
        return cls(BilinearForm.from_json(data["metric"]), coeffs)


@dataclass(frozen=True)
class PrequantumData:
    """Prequantum line data for ``omega_J = g(J., .)``.

    ``theta`` holds the matrix ``T`` of the potential
    ``theta_J(u)|_x = x^T T u`` with ``T = omega_J/2``.
    """

    J: ComplexStructure
    omega: BilinearForm
    theta: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.theta, dtype=float)
        if T.shape != self.omega.components.shape:
            raise StructuralError("potential has the wrong shape")
        # d(x^T T dx) = sum (T - T^T)/2 dx^dx, which must equal omega_J.
        defect = float(np.max(np.abs((T - T.T) - self.omega.components)))
        if defect > 1e-12:
            raise DomainError(f"d(theta) differs from omega_J by {defect:.3g}")

    @classmethod
    def from_metric(cls, metric: BilinearForm, J: ComplexStructure) -> "PrequantumData":
        omega = derive_partner(metric, J)
        return cls(J, omega, 0.5 * omega.components)

    def theta_at(self, x, u) -> complex:
        return complex(np.asarray(x) @ self.theta @ np.asarray(u))


def vacuum(metric: BilinearForm) -> PolyGaussian:
    """``exp(-H/2)``, parallel for every compatible J."""
    return PolyGaussian(metric, {(0,) * metric.dim: 1.0})


def holomorphic_coordinates(frame: Frame) -> np.ndarray:
    """Matrix ``Z`` with ``z = Z x`` for ``x = z^i e_i + zbar^i ebar_i``."""
    E = frame.vectors
    basis = np.hstack([E, E.conj()])
    return np.linalg.inv(basis)[: frame.rank]


def coordinate_polynomial(frame: Frame, i: int, conjugate: bool = False) -> dict:
    row = holomorphic_coordinates(frame)[i]
    return _poly.linear(row.conj() if conjugate else row)


def monomial_state(metric: BilinearForm, frame: Frame, alpha, conjugate: bool = False) -> PolyGaussian:
    """``z^alpha * vacuum`` (or ``zbar^alpha * vacuum``)."""
    p = {(0,) * metric.dim: 1.0}
    for i, ai in enumerate(alpha):
        zi = coordinate_polynomial(frame, i, conjugate)
        for _ in range(ai):
            p = _poly.mul(p, zi)
    return PolyGaussian(metric, p)


def covariant_derivative(psi: PolyGaussian, u, pre: PrequantumData) -> PolyGaussian:
    """``nabla_u psi = d_u psi + theta_J(u)/i * psi``.

    The Gaussian factor contributes ``-g(x, u)/2`` and the potential
    ``-i omega_J(x, u)/2``; both are linear in ``x``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (psi.dim,):
        raise StructuralError("direction has the wrong dimension")
    d = _poly.derivative(psi.coeffs, u)
    row = -0.5 * (psi.metric.components @ u) - 1j * (pre.theta @ u)
    return PolyGaussian(psi.metric, _poly.add(d, _poly.mul(_poly.linear(row), psi.coeffs)))


@lru_cache(maxsize=None)
def _moment(alpha: tuple, cov: tuple) -> float:
    """``E[x^alpha]`` for a centred Gaussian, by the Isserlis recursion."""
    if sum(alpha) == 0:
        return 1.0
    if sum(alpha) % 2:
        return 0.0
    dim = len(alpha)
    i = next(k for k, a in enumerate(alpha) if a)
    rest = list(alpha)
    rest[i] -= 1
    total = 0.0
    for j in range(dim):
        if rest[j] == 0:
            continue
        c = cov[i * dim + j]
        if c == 0:
            continue
        lower = list(rest)
        lower[j] -= 1
        total += c * rest[j] * _moment(tuple(lower), cov)
    return total


def gaussian_moment(alpha, covariance) -> float:
    cov = np.asarray(covariance, dtype=float)
    return _moment(tuple(int(a) for a in alpha), tuple(cov.ravel().tolist()))


def inner_product(psi1: PolyGaussian, psi2: PolyGaussian) -> complex:
    """``int conj(psi1) psi2`` against the Liouville volume of ``omega_J``.

    For compatible pairs the Liouville volume is ``sqrt(det g) dx``, so
    ``<vacuum, vacuum> = (2 pi)^n`` independently of ``g``.
    """
    psi1._same_space(psi2)
    G = psi1.metric.components
    cov = np.linalg.inv(G)
    n = psi1.metric.half_dim
    total = 0j
    for a, c in psi1.coeffs.items():
        for b, d in psi2.coeffs.items():
            key = tuple(x + y for x, y in zip(a, b))
            total += np.conj(c) * d * gaussian_moment(key, cov)
    return complex((2 * np.pi) ** n * total)


def norm_squared(psi: PolyGaussian) -> float:
    return float(inner_product(psi, psi).real)


def _check_frame(frame: Frame, J: ComplexStructure):
    if float(np.max(np.abs(frame.base.components - J.components))) > 1e-10:
        raise StructuralError("frame does not belong to this complex structure")


def holomorphy_residual(psi: PolyGaussian, pre: PrequantumData, frame: Frame) -> float:
    """``sum_i ||nabla_{ebar_i} psi||^2``; zero exactly on polarized states."""
    _check_frame(frame, pre.J)
    return float(sum(norm_squared(covariant_derivative(psi, e.conj(), pre)) for e in frame.vectors.T))


def variation_coefficients(frame: Frame, delta) -> np.ndarray:
    """``(dJ)_{ibar}^j`` with ``dJ ebar_i = (dJ)_{ibar}^j e_j``; returned as ``C[j, i]``."""
    E = frame.vectors
    basis = np.hstack([E, E.conj()])
    c = np.linalg.solve(basis, np.asarray(delta, dtype=complex) @ E.conj())
    return c[: frame.rank]


def _delta_array(J: ComplexStructure, delta):
    if isinstance(delta, TangentVariation):
        if float(np.max(np.abs(delta.base.components - J.components))) > 1e-10:
            raise StructuralError("variation is based at a different complex structure")
        return delta.delta
    d = np.asarray(delta, dtype=float)
    if float(np.max(np.abs(d @ J.components + J.components @ d))) > 1e-10:
        raise DomainError("variation does not anticommute with J")
    return d


def transport_state(psi: PolyGaussian, J: ComplexStructure, delta, frame: Frame) -> PolyGaussian:
    """One first-order parallel-transport step ``psi -> psi + dpsi``.

    ``dpsi = -(i/2) (dJ)_{ibar}^j zbar^i (nabla_j + g_{j kbar} zbar^k) psi``
    with all index data read off ``frame``.
    """
    _check_frame(frame, J)
    d = _delta_array(J, delta)
    pre = PrequantumData.from_metric(psi.metric, J)
    C = variation_coefficients(frame, d)
    E = frame.vectors
    G = psi.metric.components
    gmix = E.T @ G @ E.conj()  # g(e_j, ebar_k)
    zbar = [coordinate_polynomial(frame, i, conjugate=True) for i in range(frame.rank)]
    # terms that cancel analytically leave roundoff behind; left in place they
    # raise the degree of psi at every step
    floor = CANCELLATION_FLOOR * max((abs(c) for c in psi.coeffs.values()), default=0.0)
    delta_psi: dict = {}
    for j in range(frame.rank):
        inner = covariant_derivative(psi, E[:, j], pre).coeffs
        shift: dict = {}
        for k in range(frame.rank):
            shift = _poly.add(shift, zbar[k], gmix[j, k])
        inner = _poly.chop(_poly.add(inner, _poly.mul(shift, psi.coeffs)), floor)
        if not inner:
            continue
        weight: dict = {}
        for i in range(frame.rank):
            weight = _poly.add(weight, zbar[i], C[j, i])
        delta_psi = _poly.add(delta_psi, _poly.mul(weight, inner), -0.5j)
    return PolyGaussian(psi.metric, _poly.add(psi.coeffs, delta_psi))


def transport_generator(J: ComplexStructure, delta) -> np.ndarray:
    """Matrix ``K`` with ``dpsi = (d_{Kx} f) * vacuum`` on polarized states.

    On ``psi = f * vacuum`` with ``f`` holomorphic the transport step acts
    as the vector field ``x -> Kx``, ``K = -(i/2) dJ Pbar_J``, which needs
    no frame.
    """
    d = _delta_array(J, delta)
    return -0.5j * d @ J.antiprojector


def holomorphic_basis_matrix(frame: Frame, k: int) -> np.ndarray:
    """Columns: the monomials ``z^alpha`` of degree ``k`` as dense polynomials in ``x``."""
    return _x_images(holomorphic_coordinates(frame), k)


def _x_images(Z, k):
    n, nvars = Z.shape
    cols = []
    rows = [_poly.linear(Z[i]) for i in range(n)]
    for alpha in _poly.monomial_exponents(n, k):
        p = {(0,) * nvars: 1.0}
        for i, ai in enumerate(alpha):
            for _ in range(ai):
                p = _poly.mul(p, rows[i])
        cols.append(_poly.to_dense(p, nvars, k))
    return np.array(cols).T


def loop_state_holonomy(loop: ParameterPath, metric: BilinearForm, k: int, frame: Optional[Frame] = None,
                        scheme: str = "pullback") -> np.ndarray:
    """Holonomy of the level-``k`` states around a loop by repeated transport steps.

    Returns the matrix whose column ``alpha`` lists the transported
    ``z^alpha * vacuum`` in the basis ``z^beta * vacuum`` at the start, for
    the holomorphic coordinates of ``frame`` (default: the orthonormal
    frame of :func:`frame_at`).

    Each step uses the generator ``K`` of :func:`transport_generator`.
    ``scheme='euler'`` applies ``f -> f + d_{Kx} f`` to the coefficients;
    ``scheme='pullback'`` applies ``f(x) -> f(x + Kx)``, which agrees with
    the Euler step to first order and is multiplicative, so that level
    ``k`` transports as the ``k``-th symmetric power of level 1.
    """
    if loop.kind != JSPACE or not loop.closed:
        raise StructuralError("state holonomy needs a closed path of complex structures")
    if scheme not in ("pullback", "euler"):
        raise DomainError(f"unknown integrator {scheme!r}")
    J0 = loop.samples[0]
    frame = frame if frame is not None else frame_at(J0, metric)
    _check_frame(frame, J0)
    nvars = metric.dim
    B = holomorphic_basis_matrix(frame, k)
    F = B.copy()
    ops = _poly.euler_operators(nvars, k)
    eye = np.eye(nvars)
    for Ja, Jb in zip(loop.samples, loop.samples[1:]):
        K = -0.5j * (Jb.components - Ja.components) @ Ja.antiprojector
        if scheme == "euler":
            F = F + np.einsum("mn,nmab->ab", K, ops) @ F
        else:
            F = _poly.substitution_matrix((eye + K).T, k) @ F
    return np.linalg.lstsq(B, F, rcond=None)[0]


__all__ = [
    "PolyGaussian",
    "PrequantumData",
    "vacuum",
    "holomorphic_coordinates",
    "coordinate_polynomial",
    "monomial_state",
    "covariant_derivative",
    "gaussian_moment",
    "inner_product",
    "norm_squared",
    "holomorphy_residual",
    "variation_coefficients",
    "transport_state",
    "transport_generator",
    "loop_state_holonomy",
    "holomorphic_basis_matrix",
]
