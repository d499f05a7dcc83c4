"""
Parallel transport in the tautological bundle ``V^{1,0}`` over spaces of
complex structures, and in the bundles built from it.

The connection is the projection connection: ``V^{1,0} + V^{0,1}`` is the
trivial bundle ``V (x) C``, and a frame is transported by projecting it onto
the next fibre with ``P_J = (I - iJ)/2``.  Frames are never
re-orthonormalized; the gram drift of the discretization is reported.

Bundle tags
-----------
``V``            the tautological bundle ``V^{1,0}``
``V*``           its dual
``Sym^k``        ``Sym^k V*``
``Lambda^k``     ``Lambda^k V*``
``det``          the canonical line ``K = Lambda^n V*``
``sqrt_det``     ``sqrt(K)``, tracked as a genuine double cover
``inv_sqrt_det`` ``sqrt(K^{-1})``

Sign convention: a connection ``d + A`` has curvature ``F = dA`` and the
holonomy around the oriented boundary of a small disc ``D`` is
``exp(-int_D F)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import numpy as np

from . import _poly
from .errors import DomainError, NumericalFailure, RefinePathError, StructuralError
from .linear_structures import BilinearForm, ComplexStructure, polar_correct
from .parameter_geometry import JSPACE, ParameterPath

LINE_TAGS = ("det", "sqrt_det", "inv_sqrt_det")
BUNDLE_TAGS = ("V", "V*", "Sym^k", "Lambda^k") + LINE_TAGS

FRAME_TOL = 1e-10
BRANCH_GUARD = math.pi / 2


@dataclass(frozen=True)
class Frame:
    """A complex basis of ``V^{1,0}_J`` stored as the columns of ``vectors``."""

    base: ComplexStructure
    vectors: np.ndarray
    hermitian: np.ndarray = field(repr=False)

    def __post_init__(self):
        E = np.array(self.vectors, dtype=complex)
        h = np.array(self.hermitian, dtype=complex)
        dim = self.base.dim
        if E.ndim != 2 or E.shape != (dim, dim // 2):
            raise StructuralError(f"frame needs shape {(dim, dim // 2)}, got {E.shape}")
        if h.shape != (dim, dim):
            raise StructuralError("hermitian form has the wrong shape")
        scale = max(1.0, float(np.max(np.abs(E))))
        dev = float(np.max(np.abs(self.base.projector @ E - E)))
        if dev > FRAME_TOL * scale:
            raise DomainError(f"frame vectors are not in V^(1,0) (deviation {dev:.3g})")
        if np.linalg.matrix_rank(E, tol=1e-12 * scale) < E.shape[1]:
            raise DomainError("frame vectors are linearly dependent")
        E.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "vectors", E)
        object.__setattr__(self, "hermitian", h)

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """``h(e_i, e_j)`` for the positive hermitian form of the family."""
        return self.vectors.conj().T @ self.hermitian @ self.vectors

    def coordinates(self, v) -> np.ndarray:
        """Components of a vector of ``V^{1,0}`` in this frame."""
        return np.linalg.lstsq(self.vectors, np.asarray(v, dtype=complex), rcond=None)[0]

    def regauged(self, C) -> "Frame":
        """Frame ``e_j' = sum_i e_i C[i, j]``."""
        return Frame(self.base, self.vectors @ np.asarray(C, dtype=complex), self.hermitian)


def _hermitian_of(form_or_h, dim):
    if form_or_h is None:
        return np.eye(dim, dtype=complex)
    if isinstance(form_or_h, BilinearForm):
        return form_or_h.hermitian()
    return np.asarray(form_or_h, dtype=complex)


def frame_at(J: ComplexStructure, form=None) -> Frame:
    """An orthonormal frame of ``V^{1,0}_J`` for the family's hermitian form.

    ``form`` is the fixed metric (families in ``J(V, g)``) or the fixed
    symplectic form (families in ``J(V, omega)``).
    """
    h = _hermitian_of(form, J.dim)
    U, _, _ = np.linalg.svd(J.projector)
    E = J.projector @ U[:, : J.half_dim]
    gram = E.conj().T @ h @ E
    gram = 0.5 * (gram + gram.conj().T)
    try:
        C = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DomainError("hermitian form is not positive on V^(1,0); wrong form for this J") from None
    E = np.linalg.solve(C.conj(), E.T).T  # E C^{-dagger}
    return Frame(J, E, h)


@dataclass(frozen=True)
class TransportResult:
    """Outcome of transporting a frame along a path.

    ``transition`` expresses the transported frame in the reference gauge
    ``P_{J_end} E_start``; for a closed loop this is the holonomy of ``V``
    in the starting frame.  ``det_phase`` is the continuously accumulated
    argument of the canonical line ``K``; ``sqrt_branch`` is half of it.
    """

    final: Frame
    transition: np.ndarray
    det_phase: float
    sqrt_branch: float
    gram_drift: float
    steps: int


def _step_projector(Ja, Jb, scheme):
    if scheme == "projection":
        return Jb.projector
    if scheme == "midpoint":
        mid = polar_correct(0.5 * (Ja.components + Jb.components))
        return Jb.projector @ mid.projector
    raise DomainError(f"unknown transport scheme {scheme!r}")


def transport_frame(path: ParameterPath, start: Frame, scheme: str = "projection") -> TransportResult:
    """Parallel transport ``start`` along a path of complex structures.

    Each step maps ``e -> P_{J_next} e`` (``scheme='midpoint'`` projects
    through the polar-corrected midpoint first).  The determinant phase is
    accumulated step by step against the reference gauge
    ``F_j = P_{J_j} E_start``; a per-step jump of ``pi/2`` or more raises
    :class:`RefinePathError`.
    """
    if path.kind != JSPACE:
        raise StructuralError("transport needs a path of complex structures; use path.to_structures(triple)")
    first = path.samples[0].components
    if float(np.max(np.abs(first - start.base.components))) > FRAME_TOL:
        raise StructuralError("start frame does not sit over the first path sample")
    E0 = start.vectors
    E = E0
    prev_det = 1.0 + 0j
    accumulated = 0.0
    for j in range(1, len(path.samples)):
        Ja, Jb = path.samples[j - 1], path.samples[j]
        E = _step_projector(Ja, Jb, scheme) @ E
        F = Jb.projector @ E0
        m = np.linalg.lstsq(F, E, rcond=None)[0]
        d = np.linalg.det(m)
        if not np.isfinite(d) or abs(d) < 1e-300:
            raise NumericalFailure(f"reference gauge degenerates at sample {j}")
        inc = float(np.angle(d / prev_det))
        if abs(inc) >= BRANCH_GUARD:
            raise RefinePathError(f"determinant phase jumps by {inc:.3g} at step {j}; refine the path")
        accumulated += inc
        prev_det = d
    final_J = path.samples[-1]
    F = final_J.projector @ E0
    transition = np.linalg.lstsq(F, E, rcond=None)[0]
    final = Frame(final_J, E, start.hermitian)
    drift = float(np.max(np.abs(final.gram - start.gram)))
    det_phase = -accumulated
    return TransportResult(final, transition, det_phase, det_phase / 2, drift, path.steps)


# -- functors --------------------------------------------------------------------------

def dual_operator(A) -> np.ndarray:
    """Action on the dual: inverse transpose."""
    return np.linalg.inv(np.asarray(A, dtype=complex)).T


def sym_power(A, k: int) -> np.ndarray:
    """``Sym^k`` of ``A`` on homogeneous polynomials.

    ``A`` maps the variable ``z_i`` to ``sum_j A[j, i] z_j``; the result
    acts on monomials ``z^alpha`` in :func:`_poly.monomial_exponents` order.
    """
    if k < 0:
        raise DomainError("symmetric power needs k >= 0")
    return _poly.substitution_matrix(np.asarray(A, dtype=complex), k)


def wedge_power(A, k: int) -> np.ndarray:
    """``Lambda^k`` of ``A`` on the basis of sorted index sets (minors)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if k < 0 or k > n:
        raise DomainError(f"exterior power Lambda^{k} undefined for rank {n}")
    sets = list(combinations(range(n), k))
    out = np.ones((len(sets), len(sets)), dtype=complex)
    if k == 0:
        return out
    for r, I in enumerate(sets):
        for c, K in enumerate(sets):
            out[r, c] = np.linalg.det(A[np.ix_(I, K)])
    return out


def bundle_rank(tag: str, n: int, k: Optional[int] = None) -> int:
    if tag in ("V", "V*"):
        return n
    if tag == "Sym^k":
        return math.comb(n + k - 1, k)
    if tag == "Lambda^k":
        return math.comb(n, k)
    return 1


@dataclass(frozen=True)
class HolonomyResult:
    """Holonomy of one bundle around a loop."""

    bundle: str
    operator: np.ndarray
    phase: complex
    step_count: int
    error_estimate: float
    det_phase: Optional[float] = None
    k: Optional[int] = None

    @property
    def phase_arg(self) -> float:
        return float(np.angle(self.phase))

    def to_json(self) -> dict:
        op = np.atleast_2d(self.operator)
        out = {
            "bundle": self.bundle,
            "phase_re": float(np.real(self.phase)),
            "phase_im": float(np.imag(self.phase)),
            "operator": [[[float(z.real), float(z.imag)] for z in row] for row in op],
            "steps": int(self.step_count),
            "error_estimate": float(self.error_estimate),
        }
        if self.k is not None:
            out["k"] = int(self.k)
        return out

    @classmethod
    def from_json(cls, data) -> "HolonomyResult":
        op = np.array([[complex(re, im) for re, im in row] for row in data["operator"]])
        return cls(data["bundle"], op, complex(data["phase_re"], data["phase_im"]),
                   int(data["steps"]), float(data["error_estimate"]), k=data.get("k"))


def _unit(z: complex) -> complex:
    a = abs(z)
    if a == 0:
        raise NumericalFailure("holonomy determinant vanished")
    return z / a


def _bundle_operator(M, det_phase, tag, k):
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if tag == "V":
        return M
    if tag == "V*":
        return dual_operator(M)
    if tag == "Sym^k":
        if k is None or k < 0:
            raise DomainError("Sym^k needs k >= 0")
        return sym_power(dual_operator(M), k)
    if tag == "Lambda^k":
        if k is None or k < 0 or k > n:
            raise DomainError(f"Lambda^k needs 0 <= k <= {n}")
        return wedge_power(dual_operator(M), k)
    modulus = abs(np.linalg.det(M))
    if tag == "det":
        return np.array([[modulus ** -1 * np.exp(1j * det_phase)]])
    if tag == "sqrt_det":
        return np.array([[modulus ** -0.5 * np.exp(0.5j * det_phase)]])
    if tag == "inv_sqrt_det":
        return np.array([[modulus ** 0.5 * np.exp(-0.5j * det_phase)]])
    raise DomainError(f"unknown bundle tag {tag!r}")


def _result(tag, M, det_phase, steps, error, k=None):
    op = _bundle_operator(M, det_phase, tag, k)
    phase = _unit(np.linalg.det(op)) if op.size else 1.0 + 0j
    return HolonomyResult(tag, op, complex(phase), steps, error, det_phase, k)


def loop_holonomy(loop: ParameterPath, start: Frame, bundle: str = "V", k: Optional[int] = None,
                  scheme: str = "projection", extrapolate: bool = False) -> HolonomyResult:
    """Holonomy of ``bundle`` around a closed path of complex structures.

    The error estimate compares against the same loop with every other
    sample dropped.  ``extrapolate=True`` returns the first-order
    Richardson combination ``2 H_N - H_{N/2}`` instead of the raw product.
    """
    if not loop.closed:
        raise StructuralError("holonomy needs a closed loop")
    fine = transport_frame(loop, start, scheme)
    coarse_loop = loop.coarsened()
    coarse = transport_frame(coarse_loop, start, scheme)
    op_f = _bundle_operator(fine.transition, fine.det_phase, bundle, k)
    op_c = _bundle_operator(coarse.transition, coarse.det_phase, bundle, k)
    error = float(np.linalg.norm(op_f - op_c, 2))
    if extrapolate:
        M = 2 * fine.transition - coarse.transition
        dphase = 2 * fine.det_phase - coarse.det_phase
        op = 2 * op_f - op_c
        phase = _unit(np.linalg.det(op))
        return HolonomyResult(bundle, op, complex(phase), loop.steps, error, dphase, k)
    return _result(bundle, fine.transition, fine.det_phase, loop.steps, error, k)


def induced_holonomy(base: HolonomyResult, target: str, k: Optional[int] = None) -> HolonomyResult:
    """Holonomy of an induced bundle from a ``V`` holonomy."""
    if base.bundle != "V":
        raise DomainError("induced holonomies need a holonomy of V as input")
    if target in LINE_TAGS and base.det_phase is None:
        raise DomainError("line bundle holonomies need the tracked determinant phase")
    if target == "Lambda^k" and k is not None and k > base.operator.shape[0]:
        raise DomainError(f"Lambda^{k} undefined for rank {base.operator.shape[0]}")
    if k is not None and k < 0:
        raise DomainError("k must be non-negative")
    return _result(target, base.operator, base.det_phase, base.step_count, base.error_estimate, k)


def fock_level_holonomy(base: HolonomyResult, k: int, statistics: str, metaplectic: bool) -> HolonomyResult:
    """Holonomy of the k-th Fock level of a varying-structure family.

    Bosons: ``Sym^k V* (x) sqrt(K)`` with the metaplectic correction,
    ``Sym^k V*`` without.  Fermions: ``Lambda^k V* (x) sqrt(K^{-1})`` or
    ``Lambda^k V*``.
    """
    if statistics == "boson":
        level = induced_holonomy(base, "Sym^k", k)
        half = "sqrt_det"
    elif statistics == "fermion":
        level = induced_holonomy(base, "Lambda^k", k)
        half = "inv_sqrt_det"
    else:
        raise DomainError(f"unknown statistics {statistics!r}")
    op = level.operator
    if metaplectic:
        op = op * induced_holonomy(base, half).operator[0, 0]
    tag = f"H^({k})" + ("+half-form" if metaplectic else "")
    phase = _unit(np.linalg.det(op))
    return HolonomyResult(tag, op, complex(phase), base.step_count, base.error_estimate, base.det_phase, k)


# -- per-step connection matrices ---------------------------------------------------------

def _inverse_sqrt_psd(gram):
    w, U = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    if w.min() <= 0:
        raise NumericalFailure("reference gauge lost rank")
    return (U / np.sqrt(w)) @ U.conj().T, (U * np.sqrt(w)) @ U.conj().T


def step_transports(path: ParameterPath, start: Frame, bundle: str = "V", k: Optional[int] = None,
                    unitary: bool = True) -> List[np.ndarray]:
    """Fibre maps ``T_j`` from sample ``j`` to ``j + 1``.

    With ``unitary=False`` the maps are expressed in the gauge
    ``F_j = P_{J_j} E_start`` and their ordered product over a closed loop
    is the raw holonomy of :func:`transport_frame`.  With ``unitary=True``
    the gauge is orthonormalized (``F_j gram_j^{-1/2}``) and each map is
    replaced by its unitary polar factor, which removes the discretization
    drift of the norm without changing any determinant phase.  Line
    bundles use the principal branch per step, which is continuous as long
    as every step is small.
    """
    E0 = start.vectors
    h = start.hermitian
    out = []
    F_prev = path.samples[0].projector @ E0
    half_prev = _inverse_sqrt_psd(F_prev.conj().T @ h @ F_prev) if unitary else None
    for j in range(1, len(path.samples)):
        Jb = path.samples[j]
        F_next = Jb.projector @ E0
        T = np.linalg.lstsq(F_next, Jb.projector @ F_prev, rcond=None)[0]
        if unitary:
            half_next = _inverse_sqrt_psd(F_next.conj().T @ h @ F_next)
            T = half_next[1] @ T @ half_prev[0]
            U, _, Vh = np.linalg.svd(T)
            T = U @ Vh
            half_prev = half_next
        F_prev = F_next
        d = np.linalg.det(T)
        if abs(np.angle(d)) >= BRANCH_GUARD:
            raise RefinePathError(f"step {j} is too large for branch tracking")
        if bundle in LINE_TAGS:
            power = {"det": -1.0, "sqrt_det": -0.5, "inv_sqrt_det": 0.5}[bundle]
            out.append(np.array([[d ** power]]))
        else:
            out.append(_bundle_operator(T, 0.0, bundle, k))
    return out


# -- plaquettes ------------------------------------------------------------------------------

def _segment(Ja, Jb, substeps):
    A, B = Ja.components, Jb.components
    pts = [Ja]
    for s in range(1, substeps):
        pts.append(polar_correct(A + (B - A) * s / substeps))
    pts.append(Jb)
    return pts


def plaquette_loop(J: ComplexStructure, A, B, eps: float, substeps: int = 8) -> ParameterPath:
    """Closed path ``J -> J+eA -> J+eA+eB -> J+eB -> J`` (polar-corrected corners)."""
    A = np.asarray(getattr(A, "delta", A), dtype=float)
    B = np.asarray(getattr(B, "delta", B), dtype=float)
    Jm = J.components
    corners = [J, polar_correct(Jm + eps * A), polar_correct(Jm + eps * A + eps * B), polar_correct(Jm + eps * B), J]
    pts = [J]
    for a, b in zip(corners, corners[1:]):
        pts.extend(_segment(a, b, substeps)[1:])
    pts[-1] = J
    return ParameterPath(JSPACE, pts, closed=True)


def _plaquette_log(J, A, B, eps, bundle, k, form, substeps):
    if np.array_equal(np.asarray(getattr(A, "delta", A)), np.asarray(getattr(B, "delta", B))):
        return 0j
    loop = plaquette_loop(J, A, B, eps, substeps)
    start = frame_at(J, form)
    res = transport_frame(loop, start)
    op = _bundle_operator(res.transition, res.det_phase, bundle, k)
    if bundle in LINE_TAGS:
        arg = {"det": 1.0, "sqrt_det": 0.5, "inv_sqrt_det": -0.5}[bundle] * res.det_phase
    else:
        arg = float(np.angle(np.linalg.det(op)))
    return 1j * arg / eps ** 2


def plaquette_curvature(J: ComplexStructure, A, B, eps: float = 1e-3, bundle: str = "det",
                        k: Optional[int] = None, form=None, substeps: int = 8) -> complex:
    """Curvature estimate ``log(holonomy of the eps-parallelogram) / eps^2``.

    Only the phase of the holonomy enters (the connection is unitary, the
    modulus drift is discretization error).  For bundles of higher rank the
    logarithm of the determinant is used, i.e. the trace of the curvature.
    The estimate converges to ``-<F, (A, B)>``; it is cross-checked at
    ``10 * eps`` and :class:`NumericalFailure` is raised when the two
    disagree.
    """
    value = _plaquette_log(J, A, B, eps, bundle, k, form, substeps)
    check = _plaquette_log(J, A, B, 10 * eps, bundle, k, form, substeps)
    if abs(value - check) > 0.1 * abs(value) + 1e-6:
        raise NumericalFailure(f"plaquette estimate did not converge ({value:.6g} vs {check:.6g})")
    return complex(value)


__all__ = [
    "Frame",
    "TransportResult",
    "HolonomyResult",
    "frame_at",
    "transport_frame",
    "loop_holonomy",
    "induced_holonomy",
    "fock_level_holonomy",
    "plaquette_curvature",
    "plaquette_loop",
    "step_transports",
    "sym_power",
    "wedge_power",
    "dual_operator",
    "bundle_rank",
    "BUNDLE_TAGS",
]
