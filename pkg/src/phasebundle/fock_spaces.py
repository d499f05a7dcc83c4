"""
Bosonic and fermionic Fock spaces over a reference polarisation, quadratic
Hamiltonians ``H_J``, their spectra, and Berry holonomies of eigenbundles.

Phase-space coordinates are quantized in a Darboux (bosons) or orthonormal
(fermions) basis adapted to the reference structure ``J0``:
``x_hat = L y_hat`` with ``L = [q_1, p_1, q_2, p_2, ...]``, ``p_i = J0 q_i``,
and per mode ``y_q = (a + a^dag)/sqrt2``, ``y_p = i(a - a^dag)/sqrt2``.
With these conventions ``[x_hat^mu, x_hat^nu] = i (omega^{-1})^{mu nu}``,
the commutator fixed by a prequantum connection of curvature ``omega/i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _poly
from .errors import CompatibilityError, GapClosure, NumericalFailure, StructuralError
from .frame_transport import HolonomyResult, frame_at
from .linear_structures import (
    METRIC,
    SYMPLECTIC,
    BilinearForm,
    CompatiblePair,
    ComplexStructure,
    reference_structure,
    validate,
)
from .parameter_geometry import JSPACE, ParameterPath

HERMITIAN_TOL = 1e-12
RANK_FLOOR = 1e-8


def _darboux_basis(form: BilinearForm, J0: ComplexStructure) -> np.ndarray:
    """Columns ``q_1, p_1, ...`` built from an orthonormal frame of ``V^{1,0}_{J0}``."""
    frame = frame_at(J0, form)
    L = np.zeros((form.dim, form.dim))
    for i, e in enumerate(frame.vectors.T):
        q = math.sqrt(2.0) * e.real
        L[:, 2 * i] = q
        L[:, 2 * i + 1] = J0.components @ q
    return L


def _check_compatible(form: BilinearForm, J: ComplexStructure):
    report = validate(CompatiblePair(form, J))
    if report:
        name, size = report[0]
        raise CompatibilityError(f"J is not compatible with the fixed {form.kind} ({name}: {size:.3g})")


class _FockBase:
    statistics = ""
    form: BilinearForm
    J0: ComplexStructure
    modes: int

    def _setup_frame(self):
        _check_compatible(self.form, self.J0)
        self.L = _darboux_basis(self.form, self.J0)
        target = np.kron(np.eye(self.modes), np.array([[1.0, 0.0], [0.0, 1.0]]) if self.form.kind == METRIC
                         else np.array([[0.0, 1.0], [-1.0, 0.0]]))
        defect = np.max(np.abs(self.L.T @ self.form.components @ self.L - target))
        if defect > 1e-10:
            raise NumericalFailure(f"reference basis is not adapted to the form ({defect:.3g})")

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def quadratic_blocks(self) -> np.ndarray:
        """Products ``y_a y_b`` restricted to the basis, as an array ``[a, b, i, j]``."""
        if getattr(self, "_blocks", None) is None:
            self._blocks = self._build_blocks()
            self._blocks.flags.writeable = False
        return self._blocks

    def level_dimension(self, k: int) -> int:
        raise NotImplementedError

    def level_energy(self, k: int) -> float:
        raise NotImplementedError


class BosonFock(_FockBase):
    """Symmetric Fock space of ``n`` modes truncated at total occupation ``N``.

    Parameters
    ----------
    omega : BilinearForm
        The fixed symplectic form.
    truncation : int
        Maximal total occupation kept in the basis.
    J0 : ComplexStructure, optional
        Reference structure; defaults to :func:`reference_structure`.
    """

    statistics = "boson"

    def __init__(self, omega: BilinearForm, truncation: int, J0: Optional[ComplexStructure] = None):
        if omega.kind != SYMPLECTIC:
            raise StructuralError("bosonic Fock spaces need a symplectic form")
        if truncation < 1:
            raise StructuralError("truncation must be at least 1")
        self.form = omega
        self.modes = omega.half_dim
        self.truncation = int(truncation)
        self.J0 = J0 if J0 is not None else reference_structure(omega)
        self._setup_frame()
        self.basis = self._occupations(self.truncation)

    def _occupations(self, top):
        out = []
        for k in range(top + 1):
            out.extend(_poly.monomial_exponents(self.modes, k))
        return out

    def lowering(self, top: Optional[int] = None) -> List[sp.csr_matrix]:
        """Annihilation operators on the basis truncated at ``top``."""
        top = self.truncation if top is None else top
        basis = self._occupations(top)
        index = {m: i for i, m in enumerate(basis)}
        ops = []
        for i in range(self.modes):
            rows, cols, vals = [], [], []
            for c, m in enumerate(basis):
                if m[i] == 0:
                    continue
                lowered = m[:i] + (m[i] - 1,) + m[i + 1:]
                rows.append(index[lowered])
                cols.append(c)
                vals.append(math.sqrt(m[i]))
            ops.append(sp.csr_matrix((vals, (rows, cols)), shape=(len(basis), len(basis))))
        return ops

    def quadratures(self, top: Optional[int] = None) -> List[sp.csr_matrix]:
        """``y_q1, y_p1, y_q2, ...`` on the basis truncated at ``top``."""
        out = []
        for a in self.lowering(top):
            ad = a.conj().T
            out.append((a + ad) / math.sqrt(2.0))
            out.append(1j * (a - ad) / math.sqrt(2.0))
        return out

    def _build_blocks(self):
        # Two extra occupation levels make every matrix element inside the
        # truncation exact (a quadratic moves the total occupation by at most 2).
        ys = self.quadratures(self.truncation + 2)
        dim = self.dimension
        out = np.empty((len(ys), len(ys), dim, dim), dtype=complex)
        for a, ya in enumerate(ys):
            for b, yb in enumerate(ys):
                out[a, b] = (ya @ yb).toarray()[:dim, :dim]
        return out

    def level_dimension(self, k: int) -> int:
        return math.comb(self.modes + k - 1, k)

    def level_energy(self, k: int) -> float:
        return k + self.modes / 2


class FermionFock(_FockBase):
    """Exterior Fock space of ``n`` modes (all ``2^n`` occupation patterns)."""

    statistics = "fermion"

    def __init__(self, metric: BilinearForm, J0: Optional[ComplexStructure] = None):
        if metric.kind != METRIC:
            raise StructuralError("fermionic Fock spaces need a Euclidean metric")
        self.form = metric
        self.modes = metric.half_dim
        self.J0 = J0 if J0 is not None else reference_structure(metric)
        self._setup_frame()
        n = self.modes
        pats = [tuple((b >> (n - 1 - i)) & 1 for i in range(n)) for b in range(2 ** n)]
        self.basis = sorted(pats, key=lambda m: (sum(m), tuple(-v for v in m)))

    def lowering(self) -> List[np.ndarray]:
        """Jordan-Wigner annihilation operators."""
        index = {m: i for i, m in enumerate(self.basis)}
        dim = len(self.basis)
        ops = []
        for i in range(self.modes):
            b = np.zeros((dim, dim))
            for c, m in enumerate(self.basis):
                if m[i] == 0:
                    continue
                sign = (-1) ** sum(m[:i])
                lowered = m[:i] + (0,) + m[i + 1:]
                b[index[lowered], c] = sign
            ops.append(b)
        return ops

    def majoranas(self) -> List[np.ndarray]:
        """``y_q1, y_p1, ...`` with ``{y_a, y_b} = delta_ab``."""
        out = []
        for b in self.lowering():
            bd = b.T
            out.append((b + bd) / math.sqrt(2.0))
            out.append(1j * (b - bd) / math.sqrt(2.0))
        return out

    def _build_blocks(self):
        ys = self.majoranas()
        return np.array([[ya @ yb for yb in ys] for ya in ys], dtype=complex)

    def level_dimension(self, k: int) -> int:
        return math.comb(self.modes, k)

    def level_energy(self, k: int) -> float:
        return k - self.modes / 2


@dataclass(frozen=True)
class FockOperator:
    """Dense operator on the basis of a Fock space."""

    space: object
    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        if M.shape != (self.space.dimension, self.space.dimension):
            raise StructuralError("operator does not match the Fock space dimension")
        M.flags.writeable = False
        object.__setattr__(self, "matrix", M)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def spectrum(self):
        """Sorted eigenvalues and eigenvectors (columns)."""
        if self.hermiticity_defect() > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(self.matrix)))):
            raise NumericalFailure("operator is not hermitian")
        H = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigh(H)


def quantize_quadratic(space, J: ComplexStructure) -> FockOperator:
    """Quantize ``H_J`` on a Fock space.

    Bosons: ``H_J = omega(x, Jx)/2`` in symmetric (Weyl) ordering, with
    matrix elements inside the truncation computed exactly.

    Fermions: ``H_J = -(i/2) (omega_J)_{mu nu} psi^mu psi^nu`` with
    ``omega_J = g(J., .)`` and ``{psi^mu, psi^nu} = (g^{-1})^{mu nu}``.
    """
    _check_compatible(space.form, J)
    L = space.L
    if space.statistics == "boson":
        S = L.T @ space.form.components @ J.components @ L
        S = 0.5 * (S + S.T)
        H = 0.5 * np.einsum("ab,abij->ij", S, space.quadratic_blocks())
        return FockOperator(space, H)
    A = L.T @ J.components.T @ space.form.components @ L
    H = -0.5j * np.einsum("ab,abij->ij", A, space.quadratic_blocks())
    return FockOperator(space, H)


@dataclass(frozen=True)
class EigenBundleSample:
    """Spectral data at one parameter sample."""

    index: int
    point: ComplexStructure
    eigenvalues: np.ndarray
    frames: Dict[int, np.ndarray]
    gaps: Dict[int, float]


def level_slice(space, k: int) -> slice:
    start = sum(space.level_dimension(j) for j in range(k))
    return slice(start, start + space.level_dimension(k))


def _level_gap(values, space, k):
    s = level_slice(space, k)
    gaps = []
    if s.start > 0:
        gaps.append(values[s.start] - values[s.start - 1])
    if s.stop < len(values):
        gaps.append(values[s.stop] - values[s.stop - 1])
    return float(min(gaps)) if gaps else math.inf


def _align(F, previous):
    """Right-multiply ``F`` by the unitary closest to ``F^dag previous``."""
    O = F.conj().T @ previous
    U, _, Vh = np.linalg.svd(O)
    return F @ (U @ Vh)


def default_gap_floor(space) -> float:
    """``1e-6`` times the mean level spacing (1 for these oscillators)."""
    return 1e-6


def spectral_frames(space, path, levels: Iterable[int], gap_floor: Optional[float] = None) -> List[EigenBundleSample]:
    """Diagonalize ``H_J`` along a path and extract aligned eigenframes.

    ``path`` is a J-space :class:`ParameterPath` or any sequence of
    complex structures.  Raises :class:`GapClosure` naming the first sample
    where a requested level comes closer than ``gap_floor`` to a
    neighbouring level.
    """
    if isinstance(path, ParameterPath):
        if path.kind != JSPACE:
            raise StructuralError("spectral frames need a path of complex structures")
        points = path.samples
    else:
        points = list(path)
    levels = sorted(set(int(k) for k in levels))
    top = space.truncation if space.statistics == "boson" else space.modes
    for k in levels:
        if k < 0 or k > top:
            raise StructuralError(f"level {k} is outside the Fock space")
    floor = default_gap_floor(space) if gap_floor is None else gap_floor
    out: List[EigenBundleSample] = []
    for idx, J in enumerate(points):
        values, vectors = quantize_quadratic(space, J).spectrum()
        frames, gaps = {}, {}
        for k in levels:
            gap = _level_gap(values, space, k)
            if gap < floor:
                raise GapClosure(f"level {k} gap {gap:.3g} below floor at sample {idx}", sample_index=idx)
            F = vectors[:, level_slice(space, k)]
            if out:
                F = _align(F, out[-1].frames[k])
            frames[k] = F
            gaps[k] = gap
        out.append(EigenBundleSample(idx, J, values, frames, gaps))
    return out


def _overlap_product(frames: Sequence[np.ndarray]) -> np.ndarray:
    W = np.eye(frames[0].shape[1], dtype=complex)
    m = len(frames)
    for j in range(m):
        nxt = frames[(j + 1) % m]
        O = nxt.conj().T @ frames[j]
        if np.linalg.svd(O, compute_uv=False).min() < RANK_FLOOR:
            raise NumericalFailure(f"eigenframe overlap loses rank between samples {j} and {(j + 1) % m}")
        W = O @ W
    U, _, Vh = np.linalg.svd(W)
    return U @ Vh


def berry_holonomy(samples: Sequence[EigenBundleSample], k: int) -> HolonomyResult:
    """Discrete eigenbundle holonomy of level ``k`` around a closed sample loop.

    The product of overlaps ``F_{j+1}^dag F_j`` (closing with ``F_0``) is
    polar-unitarized.  The error estimate compares with every other sample.
    """
    if len(samples) < 3:
        raise StructuralError("a holonomy loop needs at least three samples")
    first, last = samples[0].point.components, samples[-1].point.components
    if float(np.max(np.abs(first - last))) > 1e-12:
        raise StructuralError("berry holonomy needs a closed sample loop")
    frames = [s.frames[k] for s in samples[:-1]]
    dims = {F.shape[1] for F in frames}
    if len(dims) != 1:
        raise StructuralError("level dimension changes along the loop")
    U = _overlap_product(frames)
    coarse = _overlap_product(frames[::2]) if len(frames) >= 4 else U
    phase = np.linalg.det(U)
    error = float(np.linalg.norm(U - coarse, 2))
    return HolonomyResult(f"berry^({k})", U, complex(phase / abs(phase)), len(frames), error, k=k)


def spectrum_rows(samples: Sequence[EigenBundleSample], space, max_level: Optional[int] = None) -> List[tuple]:
    """``(sample_index, level, eigenvalue, gap)`` rows, one per eigenvalue of each tracked level."""
    rows = []
    for s in samples:
        levels = sorted(s.frames) if s.frames else []
        if max_level is not None:
            levels = [k for k in range(max_level + 1)]
        for k in levels:
            gap = s.gaps.get(k, _level_gap(s.eigenvalues, space, k))
            for v in s.eigenvalues[level_slice(space, k)]:
                rows.append((s.index, k, float(v), float(gap)))
    return rows


__all__ = [
    "BosonFock",
    "FermionFock",
    "FockOperator",
    "EigenBundleSample",
    "quantize_quadratic",
    "spectral_frames",
    "berry_holonomy",
    "spectrum_rows",
    "level_slice",
]
