"""
Integration of ``i nabla_{b'(t)} psi = H_{b(t)} psi`` along parameter paths
and the adiabatic split into dynamical and geometric phases.

States are evolved in the parallel-transported gauge: every step first
applies the connection's fibre map and then ``exp(-i H dt)`` by a
fourth-order Magnus step with Gauss-Legendre nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import AdiabaticityError, DomainError, NumericalFailure, StructuralError
from .fock_spaces import quantize_quadratic
from .linear_structures import StructureTriple, j_xi, polar_correct
from .parameter_geometry import HYPERBOLOID, JSPACE, SPHERE, ParameterPath, geodesic_distance

UNITARITY_BOUND = 1e-8
LEAKAGE_BOUND = 0.1

_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)


def smooth_profile(u: float) -> float:
    """``u - sin(2 pi u)/(2 pi)``: monotone, with zero speed at both ends."""
    return u - math.sin(2 * math.pi * u) / (2 * math.pi)


def _linear_profile(u: float) -> float:
    return u


PROFILES = {"linear": _linear_profile, "smooth": smooth_profile}


def _interpolate(kind, a, b, s):
    if kind == JSPACE:
        if s == 0:
            return a
        if s == 1:
            return b
        return polar_correct((1 - s) * a.components + s * b.components)
    d = geodesic_distance(kind, a, b)
    if d == 0:
        return a
    if kind == SPHERE:
        return (math.sin((1 - s) * d) * a + math.sin(s * d) * b) / math.sin(d)
    return (math.sinh((1 - s) * d) * a + math.sinh(s * d) * b) / math.sinh(d)


@dataclass(frozen=True)
class Schedule:
    """Time parametrization of a path.

    Sample ``j`` of ``path`` is reached at ``times[j]``; between samples the
    point moves along the geodesic (or the polar-corrected chord in J-space)
    with the parameter ``m * profile(t/T)``.
    """

    path: ParameterPath
    total_time: float
    profile: str = "smooth"

    def __post_init__(self):
        if self.total_time <= 0:
            raise DomainError("total time must be positive")
        if self.profile not in PROFILES:
            raise DomainError(f"unknown profile {self.profile!r}")

    @property
    def steps(self) -> int:
        return self.path.steps

    @cached_property
    def times(self) -> np.ndarray:
        f = PROFILES[self.profile]
        m = self.steps
        out = np.empty(m + 1)
        out[0], out[-1] = 0.0, self.total_time
        for j in range(1, m):
            target = j / m
            out[j] = self.total_time * brentq(lambda u: f(u) - target, 0.0, 1.0, xtol=1e-15)
        if np.any(np.diff(out) <= 0):
            raise NumericalFailure("schedule times are not increasing")
        return out

    def point_at(self, t: float):
        """Parameter point at time ``t``."""
        m = self.steps
        sigma = m * PROFILES[self.profile](min(max(t / self.total_time, 0.0), 1.0))
        j = min(int(math.floor(sigma)), m - 1)
        s = sigma - j
        return _interpolate(self.path.kind, self.path.samples[j], self.path.samples[j + 1], s)

    def reversed(self) -> "Schedule":
        """The same path traversed backwards; point_at(t) maps to point_at(T - t)."""
        if self.profile != "smooth" and self.profile != "linear":
            raise DomainError("only symmetric profiles can be reversed")
        return Schedule(self.path.reversed(), self.total_time, self.profile)


@dataclass(frozen=True)
class EvolutionResult:
    """Initial and final states (columns) of an evolution."""

    initial: np.ndarray
    final: np.ndarray
    times: np.ndarray
    transport: np.ndarray
    unitarity_defect: float
    steps: int


def _expm_antihermitian(Omega):
    """``exp(Omega)`` for anti-hermitian ``Omega`` via an eigen-decomposition of ``i Omega``."""
    H = 1j * Omega
    H = 0.5 * (H + H.conj().T)
    w, U = np.linalg.eigh(H)
    return (U * np.exp(-1j * w)) @ U.conj().T


def magnus_step(hamiltonian: Callable[[float], np.ndarray], t0: float, dt: float) -> np.ndarray:
    """Fourth-order Magnus propagator of ``i psi' = H(t) psi`` over ``[t0, t0 + dt]``."""
    A1 = -1j * np.asarray(hamiltonian(t0 + _GAUSS[0] * dt))
    A2 = -1j * np.asarray(hamiltonian(t0 + _GAUSS[1] * dt))
    Omega = 0.5 * dt * (A1 + A2) + (math.sqrt(3) / 12) * dt * dt * (A2 @ A1 - A1 @ A2)
    return _expm_antihermitian(Omega)


def zero_hamiltonian(dim: int) -> Callable[[float], np.ndarray]:
    Z = np.zeros((dim, dim), dtype=complex)
    return lambda t: Z


def evolve(schedule: Schedule, initial, hamiltonian: Optional[Callable[[float], np.ndarray]] = None,
           connection: Optional[Sequence[np.ndarray]] = None, substeps: int = 1) -> EvolutionResult:
    """Evolve ``initial`` (a vector or a matrix of column states) along ``schedule``.

    Parameters
    ----------
    hamiltonian : callable, optional
        ``t -> H(t)`` in the parallel-transported gauge; ``None`` means
        ``H = 0``.
    connection : sequence of arrays, optional
        Fibre maps from sample ``j`` to ``j + 1`` (for instance
        :func:`phasebundle.frame_transport.step_transports`); ``None`` is
        the trivial connection of a fixed Hilbert space.
    substeps : int
        Magnus steps per path step.
    """
    if substeps < 1:
        raise DomainError("substeps must be at least 1")
    psi0 = np.asarray(initial, dtype=complex)
    vector = psi0.ndim == 1
    Psi = psi0.reshape(-1, 1) if vector else psi0
    dim = Psi.shape[0]
    norms0 = Psi.conj().T @ Psi
    if abs(np.trace(norms0).real / Psi.shape[1] - 1) > 1e-10:
        raise DomainError("initial states must be normalized")
    m = schedule.steps
    if connection is not None:
        connection = list(connection)
        if len(connection) != m:
            raise StructuralError(f"connection provides {len(connection)} maps for {m} steps")
        for T in connection:
            if T.shape != (dim, dim):
                raise StructuralError(f"connection fibre dimension {T.shape[0]} differs from state dimension {dim}")
    if hamiltonian is not None:
        H0 = np.asarray(hamiltonian(0.0))
        if H0.shape != (dim, dim):
            raise StructuralError(f"hamiltonian dimension {H0.shape[0]} differs from state dimension {dim}")
    times = schedule.times
    transport = np.eye(dim, dtype=complex)
    for j in range(m):
        if connection is not None:
            Psi = connection[j] @ Psi
            transport = connection[j] @ transport
        if hamiltonian is not None:
            dt = (times[j + 1] - times[j]) / substeps
            for r in range(substeps):
                Psi = magnus_step(hamiltonian, times[j] + r * dt, dt) @ Psi
    defect = float(np.max(np.abs(Psi.conj().T @ Psi - norms0)))
    if defect > UNITARITY_BOUND:
        raise NumericalFailure(f"unitarity defect {defect:.3g} exceeds {UNITARITY_BOUND:g}")
    final = Psi[:, 0] if vector else Psi
    return EvolutionResult(psi0, final, times, transport, defect, m)


def fock_hamiltonian(space, schedule: Schedule, triple: Optional[StructureTriple] = None):
    """``t -> H_{J(t)}`` on a Fock space, with ``J(t) = J_xi(t)`` when a triple is given."""
    def at(t):
        point = schedule.point_at(t)
        J = j_xi(triple, point) if triple is not None else point
        return quantize_quadratic(space, J).matrix
    return at


def reversed_hamiltonian(hamiltonian, total_time: float):
    """``t -> -H(T - t)``: the generator that undoes an evolution."""
    return lambda t: -np.asarray(hamiltonian(total_time - t))


@dataclass(frozen=True)
class AdiabaticSplit:
    dynamical: complex
    geometric: np.ndarray
    leakage: float

    @property
    def geometric_phase(self) -> complex:
        d = np.linalg.det(np.atleast_2d(self.geometric))
        return complex(d / abs(d))


def dynamical_phase(times, energies) -> complex:
    """``exp(-i int E dt)`` from sampled energies (trapezoid rule) or a constant."""
    times = np.asarray(times, dtype=float)
    if callable(energies):
        energies = np.array([energies(t) for t in times])
    energies = np.broadcast_to(np.asarray(energies, dtype=float), times.shape)
    return complex(np.exp(-1j * np.trapezoid(energies, times)))


def adiabatic_split(result: EvolutionResult, level_frame, energies) -> AdiabaticSplit:
    """Separate the dynamical phase from the geometric remainder.

    ``level_frame`` holds the tracked eigenvectors at the (common) start
    and end point of a closed schedule.  The geometric remainder is the
    unitary part of ``F^dag psi(T)`` divided by the dynamical phase; the
    leakage is the largest norm lost from the tracked level.
    """
    F = np.atleast_2d(np.asarray(level_frame, dtype=complex))
    if F.shape[0] == 1 and F.shape[1] > 1:
        F = F.T
    Psi = np.asarray(result.final, dtype=complex)
    Psi = Psi.reshape(-1, 1) if Psi.ndim == 1 else Psi
    M = F.conj().T @ Psi
    M0 = F.conj().T @ (result.initial.reshape(-1, 1) if result.initial.ndim == 1 else result.initial)
    kept = np.sum(np.abs(M) ** 2, axis=0) / np.sum(np.abs(Psi) ** 2, axis=0)
    leakage = float(1 - kept.min())
    if leakage > LEAKAGE_BOUND:
        raise AdiabaticityError(f"leakage {leakage:.3g} out of the tracked level")
    dyn = dynamical_phase(result.times, energies)
    W = M @ np.linalg.pinv(M0)
    U, _, Vh = np.linalg.svd(W)
    return AdiabaticSplit(dyn, (U @ Vh) / dyn, leakage)


def evolution_rows(T: float, level: int, split: AdiabaticSplit) -> tuple:
    """``(T, level, dyn_phase_arg, geom_phase_arg, leakage)``."""
    return (float(T), int(level), float(np.angle(split.dynamical)),
            float(np.angle(split.geometric_phase)), float(split.leakage))


__all__ = [
    "Schedule",
    "EvolutionResult",
    "AdiabaticSplit",
    "evolve",
    "magnus_step",
    "adiabatic_split",
    "dynamical_phase",
    "fock_hamiltonian",
    "reversed_hamiltonian",
    "zero_hamiltonian",
    "evolution_rows",
    "smooth_profile",
]
