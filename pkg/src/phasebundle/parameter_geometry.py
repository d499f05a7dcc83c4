"""
Paths, loops and surface patches on the parameter spaces S^2 and H^2 (and
paths of complex structures), together with the area forms used as
independent oracles for holonomy computations.

Points of H^2 are stored in hyperboloid coordinates ``(xi0, xi1, xi2)`` with
``xi0 > 0`` and ``xi0^2 - xi1^2 - xi2^2 = 1``.  Both area forms are
``xi . (u x v)``; loops that run counterclockwise around ``+xi0`` (resp. the
outward normal on the sphere) have positive area.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Sequence

import numpy as np

from .errors import (
    AmbiguityError,
    DegenerateInputError,
    DomainError,
    NumericalFailure,
    StructuralError,
)
from .linear_structures import (
    ComplexStructure,
    INPUT_TOL,
    StructureTriple,
    j_xi,
    minkowski,
    square_defect,
)

SPHERE = "sphere"
HYPERBOLOID = "hyperboloid"
JSPACE = "J-space"


def _on_manifold(kind: str, p) -> float:
    if kind == JSPACE:
        return square_defect(p.components if isinstance(p, ComplexStructure) else p)
    p = np.asarray(p, dtype=float)
    if kind == SPHERE:
        return abs(float(p @ p) - 1.0)
    if kind == HYPERBOLOID:
        err = abs(minkowski(p, p) - 1.0)
        return err if p[0] > 0 else np.inf
    raise StructuralError(f"unknown path kind {kind!r}")


def _as_point(kind, p):
    if kind == JSPACE:
        return p if isinstance(p, ComplexStructure) else ComplexStructure(p)
    arr = np.array(p, dtype=float)
    arr.flags.writeable = False
    return arr


def _coords(kind, p) -> np.ndarray:
    return p.components if kind == JSPACE else p


@dataclass(frozen=True)
class ParameterPath:
    """An ordered sequence of parameter points.

    ``samples`` are 3-vectors for the sphere and the hyperboloid and
    :class:`ComplexStructure` values for J-space.
    """

    kind: str
    samples: tuple
    closed: bool = False

    def __post_init__(self):
        if self.kind not in (SPHERE, HYPERBOLOID, JSPACE):
            raise StructuralError(f"unknown path kind {self.kind!r}")
        pts = tuple(_as_point(self.kind, p) for p in self.samples)
        if len(pts) < 2:
            raise StructuralError("a path needs at least two samples")
        for i, p in enumerate(pts):
            if _on_manifold(self.kind, p) > INPUT_TOL:
                raise DomainError(f"sample {i} is off the {self.kind}")
        for i in range(len(pts) - 1):
            if np.array_equal(_coords(self.kind, pts[i]), _coords(self.kind, pts[i + 1])):
                raise StructuralError(f"samples {i} and {i + 1} coincide")
        if self.closed:
            gap = np.max(np.abs(_coords(self.kind, pts[0]) - _coords(self.kind, pts[-1])))
            if gap > 1e-12:
                raise StructuralError(f"closed path does not return to its start (gap {gap:.3g})")
        object.__setattr__(self, "samples", pts)

    def __len__(self):
        return len(self.samples)

    @property
    def steps(self) -> int:
        return len(self.samples) - 1

    def reversed(self) -> "ParameterPath":
        return ParameterPath(self.kind, self.samples[::-1], self.closed)

    def coarsened(self) -> "ParameterPath":
        """Every other sample, keeping both endpoints."""
        idx = list(range(0, len(self.samples), 2))
        if idx[-1] != len(self.samples) - 1:
            idx.append(len(self.samples) - 1)
        return ParameterPath(self.kind, [self.samples[i] for i in idx], self.closed)

    def then(self, other: "ParameterPath") -> "ParameterPath":
        """Concatenation through the shared endpoint."""
        if self.kind != other.kind:
            raise StructuralError("cannot join paths of different kinds")
        a, b = _coords(self.kind, self.samples[-1]), _coords(other.kind, other.samples[0])
        if np.max(np.abs(a - b)) > 1e-12:
            raise StructuralError("paths do not share an endpoint")
        pts = self.samples + other.samples[1:]
        closed = np.max(np.abs(_coords(self.kind, pts[0]) - _coords(self.kind, pts[-1]))) <= 1e-12
        return ParameterPath(self.kind, pts, bool(closed))

    def to_structures(self, triple: StructureTriple) -> "ParameterPath":
        """Image of a sphere/hyperboloid path under ``xi -> J_xi``."""
        if self.kind == JSPACE:
            return self
        expected = SPHERE if triple.kind == "quaternionic" else HYPERBOLOID
        if self.kind != expected:
            raise StructuralError(f"{triple.kind} triples parametrize the {expected}")
        js = [j_xi(triple, p) for p in self.samples]
        if self.closed:
            js[-1] = js[0]
        return ParameterPath(JSPACE, js, self.closed)


# -- geodesics ---------------------------------------------------------------------

def _geodesic_point(kind, a, b, s, dist):
    if kind == SPHERE:
        return (math.sin((1 - s) * dist) * a + math.sin(s * dist) * b) / math.sin(dist)
    return (math.sinh((1 - s) * dist) * a + math.sinh(s * dist) * b) / math.sinh(dist)


def geodesic_distance(kind, a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if kind == SPHERE:
        return math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))
    return math.acosh(max(1.0, minkowski(a, b)))


def geodesic_arc(kind: str, a, b, steps: int) -> ParameterPath:
    """Great-circle or hyperbolic geodesic from ``a`` to ``b`` in ``steps`` segments."""
    if kind not in (SPHERE, HYPERBOLOID):
        raise StructuralError("geodesic arcs are defined on the sphere and hyperboloid")
    if steps < 1:
        raise DomainError("steps must be positive")
    a, b = np.asarray(a, float), np.asarray(b, float)
    for p in (a, b):
        if _on_manifold(kind, p) > INPUT_TOL:
            raise DomainError(f"endpoint {p} is off the {kind}")
    dist = geodesic_distance(kind, a, b)
    if kind == SPHERE and math.pi - dist < 1e-9:
        raise AmbiguityError("antipodal endpoints do not determine a great circle")
    if dist < 1e-15:
        raise StructuralError("endpoints coincide")
    pts = [a] + [_geodesic_point(kind, a, b, j / steps, dist) for j in range(1, steps)] + [b]
    return ParameterPath(kind, pts, closed=False)


def polygon_loop(kind: str, vertices, steps_per_edge: int) -> ParameterPath:
    """Closed loop through ``vertices`` along geodesic edges."""
    verts = [np.asarray(v, float) for v in vertices]
    if len(verts) < 3:
        raise DomainError("a loop needs at least three vertices")
    pts = [verts[0]]
    for a, b in zip(verts, verts[1:] + verts[:1]):
        pts.extend(geodesic_arc(kind, a, b, steps_per_edge).samples[1:])
    pts[-1] = pts[0]
    return ParameterPath(kind, pts, closed=True)


def circle_vertices(kind: str, radius: float, count: int, center: str = "north", phase: float = 0.0):
    """Vertices of a small circle around a pole, counterclockwise as seen from it.

    On the sphere ``radius`` is the polar angle; ``center='south'`` gives the
    same circle traversed counterclockwise around the south pole.  On the
    hyperboloid ``radius`` is the hyperbolic radius around ``(1, 0, 0)``.
    """
    t = phase + 2 * np.pi * np.arange(count) / count
    if kind == SPHERE:
        s, c = math.sin(radius), math.cos(radius)
        if center == "north":
            return [np.array([s * math.cos(a), s * math.sin(a), c]) for a in t]
        if center == "south":
            return [np.array([s * math.cos(a), -s * math.sin(a), c]) for a in t]
        raise DomainError(f"unknown cap center {center!r}")
    ch, sh = math.cosh(radius), math.sinh(radius)
    return [np.array([ch, sh * math.cos(a), sh * math.sin(a)]) for a in t]


def cap_solid_angle(radius: float, center: str = "north") -> float:
    """Oriented area enclosed by the circle of :func:`circle_vertices` on S^2."""
    north = 2 * math.pi * (1 - math.cos(radius))
    return north if center == "north" else 4 * math.pi - north


# -- areas -----------------------------------------------------------------------------

def _vertex_angle(kind, p, q, r) -> float:
    """Interior angle at ``p`` between geodesics towards ``q`` and ``r``."""
    if kind == SPHERE:
        tq = q - (p @ q) * p
        tr = r - (p @ r) * p
        nq, nr = np.linalg.norm(tq), np.linalg.norm(tr)
        if nq < 1e-15 or nr < 1e-15:
            raise DegenerateInputError("repeated vertex")
        c = float(tq @ tr) / (nq * nr)
    else:
        tq = q - minkowski(p, q) * p
        tr = r - minkowski(p, r) * p
        nq, nr = math.sqrt(max(-minkowski(tq, tq), 0.0)), math.sqrt(max(-minkowski(tr, tr), 0.0))
        if nq < 1e-15 or nr < 1e-15:
            raise DegenerateInputError("repeated vertex")
        c = -minkowski(tq, tr) / (nq * nr)
    return math.acos(min(1.0, max(-1.0, c)))


def triangle_area(kind: str, a, b, c) -> float:
    """Signed area of a geodesic triangle by angle excess (sphere) or defect."""
    a, b, c = (np.asarray(x, float) for x in (a, b, c))
    orient = float(np.linalg.det(np.array([a, b, c])))
    scale = max(1.0, float(np.max(np.abs([a, b, c]))) ** 3)
    if abs(orient) < 1e-13 * scale:
        raise DegenerateInputError("collinear (degenerate) vertex triple")
    angles = _vertex_angle(kind, a, b, c) + _vertex_angle(kind, b, c, a) + _vertex_angle(kind, c, a, b)
    size = angles - math.pi if kind == SPHERE else math.pi - angles
    return math.copysign(size, orient)


def polygon_area(kind: str, vertices) -> float:
    """Signed area enclosed by a geodesic polygon, via a fan from vertex 0.

    On the sphere this is the solid angle; it is a representative of a
    class defined modulo 4 pi.  The fan must be geodesically convex from
    vertex 0.
    """
    if kind not in (SPHERE, HYPERBOLOID):
        raise StructuralError("areas are defined on the sphere and hyperboloid")
    verts = [np.asarray(v, float) for v in vertices]
    if len(verts) < 3:
        raise DomainError("a polygon needs at least three vertices")
    for v in verts:
        if _on_manifold(kind, v) > INPUT_TOL:
            raise DomainError(f"vertex {v} is off the {kind}")
    return float(sum(triangle_area(kind, verts[0], verts[i], verts[i + 1]) for i in range(1, len(verts) - 1)))


def reduce_solid_angle(omega: float) -> float:
    """Representative of ``omega`` modulo 4 pi in ``(-2 pi, 2 pi]``."""
    r = math.fmod(omega, 4 * math.pi)
    if r > 2 * math.pi:
        r -= 4 * math.pi
    elif r <= -2 * math.pi:
        r += 4 * math.pi
    return r


# -- Kaehler form on the space of complex structures ------------------------------------

def kaehler_form_value(J, A, B) -> float:
    """``-(i/4) tr_{V^{1,0}}(dJ(A) dJ(B) - dJ(B) dJ(A))`` at ``J``.

    ``A`` and ``B`` are tangent variations (arrays anticommuting with ``J``).
    """
    Jm = J.components if isinstance(J, ComplexStructure) else np.asarray(J, float)
    A = getattr(A, "delta", A)
    B = getattr(B, "delta", B)
    A, B = np.asarray(A, float), np.asarray(B, float)
    for name, X in (("A", A), ("B", B)):
        dev = float(np.max(np.abs(X @ Jm + Jm @ X)))
        if dev > INPUT_TOL:
            raise DomainError(f"{name} is not tangent at J (anticommutator {dev:.3g})")
    P = 0.5 * (np.eye(Jm.shape[0]) - 1j * Jm)
    value = -0.25j * np.trace(P @ (A @ B - B @ A))
    scale = max(1.0, abs(value))
    if abs(value.imag) > 1e-12 * scale:
        raise NumericalFailure(f"Kaehler form has imaginary part {value.imag:.3g}")
    return float(value.real)


def area_form(kind: str) -> Callable:
    """Standard area form ``xi . (u x v)`` on S^2 or H^2."""
    if kind not in (SPHERE, HYPERBOLOID):
        raise StructuralError(f"no area form on {kind!r}")

    def evaluate(point, u, v):
        return float(np.asarray(point) @ np.cross(u, v))

    return evaluate


def kaehler_pullback(triple: StructureTriple) -> Callable:
    """Pull-back of the Kaehler form through ``xi -> J_xi``."""

    def evaluate(point, u, v):
        J = triple.combine(point)
        return kaehler_form_value(J, triple.combine(u), triple.combine(v))

    return evaluate


def zero_form(point, u, v) -> float:
    return 0.0


# -- surface patches and quadrature ------------------------------------------------------

@dataclass(frozen=True)
class SurfacePatch:
    """Oriented geodesic triangles covering a region, with its boundary loop."""

    kind: str
    triangles: tuple
    boundary: tuple

    def __post_init__(self):
        tris = tuple(tuple(np.asarray(p, float) for p in tri) for tri in self.triangles)
        for tri in tris:
            if len(tri) != 3:
                raise StructuralError("patch triangles need three vertices")
            for p in tri:
                if _on_manifold(self.kind, p) > INPUT_TOL:
                    raise DomainError(f"triangle vertex {p} is off the {self.kind}")
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary", tuple(np.asarray(p, float) for p in self.boundary))


def fan_patch(kind: str, vertices) -> SurfacePatch:
    """Fan triangulation of a geodesic polygon from vertex 0."""
    verts = [np.asarray(v, float) for v in vertices]
    if len(verts) < 3:
        raise DomainError("a patch needs at least three vertices")
    tris = [(verts[0], verts[i], verts[i + 1]) for i in range(1, len(verts) - 1)]
    return SurfacePatch(kind, tuple(tris), tuple(verts))


def _normalize(kind, q):
    if kind == SPHERE:
        return q / math.sqrt(float(q @ q))
    return q / math.sqrt(minkowski(q, q))


def _normalize_jacobian(kind, q, dq):
    """Derivative of the radial projection onto the manifold at ``q``."""
    if kind == SPHERE:
        r = math.sqrt(float(q @ q))
        p = q / r
        return (dq - p * float(p @ dq)) / r
    r = math.sqrt(minkowski(q, q))
    p = q / r
    return (dq - p * minkowski(p, dq)) / r


def _cell_centroids(level: int) -> np.ndarray:
    """Barycentric ``(s, t)`` centroids of the ``4**level`` cells of a uniform subdivision."""
    m = 2 ** level
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    up = i + j <= m - 1
    down = i + j <= m - 2
    cells = [np.stack([i[up] + 1 / 3, j[up] + 1 / 3], axis=1),
             np.stack([i[down] + 2 / 3, j[down] + 2 / 3], axis=1)]
    return np.concatenate(cells) / m


def _triangle_midpoint_sum(evaluator, kind, tri, level: int) -> float:
    """Midpoint rule on the radially projected flat triangle, 4**level cells."""
    a, b, c = tri
    ea, eb = b - a, c - a
    weight = 0.5 / 4 ** level
    total = 0.0
    for s, t in _cell_centroids(level):
        q = a + s * ea + t * eb
        p = _normalize(kind, q)
        du = _normalize_jacobian(kind, q, ea)
        dv = _normalize_jacobian(kind, q, eb)
        total += evaluator(p, du, dv)
    return total * weight


class QuadratureResult(NamedTuple):
    value: float
    error: float
    level: int


def integrate_two_form(evaluator, patch: SurfacePatch, tol: float = 1e-9,
                       max_refinements: int = 7, start_level: int = 1) -> QuadratureResult:
    """Integrate a 2-form over a patch.

    Each triangle is integrated by the midpoint rule on a uniform
    subdivision.  The midpoint rule has an error expansion in even powers
    of the cell size, so successive uniform refinements are combined into
    a Romberg table; the error estimate is the change along its diagonal.
    ``evaluator(p, u, v)`` returns the form at ``p`` on the ambient
    tangent vectors ``u``, ``v``.
    """
    def level_sum(level):
        return sum(_triangle_midpoint_sum(evaluator, patch.kind, tri, level) for tri in patch.triangles)

    row = [level_sum(start_level)]
    error = math.inf
    for level in range(start_level + 1, start_level + max_refinements + 1):
        new = [level_sum(level)]
        for j, old in enumerate(row):
            factor = 4.0 ** (j + 1)
            new.append(new[j] + (new[j] - old) / (factor - 1))
        error = abs(new[-1] - row[-1])
        if error <= tol * max(1.0, abs(new[-1])):
            return QuadratureResult(float(new[-1]), float(error), level)
        row = new
    raise NumericalFailure(f"two-form quadrature did not reach tolerance {tol} (last error {error:.3g})")


# -- JSON -------------------------------------------------------------------------------------

def loop_from_json(data) -> ParameterPath:
    """Build a closed geodesic loop from ``{"kind", "vertices", "steps_per_edge"}``."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        kind = data["kind"]
        vertices = data["vertices"]
    except KeyError as exc:
        raise StructuralError(f"loop description is missing {exc}") from None
    steps = int(data.get("steps_per_edge", 1))
    return polygon_loop(kind, vertices, steps)


def loop_to_json(kind: str, vertices: Sequence, steps_per_edge: int) -> dict:
    return {"kind": kind, "vertices": [list(map(float, v)) for v in vertices], "steps_per_edge": int(steps_per_edge)}


__all__ = [
    "ParameterPath",
    "SurfacePatch",
    "QuadratureResult",
    "geodesic_arc",
    "polygon_loop",
    "polygon_area",
    "triangle_area",
    "kaehler_form_value",
    "integrate_two_form",
    "fan_patch",
    "area_form",
    "kaehler_pullback",
    "circle_vertices",
    "cap_solid_angle",
    "reduce_solid_angle",
    "loop_from_json",
]
