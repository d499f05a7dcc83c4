"""Sparse polynomials as ``{exponent tuple: coefficient}`` dictionaries."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, Tuple

import numpy as np

Poly = Dict[Tuple[int, ...], complex]

PRUNE = 0.0


@lru_cache(maxsize=None)
def monomial_exponents(nvars: int, degree: int) -> tuple:
    """Exponent tuples of total degree ``degree``, in a fixed order."""
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        alpha = [0] * nvars
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return tuple(out)


def monomial_index(nvars: int, degree: int) -> dict:
    return {a: i for i, a in enumerate(monomial_exponents(nvars, degree))}


def prune(p: Poly) -> Poly:
    return {a: c for a, c in p.items() if c != 0}


def chop(p: Poly, tol: float) -> Poly:
    """Drop coefficients with modulus at most ``tol``."""
    return {a: c for a, c in p.items() if abs(c) > tol}


def add(p: Poly, q: Poly, scale: complex = 1.0) -> Poly:
    out = dict(p)
    for a, c in q.items():
        out[a] = out.get(a, 0) + scale * c
    return prune(out)


def mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for a, c in p.items():
        for b, d in q.items():
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = out.get(key, 0) + c * d
    return prune(out)


def power(p: Poly, k: int, nvars: int) -> Poly:
    out: Poly = {(0,) * nvars: 1.0}
    for _ in range(k):
        out = mul(out, p)
    return out


def linear(coeffs) -> Poly:
    """``sum_i coeffs[i] x_i``."""
    n = len(coeffs)
    out = {}
    for i, c in enumerate(coeffs):
        if c != 0:
            e = [0] * n
            e[i] = 1
            out[tuple(e)] = complex(c)
    return out


def derivative(p: Poly, direction) -> Poly:
    """Directional derivative along a (complex) vector."""
    out: Poly = {}
    for a, c in p.items():
        for i, ai in enumerate(a):
            if ai == 0 or direction[i] == 0:
                continue
            key = a[:i] + (ai - 1,) + a[i + 1:]
            out[key] = out.get(key, 0) + c * ai * direction[i]
    return prune(out)


def evaluate(p: Poly, x) -> complex:
    x = np.asarray(x)
    total = 0j
    for a, c in p.items():
        total += c * np.prod(x ** np.asarray(a))
    return total


def substitute_linear(p: Poly, rows, nvars_out: int) -> Poly:
    """Substitute ``x_i -> sum_j rows[i][j] y_j``."""
    forms = [linear(r) for r in rows]
    out: Poly = {}
    for a, c in p.items():
        term: Poly = {(0,) * nvars_out: c}
        for i, ai in enumerate(a):
            for _ in range(ai):
                term = mul(term, forms[i])
        out = add(out, term)
    return out


def degree(p: Poly) -> int:
    return max((sum(a) for a in p), default=0)


def to_dense(p: Poly, nvars: int, deg: int) -> np.ndarray:
    """Coefficient vector in the homogeneous monomial basis of degree ``deg``."""
    index = monomial_index(nvars, deg)
    v = np.zeros(len(index), dtype=complex)
    for a, c in p.items():
        if sum(a) != deg:
            raise ValueError("polynomial is not homogeneous of the requested degree")
        v[index[a]] += c
    return v


def from_dense(v, nvars: int, deg: int) -> Poly:
    return prune({a: complex(c) for a, c in zip(monomial_exponents(nvars, deg), v)})


@lru_cache(maxsize=None)
def euler_operators(nvars: int, deg: int) -> np.ndarray:
    """Matrices of ``x_mu d/dx_nu`` on homogeneous polynomials of degree ``deg``.

    Returns an array ``E[mu, nu]`` of shape ``(nvars, nvars, m, m)``.
    """
    basis = monomial_exponents(nvars, deg)
    index = {a: i for i, a in enumerate(basis)}
    m = len(basis)
    E = np.zeros((nvars, nvars, m, m))
    for col, a in enumerate(basis):
        for nu in range(nvars):
            if a[nu] == 0:
                continue
            lowered = list(a)
            lowered[nu] -= 1
            for mu in range(nvars):
                raised = list(lowered)
                raised[mu] += 1
                E[mu, nu, index[tuple(raised)], col] += a[nu]
    E.flags.writeable = False
    return E


@lru_cache(maxsize=None)
def _sym_structure(nvars: int, deg: int):
    """Factor lists per monomial and the scatter matrix from tensor entries to monomials."""
    basis = monomial_exponents(nvars, deg)
    index = {a: i for i, a in enumerate(basis)}
    factors = np.array([[i for i, ai in enumerate(a) for _ in range(ai)] for a in basis], dtype=int)
    factors = factors.reshape(len(basis), deg)
    scatter = np.zeros((len(basis), nvars ** deg))
    for flat in range(nvars ** deg):
        alpha = [0] * nvars
        rem = flat
        for _ in range(deg):
            alpha[rem % nvars] += 1
            rem //= nvars
        scatter[index[tuple(alpha)], flat] = 1.0
    factors.flags.writeable = False
    scatter.flags.writeable = False
    return factors, scatter


def substitution_matrix(A, deg: int) -> np.ndarray:
    """Matrix of ``x_i -> sum_j A[j, i] x_j`` on homogeneous polynomials of degree ``deg``."""
    A = np.asarray(A)
    nvars = A.shape[0]
    if deg == 0:
        return np.ones((1, 1), dtype=A.dtype)
    factors, scatter = _sym_structure(nvars, deg)
    m = factors.shape[0]
    R = A[:, factors[:, 0]].T
    for t in range(1, deg):
        R = (R[:, :, None] * A[:, factors[:, t]].T[:, None, :]).reshape(m, -1)
    # R[col, flat] with flat = i_1 * nvars^(deg-1) + ... ; scatter expects little-endian digits,
    # which describe the same multiset.
    return scatter @ R.T
