"""Weyl matrix, its algebraic identities, Laurent data, and spectral mappings.

The matrix M(lambda) is unit lower-triangular with strict entries
-Delta_jk / Delta_kk; within each column the propagation scale cancels,
so M is computed entirely from mantissas.  Laurent coefficients at a
simple pole come from trapezoidal contour quadrature on circles, which is
spectrally accurate for meromorphic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms
from .charfun import char_values
from .errors import ContourError, PoleProximityError
from .propagator import Problem, propagate_blocks

_STRICT_LOWER = ((2, 1), (3, 1), (4, 1), (3, 2), (4, 2), (4, 3))

POLE_GUARD = 1e-8


@dataclass(frozen=True)
class WeylSample:
    """M(lambda) as a dense unit lower-triangular 4x4 matrix."""

    lam: complex
    m: np.ndarray

    def entry(self, j, k):
        return complex(self.m[j - 1, k - 1])


def weyl_matrices(problem: Problem, lams, guard=POLE_GUARD):
    """Batched M(lambda); rejects lambdas too close to a Delta_kk zero."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    cv = char_values(problem, lams)
    out = np.zeros((lams.size, 4, 4), dtype=complex)
    out[:, range(4), range(4)] = 1.0
    for k in (1, 2, 3):
        dkk = cv.mantissa(k, k)
        col_scale = np.max(np.abs(np.stack([cv.mantissa(j, k) for j in range(k, 5)])), axis=0)
        near = np.abs(dkk) < guard * np.maximum(col_scale, 1e-300)
        if near.any():
            i = int(np.argmax(near))
            raise PoleProximityError(
                f"lambda={lams[i]:.8g} is within the pole guard of a zero of "
                f"Delta_{k}{k}", k=k, lam=complex(lams[i]))
        for j in range(k + 1, 5):
            out[:, j - 1, k - 1] = cv.weyl_entry(j, k)
    return out


def weyl_matrix(problem: Problem, lam, guard=POLE_GUARD) -> WeylSample:
    m = weyl_matrices(problem, [lam], guard)[0]
    return WeylSample(complex(lam), m)


def check_symplectic(sample: WeylSample):
    """Max |M^T J0 M - J0| entry; exactly zero in theory."""
    r = sample.m.T @ forms.J0 @ sample.m - forms.J0
    return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class PhiFrame:
    """Weyl solutions Phi = C * M along a mesh, in mantissa/log-scale form."""

    lam: complex
    mesh: tuple
    mantissa: np.ndarray     # (len(mesh), 4, 4)
    log_scale: np.ndarray

    def values(self, x):
        i = self.mesh.index(float(x))
        return self.mantissa[i] * np.exp(self.log_scale[i])


def weyl_solutions(problem: Problem, lam, xs=(0.0, 1.0), guard=POLE_GUARD) -> PhiFrame:
    """Phi(x, lambda) = C(x, lambda) M(lambda) at the requested nodes."""
    sample = weyl_matrix(problem, lam, guard)
    mesh = tuple(sorted(set([0.0, 1.0] + [float(x) for x in xs])))
    fb = propagate_blocks(problem, [lam], blocks=("Y",), xs=mesh)
    cols = np.stack([fb.block("Y", x)[0][0] for x in mesh]) @ sample.m
    scl = np.array([fb.block("Y", x)[1][0] for x in mesh])
    return PhiFrame(complex(lam), mesh, cols, scl)


@dataclass(frozen=True)
class LaurentExpansion:
    """Laurent data of M at a simple pole and the weight matrix there."""

    lambda0: complex
    m_minus1: np.ndarray
    m_0: np.ndarray
    weight: np.ndarray       # N(lambda0) = (M<0>)^-1 M<-1>
    nodes: int
    rel_change: float        # coefficient change under node-count doubling
    converged: bool


def laurent_at(problem: Problem, lambda0, radius, *, other_poles=(), nodes=64,
               doubling_tol=1e-8, guard=POLE_GUARD) -> LaurentExpansion:
    """Contour quadrature of M around one pole.

    The circle must separate lambda0 from every other pole: callers pass
    the zero lists they know (``other_poles``).  Convergence is checked by
    doubling the node count.
    """
    lambda0 = complex(lambda0)
    radius = float(radius)
    for p in other_poles:
        d = abs(complex(p) - lambda0)
        if d > 1e-9 * (1.0 + abs(lambda0)) and d <= radius:
            raise ContourError(
                f"pole {p:.8g} lies inside the contour of radius {radius:.3g} "
                f"around {lambda0:.8g}")

    def coeffs(n):
        theta = 2 * np.pi * np.arange(n) / n
        ring = lambda0 + radius * np.exp(1j * theta)
        M = weyl_matrices(problem, ring, guard)
        phase = np.exp(1j * theta)[:, None, None]
        m_minus1 = radius * np.mean(M * phase, axis=0)
        m_0 = np.mean(M - m_minus1[None] / (radius * phase), axis=0)
        return m_minus1, m_0

    m1a, m0a = coeffs(nodes)
    m1b, m0b = coeffs(2 * nodes)
    scale = max(float(np.max(np.abs(m1b))), float(np.max(np.abs(m0b))), 1e-300)
    rel = max(float(np.max(np.abs(m1b - m1a))), float(np.max(np.abs(m0b - m0a)))) / scale
    converged = rel <= doubling_tol
    weight = np.linalg.solve(m0b, m1b)
    return LaurentExpansion(lambda0, m1b, m0b, weight, 2 * nodes, rel, converged)


def weight_pattern(lambda0, pole_sets, match_tol=1e-5):
    """Strict-lower positions where N(lambda0) may be nonzero.

    ``pole_sets`` maps k in {1,2,3} to the zero list of Delta_kk.  An entry
    (s, j) is allowed unless some k with lambda0 not in Lambda_k has
    s >= k+1 and j <= k.
    """
    member = {}
    for k in (1, 2, 3):
        zs = pole_sets.get(k, ())
        member[k] = any(abs(lambda0 - z) <= match_tol * (1.0 + abs(z)) for z in zs)
    allowed = set()
    for s in range(2, 5):
        for j in range(1, s):
            killed = any(not member[k] and s >= k + 1 and j <= k for k in (1, 2, 3))
            if not killed:
                allowed.add((s, j))
    return allowed, member


@dataclass(frozen=True)
class MappingSample:
    """P(x, lambda) for a problem pair at one mesh position."""

    x: float
    lam: complex
    p_matrix: np.ndarray


def spectral_mapping(problem_a: Problem, problem_b: Problem, lam, xs=(0.0,),
                     guard=POLE_GUARD):
    """Matrix of spectral mappings P = Phi_a J0^-1 Phi_b^T J along a mesh.

    Uses the constant-matrix form instead of inverting Phi_b; at x=0 the
    result is cross-checked against M_a J0^-1 M_b^T J, and both are
    returned.  Lambdas near poles of either problem are rejected.
    """
    mesh = tuple(sorted(set([0.0] + [float(x) for x in xs])))
    phi_a = weyl_solutions(problem_a, lam, mesh, guard)
    phi_b = weyl_solutions(problem_b, lam, mesh, guard)
    j0inv = np.linalg.inv(forms.J0)
    samples = []
    for x in mesh:
        pa = phi_a.values(x)
        pb = phi_b.values(x)
        P = pa @ j0inv @ pb.T @ forms.J
        samples.append(MappingSample(float(x), complex(lam), P))
    ma = weyl_matrix(problem_a, lam, guard).m
    mb = weyl_matrix(problem_b, lam, guard).m
    p0_weyl = ma @ j0inv @ mb.T @ forms.J
    return samples, p0_weyl
