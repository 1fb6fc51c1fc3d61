"""Boundary linear forms, characteristic determinants, and their asymptotics.

All ten determinants Delta_jk (1 <= k <= j <= 4) are read off the
propagated frame data at x = 1:

* k = 3 family: single entries of the fundamental frame Y(1);
* k = 2 family: entries of the second exterior power of Y(1) over the
  quasi-rows (y[0], y[2]), propagated directly as a compound system;
* k = 1 family: by the complementary-minor identity the 3x3 minors equal
  entries of the fourth column of Z(1) = Y(1)^-1 (det Y = 1), propagated
  as the inverse frame.

Evaluating minors through compound/inverse blocks instead of products of
frame entries avoids the exponential cancellation that makes the naive
determinants useless beyond |lambda|^(1/4) of roughly 15.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms
from .errors import FourspecError, SectorBoundaryError
from .propagator import PAIR_INDEX, Problem, QuasiFrame, propagate_blocks

DELTA_KEYS = ((1, 1), (2, 1), (3, 1), (4, 1),
              (2, 2), (3, 2), (4, 2),
              (3, 3), (4, 3), (4, 4))

#: spectra names mapped to their characteristic determinant index
SPECTRUM_DELTA = {"S12": (2, 2), "S13": (3, 2), "S23": (4, 2)}

_BLOCKS_FOR_K = {1: "Z", 2: "W", 3: "Y", 4: None}


@dataclass(frozen=True)
class FormMatrices:
    """Coefficient matrices of the linear forms and their orders."""

    U: np.ndarray = forms.U
    V: np.ndarray = forms.V
    orders_0: tuple = forms.P_ORDERS_0
    orders_1: tuple = forms.P_ORDERS_1


def apply_forms(frame: QuasiFrame):
    """Matrix [V_s(C_r)] from a C-anchored frame evaluated at x=1."""
    return forms.V @ frame.values(1.0)


class CharValues:
    """Batched characteristic determinants in mantissa/log-scale form."""

    def __init__(self, lams, mant, logscale):
        self.lams = np.asarray(lams)
        self._mant = mant          # dict key -> (B,) complex
        self._log = logscale       # dict k -> (B,) float

    def mantissa(self, j, k):
        return self._mant[(j, k)]

    def log_scale(self, j, k):
        return self._log[k]

    def value(self, j, k):
        """Descaled Delta_jk; may overflow for very large |lambda|."""
        return self._mant[(j, k)] * np.exp(self._log[k])

    def log_abs(self, j, k):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._mant[(j, k)])) + self._log[k]

    def weyl_entry(self, j, k):
        """m_jk = -Delta_jk / Delta_kk; the family scale cancels."""
        return -self._mant[(j, k)] / self._mant[(k, k)]

    def sample(self, i):
        values = {key: complex(self._mant[key][i]) for key in DELTA_KEYS}
        scales = {k: float(self._log[k][i]) for k in (1, 2, 3, 4)}
        return CharSample(complex(self.lams[i]), values, scales)


@dataclass(frozen=True)
class CharSample:
    """All Delta_jk at one lambda, with per-family log scales."""

    lam: complex
    values: dict
    scale: dict

    def delta(self, j, k):
        return self.values[(j, k)] * np.exp(self.scale[k])


def char_values(problem: Problem, lams, *, families=(1, 2, 3)) -> CharValues:
    """Evaluate the determinant families at a batch of lambdas."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    blocks = tuple(sorted({_BLOCKS_FOR_K[k] for k in families if _BLOCKS_FOR_K[k]}))
    fb = propagate_blocks(problem, lams, blocks=blocks, xs=(1.0,))
    B = lams.size
    mant = {}
    log = {4: np.zeros(B)}
    mant[(4, 4)] = np.ones(B, dtype=complex)
    if 1 in families:
        Z, sZ = fb.block("Z", 1.0)
        mant[(1, 1)] = -Z[:, 0, 3]
        mant[(2, 1)] = Z[:, 1, 3]
        mant[(3, 1)] = Z[:, 2, 3]
        mant[(4, 1)] = Z[:, 3, 3]
        log[1] = sZ
    if 2 in families:
        W, sW = fb.block("W", 1.0)
        r = PAIR_INDEX[(0, 2)]
        # column layout follows W_COLUMN_PAIRS = ((1,2), (1,3), (2,3))
        mant[(2, 2)] = -W[:, r, 2]
        mant[(3, 2)] = -W[:, r, 1]
        mant[(4, 2)] = W[:, r, 0]
        log[2] = sW
    if 3 in families:
        Y, sY = fb.block("Y", 1.0)
        mant[(3, 3)] = Y[:, 0, 3]
        mant[(4, 3)] = Y[:, 0, 2]
        log[3] = sY
    return CharValues(lams, mant, log)


def char_samples(problem: Problem, lams):
    cv = char_values(problem, lams)
    return [cv.sample(i) for i in range(np.atleast_1d(lams).size)]


def delta(problem: Problem, j, k, lam):
    """Single characteristic determinant Delta_jk(lambda), descaled."""
    if not (1 <= k <= j <= 4):
        raise FourspecError(f"delta indices need 1 <= k <= j <= 4, got ({j}, {k})")
    if (j, k) == (4, 4):
        return 1.0 + 0.0j
    cv = char_values(problem, [lam], families=(k,))
    return complex(cv.value(j, k)[0])


def delta_fn(problem: Problem, j, k):
    """Batched callable lam -> (mantissa, log_scale) for one determinant."""
    if not (1 <= k <= j <= 4):
        raise FourspecError(f"delta indices need 1 <= k <= j <= 4, got ({j}, {k})")
    if (j, k) == (4, 4):
        def fn(lams):
            n = np.atleast_1d(np.asarray(lams)).size
            return np.ones(n, dtype=complex), np.zeros(n)
        fn.key = (4, 4)
        fn.problem = problem
        return fn

    def fn(lams):
        cv = char_values(problem, lams, families=(k,))
        return cv.mantissa(j, k), cv.log_scale(j, k)

    fn.key = (j, k)
    fn.problem = problem
    return fn


# ---------------------------------------------------------------------------
# asymptotic models


_ROOTS4 = np.array([1.0, 1j, -1.0, -1j])


@dataclass(frozen=True)
class AsymptoticModel:
    """Leading-order model c_ij * rho^a_ij * exp(rho s_j) on one ray.

    The fourth roots of unity are ordered so Re(rho w_1) < ... < Re(rho w_4)
    for rho on the ray; the exponents and constants follow from the general
    determinant formulas in terms of the boundary-form orders.
    """

    ray_angle: float
    sector: int
    omegas: tuple

    @classmethod
    def for_ray(cls, ray_angle):
        frac = (ray_angle / (np.pi / 4)) % 1.0
        if min(frac, 1.0 - frac) < 1e-9:
            raise SectorBoundaryError(
                f"ray angle {ray_angle} lies on a sector boundary arg rho = k*pi/4")
        rho = np.exp(1j * ray_angle)
        order = np.argsort(np.real(rho * _ROOTS4))
        omegas = tuple(_ROOTS4[order])
        sector = int(np.floor((ray_angle % (2 * np.pi)) / (np.pi / 4))) + 1
        return cls(float(ray_angle), sector, omegas)

    def s(self, j):
        """Exponent direction s_j = sum of the j+1..4 ordered roots."""
        return complex(sum(self.omegas[j:]))  # omegas[j:] are the (j+1..4)th

    def a(self, i, j):
        p0, p1 = forms.P_ORDERS_0, forms.P_ORDERS_1
        return (sum(p0[k] for k in range(j - 1))
                + sum(p1[k] for k in range(j, 4))
                + p0[i - 1] - 6)

    def c(self, i, j):
        p0, p1 = forms.P_ORDERS_0, forms.P_ORDERS_1
        w = np.array(self.omegas)
        omega_vdm = np.array([[w[kk] ** jj for kk in range(4)] for jj in range(4)])
        rows = list(range(j - 1)) + [i - 1]
        m0 = np.array([[w[kk] ** p0[s] for kk in range(j)] for s in rows])
        m1 = np.array([[w[kk] ** p1[s] for kk in range(j, 4)] for s in range(j, 4)])
        det0 = np.linalg.det(m0) if m0.size else 1.0
        det1 = np.linalg.det(m1) if m1.size else 1.0
        return complex(det0 * det1 / np.linalg.det(omega_vdm))

    def check_indices(self, i, j):
        if not (1 <= j <= i <= 4) or (i, j) == (4, 4):
            raise FourspecError(
                f"asymptotic model supports 1 <= j <= i <= 4 except (4,4); got ({i}, {j})")

    def log_model(self, i, j, rho):
        """log of c_ij rho^a_ij e^{rho s_j} (complex log, principal branch)."""
        self.check_indices(i, j)
        rho = complex(rho)
        return np.log(self.c(i, j)) + self.a(i, j) * np.log(rho) + rho * self.s(j)

    def model(self, i, j, rho):
        return np.exp(self.log_model(i, j, rho))


def asymptotic_model(i, j, rho, model: AsymptoticModel):
    """Model value c_ij rho^a_ij e^{rho s_j} for rho inside the model's sector."""
    return model.model(i, j, rho)


@dataclass(frozen=True)
class AsymptoticTable:
    i: int
    j: int
    ray_angle: float
    radii: tuple
    ratios: tuple

    @property
    def deviations(self):
        return tuple(abs(r - 1.0) for r in self.ratios)


def verify_asymptotics(problem: Problem, i, j, ray_angle, radii) -> AsymptoticTable:
    """|Delta_ij(rho^4)| / |model| along a ray, at increasing radii.

    Works in log magnitudes throughout, so exponentially large determinants
    cannot overflow; a non-finite ratio reports the last valid radius.
    """
    model = AsymptoticModel.for_ray(ray_angle)
    model.check_indices(i, j)
    radii = tuple(sorted(float(r) for r in radii))
    rhos = np.array([r * np.exp(1j * ray_angle) for r in radii])
    lams = rhos ** 4
    cv = char_values(problem, lams, families=(j,))
    log_abs = cv.log_abs(i, j)
    ratios = []
    for idx, rho in enumerate(rhos):
        log_m = np.real(model.log_model(i, j, rho))
        ratio = float(np.exp(log_abs[idx] - log_m))
        if not np.isfinite(ratio):
            raise FourspecError(
                f"asymptotic ratio overflow at |rho|={abs(rho):.6g}; "
                f"last valid radius {radii[idx - 1] if idx else None}")
        ratios.append(ratio)
    return AsymptoticTable(i, j, float(ray_angle), radii, tuple(ratios))
