"""Coefficient pairs and their regularization matrices.

A coefficient model stores the antiderivative data for a fourth-order
differential expression y'''' - (p y')' + q y on [0,1].  Depending on the
singularity regime, the second channel holds the second antiderivative of
q, its first antiderivative, or q itself.  Regularization matrices are
4x4 function-valued matrices built from these channels; three kinds are
supported (the Vladimirov form and the two lower-singularity alternates).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CoefficientError, IncompatibleKindError
from .expressions import compile_expression

DEFAULT_MESH_SIZE = 2001

# 5-point Gauss-Legendre nodes/weights on [0,1]; exact through degree 9,
# so antiderivative lifts of piecewise-linear data are exact.
_GL_NODES = (np.array([-0.906179845938664, -0.538469310105683, 0.0,
                       0.538469310105683, 0.906179845938664]) + 1.0) / 2.0
_GL_WEIGHTS = np.array([0.236926885056189, 0.478628670499366, 0.568888888888889,
                        0.478628670499366, 0.236926885056189]) / 2.0


class Regime(enum.Enum):
    """Singularity class of (p, q); names match the admissible pairs."""

    W2M1_W2M2 = "W2m1_W2m2"
    W2M1_W2M1 = "W2m1_W2m1"
    L1_L1 = "L1_L1"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value == value or member.name == value:
                return member
        raise CoefficientError(f"unknown regime {value!r}")


class MatrixKind(enum.Enum):
    VLADIMIROV = "vladimirov"
    SIGMA_FORM = "sigma_form"
    COMPANION_L1 = "companion_L1"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value == value or member.name == value:
                return member
        raise CoefficientError(f"unknown matrix kind {value!r}")


@dataclass(frozen=True)
class Piece:
    """One smooth piece of a coefficient channel on [lo, hi]."""

    lo: float
    hi: float
    fn: Callable
    constant: bool = False

    def __call__(self, x):
        return self.fn(x)


class PiecewiseFunction:
    """Complex-valued function on [0,1], smooth between breakpoints.

    Pieces are closed on the left and open on the right except the last;
    a duplicate breakpoint node therefore carries distinct one-sided
    values through the two adjacent pieces.
    """

    def __init__(self, pieces: Sequence[Piece]):
        if not pieces:
            raise CoefficientError("piecewise function needs at least one piece")
        self.pieces = tuple(pieces)
        self.edges = np.array([p.lo for p in self.pieces] + [self.pieces[-1].hi])

    @property
    def breakpoints(self):
        return tuple(float(p.hi) for p in self.pieces[:-1])

    def piece_index(self, x):
        idx = int(np.searchsorted(self.edges, x, side="right") - 1)
        return min(max(idx, 0), len(self.pieces) - 1)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return complex(self.pieces[self.piece_index(float(np.real(x)))](x))
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        for i, p in enumerate(self.pieces):
            lo = -np.inf if i == 0 else p.lo
            hi = np.inf if i == len(self.pieces) - 1 else p.hi
            mask = (x >= lo) & (x < hi)
            if mask.any():
                out[mask] = p.fn(x[mask])
        return out

    def eval_in_piece(self, i, x):
        """Evaluate piece ``i`` regardless of interval membership."""
        return self.pieces[i].fn(x)

    @property
    def is_constant(self):
        return all(p.constant for p in self.pieces)


def _probe_constant(fn, lo, hi):
    xs = np.linspace(lo, hi, 9)
    vals = np.asarray(fn(xs), dtype=complex)
    scale = max(1.0, float(np.max(np.abs(vals))))
    return bool(np.max(np.abs(vals - vals[0])) <= 1e-14 * scale), vals


def _linear_interp_fn(xs, vals):
    def fn(x):
        return np.interp(x, xs, vals.real) + 1j * np.interp(x, xs, vals.imag)
    return fn


def _split_samples(xs, vals):
    """Break sampled data at duplicated nodes into per-piece interpolants."""
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(vals, dtype=complex)
    if xs.shape != vals.shape:
        raise CoefficientError("sample abscissae and values differ in length")
    if xs.size < 2 or np.any(np.diff(xs) < 0):
        raise CoefficientError("sample abscissae must be sorted, length >= 2")
    cuts = [0]
    for i in range(1, xs.size):
        if xs[i] == xs[i - 1]:
            cuts.append(i)
    cuts.append(xs.size)
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg_x, seg_v = xs[a:b], vals[a:b]
        if seg_x.size == 1:
            continue
        fn = _linear_interp_fn(seg_x, seg_v)
        const = bool(np.max(np.abs(seg_v - seg_v[0])) <= 1e-14 * max(1.0, np.max(np.abs(seg_v))))
        pieces.append(Piece(float(seg_x[0]), float(seg_x[-1]), fn, const))
    return pieces


def as_piecewise(spec, breakpoints=(), name="coefficient"):
    """Coerce an input spec into a PiecewiseFunction on [0,1].

    Accepts a PiecewiseFunction, an expression string, a number, a
    callable, or a (xs, values) sample pair.  ``breakpoints`` split
    expression/callable inputs into separate smooth pieces.
    """
    if spec is None:
        raise CoefficientError(f"{name}: no data supplied")
    if isinstance(spec, PiecewiseFunction):
        return spec
    bps = _check_breakpoints(breakpoints)
    if isinstance(spec, str):
        fn = compile_expression(spec)
        edges = [0.0, *bps, 1.0]
        pieces = [Piece(a, b, fn, fn.constant) for a, b in zip(edges[:-1], edges[1:])]
        return PiecewiseFunction(pieces)
    if isinstance(spec, (int, float, complex)):
        value = complex(spec)
        return PiecewiseFunction([Piece(0.0, 1.0, lambda x, v=value: np.full(np.shape(x), v, dtype=complex) if np.ndim(x) else v, True)])
    if callable(spec):
        edges = [0.0, *bps, 1.0]
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            const, _ = _probe_constant(spec, a, min(b, 1.0 - 1e-12) if b == 1.0 else b)
            pieces.append(Piece(a, b, spec, const))
        return PiecewiseFunction(pieces)
    if isinstance(spec, (tuple, list)) and len(spec) == 2:
        return PiecewiseFunction(_split_samples(spec[0], spec[1]))
    raise CoefficientError(f"{name}: unsupported spec of type {type(spec).__name__}")


def _check_breakpoints(breakpoints):
    bps = sorted(float(b) for b in breakpoints)
    for b in bps:
        if not (0.0 < b < 1.0):
            raise CoefficientError(f"breakpoint {b} lies outside (0, 1)")
    return bps


def _check_finite(pw: PiecewiseFunction, name, mesh_size):
    for p in pw.pieces:
        xs = np.linspace(p.lo, p.hi, max(17, int(mesh_size * (p.hi - p.lo)) + 2))
        vals = np.asarray(p.fn(xs), dtype=complex)
        bad = ~np.isfinite(vals)
        if bad.any():
            j = int(np.argmax(bad))
            raise CoefficientError(
                f"{name}: non-finite sample at mesh node x={xs[j]:.6g}")


def antiderivative(pw: PiecewiseFunction, c0=0.0, nodes_per_unit=DEFAULT_MESH_SIZE):
    """Cumulative quadrature lift of a piecewise channel.

    Node values come from per-interval 5-point Gauss-Legendre sums, which
    are exact for piecewise-linear data; between nodes the same rule
    integrates from the nearest node, so the lift is continuous.
    """
    new_pieces = []
    acc = complex(c0)
    for p in pw.pieces:
        n = max(8, int(np.ceil(nodes_per_unit * (p.hi - p.lo))))
        grid = np.linspace(p.lo, p.hi, n + 1)
        h = np.diff(grid)
        stage = grid[:-1, None] + h[:, None] * _GL_NODES[None, :]
        fvals = np.asarray(p.fn(stage.ravel()), dtype=complex).reshape(stage.shape)
        incr = h * (fvals @ _GL_WEIGHTS)
        cumvals = acc + np.concatenate([[0.0], np.cumsum(incr)])

        def fn(x, grid=grid, cumvals=cumvals, f=p.fn):
            scalar = np.ndim(x) == 0
            xa = np.atleast_1d(np.asarray(x, dtype=float))
            idx = np.clip(np.searchsorted(grid, xa, side="right") - 1, 0, grid.size - 2)
            x0 = grid[idx]
            dx = xa - x0
            stage = x0[:, None] + dx[:, None] * _GL_NODES[None, :]
            fv = np.asarray(f(stage.ravel()), dtype=complex).reshape(stage.shape)
            out = cumvals[idx] + dx * (fv @ _GL_WEIGHTS)
            return complex(out[0]) if scalar else out

        spread = float(np.max(np.abs(cumvals - cumvals[0])))
        const = p.constant and spread <= 1e-14 * max(1.0, float(np.max(np.abs(cumvals))))
        new_pieces.append(Piece(p.lo, p.hi, fn, const))
        acc = cumvals[-1]
    lifted = PiecewiseFunction(new_pieces)
    return lifted


@dataclass(frozen=True)
class CoefficientModel:
    """Antiderivative pair for one problem.

    ``tau2`` holds the channel the regime's matrix consumes: the second
    antiderivative of q (W2m1_W2m2), sigma2 = first antiderivative of q
    (W2m1_W2m1), or q itself (L1_L1).  ``p``/``q`` keep the raw
    integrands when they were supplied, for the companion matrix.
    """

    regime: Regime
    tau1: PiecewiseFunction
    tau2: PiecewiseFunction
    breakpoints: tuple = ()
    tau1_0: complex = 0.0
    tau2_0: complex = 0.0
    tau2_prime_0: complex = 0.0
    p: PiecewiseFunction | None = None
    q: PiecewiseFunction | None = None
    mesh_size: int = DEFAULT_MESH_SIZE

    def shifted_tau2(self, c):
        """Model with the second channel shifted by the regime's analogue of c*x.

        For the Vladimirov channel this adds c*x to tau2; for sigma2 it adds
        the constant c (= derivative of c*x); the L1 channel is unchanged.
        """
        if self.regime is Regime.W2M1_W2M2:
            base = self.tau2
            pieces = [Piece(p.lo, p.hi,
                            (lambda x, f=p.fn, cc=c: f(x) + cc * np.asarray(x, dtype=complex)
                             if np.ndim(x) else f(x) + cc * x),
                            False)
                      for p in base.pieces]
            tau2 = PiecewiseFunction(pieces)
        elif self.regime is Regime.W2M1_W2M1:
            base = self.tau2
            pieces = [Piece(p.lo, p.hi,
                            (lambda x, f=p.fn, cc=c: f(x) + cc), p.constant)
                      for p in base.pieces]
            tau2 = PiecewiseFunction(pieces)
        else:
            tau2 = self.tau2
        return CoefficientModel(self.regime, self.tau1, tau2, self.breakpoints,
                                self.tau1_0, self.tau2_0, self.tau2_prime_0,
                                self.p, self.q, self.mesh_size)


def build_coefficients(p_spec=None, q_spec=None, regime=Regime.W2M1_W2M2, *,
                       tau1=None, tau2=None, sigma2=None,
                       tau1_0=0.0, tau2_0=0.0, tau2_prime_0=0.0,
                       breakpoints=(), mesh_size=DEFAULT_MESH_SIZE):
    """Build a CoefficientModel from integrand or antiderivative specs.

    Antiderivatives are computed by cumulative quadrature with the stated
    constants; distributional inputs must supply the antiderivative
    channel (tau1, and tau2 or sigma2) directly, in which case it is
    stored verbatim.
    """
    regime = Regime.coerce(regime)
    bps = tuple(_check_breakpoints(breakpoints))

    p_pw = as_piecewise(p_spec, bps, "p") if p_spec is not None else None
    q_pw = as_piecewise(q_spec, bps, "q") if q_spec is not None else None

    if tau1 is not None:
        tau1_pw = as_piecewise(tau1, bps, "tau1")
    elif p_pw is not None:
        tau1_pw = antiderivative(p_pw, tau1_0, mesh_size)
    else:
        raise CoefficientError("supply either p or tau1")

    if regime is Regime.W2M1_W2M2:
        if tau2 is not None:
            tau2_pw = as_piecewise(tau2, bps, "tau2")
        elif q_pw is not None:
            tau2_pw = antiderivative(antiderivative(q_pw, tau2_prime_0, mesh_size),
                                     tau2_0, mesh_size)
        else:
            raise CoefficientError("regime W2m1_W2m2 needs q or tau2")
    elif regime is Regime.W2M1_W2M1:
        if sigma2 is not None:
            tau2_pw = as_piecewise(sigma2, bps, "sigma2")
        elif tau2 is not None:
            tau2_pw = as_piecewise(tau2, bps, "sigma2")
        elif q_pw is not None:
            tau2_pw = antiderivative(q_pw, tau2_prime_0, mesh_size)
        else:
            raise CoefficientError("regime W2m1_W2m1 needs q or sigma2")
    else:
        if q_pw is None:
            if tau2 is not None:
                tau2_pw = as_piecewise(tau2, bps, "q")
                q_pw = tau2_pw
            else:
                raise CoefficientError("regime L1_L1 needs q")
        else:
            tau2_pw = q_pw
        if p_pw is None:
            raise CoefficientError("regime L1_L1 needs p itself")

    all_bps = sorted(set(bps) | set(tau1_pw.breakpoints) | set(tau2_pw.breakpoints))
    _check_finite(tau1_pw, "tau1", mesh_size)
    _check_finite(tau2_pw, "tau2", mesh_size)

    return CoefficientModel(regime, tau1_pw, tau2_pw, tuple(all_bps),
                            complex(tau1_0), complex(tau2_0), complex(tau2_prime_0),
                            p_pw, q_pw, mesh_size)


_ZERO = lambda t1, t2: np.zeros_like(t1)
_ONE = lambda t1, t2: np.ones_like(t1)

# Entry tables: each entry maps the two channel values to the matrix entry.
_VLADIMIROV_ENTRIES = [
    [_ZERO, _ONE, _ZERO, _ZERO],
    [lambda t1, t2: -t2, lambda t1, t2: t1, _ONE, _ZERO],
    [lambda t1, t2: t1 * t2, lambda t1, t2: -t1 ** 2 + 2 * t2, lambda t1, t2: -t1, _ONE],
    [lambda t1, t2: t2 ** 2, lambda t1, t2: -t1 * t2, lambda t1, t2: -t2, _ZERO],
]

_SIGMA_ENTRIES = [
    [_ZERO, _ONE, _ZERO, _ZERO],
    [_ZERO, lambda t1, s2: t1, _ONE, _ZERO],
    [lambda t1, s2: -s2, lambda t1, s2: -t1 ** 2, lambda t1, s2: -t1, _ONE],
    [_ZERO, lambda t1, s2: s2, _ZERO, _ZERO],
]

_COMPANION_ENTRIES = [
    [_ZERO, _ONE, _ZERO, _ZERO],
    [_ZERO, _ZERO, _ONE, _ZERO],
    [_ZERO, lambda p, q: p, _ZERO, _ONE],
    [lambda p, q: -q, _ZERO, _ZERO, _ZERO],
]

_ENTRY_TABLES = {
    MatrixKind.VLADIMIROV: _VLADIMIROV_ENTRIES,
    MatrixKind.SIGMA_FORM: _SIGMA_ENTRIES,
    MatrixKind.COMPANION_L1: _COMPANION_ENTRIES,
}


class RegularizationMatrix:
    """4x4 function-valued matrix F(x) encoding the coefficients.

    ``channels = (c1, c2)`` are the two PiecewiseFunctions consumed by the
    entry table of ``kind``.  Entries are exposed both as callables
    (``entries[k][j]``) and through the vectorized ``evaluate``.
    """

    def __init__(self, kind, channels, breakpoints=(), starred=False, model=None):
        self.kind = MatrixKind.coerce(kind)
        self.channels = tuple(channels)
        self.breakpoints = tuple(sorted(set(breakpoints)
                                        | set(channels[0].breakpoints)
                                        | set(channels[1].breakpoints)))
        self.starred = starred
        self.model = model
        self._table = _ENTRY_TABLES[self.kind]

    @property
    def entries(self):
        def make(k, j):
            if not self.starred:
                return lambda x: self._table[k][j](self.channels[0](x), self.channels[1](x))
            # f*_{k,j} = (-1)^{k+j+1} f_{5-j,5-k} with 1-based indices
            sgn = (-1) ** (k + j + 3)  # (k+1)+(j+1)+1
            return lambda x: sgn * self._table[3 - j][3 - k](self.channels[0](x), self.channels[1](x))
        return [[make(k, j) for j in range(4)] for k in range(4)]

    def evaluate(self, x):
        """F(x) as a (4,4) complex array (or (n,4,4) for array x)."""
        t1 = self.channels[0](x)
        t2 = self.channels[1](x)
        scalar = np.ndim(x) == 0
        t1 = np.atleast_1d(np.asarray(t1, dtype=complex))
        t2 = np.atleast_1d(np.asarray(t2, dtype=complex))
        F = np.zeros(t1.shape + (4, 4), dtype=complex)
        for k in range(4):
            for j in range(4):
                F[..., k, j] = self._table[k][j](t1, t2)
        if self.starred:
            G = np.zeros_like(F)
            for k in range(4):
                for j in range(4):
                    G[..., k, j] = (-1) ** (k + j + 3) * F[..., 3 - j, 3 - k]
            F = G
        return F[0] if scalar else F

    def evaluate_in_piece(self, piece_bounds, x):
        """Evaluate inside a given smooth piece, honoring one-sided limits."""
        lo, hi = piece_bounds
        i1 = self.channels[0].piece_index(0.5 * (lo + hi))
        i2 = self.channels[1].piece_index(0.5 * (lo + hi))
        t1 = np.atleast_1d(np.asarray(self.channels[0].eval_in_piece(i1, x), dtype=complex))
        t2 = np.atleast_1d(np.asarray(self.channels[1].eval_in_piece(i2, x), dtype=complex))
        F = np.zeros(t1.shape + (4, 4), dtype=complex)
        for k in range(4):
            for j in range(4):
                F[..., k, j] = self._table[k][j](t1, t2)
        if self.starred:
            G = np.zeros_like(F)
            for k in range(4):
                for j in range(4):
                    G[..., k, j] = (-1) ** (k + j + 3) * F[..., 3 - j, 3 - k]
            F = G
        return F[0] if np.ndim(x) == 0 else F

    def piece_edges(self):
        return [0.0, *self.breakpoints, 1.0]

    def piece_is_constant(self, piece_bounds):
        lo, hi = piece_bounds
        mid = 0.5 * (lo + hi)
        i1 = self.channels[0].piece_index(mid)
        i2 = self.channels[1].piece_index(mid)
        return self.channels[0].pieces[i1].constant and self.channels[1].pieces[i2].constant


def build_matrix(model: CoefficientModel, kind=MatrixKind.VLADIMIROV):
    """Regularization matrix of the requested kind for a coefficient model.

    The Vladimirov kind accepts every regime, lifting the stored channel
    by cumulative quadrature where a higher antiderivative is needed.
    The alternates require the channel they consume to be stored directly.
    """
    kind = MatrixKind.coerce(kind)
    if kind is MatrixKind.VLADIMIROV:
        if model.regime is Regime.W2M1_W2M2:
            tau2 = model.tau2
        elif model.regime is Regime.W2M1_W2M1:
            tau2 = antiderivative(model.tau2, model.tau2_0, model.mesh_size)
        else:
            tau2 = antiderivative(antiderivative(model.tau2, model.tau2_prime_0, model.mesh_size),
                                  model.tau2_0, model.mesh_size)
        return RegularizationMatrix(kind, (model.tau1, tau2), model.breakpoints, model=model)
    if kind is MatrixKind.SIGMA_FORM:
        if model.regime is not Regime.W2M1_W2M1:
            raise IncompatibleKindError(
                f"sigma_form requires regime W2m1_W2m1 with sigma2 stored, got {model.regime.value}")
        return RegularizationMatrix(kind, (model.tau1, model.tau2), model.breakpoints, model=model)
    if kind is MatrixKind.COMPANION_L1:
        if model.regime is not Regime.L1_L1 or model.p is None or model.q is None:
            raise IncompatibleKindError(
                f"companion_L1 requires regime L1_L1 with p, q stored, got {model.regime.value}")
        return RegularizationMatrix(kind, (model.p, model.q), model.breakpoints, model=model)
    raise IncompatibleKindError(f"unsupported kind {kind}")


def star_matrix(F: RegularizationMatrix):
    """Star transform f*_{k,j} = (-1)^{k+j+1} f_{5-j,5-k}; an involution."""
    return RegularizationMatrix(F.kind, F.channels, F.breakpoints,
                                starred=not F.starred, model=F.model)
