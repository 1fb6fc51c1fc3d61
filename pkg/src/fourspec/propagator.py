"""Quasi-derivative system integration.

The first-order form of the regularized equation is Y' = (F(x) + lam*E41) Y
acting on the quasi-derivative vector col(y[0], y[1], y[2], y[3]).  Besides
the fundamental frame Y this module can co-propagate the inverse frame
Z = Y^-1 and selected columns of the second exterior power of Y; both are
needed downstream to evaluate boundary-form minors without catastrophic
cancellation at large |lambda|.

Two backends are provided: a fixed-step fourth-order Magnus scheme with
exact handling of piecewise-constant coefficients (the default; step
counts adapt to |lambda|^(1/4) and are quantized so results do not depend
on batch composition), and an adaptive embedded Dormand-Prince 5(4) pair.
All propagated blocks carry per-batch log scales so that exponentially
growing frames never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import forms
from .coeffs import CoefficientModel, MatrixKind, RegularizationMatrix, build_matrix
from .errors import PropagationError

# Lexicographic index pairs for the second exterior power of C^4.
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PAIR_INDEX = {p: i for i, p in enumerate(PAIRS)}

# Column pairs of the compound frame needed for the k=2 minors, and the
# compound row corresponding to quasi-rows (y[0], y[2]) at x=1.
W_COLUMN_PAIRS = ((1, 2), (1, 3), (2, 3))
W_ROW = PAIR_INDEX[(0, 2)]

_RENORM_LIMIT = 1e30

_E41 = np.zeros((4, 4))
_E41[3, 0] = 1.0


def _compound2_tensor():
    T = np.zeros((6, 6, 4, 4))
    for P, (i, j) in enumerate(PAIRS):
        for Q, (k, l) in enumerate(PAIRS):
            if i == k:
                T[P, Q, j, l] += 1.0
            if j == l:
                T[P, Q, i, k] += 1.0
            if i == l:
                T[P, Q, j, k] -= 1.0
            if j == k:
                T[P, Q, i, l] -= 1.0
    return T


_C2 = _compound2_tensor()


def compound2(A):
    """Second additive compound of (..., 4, 4) matrices -> (..., 6, 6)."""
    return np.einsum("pqab,...ab->...pq", _C2, np.asarray(A))


def system_matrix(F: RegularizationMatrix, lam, x):
    """First-order system matrix F(x) + lam * E41 at a point."""
    A = np.array(F.evaluate(x), dtype=complex)
    A[3, 0] += lam
    return A


@dataclass(frozen=True)
class SolverOptions:
    """Integration controls; defaults match the package-wide tolerances."""

    backend: str = "magnus"        # "magnus" or "rk45"
    tol: float = 1e-9              # target frame accuracy (magnus step heuristic)
    rtol: float = 1e-10            # rk45 per-step relative tolerance
    atol: float = 1e-12
    min_steps_per_unit: int = 24
    max_steps: int = 400_000
    phase_cap: float = 0.7         # bound on |rho| * h per magnus step
    renorm_threshold: float = 40.0  # |rho| above which every step renormalizes
    coeff_scale: float = 1.0       # coefficient variation scale in the step heuristic


@dataclass(frozen=True)
class Problem:
    """A regularized operator: matrix F plus the boundary-form constants."""

    matrix: RegularizationMatrix
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        forms.verify_form_constants()

    @property
    def coefficients(self) -> CoefficientModel:
        return self.matrix.model

    @property
    def kind(self) -> MatrixKind:
        return self.matrix.kind

    def starred(self):
        from .coeffs import star_matrix
        return Problem(star_matrix(self.matrix), self.options)

    def with_options(self, **kw):
        return Problem(self.matrix, replace(self.options, **kw))


def make_problem(model_or_matrix, kind=MatrixKind.VLADIMIROV, options=None):
    if isinstance(model_or_matrix, RegularizationMatrix):
        matrix = model_or_matrix
    else:
        matrix = build_matrix(model_or_matrix, kind)
    return Problem(matrix, options or SolverOptions())


# ---------------------------------------------------------------------------
# batched state


class _State:
    """Propagated blocks plus per-batch log scales."""

    __slots__ = ("blocks", "scales")

    def __init__(self, blocks, scales):
        self.blocks = blocks
        self.scales = scales

    @classmethod
    def initial(cls, batch, which, init_Y=None):
        blocks = {}
        if "Y" in which:
            Y = np.broadcast_to(np.eye(4, dtype=complex), (batch, 4, 4)).copy()
            if init_Y is not None:
                Y[:] = init_Y
            blocks["Y"] = Y
        if "Z" in which:
            blocks["Z"] = np.broadcast_to(np.eye(4, dtype=complex), (batch, 4, 4)).copy()
        if "W" in which:
            W = np.zeros((batch, 6, 3), dtype=complex)
            for a, pair in enumerate(W_COLUMN_PAIRS):
                W[:, PAIR_INDEX[pair], a] = 1.0
            blocks["W"] = W
        scales = {name: np.zeros(batch) for name in blocks}
        return cls(blocks, scales)

    def renormalize(self, force=False):
        for name, M in self.blocks.items():
            m = np.max(np.abs(M), axis=(-2, -1))
            mask = (m > _RENORM_LIMIT) if not force else (m > 0)
            if mask.any():
                M[mask] /= m[mask][:, None, None]
                self.scales[name][mask] += np.log(m[mask])

    def check_finite(self, x, lams):
        for M in self.blocks.values():
            bad = ~np.isfinite(M).all(axis=(-2, -1))
            if bad.any():
                i = int(np.argmax(bad))
                raise PropagationError(
                    f"non-finite state at x={x:.6g}, lambda={lams[i]:.6g}",
                    x=x, lam=lams[i])

    def snapshot(self):
        return ({k: v.copy() for k, v in self.blocks.items()},
                {k: v.copy() for k, v in self.scales.items()})


@dataclass
class FrameBlocks:
    """Saved propagation output at requested x nodes.

    ``data[x][name]`` is the (batch, n, m) mantissa array of block ``name``
    and ``scale[x][name]`` its log-scale, so actual = mantissa * exp(scale).
    """

    lams: np.ndarray
    xs: tuple
    data: dict
    scale: dict

    def block(self, name, x):
        return self.data[x][name], self.scale[x][name]


# ---------------------------------------------------------------------------
# Magnus backend

_GAUSS_OFFSETS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


def _expm_taylor(A, order=14):
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=complex), A.shape)
    R = eye + A / order
    for k in range(order - 1, 0, -1):
        R = eye + (A @ R) / k
    return R


def _expm_batched(A):
    """Scaling-and-squaring Taylor exponential for (..., n, n) complex arrays."""
    nrm = np.max(np.abs(A), axis=(-2, -1))
    s = np.zeros(nrm.shape, dtype=int)
    big = nrm > 0.5
    s[big] = np.ceil(np.log2(nrm[big] / 0.5)).astype(int)
    T = _expm_taylor(A / (2.0 ** s)[..., None, None])
    for k in range(int(s.max()) if s.size else 0):
        m = s > k
        T[m] = T[m] @ T[m]
    return T


def _renorm_pair(M, logs):
    m = np.max(np.abs(M), axis=(-2, -1))
    big = m > 1e0
    if big.any():
        M[big] /= m[big][:, None, None]
        logs[big] += np.log(m[big])
    return M, logs


def _matrix_power_scaled(T, n):
    """(P, logs) with P * exp(logs) = T^n, renormalized between squarings."""
    B = T.shape[0]
    result = np.broadcast_to(np.eye(T.shape[-1], dtype=complex), T.shape).copy()
    rlog = np.zeros(B)
    base = T.copy()
    blog = np.zeros(B)
    while n:
        if n & 1:
            result = base @ result
            rlog += blog
            _renorm_pair(result, rlog)
        n >>= 1
        if n:
            base = base @ base
            blog *= 2.0
            _renorm_pair(base, blog)
    return result, rlog


def _magnus_steps_for(rho_max, length, piece_constant, opts: SolverOptions):
    """Step count for one smooth piece at a given |rho| scale."""
    cap = max(1.0, rho_max) * length / opts.phase_cap
    if piece_constant:
        raw = max(1.0, cap)
    else:
        accuracy = length * (0.35 * (1.0 + rho_max ** 2) * opts.coeff_scale / opts.tol) ** 0.25
        raw = max(cap, accuracy, opts.min_steps_per_unit * length, 1.0)
    n = 1 << int(np.ceil(np.log2(max(raw, 1.0))))
    return min(n, opts.max_steps)


def _rho_bucket(lams):
    """Quantized |rho| so the step grid is independent of batch grouping."""
    rho = np.abs(np.asarray(lams)) ** 0.25
    rho = np.maximum(rho, 1.0)
    return 2.0 ** np.ceil(np.log2(rho))


def _apply_power(state, Om, n, which):
    """Advance the state by the n-th power of the one-step transfers."""
    if "Y" in state.blocks:
        P, plog = _matrix_power_scaled(_expm_batched(Om), n)
        state.blocks["Y"] = P @ state.blocks["Y"]
        state.scales["Y"] += plog
    if "Z" in state.blocks:
        P, plog = _matrix_power_scaled(_expm_batched(-Om), n)
        state.blocks["Z"] = state.blocks["Z"] @ P
        state.scales["Z"] += plog
    if "W" in state.blocks:
        P, plog = _matrix_power_scaled(_expm_batched(compound2(Om)), n)
        state.blocks["W"] = P @ state.blocks["W"]
        state.scales["W"] += plog


_CHUNK_TRANSFERS = 300_000  # cap on step*batch matrices materialized at once


def _apply_step_transfers(state, Om_all, which):
    """Exponentiate all step generators at once, then sweep sequentially."""
    n = Om_all.shape[0]
    T = {}
    if "Y" in which:
        T["Y"] = _expm_batched(Om_all)
    if "Z" in which:
        T["Z"] = _expm_batched(-Om_all)
    if "W" in which:
        T["W"] = _expm_batched(compound2(Om_all))
    for k in range(n):
        if "Y" in which:
            state.blocks["Y"] = T["Y"][k] @ state.blocks["Y"]
        if "Z" in which:
            state.blocks["Z"] = state.blocks["Z"] @ T["Z"][k]
        if "W" in which:
            state.blocks["W"] = T["W"][k] @ state.blocks["W"]
        state.renormalize()


def _propagate_magnus(matrix, lams, which, checkpoints, direction, init_Y, opts):
    lams = np.asarray(lams, dtype=complex)
    B = lams.size
    state = _State.initial(B, which, init_Y)
    rho_max = float(np.max(_rho_bucket(lams)))

    edges = sorted(set(matrix.piece_edges()) | set(checkpoints))
    if direction < 0:
        edges = edges[::-1]
    saved = {}
    if edges[0] in checkpoints:
        saved[edges[0]] = state.snapshot()
    piece_edges = matrix.piece_edges()

    for a, b in zip(edges[:-1], edges[1:]):
        lo, hi = (a, b) if direction > 0 else (b, a)
        mid = 0.5 * (lo + hi)
        pi = np.searchsorted(piece_edges, mid) - 1
        pi = min(max(pi, 0), len(piece_edges) - 2)
        bounds = (piece_edges[pi], piece_edges[pi + 1])
        constant = matrix.piece_is_constant(bounds)
        n = _magnus_steps_for(rho_max, abs(b - a), constant, opts)
        h = (b - a) / n
        if constant:
            Fc = matrix.evaluate_in_piece(bounds, mid)
            Om = np.broadcast_to(Fc, (B, 4, 4)).astype(complex).copy()
            Om *= h
            Om[:, 3, 0] += h * lams
            _apply_power(state, Om, n, which)
        else:
            chunk = max(1, _CHUNK_TRANSFERS // max(B, 1))
            grid = a + (b - a) * np.arange(n + 1) / n
            for start in range(0, n, chunk):
                stop = min(start + chunk, n)
                xa = grid[start:stop]
                hh = grid[start + 1:stop + 1] - xa
                x1 = xa + hh * _GAUSS_OFFSETS[0]
                x2 = xa + hh * _GAUSS_OFFSETS[1]
                F1 = matrix.evaluate_in_piece(bounds, x1)   # (m,4,4)
                F2 = matrix.evaluate_in_piece(bounds, x2)
                Fs = 0.5 * (F1 + F2)
                commFF = F1 @ F2 - F2 @ F1                   # [A1,A2] F-part
                dF = F1 - F2
                commFE = dF @ _E41 - _E41 @ dF
                hcol = hh[:, None, None, None]
                Om = np.empty((stop - start, B, 4, 4), dtype=complex)
                Om[:] = (hcol * Fs[:, None, :, :])
                Om[:, :, 3, 0] += hh[:, None] * lams[None, :]
                coeff = -(np.sqrt(3) / 12.0) * (hh ** 2)[:, None, None, None]
                Om += coeff * (commFF[:, None, :, :]
                               + lams[None, :, None, None] * commFE[:, None, :, :])
                _apply_step_transfers(state, Om, which)
        state.check_finite(b, lams)
        if b in checkpoints:
            saved[b] = state.snapshot()
    return saved


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) backend

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def _rhs(matrix, bounds, x, lams, state_blocks):
    F = matrix.evaluate_in_piece(bounds, x)
    out = {}
    if "Y" in state_blocks:
        Y = state_blocks["Y"]
        dY = F[None] @ Y
        dY[:, 3, :] += lams[:, None] * Y[:, 0, :]
        out["Y"] = dY
    if "Z" in state_blocks:
        Z = state_blocks["Z"]
        dZ = -(Z @ F[None])
        dZ[:, :, 0] -= lams[:, None] * Z[:, :, 3]
        out["Z"] = dZ
    if "W" in state_blocks:
        W = state_blocks["W"]
        F2 = compound2(F)
        dW = F2[None] @ W
        # E41 contribution: rows (2,4) and (3,4) couple to rows (1,2), (1,3)
        dW[:, PAIR_INDEX[(1, 3)], :] -= lams[:, None] * W[:, PAIR_INDEX[(0, 1)], :]
        dW[:, PAIR_INDEX[(2, 3)], :] -= lams[:, None] * W[:, PAIR_INDEX[(0, 2)], :]
        out["W"] = dW
    return out


def _propagate_rk45(matrix, lams, which, checkpoints, direction, init_Y, opts):
    lams = np.asarray(lams, dtype=complex)
    B = lams.size
    state = _State.initial(B, which, init_Y)
    force = float(np.max(np.abs(lams))) ** 0.25 > opts.renorm_threshold

    edges = sorted(set(matrix.piece_edges()) | set(checkpoints))
    if direction < 0:
        edges = edges[::-1]
    saved = {}
    if edges[0] in checkpoints:
        saved[edges[0]] = state.snapshot()
    piece_edges = matrix.piece_edges()
    rho_max = max(1.0, float(np.max(np.abs(lams))) ** 0.25)

    for a, b in zip(edges[:-1], edges[1:]):
        lo, hi = (a, b) if direction > 0 else (b, a)
        mid = 0.5 * (lo + hi)
        pi = min(max(np.searchsorted(piece_edges, mid) - 1, 0), len(piece_edges) - 2)
        bounds = (piece_edges[pi], piece_edges[pi + 1])
        span = b - a
        h = span / max(1.0, 4.0 * rho_max * abs(span))
        x = a
        hmin = abs(span) * 1e-13
        steps = 0
        while (x - b) * direction < 0:
            if abs(h) < hmin:
                raise PropagationError(
                    f"step size underflow near x={x:.6g}", x=x, lam=lams[0])
            if (x + h - b) * direction > 0:
                h = b - x
            ks = []
            for i in range(7):
                xi = x + _DP_C[i] * h
                blocks_i = {}
                for name, M in state.blocks.items():
                    acc = M.copy()
                    for j, aij in enumerate(_DP_A[i]):
                        if aij != 0.0:
                            acc += (h * aij) * ks[j][name]
                    blocks_i[name] = acc
                ks.append(_rhs(matrix, bounds, xi, lams, blocks_i))
            err = 0.0
            new_blocks = {}
            for name, M in state.blocks.items():
                inc5 = sum(_DP_B5[i] * ks[i][name] for i in range(7) if _DP_B5[i] != 0.0)
                inc4 = sum(_DP_B4[i] * ks[i][name] for i in range(7) if _DP_B4[i] != 0.0)
                newM = M + h * inc5
                scale = opts.atol + opts.rtol * np.maximum(np.abs(M), np.abs(newM))
                err = max(err, float(np.max(np.abs(h * (inc5 - inc4)) / scale)))
                new_blocks[name] = newM
            if err <= 1.0 or abs(h) <= hmin * 2:
                x = x + h
                state.blocks = new_blocks
                state.renormalize(force=force)
                state.check_finite(x, lams)
                steps += 1
                if steps > opts.max_steps:
                    raise PropagationError(f"step budget exhausted at x={x:.6g}",
                                           x=x, lam=lams[0])
            factor = 0.9 * (1.0 / max(err, 1e-10)) ** 0.2
            h = h * min(5.0, max(0.2, factor))
        if b in checkpoints:
            saved[b] = state.snapshot()
    return saved


# ---------------------------------------------------------------------------
# public propagation API


def propagate_blocks(problem: Problem, lams, *, blocks=("Y",), xs=(1.0,),
                     direction=1, init_Y=None) -> FrameBlocks:
    """Integrate the requested blocks over [0,1] saving at ``xs``.

    ``direction=1`` anchors at x=0 (C family), ``direction=-1`` at x=1.
    Lambdas with different step buckets are integrated separately so each
    lambda always sees the same deterministic step grid.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    xs = tuple(sorted(set(float(x) for x in xs)))
    for x in xs:
        if not (0.0 <= x <= 1.0):
            raise PropagationError(f"output node x={x} outside [0,1]", x=x)
    opts = problem.options
    runner = _propagate_magnus if opts.backend == "magnus" else _propagate_rk45

    buckets = _rho_bucket(lams)
    data = {x: {} for x in xs}
    scale = {x: {} for x in xs}
    order = np.arange(lams.size)
    for bval in np.unique(buckets):
        sel = order[buckets == bval]
        init_sel = init_Y[sel] if (init_Y is not None and np.ndim(init_Y) == 3) else init_Y
        saved = runner(problem.matrix, lams[sel], blocks, xs, direction, init_sel, opts)
        for x in xs:
            blocks_x, scales_x = saved[x]
            for name in blocks:
                if name not in data[x]:
                    shape = blocks_x[name].shape[1:]
                    data[x][name] = np.zeros((lams.size,) + shape, dtype=complex)
                    scale[x][name] = np.zeros(lams.size)
                data[x][name][sel] = blocks_x[name]
                scale[x][name][sel] = scales_x[name]
    return FrameBlocks(lams, xs, data, scale)


@dataclass
class QuasiFrame:
    """Fundamental 4x4 frame of quasi-derivative columns along a mesh."""

    lam: complex
    mesh: tuple
    columns: np.ndarray      # (len(mesh), 4, 4) mantissas
    log_scale: np.ndarray    # (len(mesh),)
    anchor: str
    anchor_x: float

    def index_of(self, x):
        for i, xi in enumerate(self.mesh):
            if abs(xi - x) <= 1e-12:
                return i
        raise KeyError(f"x={x} not among saved mesh nodes {self.mesh}")

    def values(self, x):
        """Frame matrix at x with the scale factored back in."""
        i = self.index_of(x)
        return self.columns[i] * np.exp(self.log_scale[i])

    def scaled(self, x):
        i = self.index_of(x)
        return self.columns[i], float(self.log_scale[i])

    def quasi_vector(self, k, x):
        """Quasi-derivative column of solution k (1-based) at x."""
        return self.values(x)[:, k - 1]


def propagate(problem_or_matrix, lam, x_from=0.0, x_to=1.0, init=None, *,
              xs=None, options=None) -> QuasiFrame:
    """Single-lambda frame propagation between two mesh positions.

    ``init`` is the 4x4 quasi-coordinate frame at ``x_from`` (identity by
    default).  Breakpoints of the coefficient model always become step
    boundaries.  Supports forward and backward runs.
    """
    if isinstance(problem_or_matrix, Problem):
        problem = problem_or_matrix
    else:
        problem = Problem(problem_or_matrix, options or SolverOptions())
    if init is None:
        init = np.eye(4, dtype=complex)
    init = np.asarray(init, dtype=complex)
    if abs(np.linalg.det(init)) < 1e-300:
        raise PropagationError("initial frame is singular", x=x_from, lam=lam)
    direction = 1 if x_to >= x_from else -1
    mesh = tuple(sorted(set([float(x_from), float(x_to)] + [float(x) for x in (xs or [])])))

    # Integrate the full sweep from the anchor end, then right-multiply so
    # that the frame equals ``init`` exactly at x_from (a linear system is
    # determined by its transfer matrices, so this re-anchoring is exact).
    frames = propagate_blocks(problem, [lam], blocks=("Y",), xs=mesh, direction=direction)
    cols = np.stack([frames.block("Y", x)[0][0] for x in mesh])
    scl = np.array([frames.block("Y", x)[1][0] for x in mesh])
    i_anchor = mesh.index(float(x_from))
    corr = np.linalg.solve(cols[i_anchor], init)
    cols = cols @ corr
    scl = scl - scl[i_anchor]
    return QuasiFrame(complex(lam), mesh, cols, scl, "custom", float(x_from))


def solutions_C(problem: Problem, lam, xs=(0.0, 1.0)) -> QuasiFrame:
    """C family: quasi-frame equal to the identity at x=0."""
    mesh = tuple(sorted(set([0.0, 1.0] + [float(x) for x in xs])))
    fb = propagate_blocks(problem, [lam], blocks=("Y",), xs=mesh, direction=1)
    cols = np.stack([fb.block("Y", x)[0][0] for x in mesh])
    scl = np.array([fb.block("Y", x)[1][0] for x in mesh])
    return QuasiFrame(complex(lam), mesh, cols, scl, "C", 0.0)


def solutions_S(problem: Problem, lam, xs=(0.0, 1.0)) -> QuasiFrame:
    """S family: V_s(S_k) = delta_{s,k}, i.e. frame(1) = V^-1 = V."""
    mesh = tuple(sorted(set([0.0, 1.0] + [float(x) for x in xs])))
    fb = propagate_blocks(problem, [lam], blocks=("Y",), xs=mesh, direction=-1)
    cols = np.stack([fb.block("Y", x)[0][0] for x in mesh])
    scl = np.array([fb.block("Y", x)[1][0] for x in mesh])
    # backward run starts from identity at x=1; anchor by frame(1) = V
    cols = cols @ forms.V
    return QuasiFrame(complex(lam), mesh, cols, scl, "S", 1.0)


def lagrange_bracket(zvec, yvec):
    """Alternating bracket z y[3] - z[1] y[2] + z[2] y[1] - z[3] y = z^T J y."""
    z = np.asarray(zvec)
    y = np.asarray(yvec)
    return np.einsum("...i,ij,...j->...", z, forms.J, y)


@dataclass(frozen=True)
class BracketSample:
    value: complex
    x: float
    lambda_y: complex
    lambda_z: complex


def bracket_samples(problem: Problem, lam_z, lam_y, col_z=1, col_y=1, xs=None):
    """Lagrange bracket of two C solutions along a mesh.

    The z solution solves the starred system; for all supported kinds the
    star transform fixes F, so both frames propagate in the same problem.
    """
    if xs is None:
        xs = tuple(np.linspace(0.0, 1.0, 33))
    fz = solutions_C(problem.starred(), lam_z, xs=xs)
    fy = solutions_C(problem, lam_y, xs=xs)
    out = []
    for x in fz.mesh:
        z = fz.values(x)[:, col_z - 1]
        y = fy.values(x)[:, col_y - 1]
        out.append(BracketSample(complex(lagrange_bracket(z, y)), float(x),
                                 complex(lam_y), complex(lam_z)))
    return out
