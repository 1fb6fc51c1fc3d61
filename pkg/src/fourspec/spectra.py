"""Zero localization for the characteristic determinants.

Zeros are found by the argument principle on rectangles: boundary phases
of the scaled determinant are tracked with adaptive refinement until every
increment is small, giving the winding number; rectangles with more than
one zero are bisected until isolation, and each isolated zero is refined
by Newton iteration with finite-difference derivatives evaluated in the
scaled representation.  Rectangles march along the real axis in |lambda|
order (both directions) in blocks sized by the (pi n)^4 spacing rule, so
empty ranges cost a single boundary sweep.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .charfun import SPECTRUM_DELTA, delta_fn
from .errors import RootSearchError
from .propagator import Problem


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle in the lambda plane."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    @property
    def center(self):
        return complex(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))

    @property
    def diag(self):
        return float(np.hypot(self.re_hi - self.re_lo, self.im_hi - self.im_lo))

    def contains(self, lam, pad=0.0):
        return (self.re_lo - pad <= lam.real <= self.re_hi + pad
                and self.im_lo - pad <= lam.imag <= self.im_hi + pad)

    def inflated(self, factor):
        cr, ci = 0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi)
        hr = 0.5 * (self.re_hi - self.re_lo) * factor
        hi = 0.5 * (self.im_hi - self.im_lo) * factor
        return Window(cr - hr, cr + hr, ci - hi, ci + hi)

    def corners(self):
        return (complex(self.re_lo, self.im_lo), complex(self.re_hi, self.im_lo),
                complex(self.re_hi, self.im_hi), complex(self.re_lo, self.im_hi))

    def min_abs(self):
        res = [abs(c) for c in self.corners()]
        if self.re_lo <= 0.0 <= self.re_hi:
            res.append(min(abs(self.im_lo), abs(self.im_hi)))
        if self.im_lo <= 0.0 <= self.im_hi:
            res.append(min(abs(self.re_lo), abs(self.re_hi)))
        if self.contains(0j):
            res.append(0.0)
        return min(res)


@dataclass(frozen=True)
class SearchOptions:
    band: float = 1.0                 # imaginary half-height of the search strip
    samples_per_edge: int = 12
    max_refinements: int = 48
    max_boundary_samples: int = 40_000
    boundary_guard: float = 1e-9      # min/median modulus triggering inflation
    inflations: int = 3
    inflation_factor: float = 1.12
    newton_fd_rel: float = 1e-6
    newton_tol: float = 5e-13
    newton_max_iter: int = 40
    block_span: float = 4.0           # marching block span in units of pi (t scale)
    max_blocks: int = 600
    split_depth: int = 60


class _BoundaryZeroError(RootSearchError):
    pass


def _boundary_samples(window: Window, n_per_edge):
    pts = []
    cs = window.corners()
    for a, b in zip(cs, cs[1:] + cs[:1]):
        seg = a + (b - a) * np.arange(n_per_edge) / n_per_edge
        pts.extend(seg.tolist())
    return np.array(pts, dtype=complex)


class _Boundary:
    """Adaptively refined boundary sampling of the scaled determinant."""

    def __init__(self, fn, window, opts: SearchOptions):
        self.fn = fn
        self.window = window
        self.opts = opts
        self.lams = _boundary_samples(window, opts.samples_per_edge)
        m, s = fn(self.lams)
        self.mant = np.asarray(m)
        self.scale = np.asarray(s)
        self._refine()

    def _phase_steps(self):
        ph = np.angle(self.mant)
        dph = np.diff(np.concatenate([ph, ph[:1]]))
        return (dph + np.pi) % (2 * np.pi) - np.pi

    def _guard(self):
        mods = np.abs(self.mant)
        med = max(float(np.median(mods)), 1e-300)
        if float(mods.min()) < self.opts.boundary_guard * med:
            raise _BoundaryZeroError(
                f"determinant modulus {mods.min():.3e} on window boundary "
                f"(median {med:.3e}); possible zero on the contour")

    def _refine(self):
        for _ in range(self.opts.max_refinements):
            self._guard()
            dph = self._phase_steps()
            bad = np.abs(dph) > 0.5 * np.pi
            if not bad.any():
                return
            if self.lams.size > self.opts.max_boundary_samples:
                raise RootSearchError("boundary refinement budget exhausted")
            nxt = np.roll(self.lams, -1)
            mids = 0.5 * (self.lams[bad] + nxt[bad])
            m, s = self.fn(mids)
            idx = np.nonzero(bad)[0]
            order = np.argsort(idx)
            insert_at = idx[order] + 1
            self.lams = np.insert(self.lams, insert_at, mids[order])
            self.mant = np.insert(self.mant, insert_at, np.asarray(m)[order])
            self.scale = np.insert(self.scale, insert_at, np.asarray(s)[order])
        self._guard()
        dph = self._phase_steps()
        if np.abs(dph).max() > 0.5 * np.pi:
            raise RootSearchError("phase tracking failed to settle on the boundary")

    @property
    def winding(self):
        total = self._phase_steps().sum() / (2 * np.pi)
        n = int(np.round(total))
        if abs(total - n) > 0.2:
            raise RootSearchError(f"winding number did not converge (raw {total:.3f})")
        return n

    def scale_estimate(self):
        return float(np.median(np.abs(self.mant)))

    def zero_moment(self):
        """First moment (sum of enclosed zeros) from the boundary samples."""
        lam = self.lams
        nxt = np.roll(lam, -1)
        logmod = np.log(np.abs(self.mant)) + self.scale
        dlog = np.diff(np.concatenate([logmod, logmod[:1]])) + 1j * self._phase_steps()
        mid = 0.5 * (lam + nxt)
        return complex(np.sum(mid * dlog) / (2j * np.pi))


def _count_window(fn, window, opts: SearchOptions):
    """Winding count with the inflate-and-retry contract."""
    win = window
    for attempt in range(opts.inflations + 1):
        try:
            b = _Boundary(fn, win, opts)
            return b, win
        except _BoundaryZeroError:
            if attempt == opts.inflations:
                raise RootSearchError(
                    f"boundary modulus below threshold after {opts.inflations} "
                    f"inflations of window {win}")
            win = win.inflated(opts.inflation_factor)
    raise AssertionError("unreachable")


def count_zeros(fn_or_problem, window, key=None, opts: SearchOptions | None = None):
    """Number of determinant zeros inside a rectangle (argument principle).

    ``fn_or_problem`` is either a batched callable lam -> (mantissa,
    log_scale) or a Problem combined with ``key=(j, k)``.
    """
    opts = opts or SearchOptions()
    if isinstance(fn_or_problem, Problem):
        if key is None:
            raise RootSearchError("count_zeros needs key=(j, k) with a Problem")
        fn = delta_fn(fn_or_problem, *key)
    else:
        fn = fn_or_problem
    boundary, _ = _count_window(fn, window, opts)
    return boundary.winding


@dataclass
class Zero:
    lam: complex
    residual: float          # |Delta| at the zero, in scaled (mantissa) units
    dmag: float              # |Delta'| in the same scaled units
    window_scale: float      # median boundary modulus of the hosting window
    converged: bool = True
    multiplicity: int = 1


def _newton_refine(fn, seeds, opts: SearchOptions, scale_hint=1.0):
    """Batched Newton iteration on the scaled determinant."""
    lam = np.asarray(seeds, dtype=complex).copy()
    n = lam.size
    active = np.ones(n, dtype=bool)
    ok = np.zeros(n, dtype=bool)
    res = np.zeros(n)
    dmag = np.zeros(n)
    prev_step = np.full(n, np.inf)
    for _ in range(opts.newton_max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        h = opts.newton_fd_rel * (1.0 + np.abs(lam[idx]))
        batch = np.concatenate([lam[idx], lam[idx] + h, lam[idx] - h])
        m, s = fn(batch)
        k = idx.size
        m0, mp, mm = m[:k], m[k:2 * k], m[2 * k:]
        s0, sp, sm = s[:k], s[k:2 * k], s[2 * k:]
        smax = np.maximum(np.maximum(s0, sp), sm)
        f = m0 * np.exp(s0 - smax)
        fp = (mp * np.exp(sp - smax) - mm * np.exp(sm - smax)) / (2 * h)
        tiny = np.abs(fp) < 1e-300
        fp[tiny] = 1e-300
        step = f / fp
        lam[idx] -= step
        res[idx] = np.abs(m0)
        dmag[idx] = np.abs(fp)
        rel = np.abs(step) / (1.0 + np.abs(lam[idx]))
        # converged outright, or stagnating at the integrator noise floor
        done = (rel <= opts.newton_tol) | ((rel <= 1e-7) & (np.abs(step) >= 0.25 * prev_step[idx]))
        ok[idx[done]] = True
        active[idx[done]] = False
        diverged = rel > 1e3
        active[idx[diverged]] = False
        prev_step[idx] = np.abs(step)
    return lam, res, dmag, ok


def _localize(fn, window, count, opts: SearchOptions, depth=0):
    """Subdivide until isolation, then Newton-refine each zero."""
    if count == 0:
        return []
    if count == 1 or depth >= opts.split_depth:
        boundary, win = _count_window(fn, window, opts)
        seed = boundary.zero_moment() / max(count, 1)
        if not win.contains(seed, pad=win.diag):
            seed = win.center
        lam, res, dmag, ok = _newton_refine(fn, [seed], opts)
        zero = Zero(complex(lam[0]), float(res[0]), float(dmag[0]),
                    boundary.scale_estimate(), bool(ok[0]), count)
        if count > 1:
            zero.converged = False
        return [zero]
    # split along the wider side (real span compared against imaginary span)
    re_span = window.re_hi - window.re_lo
    im_span = window.im_hi - window.im_lo
    for frac in (0.5, 0.54, 0.46, 0.6):
        if re_span >= im_span:
            cut = window.re_lo + frac * re_span
            w1 = Window(window.re_lo, cut, window.im_lo, window.im_hi)
            w2 = Window(cut, window.re_hi, window.im_lo, window.im_hi)
        else:
            cut = window.im_lo + frac * im_span
            w1 = Window(window.re_lo, window.re_hi, window.im_lo, cut)
            w2 = Window(window.re_lo, window.re_hi, cut, window.im_hi)
        try:
            b1, _ = _count_window(fn, w1, opts)
            n1 = b1.winding
            b2, _ = _count_window(fn, w2, opts)
            n2 = b2.winding
        except RootSearchError:
            continue
        if n1 + n2 == count:
            return (_localize(fn, w1, n1, opts, depth + 1)
                    + _localize(fn, w2, n2, opts, depth + 1))
    raise RootSearchError(f"could not split window {window} holding {count} zeros")


def zeros_in_window(fn, window, opts: SearchOptions | None = None):
    """All zeros inside a rectangle, argument-principle complete."""
    opts = opts or SearchOptions()
    boundary, win = _count_window(fn, window, opts)
    count = boundary.winding
    zeros = _localize(fn, win, count, opts)
    return zeros, count


def _dedupe(zeros, tol_rel=1e-8):
    out = []
    for z in sorted(zeros, key=lambda z: (abs(z.lam), z.lam.real, z.lam.imag)):
        if any(abs(z.lam - w.lam) <= tol_rel * (1.0 + abs(w.lam)) for w in out):
            continue
        out.append(z)
    return out


def find_zeros(problem: Problem, key, n, opts: SearchOptions | None = None,
               directions=(1, -1)):
    """First ``n`` zeros of Delta_key ordered by |lambda|.

    Marches rectangles of height 2*band along the real axis in both
    directions; block spans follow the (pi n)^4 eigenvalue spacing so a
    block holds a handful of zeros.  Raises RootSearchError with a partial
    result attached if the block budget runs out.
    """
    opts = opts or SearchOptions()
    fn = delta_fn(problem, *key)
    span = opts.block_span * np.pi

    # Edges sit at t = (1/2 + i*span) * pi in the |lambda|^(1/4) scale, half a
    # zero spacing away from the (n pi)-type zero locations, so clean problems
    # never put an eigenvalue on a block boundary.
    def block_window(direction, i):
        t_lo = 0.5 * np.pi + i * span
        t_hi = 0.5 * np.pi + (i + 1) * span
        if direction > 0:
            # first positive block also covers the origin strip
            return Window(t_lo ** 4 if i else -(t_lo ** 4), t_hi ** 4,
                          -opts.band, opts.band)
        return Window(-(t_hi ** 4), -(t_lo ** 4), -opts.band, opts.band)

    # heap orders pending blocks by the smallest |lambda| they can hold
    heap = []
    for d in directions:
        heapq.heappush(heap, (0.0, d, 0))
    found = []
    blocks_done = 0
    while heap:
        min_abs, d, i = heapq.heappop(heap)
        have = _dedupe(found)
        if len(have) >= n and abs(have[n - 1].lam) < min_abs:
            break
        if blocks_done >= opts.max_blocks:
            err = RootSearchError(
                f"window exhaustion: {len(have)} of {n} zeros after "
                f"{blocks_done} blocks for Delta_{key}")
            err.partial = have[:n]
            raise err
        win = block_window(d, i)
        zs, _count = zeros_in_window(fn, win, opts)
        found.extend(zs)
        blocks_done += 1
        nxt = block_window(d, i + 1)
        heapq.heappush(heap, (nxt.min_abs(), d, i + 1))
    result = _dedupe(found)[:n]
    if len(result) < n:
        err = RootSearchError(f"found only {len(result)} of {n} zeros for Delta_{key}")
        err.partial = result
        raise err
    return result


@dataclass
class SpectrumSet:
    """The three Barcilon spectra with refinement diagnostics."""

    s12: list = field(default_factory=list)
    s13: list = field(default_factory=list)
    s23: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    derivative_magnitudes: dict = field(default_factory=dict)

    def spectrum(self, name):
        return getattr(self, name.lower())

    @staticmethod
    def sort_key(lam):
        return (lam.real, lam.imag)


def three_spectra(problem: Problem, count_per_spectrum, opts: SearchOptions | None = None,
                  jobs=1) -> SpectrumSet:
    """Zeros of Delta_22, Delta_32, Delta_42 as the spectra S12, S13, S23."""
    opts = opts or SearchOptions()
    names = ("S12", "S13", "S23")

    def solve(name):
        return find_zeros(problem, SPECTRUM_DELTA[name], count_per_spectrum, opts)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=min(jobs, 3)) as pool:
            results = dict(zip(names, pool.map(solve, names)))
    else:
        results = {name: solve(name) for name in names}

    out = SpectrumSet()
    for name in names:
        zs = sorted(results[name], key=lambda z: SpectrumSet.sort_key(z.lam))
        setattr(out, name.lower(), [z.lam for z in zs])
        out.residuals[name] = [z.residual for z in zs]
        out.derivative_magnitudes[name] = [z.dmag for z in zs]
    return out


@dataclass
class ClassWReport:
    """Simplicity and separation diagnostics for the Delta_kk zero sets."""

    zeros: dict
    min_dmag: dict
    min_separation: dict
    verdict: bool
    failures: list
    simplicity_margin: float
    separation_margin: float


def classW_check(problem: Problem, n, opts: SearchOptions | None = None,
                 simplicity_margin=1e-6, separation_margin=1e-4) -> ClassWReport:
    """Check the simple-zeros / no-common-zeros conditions numerically.

    Verdict is in-class iff every |Delta'| margin and every cross-family
    separation exceeds the configured thresholds.  n=0 is vacuously in.
    """
    opts = opts or SearchOptions()
    zeros = {}
    min_dmag = {}
    failures = []
    if n == 0:
        return ClassWReport({}, {}, {}, True, [], simplicity_margin, separation_margin)
    for k in (1, 2, 3):
        zs = find_zeros(problem, (k, k), n, opts)
        zeros[k] = [z.lam for z in zs]
        margins = [z.dmag / max(z.window_scale, 1e-300) for z in zs]
        min_dmag[k] = min(margins) if margins else np.inf
        for z, margin in zip(zs, margins):
            if margin < simplicity_margin or z.multiplicity > 1:
                failures.append(
                    f"simplicity: |Delta'_{k}{k}| margin {margin:.3e} at "
                    f"lambda={z.lam:.6g} below {simplicity_margin:.1e}")
    min_separation = {}
    for k in (1, 2):
        seps = [abs(a - b) / (1.0 + abs(a))
                for a in zeros[k] for b in zeros[k + 1]]
        min_separation[(k, k + 1)] = min(seps) if seps else np.inf
        if seps and min(seps) < separation_margin:
            failures.append(
                f"separation: zero sets of Delta_{k}{k} and Delta_{k+1}{k+1} "
                f"approach within {min(seps):.3e} (< {separation_margin:.1e} relative)")
    return ClassWReport(zeros, min_dmag, min_separation, not failures, failures,
                        simplicity_margin, separation_margin)


# ---------------------------------------------------------------------------
# Hadamard products


@dataclass
class HadamardReconstruction:
    index: tuple
    constant: complex
    probe_values: dict
    converged: bool
    constant_spread: float
    truncation: int
    sigma: float


_PAPER_CONSTANTS = {(2, 2): ((1 - 1j) / 8, -3), (3, 2): (1j / 4, -2), (4, 2): (-(1 + 1j) / 8, -1)}


def _tail_log(lam, n_from, n_to, sigma):
    """Sum of log(1 - lam/model_zero) over the synthetic tail."""
    ls = np.arange(n_from, n_to + 1, dtype=float)
    model = (np.pi * (ls + sigma)) ** 4
    total = np.sum(np.log1p(-lam / model))
    # integral remainder beyond the explicit tail: sum_{l>L} lam/(pi l)^4
    total += -lam / (3.0 * np.pi ** 4 * n_to ** 3)
    return total


def hadamard_reconstruct(zeros, index, truncation, probes, *, tail_factor=10,
                         radii=None, spread_tol=1e-3) -> HadamardReconstruction:
    """Reconstruct Delta_index from its zeros by a Hadamard product.

    The multiplicative constant is estimated by evaluating the asymptotic
    model against the truncated product at increasing |lambda| along
    arg(lambda) = pi/2; absent zeros beyond the truncation are replaced by
    the (pi(l+sigma))^4 spacing model (tail correction).
    """
    index = tuple(index)
    if index not in _PAPER_CONSTANTS:
        raise RootSearchError(f"hadamard index must be one of {set(_PAPER_CONSTANTS)}")
    zeros = sorted((complex(z) for z in zeros), key=abs)
    if truncation > len(zeros):
        raise RootSearchError(
            f"truncation {truncation} exceeds available zeros ({len(zeros)})")
    used = np.array(zeros[:truncation], dtype=complex)
    origin = np.abs(used) < 1e-12
    m_origin = int(np.count_nonzero(origin))
    used = used[~origin]

    if truncation == 0:
        sigma = 0.0
    else:
        ts = np.abs(used) ** 0.25 / np.pi
        k = max(1, len(ts) // 4)
        sigma = float(np.mean(ts[-k:] - np.arange(len(ts) - k + 1, len(ts) + 1)))

    c_lead, a_lead = _PAPER_CONSTANTS[index]
    n_used = len(used)

    def product_log(lam):
        if n_used == 0:
            val = 0.0 + 0.0j
        else:
            val = np.sum(np.log1p(-lam / used))
        if truncation > 0:
            val += _tail_log(lam, n_used + 1, tail_factor * max(truncation, 1), sigma)
        if m_origin:
            val += m_origin * np.log(lam)
        return val

    if radii is None:
        t_max = (np.pi * (max(truncation, 8) + sigma))
        radii = [(f * t_max) ** 4 for f in (0.18, 0.24, 0.3, 0.36, 0.42)]
    estimates = []
    for R in radii:
        lam = 1j * R
        rho = R ** 0.25 * np.exp(1j * np.pi / 8)
        log_model = np.log(c_lead) + a_lead * np.log(rho) + rho * (1 - 1j)
        estimates.append(np.exp(log_model - product_log(lam)))
    estimates = np.array(estimates)
    last = estimates[-3:]
    center = np.mean(last)
    spread = float(np.max(np.abs(last - center)) / max(abs(center), 1e-300))
    converged = spread <= spread_tol and truncation > 0
    constant = complex(last[-1])

    probe_values = {}
    for p in probes:
        p = complex(p)
        probe_values[p] = constant * np.exp(product_log(p)) if truncation > 0 else constant
    return HadamardReconstruction(index, constant, probe_values, converged,
                                  spread, truncation, sigma)
