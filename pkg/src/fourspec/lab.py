"""Configuration ingestion, experiment orchestration, and result records.

Config files are TOML with sections [problem], [solver], [spectra], and
[experiment].  Each experiment returns a report object that can be
serialized to flat text; spectra are emitted as one record per line with
the fields (hash, spectrum, index, re, im, residual, dmag, ms).
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import forms
from .charfun import SPECTRUM_DELTA, delta
from .coeffs import (CoefficientModel, MatrixKind, Regime, build_coefficients,
                     build_matrix)
from .errors import ConfigError, PoleProximityError, RootSearchError
from .expressions import parse_constant
from .propagator import Problem, SolverOptions, propagate_blocks
from .spectra import (ClassWReport, SearchOptions, SpectrumSet, classW_check,
                      hadamard_reconstruct, three_spectra)
from .weyl import weyl_matrices

SPECTRUM_NAMES = ("S12", "S13", "S23")


def _as_complex(value, keyname):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return parse_constant(value)
        except Exception as exc:
            raise ConfigError(f"{keyname}: {exc}") from exc
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{keyname}: expected number, [re, im], or expression string")


def _coeff_spec(section, name):
    """A coefficient channel: expression string or sample rows."""
    if name in section:
        return section[name]
    rows = section.get(f"{name}_samples")
    if rows is None:
        return None
    if not (isinstance(rows, list) and len(rows) in (2, 3)):
        raise ConfigError(f"{name}_samples: expected [[x...],[re...]] or with an im row")
    xs = np.asarray(rows[0], dtype=float)
    vals = np.asarray(rows[1], dtype=float).astype(complex)
    if len(rows) == 3:
        vals = vals + 1j * np.asarray(rows[2], dtype=float)
    return (xs, vals)


@dataclass
class ProblemConfig:
    """Validated run configuration."""

    problem: dict
    solver: SolverOptions = field(default_factory=SolverOptions)
    search: SearchOptions = field(default_factory=SearchOptions)
    count: int = 8
    simplicity_margin: float = 1e-6
    separation_margin: float = 1e-4
    experiment: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a table")
        prob = dict(raw.get("problem", {}))
        solver_raw = dict(raw.get("solver", {}))
        spectra_raw = dict(raw.get("spectra", {}))
        experiment = dict(raw.get("experiment", {}))

        solver_fields = {f for f in SolverOptions.__dataclass_fields__}
        unknown = set(solver_raw) - solver_fields
        if unknown:
            raise ConfigError(f"[solver] unknown keys: {sorted(unknown)}")
        solver = SolverOptions(**solver_raw)
        for name in ("tol", "rtol", "atol"):
            if getattr(solver, name) <= 0:
                raise ConfigError(f"[solver] {name} must be positive")

        count = int(spectra_raw.pop("count", 8))
        simplicity = float(spectra_raw.pop("simplicity_margin", 1e-6))
        separation = float(spectra_raw.pop("separation_margin", 1e-4))
        search_fields = {f for f in SearchOptions.__dataclass_fields__}
        unknown = set(spectra_raw) - search_fields
        if unknown:
            raise ConfigError(f"[spectra] unknown keys: {sorted(unknown)}")
        search = SearchOptions(**spectra_raw)
        if search.band <= 0 or search.newton_tol <= 0:
            raise ConfigError("[spectra] band and newton_tol must be positive")
        if simplicity <= 0 or separation <= 0:
            raise ConfigError("[spectra] margins must be positive")
        return cls(prob, solver, search, count, simplicity, separation, experiment)

    @classmethod
    def from_toml(cls, path):
        with open(path, "rb") as fh:
            try:
                raw = _toml.load(fh)
            except _toml.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def kind(self):
        return MatrixKind.coerce(self.problem.get("kind", "vladimirov"))

    def build_model(self) -> CoefficientModel:
        prob = self.problem
        regime = Regime.coerce(prob.get("regime", "W2m1_W2m2"))
        kwargs = dict(
            tau1_0=_as_complex(prob.get("tau1_0", 0.0), "tau1_0"),
            tau2_0=_as_complex(prob.get("tau2_0", 0.0), "tau2_0"),
            tau2_prime_0=_as_complex(prob.get("tau2_prime_0", 0.0), "tau2_prime_0"),
            breakpoints=tuple(prob.get("breakpoints", ())),
            mesh_size=int(prob.get("mesh_size", 2001)),
        )
        return build_coefficients(
            _coeff_spec(prob, "p"), _coeff_spec(prob, "q"), regime,
            tau1=_coeff_spec(prob, "tau1"), tau2=_coeff_spec(prob, "tau2"),
            sigma2=_coeff_spec(prob, "sigma2"), **kwargs)

    def build_problem(self, kind=None) -> Problem:
        model = self.build_model()
        matrix = build_matrix(model, kind or self.kind())
        return Problem(matrix, self.solver)


def problem_hash(config: ProblemConfig, kind=None):
    """Content hash of the problem a config describes.

    Channels are probed on a fixed grid so the hash is stable under
    reserialization of the config (key order, number formatting).
    """
    model = config.build_model()
    probes = np.linspace(0.0, 1.0, 161)
    payload = {
        "regime": model.regime.value,
        "kind": (kind or config.kind()).value,
        "breakpoints": [f"{b:.12e}" for b in model.breakpoints],
        "constants": [f"{z.real:.12e}/{z.imag:.12e}" for z in
                      (model.tau1_0, model.tau2_0, model.tau2_prime_0)],
        "tau1": [f"{v.real:.10e}/{v.imag:.10e}" for v in np.atleast_1d(model.tau1(probes))],
        "tau2": [f"{v.real:.10e}/{v.imag:.10e}" for v in np.atleast_1d(model.tau2(probes))],
        "solver": {k: repr(getattr(config.solver, k))
                   for k in sorted(SolverOptions.__dataclass_fields__)},
        "count": config.count,
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return digest[:12]


@dataclass(frozen=True)
class RunRecord:
    """One eigenvalue record; lines diff cleanly across runs."""

    problem_hash: str
    spectrum: str
    index: int
    re: float
    im: float
    residual: float
    dmag: float
    ms: int

    def line(self):
        return (f"{self.problem_hash} {self.spectrum} {self.index} "
                f"{self.re:.17g} {self.im:.17g} {self.residual:.6e} "
                f"{self.dmag:.6e} {self.ms}")

    @classmethod
    def parse(cls, line):
        h, name, idx, re, im, res, dm, ms = line.split()
        return cls(h, name, int(idx), float(re), float(im), float(res),
                   float(dm), int(ms))


@dataclass
class SpectraRun:
    records: list
    spectrum_set: SpectrumSet
    classw: ClassWReport
    problem_hash: str
    flags: list


def run_spectra(config: ProblemConfig, *, kind=None, timing=True, jobs=1) -> SpectraRun:
    """Compute the three spectra plus the class-W report for a config."""
    problem = config.build_problem(kind)
    h = problem_hash(config, kind)
    flags = []
    t0 = time.perf_counter()
    try:
        sset = three_spectra(problem, config.count, config.search, jobs=jobs)
    except RootSearchError as exc:
        raise RootSearchError(f"spectra solve failed: {exc}") from exc
    elapsed_ms = int(round((time.perf_counter() - t0) * 1000)) if timing else 0
    try:
        classw = classW_check(problem, min(config.count, 5), config.search,
                              config.simplicity_margin, config.separation_margin)
    except RootSearchError as exc:
        flags.append(f"classW check incomplete: {exc}")
        classw = ClassWReport({}, {}, {}, False, [f"incomplete: {exc}"],
                              config.simplicity_margin, config.separation_margin)
    records = []
    for name in SPECTRUM_NAMES:
        lams = sset.spectrum(name)
        for i, lam in enumerate(lams, start=1):
            records.append(RunRecord(h, name, i, float(lam.real), float(lam.imag),
                                     float(sset.residuals[name][i - 1]),
                                     float(sset.derivative_magnitudes[name][i - 1]),
                                     elapsed_ms))
    return SpectraRun(records, sset, classw, h, flags)


# ---------------------------------------------------------------------------
# identity suite


@dataclass
class IdentityReport:
    lambdas: list
    displaced: int
    deviations: dict          # name -> max deviation (scaled)
    tolerance: float

    @property
    def passed(self):
        return all(v <= self.tolerance for v in self.deviations.values())

    def lines(self):
        out = [f"identity suite at {len(self.lambdas)} lambda samples "
               f"({self.displaced} displaced off poles), tolerance {self.tolerance:.1e}"]
        for name, dev in sorted(self.deviations.items()):
            mark = "pass" if dev <= self.tolerance else "FAIL"
            out.append(f"  {name:<12s} max deviation {dev:.3e}  [{mark}]")
        return out


def _draw_disk(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.2, 1.0, n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return r * np.exp(1j * th)


def run_identities(config_or_problem, lambda_samples=None, *, seed=1234,
                   samples=20, radius=500.0, tolerance=1e-6) -> IdentityReport:
    """Deviations of the Weyl-matrix identities at pole-avoiding samples."""
    if isinstance(config_or_problem, ProblemConfig):
        problem = config_or_problem.build_problem()
        exp = config_or_problem.experiment
        seed = int(exp.get("seed", seed))
        samples = int(exp.get("samples", samples))
        radius = float(exp.get("radius", radius))
        tolerance = float(exp.get("tolerance", tolerance))
    else:
        problem = config_or_problem

    rng = np.random.default_rng(seed)
    if lambda_samples is None:
        lambda_samples = _draw_disk(rng, samples, radius)
    lams = []
    displaced = 0
    for lam in np.asarray(lambda_samples, dtype=complex):
        cur = complex(lam)
        for _ in range(8):
            try:
                weyl_matrices(problem, [cur])
                break
            except PoleProximityError:
                cur *= 1.04 + 0.02j
                displaced += 1
        lams.append(cur)
    lams = np.array(lams)

    M = weyl_matrices(problem, lams)
    scale = (1.0 + np.max(np.abs(M), axis=(1, 2))) ** 2
    sympl = np.max(np.abs(np.transpose(M, (0, 2, 1)) @ forms.J0 @ M - forms.J0),
                   axis=(1, 2)) / scale
    m21, m31, m41 = M[:, 1, 0], M[:, 2, 0], M[:, 3, 0]
    m32, m42, m43 = M[:, 2, 1], M[:, 3, 1], M[:, 3, 2]
    real1 = np.abs(m43 - m21) / np.maximum(1.0, np.abs(m21))
    real2 = (np.abs(m42 - m32 * m21 + m31)
             / np.maximum(1.0, np.maximum(np.abs(m42), np.abs(m32 * m21))))

    # bilinear identity from the S family evaluated at x=0
    fb = propagate_blocks(problem, lams, blocks=("Y",), xs=(0.0, 1.0), direction=-1)
    G0 = fb.block("Y", 0.0)[0] @ forms.V
    lhs = G0[:, 1, 0] * G0[:, 2, 1] - G0[:, 2, 0] * G0[:, 1, 1]
    rhs = G0[:, 0, 0] * G0[:, 3, 1] - G0[:, 3, 0] * G0[:, 0, 1]
    ident1 = np.abs(lhs - rhs) / np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)

    # Lagrange bracket checks on a mesh for one sample pair
    xs = tuple(np.linspace(0.0, 1.0, 41))
    lam_y, lam_z = lams[0], lams[1 % len(lams)]
    star = problem.starred()
    wron_dev = _bracket_wron_deviation(problem, star, lam_y, lam_z, xs)
    const_dev = _bracket_const_deviation(problem, star, lam_y, xs)

    deviations = {
        "symplectic": float(np.max(sympl)),
        "real1": float(np.max(real1)),
        "real2": float(np.max(real2)),
        "ident1": float(np.max(ident1)),
        "bracket_wron": wron_dev,
        "bracket_const": const_dev,
    }
    return IdentityReport([complex(v) for v in lams], displaced, deviations,
                          tolerance)


def _frame_col(problem, lam, xs, col=0):
    fb = propagate_blocks(problem, [lam], blocks=("Y",), xs=xs)
    vals = np.stack([fb.block("Y", x)[0][0][:, col] * np.exp(fb.block("Y", x)[1][0])
                     for x in xs])
    return vals  # (len(xs), 4)


def _bracket_wron_deviation(problem, star, lam_y, lam_z, xs):
    """max |d/dx <z,y> - (lam_y - lam_z) z y| / scale on the mesh interior."""
    y = _frame_col(problem, lam_y, xs)
    z = _frame_col(star, lam_z, xs)
    br = np.einsum("ni,ij,nj->n", z, forms.J, y)
    xs = np.asarray(xs)
    dbr = np.gradient(br, xs)
    target = (lam_y - lam_z) * z[:, 0] * y[:, 0]
    scale = max(np.max(np.abs(target)), np.max(np.abs(br)), 1.0)
    # central differences are second order; compare away from the ends
    return float(np.max(np.abs(dbr[2:-2] - target[2:-2])) / scale)


def _bracket_const_deviation(problem, star, lam, xs):
    y = _frame_col(problem, lam, xs, col=3)
    z = _frame_col(star, lam, xs, col=0)
    br = np.einsum("ni,ij,nj->n", z, forms.J, y)
    scale = max(np.max(np.abs(br)), 1.0)
    return float(np.max(np.abs(br - br[0])) / scale)


# ---------------------------------------------------------------------------
# uniqueness / invariance


@dataclass
class UniquenessReport:
    distances: dict           # spectrum -> list of |a - b| / (1 + |a|)
    verdict: str
    first_mismatch: tuple | None
    tolerance: float

    def lines(self):
        out = [f"uniqueness probe, tolerance {self.tolerance:.1e}: {self.verdict}"]
        for name, ds in self.distances.items():
            worst = max(ds) if ds else 0.0
            out.append(f"  {name}: max scaled distance {worst:.3e} over {len(ds)} eigenvalues")
        return out


def run_uniqueness_probe(config_a: ProblemConfig, config_b: ProblemConfig, *,
                         tolerance=1e-6, jobs=1) -> UniquenessReport:
    """Elementwise spectral comparison of two problems."""
    n = min(config_a.count, config_b.count)
    run_a = three_spectra(config_a.build_problem(), n, config_a.search, jobs=jobs)
    run_b = three_spectra(config_b.build_problem(), n, config_b.search, jobs=jobs)
    distances = {}
    first = None
    for name in SPECTRUM_NAMES:
        a = run_a.spectrum(name)
        b = run_b.spectrum(name)
        ds = [abs(x - y) / (1.0 + abs(x)) for x, y in zip(a, b)]
        distances[name] = ds
        for i, d in enumerate(ds, start=1):
            if d > tolerance and first is None:
                first = (name, i)
    verdict = "indistinguishable" if first is None else f"distinguished at {first}"
    return UniquenessReport(distances, verdict, first, tolerance)


def shifted_config(config: ProblemConfig, c) -> "ShiftedProblemBuilder":
    """Problem identical to config's except tau2 -> tau2 + c*x."""
    return ShiftedProblemBuilder(config, complex(c))


@dataclass
class ShiftedProblemBuilder:
    """Lazy builder so uniqueness runs can reuse the spectra machinery."""

    base: ProblemConfig
    c: complex

    count = property(lambda self: self.base.count)
    search = property(lambda self: self.base.search)

    def build_problem(self, kind=None) -> Problem:
        model = self.base.build_model().shifted_tau2(self.c)
        matrix = build_matrix(model, kind or self.base.kind())
        return Problem(matrix, self.base.solver)


# ---------------------------------------------------------------------------
# cross-regularization


@dataclass
class CrossRegReport:
    kinds: list
    conditions: dict          # name -> complex value
    satisfied: dict           # name -> bool
    spectra: dict             # kind -> SpectrumSet
    max_distance: dict        # (kind_a, kind_b, spectrum) -> float
    tolerance: float

    def agreement(self, kind_a, kind_b, spectrum):
        return self.max_distance[(kind_a, kind_b, spectrum)] <= self.tolerance

    def lines(self):
        out = ["cross-regularization: vanishing conditions "
               + ", ".join(f"{k}={v:.3g} ({'ok' if self.satisfied[k] else 'violated'})"
                           for k, v in self.conditions.items())]
        for key, d in self.max_distance.items():
            a, b, name = key
            status = "agree" if d <= self.tolerance else "DIFFER"
            out.append(f"  {name}: {a} vs {b} max scaled distance {d:.3e} [{status}]")
        return out


def run_cross_regularization(config: ProblemConfig, kinds, *, tolerance=1e-6,
                             jobs=1) -> CrossRegReport:
    """Spectra of the same coefficients under different regularization matrices.

    Reports the boundary-form vanishing values tau1(0), tau1(1), tau2(0);
    when they vanish the spectra must agree across kinds.
    """
    kinds = [MatrixKind.coerce(k) for k in kinds]
    model = config.build_model()
    vlad = build_matrix(model, MatrixKind.VLADIMIROV)
    tau1 = vlad.channels[0]
    tau2 = vlad.channels[1]
    conditions = {
        "tau1(0)": complex(tau1(0.0)),
        "tau1(1)": complex(tau1(1.0)),
        "tau2(0)": complex(tau2(0.0)),
    }
    satisfied = {k: abs(v) <= 1e-10 for k, v in conditions.items()}
    spectra = {}
    for kind in kinds:
        problem = Problem(build_matrix(model, kind), config.solver)
        spectra[kind.value] = three_spectra(problem, config.count, config.search, jobs=jobs)
    max_distance = {}
    for i, ka in enumerate(kinds):
        a_set = spectra[ka.value]
        for kb in kinds[i + 1:]:
            b_set = spectra[kb.value]
            for name in SPECTRUM_NAMES:
                ds = [abs(x - y) / (1.0 + abs(x))
                      for x, y in zip(a_set.spectrum(name), b_set.spectrum(name))]
                max_distance[(ka.value, kb.value, name)] = max(ds) if ds else 0.0
    return CrossRegReport([k.value for k in kinds], conditions, satisfied,
                          spectra, max_distance, tolerance)


# ---------------------------------------------------------------------------
# Hadamard experiment


@dataclass
class HadamardReport:
    entries: dict             # (m, k) -> dict with constant, errors, ...

    def lines(self):
        out = []
        for key, e in self.entries.items():
            out.append(f"Delta_{key[0]}{key[1]}: C = {e['constant']:.8g} "
                       f"(spread {e['spread']:.2e}, converged={e['converged']}), "
                       f"max probe rel error {e['max_rel_error']:.3e}")
        return out


def run_hadamard(config: ProblemConfig, n_zeros, probes, *, jobs=1,
                 indices=((2, 2), (3, 2), (4, 2))) -> HadamardReport:
    """Reconstruct characteristic functions from computed spectra."""
    problem = config.build_problem()
    sset = three_spectra(problem, n_zeros, config.search, jobs=jobs)
    by_index = {SPECTRUM_DELTA[name]: sset.spectrum(name) for name in SPECTRUM_NAMES}
    entries = {}
    for idx in indices:
        zeros = by_index[tuple(idx)]
        rec = hadamard_reconstruct(zeros, idx, len(zeros), probes)
        errors = {}
        for p, val in rec.probe_values.items():
            direct = delta(problem, idx[0], idx[1], p)
            denom = max(abs(direct), 1e-300)
            errors[p] = abs(val - direct) / denom
        entries[tuple(idx)] = {
            "constant": rec.constant,
            "spread": rec.constant_spread,
            "converged": rec.converged,
            "probe_errors": errors,
            "max_rel_error": max(errors.values()) if errors else np.nan,
            "sigma": rec.sigma,
        }
    return HadamardReport(entries)
