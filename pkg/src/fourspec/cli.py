"""Command line interface.

Verbs: spectra, identities, uniqueness, crossreg, hadamard, weyl, plotdata.
Each verb reads a TOML config, runs the corresponding experiment, writes
flat result files under --out, and prints a short summary.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .charfun import char_values
from .errors import FourspecError
from .expressions import parse_constant
from .lab import (ProblemConfig, SPECTRUM_NAMES, run_cross_regularization,
                  run_hadamard, run_identities, run_spectra,
                  run_uniqueness_probe, shifted_config)
from .weyl import weyl_matrices


def _write(path: Path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _add_common(p):
    p.add_argument("--config", required=True, help="TOML problem configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--n", type=int, default=None, help="eigenvalue count override")
    p.add_argument("--tol", type=float, default=None, help="report tolerance override")
    p.add_argument("--kind", default=None,
                   choices=["vladimirov", "sigma_form", "companion_L1"])
    p.add_argument("--seed", type=int, default=None, help="seed for random lambda samples")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="zero the ms field for byte-reproducible records")


def _load(args) -> ProblemConfig:
    config = ProblemConfig.from_toml(args.config)
    if args.n is not None:
        config.count = args.n
    if args.seed is not None:
        config.experiment["seed"] = args.seed
    return config


def _grid(spec):
    lo, hi, num = spec.split(":")
    return np.linspace(float(lo), float(hi), int(num))


def cmd_spectra(args):
    config = _load(args)
    run = run_spectra(config, kind=args.kind, timing=not args.no_timing, jobs=args.jobs)
    out = Path(args.out)
    _write(out / "spectra.txt", [r.line() for r in run.records])
    summary = [f"problem {run.problem_hash}: {len(run.records)} records"]
    summary.append(f"class W verdict: {'in' if run.classw.verdict else 'out'}")
    summary.extend("  " + f for f in run.classw.failures)
    summary.extend("flag: " + f for f in run.flags)
    for name in SPECTRUM_NAMES:
        lams = run.spectrum_set.spectrum(name)
        if lams:
            summary.append(f"{name}: first {lams[0]:.10g}, last {lams[-1]:.10g}")
    _write(out / "summary.txt", summary)
    print("\n".join(summary))
    return 0


def cmd_identities(args):
    config = _load(args)
    kwargs = {}
    if args.tol is not None:
        kwargs["tolerance"] = args.tol
    report = run_identities(config, **kwargs)
    _write(Path(args.out) / "identities.txt", report.lines())
    print("\n".join(report.lines()))
    return 0 if report.passed else 3


def cmd_uniqueness(args):
    config = _load(args)
    if args.config_b:
        other = ProblemConfig.from_toml(args.config_b)
        if args.n is not None:
            other.count = args.n
    elif args.shift is not None:
        other = shifted_config(config, parse_constant(args.shift))
    else:
        raise FourspecError("uniqueness needs --config-b or --shift")
    report = run_uniqueness_probe(config, other, tolerance=args.tol or 1e-6,
                                  jobs=args.jobs)
    _write(Path(args.out) / "uniqueness.txt", report.lines())
    print("\n".join(report.lines()))
    return 0


def cmd_crossreg(args):
    config = _load(args)
    kinds = args.kinds.split(",") if args.kinds else ["vladimirov", "companion_L1"]
    report = run_cross_regularization(config, kinds, tolerance=args.tol or 1e-6,
                                      jobs=args.jobs)
    _write(Path(args.out) / "crossreg.txt", report.lines())
    print("\n".join(report.lines()))
    return 0


def cmd_hadamard(args):
    config = _load(args)
    n_zeros = args.n or int(config.experiment.get("n_zeros", 128))
    probes = ([parse_constant(tok) for tok in args.probes.split(",")]
              if args.probes else config.experiment.get("probes", [0.0, -50.0, -100.0]))
    report = run_hadamard(config, n_zeros, probes, jobs=args.jobs)
    _write(Path(args.out) / "hadamard.txt", report.lines())
    print("\n".join(report.lines()))
    return 0


def cmd_weyl(args):
    config = _load(args)
    problem = config.build_problem(args.kind)
    res = _grid(args.grid)
    lams = res + 1j * args.imag
    M = weyl_matrices(problem, lams)
    lines = ["# re im m21 m31 m41 m32 m42 m43 (re/im pairs)"]
    for lam, m in zip(lams, M):
        entries = [m[1, 0], m[2, 0], m[3, 0], m[2, 1], m[3, 1], m[3, 2]]
        vals = " ".join(f"{e.real:.12g} {e.imag:.12g}" for e in entries)
        lines.append(f"{lam.real:.12g} {lam.imag:.12g} {vals}")
    _write(Path(args.out) / "weyl.txt", lines)
    print(f"wrote {len(lines) - 1} Weyl samples")
    return 0


def cmd_plotdata(args):
    config = _load(args)
    problem = config.build_problem(args.kind)
    j, k = int(args.delta[0]), int(args.delta[1])
    res = _grid(args.grid)
    ims = _grid(args.imag_grid) if args.imag_grid else np.array([0.0])
    lines = [f"# re im log10|Delta_{j}{k}|"]
    for im in ims:
        lams = res + 1j * im
        cv = char_values(problem, lams, families=(k,))
        log10 = cv.log_abs(j, k) / np.log(10.0)
        for lam, v in zip(lams, log10):
            lines.append(f"{lam.real:.12g} {lam.imag:.12g} {v:.9g}")
    _write(Path(args.out) / f"plotdata_{j}{k}.txt", lines)
    print(f"wrote {len(lines) - 1} grid samples")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fourspec",
        description="Three-spectra experiments for fourth-order operators "
                    "with distributional coefficients")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("spectra", help="three spectra + class W report")
    _add_common(p)
    p.set_defaults(fn=cmd_spectra)

    p = sub.add_parser("identities", help="Weyl-matrix identity suite")
    _add_common(p)
    p.set_defaults(fn=cmd_identities)

    p = sub.add_parser("uniqueness", help="compare spectra of two problems")
    _add_common(p)
    p.add_argument("--config-b", default=None, help="second problem config")
    p.add_argument("--shift", default=None,
                   help="compare against tau2 -> tau2 + c*x (c an expression)")
    p.set_defaults(fn=cmd_uniqueness)

    p = sub.add_parser("crossreg", help="spectra under alternate matrices")
    _add_common(p)
    p.add_argument("--kinds", default=None, help="comma list of matrix kinds")
    p.set_defaults(fn=cmd_crossreg)

    p = sub.add_parser("hadamard", help="reconstruct Delta from zeros")
    _add_common(p)
    p.add_argument("--probes", default=None, help="comma list of probe lambdas")
    p.set_defaults(fn=cmd_hadamard)

    p = sub.add_parser("weyl", help="dump M(lambda) on a lambda grid")
    _add_common(p)
    p.add_argument("--grid", required=True, help="re_lo:re_hi:count")
    p.add_argument("--imag", type=float, default=0.5)
    p.set_defaults(fn=cmd_weyl)

    p = sub.add_parser("plotdata", help="|Delta| magnitude tables for plotting")
    _add_common(p)
    p.add_argument("--delta", default="22", help="index jk, e.g. 32")
    p.add_argument("--grid", required=True, help="re_lo:re_hi:count")
    p.add_argument("--imag-grid", default=None, help="im_lo:im_hi:count")
    p.set_defaults(fn=cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FourspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
