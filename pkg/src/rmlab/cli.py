"""Command-line front end: ``rmlab <subcommand> [flags]``.

Every output starts with a ``#`` line holding the exact flags of the run, so
any artifact can be regenerated with ``rmlab $(header)``. Exit status is 0 on
success, 1 on usage or I/O errors and 2 when a certificate, identity or
chain check fails.
"""
from __future__ import annotations

import argparse
import math
import os
import shlex
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from .ensembles import KINDS as ENSEMBLES, as_distribution, read_matrix, sample_matrix
from .errors import (
    InsufficientDataError, NoCertificateError, RmlabError, UndefinedRatioError,
)
from .prooftrace import TRACE_HEADER, bottom_frame, frame_errors, frame_ok, trace_chain
from .rii import select_invertible_subset, verify_certificate
from .spectra import frobenius_residual, negative_second_moment_residual, spectral_summary

SUBCOMMANDS = ("tail", "fit", "rii", "trace", "verify", "dist", "opnorm")
STATS = {"smin": mc.SMIN_LD, "cond": mc.COND_SB, "hsinv": mc.HSINV_SB, "sk": mc.SK_SB, "opnorm": mc.OPNORM}

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    ensemble: str | None = None
    n: int | None = None
    grid: str | None = None
    trials: int | None = None
    seed: int | None = None
    out: str | None = None
    threads: int = 1
    stat: str | None = None
    k: int | None = None
    c0: float | None = None
    eps: float | None = None
    gamma: float | None = None
    ell: int | None = None
    mode: str | None = None
    multiple: float | None = None
    matrix: str | None = None
    infile: str | None = None

    def grid_values(self):
        return parse_grid(self.grid)

    def to_argv(self):
        argv = [self.subcommand]
        for f in fields(self):
            if f.name == "subcommand":
                continue
            value = getattr(self, f.name)
            if value is None or (f.name == "threads" and value == 1):
                continue
            flag = "--in" if f.name == "infile" else f"--{f.name}"
            argv += [flag, str(value)]
        return argv

    def header(self):
        return "# rmlab " + shlex.join(self.to_argv())


def parse_grid(text):
    """``start:stop:step`` (stop inclusive) or a single value."""
    try:
        parts = [float(p) for p in text.split(":")]
    except (AttributeError, ValueError):
        raise UsageError(f"--grid: malformed grid {text!r}; expected start:stop:step") from None
    if len(parts) == 1:
        return parts
    if len(parts) != 3:
        raise UsageError(f"--grid: malformed grid {text!r}; expected start:stop:step")
    start, stop, step = parts
    if step <= 0 or stop < start:
        raise UsageError(f"--grid: {text!r} does not give a nonempty increasing grid")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # round away accumulated binary noise so 1:4:0.5 gives 1.0, 1.5, ... exactly
    return [round(start + i * step, 12) for i in range(count)]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_REQUIRED = {
    "tail": ("stat", "ensemble", "n", "grid", "trials", "seed"),
    "fit": ("infile",),
    "rii": ("eps",),
    "trace": ("ensemble", "n", "k", "trials", "seed"),
    "verify": ("ensemble", "n", "trials", "seed"),
    "dist": ("ensemble", "n", "ell", "trials", "seed"),
    "opnorm": ("ensemble", "n", "trials", "seed"),
}


def _build_parser():
    parser = _Parser(prog="rmlab", description="Random-matrix spectral laboratory.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--ensemble", choices=ENSEMBLES)
        p.add_argument("--n", type=int)
        p.add_argument("--grid")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int, default=1)
        if name == "tail":
            p.add_argument("--stat", choices=sorted(STATS))
            p.add_argument("--k", type=int)
            p.add_argument("--c0", type=float)
        if name == "fit":
            p.add_argument("--in", dest="infile")
        if name == "rii":
            p.add_argument("--eps", type=float)
            p.add_argument("--matrix")
        if name in ("trace", "verify"):
            p.add_argument("--k", type=int)
        if name == "trace":
            p.add_argument("--gamma", type=float, default=0.5)
            p.add_argument("--c0", type=float, default=0.1)
        if name == "dist":
            p.add_argument("--ell", type=int)
            p.add_argument("--mode", choices=mc.MODES, default="fixed_subspace")
        if name == "opnorm":
            p.add_argument("--multiple", type=float)
    return parser


def parse_args(argv):
    """Validate argv into a :class:`RunConfig`; raises :class:`UsageError`."""
    ns = _build_parser().parse_args(list(argv))
    if ns.subcommand is None:
        raise UsageError(f"missing subcommand; expected one of {', '.join(SUBCOMMANDS)}")
    values = {k: v for k, v in vars(ns).items()}
    name = values["subcommand"]
    if values.get("grid") is not None:
        parse_grid(values["grid"])
    for key in _REQUIRED[name]:
        if values.get(key) is None:
            flag = "--in" if key == "infile" else f"--{key}"
            raise UsageError(f"{name}: missing required flag {flag}")
    if name == "rii" and values.get("matrix") is None:
        for key in ("ensemble", "n", "seed"):
            if values.get(key) is None:
                raise UsageError(f"rii: give --matrix, or --ensemble/--n/--seed (missing --{key})")
    if name == "opnorm" and values.get("multiple") is None and values.get("grid") is None:
        raise UsageError("opnorm: missing required flag --multiple (or --grid)")
    for key in ("n", "trials"):
        if values.get(key) is not None and values[key] < 1:
            raise UsageError(f"--{key} must be >= 1")
    if values["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    allowed = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in allowed})


class _Failure(Exception):
    """Computation finished but a check failed; output is still written."""


def _emit(config, text):
    if config.out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(config.out)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _stat_spec(config):
    kind = STATS[config.stat]
    if kind == mc.SK_SB:
        if config.k is not None and config.c0 is not None:
            raise UsageError("tail --stat sk: give --k (grid over t) or --c0 (grid over k), not both")
        return mc.StatisticSpec(kind, k=config.k, threshold=config.c0)
    return mc.StatisticSpec(kind)


def _run_tail(config):
    est = mc.estimate_tail(
        _stat_spec(config), config.ensemble, config.n, config.grid_values(),
        config.trials, config.seed, config.threads,
    )
    return est.to_csv()


def _run_fit(config):
    try:
        est = mc.TailEstimate.from_csv(Path(config.infile).read_text())
    except OSError as exc:
        raise UsageError(f"--in: cannot read {config.infile}: {exc}") from None
    return mc.fit_quadratic_exponent(est).to_csv()


def _run_rii(config):
    if config.matrix is not None:
        try:
            t = read_matrix(config.matrix)
        except OSError as exc:
            raise UsageError(f"--matrix: cannot read {config.matrix}: {exc}") from None
    else:
        t = sample_matrix(config.ensemble, config.n, config.seed, 0).entries
    cert = select_invertible_subset(t, config.eps)
    if not verify_certificate(t, cert):
        raise _Failure("certificate failed independent verification")
    return "eps,ell,required_size,required_bound,achieved,J\n" + cert.csv_line() + "\n"


def _run_trace(config):
    rows = [TRACE_HEADER]
    unsound = 0
    for trial in range(config.trials):
        a = sample_matrix(config.ensemble, config.n, config.seed, trial).entries
        tr = trace_chain(a, config.k, config.gamma, config.c0, seed_trace=(config.seed, trial))
        unsound += not tr.sound
        rows.append(tr.csv_row())
    text = "\n".join(rows) + "\n"
    if unsound:
        raise _Failure(f"{unsound} trace(s) violated the inequality chain", text)
    return text


def _run_verify(config):
    n = config.n
    ks = sorted({1, max(1, n // 4), n} if config.k is None else {config.k})
    rows = ["trial,frobenius_rel,nsm_residual,frame_orth,frame_prop1,frame_norms,ok"]
    failures = 0
    for trial in range(config.trials):
        a = sample_matrix(config.ensemble, n, config.seed, trial).entries
        summary = spectral_summary(a)
        fro = frobenius_residual(a, summary)
        ok = fro <= 1e-10
        nsm = math.nan
        if not summary.singular and summary.kappa <= 1e8:
            nsm = negative_second_moment_residual(a)
            ok &= nsm <= 1e-8
        worst = {"orthonormality": 0.0, "prop1": 0.0, "norms": 0.0}
        for k in ks:
            err = frame_errors(a, bottom_frame(a, k))
            ok &= frame_ok(err)
            worst = {key: max(worst[key], err[key]) for key in worst}
        failures += not ok
        rows.append(
            f"{trial},{fro!r},{nsm!r},{worst['orthonormality']!r},"
            f"{worst['prop1']!r},{worst['norms']!r},{int(ok)}"
        )
    summary_line = "# all identities passed" if not failures else f"# {failures} trial(s) failed"
    text = "\n".join(rows + [summary_line]) + "\n"
    if failures:
        raise _Failure(summary_line[2:], text)
    print(summary_line[2:], file=sys.stderr)
    return text


def _run_dist(config):
    return mc.distance_concentration(
        config.ensemble, config.n, config.ell, config.trials, config.seed, config.mode, config.threads,
    ).to_csv()


def _run_opnorm(config):
    grid = [config.multiple] if config.multiple is not None else config.grid_values()
    est = mc.estimate_tail(
        mc.StatisticSpec(mc.OPNORM), config.ensemble, config.n, grid,
        config.trials, config.seed, config.threads,
    )
    return est.to_csv()


_DISPATCH = {
    "tail": _run_tail, "fit": _run_fit, "rii": _run_rii, "trace": _run_trace,
    "verify": _run_verify, "dist": _run_dist, "opnorm": _run_opnorm,
}


def run(config):
    """Execute a parsed config; returns the process exit status."""
    header = config.header() + "\n"
    try:
        body = _DISPATCH[config.subcommand](config)
    except UsageError as exc:
        print(f"rmlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rmlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _Failure as exc:
        print(f"rmlab: check failed: {exc.args[0]}", file=sys.stderr)
        if len(exc.args) > 1:
            # diagnostics go to stderr; no partial CSV is written to --out
            sys.stderr.write(exc.args[1])
        return EXIT_FAILED
    except UndefinedRatioError as exc:
        print(f"rmlab: undefined ratio: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except NoCertificateError as exc:
        print(f"rmlab: {exc}", file=sys.stderr)
        if exc.best is not None:
            print(f"rmlab: best attempt: {exc.best.csv_line()}", file=sys.stderr)
        return EXIT_FAILED
    except InsufficientDataError as exc:
        print(f"rmlab: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except RmlabError as exc:
        print(f"rmlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _emit(config, header + body)
    except OSError as exc:
        print(f"rmlab: error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(f"rmlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


def body_lines(text):
    """CSV body of an rmlab output (comment lines dropped)."""
    return [ln for ln in text.splitlines() if not ln.startswith("#")]
