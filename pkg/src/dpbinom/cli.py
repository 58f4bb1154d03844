"""Command-line interface.

Every inference subcommand reads a stored private summary, so the raw count is
touched once, by ``privatize``. Results are JSON on stdout (CSV for tabular
output); failures are a JSON object on stderr with exit status 2 for invalid
input and 3 for numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .distributions import PrivacyParams
from .errors import ConvergenceError, DomainError
from .intervals import (
    ci_approx_umpu,
    ci_bonferroni,
    ci_lower,
    ci_umau,
    ci_upper,
    confidence_distribution,
)
from .nonparametric import PairedSample, TwoSample, median_test, sign_test
from .one_sided import PrivateSummary, decide, privatize, test_vector_one_sided, ump_pvalue
from .simulation import SimConfig, SimResult, run_figure
from .two_sided import approx_pvalue, bonferroni_pvalue, umau_pvalue

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 2, 3

TEST_SIDES = ("greater", "less", "bonferroni", "umpu-approx", "umau")
CI_KINDS = {
    "lower": ci_lower,
    "upper": ci_upper,
    "bonferroni": ci_bonferroni,
    "approx": ci_approx_umpu,
    "umau": ci_umau,
}
FIGURE_GROUPS = {"1": ("1",), "2": ("2",), "power": ("3", "4", "5", "6"), "widths": ("7", "8")}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise DomainError(message)


# ---------------------------------------------------------------------------
# output


def _encode(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        s = format(v, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    return json.dumps(obj)


def _emit(obj, out=None):
    text = _encode(obj) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _provenance(summary: PrivateSummary, seed) -> dict:
    return {
        "epsilon": summary.privacy.epsilon,
        "delta": summary.privacy.delta,
        "n": summary.n,
        "seed": seed,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# inputs


def _privacy(args) -> PrivacyParams:
    if args.epsilon is None:
        raise DomainError("--epsilon is required")
    return PrivacyParams(args.epsilon, args.delta)


def _load_summary(args) -> tuple[PrivateSummary, object]:
    """``--summary`` is a JSON file from ``privatize`` or an inline ``z``."""
    src = args.summary
    if src is None:
        raise DomainError("--summary is required")
    try:
        z = float(src)
    except ValueError:
        z = None
    if z is not None and not os.path.exists(src):
        if not math.isfinite(z):
            raise DomainError(f"summary z must be finite, got {src}")
        if args.n is None:
            raise DomainError("an inline summary needs --n and --epsilon")
        return PrivateSummary(z=z, n=int(args.n), privacy=_privacy(args)), None
    try:
        with open(src, encoding="utf-8") as fh:
            d = json.load(fh)
        return PrivateSummary.from_dict(d), d.get("seed")
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read summary {src!r}: {exc}") from None


def _read_table(path: str) -> np.ndarray:
    """Numeric CSV with an optional header row, as a 2-D array."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DomainError(f"cannot read {path!r}: {exc}") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        arr = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DomainError(f"non-numeric entry in {path!r}: {exc}") from None
    if arr.size == 0:
        raise DomainError(f"{path!r} holds no data rows")
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise DomainError(f"{path!r} must be a rectangular table of finite numbers")
    return arr


def _need_seed(args):
    if args.seed is None:
        raise DomainError("--seed is required for randomized subcommands")
    return np.random.default_rng(args.seed)


# ---------------------------------------------------------------------------
# subcommands


def cmd_privatize(args) -> int:
    privacy = _privacy(args)
    if args.x is None or args.n is None:
        raise DomainError("--x and --n are required")
    if args.out and os.path.exists(args.out) and not args.force:
        raise DomainError(
            f"{args.out} already holds a release; a second release spends more budget (use --force)"
        )
    summary = privatize(args.x, args.n, privacy, _need_seed(args))
    d = summary.to_dict()
    d.update(seed=args.seed, version=__version__)
    _emit(d, args.out)
    return EXIT_OK


def cmd_test(args) -> int:
    if not 0 < args.alpha < 1:
        raise DomainError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if not 0 < args.theta0 < 1:
        raise DomainError(f"--theta0 must lie in (0, 1), got {args.theta0}")
    if args.x is not None:
        return _raw_test(args)
    summary, seed = _load_summary(args)
    z, n, privacy = summary.z, summary.n, summary.privacy
    if summary.null_pmf_kind != "binomial":
        raise DomainError("the test subcommand expects a binomial summary")
    if args.side in ("greater", "less"):
        p = ump_pvalue(z, n, args.theta0, privacy, args.side)
    elif args.side == "bonferroni":
        p = bonferroni_pvalue(z, n, args.theta0, privacy)
    elif args.side == "umpu-approx":
        p = approx_pvalue(z, n, args.theta0, privacy)
    else:
        p = umau_pvalue(z, n, args.theta0, privacy)
    out = {"p_value": float(p), "reject": bool(p <= args.alpha), "side": args.side,
           "theta0": args.theta0, "alpha": args.alpha, "z": z}
    out.update(_provenance(summary, seed))
    _emit(out, args.out)
    return EXIT_OK


def _raw_test(args) -> int:
    if args.side not in ("greater", "less"):
        raise DomainError("raw-count mode supports only --side greater|less")
    if args.n is None:
        raise DomainError("--n is required with --x")
    print(
        "warning: testing a raw count; the randomized decision is itself the private "
        "release and no summary is stored",
        file=sys.stderr,
    )
    privacy = _privacy(args)
    rng = _need_seed(args)
    tv = test_vector_one_sided(args.n, args.theta0, args.alpha, privacy, args.side)
    dec = decide(tv, args.x, rng)
    out = {"reject": dec.reject, "rejection_probability": dec.rejection_probability,
           "side": args.side, "theta0": args.theta0, "alpha": args.alpha,
           "epsilon": privacy.epsilon, "delta": privacy.delta, "n": int(args.n),
           "seed": args.seed, "version": __version__}
    _emit(out, args.out)
    return EXIT_OK


def cmd_ci(args) -> int:
    if not 0 < args.alpha < 1:
        raise DomainError(f"--alpha must lie in (0, 1), got {args.alpha}")
    summary, seed = _load_summary(args)
    res = CI_KINDS[args.kind](summary.z, summary.n, args.alpha, summary.privacy)
    out = res.to_dict()
    out.update(_provenance(summary, seed))
    _emit(out, args.out)
    return EXIT_OK


def cmd_confdist(args) -> int:
    if args.grid_size < 2:
        raise DomainError("--grid-size must be >= 2")
    summary, _ = _load_summary(args)
    cd = confidence_distribution(summary.z, summary.n, summary.privacy,
                                 np.linspace(0.0, 1.0, args.grid_size))
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "confidence"])
        for t, v in zip(cd.grid, cd.values):
            w.writerow([format(t, ".17g"), format(v, ".17g")])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _emit_np(result, args, privacy):
    out = result.to_dict()
    out.update(seed=args.seed, version=__version__)
    _emit(out, args.out)
    return EXIT_OK


def cmd_sign_test(args) -> int:
    privacy = _privacy(args)
    rng = _need_seed(args)
    if args.input is None:
        raise DomainError("--input is required")
    table = _read_table(args.input)
    if table.shape[1] != 2:
        raise DomainError("paired data needs exactly two columns")
    res = sign_test(PairedSample(table[:, 0], table[:, 1]), args.theta0, privacy, rng, args.alternative)
    return _emit_np(res, args, privacy)


def cmd_median_test(args) -> int:
    privacy = _privacy(args)
    rng = _need_seed(args)
    if args.input is not None:
        table = _read_table(args.input)
        if table.shape[1] != 2:
            raise DomainError("two-sample input needs exactly two columns")
        xs, ys = table[:, 0], table[:, 1]
    elif args.xs and args.ys:
        xs, ys = _read_table(args.xs).ravel(), _read_table(args.ys).ravel()
    else:
        raise DomainError("give --input or both --xs and --ys")
    res = median_test(TwoSample(xs, ys), privacy, rng, args.alternative)
    return _emit_np(res, args, privacy)


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise DomainError("--seed is required for randomized subcommands")
    overrides = {"seed": args.seed, "workers": args.workers}
    for key in ("replicates", "epsilon", "delta", "alpha"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    rows, configs = [], []
    for fig in FIGURE_GROUPS[args.figure]:
        cfg = SimConfig.for_figure(fig, **overrides)
        res = run_figure(cfg)
        rows.extend(res.rows)
        configs.append(res.manifest(__version__)["config"])
    combined = SimResult(cfg, rows)
    if args.out:
        if os.path.exists(args.out) and not args.force:
            raise DomainError(f"{args.out} exists (use --force)")
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            combined.to_csv(fh)
        manifest = {"figure": args.figure, "seed": args.seed, "version": __version__, "configs": configs}
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(_encode(manifest) + "\n")
    else:
        combined.to_csv(sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpbinom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def budget(sp, required=True):
        sp.add_argument("--epsilon", type=float, required=required)
        sp.add_argument("--delta", type=float, default=0.0)

    def summary_args(sp):
        sp.add_argument("--summary", help="summary JSON file or an inline z value")
        sp.add_argument("--n", type=int, help="sample size for an inline z")
        budget(sp, required=False)
        sp.add_argument("--out")

    sp = sub.add_parser("privatize", help="release z = x + Tulap noise")
    sp.add_argument("--x", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    budget(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_privatize)

    sp = sub.add_parser("test", help="p-value and decision from a summary")
    summary_args(sp)
    sp.add_argument("--theta0", type=float, required=True)
    sp.add_argument("--side", choices=TEST_SIDES, default="greater")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--x", type=int, help="raw count (testing only; prints a privacy warning)")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("ci", help="confidence interval from a summary")
    summary_args(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--kind", choices=tuple(CI_KINDS), default="approx")
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("confdist", help="confidence distribution as CSV")
    summary_args(sp)
    sp.add_argument("--grid-size", type=int, default=101)
    sp.set_defaults(func=cmd_confdist)

    for name, func in (("sign-test", cmd_sign_test), ("median-test", cmd_median_test)):
        sp = sub.add_parser(name)
        budget(sp)
        sp.add_argument("--input", help="CSV with two numeric columns and a header")
        sp.add_argument("--alternative", choices=("greater", "less", "two-sided"), default="greater")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--out")
        if name == "sign-test":
            sp.add_argument("--theta0", type=float, default=0.5)
        else:
            sp.add_argument("--xs")
            sp.add_argument("--ys")
        sp.set_defaults(func=func)

    sp = sub.add_parser("simulate", help="run an experiment and write CSV")
    sp.add_argument("--figure", choices=tuple(FIGURE_GROUPS), required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out")
    sp.add_argument("--force", action="store_true")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)
    return p


def _fail(kind: str, exc: Exception, code: int) -> int:
    sys.stderr.write(_encode({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except ConvergenceError as exc:
        return _fail("convergence_error", exc, EXIT_CONVERGENCE)
    except (DomainError, ValueError, IndexError) as exc:
        return _fail("validation_error", exc, EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
