"""Command line interface.

Exit codes: 0 on success, 1 on bad input (parse or validation failures,
including usage errors), 2 when certification fails or is refused.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import TailBound
from .diameter import (
    component_diameters,
    conditional_subgaussian_diameters,
    orlicz_p_diameter,
    subgaussian_diameter,
)
from .errors import CertificationError, ConcdiamError, ParseError, ValidationError
from .montecarlo import ExperimentConfig, certify_bounds, resolve_statistic
from .spaces import (
    FiniteMetricSpace,
    GaussianLineSpace,
    MarkovProcessSpec,
    ProductSpec,
    load_space,
)
from .transport import tau_coefficients, tv_distance, wasserstein1
from .bounds import lipschitz_check, stability_bias_bound


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(v: float, digits: int) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf"
    return format(v, f".{digits}g")


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None


def _read_space(path: str):
    return load_space(_read_text(path))


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x.strip() != ""])
    except ValueError:
        raise ValidationError(f"expected comma-separated reals, got {text!r}") from None


def _write(path: str, content: str) -> None:
    Path(path).write_text(content)


def _cmd_diameter(args) -> int:
    space = _read_space(args.space)
    if isinstance(space, ProductSpec):
        deltas = component_diameters(space, args.tol)
        for i, d in enumerate(deltas, start=1):
            print(f"delta_sg[{i}] = {_fmt(d, args.digits)}")
        print(f"l2_norm = {_fmt(float(np.sqrt(np.sum(deltas ** 2))), args.digits)}")
    elif isinstance(space, MarkovProcessSpec):
        deltas = conditional_subgaussian_diameters(space, args.tol)
        for i, d in enumerate(deltas, start=1):
            print(f"delta_sg_bar[{i}] = {_fmt(d, args.digits)}")
    else:
        est = subgaussian_diameter(space, args.tol)
        print(f"delta_sg = {_fmt(est.sigma_star, args.digits)}")
    return 0


def _cmd_orlicz(args) -> int:
    space = _read_space(args.space)
    if isinstance(space, ProductSpec):
        vals = [orlicz_p_diameter(c, args.p, args.tol) for c in space.components]
        for i, d in enumerate(vals, start=1):
            print(f"delta_or[{i}] = {_fmt(d, args.digits)}")
        norm = float(np.sum(np.asarray(vals) ** args.p) ** (1.0 / args.p))
        print(f"lp_norm = {_fmt(norm, args.digits)}")
    elif isinstance(space, (FiniteMetricSpace, GaussianLineSpace)):
        print(f"delta_or = {_fmt(orlicz_p_diameter(space, args.p, args.tol), args.digits)}")
    else:
        raise ValidationError("orlicz needs a finite, gaussian, or product space")
    return 0


def _cmd_transport(args) -> int:
    space = _read_space(args.space)
    if not isinstance(space, FiniteMetricSpace):
        raise ValidationError("transport needs a finite space")
    mu, nu = _floats(args.mu), _floats(args.nu)
    print(f"tv = {_fmt(tv_distance(mu, nu), args.digits)}")
    dist, coupling = wasserstein1(space, mu, nu)
    print(f"w1 = {_fmt(dist, args.digits)}")
    if args.coupling_csv:
        lines = ["i,j,mass"]
        rows, cols = np.nonzero(coupling.joint)
        for r, c in zip(rows, cols):
            lines.append(f"{r},{c},{_fmt(coupling.joint[r, c], args.digits)}")
        _write(args.coupling_csv, "\n".join(lines) + "\n")
    return 0


def _cmd_tau(args) -> int:
    chain = _read_space(args.chain)
    if not isinstance(chain, MarkovProcessSpec):
        raise ValidationError("tau needs a markov space")
    profile = tau_coefficients(chain, mode=args.mode, workers=args.threads)
    for i, v in enumerate(profile.tau_bar, start=1):
        print(f"tau_bar[{i}] = {_fmt(v, args.digits)}")
    print(f"total = {_fmt(profile.total(), args.digits)}")
    if args.csv:
        lines = ["i,tau_bar"] + [
            f"{i},{_fmt(v, args.digits)}"
            for i, v in enumerate(profile.tau_bar, start=1)
        ]
        _write(args.csv, "\n".join(lines) + "\n")
    return 0


def _make_bound(args) -> TailBound:
    kind = args.kind
    if kind == "mcdiarmid":
        if args.w is None:
            raise ValidationError("mcdiarmid needs --w")
        return TailBound.mcdiarmid(_floats(args.w))
    if kind == "subgaussian":
        if args.deltas is None:
            raise ValidationError("subgaussian needs --deltas")
        return TailBound.subgaussian(_floats(args.deltas))
    if kind == "mixing":
        if args.deltas is None or args.tau is None:
            raise ValidationError("mixing needs --deltas and --tau")
        return TailBound.mixing(_floats(args.deltas), _floats(args.tau))
    if kind == "orlicz":
        if args.deltas is None or args.p is None:
            raise ValidationError("orlicz needs --deltas and --p")
        return TailBound.orlicz(_floats(args.deltas), args.p)
    if kind == "stability":
        if args.beta is None or args.delta_sg is None or args.n is None:
            raise ValidationError("stability needs --beta, --delta-sg, and --n")
        return TailBound.stability(args.beta, args.delta_sg, args.n)
    raise ValidationError(f"unknown bound kind {kind!r}")


def _cmd_bound(args) -> int:
    bound = _make_bound(args)
    t = _floats(args.t)
    vals = np.atleast_1d(bound.evaluate(t))
    for ti, v in zip(t, vals):
        print(f"{bound.name}({_fmt(ti, args.digits)}) = {_fmt(v, args.digits)}")
    if args.csv:
        lines = [f"t,{bound.name}"] + [
            f"{_fmt(ti, args.digits)},{_fmt(v, args.digits)}" for ti, v in zip(t, vals)
        ]
        _write(args.csv, "\n".join(lines) + "\n")
    return 0


def _print_table(csv_text: str) -> None:
    rows = [line.split(",") for line in csv_text.strip().split("\n")]
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    for r in rows:
        print("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))


def _cmd_certify(args) -> int:
    doc = json.loads(_read_text(args.config))
    config = ExperimentConfig.from_doc(doc, base_dir=Path(args.config).parent)
    report = certify_bounds(config, workers=args.threads)
    csv_text = report.to_csv(digits=args.digits)
    _print_table(csv_text)
    print(f"centering = {report.centering} ({_fmt(report.center, args.digits)})")
    for name, ok in zip(report.bound_names, report.verdicts):
        print(f"bound {name}: {'PASS' if ok else 'FAIL'}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    if args.csv:
        _write(args.csv, csv_text)
    return 0 if report.passed else 2


def _cmd_lipschitz(args) -> int:
    space = _read_space(args.space)
    if isinstance(space, (FiniteMetricSpace, GaussianLineSpace)):
        space = ProductSpec((space,))
    if isinstance(space, MarkovProcessSpec):
        space = ProductSpec((space.state_space,) * space.horizon)
    fn, label = resolve_statistic(space, args.statistic)
    report = lipschitz_check(
        space, fn, args.constant, trials=args.trials, seed=args.seed
    )
    print(f"statistic = {label}")
    print(f"mode = {report.mode}")
    print(f"pairs = {report.n_pairs}")
    print(f"worst_ratio = {_fmt(report.worst_ratio, args.digits)}")
    if report.witness is not None:
        print(f"witness = {report.witness}")
    print(f"verdict: {'OK' if report.passed else 'VIOLATED'}")
    return 0


def _cmd_stability(args) -> int:
    print(
        f"bias_bound = {_fmt(stability_bias_bound(args.beta, args.delta_sg), args.digits)}"
    )
    if args.epsilon is not None:
        if args.n is None:
            raise ValidationError("excess-risk evaluation needs --n")
        bound = TailBound.stability(args.beta, args.delta_sg, args.n)
        for eps, v in zip(
            _floats(args.epsilon), np.atleast_1d(bound.evaluate(_floats(args.epsilon)))
        ):
            print(f"excess_bound({_fmt(eps, args.digits)}) = {_fmt(v, args.digits)}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="concdiam",
        description="Concentration diameters, mixing coefficients, and tail bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--digits", type=int, default=12, help="significant digits")

    p = sub.add_parser("diameter", help="subgaussian diameter of a space")
    p.add_argument("--space", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(fn=_cmd_diameter)

    p = sub.add_parser("orlicz", help="orlicz p-diameter of a space")
    p.add_argument("--space", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(fn=_cmd_orlicz)

    p = sub.add_parser("transport", help="tv and wasserstein-1 between two laws")
    p.add_argument("--space", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--coupling-csv")
    common(p)
    p.set_defaults(fn=_cmd_transport)

    p = sub.add_parser("tau", help="mixing coefficients of a markov chain")
    p.add_argument("--chain", required=True)
    p.add_argument("--mode", choices=["exact", "upper_bound"], default="exact")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv")
    common(p)
    p.set_defaults(fn=_cmd_tau)

    p = sub.add_parser("bound", help="evaluate a deviation bound")
    p.add_argument(
        "--kind",
        required=True,
        choices=["mcdiarmid", "subgaussian", "mixing", "orlicz", "stability"],
    )
    p.add_argument("--t", required=True, help="comma-separated thresholds")
    p.add_argument("--w")
    p.add_argument("--deltas")
    p.add_argument("--tau")
    p.add_argument("--p", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta-sg", dest="delta_sg", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--csv")
    common(p)
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("certify", help="monte carlo certification of bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--threads", type=int, default=1)
    common(p)
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("lipschitz", help="audit a statistic's lipschitz constant")
    p.add_argument("--space", required=True)
    p.add_argument("--statistic", required=True)
    p.add_argument("--constant", type=float, required=True)
    p.add_argument("--trials", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(fn=_cmd_lipschitz)

    p = sub.add_parser("stability", help="stability bias and excess-risk bounds")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--delta-sg", dest="delta_sg", type=float, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", help="comma-separated excess-risk levels")
    common(p)
    p.set_defaults(fn=_cmd_stability)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON: {e}", file=sys.stderr)
        return 1
    except CertificationError as e:
        print(f"certification refused: {e}", file=sys.stderr)
        return 2
    except ConcdiamError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
