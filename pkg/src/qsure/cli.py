"""Command-line front end: ``qsure COMMAND --model PATH [flags]``.

Exit codes: 0 whenever a computation finished (verdicts such as "arbitrage"
live in the report), 2 for usage and validation errors, 3 when an internal
consistency check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from . import core, market, risk
from .errors import ArbitrageError, InvariantError, QsError, SizeError, ValidationError
from .files import Report, digest, emit, load, model_to_dict
from .numeric import EXACT, FLOAT, convert, is_zero, parse_number

log = logging.getLogger("qsure")

COMMANDS = ("validate", "capacity", "na", "martingale-measures", "price", "risk", "reduce", "sensitivity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"usage: {message}")


def build_parser():
    p = _Parser(prog="qsure", description="Quasi-sure analysis, robust FTAP and superhedging on finite spaces.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True, help="model file, or the name of a bundled fixture")
    p.add_argument("--payoff", help="payoff name from the model file")
    p.add_argument("--mode", choices=(EXACT, FLOAT), default=FLOAT)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--functional", default="worst_case", choices=sorted(risk.ZOO))
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized probes")
    p.add_argument("--event", help="comma-separated outcome labels (capacity)")
    p.add_argument("--alpha", default="1/2", help="AVaR level (functional avar)")
    p.add_argument("--prior", type=int, default=0, help="prior index (functional expectation)")
    p.add_argument("--level", help="level a of the set {f <= a} (sensitivity)")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing (breaks byte-determinism)")
    return p


def _strategy_rows(model, H):
    labels = model.space.outcomes
    rows = []
    for (t, b, j), v in H.block_values(model).items():
        block = model.filtration.partitions[t - 1][b]
        rows.append({"t": t, "block": [labels[i] for i in block], "asset": j, "holding": v})
    return rows


def _payoff(mf, args, mode):
    if not args.payoff:
        raise ValidationError(f"command {args.command!r} needs --payoff")
    return tuple(convert(v, mode) for v in mf.payoff(args.payoff))


def _cmd_validate(mf, args, mode, rep):
    support, polar = core.polar_analysis(mf.family)
    rep.verdicts["valid"] = True
    rep.results.update(
        outcomes=len(mf.space),
        dates=mf.model.T + 1,
        assets=mf.model.d,
        priors=len(mf.family),
        qs_support=sorted(support, key=mf.space.outcomes.index),
        polar=sorted(polar, key=mf.space.outcomes.index),
        payoffs=sorted(mf.payoffs),
    )


def _cmd_capacity(mf, args, mode, rep):
    fam = mf.family.to_mode(mode)
    support, polar = core.polar_analysis(fam)
    if args.event is not None:
        labels = [s for s in (x.strip() for x in args.event.split(",")) if s]
        rep.results["event"] = labels
        rep.results["capacity"] = core.capacity(fam, labels)
        rep.verdicts["polar"] = fam.is_polar(fam.event(labels))
    rep.results["atoms"] = {lbl: core.capacity(fam, [lbl]) for lbl in fam.space.outcomes}
    rep.results["qs_support"] = sorted(support, key=fam.space.outcomes.index)
    rep.results["polar_atoms"] = sorted(polar, key=fam.space.outcomes.index)


def _cmd_na(mf, args, mode, rep):
    report = market.ftap_check(mf.model, mf.family, mode)
    rep.verdicts["na"] = report.na_verdict
    rep.verdicts["polytope_equivalent_to_family"] = report.polytope_equivalent_to_family
    rep.verdicts["ftap_agree"] = report.agree
    rep.results["max_martingale_mass"] = report.max_masses
    if not report.na.no_arbitrage:
        rep.certificates["strategy"] = _strategy_rows(mf.model, report.na.strategy)
        rep.certificates["outcome"] = report.na.outcome
        rep.certificates["gains"] = mf.space.render(report.na.gains)


def _cmd_mm(mf, args, mode, rep):
    try:
        poly = market.martingale_polytope(mf.model, mf.family, enumerate_vertices=True, mode=mode)
        vertices = poly.vertices
    except SizeError as exc:
        poly = market.martingale_polytope(mf.model, mf.family, mode=mode)
        vertices = None
        rep.results["note"] = str(exc)
    rep.verdicts["empty"] = poly.empty
    rep.results["constraints"] = len(poly.rows)
    if vertices is not None:
        rep.results["vertices"] = [mf.space.render(v) for v in vertices]
        rep.table = (["vertex", *mf.space.outcomes], [(k, *v) for k, v in enumerate(vertices)])


def _cmd_price(mf, args, mode, rep):
    X = _payoff(mf, args, mode)
    rep.inputs["payoff"] = args.payoff
    try:
        res = market.superhedge(mf.model, mf.family, X, mode)
    except ArbitrageError as exc:
        rep.verdicts["na"] = "arbitrage"
        rep.results["price"] = None
        na = exc.certificate
        rep.certificates["strategy"] = _strategy_rows(mf.model, na.strategy)
        rep.certificates["outcome"] = na.outcome
        return
    if mode == FLOAT and abs(res.gap) > args.tol:
        raise InvariantError(f"duality gap {res.gap} exceeds tolerance {args.tol}")
    rep.verdicts["na"] = "no_arbitrage"
    rep.results.update(
        price=res.price,
        dual_value=res.dual_value,
        gap=res.gap,
        lower_price=res.lower_price,
        interval=[res.lower_price, res.price],
    )
    rep.certificates["strategy"] = _strategy_rows(mf.model, res.strategy)
    rep.certificates["dual_measure"] = mf.space.render(res.dual_measure)


def _functional(mf, args, mode):
    fam = mf.family.to_mode(mode)
    alpha = parse_number(args.alpha, mode)
    if args.prior < 0 or args.prior >= len(fam):
        raise ValidationError(f"--prior {args.prior} out of range")
    return risk.from_name(args.functional, fam, alpha=alpha, prior=args.prior)


def _cmd_risk(mf, args, mode, rep):
    f = _functional(mf, args, mode)
    X = _payoff(mf, args, mode)
    rep.inputs.update(payoff=args.payoff, functional=args.functional)
    value = f(X)
    search = risk.bidual_convex_search(f, X)
    rep.results.update(value=value, bidual=search.value, gap=value - search.value)
    rep.certificates["dual_measure"] = mf.space.render(search.measure)
    if f.linear_pieces is not None:
        rep.results["bidual_quasiconvex"] = risk.bidual_quasiconvex(f, X)
    if mode == EXACT and f.linear_pieces is not None and not is_zero(value - search.value):
        raise InvariantError(f"exact bidual {search.value} differs from f(X) = {value}")
    rep.verdicts["weak_duality"] = float(search.value) <= float(value) + args.tol


def _cmd_reduce(mf, args, mode, rep):
    idx = core.reduce_family_indices(mf.family)
    reduced = core.reduce_family(mf.family)
    rep.results.update(selected=idx, size=len(idx), original_size=len(mf.family), support_size=len(mf.family.qs_support))
    rep.verdicts["equivalent"] = core.family_dominance(mf.family, reduced) == core.EQUIVALENT


def _cmd_sensitivity(mf, args, mode, rep):
    f = _functional(mf, args, mode)
    if args.level is not None:
        level = parse_number(args.level, mode)
    elif args.payoff:
        level = f(_payoff(mf, args, mode))
    else:
        level = convert(0, mode)
    rep.inputs.update(functional=args.functional, level=level)
    verdict = risk.sensitivity_check(risk.level_set(f, level), f.reduction_family, f.family, seed=args.seed)
    rep.verdicts["sensitivity"] = verdict.status
    rep.results["method"] = verdict.method
    if verdict.witness is not None:
        rep.certificates["witness"] = mf.space.render(verdict.witness)


HANDLERS = {
    "validate": _cmd_validate,
    "capacity": _cmd_capacity,
    "na": _cmd_na,
    "martingale-measures": _cmd_mm,
    "price": _cmd_price,
    "risk": _cmd_risk,
    "reduce": _cmd_reduce,
    "sensitivity": _cmd_sensitivity,
}


def run(command, args):
    """Dispatch ``command`` and return its :class:`Report`."""
    mf = load(args.model)
    mode = args.mode
    inputs = {
        "model": model_to_dict(mf),
        "mode": mode,
        "seed": args.seed,
        "flags": {k: getattr(args, k) for k in ("payoff", "functional", "event", "alpha", "prior", "level", "tol")},
    }
    rep = Report(command, {"digest": digest(command, inputs)}, mode)
    start = time.perf_counter()
    HANDLERS[command](mf, args, mode, rep)
    if args.timing:
        rep.timing = {"seconds": round(time.perf_counter() - start, 6)}
    return rep


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        rep = run(args.command, args)
        data = emit(rep, args.format)
    except ValidationError as exc:
        print(f"error: {exc}", file=stderr)
        for issue in exc.issues:
            if issue != str(exc):
                print(f"  - {issue}", file=stderr)
        return 2
    except InvariantError as exc:
        print(f"internal invariant breached: {exc}", file=stderr)
        return 3
    except QsError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    out = getattr(stdout, "buffer", None)
    if out is not None:
        out.write(data)
        out.flush()
    else:
        stdout.write(data.decode())
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
