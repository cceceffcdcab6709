"""Command-line interface: validate, estimate, fit, predict, bootstrap, compare.

Every subcommand is a pure function of its input files, flags and seed, so
re-runs produce byte-identical output. JSON artifacts carry full float
precision; human-readable tables round to three decimals.

Exit codes: 0 success, 1 domain violation (inadmissible data, degenerate
fit), 2 usage, I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bootstrap as bt
from . import model_selection as ms
from .datasets import EXPECTED, load_portfolio
from .errors import (
    InvalidTriangleData,
    ModelError,
    TriangleDataError,
    XolfreqError,
)
from .estimators import fit_negbin, fit_poisson, joint_mle
from .prediction import (
    conditional_law,
    predict_next_year_negbin,
    predict_next_year_poisson,
)
from .triangle import (
    TrianglePair,
    parse_exposure_csv,
    parse_triangle_csv,
    split_next_year_exposure,
    validate,
)

PREDICT_QUANTILES = (50, 75, 90, 95, 99)


def _read_file(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_parts(args):
    n_tri = parse_triangle_csv(_read_file(args.n_file))
    d_tri = parse_triangle_csv(_read_file(args.d_file))
    exposures = parse_exposure_csv(_read_file(args.exposure_file))
    return n_tri, d_tri, exposures


def _load_pair(args) -> TrianglePair:
    n_tri, d_tri, exposures = _load_parts(args)
    exposures = split_next_year_exposure(exposures, n_tri.n)
    return TrianglePair.build(n_tri, d_tri, exposures)


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit(payload: dict, args, human: str | None = None) -> None:
    text = _dump_json(payload)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if getattr(args, "json", False) or human is None:
        sys.stdout.write(text)
    else:
        print(human)


def _fmt_seq(values) -> str:
    return "  ".join(f"{v:.3f}" for v in values)


def cmd_validate(args) -> int:
    n_tri, d_tri, exposures = _load_parts(args)
    try:
        exposures = split_next_year_exposure(exposures, n_tri.n)
    except TriangleDataError as exc:
        return _fail(exc, code=2)
    report = validate(n_tri, d_tri, exposures)
    human = "ok" if report.ok else "\n".join(v.message for v in report.violations)
    _emit(report.to_dict(), args, human)
    return 0 if report.ok else 1


def cmd_estimate(args) -> int:
    pair = _load_pair(args)
    fit = fit_poisson(pair)
    human = (
        f"lambda_hat: {_fmt_seq(fit.lambda_hat)}\n"
        f"delta_hat:  {_fmt_seq(fit.delta_hat)}"
    )
    _emit(fit.to_dict(), args, human)
    return 0


def cmd_fit(args) -> int:
    pair = _load_pair(args)
    if args.model == "poisson":
        fit = fit_poisson(pair)
        payload = fit.to_dict()
        payload["loglik"] = ms.loglik_poisson(pair, fit)
        human = (
            f"lambda_hat: {_fmt_seq(fit.lambda_hat)}\n"
            f"delta_hat:  {_fmt_seq(fit.delta_hat)}\n"
            f"loglik:     {payload['loglik']:.3f}"
        )
    else:
        fit = fit_negbin(pair)
        payload = fit.to_dict()
        payload["lambda_hat"] = list(fit_poisson(pair).lambda_hat)
        if fit.degenerate:
            human = "negative-binomial fit degenerates to the Poisson limit (p1 -> 1)"
        else:
            human = (
                f"p1:    {fit.p1:.3f}\n"
                f"p:     {_fmt_seq(fit.p)}\n"
                f"r_hat: {_fmt_seq(fit.r_hat)}\n"
                f"loglik: {fit.loglik:.3f}"
            )
    _emit(payload, args, human)
    return 0


def _parse_target(tokens: list[str], n: int) -> tuple[str, list[tuple[int, int]]]:
    """Normalize a --target spec against triangle size ``n``.

    Returns (kind, cells); kind is 'next-year', 'cell' or 'ultimate'.
    """
    head = tokens[0]
    if head == "next-year":
        if len(tokens) != 1:
            raise argparse.ArgumentTypeError("next-year takes no indices")
        return "next-year", [(n + 1, n)]
    if head == "cell":
        if len(tokens) != 3:
            raise argparse.ArgumentTypeError("cell target needs two indices: cell I J")
        return "cell", [(int(tokens[1]), int(tokens[2]))]
    if head == "ultimate":
        if len(tokens) == 2:
            return "ultimate", [(int(tokens[1]), n)]
        if len(tokens) == 1:
            return "ultimate", [(i, n) for i in range(2, n + 1)]
        raise argparse.ArgumentTypeError("ultimate takes at most one origin index")
    raise argparse.ArgumentTypeError(f"unknown target {head!r}")


def cmd_predict(args) -> int:
    pair = _load_pair(args)
    kind, cells = _parse_target(args.target, pair.n)
    if kind != "next-year" and len(cells) != 1:
        raise argparse.ArgumentTypeError("predict needs a single target cell")
    if kind == "next-year":
        if pair.E.next_year is None:
            raise TriangleDataError(
                "next-year prediction needs an exposure row for origin n+1"
            )
        if args.model == "poisson":
            law = predict_next_year_poisson(fit_poisson(pair), pair.E.next_year)
        else:
            law = predict_next_year_negbin(fit_negbin(pair), pair.E.next_year)
    else:
        i, j = cells[0]
        fit = fit_poisson(pair) if args.model == "poisson" else fit_negbin(pair)
        law = conditional_law(fit, pair, i, j)
    payload = law.to_dict()
    payload["quantiles"] = {str(q): law.law.quantile(q / 100.0) for q in PREDICT_QUANTILES}
    if args.pmf_out:
        ks, probs = law.law.pmf_table()
        with open(args.pmf_out, "w", encoding="utf-8") as fh:
            fh.write("k,probability\n")
            for k, prob in zip(ks, probs):
                fh.write(f"{int(k)},{prob!r}\n")
    human = (
        f"target: cell({law.target[0]},{law.target[1]})  model: {law.model}\n"
        f"mean: {law.mean:.3f}  variance: {law.variance:.3f}\n"
        + "  ".join(f"q{q}={payload['quantiles'][str(q)]}" for q in PREDICT_QUANTILES)
    )
    _emit(payload, args, human)
    return 0


def cmd_bootstrap(args) -> int:
    pair = _load_pair(args)
    kind, cells = _parse_target(args.target, pair.n)
    config = bt.BootstrapConfig(
        sims=args.sims,
        master_seed=args.seed,
        model=args.model,
        fast_ultimate=args.fast_ultimate,
        workers=args.workers,
    )
    if kind == "next-year":
        if pair.E.next_year is None:
            raise TriangleDataError(
                "next-year simulation needs an exposure row for origin n+1"
            )
        if args.model == "poisson":
            result = bt.simulate_next_year_poisson(
                config, fit_poisson(pair), pair, pair.E.next_year
            )
        else:
            result = bt.simulate_next_year_negbin(
                config, fit_negbin(pair), pair, pair.E.next_year
            )
    else:
        if args.model == "poisson":
            result = bt.simulate_lower_triangle_poisson(config, fit_poisson(pair), pair, cells)
        else:
            result = bt.simulate_lower_triangle_negbin(config, fit_negbin(pair), pair, cells)
    if args.hist:
        if len(result.targets) != 1:
            raise argparse.ArgumentTypeError(
                "--hist needs a single-target run; pick one cell"
            )
        summary = next(iter(result.targets.values()))
        with open(args.hist, "w", encoding="utf-8") as fh:
            fh.write("k,count\n")
            for k, c in zip(summary.hist_values, summary.hist_counts):
                fh.write(f"{int(k)},{int(c)}\n")
    lines = []
    for key, summary in sorted(result.targets.items()):
        lines.append(
            f"cell({key}): mean={summary.mean:.3f} variance={summary.variance:.3f} "
            f"q50={summary.quantiles[50]} q95={summary.quantiles[95]}"
        )
    if result.poisson_fallbacks is not None:
        lines.append(f"poisson fallbacks: {result.poisson_fallbacks}/{result.sims}")
    _emit(result.to_dict(), args, "\n".join(lines))
    return 0


def cmd_compare(args) -> int:
    pair = _load_pair(args)
    comparison = ms.compare(pair)
    _emit(comparison.to_dict(), args, comparison.to_table())
    return 0


def _demo_row(name: str, computed, expected, tol: float) -> tuple[str, bool]:
    if isinstance(expected, tuple):
        ok = all(abs(c - e) <= tol for c, e in zip(computed, expected))
        return (
            f"{name:<28} computed: {_fmt_seq(computed)}\n"
            f"{'':<28} expected: {_fmt_seq(expected)}  [{'ok' if ok else 'MISMATCH'}]",
            ok,
        )
    ok = abs(computed - expected) <= tol
    return (
        f"{name:<28} computed: {computed:>9.3f}  expected: {expected:>9.3f}"
        f"  [{'ok' if ok else 'MISMATCH'}]",
        ok,
    )


def cmd_demo(args) -> int:
    label = {"1": "a", "2": "b"}.get(args.portfolio, args.portfolio)
    pair = load_portfolio(label)
    expected = EXPECTED[label]
    pois = fit_poisson(pair)
    rows: list[tuple[str, bool]] = []
    rows.append(_demo_row("lambda_hat", pois.lambda_hat, expected["lambda_hat"], 5e-4))
    rows.append(_demo_row("delta_hat", pois.delta_hat, expected["delta_hat"], 5e-4))
    law = predict_next_year_poisson(pois, pair.E.next_year)
    rows.append(
        _demo_row("next-year mean (poisson)", law.mean, expected["next_year_poisson_mean"], 5e-4)
    )
    nb = fit_negbin(pair)
    rows.append(
        _demo_row(
            "negbin degenerate", float(nb.degenerate), float(expected["negbin_degenerate"]), 0.0
        )
    )
    if not expected["negbin_degenerate"]:
        rows.append(_demo_row("p1", nb.p1, expected["p1"], 2e-3))
        rows.append(_demo_row("p", nb.p, expected["p"], 5e-3))
        nb_law = predict_next_year_negbin(nb, pair.E.next_year)
        rows.append(
            _demo_row("next-year mean (negbin)", nb_law.mean, expected["next_year_negbin_mean"], 5e-4)
        )
        rows.append(
            _demo_row(
                "next-year var (negbin)",
                nb_law.variance,
                expected["next_year_negbin_variance"],
                0.15,
            )
        )
        comparison = ms.compare(pair)
        rows.append(
            _demo_row("loglik poisson", comparison.loglik_poisson, expected["loglik_poisson"], 0.01)
        )
        rows.append(
            _demo_row("loglik negbin", comparison.loglik_negbin, expected["loglik_negbin"], 0.01)
        )
        rows.append(_demo_row("AIC poisson", comparison.aic_poisson, expected["aic_poisson"], 0.02))
        rows.append(_demo_row("AIC negbin", comparison.aic_negbin, expected["aic_negbin"], 0.02))
        joint = joint_mle(pair)
        rows.append(_demo_row("joint delta", joint.delta, expected["joint_delta"], 5e-3))
        rows.append(_demo_row("joint p", joint.p, expected["joint_p"], 5e-3))
    print(f"portfolio {label!r}")
    all_ok = True
    for text, ok in rows:
        print(text)
        all_ok = all_ok and ok
    print("all checks passed" if all_ok else "some checks MISMATCHED")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xolfreq",
        description="Frequency estimation for excess-of-loss claim-count triangles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    files = argparse.ArgumentParser(add_help=False)
    files.add_argument("--n-file", required=True, help="CSV of new excess claims")
    files.add_argument("--d-file", required=True, help="CSV of drops below the priority")
    files.add_argument("--exposure-file", required=True, help="CSV of exposures per origin")
    files.add_argument("--out", help="write the JSON artifact to this path")
    files.add_argument("--json", action="store_true", help="print JSON instead of a table")

    sub.add_parser("validate", parents=[files], help="check triangle admissibility")
    sub.add_parser("estimate", parents=[files], help="column estimates of rates and drops")

    fit = sub.add_parser("fit", parents=[files], help="fit one frequency model")
    fit.add_argument("--model", choices=("poisson", "negbin"), default="poisson")

    predict = sub.add_parser("predict", parents=[files], help="exact predictive law")
    predict.add_argument("--model", choices=("poisson", "negbin"), default="poisson")
    predict.add_argument(
        "--target",
        nargs="+",
        default=["next-year"],
        help="next-year | cell I J | ultimate I",
    )
    predict.add_argument("--pmf-out", help="write the pmf table CSV to this path")

    boot = sub.add_parser("bootstrap", parents=[files], help="parametric bootstrap")
    boot.add_argument("--model", choices=("poisson", "negbin"), default="poisson")
    boot.add_argument("--sims", type=int, default=100_000, help="number of simulations")
    boot.add_argument("--seed", type=int, default=0, help="master seed")
    boot.add_argument(
        "--target",
        nargs="+",
        default=["next-year"],
        help="next-year | ultimate [I] | cell I J",
    )
    boot.add_argument("--fast-ultimate", action="store_true", help="one-shot ultimate draws")
    boot.add_argument("--workers", type=int, default=1, help="worker threads (same output)")
    boot.add_argument("--hist", help="write the histogram CSV (k,count) to this path")

    sub.add_parser("compare", parents=[files], help="log-likelihood and AIC of both models")

    demo = sub.add_parser("demo", help="run the pipeline on a bundled portfolio")
    demo.add_argument("portfolio", choices=("a", "b", "1", "2"))

    return parser


_HANDLERS = {
    "validate": cmd_validate,
    "estimate": cmd_estimate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "bootstrap": cmd_bootstrap,
    "compare": cmd_compare,
    "demo": cmd_demo,
}


def _fail(exc: Exception, code: int) -> int:
    print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except InvalidTriangleData as exc:
        return _fail(exc, 1)
    except ModelError as exc:
        return _fail(exc, 1)
    except TriangleDataError as exc:
        return _fail(exc, 2)
    except argparse.ArgumentTypeError as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 2)
    except XolfreqError as exc:
        return _fail(exc, 1)


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
