"""Command-line entry points: train, verify, report and stress.

Exit codes: 0 success, 1 invalid configuration or usage, 2 a certification
check failed, 3 an I/O error. Output directories default to subdirectories of
``$MHPO_OUT_ROOT`` (or ``./runs`` when unset).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import charts, config, lab, runio
from .errors import ConfigError, DomainError
from .trainer import train

log = logging.getLogger("mhpo")

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_IO = 0, 1, 2, 3
OUT_ROOT_ENV = "MHPO_OUT_ROOT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which this tool reserves for failed checks
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def out_root() -> Path:
    return Path(os.environ.get(OUT_ROOT_ENV, "runs"))


def split_overrides(extra: list[str]) -> dict[str, str]:
    """Turn ``--section.key value`` (or ``--section.key=value``) pairs into a dict."""
    out: dict[str, str] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise UsageError(f"unrecognized argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"{tok} needs a value")
            value = extra[i + 1]
            i += 2
        out[name] = value
    return out


def cmd_train(args, extra) -> int:
    overrides = split_overrides(extra)
    if args.seed is not None:
        overrides["train.seed"] = str(args.seed)
    resolved = config.load(args.config, overrides)
    text = config.dumps(resolved)
    out = Path(args.out) if args.out else out_root() / f"{resolved['report']['label']}-seed{resolved['train']['seed']}"
    print(text, end="")
    cfg = config.build(resolved)

    def progress(rec):
        if rec.eval_success is not None and not args.quiet:
            log.info("step %d reward %.3f eval %.3f grad_norm %.4g", rec.step, rec.mean_reward,
                     rec.eval_success, rec.grad_norm)

    _, run = train(cfg, progress)
    runio.write_run(out, run, resolved, text)
    if resolved["report"]["charts"]:
        _charts(out, [(resolved["report"]["label"], runio.read_log_csv(out / "log.csv"))])
    print(f"best {run.best.eval_success:.3f} at step {run.best.step}, latest {run.latest.eval_success:.3f}, "
          f"delta {run.delta:+.3f}, incidents {len(run.incidents)} -> {out}")
    return EXIT_OK


def cmd_verify(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments {extra}")
    rep = lab.run_suite(args.suite)
    out = Path(args.out) if args.out else out_root() / "verify"
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.suite}.json").write_text(rep.to_json())
    (out / f"{args.suite}.txt").write_text(rep.to_text())
    print(rep.to_text(), end="")
    return EXIT_OK if rep.passed else EXIT_CHECK


def _charts(out: Path, runs) -> None:
    reward = {label: (cols["step"], cols["mean_reward"]) for label, cols in runs}
    grad = {label: (cols["step"], cols["grad_norm"]) for label, cols in runs}
    charts.write_chart(out / "reward.svg", reward, "Mean rollout reward", "step", "mean reward")
    charts.write_chart(out / "grad_norm.svg", grad, "Gradient norm", "step", "L2 norm (log scale)", log_y=True)


def cmd_report(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments {extra}")
    if not args.run_dirs:
        raise UsageError("report needs at least one run directory")
    loaded = []
    for d in args.run_dirs:
        got = runio.load_run(d)
        if got is not None:
            loaded.append(got)
    if not loaded:
        log.error("no readable runs among %s", args.run_dirs)
        return EXIT_IO
    out = Path(args.out) if args.out else out_root() / "report"
    out.mkdir(parents=True, exist_ok=True)
    labels = [f"{s['label']}-seed{s['seed']}" for s, _ in loaded]
    _charts(out, [(label, cols) for label, (_, cols) in zip(labels, loaded)])
    rows = charts.delta_rows([dict(s, label=label) for label, (s, _) in zip(labels, loaded)])
    (out / "best_vs_latest.csv").write_text(charts.table_csv(rows))
    table = charts.table_text(rows)
    means = charts.mean_delta_by_method(rows)
    table += "".join(f"mean delta {m}: {v:+.4f}\n" for m, v in sorted(means.items()))
    (out / "best_vs_latest.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_stress(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments {extra}")
    spec = lab.StressSpec(args.dist, mu=args.mu, sigma=args.sigma, alpha=args.alpha, mix=args.mix,
                          n_samples=args.n, advantage_distribution=args.adv, seed=args.seed)
    rows = lab.stress_compare(spec)
    out = Path(args.out) if args.out else out_root() / "stress"
    out.mkdir(parents=True, exist_ok=True)
    runio.write_stress_csv(rows, out / "stress.csv", out / "stress_hist.csv")
    rep = lab.certify_stress(spec)
    (out / "stress.json").write_text(rep.to_json())
    print(f"{spec.label}, {spec.n_samples} samples, {spec.advantage_distribution.value} advantages")
    for r in rows:
        print(f"  {r.transform:10s} zero-fraction {r.zero_fraction:.4f}  p99.9 {r.p999:.4g}  max {r.max:.4g}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mhpo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="run one training job; extra --section.key VALUE flags override the config")
    t.add_argument("--config", help="TOML run file (defaults are used when omitted)")
    t.add_argument("--out", help="run directory")
    t.add_argument("--seed", type=int, help="shorthand for --train.seed")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="run a certification suite")
    v.add_argument("suite", choices=lab.SUITES)
    v.add_argument("--out", help="report directory")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="charts and best-vs-latest table over run directories")
    r.add_argument("run_dirs", nargs="*")
    r.add_argument("--out", help="report directory")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("stress", help="compare coefficient distributions under synthetic ratio stress")
    s.add_argument("--dist", choices=[d.value for d in lab.RatioDist], default="lognormal")
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=1.5)
    s.add_argument("--mix", type=float, default=0.05)
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--adv", choices=[a.value for a in lab.AdvDist], default="rademacher")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_stress)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, extra)
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
