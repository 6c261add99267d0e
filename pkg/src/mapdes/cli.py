"""Command line: ``mapdes train``, ``mapdes simulate`` and ``mapdes compare``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 missing Q-table.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import tempfile
from typing import Optional

from . import __version__
from .config import ConfigError, load_config, training_farm
from .metrics import (
    FIGURE_IDS, build_comparison, emit_figure_data, emit_ledger_csv, emit_summary_json,
    format_comparison_text, parse_ledger_csv, summarize, tariff_from_echo,
)
from .profiles import ProfileError
from .qlearning import (
    EmptyProfile, Hyperparameters, QTableError, format_learning_curve, format_qtable, load_qtable,
    moving_average, train,
)
from .simulator import HorizonMismatch, MissingQTable, Scenario, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING_QTABLE = 4

SEED_ENV = "MAPDES_SEED"


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def resolve_seed(flag: Optional[int]) -> Optional[int]:
    """--seed wins, then $MAPDES_SEED; None defers to the config file."""
    if flag is not None:
        return flag
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise CommandError(f"{SEED_ENV} must be an integer, got {raw!r}", EXIT_CONFIG) from None


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


def _manifest(command: str, config_path: Optional[str], seed, out: str) -> str:
    doc = {
        "command": command,
        "config": config_path,
        "seed": seed,
        "out": out,
        "version": __version__,
    }
    return json.dumps(doc, indent=2) + "\n"


def community_digest(echo: dict) -> str:
    """Fingerprint of everything in a run's config except the scenario."""
    body = {k: v for k, v in echo.items() if k != "scenario"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _load(path, seed, scenario=Scenario.RE_P2P, qtable=None):
    try:
        return load_config(path, seed=seed, scenario=scenario, qtable_path=qtable)
    except (ConfigError, ProfileError, ValueError) as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from exc


def cmd_train(args) -> int:
    cfg = _load(args.config, resolve_seed(args.seed))
    try:
        farm = training_farm(cfg)
    except ConfigError as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from exc
    try:
        hp = Hyperparameters(episodes=args.episodes)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from exc

    out = args.out
    curve_path = out + ".curve.csv"
    try:
        write_atomic(out + ".manifest.json", _manifest("train", args.config, cfg.seed, out))
        table, curve = train(farm.dataset, farm.battery, cfg.tariff, cfg.feed_in, hp, cfg.seed)
        write_atomic(out, format_qtable(table))
        write_atomic(curve_path, format_learning_curve(curve))
    except EmptyProfile as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from exc
    except OSError as exc:
        raise CommandError(f"cannot write training outputs: {exc}", EXIT_IO) from exc

    final = float(moving_average(curve)[-1]) if len(curve) else 0.0
    print(f"trained farm {farm.farm_id} for {hp.episodes} episodes; final moving-average reward {final:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = Scenario(args.scenario)
    cfg = _load(args.config, resolve_seed(args.seed), scenario, args.qtable)
    table = None
    if cfg.needs_qtable and (scenario.renewables or args.qtable):
        if not args.qtable:
            raise CommandError("this community has a Q-learning farm; pass --qtable", EXIT_MISSING_QTABLE)
        try:
            table = load_qtable(args.qtable)
        except QTableError as exc:
            raise CommandError(f"cannot load Q-table: {exc}", EXIT_MISSING_QTABLE) from exc
    try:
        result = run_scenario(cfg, table)
    except MissingQTable as exc:
        raise CommandError(str(exc), EXIT_MISSING_QTABLE) from exc
    except HorizonMismatch as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from exc

    metrics = summarize(result, cfg.tariff)
    summary = {
        "scenario": scenario.value,
        "community_digest": community_digest(result.config),
        "config": result.config,
        "metrics": metrics.to_dict(),
    }
    try:
        os.makedirs(args.out, exist_ok=True)
        write_atomic(os.path.join(args.out, "manifest.json"),
                     _manifest(f"simulate {scenario.value}", args.config, cfg.seed, args.out))
        write_atomic(os.path.join(args.out, "ledger.csv"), _render(emit_ledger_csv, result))
        write_atomic(os.path.join(args.out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        raise CommandError(f"cannot write simulation outputs: {exc}", EXIT_IO) from exc
    print(f"{scenario.value}: cost {metrics.total_purchase_cost:.2f} EUR, "
          f"revenue {metrics.total_sales_revenue:.2f} EUR, "
          f"peak-window grid import {metrics.peak_window_grid_import:.2f} kWh")
    return EXIT_OK


def _read_run(path: str):
    try:
        with open(os.path.join(path, "summary.json"), encoding="utf-8") as fh:
            summary = json.load(fh)
        with open(os.path.join(path, "ledger.csv"), encoding="utf-8", newline="") as fh:
            result = parse_ledger_csv(fh)
    except OSError as exc:
        raise CommandError(f"cannot read run {path}: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError) as exc:
        raise CommandError(f"run {path} is malformed: {exc}", EXIT_CONFIG) from exc
    result.config = summary.get("config", {})
    return summary, result


def cmd_compare(args) -> int:
    runs = {}
    digests = set()
    for path in args.runs:
        summary, result = _read_run(path)
        scenario = result.scenario
        if scenario in runs:
            raise CommandError(f"two runs for scenario {scenario.value}", EXIT_CONFIG)
        runs[scenario] = result
        digests.add(summary.get("community_digest"))
    missing = [s.value for s in Scenario if s not in runs]
    if missing:
        raise CommandError(f"missing runs for scenario(s) {', '.join(missing)}", EXIT_CONFIG)
    if len(digests) != 1:
        raise CommandError("runs come from different community configurations", EXIT_CONFIG)

    tariff = tariff_from_echo(runs[Scenario.RE_P2P].config)
    summaries = {s: summarize(r, tariff) for s, r in runs.items()}
    rows = build_comparison(summaries[Scenario.NO_RE_NO_P2P], summaries[Scenario.RE_NO_P2P],
                            summaries[Scenario.RE_P2P])
    figures = {
        "daily_cost": list(Scenario),
        "daily_revenue": [Scenario.RE_NO_P2P, Scenario.RE_P2P],
        "daily_peak_import": [Scenario.RE_NO_P2P, Scenario.RE_P2P],
    }
    assert set(figures) == set(FIGURE_IDS)
    try:
        os.makedirs(args.out, exist_ok=True)
        write_atomic(os.path.join(args.out, "manifest.json"),
                     _manifest("compare", None, None, args.out))
        write_atomic(os.path.join(args.out, "comparison.json"), _render(emit_summary_json, rows))
        write_atomic(os.path.join(args.out, "comparison.txt"), format_comparison_text(rows))
        for figure_id, scenarios in figures.items():
            for s in scenarios:
                text = _render(lambda r, sink: emit_figure_data(r, figure_id, sink, tariff), runs[s])
                write_atomic(os.path.join(args.out, f"{figure_id}_{s.value}.csv"), text)
    except OSError as exc:
        raise CommandError(f"cannot write comparison outputs: {exc}", EXIT_IO) from exc
    sys.stdout.write(format_comparison_text(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapdes", description="P2P energy trading simulator for dairy farms")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the Q-learning farm's table")
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=Hyperparameters.episodes)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="Q-table file; the learning curve goes to <out>.curve.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="simulate one scenario for a year")
    p.add_argument("--config", required=True)
    p.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    p.add_argument("--qtable", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare the three scenario runs of one community")
    p.add_argument("runs", nargs=3, metavar="RUN_DIR")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"mapdes: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
