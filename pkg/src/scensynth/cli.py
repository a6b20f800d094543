"""Command line entry point.

    scensynth run CONFIG.json [--out DIR]
    scensynth fixture NAME [--out DIR] [--n N] [--seed S]
    scensynth grid RUN_DIR --min LO --max HI --step H
    scensynth fixtures

A run directory holds ``config.json``, ``report.json``, ``table.txt`` and
``scenarios.csv``. ``SCENSYNTH_OUTPUT_DIR`` overrides the output directory
named in the config; ``--out`` overrides both.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import distributions as dist
from .errors import DomainError, PipelineError, SynthesisError
from .fixtures import ShiftStudyConfig, get_fixture, list_fixtures
from .pipeline import RunConfig, RunState, run
from .sampling import WeightedSample
from .synthesis import synthesis_weights
from .theory import gaussian_shift_study

log = logging.getLogger("scensynth")

OUTPUT_ENV = "SCENSYNTH_OUTPUT_DIR"
GRID_HEADER = (
    "y",
    "reference_pdf",
    "baseline_pdf",
    "synthesis_pdf",
    "reference_cdf",
    "baseline_cdf",
    "synthesis_cdf",
)
SCENARIO_HEADER = (
    "j", "name", "p15", "p50", "p85", "et_ess", "is_ess", "emr", "alpha_mle", "alpha_map",
)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_USAGE = 2


def _fmt(x) -> str:
    return repr(float(x))


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps line endings identical across platforms.
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def grid_points(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise DomainError(f"grid step must be positive, got {step}")
    if not hi > lo:
        raise DomainError(f"grid max must exceed min, got [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def density_grid(state: RunState, lo: float, hi: float, step: float, alpha=None) -> np.ndarray:
    """Rows ``(y, pdfs..., cdfs...)`` for reference, baseline and synthesis.

    Reference and baseline columns are exact skew-t values. The synthesis
    column bins the mixture weights on ``[y - step/2, y + step/2)`` and
    divides by ``step``; its CDF is the weighted empirical CDF at ``y``.
    """
    y = grid_points(lo, hi, step)
    alpha = state.result.alpha_map if alpha is None else alpha
    mix: WeightedSample = synthesis_weights(alpha, state.W)
    edges = np.append(y - 0.5 * step, y[-1] + 0.5 * step)
    mass, _ = np.histogram(mix.points, bins=edges, weights=mix.weights)
    order = np.argsort(mix.points, kind="stable")
    cum = np.cumsum(mix.weights[order])
    idx = np.searchsorted(mix.points[order], y, side="right")
    syn_cdf = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return np.column_stack(
        [
            y,
            dist.pdf(state.reference_params, y),
            dist.pdf(state.baseline_params, y),
            mass / step,
            dist.cdf(state.reference_params, y),
            dist.cdf(state.baseline_params, y),
            syn_cdf,
        ]
    )


def emit_density_grid(state: RunState, lo: float, hi: float, step: float, path) -> Path:
    rows = density_grid(state, lo, hi, step)
    path = Path(path)
    _write_text(path, _csv_text(GRID_HEADER, [[_fmt(v) for v in row] for row in rows]))
    return path


def resolve_output_dir(config_dir: str | None, name: str, override: str | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env) / name
    if config_dir:
        return Path(config_dir)
    return Path("runs") / name


def write_run(config: RunConfig, out_dir: Path) -> RunState:
    report, state = run(config)
    _write_text(out_dir / "config.json", json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_text(out_dir / "report.json", report.to_json() + "\n")
    _write_text(out_dir / "table.txt", report.format_table() + "\n")
    rows = [
        [r.j, r.name] + [_fmt(getattr(r, k)) for k in SCENARIO_HEADER[2:]] for r in report.scenarios
    ]
    _write_text(out_dir / "scenarios.csv", _csv_text(SCENARIO_HEADER, rows))
    print(report.format_table())
    print(f"wrote {out_dir}")
    return state


def write_shift_study(cfg: ShiftStudyConfig, out_dir: Path) -> None:
    rows = gaussian_shift_study(cfg.a_grid, cfg.n, cfg.seed)
    header = ("a", "emr", "ess_percent", "kl", "bound")
    text = _csv_text(header, [[_fmt(getattr(r, k)) for k in header] for r in rows])
    _write_text(out_dir / "config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_text(out_dir / "shift_study.csv", text)
    for r in rows:
        print(f"a={r.a:4.1f}  emr={r.emr:.4f}  ess={r.ess_percent:6.2f}%  kl={r.kl:.3f}  bound={r.bound:.4f}")
    print(f"wrote {out_dir}")


def _load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    write_run(config, resolve_output_dir(config.output_dir, config.name, args.out))
    return EXIT_OK


def _cmd_fixture(args) -> int:
    cfg = get_fixture(args.name)
    if args.n is not None:
        cfg.n = args.n
    if args.seed is not None:
        cfg.seed = args.seed
    out = resolve_output_dir(None, cfg.name, args.out)
    if isinstance(cfg, ShiftStudyConfig):
        write_shift_study(cfg, out)
    else:
        write_run(cfg, out)
    return EXIT_OK


def _cmd_grid(args) -> int:
    run_dir = Path(args.run_dir)
    config = _load_config(run_dir / "config.json")
    grid_points(args.min, args.max, args.step)  # validate before the expensive rerun
    report, state = run(config)
    saved = run_dir / "report.json"
    if saved.exists() and saved.read_text(encoding="utf-8") != report.to_json() + "\n":
        log.warning("rerun report differs from %s; the grid reflects the rerun", saved)
    path = emit_density_grid(state, args.min, args.max, args.step, run_dir / "density_grid.csv")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    for name in list_fixtures():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scensynth", description="Scenario synthesis against a reference forecast.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a synthesis from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("fixture", help="run an embedded case-study fixture")
    p.add_argument("name")
    p.add_argument("--out", help="output directory")
    p.add_argument("--n", type=int, help="override the Monte Carlo sample size")
    p.add_argument("--seed", type=int, help="override the seed")
    p.set_defaults(func=_cmd_fixture)

    p = sub.add_parser("grid", help="write density and CDF columns on a grid for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("fixtures", help="list embedded fixtures")
    p.set_defaults(func=_cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (SynthesisError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
