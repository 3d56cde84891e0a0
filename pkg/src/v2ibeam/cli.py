"""Command-line interface: codebook design, simulation, demo trace, reports.

Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors are
emitted on stderr as single-line JSON objects.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
import os
import sys

import click
import numpy as np

from . import harness as harness_mod
from .array_channel import RoadGeometry
from .codebook import build_codebook, load_codebook, save_codebook, validate
from .harness import (
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    records_to_csv,
    run_experiment,
    run_trial,
    summaries_to_csv,
    summarize,
)
from .plotting import svg_line_chart

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        # LinAlgError subclasses ValueError, so it must be matched first
        except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
            _fail(EXIT_NUMERICAL, "numerical", str(exc))
        except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
            _fail(EXIT_VALIDATION, "validation", str(exc))

    return wrapper


@click.group()
def main():
    """Vehicle tracking and road-aware beamforming simulator for mmWave V2I."""


@main.command("design-codebook")
@click.option("--antennas", type=int, required=True, help="Array size M.")
@click.option("--rf-chains", type=int, default=4, show_default=True,
              help="RF chains N for the hybrid constraint.")
@click.option("--codewords", type=int, multiple=True, required=True,
              help="Codewords per resolution; repeat for multi-resolution.")
@click.option("--lane-offset", type=float, default=8.5, show_default=True,
              help="Design lane offset y in meters.")
@click.option("--rsu-height", type=float, default=7.5, show_default=True,
              help="RSU height h in meters.")
@click.option("--range", "range_m", type=float, nargs=2, default=(-75.0, 75.0),
              show_default=True, help="Served road range in meters.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output codebook JSON path.")
@click.option("--workers", type=int, default=None,
              help="Region-fit worker count (default: V2I_THREADS or CPUs).")
@guarded
def design_codebook(antennas, rf_chains, codewords, lane_offset, rsu_height,
                    range_m, seed, out, workers):
    """Design a road-aware beamforming codebook and write it as JSON."""
    geometry = RoadGeometry(
        rsu_height_m=rsu_height,
        lane_offset_m=lane_offset,
        range_lb_m=range_m[0],
        range_ub_m=range_m[1],
    )
    book = build_codebook(
        geometry, lane_offset, antennas, rf_chains, list(codewords),
        seed=seed, workers=workers,
    )
    checks = validate(book)
    save_codebook(book, out)
    click.echo(f"wrote {out}: M={book.num_antennas} N={book.num_rf_chains} "
               f"Q={book.size} resolutions={list(book.resolutions)}")
    click.echo(f"partition max gap: {checks['partition_gap']:.3e}")
    click.echo(f"gain-pattern mass max rel err (target 2pi/M): "
               f"{checks['parseval_rel_err']:.3e}")
    click.echo(f"gain-pattern peak: {checks['bp_peak']:.6f}")


def _resolve_scenario(ref: str):
    if os.path.exists(ref):
        return load_scenario(ref)
    try:
        return load_scenario(bundled_scenario_path(ref))
    except FileNotFoundError:
        raise ValueError(
            f"scenario {ref!r} is neither a file nor a bundled name "
            f"(bundled: {', '.join(bundled_scenario_names())})"
        ) from None


def _apply_overrides(scenario, trials, seed, horizon, tracker, combiner, tx_power):
    updates = {}
    if trials is not None:
        updates["trials"] = trials
    if seed is not None:
        updates["seed"] = seed
    if horizon is not None:
        updates["horizon"] = horizon
    if tracker is not None:
        updates["tracker"] = tracker
    if combiner is not None:
        updates["combiner_mode"] = combiner
    if tx_power:
        if len(tx_power) == 1:
            updates["tx_powers_dbm"] = ()
            updates["array"] = dataclasses.replace(
                scenario.array, tx_power_mw=10.0 ** (tx_power[0] / 10.0)
            )
        else:
            updates["tx_powers_dbm"] = tuple(tx_power)
    return dataclasses.replace(scenario, **updates) if updates else scenario


@main.command()
@click.argument("scenario_ref")
@click.option("--trials", type=int, default=None, help="Override trial count.")
@click.option("--seed", type=int, default=None, help="Override master seed.")
@click.option("--horizon", type=int, default=None, help="Override step count.")
@click.option("--tracker", type=click.Choice(harness_mod.TRACKERS), default=None,
              help="Override tracking variant.")
@click.option("--combiner", type=click.Choice(["optimal", "hybrid"]), default=None,
              help="Override sounding combiner mode.")
@click.option("--tx-power", type=float, multiple=True,
              help="Transmit power in dBm; repeat for a sweep.")
@click.option("--codebook", "codebook_path", type=click.Path(exists=True),
              default=None, help="Pre-built codebook JSON for beam schemes.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--format", "formats", type=click.Choice(["csv", "svg"]),
              multiple=True, default=("csv",), show_default=True,
              help="Outputs to write; repeatable.")
@click.option("--workers", type=int, default=None,
              help="Trial worker count (default: V2I_THREADS or CPUs).")
@guarded
def simulate(scenario_ref, trials, seed, horizon, tracker, combiner, tx_power,
             codebook_path, out_dir, formats, workers):
    """Run a Monte-Carlo experiment from a scenario file or bundled name."""
    scenario = _resolve_scenario(scenario_ref)
    scenario = _apply_overrides(scenario, trials, seed, horizon, tracker,
                                combiner, tx_power)
    book = load_codebook(codebook_path) if codebook_path else None
    results = run_experiment(scenario, workers=workers, book=book)
    os.makedirs(out_dir, exist_ok=True)
    summaries = [r.summary for r in results]
    if "csv" in formats:
        for r in results:
            tag = f"_{r.tx_power_dbm:g}dBm" if len(results) > 1 else ""
            path = os.path.join(out_dir, f"{scenario.name}{tag}_results.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(records_to_csv(r.records))
            click.echo(f"wrote {path}")
        spath = os.path.join(out_dir, f"{scenario.name}_summary.csv")
        with open(spath, "w", encoding="utf-8") as fh:
            fh.write(summaries_to_csv(summaries))
        click.echo(f"wrote {spath}")
    if "svg" in formats:
        chart = {}
        if len(results) > 1:
            chart["NMSE x"] = [(r.tx_power_dbm, r.summary.nmse_x) for r in results]
            chart["NMSE v"] = [(r.tx_power_dbm, r.summary.nmse_v) for r in results]
            doc = svg_line_chart(chart, title=scenario.name,
                                 x_label="transmit power (dBm)", y_label="NMSE",
                                 log_y=True)
        else:
            series = results[0].summary.nmse_x_series
            chart["NMSE x(t)"] = [
                (i * scenario.motion.ts, v) for i, v in enumerate(series, start=1)
            ]
            doc = svg_line_chart(chart, title=scenario.name,
                                 x_label="time (s)", y_label="NMSE", log_y=True)
        gpath = os.path.join(out_dir, f"{scenario.name}_summary.svg")
        with open(gpath, "w", encoding="utf-8") as fh:
            fh.write(doc)
        click.echo(f"wrote {gpath}")
    for s in summaries:
        gain = "" if math.isnan(s.mean_gain) else f" gain={s.mean_gain:.4f}"
        rate = "" if math.isnan(s.mean_rate) else f" rate={s.mean_rate:.4f}"
        click.echo(
            f"{s.scenario}: nmse_x={s.nmse_x:.6g} nmse_v={s.nmse_v:.6g}"
            f"{gain}{rate} (excluded x:{s.excluded_x} v:{s.excluded_v})"
        )


@main.command("track-demo")
@click.option("--scenario", "scenario_ref", default="track_demo",
              show_default=True, help="Scenario file or bundled name.")
@click.option("--steps", type=int, default=None, help="Override horizon.")
@click.option("--seed", type=int, default=None, help="Override seed.")
@click.option("--every", type=int, default=50, show_default=True,
              help="Print every Nth step on stdout.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Write the full per-step trace to this CSV instead.")
@guarded
def track_demo(scenario_ref, steps, seed, every, csv_path):
    """Trace one tracking trial: true vs estimated state per sounding step."""
    scenario = _resolve_scenario(scenario_ref)
    scenario = _apply_overrides(scenario, 1, seed, steps, None, None, ())
    records = run_trial(scenario, 0)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(records_to_csv(records))
        click.echo(f"wrote {csv_path}")
        return
    click.echo(f"{'step':>5} {'t[s]':>7} {'x':>9} {'x_hat':>9} "
               f"{'v':>8} {'v_hat':>8} {'alpha_hat':>9}")
    for r in records:
        if r.step % every and r.step != len(records):
            continue
        alpha = "-" if r.alpha_hat is None else f"{r.alpha_hat:9.4f}"
        click.echo(
            f"{r.step:>5} {r.time_s:7.2f} {r.x_true:9.3f} {r.x_hat:9.3f} "
            f"{r.v_true:8.3f} {r.v_hat:8.3f} {alpha:>9}"
        )


@main.command()
@click.argument("results_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--label", default=None, help="Scenario label for summary rows.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the summary CSV here instead of stdout.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), default=None,
              help="Also write a per-step NMSE chart.")
@guarded
def report(results_csv, label, out, svg_path):
    """Summarize a results CSV into metric rows (and an optional chart)."""
    records = _read_records(results_csv)
    if not records:
        raise ValueError(f"{results_csv} has no data rows")
    horizon = max(r.step for r in records)
    label = label or os.path.splitext(os.path.basename(results_csv))[0]
    summary = summarize(records, label, math.nan, horizon)
    text = summaries_to_csv([summary])
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)
    if svg_path:
        ts = [i for i in range(1, horizon + 1)]
        chart = {
            "NMSE x(t)": list(zip(ts, summary.nmse_x_series)),
            "NMSE v(t)": list(zip(ts, summary.nmse_v_series)),
        }
        doc = svg_line_chart(chart, title=label, x_label="step",
                             y_label="NMSE", log_y=True)
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(doc)
        click.echo(f"wrote {svg_path}")


def _read_records(path: str):
    import csv as csv_mod

    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv_mod.DictReader(fh)
        missing = set(harness_mod.CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"results CSV missing columns: {sorted(missing)}")
        for row in reader:
            records.append(
                harness_mod.TrialRecord(
                    trial=int(row["trial"]),
                    step=int(row["step"]),
                    time_s=float(row["time_s"]),
                    x_true=float(row["x_true"]),
                    y_true=float(row["y_true"]),
                    v_true=float(row["v_true"]),
                    x_hat=float(row["x_hat"]),
                    y_hat=float(row["y_hat"]),
                    v_hat=float(row["v_hat"]),
                    alpha_hat=float(row["alpha_hat"]) if row["alpha_hat"] else None,
                    beam_index=int(row["beam_index"]) if row["beam_index"] else None,
                    gain_norm=float(row["gain_norm"]) if row["gain_norm"] else None,
                    rate_bps_hz=float(row["rate_bps_hz"]) if row["rate_bps_hz"] else None,
                )
            )
    return records


if __name__ == "__main__":
    main()
