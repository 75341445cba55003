"""Command-line surface: phantom generation, plan search runs, reports.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (partial
outputs are still flushed).  Set SDO_LOG=debug for per-event progress.
"""

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import NumericalBreakdown, SdoError
from .forest import ForestHyper
from .lp import LpStatus
from .model import build_molp, dose_of_plan, dvh
from .phantom import (PhantomSpec, generate_phantom, read_instance,
                      write_instance)
from .presets import PRESETS, preset_spec
from .twophase import TwoPhaseConfig, run, solve_weighted

log = logging.getLogger("sdoplan")

OBJECTIVE_NAMES = ("h1", "h2", "h3", "h4", "h5")


def _setup_logging():
    level = os.environ.get("SDO_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@click.group()
@click.version_option(__version__)
def main():
    """Sector-duration plan search on synthetic voxel phantoms."""
    _setup_logging()


def _fail(message, code):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# --- gen -----------------------------------------------------------------


@main.command()
@click.option("--preset", type=click.Choice(PRESETS), default=None,
              help="Named geometry; explicit flags override its fields.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid", type=int, default=None, help="Voxels per axis.")
@click.option("--voxel-mm", type=float, default=None)
@click.option("--tumor-radius-mm", type=float, default=None)
@click.option("--ring-thickness-mm", type=float, default=None)
@click.option("--dose-gy", type=float, default=None,
              help="Prescribed tumor dose.")
@click.option("--isocenters", type=int, default=None)
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              required=True)
def gen(preset, seed, grid, voxel_mm, tumor_radius_mm, ring_thickness_mm,
        dose_gy, isocenters, output):
    """Generate a phantom instance file."""
    try:
        if preset is not None:
            spec = preset_spec(preset, seed=seed)
        else:
            spec = preset_spec("small", seed=seed)
        updates = {}
        if grid is not None:
            updates["grid_shape"] = (grid, grid, grid)
            center = grid * (spec.voxel_size_mm if voxel_mm is None
                             else voxel_mm) / 2.0
            updates["tumor_center_mm"] = (center, center, center)
        if voxel_mm is not None:
            updates["voxel_size_mm"] = voxel_mm
        if tumor_radius_mm is not None:
            updates["tumor_radius_mm"] = tumor_radius_mm
        if ring_thickness_mm is not None:
            updates["ring_thickness_mm"] = ring_thickness_mm
        if dose_gy is not None:
            updates["prescribed_dose_Gy"] = dose_gy
        if isocenters is not None:
            updates["n_isocenters"] = isocenters
        if updates:
            from dataclasses import replace
            spec = replace(spec, **updates)
        instance = generate_phantom(spec)
        write_instance(instance, output)
    except (SdoError, ValueError) as exc:
        _fail(str(exc), 2)
    oar_caps = ", ".join(f"{s.max_dose_Gy:g}" for s in instance.oars) or "-"
    click.echo(f"wrote {output}")
    click.echo(f"{'case':<12}{'#iso':>6}{'dose (Gy)':>11}"
               f"{'OAR caps':>12}{'tumor cm3':>11}"
               f"{'#tumor':>8}{'#ring':>7}{'#OAR':>6}{'total':>7}")
    tumor = instance.tumors[0]
    n_oar = sum(s.n_voxels for s in instance.oars)
    click.echo(f"{instance.name:<12}{instance.n_isocenters:>6}"
               f"{instance.prescriptions[tumor.name]:>11.1f}"
               f"{oar_caps:>12}{tumor.volume_cm3:>11.3f}"
               f"{tumor.n_voxels:>8}"
               f"{sum(s.n_voxels for s in instance.rings):>7}"
               f"{n_oar:>6}{instance.total_voxels:>7}")


# --- run -----------------------------------------------------------------


def _write_archive_csv(path, archive, bounded):
    eps_cols = [f"eps_{OBJECTIVE_NAMES[i]}" for i in bounded]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(eps_cols + list(OBJECTIVE_NAMES)
                        + ["cov", "pci", "bot", "phase", "repeat_hits"])
        for entry in archive.entries:
            eps = (list(entry.eps.values) if entry.eps is not None
                   else [""] * len(bounded))
            crit = entry.plan.criteria
            writer.writerow(
                [repr(v) if v != "" else "" for v in eps]
                + [repr(float(v)) for v in entry.objectives]
                + [repr(crit.cov), repr(crit.pci), repr(crit.bot_min),
                   entry.phase, entry.repeat_hits])


def _write_plotdata(outdir, archive, instance, dvh_entry):
    plotdir = outdir / "plotdata"
    plotdir.mkdir(exist_ok=True)
    with open(plotdir / "cov_vs_pci.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cov", "pci", "phase"])
        for e in archive.entries:
            writer.writerow([repr(e.plan.criteria.cov),
                             repr(e.plan.criteria.pci), e.phase])
    with open(plotdir / "bot_vs_pci.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bot", "pci", "phase"])
        for e in archive.entries:
            if e.plan.criteria.cov >= 0.997:
                writer.writerow([repr(e.plan.criteria.bot_min),
                                 repr(e.plan.criteria.pci), e.phase])
    if not archive.entries:
        return
    if dvh_entry is None:
        # prefer the most conformal essentially-full-coverage plan
        full = [e for e in archive.entries if e.plan.criteria.cov >= 0.997]
        pool = full or archive.entries
        entry = max(pool, key=lambda e: (e.plan.criteria.pci,
                                         e.plan.criteria.cov))
    else:
        entry = archive.entries[dvh_entry]
    top = max(float(instance.prescriptions[t.name])
              for t in instance.tumors)
    grid = np.linspace(0.0, 2.0 * top, 81)
    curves = {s.name: dict(dvh(instance, entry.plan.durations, s.name, grid))
              for s in instance.structures}
    with open(plotdir / "dvh.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dose_gy"] + [s.name for s in instance.structures])
        for g in grid:
            writer.writerow([repr(float(g))]
                            + [repr(curves[s.name][g])
                               for s in instance.structures])


@main.command(name="run")
@click.argument("instance_path", type=click.Path(exists=True,
                                                 dir_okay=False))
@click.option("--mode", type=click.Choice(["regular", "ml"]),
              default="regular", show_default=True)
@click.option("--cov-min", type=float, default=0.98, show_default=True)
@click.option("--pci-min", type=float, default=0.75, show_default=True)
@click.option("--beta", type=float, default=1e-4, show_default=True)
@click.option("--r1", type=int, default=10, show_default=True)
@click.option("--r2", type=int, default=5, show_default=True)
@click.option("--rho", type=float, default=0.10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--primary-objective",
              type=click.Choice(OBJECTIVE_NAMES), default="h1",
              show_default=True)
@click.option("--bot-cap", type=float, default=180.0, show_default=True,
              help="Hard beam-on-time ceiling in minutes.")
@click.option("--trees", type=int, default=100, show_default=True,
              help="Forest size for the ml mode.")
@click.option("--no-filters", is_flag=True,
              help="Disable both early-detection filters.")
@click.option("--dvh-entry", type=int, default=None,
              help="Archive row for the DVH export (default: best plan).")
@click.option("-o", "--output", "outdir",
              type=click.Path(file_okay=False), default="sdoplan-out",
              show_default=True)
def run_cmd(instance_path, mode, cov_min, pci_min, beta, r1, r2, rho, seed,
            jobs, primary_objective, bot_cap, trees, no_filters, dvh_entry,
            outdir):
    """Run the two-phase search and write archive, report, plot data."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        instance = read_instance(instance_path)
        config = TwoPhaseConfig(
            cov_min=cov_min, pci_min=pci_min, beta=beta, r_phase1=r1,
            r_phase2=r2, rho=rho, seed=seed, jobs=jobs, mode=mode,
            primary=OBJECTIVE_NAMES.index(primary_objective),
            bot_hard_cap_min=bot_cap, filters=not no_filters,
            forest=ForestHyper(n_trees=trees))
    except (SdoError, ValueError) as exc:
        _fail(str(exc), 2)
    code = 0
    try:
        archive, report = run(instance, config)
    except NumericalBreakdown as exc:
        click.echo(f"numerical failure: {exc}; flushing partial outputs",
                   err=True)
        archive, report = None, None
        code = 3
    except (SdoError, ValueError) as exc:
        _fail(str(exc), 2)
    if archive is not None:
        bounded = tuple(i for i in range(5)
                        if i != config.primary)
        _write_archive_csv(outdir / "archive.csv", archive, bounded)
        with open(outdir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        _write_plotdata(outdir, archive, instance, dvh_entry)
        click.echo(f"{len(archive)} plans -> {outdir} "
                   f"(LP solves: {report.payoff_solves} payoff "
                   f"+ {report.eps_lp_solves} bound-vector)")
        for warning in report.warnings:
            click.echo(f"warning: {warning['code']}: {warning['message']}",
                       err=True)
    sys.exit(code)


# --- single --------------------------------------------------------------


@main.command()
@click.argument("instance_path", type=click.Path(exists=True,
                                                 dir_okay=False))
@click.option("-w", "--weights", default="1,1,1,1,1", show_default=True,
              help="Comma-separated nonnegative weights for h1..h5.")
@click.option("--cov-min", type=float, default=0.98, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              default=None, help="Write the plan as JSON.")
def single(instance_path, weights, cov_min, output):
    """Solve one weighted-sum plan (the single-objective comparison)."""
    try:
        instance = read_instance(instance_path)
        w = np.array([float(tok) for tok in weights.split(",")])
        model = build_molp(instance, cov_min=cov_min)
        out, plan = solve_weighted(model, w)
    except (SdoError, ValueError) as exc:
        _fail(str(exc), 2)
    if out.status is not LpStatus.OPTIMAL:
        _fail(f"solve ended {out.status.value}", 3)
    crit = plan.criteria
    click.echo(f"value {out.value:.6f}  objectives "
               + " ".join(f"{name}={v:.4f}" for name, v in
                          zip(OBJECTIVE_NAMES,
                              plan.objectives.as_array())))
    click.echo(f"cov {crit.cov:.4f}  pci {crit.pci:.4f}  "
               f"bot {crit.bot_min:.2f} min")
    if output:
        doc = {"weights": w.tolist(),
               "value": out.value,
               "objectives": plan.objectives.as_array().tolist(),
               "cov": crit.cov, "pci": crit.pci, "bot": crit.bot_min,
               "durations": plan.durations.tolist()}
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        click.echo(f"wrote {output}")


if __name__ == "__main__":
    main()
