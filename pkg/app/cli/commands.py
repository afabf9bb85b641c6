import sys
from datetime import datetime
from typing import Callable, Dict, NamedTuple, Optional

from app.core.config import settings
from app.core.exceptions import EXIT_COMPUTATION, EXIT_OK
from app.core.logging import logger
from app.core.task_tracker import RunTracker
from app.cli.run_config import Command, ImageFormat, RunConfig
from app.models.maps import MapKind
from app.services import outputs
from app.services.dilatation import scan_dilatation
from app.services.grids import escape_grid, label_components
from app.services.growth import circle_coverage, growth_ratio, max_covered_radius
from app.services.orbits import iterate
from app.services.outputs import OutputWriter
from app.services.verification import CheckContext, run_suite


class RunOutcome(NamedTuple):
    status: int
    summary: str
    digest: str


class CommandResult(NamedTuple):
    summary: str
    status: int = EXIT_OK


Handler = Callable[[RunConfig, OutputWriter, RunTracker, str], CommandResult]


def run_orbit(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    spec, policy = config.map_spec(), config.policy()
    if config.points:
        records = []
        for index, z in enumerate(config.points):
            tracker.update_progress(run_id, "iterating orbits", 100 * index / len(config.points))
            records.append(iterate(spec, z, policy, record_sign_flip=config.sign_flip))
        tracker.complete_step(run_id, "iterating orbits")
        writer.write_csv("orbits.csv", outputs.BATCH_HEADER, outputs.batch_rows(records))
        counts: Dict[str, int] = {}
        for record in records:
            counts[record.classification.value] = counts.get(record.classification.value, 0) + 1
        return CommandResult(f"{len(records)} orbits " + " ".join(f"{k}={v}" for k, v in sorted(counts.items())))

    tracker.update_progress(run_id, "iterating orbit", 0)
    record = iterate(spec, config.z0, policy, record_sign_flip=config.sign_flip)
    tracker.complete_step(run_id, "iterating orbit")
    writer.write_csv("orbit.csv", outputs.ORBIT_HEADER, outputs.orbit_rows(record))
    notes = f" {','.join(record.notes)}" if record.notes else ""
    return CommandResult(f"z0={config.z0} {record.classification.value} after {record.iterations_used} steps{notes}")


def _grid(config: RunConfig, tracker: RunTracker, run_id: str):
    tracker.update_progress(run_id, "escape grid", 0)
    grid = escape_grid(config.map_spec(), config.grid_window(), config.nx, config.ny, config.policy(),
                       workers=config.workers)
    tracker.complete_step(run_id, "escape grid")
    return grid


def run_grid(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    grid = _grid(config, tracker, run_id)
    if config.image is ImageFormat.P6:
        writer.write_image("grid.ppm", outputs.grid_colors(grid))
    else:
        writer.write_image("grid.pgm", outputs.grid_pixels(grid))
    components = label_components(grid, config.which, dilate=config.dilate, markers=config.markers)
    writer.write_csv("components.csv", outputs.COMPONENT_HEADER, outputs.component_rows(components))
    counts = " ".join(f"{k}={v}" for k, v in grid.counts().items())
    return CommandResult(f"{config.nx}x{config.ny} grid {counts}, {len(components)} {config.which.value} components")


def run_components(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    grid = _grid(config, tracker, run_id)
    components = label_components(grid, config.which, dilate=config.dilate, markers=config.markers)
    writer.write_csv("components.csv", outputs.COMPONENT_HEADER, outputs.component_rows(components))
    marked = [c for c in components if c.contains]
    bounded = sum(1 for c in marked if not c.touches_window_boundary)
    return CommandResult(f"{len(components)} {config.which.value} components, "
                         f"{bounded} of {len(marked)} marked components bounded")


def run_dilatation(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    spec = config.map_spec()
    tracker.update_progress(run_id, "dilatation scan", 0)
    summary = scan_dilatation(spec, config.scan_region(), config.samples, seed=config.seed,
                              workers=config.workers, step=config.step)
    tracker.complete_step(run_id, "dilatation scan")
    spatial = spec.kind is MapKind.CYL3D
    header = outputs.SPATIAL_DILATATION_HEADER if spatial else outputs.PLANAR_DILATATION_HEADER
    writer.write_csv("dilatation.csv", header, outputs.dilatation_rows(summary, spatial))
    return CommandResult(f"max K {summary.max_k} over {summary.samples} samples, "
                         f"{summary.unreliable} UNRELIABLE, {summary.excluded} excluded")


def run_growth(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    tracker.update_progress(run_id, "growth curve", 0)
    curve = growth_ratio(config.map_spec(), config.radii, config.growth_samples)
    tracker.complete_step(run_id, "growth curve")
    writer.write_csv("growth.csv", outputs.GROWTH_HEADER, outputs.growth_rows(curve))
    return CommandResult("M(r)/r " + ", ".join(f"{r:g}:{q:.6g}" for r, q in zip(curve.radii, curve.ratios)))


def run_coverage(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    spec = config.map_spec()
    tracker.update_progress(run_id, "circle coverage", 0)
    if config.target_radius is not None:
        report = circle_coverage(spec, config.inner, config.outer, config.target_radius, config.targets)
        tracker.complete_step(run_id, "circle coverage")
        writer.write_csv("coverage.csv", outputs.COVERAGE_HEADER, outputs.coverage_rows(report))
        return CommandResult(f"L={config.target_radius:g} covered fraction {report.fraction:.6g}")

    search = max_covered_radius(spec, config.inner, config.outer, factor=config.ladder_factor,
                                rungs=config.rungs, targets=config.targets)
    tracker.complete_step(run_id, "circle coverage")
    rows = ([outputs.fmt(radius), outputs.fmt(fraction)] for radius, fraction in search.tested)
    writer.write_csv("coverage_search.csv", ["radius", "covered_fraction"], rows)
    return CommandResult(f"largest fully covered radius L*={search.best_radius}")


def run_verify(config: RunConfig, writer: OutputWriter, tracker: RunTracker, run_id: str) -> CommandResult:
    tracker.update_progress(run_id, f"verify suite {config.suite.value}", 0)
    results = run_suite(config.suite, CheckContext(params=config.map_params(), seed=config.seed,
                                                   workers=config.workers))
    tracker.complete_step(run_id, f"verify suite {config.suite.value}")
    writer.write_csv("verify.csv", ["check", "suite", "status", "detail"],
                     ([r.name, r.suite.value, r.status, r.detail] for r in results))
    for r in results:
        print(f"{r.status}  {r.name:<22} {r.detail}", file=sys.stdout)
    failed = [r.name for r in results if not r.passed]
    status = EXIT_COMPUTATION if failed else EXIT_OK
    summary = f"{len(results) - len(failed)}/{len(results)} checks passed"
    if failed:
        summary += " (failed: " + ", ".join(failed) + ")"
    return CommandResult(summary, status)


HANDLERS: Dict[Command, Handler] = {
    Command.ORBIT: run_orbit,
    Command.GRID: run_grid,
    Command.COMPONENTS: run_components,
    Command.DILATATION: run_dilatation,
    Command.GROWTH: run_growth,
    Command.COVERAGE: run_coverage,
    Command.VERIFY: run_verify,
}


def output_directory(config: RunConfig, flag_value: Optional[str] = None) -> str:
    """--output-dir flag, then OUTPUT_DIR from the environment, then the config file."""
    return flag_value or settings.OUTPUT_DIR or config.output_dir


def run(config: RunConfig, output_dir: Optional[str] = None) -> RunOutcome:
    """
    Execute the configured command. On any error the files written so far are
    removed and the exception propagates to the caller.
    """
    run_id = f"{config.command.value}-{datetime.now().strftime('%Y%m%dT%H%M%S%f')}"
    tracker = RunTracker(config.record)
    writer = OutputWriter(output_directory(config, output_dir))
    logger.info("Materialised configuration:\n" + config.render())

    tracker.start_run(run_id, config.command.value)
    try:
        result = HANDLERS[config.command](config, writer, tracker, run_id)
    except Exception as e:
        logger.error(f"Run {run_id} failed: {e}")
        writer.remove_all()
        tracker.complete_run(run_id, "failed")
        raise

    digest = writer.digest()
    tracker.complete_run(run_id, "completed" if result.status == EXIT_OK else "checks failed")
    summary = f"{config.command.value}: {result.summary} digest=sha256:{digest}"
    return RunOutcome(result.status, summary, digest)
