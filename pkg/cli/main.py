# cli/main.py
from core.config import settings
from core.exceptions import ArchiveError, ConfigError, MeshError, NumericalError
from core.run_config import RunConfig, load_run_config
from functools import wraps
from models.online import OnlineRequest
from models.parameters import ParameterPoint
from models.run_spec import HoleSpec
from pathlib import Path
from pydantic import ValidationError
from typing import List, Optional
import click
import logging

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def handle_errors(fn):
    """Maps the error hierarchy onto exit codes: 1 for config/archive, 2 for mesh/numerical failures."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ArchiveError, ValidationError) as e:
            logger.error(f"{ctx.command_path}: {e}", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (MeshError, NumericalError) as e:
            logger.error(f"{ctx.command_path}: {e}", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_NUMERICAL)

    return wrapper


def parse_queries(value: Optional[str]) -> Optional[List[ParameterPoint]]:
    """
    A JSON file {"queries": [{"k": .., "M": ..}, ...]} or an inline list
    'k,M;k,M'. None when no query option was given.

    Raises:
        ConfigError: If the value is neither a readable file nor a valid inline list.
    """
    if value is None:
        return None
    path = Path(value)
    if path.is_file():
        return OnlineRequest.model_validate_json(path.read_text(encoding="utf-8")).queries
    queries = []
    for item in filter(None, (s.strip() for s in value.split(";"))):
        try:
            k, M = (float(x) for x in item.split(","))
        except ValueError as e:
            raise ConfigError(f"Cannot parse query '{item}'; expected 'k,M'") from e
        queries.append(ParameterPoint(k=k, M=M))
    return queries


def _load(config: str) -> RunConfig:
    return load_run_config(config)


@click.group()
@click.option("--log-level", default=None, help="Overrides CRBM_LOG_LEVEL.")
def crbm(log_level: Optional[str]):
    """Certified reduced basis solver for the convected Helmholtz equation."""
    logging.basicConfig(level=(log_level or settings.log_level).upper(), format=settings.log_format)


# --- mesh ---

@crbm.group()
def mesh():
    """Generate or inspect triangulations."""


@mesh.command("gen")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="Take the generator from a run config.")
@click.option("--x-range", nargs=2, type=float, default=(-1.0, 1.0), show_default=True)
@click.option("--y-range", nargs=2, type=float, default=(-1.0, 1.0), show_default=True)
@click.option("--nx", type=int, default=16, show_default=True)
@click.option("--ny", type=int, default=16, show_default=True)
@click.option("--hole", nargs=4, type=float, default=None, help="x_min x_max y_min y_max of a cell-aligned hole.")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True, help="Target .msh file.")
@handle_errors
def mesh_gen(config, x_range, y_range, nx, ny, hole, out):
    """Write a structured rectangle mesh as MSH v2.2."""
    from services.external.msh_handler import write_msh
    from services.mesh_service import generate_rect_mesh, mesh_summary

    if config is not None:
        cfg = _load(config)
        gen = cfg.mesh.generator
        if gen is None:
            raise ConfigError(f"{config} reads its mesh from a file; nothing to generate")
        pml = cfg.pml if cfg.problem == "pml" else None
        result = generate_rect_mesh(gen.x_range, gen.y_range, gen.nx, gen.ny, hole=gen.hole, pml=pml)
    else:
        hole_spec = HoleSpec(x_min=hole[0], x_max=hole[1], y_min=hole[2], y_max=hole[3]) if hole else None
        result = generate_rect_mesh(tuple(x_range), tuple(y_range), nx, ny, hole=hole_spec)
    write_msh(result, out)
    click.echo(mesh_summary(result).to_text())


@mesh.command("info")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def mesh_info(path):
    """Print vertex/element counts, area and tags of a .msh file."""
    from services.external.msh_handler import read_msh
    from services.mesh_service import mesh_summary

    click.echo(mesh_summary(read_msh(path)).to_text())


# --- stages ---

@crbm.command()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--no-timings", is_flag=True, help="Leave wall-clock columns out of trace.csv.")
@handle_errors
def offline(config, no_timings):
    """Greedy offline stage: basis archive, trace.csv, costs.csv."""
    from services.run_service import run_offline

    cfg = _load(config)
    if no_timings:
        cfg = cfg.model_copy(update={"write_timings": False})
    summary = run_offline(cfg, config_path=str(Path(config).resolve()))
    click.echo(f"N={summary.N} N_du={summary.N_du} stopped={summary.stopped} residuum={summary.final_residuum:.6e}")
    click.echo(f"basis: {summary.basis_path}")
    click.echo(f"trace: {summary.trace_path}")


@crbm.command()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--basis", "basis", type=click.Path(dir_okay=False), required=True)
@click.option("--query", "query", default=None, help="JSON query file or inline 'k,M;k,M'.")
@click.option("--no-timings", is_flag=True, help="Leave wall-clock columns out of online.csv.")
@handle_errors
def online(config, basis, query, no_timings):
    """Online stage: reduced solves, estimators and outputs."""
    from services.run_service import run_online

    cfg = _load(config)
    if no_timings:
        cfg = cfg.model_copy(update={"write_timings": False})
    response = run_online(cfg, basis, parse_queries(query))
    click.echo(f"{len(response.results)} queries, N={response.dimension}, mean {response.mean_seconds * 1e3:.3f} ms")


@crbm.command()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--basis", "basis", type=click.Path(dir_okay=False), required=True)
@handle_errors
def validate(config, basis):
    """Truth comparison at the configured validation parameters."""
    from services.run_service import run_validate

    rows = run_validate(_load(config), basis)
    worst = max(r.x_error for r in rows)
    click.echo(f"{len(rows)} parameters validated, max X error {worst:.6e}")


@crbm.command()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--basis", "basis", type=click.Path(dir_okay=False), default=None)
@click.option("--host", default=None, help="Defaults to CRBM_API_HOST.")
@click.option("--port", type=int, default=None, help="Defaults to CRBM_API_PORT.")
def serve(config, basis, host, port):
    """Serve the online stage over HTTP."""
    import uvicorn

    if basis is not None:
        settings.basis_path = basis
    if config is not None:
        settings.config_path = str(Path(config).resolve())
    uvicorn.run("api.main:app", host=host or settings.api_host, port=port or settings.api_port)


if __name__ == "__main__":
    crbm()
