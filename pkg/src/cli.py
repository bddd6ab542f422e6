"""Command-line interface: generate, graph, estimate, analyze, barcode and pipeline.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click
from loguru import logger
from pydantic import TypeAdapter, ValidationError

from . import __version__
from .config_manager import Config, ConfigError, load_document
from .contagion import ContagionConfig, MapKind, contagion_matrix, symmetric_contagion_map
from .data_io import (
    read_barcode,
    read_edgelist,
    read_matrix_csv,
    read_pointcloud_csv,
    write_edgelist,
    write_matrix_csv,
    write_pointcloud_csv,
)
from .errors import DataError
from .generators import Matching, NoiseScale
from .geometry import pairwise_euclidean
from .graph_construction import GraphSpec, build_graph, graph_summary, short_circuit_edges
from .isomap import ShortestPathConfig, UnreachablePolicy, floyd_warshall
from .models import (
    AnalysesModel,
    BranchRecord,
    EstimatorSpec,
    GeneratorSpec,
    GraphModel,
    IsomapEstimator,
)
from .persistence import Backend, SubsampleStrategy, barcode_summary
from .pipeline import (
    Analyzer,
    Estimate,
    RuntimeOptions,
    derive_seeds,
    generate as run_generator,
    is_stochastic,
    load_pipeline_config,
    render_records,
    render_text,
    run_pipeline,
)
from .schemas import DissimilarityMatrix, GraphKind, NeighbourhoodGraph, Variant

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}"


def setup_logging(
    verbose: bool,
    debug: bool,
    level: str = "WARNING",
    log_file: Optional[str] = None,
    rotation: str = "10 MB",
) -> None:
    """Configure logging based on verbosity level."""
    if debug:
        level = "DEBUG"
    elif verbose:
        level = "INFO"

    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)
    if log_file:
        logger.add(log_file, level="DEBUG", format=LOG_FORMAT, rotation=rotation, enqueue=True)


class CLIError(Exception):
    """Base exception for CLI errors."""
    pass


def _fail(message: str, code: int) -> None:
    click.echo(click.style(message, fg="red"), err=True)
    sys.exit(code)


def handle_cli_error(func):
    """Decorator mapping exceptions onto exit codes."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except (CLIError, ConfigError) as e:
            _fail(f"Error: {e}", EXIT_USAGE)
        except ValidationError as e:
            _fail(f"Invalid configuration: {e}", EXIT_USAGE)
        except DataError as e:
            _fail(f"Data error: {e}", EXIT_DATA)
        except Exception as e:
            logger.exception("Unexpected error")
            _fail(f"Internal error: {e}", EXIT_INTERNAL)
    return wrapper


class CmapGroup(click.Group):
    """Command group whose usage errors exit with status 1."""

    def main(self, *args, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)


def _document(path: Optional[Path]) -> Dict[str, Any]:
    return load_document(path) if path is not None else {}


def _merge(base: Dict[str, Any], **overrides: Any) -> Dict[str, Any]:
    """Flag values win over the config document; unset flags are ignored."""
    merged = dict(base)
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return merged


def _runtime(ctx: click.Context) -> RuntimeOptions:
    return RuntimeOptions.from_config(ctx.obj["config"], ctx.obj["threads"])


def _echo_summary(summary: Dict[str, Any]) -> None:
    for key, value in summary.items():
        click.echo(f"{key}: {value}")


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON, TOML or YAML document with the stage parameters.",
)


@click.group(cls=CmapGroup, context_settings=dict(help_option_names=["-h", "--help"]))
@click.version_option(version=__version__, prog_name="cmap")
@click.option("--verbose", "-v", is_flag=True, default=False, help="Show progress information.")
@click.option("--debug", is_flag=True, default=False, help="Show debug information.")
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=None,
    help="Worker threads for contagion realizations (default: available parallelism).",
)
@click.option(
    "--settings",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("cmap.toml"),
    show_default=True,
    help="Runtime settings file.",
)
@click.pass_context
@handle_cli_error
def cli(ctx: click.Context, verbose: bool, debug: bool, threads: Optional[int], settings: Path):
    """Contagion maps and Isomap for manifold learning."""
    config = Config(settings)
    setup_logging(
        verbose,
        debug,
        level=config.get("logging.level"),
        log_file=config.get("logging.file") or None,
        rotation=config.get("logging.rotation"),
    )
    ctx.ensure_object(dict)
    ctx.obj["config"] = config
    ctx.obj["threads"] = threads


@cli.command("generate")
@click.argument("kind", type=click.Choice(["swiss_roll", "swiss_roll_uniform", "torus", "sphere"]))
@config_option
@click.option("--seed", type=int, help="RNG seed; required for stochastic generators.")
@click.option("--n", "grid_n", type=int, help="Torus grid side (N = n*n nodes).")
@click.option("--d-ng", type=int, help="Non-geometric edges per torus node.")
@click.option("--matching", type=click.Choice([m.value for m in Matching]), help="Non-geometric edge matching.")
@click.option("--n-points", type=int, help="Sample size for uniform rolls and spheres.")
@click.option("--density", type=float, help="Points per unit area of the regular Swiss roll.")
@click.option("--snr", type=float, help="Signal-to-noise ratio in dB of added Gaussian noise.")
@click.option("--noise-scale", type=click.Choice([s.value for s in NoiseScale]), help="Reference power for --snr.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output file.")
@handle_cli_error
def generate_cmd(
    kind: str,
    config_path: Optional[Path],
    seed: Optional[int],
    grid_n: Optional[int],
    d_ng: Optional[int],
    matching: Optional[str],
    n_points: Optional[int],
    density: Optional[float],
    snr: Optional[float],
    noise_scale: Optional[str],
    out: Path,
):
    """Generate a synthetic point cloud (CSV) or torus network (edge list)."""
    data = _merge(
        _document(config_path),
        name=kind, n=grid_n, d_ng=d_ng, matching=matching, n_points=n_points, density=density, snr=snr,
        noise_scale=noise_scale,
    )
    spec = TypeAdapter(GeneratorSpec).validate_python(data)
    if is_stochastic(spec) and seed is None:
        raise CLIError(f"--seed is required for the {kind} generator with these parameters")

    result = run_generator(spec, derive_seeds(seed if seed is not None else 0))
    if isinstance(result, NeighbourhoodGraph):
        write_edgelist(out, result)
        _echo_summary(graph_summary(result))
    else:
        write_pointcloud_csv(out, result)
        click.echo(f"points: {result.n_points}")
        click.echo(f"dimension: {result.dim}")
    click.echo(click.style(f"Wrote {out}", fg="green"))


@cli.command("graph")
@click.argument("points", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@config_option
@click.option("--kind", type=click.Choice([GraphKind.KNN.value, GraphKind.EPSILON.value]), help="Graph rule.")
@click.option("--k", type=int, help="Neighbours per point for knn graphs.")
@click.option("--epsilon", type=float, help="Radius for epsilon graphs.")
@click.option("--weighted/--unweighted", default=None, help="Store Euclidean edge lengths as weights.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Edge list file.")
@handle_cli_error
def graph_cmd(
    points: Path,
    config_path: Optional[Path],
    kind: Optional[str],
    k: Optional[int],
    epsilon: Optional[float],
    weighted: Optional[bool],
    out: Path,
):
    """Build a neighbourhood graph from a point-cloud CSV."""
    model = GraphModel.model_validate(
        _merge(_document(config_path), kind=kind, k=k, epsilon=epsilon, weighted=weighted)
    )
    cloud = read_pointcloud_csv(points)
    graph = build_graph(cloud, GraphSpec(model.kind, model.k, model.epsilon, model.weighted))
    write_edgelist(out, graph)

    summary = graph_summary(graph)
    if cloud.intrinsic_coords is not None:
        summary["short_circuit_edges"] = len(short_circuit_edges(graph, cloud))
    _echo_summary(summary)
    click.echo(click.style(f"Wrote {out}", fg="green"))


@cli.command("estimate")
@click.argument("edgelist", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@config_option
@click.option("--method", type=click.Choice(["isomap", "contagion"]), help="Distance estimator.")
@click.option("--threshold", "thresholds", type=float, multiple=True, help="Contagion threshold T (repeatable).")
@click.option("--map-kind", type=click.Choice([m.value for m in MapKind]), help="Contagion map kind.")
@click.option("--max-steps", type=int, help="Cap on contagion steps per realization.")
@click.option("--use-weights/--hop-count", default=None, help="Isomap path lengths from edge weights.")
@click.option(
    "--unreachable",
    type=click.Choice([p.value for p in UnreachablePolicy]),
    help="Isomap treatment of disconnected pairs.",
)
@click.option("--n-nodes", type=int, help="Node count when the edge list has no header.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_cli_error
def estimate_cmd(
    ctx: click.Context,
    edgelist: Path,
    config_path: Optional[Path],
    method: Optional[str],
    thresholds: Tuple[float, ...],
    map_kind: Optional[str],
    max_steps: Optional[int],
    use_weights: Optional[bool],
    unreachable: Optional[str],
    n_nodes: Optional[int],
    out_dir: Path,
):
    """Estimate node-to-node distances on a graph.

    Writes ``isomap.csv`` or, per threshold, ``contagion_T<T>.csv`` plus the
    raw activation times ``activation_T<T>.csv``.
    """
    base = _document(config_path)
    kind = method or base.get("kind")
    if kind == "isomap":
        data = _merge(base, kind=kind, use_weights=use_weights, unreachable_policy=unreachable)
    elif kind == "contagion":
        data = _merge(
            base, kind=kind, thresholds=list(thresholds) or None, map_kind=map_kind, max_steps=max_steps
        )
    else:
        raise CLIError("choose an estimator with --method or a config document")
    spec = TypeAdapter(EstimatorSpec).validate_python(data)

    graph = read_edgelist(edgelist, n_nodes)
    runtime = _runtime(ctx)
    if isinstance(spec, IsomapEstimator):
        source = graph if spec.use_weights else graph.unweighted()
        d = floyd_warshall(source, ShortestPathConfig(spec.use_weights, spec.unreachable_policy, spec.sentinel))
        write_matrix_csv(out_dir / "isomap.csv", d.d)
        click.echo(click.style(f"Wrote {out_dir / 'isomap.csv'}", fg="green"))
        return

    for threshold in spec.thresholds:
        x = contagion_matrix(graph, ContagionConfig(threshold, spec.max_steps, threads=runtime.threads))
        d = symmetric_contagion_map(x) if spec.map_kind == MapKind.SYMMETRIC else x.as_dissimilarity()
        write_matrix_csv(out_dir / f"activation_T{threshold:g}.csv", x.x)
        write_matrix_csv(out_dir / f"contagion_T{threshold:g}.csv", d.d)
        never = int((x.x == x.sentinel).sum())
        click.echo(f"T={threshold:g}: {x.steps} steps, {never} activation times never reached")
    click.echo(click.style(f"Wrote estimates to {out_dir}", fg="green"))


@cli.command("analyze")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@config_option
@click.option("--variant", type=click.Choice([v.value for v in Variant]), default=Variant.BOTH.value, show_default=True)
@click.option("--mds/--no-mds", default=True, show_default=True, help="Residual variances and embedding.")
@click.option("--persistence/--no-persistence", default=True, show_default=True, help="Vietoris-Rips barcode.")
@click.option("--p-max", type=int, help="Dimensions reported in the residual profile.")
@click.option("--criterion", type=float, help="Residual variance defining the embedding dimension.")
@click.option("--cap", type=int, help="Largest dimension searched.")
@click.option("--embed-dim", type=int, help="Coordinates written for the embedding.")
@click.option("--max-dim", type=int, help="Highest homology dimension.")
@click.option("--max-filtration", type=float, help="Filtration cap.")
@click.option("--subsample", type=int, help="Points kept before computing the barcode.")
@click.option("--subsample-strategy", type=click.Choice([s.value for s in SubsampleStrategy]))
@click.option("--backend", type=click.Choice([b.value for b in Backend]))
@click.option("--ratio", type=float, help="Persistence gap marking dominant bars.")
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Point-cloud CSV of the base geometry for a Pearson correlation.",
)
@click.option("--seed", type=int, help="RNG seed; required with --subsample.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_cli_error
def analyze_cmd(
    ctx: click.Context,
    matrix: Path,
    config_path: Optional[Path],
    variant: str,
    mds: bool,
    persistence: bool,
    p_max: Optional[int],
    criterion: Optional[float],
    cap: Optional[int],
    embed_dim: Optional[int],
    max_dim: Optional[int],
    max_filtration: Optional[float],
    subsample: Optional[int],
    subsample_strategy: Optional[str],
    backend: Optional[str],
    ratio: Optional[float],
    reference: Optional[Path],
    seed: Optional[int],
    out_dir: Path,
):
    """Structural inference on a dissimilarity matrix CSV."""
    doc = _document(config_path)
    sections: Dict[str, Any] = {}
    if mds:
        sections["mds_profile"] = _merge(
            doc.get("mds_profile", {}), p_max=p_max, criterion=criterion, cap=cap, embed_dim=embed_dim
        )
    if persistence:
        sections["persistence"] = _merge(
            doc.get("persistence", {}),
            max_dim=max_dim,
            max_filtration=max_filtration,
            subsample=subsample,
            subsample_strategy=subsample_strategy,
            backend=backend,
            ratio=ratio,
        )
    if reference is not None:
        sections["pearson"] = {"reference": "csv", "path": reference}
    if not sections:
        raise CLIError("nothing to do: enable --mds, --persistence or give --reference")
    analyses = AnalysesModel.model_validate(sections)
    if analyses.persistence is not None and analyses.persistence.subsample is not None and seed is None:
        raise CLIError("--seed is required when subsampling")

    d = DissimilarityMatrix(read_matrix_csv(matrix))
    ref = pairwise_euclidean(read_pointcloud_csv(reference)) if reference is not None else None
    subsample_seed = derive_seeds(seed)["subsample"] if seed is not None else 0
    analyzer = Analyzer(analyses, out_dir, _runtime(ctx), subsample_seed, reference=ref)

    variants = [Variant.DIRECT, Variant.POINTCLOUD] if variant == Variant.BOTH.value else [Variant(variant)]
    estimator = matrix.stem
    records = []
    for v in variants:
        record = BranchRecord(estimator=estimator, variant=v)
        analyzer.analyze(record, Estimate(estimator, d))
        records.append(record)

    out_dir.mkdir(parents=True, exist_ok=True)
    payload = [record.model_dump(mode="json") for record in records]
    (out_dir / "analysis.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for line in render_records(records):
        click.echo(line)
    if any(record.errors for record in records):
        click.echo(click.style("Some analyses failed; see analysis.json", fg="yellow"), err=True)


@cli.command("barcode")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--ratio",
    type=click.FloatRange(min=1.0, min_open=True),
    default=3.0,
    show_default=True,
    help="Persistence gap marking dominant bars.",
)
@handle_cli_error
def barcode_cmd(path: Path, ratio: float):
    """Summarize a stored barcode CSV (dim,birth,death)."""
    summary = barcode_summary(read_barcode(path), ratio)
    for dim, counts in summary["dimensions"].items():
        click.echo(
            f"H{dim}: {counts['bars']} bars, {counts['infinite']} infinite, "
            f"{counts['zero_length']} zero-length, longest finite {counts['longest_finite']:g}, "
            f"dominant {counts['dominant']}"
        )


@cli.command("pipeline")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Pipeline configuration (JSON, TOML or YAML).",
)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), help="Override output_dir.")
@click.option("--seed", type=int, help="Override rng_seed.")
@click.option("--variant", type=click.Choice([v.value for v in Variant]), help="Override variant.")
@click.pass_context
@handle_cli_error
def pipeline_cmd(
    ctx: click.Context,
    config_path: Path,
    output_dir: Optional[Path],
    seed: Optional[int],
    variant: Optional[str],
):
    """Run the full workflow described by a pipeline config."""
    cfg = load_pipeline_config(config_path, {"output_dir": output_dir, "rng_seed": seed, "variant": variant})
    report = run_pipeline(cfg, _runtime(ctx))
    click.echo(render_text(report), nl=False)
    click.echo(click.style(f"Results written to {cfg.output_dir}", fg="green"))


if __name__ == "__main__":
    cli()
