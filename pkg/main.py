#!/usr/bin/env python3
"""coseg - unsupervised co-segmentation of triangle-mesh sets.

Subcommands wrap the library: per-shape pre-segmentation, functional-map
estimation, full co-segmentation runs, evaluation, diagnostic export and a
synthetic demo set. Logs go to stderr; results go to files.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from coseg import (
    BasisCache,
    CosegError,
    HksConfig,
    RunConfig,
    ValidationError,
    add_run_handler,
    build_hks_constraints,
    build_laplace,
    compute_hks,
    default_palette,
    diagonal_concentration,
    dump_hks,
    dump_matrix_market,
    estimate_map,
    export_labeled_mesh,
    label_accuracy,
    load_ground_truth,
    load_mesh,
    pre_segment,
    rand_index,
    read_labels_json,
    run_coseg,
    setup_logging,
    sparsity_fraction,
    vertex_lumped_mass,
    write_demo_set,
)
from coseg.fmap import write_maps_json
from coseg.mesh import write_ply
from coseg.preseg import write_segmentation
from coseg.spectral import compute_mesh_basis

EXIT_USAGE = 1
EXIT_RUNTIME = 3

logger = logging.getLogger("coseg")


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    """Parser with global flags accepted before or after the subcommand."""
    global_options = argparse.ArgumentParser(add_help=False)
    global_options.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed")
    global_options.add_argument("--output-dir", type=Path, default=argparse.SUPPRESS, help="Output directory")
    global_options.add_argument("--cache-dir", type=Path, default=argparse.SUPPRESS, help="Eigenbasis cache")
    global_options.add_argument("--log-dir", type=Path, default=argparse.SUPPRESS,
                                help="Also write a rotating coseg.log here")
    global_options.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                                help="Debug logging")

    parser = CliParser(
        prog="coseg",
        description="Unsupervised co-segmentation of triangle-mesh sets via functional maps",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[global_options],
        epilog="""
Examples:
  # Write the synthetic dumbbell set and co-segment it
  python main.py demo --output-dir demo
  python main.py run --config demo/demo.json

  # Score a labeling against ground truth
  python main.py eval --pred demo/out/dumbbell-0.labels.json --truth demo/dumbbell-0.seg --mesh demo/dumbbell-0.off
""",
    )
    parser.set_defaults(seed=None, output_dir=None, cache_dir=None, log_dir=None, verbose=False)
    commands = parser.add_subparsers(dest="command", required=True)

    info = commands.add_parser("info", parents=[global_options], help="Print mesh statistics")
    info.add_argument("--mesh", type=Path, required=True)

    preseg = commands.add_parser("presegment", parents=[global_options], help="Pre-segment one mesh")
    preseg.add_argument("--mesh", type=Path, required=True)
    preseg.add_argument("--parts", type=int, required=True)
    preseg.add_argument("--embed-dim", type=int, default=10)
    preseg.add_argument("--h-factor", type=float, default=2.0)

    fmap = commands.add_parser("fmap", parents=[global_options], help="Estimate a functional map")
    fmap.add_argument("--source", type=Path, required=True)
    fmap.add_argument("--target", type=Path, required=True)
    fmap.add_argument("--k", type=int, default=50)
    fmap.add_argument("--k-eigs", type=int, default=300)
    fmap.add_argument("--n-times", type=int, default=100)
    fmap.add_argument("--ridge", type=float, default=None)
    fmap.add_argument("--commutativity", type=float, default=0.0)
    fmap.add_argument("--h-factor", type=float, default=2.0)

    run = commands.add_parser("run", parents=[global_options], help="Co-segment a shape set")
    run.add_argument("--config", type=Path, required=True)

    evaluate = commands.add_parser("eval", parents=[global_options], help="Score a labeling")
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--truth", type=Path, required=True)
    evaluate.add_argument("--mesh", type=Path, required=True)

    export = commands.add_parser("export", parents=[global_options], help="Export eigenfunction diagnostics")
    export.add_argument("--mesh", type=Path, required=True)
    export.add_argument("--eigenvector", type=int, default=2, help="1-based eigenfunction index")
    export.add_argument("--k", type=int, default=None, help="Eigenpairs to compute (default: index)")
    export.add_argument("--h-factor", type=float, default=2.0)
    export.add_argument("--hks", type=Path, default=None, help="Also dump HKS (.csv or .json)")
    export.add_argument("--mtx", type=Path, default=None, help="Also dump A and D as Matrix Market")

    commands.add_parser("demo", parents=[global_options], help="Write the synthetic dumbbell set")
    return parser


def main(argv: list[str] | None = None) -> int:
    """CLI entry point; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        _report(e, EXIT_USAGE)
        return EXIT_USAGE

    setup_logging(args.log_dir, verbosity="DEBUG" if args.verbose else "INFO")
    handlers = {
        "info": cmd_info,
        "presegment": cmd_presegment,
        "fmap": cmd_fmap,
        "run": cmd_run,
        "eval": cmd_eval,
        "export": cmd_export,
        "demo": cmd_demo,
    }

    try:
        handlers[args.command](args)
    except CosegError as e:
        logger.error(str(e))
        _report(e, e.exit_code)
        return e.exit_code
    except ValueError as e:
        logger.error(str(e))
        _report(e, ValidationError.exit_code)
        return ValidationError.exit_code
    except OSError as e:
        logger.error(str(e))
        _report(e, EXIT_RUNTIME)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        _report(e, EXIT_RUNTIME)
        return EXIT_RUNTIME
    return 0


# =============================================================================
# Subcommands
# =============================================================================


def cmd_info(args: argparse.Namespace) -> None:
    mesh = load_mesh(args.mesh)
    n_components, _ = mesh.connected_components()
    masses = vertex_lumped_mass(mesh)
    print(f"name: {mesh.name}")
    print(f"vertices: {mesh.n_vertices}")
    print(f"faces: {mesh.n_faces}")
    print(f"area: {masses.total:.10g}")
    print(f"components: {n_components}")
    print(f"mean_edge_length: {mesh.mean_edge_length():.10g}")
    print(f"hash: {mesh.content_hash()}")


def cmd_presegment(args: argparse.Namespace) -> None:
    mesh = load_mesh(args.mesh)
    output_dir = args.output_dir or Path(".")
    basis = compute_mesh_basis(mesh, args.embed_dim + 1, args.h_factor, cache=_cache(args))
    segmentation = pre_segment(mesh, basis, args.parts, args.embed_dim, args.seed or 0)

    segmentation_path = output_dir / f"{mesh.name}.segmentation.json"
    write_segmentation(segmentation_path, segmentation)
    export_labeled_mesh(mesh, segmentation.part_of, default_palette(args.parts), output_dir / f"{mesh.name}.parts.ply")
    logger.info(f"Wrote {segmentation_path}")


def cmd_fmap(args: argparse.Namespace) -> None:
    source = load_mesh(args.source)
    target = load_mesh(args.target)
    output_dir = args.output_dir or Path(".")
    cache = _cache(args)
    hks_config = HksConfig(args.n_times, args.k_eigs, normalize=True)

    sides = []
    for mesh in (source, target):
        basis = compute_mesh_basis(mesh, max(args.k_eigs, args.k), args.h_factor, cache=cache)
        sides.append((basis.truncated(min(args.k, basis.k)), compute_hks(basis, hks_config)))

    fmap = estimate_map(build_hks_constraints(sides[0], sides[1]), args.ridge, args.commutativity)
    map_path = output_dir / f"{source.name}-to-{target.name}.map.json"
    write_maps_json(map_path, [fmap])
    logger.info(
        f"Map {source.name} -> {target.name}: residual {fmap.fit_residual:.3e}, rank {fmap.rank}, "
        f"sparsity {sparsity_fraction(fmap):.3f}, diagonal {diagonal_concentration(fmap):.3f}"
    )
    logger.info(f"Wrote {map_path}")


def cmd_run(args: argparse.Namespace) -> None:
    config = RunConfig.from_file(args.config)
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir.resolve()
    if args.cache_dir is not None:
        overrides["cache_dir"] = args.cache_dir.resolve()
    if args.verbose:
        overrides["verbosity"] = "DEBUG"
    config = replace(config, **overrides)

    errors = config.validate()
    if errors:
        raise ValidationError.from_errors(errors)

    run_logger = setup_logging(verbosity=config.verbosity)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    handler = add_run_handler(run_logger, config.output_dir)
    try:
        result = run_coseg(config)
    finally:
        run_logger.removeHandler(handler)
        handler.close()

    if result.scores is not None:
        logger.info(f"Set accuracy: {result.scores['set_accuracy']:.4f}")


def cmd_eval(args: argparse.Namespace) -> None:
    mesh = load_mesh(args.mesh)
    predicted = read_labels_json(args.pred)
    truth = load_ground_truth(args.truth, mesh)
    masses = vertex_lumped_mass(mesh).masses
    scores = {
        "accuracy": label_accuracy(predicted, truth, masses),
        "rand_index": rand_index(predicted, truth),
    }
    print(json.dumps(scores, sort_keys=True))


def cmd_export(args: argparse.Namespace) -> None:
    mesh = load_mesh(args.mesh)
    output_dir = args.output_dir or Path(".")
    index = args.eigenvector
    if index < 1:
        raise ValidationError(f"--eigenvector is 1-based, got {index}")

    k = max(index, args.k or 0, 3 if args.hks else 0)
    basis = compute_mesh_basis(mesh, k, args.h_factor, cache=_cache(args))
    if index > basis.k:
        raise ValidationError(f"{mesh.name}: eigenfunction {index} requested, basis has {basis.k}")

    values = basis.eigenvectors[:, index - 1]
    ply_path = output_dir / f"{mesh.name}-phi{index}.ply"
    write_ply(ply_path, mesh.vertices, mesh.faces, _diverging_colors(values))
    logger.info(f"Wrote {ply_path} (lambda_{index} = {basis.eigenvalues[index - 1]:.6g})")

    if args.hks is not None:
        dump_hks(args.hks, compute_hks(basis, HksConfig(k_eigs=basis.k)))
        logger.info(f"Wrote {args.hks}")
    if args.mtx is not None:
        paths = dump_matrix_market(build_laplace(mesh, args.h_factor), args.mtx)
        logger.info(f"Wrote {paths[0]} and {paths[1]}")


def cmd_demo(args: argparse.Namespace) -> None:
    config_path = write_demo_set(args.output_dir or Path("coseg-demo"))
    logger.info(f"Demo config: {config_path}")


# =============================================================================
# Helpers
# =============================================================================


def _cache(args: argparse.Namespace) -> BasisCache | None:
    return BasisCache(args.cache_dir) if args.cache_dir is not None else None


def _diverging_colors(values: np.ndarray) -> np.ndarray:
    """Blue for negative, white at zero, red for positive; scaled by max |value|."""
    scale = np.abs(values).max()
    t = values / scale if scale > 0 else np.zeros_like(values)
    fade = np.round(255 * (1.0 - np.abs(t))).astype(np.int64)
    full = np.full_like(fade, 255)
    red = np.where(t >= 0, full, fade)
    blue = np.where(t <= 0, full, fade)
    return np.column_stack([red, fade, blue])


def _report(error: Exception, exit_code: int) -> None:
    """Single-line machine-parsable error on stderr."""
    payload = {"error": type(error).__name__, "message": str(error), "exit_code": exit_code}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
