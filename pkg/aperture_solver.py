#!/usr/bin/env python3
"""
aperture_solver.py - Command line entry point for the aperture diffraction solver

Usage:
    python aperture_solver.py mesh --config run.toml --out runs/disc
    python aperture_solver.py solve --config run.toml --out runs/disc [--probe]
    python aperture_solver.py fields --config run.toml --out runs/disc-map
    python aperture_solver.py transmission --config run.toml --out runs/disc-tau
    python aperture_solver.py convergence --config run.toml --out runs/disc-conv --levels 3
    python aperture_solver.py validate --out runs/validate [--quick] [--inject-fault branch]

Exit codes: 0 ok, 2 configuration or environment, 3 solver, 4 validation, 1 anything else.
"""

import argparse
import logging
import os
import sys

from aperture.errors import ConfigError, MeshError, QuadratureError, SingularityError, SolverError, ValidationFailure
from aperture.harness import (cmd_convergence, cmd_fields, cmd_mesh, cmd_solve, cmd_transmission, cmd_validate,
                              setup_logging)
from aperture.parallel import set_default_threads
from aperture.run_config import RunConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

COMMANDS = ("mesh", "solve", "fields", "transmission", "convergence", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Aperture - diffraction of scalar and electromagnetic waves by an aperture in a plane screen',
        epilog="""
Examples:
  python aperture_solver.py solve --config configs/disc_vector.toml --out runs/disc
  python aperture_solver.py transmission --config configs/disc_vector.toml --out runs/tau --threads 4
  python aperture_solver.py convergence --config configs/disc_static.toml --out runs/conv --levels 4
  python aperture_solver.py validate --out runs/validate --quick
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        'command',
        choices=COMMANDS,
        help='Subcommand to run'
    )
    parser.add_argument(
        '--config',
        help='TOML run configuration (required for every command except validate)'
    )
    parser.add_argument(
        '--out',
        help='Run output directory (defaults to [output] directory of the config); its parent must exist'
    )
    parser.add_argument(
        '--threads',
        type=int,
        default=1,
        help='Worker threads for assembly and field evaluation (1 gives reproducible output)'
    )
    parser.add_argument(
        '--seed',
        type=int,
        default=0,
        help='Seed for probe and validation sampling'
    )
    parser.add_argument(
        '--levels',
        type=int,
        default=3,
        help='Number of mesh levels for convergence (at least 3)'
    )
    parser.add_argument(
        '--probe',
        action='store_true',
        help='solve: also run the coercivity probe'
    )
    parser.add_argument(
        '--quick',
        action='store_true',
        help='validate: desk-scale subset of the acceptance suite'
    )
    parser.add_argument(
        '--inject-fault',
        choices=['branch'],
        help='validate: corrupt the symbol branch (test hook)'
    )
    parser.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='Enable verbose logging'
    )
    return parser


def run(args: argparse.Namespace) -> int:
    """Dispatch one subcommand; returns the process exit code."""
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}", field="threads")
    set_default_threads(args.threads)

    if args.command == "validate":
        out = args.out or os.path.join("runs", "validate")
        setup_logging(_log_dir(out), args.verbose)
        cmd_validate(out, quick=args.quick, inject_fault=args.inject_fault, seed=args.seed)
        return EXIT_OK

    if not args.config:
        raise ConfigError(f"'{args.command}' needs --config", field="config")
    config = RunConfig.from_toml(args.config)
    out = args.out or config.output.directory
    setup_logging(_log_dir(out), args.verbose)
    logging.debug(f"args: {args}")

    if args.command == "mesh":
        cmd_mesh(config, out)
    elif args.command == "solve":
        cmd_solve(config, out, probe=args.probe, seed=args.seed)
    elif args.command == "fields":
        cmd_fields(config, out)
    elif args.command == "transmission":
        cmd_transmission(config, out)
    else:
        cmd_convergence(config, out, n_levels=args.levels)
    return EXIT_OK


def _log_dir(out: str):
    """logs/ below the run directory when its parent exists (prepare_output reports the error otherwise)."""
    parent = os.path.dirname(os.path.abspath(out))
    return os.path.join(out, "logs") if os.path.isdir(parent) else None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(None, args.verbose)

    try:
        code = run(args)
        logging.info(f"✓ {args.command} completed successfully!")
    except (ConfigError, MeshError, QuadratureError) as e:
        logging.error(f"✗ Configuration error: {e}")
        code = EXIT_CONFIG
    except (SolverError, SingularityError) as e:
        logging.error(f"✗ Solver error: {e}")
        code = EXIT_SOLVER
    except ValidationFailure as e:
        logging.error(f"✗ Validation failed: {e}")
        code = EXIT_VALIDATION
    except KeyboardInterrupt:
        logging.info("\n✗ Operation cancelled by user")
        code = EXIT_ERROR
    except Exception as e:
        logging.error(f"✗ Error: {e}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        code = EXIT_ERROR
    return code


if __name__ == '__main__':
    sys.exit(main())
