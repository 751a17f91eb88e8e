#!/usr/bin/env python3
"""
lsq - Typecheck, reduce, compile and sample sup-calculus proofs

A command-line tool that reads proof programs from `.lsq` files (or inline
with -e), checks their types, rewrites them to normal form and bridges
canonical proofs to state vectors.
"""

import functools
import json
import sys
from typing import Any, Callable, Dict, Optional

import click
import numpy as np

from . import __version__
from .errors import FuelExhausted, LSQError, ShapeMismatch
from .lambda_s import s_normalize, s_typecheck
from .ls_core import EMPTY_CONTEXT, App, linear_lint, typecheck
from .ls_parser import (
    LANGUAGE_LAMBDA_S, LANGUAGE_LS, Definition, SourceFile, parse_source_bytes, parse_sterm,
    parse_term, pretty,
)
from .ls_reduce import DEFAULT_FUEL, DETERMINISTIC, STRATEGIES, Mode, canonical_depth, normalize, probabilistic
from .ls_vec import (
    compile_matrix, decode, encode, library_prelude, load_matrix, load_vector, mat_mul, measure,
    total_variation,
)
from .scalars import DEFAULT_EPS


# Global variables for controlling output verbosity
VERBOSE = False
QUIET = False

HUMAN = "human"
STRUCTURED = "structured"


def log_info(message: str) -> None:
    """Log info message if not in quiet mode"""
    if not QUIET:
        click.echo(message)


def log_verbose(message: str) -> None:
    """Log verbose message if verbose mode is enabled"""
    if VERBOSE and not QUIET:
        click.echo(f"[VERBOSE] {message}")


def log_error(message: str) -> None:
    """Log error message (always shown unless quiet)"""
    if not QUIET:
        click.echo(f"Error: {message}", err=True)


def log_warning(message: str) -> None:
    """Log warning message if not in quiet mode"""
    if not QUIET:
        click.echo(f"Warning: {message}", err=True)


def emit(document: Dict[str, Any]) -> None:
    """Print one structured document, keys sorted so output is byte-stable"""
    click.echo(json.dumps(document, sort_keys=True))


def reports_errors(command: Callable) -> Callable:
    """Map lsq errors to their exit codes; anything else exits 1"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except LSQError as e:
            log_error(e.message)
            sys.exit(e.exit_code)
        except Exception as e:
            log_error(f"Unexpected error: {str(e)}")
            sys.exit(1)

    return wrapper


def source_options(command: Callable) -> Callable:
    """FILE argument or -e, plus the options every subcommand reading a program shares"""
    options = [
        click.argument('file', required=False, type=click.Path(exists=True, dir_okay=False, readable=True)),
        click.option('--expr', '-e', help='Inline program text used as main instead of FILE'),
        click.option('--ext', is_flag=True, help='Enable the additive connectives (+) and &'),
    ]
    for option in reversed(options):
        command = option(command)
    return tuning_options(command)


def tuning_options(command: Callable) -> Callable:
    options = [
        click.option(
            '--fuel',
            type=click.IntRange(min=1),
            default=DEFAULT_FUEL,
            show_default=True,
            envvar='LSQ_FUEL',
            help='Maximum number of rewrite steps (env: LSQ_FUEL)'
        ),
        click.option(
            '--eps',
            type=click.FloatRange(min=0, min_open=True),
            default=DEFAULT_EPS,
            show_default=True,
            help='Tolerance for scalar comparisons and zero weights'
        ),
        click.option(
            '--format', 'output_format',
            type=click.Choice([HUMAN, STRUCTURED]),
            default=HUMAN,
            show_default=True,
            help='Human-readable text or one JSON document'
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def load_program(file: Optional[str], expr: Optional[str], extensions: bool,
                 lambda_s: bool = False) -> SourceFile:
    """
    Parse FILE or the inline -e text

    Args:
        file: Path to a `.lsq` program
        expr: Inline term, used as main
        extensions: Allow the additive connectives
        lambda_s: Parse inline text as a Lambda-S term

    Returns:
        SourceFile: Parsed definitions
    """
    if file and expr is not None:
        log_error("Give either FILE or --expr, not both")
        sys.exit(1)
    if file is None and expr is None:
        log_error("Missing program: give FILE or --expr")
        sys.exit(1)

    if expr is not None:
        log_verbose("Parsing inline program")
        if lambda_s:
            return SourceFile([Definition("main", parse_sterm(expr), 1)], LANGUAGE_LAMBDA_S)
        term = parse_term(expr, extensions=extensions, prelude=library_prelude())
        return SourceFile([Definition("main", term, 1)], LANGUAGE_LS)

    log_verbose(f"Reading program: {file}")
    with open(file, 'rb') as f:
        data = f.read()
    source = parse_source_bytes(data, prelude=library_prelude(), extensions=extensions)
    log_verbose(f"Parsed {len(source.definitions)} definitions ({source.language})")
    return source


def require_main(source: SourceFile) -> Any:
    if source.main is None:
        log_error("Program has no main definition")
        sys.exit(1)
    return source.main


def require_proof_language(source: SourceFile) -> None:
    if source.language != LANGUAGE_LS:
        log_error("This is a Lambda-S program; use 'lsq lambdas' to evaluate it")
        sys.exit(1)


def require_seed(seed: Optional[int], reason: str) -> int:
    if seed is None:
        log_error(f"--seed is required {reason}")
        sys.exit(1)
    return seed


@click.group()
@click.option(
    '--verbose', '-v',
    is_flag=True,
    help='Enable verbose output showing detailed progress'
)
@click.option(
    '--quiet', '-q',
    is_flag=True,
    help='Suppress all output except results'
)
@click.version_option(version=__version__, prog_name='lsq')
def main(verbose: bool, quiet: bool) -> None:
    """
    Typecheck, reduce, compile and sample sup-calculus proofs.

    Programs are sequences of `def name = term ;` definitions; `main` is the
    one that runs. A file starting with a `%lambda-s` line is a Lambda-S
    program instead.

    Example usage:

        lsq check samples/hadamard.lsq

        lsq run --trace -e "H ket0"

        lsq run --mode prob --seed 7 samples/measure.lsq

        lsq sample --shots 10000 --seed 42 samples/bell.lsq

        lsq compile --matrix samples/hadamard.json --check samples/ket0.json

        lsq lambdas samples/call_by_base.lsq

    Exit codes: 0 ok, 1 syntax or usage, 2 type, 3 reduction, 4 data shape.
    """
    global VERBOSE, QUIET

    # Set global flags for logging functions
    VERBOSE = verbose
    QUIET = quiet

    # Validate quiet and verbose aren't both set
    if quiet and verbose:
        click.echo("Error: --quiet and --verbose cannot be used together", err=True)
        sys.exit(1)


@main.command()
@source_options
@click.option('--lint-linear', is_flag=True, help='Report bound variables not used exactly once per branch')
@reports_errors
def check(file: Optional[str], expr: Optional[str], ext: bool, fuel: int, eps: float,
          output_format: str, lint_linear: bool) -> None:
    """Print the type of every definition."""
    source = load_program(file, expr, ext)
    lambda_s = source.language == LANGUAGE_LAMBDA_S

    definitions = []
    for definition in source.definitions:
        log_verbose(f"Checking '{definition.name}' (line {definition.line})")
        try:
            if lambda_s:
                found = s_typecheck((), definition.term)
            else:
                found = typecheck(EMPTY_CONTEXT, definition.term)
        except LSQError as e:
            log_error(f"{definition.name} (line {definition.line}): {e.message}")
            sys.exit(e.exit_code)
        definitions.append({"name": definition.name, "type": pretty(found)})

    lint = []
    if lint_linear:
        if lambda_s:
            log_warning("--lint-linear applies to the proof language only")
        else:
            for definition in source.definitions:
                for finding in linear_lint(definition.term).findings:
                    lint.append({"definition": definition.name, "finding": str(finding)})

    if output_format == STRUCTURED:
        emit({"definitions": definitions, "main": source.main is not None, "lint": lint})
        return

    for entry in definitions:
        click.echo(f"{entry['name']} : {entry['type']}")
    if source.main is None:
        click.echo("no main")
    for entry in lint:
        click.echo(f"lint: {entry['definition']}: {entry['finding']}")
    if lint_linear and not lint and not lambda_s:
        log_info("lint: clean")


@main.command()
@source_options
@click.option('--mode', type=click.Choice(['det', 'prob']), default='det', show_default=True,
              help='Sum both branches of a measurement, or draw one')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), help='Seed for probabilistic mode')
@click.option('--no-renormalize', is_flag=True, help='Keep the collapsed branch unnormalized')
@click.option('--strategy', type=click.Choice(list(STRATEGIES)), default=STRATEGIES[0], show_default=True,
              help='Redex selection order')
@click.option('--trace', is_flag=True, help='Print every rewrite step')
@reports_errors
def run(file: Optional[str], expr: Optional[str], ext: bool, fuel: int, eps: float,
        output_format: str, mode: str, seed: Optional[int], no_renormalize: bool,
        strategy: str, trace: bool) -> None:
    """Normalize main and print the result."""
    if mode == 'prob':
        reduction = probabilistic(require_seed(seed, "in probabilistic mode"), renormalize=not no_renormalize)
    else:
        if seed is not None:
            log_verbose("--seed has no effect in deterministic mode")
        reduction = DETERMINISTIC if not no_renormalize else Mode(renormalize=False)

    source = load_program(file, expr, ext)
    require_proof_language(source)
    term = require_main(source)

    found = typecheck(EMPTY_CONTEXT, term)
    log_verbose(f"main : {pretty(found)}")
    log_verbose(f"Normalizing ({mode}, {strategy}, fuel {fuel})")

    try:
        result, steps = normalize(term, reduction, fuel=fuel, strategy=strategy, eps=eps)
    except FuelExhausted as e:
        if trace and e.partial is not None and output_format == HUMAN:
            click.echo(e.partial.to_log())
        raise

    log_verbose(f"Normal form reached after {steps.step_count} steps")
    if canonical_depth(result) is not None:
        log_verbose(f"Vector: {decode(result)}")

    if output_format == STRUCTURED:
        document = {
            "result": pretty(result),
            "steps": steps.step_count,
            "mode": mode,
            "seed": seed if mode == 'prob' else None,
            "branches": [{"choice": c, "probability": p} for c, p in steps.branches],
        }
        if trace:
            document["trace"] = steps.to_log().splitlines()
        emit(document)
        return

    if trace and steps.steps:
        click.echo(steps.to_log())
    for choice, probability in steps.branches:
        log_info(f"branch {choice} with probability {probability!r}")
    click.echo(pretty(result))


@main.command(name='compile')
@click.option('--matrix', 'matrix_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Matrix document {"rows", "cols", "entries"}')
@click.option('--check', 'vector_path', type=click.Path(exists=True, dir_okay=False),
              help='Vector document to apply the compiled proof to')
@tuning_options
@reports_errors
def compile_command(matrix_path: str, vector_path: Optional[str], fuel: int, eps: float,
                    output_format: str) -> None:
    """Compile a matrix to a proof of Q^m -o Q^n."""
    log_verbose(f"Reading matrix: {matrix_path}")
    matrix = load_matrix(matrix_path)
    term = compile_matrix(matrix)
    rows, cols = matrix.shape
    log_verbose(f"Compiled a {rows}x{cols} matrix")

    error = None
    if vector_path:
        vector = load_vector(vector_path)
        if len(vector) != cols:
            raise ShapeMismatch(f"Vector of length {len(vector)} does not match a matrix with {cols} columns")
        result, _ = normalize(App(term, encode(vector)), DETERMINISTIC, fuel=fuel, eps=eps)
        error = float(np.max(np.abs(decode(result) - mat_mul(matrix, vector))))
        if error > eps:
            log_warning(f"Compiled proof differs from the matrix product by {error:.3g}")

    if output_format == STRUCTURED:
        document = {"term": pretty(term), "rows": rows, "cols": cols}
        if error is not None:
            document["max_abs_error"] = error
        emit(document)
        return

    click.echo(pretty(term))
    if error is not None:
        click.echo(f"max-abs-error: {error:.3g}")


@main.command()
@source_options
@click.option('--shots', type=click.IntRange(min=1), default=1000, show_default=True, help='Number of measurements')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), help='Seed for the measurement draws (required)')
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True, help='Threads drawing shots')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False, writable=True), help='Also write the table as CSV')
@reports_errors
def sample(file: Optional[str], expr: Optional[str], ext: bool, fuel: int, eps: float,
           output_format: str, shots: int, seed: Optional[int], workers: int,
           csv_path: Optional[str]) -> None:
    """Measure the state main normalizes to, SHOTS times."""
    seed = require_seed(seed, "for sampling")
    source = load_program(file, expr, ext)
    require_proof_language(source)
    term = require_main(source)

    found = typecheck(EMPTY_CONTEXT, term)
    log_verbose(f"main : {pretty(found)}")
    log_verbose(f"Drawing {shots} shots with seed {seed} on {workers} worker(s)")

    report = measure(term, shots, seed, workers=workers, eps=eps, fuel=fuel)
    log_verbose(f"Total variation from the Born distribution: "
                f"{total_variation(report, report.probabilities):.4f}")

    table = report.to_frame()
    if csv_path:
        table.to_csv(csv_path, index=False)
        log_info(f"Wrote {csv_path}")

    if output_format == STRUCTURED:
        emit(report.to_dict())
    else:
        click.echo(table.to_string(index=False))


@main.command()
@source_options
@reports_errors
def lambdas(file: Optional[str], expr: Optional[str], ext: bool, fuel: int, eps: float,
            output_format: str) -> None:
    """Normalize the main term of a Lambda-S program."""
    source = load_program(file, expr, ext, lambda_s=True)
    if source.language != LANGUAGE_LAMBDA_S:
        log_error("Not a Lambda-S program: add a '%lambda-s' header line")
        sys.exit(1)
    term = require_main(source)

    found = s_typecheck((), term)
    log_verbose(f"main : {pretty(found)}")

    rules = []
    result = s_normalize(term, fuel=fuel, trace=rules)
    log_verbose(f"Normal form reached after {len(rules)} steps: {', '.join(rules) or 'none'}")

    if output_format == STRUCTURED:
        emit({"result": pretty(result), "type": pretty(found), "steps": len(rules)})
        return

    click.echo(pretty(result))


if __name__ == '__main__':
    main()
