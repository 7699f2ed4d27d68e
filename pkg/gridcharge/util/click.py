"""Command-line options shared by the :program:`gridcharge` commands."""
from pathlib import Path

import click


def output_dir(context, param, value):
    """Callback for ``--out``: default :file:`{local_data}/output`."""
    return value or context.obj.get_local_path("output")


def parse_lambdas(context, param, value):
    """Callback: parse a comma-separated list of non-negative trade-off weights."""
    if value is None:
        return None
    try:
        result = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {value!r}")
    if not result or any(v < 0 for v in result):
        raise click.BadParameter(f"need ≥1 value, all ≥ 0; got {value!r}")
    return result


#: Declarations and settings of each shared option. See :func:`common_params`.
PARAMS = {
    "lambda_": (
        ("--lambda", "lambda_"),
        dict(
            type=click.FloatRange(min=0),
            help="Trade-off weight λ on the emission price (default: from config).",
        ),
    ),
    "lambdas": (
        ("--lambdas",),
        dict(
            callback=parse_lambdas,
            help="Comma-separated λ values, e.g. 0,0.1,1,10 (default: from config).",
        ),
    ),
    "out": (
        ("--out",),
        dict(
            type=click.Path(file_okay=False, path_type=Path),
            callback=output_dir,
            help="Output directory (default: {local_data}/output).",
        ),
    ),
    "price_mode": (
        ("--price-mode",),
        dict(
            type=click.Choice(["sample", "mean"]),
            help="Sample one price profile per run, or use the mean profile.",
        ),
    ),
    "runs": (
        ("--runs",),
        dict(type=click.IntRange(min=1), help="Number of Monte Carlo runs."),
    ),
    "seed": (
        ("--seed",),
        dict(type=int, help="Master random seed (default: from config)."),
    ),
    "verbose": (
        ("--verbose", "-v"),
        dict(is_flag=True, help="Print DEBUG-level log messages."),
    ),
    "workers": (
        ("--workers",),
        dict(
            type=click.IntRange(min=1),
            default=1,
            help="Number of worker processes for independent runs.",
        ),
    ),
}


def common_params(names: str):
    """Add the options in :data:`PARAMS` named by `names` to a command.

    `names` is space-separated; options appear in ``--help`` in that order, and the
    command receives one keyword argument for each::

        @click.command()
        @common_params("out seed")
        def cli(out, seed):
            ...
    """

    def decorator(f):
        for name in reversed(names.split()):
            decls, attrs = PARAMS[name]
            f = click.option(*decls, **attrs)(f)
        return f

    return decorator
