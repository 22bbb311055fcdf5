"""
traveling_observer.cli

The ``tom`` command.  Exit codes: 0 on success, 1 for usage and
configuration errors, 2 for runtime errors, 3 when a gradient check fails.
"""
from __future__ import annotations
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import click

from .config import KEY_SECTIONS, resolve_config
from .errors import ConfigError, TomError
from .formatters import (
    format_decimal,
    format_duration,
    format_metric,
    get_locale,
    render_reported,
    render_suite,
)
from .gradcheck import grad_check
from .loaders import convert_cifar_batches, load_universe, write_universe
from .metrics import embedding_recovery, higher_is_better, metric_suite, suite_to_dict
from .results import read_results, reported_table
from .rng import Rng
from .synthetic import (
    GpUniverseConfig,
    HypersphereUniverseConfig,
    generate_gp_universe,
    generate_hypersphere_universe,
)
from .training import build_micro_problem, evaluate, load_bank, save_bank, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3

CHECKPOINT_FILE = "model.tomf"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class TomGroup(click.Group):
    """
    Maps every failure to the documented exit codes, whether the group
    runs standalone or under a test runner.
    """
    def main(  # type: ignore[override]
            self,
            args: Optional[Sequence[str]] = None,
            prog_name: Optional[str] = None,
            complete_var: Optional[str] = None,
            standalone_mode: bool = True,
            **extra: Any
    ) -> int:
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as error:
            error.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except ConfigError as error:
            click.echo(f"Error: {error}", err=True)
            code = EXIT_USAGE
        except (TomError, OSError, ValueError, RuntimeError) as error:
            logger.debug("command failed", exc_info=True)
            click.echo(f"Error: {error}", err=True)
            code = EXIT_RUNTIME
        else:
            code = rv if isinstance(rv, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


def config_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """
    Adds one ``--key`` option per configuration key.
    """
    for key in reversed(list(KEY_SECTIONS)):
        func = click.option(
            f"--{key.replace('_', '-')}",
            key,
            default=None,
            metavar="VALUE",
            help=f"[{KEY_SECTIONS[key]}] {key}",
        )(func)
    return func


@click.group(cls=TomGroup)
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    show_default=True,
)
def cli(log_level: str) -> None:
    """
    Multi-task learning across disjoint variable sets.
    """
    logging.basicConfig(level=log_level.upper(), format=LOG_FORMAT)


@cli.command("gen")
@click.argument("universe_kind", type=click.Choice(["gp", "hyperspheres"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--max-inputs", default=10, show_default=True, type=int)
@click.option("--max-outputs", default=10, show_default=True, type=int)
@click.option("--max-features", default=10, show_default=True, type=int)
@click.option("--max-classes", default=10, show_default=True, type=int)
def gen_command(
        universe_kind: str,
        seed: int,
        out_dir: str,
        max_inputs: int,
        max_outputs: int,
        max_features: int,
        max_classes: int
) -> None:
    """
    Generates a synthetic universe and writes one directory per task.
    """
    if universe_kind == "gp":
        tasks = generate_gp_universe(GpUniverseConfig(
            seed=seed, max_inputs=max_inputs, max_outputs=max_outputs
        ))
    else:
        tasks = generate_hypersphere_universe(HypersphereUniverseConfig(
            seed=seed, max_features=max_features, max_classes=max_classes
        ))
    write_universe(tasks, out_dir)
    click.echo(f"{len(tasks)} {universe_kind} tasks written to {out_dir}")


@cli.command("convert-cifar")
@click.argument("batch_files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--downsample", default=1, show_default=True, type=int)
def convert_cifar_command(batch_files: Sequence[str], out_path: str, downsample: int) -> None:
    """
    Converts CIFAR-10 binary batches to a grayscale TOMD file.
    """
    try:
        count = convert_cifar_batches(batch_files, out_path, downsample)
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint="--downsample") from None
    click.echo(f"{count} images written to {out_path}")


@cli.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="A key = value configuration file.")
@click.option("--locale", default="en_US", show_default=True)
@config_options
def train_command(config_path: Optional[str], locale: str, **overrides: Any) -> None:
    """
    Trains on a universe; the preset is applied first, then the config
    file, then every --key option.
    """
    get_locale(locale)
    preset = overrides.pop("preset")
    config = resolve_config(preset, config_path, overrides)
    tasks = load_universe(config)
    result = train(config, tasks, out_dir=config.out_dir)
    paths = result.write(config.out_dir)
    save_bank(os.path.join(config.out_dir, CHECKPOINT_FILE), result.model, config, tasks)
    click.echo(render_reported(result.reported(), tasks[0].metric, locale))
    click.echo(f"results: {paths['results']}")
    click.echo(f"finished in {format_duration(result.finished - result.started, locale)}")


@cli.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option("--task", "task_id", required=True)
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--data-path", default=None, help="Overrides the data path of the run.")
@click.option("--locale", default="en_US", show_default=True)
def eval_command(
        checkpoint: str,
        task_id: str,
        split: str,
        data_path: Optional[str],
        locale: str
) -> None:
    """
    Evaluates one task of a saved run.
    """
    bank, config, _ = load_bank(checkpoint)
    if data_path is not None:
        config.data_path = data_path
    tasks = {task.id: task for task in load_universe(config)}
    if task_id not in tasks:
        raise click.BadParameter(f"unknown task {task_id!r}", param_hint="--task")
    task = tasks[task_id]
    value = evaluate(bank, task, split, Rng(config.seed), config.train.eval_batch_size)
    click.echo(f"{task_id} {split} {task.metric}: {format_metric(value, task.metric, locale)}")


@cli.command("gradcheck")
@click.option("--preset", default="micro", show_default=True, type=click.Choice(["micro"]))
@click.option("--tol", "tolerance", default=1e-4, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-coords", default=None, type=int,
              help="Check at most this many coordinates per tensor.")
def gradcheck_command(preset: str, tolerance: float, seed: int, max_coords: Optional[int]) -> int:
    """
    Compares analytic and numeric gradients of the micro model.
    """
    problem = build_micro_problem(seed=seed)
    report = grad_check(problem.closure, problem.params, tolerance, max_coords, seed)
    click.echo(f"{preset}: {report.summary()}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


@cli.command("export-ves")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--recovery", is_flag=True,
              help="Compare each task's embeddings with its ground truth.")
@click.option("--locale", default="en_US", show_default=True)
def export_ves_command(checkpoint: str, out_path: str, recovery: bool, locale: str) -> None:
    """
    Writes the variable embeddings of a saved run as CSV.
    """
    get_locale(locale)
    bank, _, tasks = load_bank(checkpoint)
    if not bank.uses_embeddings:
        raise click.UsageError(f"mode {bank.mode} has no variable embeddings")
    frame = bank.ve_frame()
    frame.to_csv(out_path, index=False, float_format="%.17g")
    click.echo(f"{len(frame)} embeddings written to {out_path}")
    if recovery:
        for task in tasks:
            scores = embedding_recovery(frame, task) if task.oracle else {}
            if scores:
                text = ", ".join(
                    f"{name} {format_decimal(value, locale)}" for name, value in scores.items()
                )
                click.echo(f"{task.id}: {text}")


def _method_names(paths: Sequence[str]) -> List[str]:
    stems = [os.path.splitext(os.path.basename(path))[0] for path in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [os.path.basename(os.path.dirname(os.path.abspath(path))) for path in paths]


@cli.command("metrics")
@click.argument("results", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Write the aggregates as JSON.")
@click.option("--locale", default="en_US", show_default=True)
def metrics_command(results: Sequence[str], out_path: Optional[str], locale: str) -> None:
    """
    Aggregates the reported test metrics of several runs, one per method.
    """
    names = _method_names(results)
    histories = {name: read_results(path) for name, path in zip(names, results)}
    empty = [name for name, h in histories.items() if not h]
    if empty:
        raise click.UsageError(f"no task results in {empty[0]}")
    table = reported_table(histories)
    metric = next(iter(histories[names[0]].values())).metric
    try:
        suite = metric_suite(table, higher_is_better(metric))
    except ValueError as error:
        raise click.UsageError(str(error)) from None
    report: Dict[str, Any] = suite_to_dict(suite)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
    click.echo(render_suite(suite, locale))


def main() -> None:
    cli.main(prog_name="tom")
