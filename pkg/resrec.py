# used ruff 0.6.4 to check and format this
import json
import logging
import sys

import click

from errors import ResRecError
from runpipeline import (
    loadRunConfig,
    runAssess,
    runGen,
    runGrid,
    runMeta,
    runRecommend,
    runReport,
    runTrain,
)

log = logging.getLogger("resrec")


@click.group()
@click.option(
    "--config",
    "configFile",
    type=click.Path(dir_okay=False),
    default=None,
    help="YAML run configuration (see configs/).",
)
@click.option("--seed", type=int, default=None, help="Master seed, overrides the config.")
@click.option("--workers", type=int, default=None, help="Worker processes for grid and assess.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Artifact directory.")
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY.PATH=VALUE",
    help="Override a config entry, e.g. --set datasets.generate.count=60",
)
@click.option("--verbose", "-v", is_flag=True, default=False, help="Debug logging.")
@click.option("--quiet", "-q", is_flag=True, default=False, help="Only warnings and errors.")
@click.pass_context
def cli(ctx, configFile, seed, workers, out, overrides, verbose, quiet):
    """Resampling recommendation for imbalanced binary classification

    The commands form a pipeline, each one reading the artifacts of the previous:

        gen -> grid -> meta -> train -> recommend
                           \\-> assess -> report

    For example: resrec.py --config configs/desk.yml gen
    """
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )
    ctx.ensure_object(dict)
    ctx.obj["options"] = dict(
        configFile=configFile, overrides=overrides, seed=seed, workers=workers, out=out
    )


def _config(ctx):
    options = ctx.obj["options"]
    return loadRunConfig(
        options["configFile"],
        options["overrides"],
        seed=options["seed"],
        workers=options["workers"],
        out=options["out"],
    )


@cli.command()
@click.option("--count", type=int, default=None, help="Number of artificial datasets.")
@click.pass_context
def gen(ctx, count):
    """Generate the artificial datasets (and copy the CSV ones) into out/datasets"""
    runGen(_config(ctx), count)


@cli.command()
@click.pass_context
def grid(ctx):
    """Cross-validated PR-AUC for every method and multiplier; cached per cell"""
    runGrid(_config(ctx))


@cli.command()
@click.pass_context
def meta(ctx):
    """Meta-features, quality-variables and targets into out/meta/meta.csv"""
    runMeta(_config(ctx))


@cli.command()
@click.pass_context
def train(ctx):
    """Train the recommendation systems of the learner's presets"""
    runTrain(_config(ctx))


@cli.command()
@click.option("--model", "modelPath", type=click.Path(dir_okay=False), required=True)
@click.option("--data", "dataPath", type=click.Path(dir_okay=False), required=True)
@click.option("--label-column", "labelColumn", default="label", show_default=True)
def recommend(modelPath, dataPath, labelColumn):
    """Print the recommended `method,multiplier` for a CSV dataset, then the detail record"""
    rec, fits = runRecommend(modelPath, dataPath, labelColumn)
    click.echo(rec.line())
    detail = dict(rec.detail)
    detail["base_learner_fits"] = fits
    click.echo(json.dumps(detail, sort_keys=True))


@cli.command()
@click.pass_context
def assess(ctx):
    """Meta-level cross-validation of recommenders against static strategies"""
    runAssess(_config(ctx))


@cli.command()
@click.pass_context
def report(ctx):
    """Render out/report/summary.md and ecdf.svg from the assessment"""
    runReport(_config(ctx))


def main(args=None) -> int:
    try:
        cli.main(args=args, prog_name="resrec", standalone_mode=False)
    except ResRecError as e:
        click.echo(e.oneLine(), err=True)
        return 2
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        message = " ".join(e.format_message().split())
        click.echo(f"error USAGE: {message}", err=True)
        return 2
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except Exception as e:
        log.debug("internal error", exc_info=True)
        message = " ".join(str(e).split())
        click.echo(f"error INTERNAL: {type(e).__name__}: {message}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    exit(main())
