import matplotlib as mpl
import matplotlib.pyplot as plt
from pathlib import Path

from assessment import AssessmentReport

# formatted with ruff 0.6.4

mpl.use("Agg")
# fixed ids and no date, so the svg is identical from run to run
mpl.rcParams["svg.hashsalt"] = "resrec"

# row order of the strategies in the report tables and the ecdf legend
STRATEGY_ORDER = (
    "rec_system_1",
    "rec_system_2",
    "no_resample",
    "ros_eqs",
    "rus_eqs",
    "smote5_eqs",
    "random_cell",
)

# strategy name -> label shown in the report
STRATEGY_DESCRIPTIONS = {
    "rec_system_1": "Rec. System 1 (one meta-classifier per method and multiplier)",
    "rec_system_2": "Rec. System 2 (meta-classifier per method, multiplier by regression)",
    "no_resample": "No resampling",
    "ros_eqs": "Random oversampling to balanced classes",
    "rus_eqs": "Random undersampling to balanced classes",
    "smote5_eqs": "SMOTE (k=5) to balanced classes",
    "random_cell": "Uniformly random grid cell",
}

POOL_TITLES = {"artificial": "Artificial", "real": "Real", "all": "All"}


def describeStrategy(name: str) -> str:
    if name in STRATEGY_DESCRIPTIONS:
        return STRATEGY_DESCRIPTIONS[name]
    if name.startswith("cell:"):
        _, method, m = name.split(":")
        return f"Always {method} with multiplier {m}"
    return name


def orderedStrategies(strategies) -> "list[str]":
    """known strategies in STRATEGY_ORDER, then the others as given"""
    known = [s for s in STRATEGY_ORDER if s in strategies]
    return known + [s for s in strategies if s not in STRATEGY_ORDER]


def araTable(report: AssessmentReport, fmt="{x:.4f}") -> str:
    """markdown table, one row per strategy and one ARA column per dataset pool"""
    columns = report.poolNames()
    if len(columns) > 1:
        columns = columns + ["all"]
    table = "| Strategy | " + " | ".join(POOL_TITLES.get(c, c) for c in columns) + " |\n"
    table += "|:-------------|" + "".join(":------:|" for _ in columns) + "\n"
    for strategy in orderedStrategies(report.strategies):
        values = [
            report.ara(strategy, None if c == "all" else c) for c in columns
        ]
        table += f"| {describeStrategy(strategy)} | "
        table += " | ".join(fmt.format(x=x) for x in values) + " |\n"
    return table


def figureEcdf(ax, report: AssessmentReport, pool: "str|None" = None):
    for strategy in orderedStrategies(report.strategies):
        if report.values(strategy, pool).size == 0:
            continue
        x, y = zip(*report.ecdfPoints(strategy, pool))
        ax.plot(x, y, label=describeStrategy(strategy))
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("RA")
    ax.set_ylabel("Share of datasets with RA < x")
    ax.legend(loc="upper left", fontsize="small")
    return ax


def writeEcdfFigure(report: AssessmentReport, filename: "str|Path"):
    pools = report.poolNames()
    fig, axes = plt.subplots(1, len(pools), figsize=(6 * len(pools), 5), squeeze=False)
    for ax, pool in zip(axes[0], pools):
        figureEcdf(ax, report, pool)
        ax.set_title(POOL_TITLES.get(pool, pool))
    fig.tight_layout()
    fig.savefig(filename, metadata={"Date": None})
    plt.close(fig)


def writeReportPage(report: AssessmentReport, outdir: "str|Path", *, templates="templates"):
    """fills templates/summary.md into <outdir>/summary.md and draws <outdir>/ecdf.svg"""
    outdir = Path(outdir)
    writeEcdfFigure(report, outdir / "ecdf.svg")
    meta = report.metadata
    learner = meta.get("learner", {})
    output = {
        "learner": learner.get("kind", "unknown"),
        "n_datasets": len(report.datasetIds),
        "pools": ", ".join(
            f"{POOL_TITLES.get(p, p)} ({sum(1 for v in report.pools.values() if v == p)})"
            for p in report.poolNames()
        ),
        "k": meta.get("k", "?"),
        "k_prime": meta.get("k_prime", "?"),
        "seed": meta.get("seed", "?"),
        "methods": ", ".join(meta.get("methods", [])),
        "multipliers": ", ".join(f"{m:g}" for m in meta.get("multipliers", [])),
        "table": araTable(report),
        "infeasible": "",
    }
    if meta.get("infeasible"):
        output["infeasible"] = "Strategies that could not be applied to some datasets (RA set to 0):\n\n"
        for name, count in sorted(meta["infeasible"].items()):
            output["infeasible"] += f" - {describeStrategy(name)}: {count} datasets\n"
    # Read in the file template
    with open(f"{templates}/summary.md", "r") as f:
        inp = f.read()
    # And output it:
    with open(outdir / "summary.md", "w+") as of:
        of.write(inp.format(**output))
