"""``reebkit`` command line: run scenarios, list the catalog."""
from __future__ import annotations

import sys

import click

from .scenario import MODELS, ScenarioError, builtin_scenarios, load_scenario, record_line, resolve_target, run_scenario


def _pretty(records: list[dict]) -> str:
    rows = [("task", "kind", "expect", "verdict", "margin", "ok")]
    for r in records:
        m = r["margin"]
        rows.append((r["task"], r["kind"], r["expect"], r["verdict"],
                     "-" if m is None else f"{m:.3e}", "ok" if r["ok"] else "FAILED"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


@click.group()
def main():
    """Verify contact, confoliation and connection conditions on chart models."""


@main.command()
@click.argument("target")
@click.option("--grid", type=click.IntRange(min=2), default=None, help="Samples per axis (overrides the scenario).")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Residual tolerance for identity/connection/descent checks.")
@click.option("--format", "fmt", type=click.Choice(["records", "pretty"]), default="records", show_default=True)
@click.option("--pretty", "fmt", flag_value="pretty", help="Shorthand for --format pretty.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for random property suites.")
def run(target, grid, tol, fmt, seed):
    """Run a built-in scenario by name or a scenario file.

    Exit status: 0 if every task met its expectation, 1 otherwise, 2 for a
    scenario that cannot be read or parsed.
    """
    try:
        text, source = resolve_target(target)
        scn = load_scenario(text, source)
    except ScenarioError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(2)
    records = run_scenario(scn, grid=grid, tol=tol, seed=seed)
    if fmt == "pretty":
        click.echo(f"{scn.name}: {scn.description.splitlines()[0]}" if scn.description else scn.name)
        click.echo(_pretty(records))
    else:
        for r in records:
            click.echo(record_line(r))
    failed = [r for r in records if not r["ok"]]
    for r in failed:
        click.echo(f"task {r['task']} (line {r['line']}): expected {r['expect']}, got {r['verdict']}", err=True)
    sys.exit(1 if failed else 0)


@main.command(name="list")
def list_():
    """Alphabetized catalog of built-in scenarios and models."""
    click.echo("scenarios:")
    for name, desc in builtin_scenarios().items():
        click.echo(f"  {name:<22} {desc}")
    click.echo("models:")
    for name, (_, desc) in sorted(MODELS.items()):
        click.echo(f"  {name:<22} {desc}")


if __name__ == "__main__":
    main()
