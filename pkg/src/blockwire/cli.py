"""Batch front door: import, validate, check, compose, and list protocols.

Exit status: 0 when clean, 1 when the run produced Error diagnostics,
2 on usage or file-parse failures. ``--format machine`` prints a stable
sorted JSON report for CI diffing.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import board as board_mod
from .checkers import DefError, ProtocolRegistry, builtin_registry, load_protocol_registry
from .composer import ComposeError, compose_schematic, export_netlist
from .diagnostics import Diagnostic, has_errors, sort_diagnostics
from .engine import DesignLoadError, load_design
from .library import BlockLibrary, DuplicateBlockError

EXIT_CLEAN = 0
EXIT_ERRORS = 1
EXIT_USAGE = 2


class UsageFailure(click.ClickException):
    """File or argument problems exit 2, distinct from Error diagnostics."""

    exit_code = EXIT_USAGE


def _default_library_dir() -> str:
    return str(Path(os.environ.get("BW_DATA_DIR", "bw_data")) / "library")


def _load_registry(defs: str | None) -> ProtocolRegistry:
    if defs is None:
        return builtin_registry()
    try:
        return load_protocol_registry(defs)
    except (OSError, json.JSONDecodeError, DefError) as exc:
        raise UsageFailure(f"cannot load protocol definitions: {exc}")


def _print_diags(diags: list[Diagnostic]) -> None:
    for d in sort_diagnostics(diags):
        click.echo(f"  [{d.severity.value}] {d.kind.value} @ {d.subject}: {d.message}")


def _machine_report(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


@click.group()
def main() -> None:
    """Typed circuit-block composition toolkit."""


@main.command("import")
@click.argument("bundles", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--library", "library_dir", default=_default_library_dir, show_default="$BW_DATA_DIR/library")
@click.option("--overwrite", is_flag=True, help="Replace blocks that already exist.")
@click.option("--defs", default=None, type=click.Path(exists=True), help="Protocol definitions file.")
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
def import_cmd(bundles: tuple[str, ...], library_dir: str, overwrite: bool, defs: str | None, fmt: str) -> None:
    """Validate bundles and store the accepted ones in the library."""
    library = BlockLibrary(library_dir, registry=_load_registry(defs))
    reports = []
    for bundle in bundles:
        try:
            _, report = library.import_block(bundle, overwrite=overwrite)
        except DuplicateBlockError as exc:
            raise UsageFailure(str(exc))
        reports.append((bundle, report))
    if fmt == "machine":
        click.echo(_machine_report({"imports": [{"bundle": b, **r.to_json()} for b, r in reports]}))
    else:
        for bundle, report in reports:
            status = "accepted" if report.accepted else "rejected"
            click.echo(f"{bundle}: {status} ({report.block_id})")
            _print_diags(report.diagnostics)
    if any(not r.accepted for _, r in reports):
        sys.exit(EXIT_ERRORS)


@main.command("validate")
@click.argument("bundle", type=click.Path(exists=True))
@click.option("--defs", default=None, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
def validate_cmd(bundle: str, defs: str | None, fmt: str) -> None:
    """Run all import checks on a bundle without storing it."""
    library = BlockLibrary(registry=_load_registry(defs))
    _, report = library.validate_bundle(bundle)
    if fmt == "machine":
        click.echo(_machine_report(report.to_json()))
    else:
        click.echo(f"{bundle}: {'accepted' if report.accepted else 'rejected'} ({report.block_id})")
        _print_diags(report.diagnostics)
    sys.exit(EXIT_CLEAN if report.accepted else EXIT_ERRORS)


def _load_design_file(design_file: str, library_dir: str, defs: str | None):
    registry = _load_registry(defs)
    library = BlockLibrary(library_dir, registry=registry)
    try:
        text = Path(design_file).read_text(encoding="utf-8")
        return load_design(text, library, registry=registry)
    except (OSError, DesignLoadError) as exc:
        raise UsageFailure(f"cannot load design: {exc}")


@main.command("check")
@click.argument("design_file", type=click.Path(exists=True))
@click.option("--library", "library_dir", default=_default_library_dir, show_default="$BW_DATA_DIR/library")
@click.option("--defs", default=None, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
def check_cmd(design_file: str, library_dir: str, defs: str | None, fmt: str) -> None:
    """Run every check family over a design file and report diagnostics."""
    design = _load_design_file(design_file, library_dir, defs)
    diags = design.check_design()
    if fmt == "machine":
        click.echo(_machine_report({"design": design.design_id, "diagnostics": [d.to_json() for d in diags]}))
    else:
        click.echo(f"{design_file}: {len(diags)} diagnostic(s)")
        _print_diags(diags)
    sys.exit(EXIT_ERRORS if has_errors(diags) else EXIT_CLEAN)


@main.command("compose")
@click.argument("design_file", type=click.Path(exists=True))
@click.option("--library", "library_dir", default=_default_library_dir, show_default="$BW_DATA_DIR/library")
@click.option("--defs", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
def compose_cmd(design_file: str, library_dir: str, defs: str | None, out_dir: str, fmt: str) -> None:
    """Merge a design into a netlist and a routed board under --out."""
    design = _load_design_file(design_file, library_dir, defs)
    try:
        netlist = compose_schematic(design)
    except ComposeError as exc:
        if fmt == "machine":
            click.echo(_machine_report({"error": str(exc), "diagnostics": [d.to_json() for d in exc.diagnostics]}))
        else:
            click.echo(f"compose blocked: {exc}")
            _print_diags(exc.diagnostics)
        sys.exit(EXIT_ERRORS)
    try:
        result = board_mod.compose_board(design, netlist)
    except board_mod.UnplacedInstanceError as exc:
        raise UsageFailure(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_netlist(netlist, out / "netlist.json")
    (out / "board.svg").write_text(result.svg, encoding="utf-8")
    (out / "design.json").write_text(design.dumps(), encoding="utf-8")
    report = {
        "netlist": str(out / "netlist.json"),
        "svg": str(out / "board.svg"),
        "links": len(result.links),
        "routed": len(result.tracks),
        "diagnostics": [d.to_json() for d in result.diagnostics],
    }
    if fmt == "machine":
        click.echo(_machine_report(report))
    else:
        click.echo(f"netlist -> {report['netlist']}")
        click.echo(f"board   -> {report['svg']} ({report['routed']}/{report['links']} links routed)")
        _print_diags(result.diagnostics)
    sys.exit(EXIT_ERRORS if has_errors(result.diagnostics) else EXIT_CLEAN)


@main.command("protocols")
@click.option("--defs", default=None, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
def protocols_cmd(defs: str | None, fmt: str) -> None:
    """Print the effective protocol registry."""
    registry = _load_registry(defs)
    rows = []
    for name in registry.names():
        spec = registry.get(name)
        rows.append(
            {
                "name": spec.name,
                "signals": list(spec.signals),
                "multi_drop": spec.multi_drop,
                "validators": list(spec.attr_validators),
            }
        )
    if fmt == "machine":
        click.echo(_machine_report({"protocols": rows}))
    else:
        for row in rows:
            signals = ", ".join(s or "(unnamed)" for s in row["signals"])
            click.echo(f"{row['name']}: signals [{signals}] multi_drop={row['multi_drop']} validators={row['validators']}")


if __name__ == "__main__":  # pragma: no cover
    main()
