"""Command line interface.

Offline commands (passport validation, quality assessment, audit log
verification and export) run locally on files; commands that mutate
platform state talk to a running API over HTTP.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .audit import AuditTrail, FileSegmentStore
from .clock import SystemClock
from .errors import AegisError
from .interop import UnitTable, convert_units, ingest_case
from .quality import assess_case, assess_dataset
from .registry import parse_variable_specs, validate_passport


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")


def _client(api_url: str, token: str | None) -> httpx.Client:
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    return httpx.Client(base_url=api_url, headers=headers, timeout=30.0)


def _print_response(response: httpx.Response) -> None:
    try:
        click.echo(json.dumps(response.json(), indent=2))
    except ValueError:
        click.echo(response.text)
    if response.status_code >= 400:
        sys.exit(1)


@click.group()
def main():
    """Governance gateway for clinical AI prediction services."""


# -- passport ------------------------------------------------------------


@main.group()
def passport():
    """Passport file operations."""


@passport.command("validate")
@click.argument("file", type=click.Path(exists=True))
def passport_validate(file: str):
    """Validate a passport document against the published schema."""
    document = _load_json(file)
    report = validate_passport(document, UnitTable.default().knows)
    click.echo(json.dumps(report.to_document(), indent=2))
    if not report.ok:
        sys.exit(1)


# -- service -------------------------------------------------------------


@main.group()
def service():
    """Service registration."""


@service.command("register")
@click.argument("file", type=click.Path(exists=True))
@click.option("--endpoint", required=True, help="Model adapter endpoint URL.")
@click.option("--api-url", default="http://localhost:8000", show_default=True)
@click.option("--token", envvar="AEGIS_TOKEN", help="Session token (or AEGIS_TOKEN).")
def service_register(file: str, endpoint: str, api_url: str, token: str | None):
    """Register a model service from its passport file."""
    document = _load_json(file)
    with _client(api_url, token) as client:
        _print_response(
            client.post("/services", json={"passport": document, "endpoint": endpoint})
        )


# -- quality -------------------------------------------------------------


@main.group()
def quality():
    """Data quality assessment."""


@quality.command("assess")
@click.option("--schema", "schema_file", required=True, type=click.Path(exists=True))
@click.option("--data", "data_file", required=True, type=click.Path(exists=True))
def quality_assess(schema_file: str, data_file: str):
    """Assess a flat case document, or a dataset ({"cases": [...]})."""
    units = UnitTable.default()
    clock = SystemClock()
    try:
        schema = parse_variable_specs(_load_json(schema_file), units.knows)
        data = _load_json(data_file)
        if isinstance(data, dict) and "cases" in data:
            cases = [
                convert_units(ingest_case(raw, "flat", clock=clock).case, schema, units)
                for raw in data["cases"]
            ]
            report = assess_dataset(cases, schema)
        else:
            case = convert_units(ingest_case(data, "flat", clock=clock).case, schema, units)
            report = assess_case(case, schema)
    except AegisError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(report.to_document(), indent=2))
    if report.verdict == "block":
        sys.exit(1)


# -- monitor -------------------------------------------------------------


@main.group()
def monitor():
    """Performance monitoring."""


@monitor.command("snapshot")
@click.option("--service", "service_id", required=True)
@click.option("--window-start", default=None)
@click.option("--window-end", default=None)
@click.option("--target", default=None)
@click.option("--api-url", default="http://localhost:8000", show_default=True)
@click.option("--token", envvar="AEGIS_TOKEN")
def monitor_snapshot(service_id, window_start, window_end, target, api_url, token):
    """Compute a performance snapshot over a window."""
    body = {"window_start": window_start, "window_end": window_end, "target": target}
    with _client(api_url, token) as client:
        _print_response(
            client.post(f"/services/{service_id}/performance/compute", json=body)
        )


# -- audit ---------------------------------------------------------------


@main.group()
def audit():
    """Audit log verification and export."""


def _open_trail(log_dir: str) -> AuditTrail:
    store = FileSegmentStore(Path(log_dir))
    return AuditTrail(store)


@audit.command("verify")
@click.option("--log-dir", required=True, type=click.Path(exists=True))
def audit_verify(log_dir: str):
    """Recompute the hash chain of a persisted audit log."""
    status = _open_trail(log_dir).verify_chain()
    click.echo(
        json.dumps(
            {"ok": status.ok, "first_bad_seq": status.first_bad_seq, "checked": status.checked}
        )
    )
    if not status.ok:
        sys.exit(1)


@audit.command("export")
@click.option("--log-dir", required=True, type=click.Path(exists=True))
@click.option("--range", "seq_range", default=None, help="START:END sequence range.")
def audit_export(log_dir: str, seq_range: str | None):
    """Emit canonical records, bit-exact for external re-verification."""
    start = end = None
    if seq_range:
        try:
            start_text, end_text = seq_range.split(":", 1)
            start = int(start_text) if start_text else None
            end = int(end_text) if end_text else None
        except ValueError:
            raise click.ClickException("--range must look like START:END")
    for line in _open_trail(log_dir).export_lines(start, end):
        click.echo(line)


# -- servers -------------------------------------------------------------


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--seed-demo", is_flag=True, help="Seed demo users and the stub services.")
@click.option(
    "--production",
    is_flag=True,
    help="Enforce the TLS transport requirement on every request.",
)
def serve(host, port, data_dir, seed_demo, production):
    """Run the governance API."""
    import uvicorn

    from .api import create_app
    from .config import PlatformConfig
    from .platform import GovernancePlatform

    config = PlatformConfig(
        data_dir=Path(data_dir) if data_dir else None,
        development=not production,
    )
    platform = GovernancePlatform(config)
    if seed_demo:
        info = platform.seed_demo()
        click.echo(json.dumps(info, indent=2))
    uvicorn.run(create_app(platform), host=host, port=port, log_level="warning")


@main.command("serve-stub-adapter")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8601, show_default=True)
def serve_stub_adapter(host, port):
    """Expose the bundled stub model over the documented adapter contract."""
    import uvicorn

    from .api import create_adapter_app
    from .stub_model import StubPalliativeModel

    uvicorn.run(create_adapter_app(StubPalliativeModel()), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
