"""Command-line front end: ``jensen-chains gen|run|verify|fuzz|report``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 I/O error.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
import warnings

import click

from .convex_catalog import KINDS
from .errors import JensenError, StallWarning
from .instances import (
    FAMILIES,
    GenParams,
    Instance,
    generate,
    result_to_json,
    run_instance,
    verify_record,
)
from .verify_oracle import Check, FuzzConfig, VerifyReport, baseline_margin, fuzz

EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 1, 2, 3


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except JensenError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(EXIT_IO)
    return wrapper


def _write(path, text: str):
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _read_jsonl(path) -> list:
    from .errors import ConfigError

    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"{path} contains no records")
    out = []
    for no, line in enumerate(lines, 1):
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{no}: invalid JSON ({exc.msg})") from exc
    return out


def _split(values, allowed, what):
    from .errors import ConfigError

    items = []
    for v in values:
        items.extend(s.strip() for s in v.split(",") if s.strip())
    for item in items:
        if item not in allowed:
            raise ConfigError(f"unknown {what} {item!r}; expected one of {', '.join(allowed)}")
    return tuple(dict.fromkeys(items))


def _ranges(n, n_min, n_max, N, N_min, N_max):
    if n is not None:
        n_min = n_max = n
    if N is not None:
        N_min = N_max = N
    return (n_min, n_max), (N_min, N_max)


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def generation_options(fn):
    opts = [
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--n", "n", type=int, default=None, help="Fix the number of points."),
        click.option("--n-min", type=int, default=1, show_default=True),
        click.option("--n-max", type=int, default=8, show_default=True),
        click.option("--N", "N", type=int, default=None, help="Fix the number of chain steps."),
        click.option("--N-min", "N_min", type=int, default=1, show_default=True),
        click.option("--N-max", "N_max", type=int, default=6, show_default=True),
        click.option("--family", "families", multiple=True, help="Families to include (repeat or comma-separate)."),
        click.option("--catalog", multiple=True, help="Function kinds to draw from (repeat or comma-separate)."),
        click.option("--denominator-max", type=int, default=10**4, show_default=True),
        click.option("--mode", type=click.Choice(["exact", "float"]), default="exact", show_default=True),
        click.option("--tie-rate", type=float, default=0.35, show_default=True),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Refinement chains for the normalized Jensen functional."""
    # stalls are legitimate chain outcomes; fuzz reports count them instead
    warnings.simplefilter("ignore", StallWarning)


@main.command()
@generation_options
@click.option("--count", type=int, default=10, show_default=True, help="Number of random cases.")
@_guarded
def gen(seed, n, n_min, n_max, N, N_min, N_max, families, catalog, denominator_max, mode, tie_rate, out, count):
    """Write a JSON-lines file of random instances."""
    (n_min, n_max), (N_min, N_max) = _ranges(n, n_min, n_max, N, N_min, N_max)
    params = GenParams(
        n_min=n_min, n_max=n_max, N_min=N_min, N_max=N_max,
        catalog=_split(catalog, KINDS, "kind") or KINDS,
        denominator_max=denominator_max, mode=mode, tie_rate=tie_rate,
        families=_split(families, FAMILIES, "family") or FAMILIES,
    )
    lines = [_dumps(inst.to_json()) for inst in generate(seed, count, params)]
    _write(out, "".join(line + "\n" for line in lines))


@main.command()
@click.argument("instances", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--max-N", "max_N", type=int, default=64, show_default=True, help="Cap on chain length.")
@_guarded
def run(instances, out, max_N):
    """Run every instance and write one result record per line."""
    from .errors import ConfigError

    records, failed = [], 0
    for obj in _read_jsonl(instances):
        try:
            inst = Instance.from_json(obj)
            res = run_instance(inst, max_N=max_N)
        except JensenError as exc:
            raise ConfigError(f"instance {obj.get('id', '?')}: {exc}") from exc
        rec = result_to_json(inst, res)
        failed += not rec.get("sign_ok", rec.get("ok"))
        records.append(rec)
    _write(out, "".join(_dumps(r) + "\n" for r in records))
    if failed:
        click.echo(f"{failed} instance(s) violate their bound", err=True)
        sys.exit(EXIT_FAIL)


def _verify_all(path) -> list:
    out = []
    for obj in _read_jsonl(path):
        try:
            rep = verify_record(obj)
        except (JensenError, KeyError, TypeError, ValueError) as exc:
            rep = VerifyReport(obj.get("id"))
            rep.add(Check("load", False, type(exc).__name__, str(exc), 0.0, None, float("inf")))
        rep.instance_id = obj.get("id")
        out.append((obj, rep))
    return out


@main.command()
@click.argument("results", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Verification report (JSON).")
@_guarded
def verify(results, out):
    """Re-check stored results; exit 0 only if every check passes."""
    checked = _verify_all(results)
    reports = sorted((rep for _, rep in checked), key=lambda r: str(r.instance_id))
    doc = {
        "records": len(reports),
        "failed": sum(not r.passed for r in reports),
        "worst_violation": max((r.worst_violation for r in reports), default=0.0),
        "reports": [r.to_json() for r in reports],
    }
    _write(out, json.dumps(doc, indent=1) + "\n")
    if doc["failed"]:
        for r in reports:
            if not r.passed:
                names = ", ".join(sorted({c.name for c in r.failures}))
                click.echo(f"FAIL {r.instance_id}: {names}", err=True)
        sys.exit(EXIT_FAIL)


@main.command()
@click.argument("results", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV summary.")
@_guarded
def report(results, out):
    """One CSV line per stored result: id, family, defect, worst check, pass."""
    rows = [["id", "family", "defect", "worst_check", "pass"]]
    for obj, rep in _verify_all(results):
        if "trace" in obj:
            defect = obj.get("defect")
        else:
            try:
                inst = Instance.from_json(obj["instance"])
                defect = baseline_margin(inst, run_instance(inst))
            except (JensenError, KeyError):
                defect = None
        rows.append([obj.get("id"), obj.get("family"), repr(defect), rep.worst_check or "", "1" if rep.passed else "0"])
    _write(out, _csv(rows))


@main.command(name="fuzz")
@generation_options
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Per-instance CSV summary.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: $JENSEN_CHAIN_THREADS or 1).")
@_guarded
def fuzz_cmd(seed, n, n_min, n_max, N, N_min, N_max, families, catalog, denominator_max, mode, tie_rate, out,
             trials, csv_path, threads):
    """Generate, run and verify random instances of every family."""
    (n_min, n_max), (N_min, N_max) = _ranges(n, n_min, n_max, N, N_min, N_max)
    config = FuzzConfig(
        seed=seed, trials=trials, n_range=(n_min, n_max), N_range=(N_min, N_max),
        catalog=_split(catalog, KINDS, "kind"), mode=mode, denominator_max=denominator_max,
        tie_rate=tie_rate, families=_split(families, FAMILIES, "family"), threads=threads,
    )
    result = fuzz(config)
    _write(out, json.dumps(result.to_json(), indent=1) + "\n")
    if csv_path:
        _write(csv_path, _csv(result.csv_rows()))
    s = result.summary
    click.echo(f"{s['instances']} checks, {s['failed']} failed, worst violation {s['worst_violation']:.3g}", err=True)
    if not result.passed:
        sys.exit(EXIT_FAIL)


if __name__ == "__main__":
    main()
