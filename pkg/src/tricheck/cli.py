"""Thin-client command line over the service.

By default each command talks to the service in-process over an ASGI
transport (no sockets, no network); --server points at a remote instance.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    if server:
        resp = httpx.post(f"{server.rstrip('/')}{path}", json=payload, timeout=600)
    else:
        import asyncio

        from .service.app import app

        async def _in_process() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://tricheck.internal", timeout=600
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(_in_process())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"{path}: {detail}")
    return resp.json()


def _fmt(x: Optional[str]) -> str:
    if x is None:
        return "n/a"
    if "/" in str(x):
        num, den = str(x).split("/")
        return f"{int(num) / int(den):.4f}"
    return str(x)


@click.group()
def main() -> None:
    """Consensus engine: select a correct candidate program or abstain."""


@main.command()
@click.option("--problems", required=True, type=click.Path(exists=True), help="problem manifest (jsonl)")
@click.option("--output", required=True, type=click.Path(), help="artifact directory")
@click.option("--strategies", default="tri,plurality,majority", show_default=True)
@click.option("--mode", type=click.Choice(["replay", "live"]), default="replay", show_default=True)
@click.option("--replay", "replay_dir", type=click.Path(), default=None, help="transcript directory for replay")
@click.option("--record", "record_dir", type=click.Path(), default=None, help="transcript directory for recording")
@click.option("--angelic-fraction", default="1/3", show_default=True)
@click.option("--timeout-ms", default=10_000, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n", "n_samples", default=30, show_default=True, help="samples per problem (live mode)")
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--model", default="default", show_default=True, help="provider model name (live mode)")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="write the metrics table as CSV")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def run(
    problems, output, strategies, mode, replay_dir, record_dir, angelic_fraction,
    timeout_ms, jobs, seed, n_samples, temperature, model, csv_path, server,
) -> None:
    """Run consensus strategies over a problem manifest and report metrics."""
    if mode == "replay" and record_dir:
        raise click.ClickException("--record conflicts with replay mode")
    payload = {
        "manifest_path": str(Path(problems).resolve()),
        "output_dir": str(Path(output).resolve()),
        "strategies": [s.strip() for s in strategies.split(",") if s.strip()],
        "mode": mode,
        "angelic_fraction": angelic_fraction,
        "timeout_ms": timeout_ms,
        "jobs": jobs,
        "seed": seed,
        "n": n_samples,
        "temperature": temperature,
        "model": model,
        "replay_dir": str(Path(replay_dir).resolve()) if replay_dir else None,
        "record_dir": str(Path(record_dir).resolve()) if record_dir else None,
    }
    data = _post(server, "/pipeline/run", payload)
    click.echo(f"problems: {data['problems']}")
    for row in data["decisions"]:
        if row["decision"] == "selected":
            click.echo(f"  {row['problem']:<24} {row['strategy']:<20} selected {row['class']}")
        else:
            click.echo(f"  {row['problem']:<24} {row['strategy']:<20} abstained ({row['reason']})")
    header = ("strategy", "reliable", "overall", "abst.rate", "prec", "recall", "f1")
    click.echo(" ".join(f"{h:>12}" for h in header))
    csv_rows = [",".join(header)]
    for strategy, block in sorted(data["per_strategy"].items()):
        met = block["metrics"]
        cells = (
            strategy,
            _fmt(met["reliable_accuracy"]),
            _fmt(met["overall_accuracy"]),
            _fmt(met["abstention_rate"]),
            _fmt(met["precision_abs"]),
            _fmt(met["recall_abs"]),
            _fmt(met["f1_abs"]),
        )
        click.echo(" ".join(f"{c:>12}" for c in cells))
        csv_rows.append(",".join(cells))
    if csv_path:
        Path(csv_path).write_text("\n".join(csv_rows) + "\n", "utf-8")


@main.command()
@click.option("--models", default=1000, show_default=True)
@click.option("--trials", default=100_000, show_default=True)
@click.option("--mc-models", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--hallucination-classes", default=2, show_default=True)
@click.option("--problems-per-class", default=2, show_default=True)
@click.option("--program-classes", default=6, show_default=True)
@click.option("--correct-per-problem", default=1, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--server", default=None)
def simulate(
    models, trials, mc_models, seed, hallucination_classes, problems_per_class,
    program_classes, correct_per_problem, csv_path, server,
) -> None:
    """Numerically check the selection-gain claims on random parrot models."""
    payload = {
        "models": models,
        "trials": trials,
        "mc_models": mc_models,
        "seed": seed,
        "num_hallucination_classes": hallucination_classes,
        "problems_per_class": problems_per_class,
        "num_program_classes": program_classes,
        "correct_per_problem": correct_per_problem,
    }
    data = _post(server, "/theory/simulate", payload)
    click.echo(f"models={data['models']} trials={data['trials']} seed={data['seed']}")
    click.echo(f"  min expected gain:      {_fmt(data['min_delta'])}")
    click.echo(f"  gain positive (equal-correct models): {'pass' if data['all_positive'] else 'FAIL'}")
    click.echo(f"  gain positive (dissociative models):  {'pass' if data['dissociative_positive'] else 'FAIL'}")
    click.echo(f"  rearrangement inequality + strictness: {'pass' if data['rearrangement_ok'] else 'FAIL'}")
    click.echo(f"  monte-carlo within 3 standard errors:  {'pass' if data['mc_within_three_se'] else 'FAIL'}")
    csv_rows = ["exact,estimate,stderr,within"]
    for row in data["mc_rows"]:
        click.echo(
            f"    exact={row['exact']:+.6f} estimate={row['estimate']:+.6f} "
            f"stderr={row['stderr']:.6f} {'ok' if row['within'] else 'OUT'}"
        )
        csv_rows.append(f"{row['exact']},{row['estimate']},{row['stderr']},{row['within']}")
    if csv_path:
        Path(csv_path).write_text("\n".join(csv_rows) + "\n", "utf-8")
    if not (data["all_positive"] and data["dissociative_positive"] and data["rearrangement_ok"] and data["mc_within_three_se"]):
        sys.exit(1)


@main.command()
@click.argument("samples_dir", type=click.Path(exists=True))
@click.option("--step", default=5, show_default=True)
@click.option("--server", default=None)
def entropy(samples_dir, step, server) -> None:
    """Class-distribution entropy versus sample-size prefix.

    SAMPLES_DIR holds one JSON file per problem: a list of class labels,
    one per recorded sample, in sampling order.
    """
    labels = {}
    for path in sorted(Path(samples_dir).glob("*.json")):
        labels[path.stem] = json.loads(path.read_text("utf-8"))
    if not labels:
        raise click.ClickException(f"no sample files in {samples_dir}")
    data = _post(server, "/entropy", {"labels": labels, "step": step})
    for problem, rows in sorted(data["rows"].items()):
        cells = " ".join(f"n={int(r['n'])}:{r['entropy']:.4f}" for r in rows)
        click.echo(f"{problem:<24} {cells}")


@main.command()
@click.option("--run-dir", type=click.Path(exists=True), default=None, help="summarize a run's artifacts")
@click.option("--property", "property_path", type=click.Path(exists=True), default=None, help="evaluate a property s-expression")
@click.option("--candidates", "candidates_path", type=click.Path(exists=True), default=None, help="fixture candidates (json) for --property")
@click.option("--angelic-fraction", default="1/3", show_default=True)
@click.option("--server", default=None)
def inspect(run_dir, property_path, candidates_path, angelic_fraction, server) -> None:
    """Inspect run artifacts, or evaluate a property term against fixtures."""
    if property_path:
        term = Path(property_path).read_text("utf-8")
        candidates = []
        if candidates_path:
            candidates = json.loads(Path(candidates_path).read_text("utf-8"))
        data = _post(
            server,
            "/eval",
            {"term": term, "candidates": candidates, "angelic_fraction": angelic_fraction},
        )
        click.echo(f"result: {data['result']}")
        for stats in data["forall"]:
            click.echo(
                f"  forall {stats['label'] or '?'}: size={stats['domain_size']} "
                f"true={stats['true_count']} angelic={stats['angelic_count']} "
                f"false={stats['false_count']} demonic={stats['demonic_count']} "
                f"T={stats['threshold']} -> {'pass' if stats['verdict'] else 'fail'}"
            )
        return
    if not run_dir:
        raise click.ClickException("pass --run-dir or --property")
    decisions = Path(run_dir) / "decisions.jsonl"
    if not decisions.exists():
        raise click.ClickException(f"{decisions} not found")
    for line in decisions.read_text("utf-8").splitlines():
        row = json.loads(line)
        if row["decision"] == "selected":
            click.echo(f"{row['problem']:<24} {row['strategy']:<20} selected {row['class']}")
        else:
            click.echo(f"{row['problem']:<24} {row['strategy']:<20} abstained ({row['reason']})")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
