"""Command-line client for the auction service.

Every subcommand talks to the FastAPI app: in-process by default, or to a
running server via --url.  File reading/writing happens client-side; the
service only ever sees and returns JSON documents.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import experiments


class ServiceClient:
    def __init__(self, url: str | None = None):
        if url:
            import httpx

            self._client = httpx.Client(base_url=url, timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code >= 400:
            raise click.ClickException(f"{path} failed ({response.status_code}): {response.text}")
        return response.json()


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _dump_json(doc, path: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        click.echo(f"wrote {path}")
    else:
        click.echo(text, nl=False)


@click.group()
@click.option("--url", default=None, help="Base URL of a running service; defaults to in-process.")
@click.pass_context
def main(ctx, url):
    """Clock auction engine: experiments, training, price generation."""
    ctx.obj = ServiceClient(url)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the auction service under uvicorn."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command("gen-domain")
@click.option("--seed", required=True, type=int)
@click.option("--capacities", required=True, help="Comma-separated copy counts, e.g. 3,3,3,3.")
@click.option("--bidders", "n_bidders", required=True, type=int)
@click.option("--interest-size", default=None, help="min,max items per bidder (default: all).")
@click.option("--synergy", default="0.0,0.3", help="min,max percentage synergy per extra copy.")
@click.option("--out", default=None, help="Output path for the value-model JSON.")
@click.pass_obj
def gen_domain(client, seed, capacities, n_bidders, interest_size, synergy, out):
    """Emit a seeded synthetic value-model file."""
    spec = {
        "capacities": [int(c) for c in capacities.split(",")],
        "n_bidders": n_bidders,
        "synergy_range": [float(x) for x in synergy.split(",")],
    }
    if interest_size:
        spec["interest_size"] = [int(x) for x in interest_size.split(",")]
    doc = client.post("/domain/generate", {"seed": seed, "spec": spec})
    _dump_json(doc, out)


@main.command()
@click.option("--domain", "domain_path", required=True, help="Value-model JSON file.")
@click.option("--bidder", default=0, type=int)
@click.option("--observations", "obs_path", default=None,
              help="JSON list of {bundle, price, round}; default: synthesize clock rounds.")
@click.option("--clock-rounds", default=20, type=int, help="Synthesized truthful rounds.")
@click.option("--hidden", default="16", help="Comma-separated hidden layer widths.")
@click.option("--epochs", default=30, type=int)
@click.option("--lr", default=0.01, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, help="Output path for the net JSON.")
@click.pass_obj
def train(client, domain_path, bidder, obs_path, clock_rounds, hidden, epochs, lr, seed, out):
    """Fit one bidder's net to demand observations."""
    domain_doc = _load_json(domain_path)
    if obs_path:
        observations = _load_json(obs_path)
    else:
        outcome = client.post("/auction/cca", {
            "domain": domain_doc, "q_max": clock_rounds, "heuristic": "clock",
        })
        reports = outcome["outcome"]["reports"]
        if not (0 <= bidder < len(reports)):
            raise click.ClickException(f"no bidder {bidder}")
        observations = reports[bidder]
    response = client.post("/train", {
        "capacities": domain_doc["capacities"],
        "observations": observations,
        "architecture": {"hidden_dims": [int(h) for h in hidden.split(",")]},
        "config": {"epochs": epochs, "learning_rate": lr, "seed": seed},
        "init_seed": seed,
    })
    click.echo(json.dumps({
        "steps": response["steps"],
        "final_loss": response["epoch_losses"][-1] if response["epoch_losses"] else 0.0,
        "converged_epoch": response["converged_epoch"],
    }))
    _dump_json(response["net"], out)


@main.command("next-price")
@click.option("--nets", "net_paths", multiple=True, help="Serialized net JSON files, one per bidder.")
@click.option("--domain", "domain_path", default=None,
              help="Value-model JSON; used directly when no nets are given.")
@click.option("--anchor", required=True, help="Comma-separated anchor prices.")
@click.option("--epochs", default=300, type=int)
@click.option("--mu", default=2.0, type=float)
@click.option("--nu", default=1.01, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
@click.pass_obj
def next_price_cmd(client, net_paths, domain_path, anchor, epochs, mu, nu, seed, out):
    """Generate the next demand query from trained nets (or true models)."""
    payload = {
        "anchor": [float(x) for x in anchor.split(",")],
        "config": {"epochs": epochs, "mu": mu, "nu": nu, "seed": seed},
    }
    if net_paths:
        payload["nets"] = [_load_json(p) for p in net_paths]
    elif domain_path:
        payload["domain"] = _load_json(domain_path)
    else:
        raise click.ClickException("provide --nets or --domain")
    _dump_json(client.post("/next-price", payload), out)


@main.command()
@click.option("--domain", "domain_path", required=True)
@click.option("--q-max", default=100, type=int)
@click.option("--increment", default=0.05, type=float)
@click.option("--heuristic", default="clock", type=click.Choice(["clock", "raised", "profit_max"]))
@click.option("--payment-rule", default="vcg", type=click.Choice(["vcg", "vcg_nearest"]))
@click.option("--out", default=None)
@click.pass_obj
def cca(client, domain_path, q_max, increment, heuristic, payment_rule, out):
    """Run the classic clock auction on a value-model file."""
    response = client.post("/auction/cca", {
        "domain": _load_json(domain_path),
        "q_max": q_max, "increment": increment,
        "heuristic": heuristic, "payment_rule": payment_rule,
    })
    click.echo(json.dumps(response["metrics"]))
    _dump_json(response["outcome"], out)


@main.command()
@click.option("--config", "config_path", required=True, help="Experiment JSON config.")
@click.option("--out", "outdir", required=True, help="Output directory.")
@click.option("--workers", default=None, type=int,
              help="Seed-level worker processes (default: CLOCKAUCTION_WORKERS or 1).")
@click.option("--seeds", default=None, help="Override the config's seed list, e.g. 1..30.")
@click.pass_obj
def run(client, config_path, outdir, workers, seeds):
    """Run a full experiment sweep and write results.csv, traces and outcomes."""
    config = _load_json(config_path)
    if seeds:
        config["seeds"] = [seeds]
    result = client.post("/experiments/run", {"config": config, "workers": workers})
    written = experiments.write_result_files(result, outdir)
    for key, stats in result["summary"].items():
        click.echo(f"{key}: {json.dumps(stats)}")
    click.echo(f"wrote {len(written)} files under {outdir}")


@main.command("eval")
@click.option("--outcome", "outcome_path", required=True)
@click.option("--domain", "domain_path", required=True)
@click.pass_obj
def eval_cmd(client, outcome_path, domain_path):
    """Recompute metrics for a saved auction outcome."""
    response = client.post("/metrics/eval", {
        "outcome": _load_json(outcome_path),
        "domain": _load_json(domain_path),
    })
    click.echo(json.dumps(response, indent=2, sort_keys=True))


@main.command("reproduce-examples")
@click.option("--seed", default=7, type=int)
@click.option("--epochs", default=300, type=int)
@click.pass_obj
def reproduce_examples_cmd(client, seed, epochs):
    """Re-run the two worked micro-domains; exit nonzero on any mismatch."""
    report = client.post("/reproduce-examples", {"seed": seed, "epochs": epochs})
    for example in report["examples"]:
        for check in example["checks"]:
            mark = "PASS" if check["passed"] else "FAIL"
            click.echo(f"[{mark}] {example['name']}: {check['name']} ({check['detail']})")
    if not report["passed"]:
        sys.exit(1)
    click.echo("all worked examples reproduced")


@main.command("export-predictions")
@click.option("--net", "net_path", required=True)
@click.option("--domain", "domain_path", required=True)
@click.option("--bidder", default=0, type=int)
@click.option("--observations", "obs_path", default=None)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, help="Output CSV path.")
@click.pass_obj
def export_predictions(client, net_path, domain_path, bidder, obs_path, seed, out):
    """Emit prediction-vs-true plot data for a trained net."""
    payload = {
        "net": _load_json(net_path),
        "domain": _load_json(domain_path),
        "bidder": bidder,
        "seed": seed,
    }
    if obs_path:
        payload["observations"] = _load_json(obs_path)
    response = client.post("/predictions/export", payload)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(response["csv"])
    click.echo(f"wrote {out} ({len(response['rows'])} rows)")


if __name__ == "__main__":
    main()
