"""Command-line entry point.

Exit codes: 0 ok, 2 usage or configuration error, 3 numerical failure.
Set ``GRIDTRADE_LOG=debug|info`` for verbose logging on stderr.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .environment import P2PTradingEnv, write_trace_csv
from .evaluate import evaluate_policies
from .maddpg.checkpoint import CheckpointError, load_actors, save_checkpoint
from .maddpg.mlp import ShapeError
from .maddpg.train import TrainingDiverged, train
from .manifest import ManifestError, load_manifest
from .network import (
    DivergenceError,
    InfeasibilityError,
    NetSnapshot,
    NetworkError,
    ViolationPrice,
    compute_dlmp,
    parse_network,
    read_injections_csv,
    write_dlmp_csv,
)
from .oracle import DpGrid, solve_dp
from .pricing import PriceBounds, PriceBoundsError, compute_prices

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CHECKPOINT_FILE = "checkpoint.json"
LOG_FILE = "training_log.jsonl"


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _setup_logging() -> None:
    level = os.environ.get("GRIDTRADE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _manifest(path, no_dnt: bool = False):
    try:
        m = load_manifest(path)
    except ManifestError as exc:
        _fail(str(exc), EXIT_CONFIG)
    if no_dnt:
        m = replace(m, scenario=m.scenario.with_dnt(False))
    return m


@click.group()
def main() -> None:
    """P2P energy trading with MADDPG agents and network tariffs."""
    _setup_logging()


@main.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--episodes", type=int, default=None, help="Override hyperparams.episodes.")
@click.option("--seed", type=int, default=None, help="Override the manifest seed.")
@click.option("--no-dnt", is_flag=True, help="Train without network tariffs.")
def cmd_train(manifest_path, out_dir, episodes, seed, no_dnt):
    """Train one actor per battery-owning participant."""
    m = _manifest(manifest_path, no_dnt)
    hp = m.hyperparams if episodes is None else replace(m.hyperparams, episodes=episodes)
    seed = m.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = P2PTradingEnv(m.scenario, hp.episode_length)
    log_path = out / LOG_FILE
    with log_path.open("w", encoding="utf-8") as fh:
        def write_rows(rows):
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        try:
            result = train(env, hp, seed, on_episode=write_rows)
        except (TrainingDiverged, DivergenceError) as exc:
            _fail(f"training diverged: {exc}", EXIT_NUMERIC)
    meta = {"seed": seed, "dnt_enabled": m.scenario.dnt_enabled, "hyperparams": hp.to_dict()}
    save_checkpoint(out / CHECKPOINT_FILE, result.agents, result.agent_ids, meta)
    click.echo(f"trained {len(result.agents)} agents for {hp.episodes} episodes -> {out}")


@main.command("evaluate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--checkpoints", "ckpt_dir", required=True, type=click.Path())
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@click.option("--no-dnt", is_flag=True, help="Evaluate with tariffs switched off.")
def cmd_evaluate(manifest_path, ckpt_dir, out_file, no_dnt):
    """Run trained actors over the evaluation window; write trace CSV and summary JSON."""
    m = _manifest(manifest_path, no_dnt)
    ckpt = Path(ckpt_dir)
    if ckpt.is_dir():
        ckpt = ckpt / CHECKPOINT_FILE
    try:
        actors = load_actors(ckpt)
    except CheckpointError as exc:
        _fail(str(exc), EXIT_CONFIG)
    for aid, net in actors.items():
        if net.in_dim != 3 or net.out_dim != 1:
            _fail(f"actor {aid} has shape {net.sizes}, expected input 3 and output 1", EXIT_CONFIG)
    try:
        result = evaluate_policies(m.scenario, actors, m.eval_start, m.eval_length,
                                   m.hyperparams.episode_length)
    except (KeyError, ShapeError) as exc:
        _fail(f"checkpoint does not match manifest: {exc}", EXIT_CONFIG)
    except DivergenceError as exc:
        _fail(str(exc), EXIT_NUMERIC)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        write_trace_csv(result.snapshots, result.participant_ids, fh)
    summary = result.summary()
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(json.dumps(summary, sort_keys=True))


@main.command("price")
@click.option("--sdr", type=float, required=True)
@click.option("--lambda-b", "lambda_b", type=float, default=0.05, show_default=True)
@click.option("--lambda-s", "lambda_s", type=float, default=0.03, show_default=True)
@click.option("--lambda", "lam", type=float, default=None,
              help="Compensation price; defaults to half the import/export spread.")
def cmd_price(sdr, lambda_b, lambda_s, lam):
    """Print the P2P selling and buying price for a given SDR."""
    try:
        bounds = PriceBounds(lambda_b, lambda_s, lam)
    except PriceBoundsError as exc:
        _fail(str(exc), EXIT_CONFIG)
    if not np.isfinite(sdr) or sdr < 0:
        _fail("sdr must be a non-negative number", EXIT_CONFIG)
    prices = compute_prices(sdr, bounds)
    click.echo(f"{prices.sell:.6f} {prices.buy:.6f}")


@main.command("dnt")
@click.option("--network", "network_path", required=True, type=click.Path())
@click.option("--injections", "inj_path", required=True, type=click.Path())
@click.option("--price", type=float, required=True, help="Wholesale price at the substation, £/kWh.")
@click.option("--hard-limits", is_flag=True, help="Treat limits as hard (violations exit 3).")
@click.option("--line-penalty", type=float, default=1.0, show_default=True)
@click.option("--voltage-penalty", type=float, default=10.0, show_default=True)
def cmd_dnt(network_path, inj_path, price, hard_limits, line_penalty, voltage_penalty):
    """Print per-bus DLMP, network tariff and voltage as CSV."""
    try:
        net = parse_network(network_path)
        p, q = read_injections_csv(inj_path, net)
    except (OSError, NetworkError, ValueError) as exc:
        _fail(str(exc), EXIT_CONFIG)
    penalty = None if hard_limits else ViolationPrice(line_penalty, voltage_penalty)
    try:
        res = compute_dlmp(net, NetSnapshot(p, price, q), penalty)
    except (InfeasibilityError, DivergenceError) as exc:
        _fail(str(exc), EXIT_NUMERIC)
    write_dlmp_csv([(0, res)], sys.stdout)


@main.command("dp")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--agent", "agent_id", required=True)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@click.option("--soc-points", type=int, default=101, show_default=True)
def cmd_dp(manifest_path, agent_id, out_file, soc_points):
    """Optimal price-taking schedule for one agent over the evaluation window.

    Uses the manifest's fixed prices when present, otherwise the ESP
    import/export prices. The schedule is replayed through the environment to
    produce the trace.
    """
    m = _manifest(manifest_path, no_dnt=True)
    sc = m.scenario
    if agent_id not in sc.agent_ids:
        _fail(f"unknown agent {agent_id!r}; agents are {sc.agent_ids}", EXIT_CONFIG)
    i = [p.id for p in sc.participants].index(agent_id)
    window = slice(m.eval_start, m.eval_start + m.eval_length)
    n = m.eval_length
    if sc.fixed_prices is not None:
        buy, sell = (a[window] for a in sc.fixed_prices)
    else:
        buy, sell = np.full(n, sc.bounds.import_price), np.full(n, sc.bounds.export_price)
    battery = sc.participants[i].battery
    res = solve_dp(battery, sc.data.loads[i].values[window], sc.data.solar[i].values[window],
                   buy, sell, sc.dt, DpGrid(soc_points=soc_points))
    single = replace(sc, participants=(sc.participants[i],),
                     data=replace(sc.data, loads=(sc.data.loads[i],), solar=(sc.data.solar[i],)),
                     network=None, fixed_prices=(np.r_[np.zeros(m.eval_start), buy],
                                                 np.r_[np.zeros(m.eval_start), sell]))
    env = P2PTradingEnv(single, n)
    env.reset(m.eval_start, n)
    snaps = []
    for b in res.actions:
        a = 2.0 * (b - battery.b_min) / (battery.b_max - battery.b_min) - 1.0
        _, snap = env.step([a])
        snaps.append(snap)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        write_trace_csv(snaps, [agent_id], fh)
    click.echo(json.dumps({"agent": agent_id, "dp_cost": res.cost,
                           "replayed_cost": float(sum(s.cost[0] for s in snaps)),
                           "snap_error": res.snap_error}))


if __name__ == "__main__":
    main()
