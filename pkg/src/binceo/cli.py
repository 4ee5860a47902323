"""Command-line interface: bounds, allocation sweeps, code construction and
Monte Carlo simulation, with plot-ready CSV and JSON reports.

Exit codes: 0 success, 2 configuration error, 3 infeasible code plan,
4 trial failures exceeded the configured threshold.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, bounds
from .allocation import find_mu_thresholds, optimize_d, sweep_mu
from .config import ConfigError, ExperimentConfig, load_config
from .message_passing import BipOptions, SpOptions
from .model import CeoModel
from .pipeline import build_codes, run_experiment
from .presets import get_preset, preset_names
from .sparse_codes import (InfeasiblePlanError, build_ldpc, plan_sizes,
                           realized_edge_distributions, save_matrix, tv_distance)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_FAILURES = 4


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _write_csv(path: Path, header, rows, config_echo: dict):
    """CSV with a timestamp comment line; the body is deterministic."""
    lines = [f"# binceo {__version__} generated {time.strftime('%Y-%m-%dT%H:%M:%S')}"]
    lines.append("# config " + json.dumps(config_echo, sort_keys=True))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _emit_json(path: Path | None, payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        click.echo(text)
    else:
        path.write_text(text + "\n")


def _load(config, preset) -> ExperimentConfig:
    if config and preset:
        raise ConfigError("give either --config or --preset, not both")
    if config:
        return load_config(config)
    if preset:
        return load_config({"preset": preset})
    raise ConfigError("a --config file or --preset name is required")


def _resolve_model(cfg: ExperimentConfig) -> CeoModel:
    if cfg.model is not None:
        return cfg.model
    if cfg.p is not None and cfg.optimize_mu is not None:
        res = optimize_d(cfg.p, cfg.optimize_mu)
        return CeoModel(p=tuple(cfg.p), d=res.d_star)
    raise ConfigError("config does not determine a model (need d or optimize_mu)")


@click.group()
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for independent trials.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for output files (stdout JSON when omitted).")
@click.version_option(__version__)
@click.pass_context
def main(ctx, seed, threads, out_dir):
    """Successive Wyner-Ziv coding toolkit for the binary CEO problem."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["threads"] = threads
    ctx.obj["out_dir"] = Path(out_dir) if out_dir else None
    if ctx.obj["out_dir"]:
        ctx.obj["out_dir"].mkdir(parents=True, exist_ok=True)


def _common_options(fn):
    fn = click.option("--config", "-c", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="JSON experiment configuration.")(fn)
    fn = click.option("--preset", "-p", type=click.Choice(preset_names()),
                      default=None, help="Named recipe.")(fn)
    return fn


@main.command("bounds")
@_common_options
@click.pass_context
def cmd_bounds(ctx, config, preset):
    """Theoretical quantities of a model: P_l, H(U), R_th, D_th, rate targets."""
    try:
        cfg = _load(config, preset)
        model = _resolve_model(cfg)
    except ConfigError as exc:
        raise SystemExit(_config_error(exc))
    targets = bounds.link_rate_targets(model)
    ok, violations = bounds.region_check(targets, model)
    payload = {
        "tool_version": __version__,
        "config": cfg.echo(),
        "model": {"p": list(model.p), "d": list(model.d), "delta": list(model.delta)},
        "flip_probs": bounds.flip_probs(model),
        "entropy_U": bounds.entropy_U(model),
        "R_th": bounds.r_th(model),
        "D_th": bounds.d_th(model),
        "rate_targets": list(targets.per_link_rates),
        "sum_rate": targets.sum_rate,
        "region_check": {"ok": ok, "violations": violations},
        "mi_terms": bounds.mi_binning_terms(model),
    }
    out = ctx.obj["out_dir"]
    _emit_json(out / "bounds.json" if out else None, payload)
    if out:
        header = ["link", "p", "d", "delta", "P", "rate_target"]
        rows = [(l + 1, model.p[l], model.d[l], model.delta[l],
                 payload["flip_probs"][l], targets.per_link_rates[l])
                for l in range(model.L)]
        _write_csv(out / "bounds.csv", header, rows, cfg.echo())


def _allocation_rows(p, grid):
    rows = []
    for res in sweep_mu(p, grid):
        rows.append((res.mu, *res.d_star, res.r_th, res.d_th, res.F_value,
                     res.active_links))
    return rows


def _run_allocate(ctx, config, preset, mu, mu_grid, thresholds):
    try:
        cfg = _load(config, preset) if (config or preset) else None
        p = cfg.p if cfg and cfg.p else (tuple(cfg.model.p) if cfg and cfg.model else None)
        if p is None:
            raise ConfigError("allocation needs a noise vector p")
        grid = mu_grid if mu_grid is not None else (
            [mu] if mu is not None else (cfg.mu_grid if cfg and cfg.mu_grid else
                                         ([cfg.mu] if cfg and cfg.mu is not None else None)))
        if grid is None:
            raise ConfigError("allocation needs --mu or --mu-grid")
    except ConfigError as exc:
        raise SystemExit(_config_error(exc))
    L = len(p)
    rows = _allocation_rows(p, sorted(grid))
    header = (["mu"] + [f"d{l + 1}" for l in range(L)]
              + ["R_th", "D_th", "F", "active_links"])
    echo = cfg.echo() if cfg else {"p": list(p), "mu_grid": [float(g) for g in grid]}
    out = ctx.obj["out_dir"]
    if out:
        _write_csv(out / "allocation.csv", header, rows, echo)
    else:
        click.echo(",".join(header))
        for row in rows:
            click.echo(",".join(_fmt(x) for x in row))
    if thresholds:
        thr = find_mu_thresholds(p)
        payload = {"tool_version": __version__, "p": list(p), "mu_thresholds": thr}
        _emit_json(out / "thresholds.json" if out else None, payload)


@main.command("allocate")
@_common_options
@click.option("--mu", type=float, default=None, help="Single tradeoff slope.")
@click.option("--mu-grid", default=None,
              help="Grid as start:stop:step, e.g. 0:0.7:0.01.")
@click.option("--thresholds", is_flag=True, help="Also emit link-dropout thresholds.")
@click.pass_context
def cmd_allocate(ctx, config, preset, mu, mu_grid, thresholds):
    """Optimal d-allocations for one mu or a mu grid (CSV rows)."""
    grid = _parse_grid(mu_grid) if mu_grid else None
    _run_allocate(ctx, config, preset, mu, grid, thresholds)


@main.command("curve")
@_common_options
@click.option("--mu-grid", default="0:0.7:0.01", show_default=True,
              help="Grid as start:stop:step.")
@click.pass_context
def cmd_curve(ctx, config, preset, mu_grid):
    """Sum-rate vs distortion tradeoff curve over a mu grid."""
    _run_allocate(ctx, config, preset, None, _parse_grid(mu_grid), False)


def _parse_grid(spec: str):
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise SystemExit(_config_error(ConfigError(
            f"bad grid {spec!r}; expected start:stop:step")))
    return [round(float(x), 10) for x in np.arange(start, stop + step / 2, step)]


@main.command("codes")
@_common_options
@click.pass_context
def cmd_codes(ctx, config, preset):
    """Construct the planned code matrices; write them with a degree report."""
    try:
        cfg = _load(config, preset)
        model = _resolve_model(cfg)
    except ConfigError as exc:
        raise SystemExit(_config_error(exc))
    out = ctx.obj["out_dir"] or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else cfg.seed
    try:
        sizes = plan_sizes(model, cfg.n, K=cfg.K, eps=cfg.eps)
        codes = build_codes(model, sizes, seed, dd_map=cfg.bin_dd)
    except InfeasiblePlanError as exc:
        click.echo(f"infeasible plan: {exc}", err=True)
        raise SystemExit(EXIT_INFEASIBLE)
    report = {"tool_version": __version__, "config": cfg.echo(),
              "sizes": {"n": sizes.n, "m": list(sizes.m),
                        "k": [x or 0 for x in sizes.k],
                        "M": [x or 0 for x in sizes.M],
                        "kprime": [x or 0 for x in sizes.kprime]},
              "matrices": {}}
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 1))))
    for name, dd in sorted(cfg.dd.items()):
        # realize the published profile as a standalone parity-check matrix
        # sized so both degree perspectives cover the full variable set
        n_checks = max(1, round(cfg.n * dd.mean_inv("rho") / dd.mean_inv("lambda")))
        H = build_ldpc(cfg.n, n_checks, dd, rng)
        save_matrix(H, out / f"{name}.txt")
        lam, rho = realized_edge_distributions(H)
        report["matrices"][name] = {
            "file": f"{name}.txt", "rows": H.rows, "cols": H.cols, "nnz": H.nnz,
            "tv_lambda": tv_distance(lam, dd.lambda_coeffs),
            "tv_rho": tv_distance(rho, dd.rho_coeffs),
        }
    for l in range(model.L):
        save_matrix(codes.coarse[l].G, out / f"ldgm_G_w{l + 1}.txt")
        save_matrix(codes.coarse[l].Htilde, out / f"ldgm_H_w{l + 1}.txt")
        if codes.coarse[l].Hhat is not None:
            save_matrix(codes.coarse[l].Hhat, out / f"bin_H_w{l + 1}.txt")
        if codes.fine[l] is not None:
            save_matrix(codes.fine[l].G, out / f"ldgm_G_c{l + 1}.txt")
            save_matrix(codes.fine[l].Hhat, out / f"bin_H_c{l + 1}.txt")
    _emit_json(out / "codes_report.json", report)
    click.echo(f"wrote matrices and codes_report.json to {out}")


@main.command("simulate")
@_common_options
@click.option("--blocks", type=int, default=None, help="Override the trial count.")
@click.option("--decode-bypass", is_flag=True,
              help="Feed true test-channel outputs to the reconstruction.")
@click.pass_context
def cmd_simulate(ctx, config, preset, blocks, decode_bypass):
    """Monte Carlo runs: per-trial JSON plus an aggregate CSV."""
    try:
        cfg = _load(config, preset)
        model = _resolve_model(cfg)
    except ConfigError as exc:
        raise SystemExit(_config_error(exc))
    out = ctx.obj["out_dir"] or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else cfg.seed
    n_blocks = blocks if blocks is not None else cfg.trials
    bypass = decode_bypass or cfg.algorithm.decode_bypass
    alg = cfg.algorithm
    bip = BipOptions(iters_per_round=alg.bip_iters_per_round,
                     decimate_frac=alg.bip_decimate_frac,
                     confidence=alg.bip_confidence, damping=alg.bip_damping,
                     restarts=alg.bip_restarts, llr_max=alg.llr_max)
    sp = SpOptions(max_iters=alg.sp_max_iters, llr_max=alg.llr_max)
    codes = None
    if not bypass:
        try:
            sizes = plan_sizes(model, cfg.n, K=cfg.K, eps=cfg.eps)
            codes = build_codes(model, sizes, (seed, 777), dd_map=cfg.bin_dd)
        except InfeasiblePlanError as exc:
            click.echo(f"infeasible plan: {exc}", err=True)
            raise SystemExit(EXIT_INFEASIBLE)
    rep = run_experiment(model, codes, seed, n_blocks, bip_opts=bip, sp_opts=sp,
                         decode_bypass=bypass, n=cfg.n,
                         threads=ctx.obj["threads"])
    payload = {"tool_version": __version__, "config": cfg.echo(),
               "report": rep.to_dict()}
    _emit_json(out / "report.json", payload)
    stages = sorted(rep.stage_bers)
    header = (["n", "blocks", "seed"]
              + [f"delta{l + 1}" for l in range(model.L)]
              + [f"quant_d{l + 1}" for l in range(model.L)]
              + [f"R{l + 1}" for l in range(model.L)]
              + ["sum_rate"] + [f"ber_{s}" for s in stages]
              + ["D_em", "gap", "converged_fraction"])
    row = ([rep.n, rep.blocks, rep.seed]
           + [model.delta[l] for l in range(model.L)]
           + [rep.quant_dist_u[l] if rep.quant_dist_u else model.d[l]
              for l in range(model.L)]
           + list(rep.per_link_rates) + [rep.sum_rate]
           + [rep.stage_bers[s] for s in stages]
           + [rep.d_em, rep.gap, rep.converged_fraction])
    _write_csv(out / "summary.csv", header, [row], cfg.echo())
    click.echo(f"D_em={rep.d_em:.6g} D_th={rep.d_th:.6g} gap={rep.gap:.6g} "
               f"sum_rate={rep.sum_rate:.6g} converged={rep.converged_fraction:.2f}")
    if 1.0 - rep.converged_fraction > alg.max_failed_fraction:
        click.echo("trial failure fraction exceeded the configured threshold", err=True)
        raise SystemExit(EXIT_FAILURES)


def _config_error(exc: ConfigError) -> int:
    click.echo(f"config error: {exc}", err=True)
    return EXIT_CONFIG


if __name__ == "__main__":
    main()
