"""Command-line front end.

A run is fully described by one JSON config file; flags only select the
command, the config, the output destination, and ad-hoc ``--set`` overrides.
All randomness flows from the config's ``seed``, so identical config + seed
produces byte-identical output files.

Exit codes: 0 success, 1 a check failed, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import duality, illiq, impact, riskmeasure, scenario
from .errors import ConfigError, IlliqriskError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _apply_override(cfg: dict, key: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {part!r} is not an object")
    node[parts[-1]] = value


def load_config(path: str, overrides: list[str]) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        _apply_override(cfg, key, raw)
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing the {key!r} block")
    return cfg[key]


def build_scenarios(cfg: dict) -> tuple[scenario.ScenarioSpace, dict]:
    block = _require(cfg, "scenarios")
    if "file" in block:
        return scenario.load_scenarios(block["file"], block.get("format"))
    if "gbm" in block:
        if "seed" not in cfg:
            raise ConfigError("gbm scenarios require a top-level 'seed'")
        g = block["gbm"]
        try:
            params = scenario.GbmParams(
                x0=float(g["x0"]), mu=float(g["mu"]),
                sigma=float(g["sigma"]), horizon_T=float(g["horizon_T"]),
            )
            n = int(block["n"])
        except KeyError as exc:
            raise ConfigError(f"gbm scenario block is missing {exc}") from None
        space, vec = scenario.sample_gbm(params, n, int(cfg["seed"]))
        return space, {"gbm": vec}
    raise ConfigError("scenarios block needs exactly one of 'file' or 'gbm'")


def pick_asset(cfg: dict, vectors: dict) -> scenario.ScenarioVector:
    name = cfg.get("asset")
    if name is None:
        if len(vectors) != 1:
            raise ConfigError(
                f"several assets present ({sorted(vectors)}); set 'asset'"
            )
        return next(iter(vectors.values()))
    if name not in vectors:
        raise ConfigError(f"asset {name!r} not in scenario data {sorted(vectors)}")
    return vectors[name]


def build_impact(block: dict, vectors: dict | None = None) -> impact.ImpactModel:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("impact block needs a 'kind'")
    kind = str(block["kind"]).replace("-", "_").lower()
    try:
        if kind == "linear":
            return impact.LinearAdditive(a=float(block["a"]))
        if kind == "stochastic_slope":
            if "m_values" in block:
                m = np.asarray(block["m_values"], dtype=float)
            elif "m_column" in block and vectors:
                m = vectors[block["m_column"]].values
            else:
                raise ConfigError("stochastic_slope needs 'm_values' or 'm_column'")
            return impact.StochasticSlope(m=m)
        if kind == "sign_linear":
            return impact.SignLinear(theta=float(block["theta"]), eta=float(block["eta"]))
        if kind == "power_law":
            return impact.PowerLaw(gamma=float(block["gamma"]), alpha=float(block["alpha"]))
        if kind == "exponential":
            return impact.ExponentialMultiplicative(a=float(block["a"]), T=float(block["T"]))
        if kind == "separable_additive":
            scale = float(block["scale"])
            rate = float(block["rate"]) if "rate" in block else None
            return impact.SeparableAdditive(
                h=impact.saturating_exp_h(scale, rate),
                h_antiderivative=impact.saturating_exp_antiderivative(scale, rate),
            )
        if kind == "separable_multiplicative":
            scale = float(block["scale"])
            rate = float(block["rate"]) if "rate" in block else None
            return impact.SeparableMultiplicative(
                h=impact.saturating_exp_h(scale, rate, anchor=1.0),
                h_antiderivative=impact.saturating_exp_antiderivative(scale, rate, anchor=1.0),
            )
    except KeyError as exc:
        raise ConfigError(f"impact block is missing {exc}") from None
    raise ConfigError(f"unknown impact kind {block['kind']!r}")


def build_supply(block: dict) -> impact.SupplyCurve:
    try:
        return impact.SupplyCurve(base=float(block["base"]),
                                  slope=float(block.get("slope", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"x0 block is missing {exc}") from None


def build_functional(block: dict) -> riskmeasure.RiskFunctional:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("rho block needs a 'kind'")
    try:
        return riskmeasure.make_functional(block["kind"],
                                           **{k: v for k, v in block.items() if k != "kind"})
    except (KeyError, IlliqriskError) as exc:
        raise ConfigError(f"invalid rho block: {exc}") from None


def y_grid_from(block) -> np.ndarray:
    if isinstance(block, list):
        return np.asarray(block, dtype=float)
    if isinstance(block, dict):
        if "values" in block:
            return np.asarray(block["values"], dtype=float)
        try:
            return np.linspace(float(block["start"]), float(block["stop"]),
                               int(block["num"]))
        except KeyError as exc:
            raise ConfigError(f"y_grid block is missing {exc}") from None
    raise ConfigError("y_grid must be a list or a {start, stop, num} object")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def write_table(columns: list[str], rows: list[list], destination, fmt: str) -> None:
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_cell(x) for x in row))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = [dict(zip(columns, row)) for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    _emit(text, destination)


def write_json(payload, destination) -> None:
    _emit(json.dumps(payload, indent=2) + "\n", destination)


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _emit(text: str, destination) -> None:
    if destination is None:
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_beta(cfg: dict, out, fmt: str) -> int:
    space, vectors = build_scenarios(cfg)
    x = pick_asset(cfg, vectors)
    model = build_impact(_require(cfg, "impact"), vectors)
    curve = build_supply(_require(cfg, "x0"))
    functional = build_functional(_require(cfg, "rho"))
    ys = y_grid_from(_require(cfg, "y_grid"))
    if np.any(ys < 0):
        raise ConfigError("beta curves are defined for y >= 0")
    rows = []
    for y in ys:
        y = float(y)
        b = illiq.beta(model, x, functional, None, y)
        bs = illiq.beta_split(model, x, functional, None, y)
        cr_block = illiq.capital_requirement(y, b, curve, "block").capital_requirement
        cr_split = illiq.capital_requirement(y, bs, curve, "split").capital_requirement
        rows.append([y, b, cr_block, cr_split, 1 if y == 0.0 else 0])
    write_table(["y", "beta", "capital_block", "capital_split", "beta0_convention"],
                rows, out, fmt)
    return EXIT_OK


def cmd_axioms(cfg: dict, out, fmt: str) -> int:
    if "seed" not in cfg:
        raise ConfigError("the axioms command requires a 'seed'")
    seed = int(cfg["seed"])
    space, vectors = build_scenarios(cfg)
    x = pick_asset(cfg, vectors)
    model = build_impact(_require(cfg, "impact"), vectors)
    functional = build_functional(_require(cfg, "rho"))
    ax = cfg.get("axioms", {})
    trials = int(ax.get("trials", 1000))
    y_max = float(ax.get("y_max", 100.0))
    tol = float(ax.get("tolerance", 1e-9))
    measures = ax.get("measures", ["rho", "beta", "beta_split"])

    reports = []
    grid = np.linspace(-y_max, y_max, 41)
    reports.append(impact.check_assumption1(model, x, grid))
    P = space.probabilities
    for measure in measures:
        if measure == "rho":
            reports.extend(riskmeasure.check_rho_axioms(
                functional, P, trials=trials, seed=seed, tol=tol))
        else:
            reports.extend(illiq.check_beta_axioms(
                measure, model, x, functional, P,
                y_max=y_max, trials=trials, seed=seed, tol=tol))
    payload = {
        "reports": [r.to_dict() for r in reports],
        "unexpected_failures": sum(r.classification == "fail" for r in reports),
    }
    write_json(payload, out)
    return EXIT_OK if payload["unexpected_failures"] == 0 else EXIT_CHECK_FAILED


def cmd_dual(cfg: dict, out, fmt: str) -> int:
    if "seed" not in cfg:
        raise ConfigError("the dual command requires a 'seed'")
    seed = int(cfg["seed"])
    space, vectors = build_scenarios(cfg)
    x = pick_asset(cfg, vectors)
    model = build_impact(_require(cfg, "impact"), vectors)
    functional = build_functional(_require(cfg, "rho"))
    dual_cfg = cfg.get("dual", {})
    grid = y_grid_from(dual_cfg.get("grid", {"start": -20.0, "stop": 20.0, "num": 4097}))
    if not np.any(grid == 0.0):
        raise ConfigError("the dual grid must contain 0")
    family = dual_cfg.get("family", "block")
    n_points = int(dual_cfg.get("n_points", 4096))
    n_samples = int(dual_cfg.get("n_samples", 1000))

    f = duality.build_f(model, x, functional, None, grid, family=family)
    pair = duality.biconjugate_check(f, n_points=n_points)
    tol = float(dual_cfg.get("tolerance", max(1e-9, pair.error_bound())))

    rows = []
    for i, y in enumerate(f.grid):
        err = abs(pair.f_star_star.values[i] - f.values[i])
        rows.append([float(y), float(f.values[i]),
                     float(pair.f_star_star.values[i]), float(err)])
    write_table(["y", "f", "f_star_star", "abs_error"], rows, out, fmt)

    failed = pair.max_recovery_error > tol or not pair.input_convex
    y_checks = dual_cfg.get("y_values")
    if y_checks is None:
        positive = grid[grid > 0]
        y_checks = list(positive[:: max(1, len(positive) // 5)][:5])
    dual_ok = True
    if family == "block" and isinstance(
            functional, (riskmeasure.WorstCase, riskmeasure.Entropic,
                         riskmeasure.AverageValueAtRisk)):
        for y in y_checks:
            rep = duality.dual_check(model, x, functional, space.probabilities,
                                     float(y), n_samples=n_samples, seed=seed)
            dual_ok = dual_ok and rep.passed
    summary = {
        "max_recovery_error": pair.max_recovery_error,
        "error_bound": pair.error_bound(),
        "input_convex": pair.input_convex,
        "dual_checks_passed": dual_ok,
    }
    sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_CHECK_FAILED if (failed or not dual_ok) else EXIT_OK


def cmd_split_compare(cfg: dict, out, fmt: str) -> int:
    space, vectors = build_scenarios(cfg)
    x = pick_asset(cfg, vectors)
    model = build_impact(_require(cfg, "impact"), vectors)
    curve = build_supply(_require(cfg, "x0"))
    functional = build_functional(_require(cfg, "rho"))
    ys = y_grid_from(_require(cfg, "y_grid"))
    if np.any(ys <= 0):
        raise ConfigError("split comparison is defined for y > 0")
    rows = []
    all_ok = True
    for y in ys:
        y = float(y)
        b = illiq.beta(model, x, functional, None, y)
        bs = illiq.beta_split(model, x, functional, None, y)
        cr_block = illiq.capital_requirement(y, b, curve, "block").capital_requirement
        cr_split = illiq.capital_requirement(y, bs, curve, "split").capital_requirement
        ok = cr_split <= cr_block + 1e-9
        all_ok = all_ok and ok
        rows.append([y, b, bs, cr_block, cr_split, 1 if ok else 0])
    write_table(["y", "beta_block", "beta_split", "capital_block", "capital_split",
                 "dominance_ok"], rows, out, fmt)
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_portfolio(cfg: dict, out, fmt: str) -> int:
    space, vectors = build_scenarios(cfg)
    pf_cfg = _require(cfg, "portfolio")
    try:
        names = list(pf_cfg["assets"])
        y = np.asarray(pf_cfg["y"], dtype=float)
        impact_blocks = list(pf_cfg["impacts"])
        x0_blocks = list(pf_cfg["x0"])
    except KeyError as exc:
        raise ConfigError(f"portfolio block is missing {exc}") from None
    if not (len(names) == len(y) == len(impact_blocks) == len(x0_blocks)):
        raise ConfigError("portfolio lists must have equal length")
    for name in names:
        if name not in vectors:
            raise ConfigError(f"asset {name!r} not in scenario data")
    x_tildes = [vectors[n] for n in names]
    models = [build_impact(b, vectors) for b in impact_blocks]
    curves = [build_supply(b) for b in x0_blocks]
    functional = build_functional(_require(cfg, "rho"))
    portfolio = illiq.Portfolio(positions=y, assets=tuple(names))

    per_beta = [illiq.beta(m, x, functional, None, float(yi))
                for m, x, yi in zip(models, x_tildes, y)]
    per_split = [illiq.beta_split(m, x, functional, None, float(yi))
                 for m, x, yi in zip(models, x_tildes, y)]
    b_pf = illiq.beta_portfolio(models, x_tildes, functional, None, portfolio)
    b_pf_split = illiq.beta_portfolio_split(models, x_tildes, functional, None, portfolio)
    rep_block = illiq.capital_requirement_portfolio(portfolio, per_beta, b_pf,
                                                    curves, "block")
    rep_split = illiq.capital_requirement_portfolio(portfolio, per_split, b_pf_split,
                                                    curves, "split")
    payload = {
        "assets": [
            {
                "asset": n, "y": float(yi), "beta": float(b), "beta_split": float(bs),
                "capital_block": rep_block.per_asset[i]["capital_requirement"],
                "capital_split": rep_split.per_asset[i]["capital_requirement"],
            }
            for i, (n, yi, b, bs) in enumerate(zip(names, y, per_beta, per_split))
        ],
        "portfolio": {
            "beta": float(b_pf),
            "beta_split": float(b_pf_split),
            "sum_per_asset_beta": float(sum(per_beta)),
            "subadditivity_gap": float(sum(per_beta) - b_pf),
            "capital_block_per_asset_sum": rep_block.capital_requirement,
            "capital_split_per_asset_sum": rep_split.capital_requirement,
        },
    }
    if "var_gbm" in pf_cfg:
        v = pf_cfg["var_gbm"]
        try:
            params = [scenario.GbmParams(x0=float(p["x0"]), mu=float(p["mu"]),
                                         sigma=float(p["sigma"]),
                                         horizon_T=float(p["horizon_T"]))
                      for p in v["params"]]
            a = [float(t) for t in v["a"]]
            corr = np.asarray(v["correlations"], dtype=float)
            delta = float(v["delta"])
        except KeyError as exc:
            raise ConfigError(f"var_gbm block is missing {exc}") from None
        payload["portfolio"]["log_price_var"] = illiq.var_gbm_portfolio(
            params, a, corr, portfolio, delta)
        payload["portfolio"]["log_price_var_basis"] = "sum of log prices, not prices"
    if fmt == "csv":
        columns = ["asset", "y", "beta", "beta_split", "capital_block", "capital_split"]
        rows = [[r["asset"], r["y"], r["beta"], r["beta_split"],
                 r["capital_block"], r["capital_split"]] for r in payload["assets"]]
        rows.append(["__portfolio__", float(np.sum(y)), payload["portfolio"]["beta"],
                     payload["portfolio"]["beta_split"],
                     payload["portfolio"]["capital_block_per_asset_sum"],
                     payload["portfolio"]["capital_split_per_asset_sum"]])
        write_table(columns, rows, out, fmt)
    else:
        write_json(payload, out)
    return EXIT_OK


COMMANDS = {
    "beta": cmd_beta,
    "axioms": cmd_axioms,
    "dual": cmd_dual,
    "split-compare": cmd_split_compare,
    "portfolio": cmd_portfolio,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="illiqrisk",
        description="liquidity-adjusted risk measures under price impact",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--format", default="csv", choices=["csv", "json"])
    parser.add_argument("--threads", type=int, default=1,
                        help="parallelism bound (computation is deterministic)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (dotted path, JSON value)")
    args = parser.parse_args(argv)

    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.set)
        return COMMANDS[args.command](cfg, args.out, args.format)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except IlliqriskError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        sys.stderr.write(f"unexpected error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
