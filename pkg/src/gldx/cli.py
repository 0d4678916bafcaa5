"""Command-line front end.

Four commands: ``exponent`` (one rate, both exponent forms), ``sweep``
(rate range to CSV), ``simulate`` (code sampling, error probabilities,
good-code check, expurgation, report JSON), ``verify`` (self-check
suites).  A single JSON config drives everything; command-line flags
override scalar fields only.

Exit codes: 0 ok, 2 input error, 3 infeasible grid, 4 verification
failure.  All output files and stdout are pure functions of the config
plus seed; timing goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .measures import Channel, Distribution, DistributionError
from .metrics import MetricError, metric_from_json
from .optimizer import GridSpec, InfeasibleGridError
from .exponents import ExponentQuery, exponent_form, rate_sweep
from .simulator import (
    Codebook,
    SimConfig,
    check_good_code,
    exact_error_probability,
    kept_indices,
    markov_bound_check,
    monte_carlo_error,
    sample_code,
)
from . import verify as verify_mod

_MARKOV_RHOS = (1.0, 2.0, 5.0)
_ENUM_BUDGET = 1 << 24


def _sanitize(obj):
    """JSON-safe copy: non-finite floats become 'inf'/'-inf'/'nan' strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        if math.isnan(obj):
            return "nan"
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json_text(payload) -> str:
    return json.dumps(_sanitize(payload), indent=2, sort_keys=True) + "\n"


def _num(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    return f"{v:.12g}"


def _load_json_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class ConfigError(ValueError):
    pass


def _load_config(args) -> dict:
    cfg = _load_json_file(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for field in ("rate", "resolution", "workers", "output", "format", "rho_max"):
        v = getattr(args, field, None)
        if v is not None:
            cfg[field] = v
    sim_over = {
        k: getattr(args, k)
        for k in ("n", "m", "trials", "seed", "epsilon")
        if getattr(args, k, None) is not None
    }
    if sim_over:
        sim = dict(cfg.get("simulation") or {})
        if "m" in sim_over:
            sim_over["M"] = sim_over.pop("m")
        sim.update(sim_over)
        cfg["simulation"] = sim
    return cfg


def _channel_from_config(cfg: dict) -> Channel:
    spec = cfg.get("channel")
    if spec is None:
        raise ConfigError("config is missing 'channel'")
    if isinstance(spec, str):
        spec = _load_json_file(spec)
    return Channel.from_json(spec)


def _metric_from_config(cfg: dict, channel: Channel):
    spec = cfg.get("metric")
    if spec is None:
        raise ConfigError("config is missing 'metric'")
    return metric_from_json(spec, channel)


def _composition_from_config(cfg: dict, channel: Channel) -> Distribution:
    comp = cfg.get("composition")
    if comp is None:
        return Distribution.uniform(channel.input_size)
    q = Distribution(np.asarray(comp, dtype=np.float64))
    if q.size != channel.input_size:
        raise ConfigError(
            f"composition has {q.size} symbols but the channel has {channel.input_size} inputs"
        )
    return q


def _grid_from_config(cfg: dict) -> GridSpec:
    return GridSpec(
        resolution=int(cfg.get("resolution", 16)),
        refine=bool(cfg.get("refine", True)),
        workers=int(cfg.get("workers", 1)),
    )


def cmd_exponent(cfg: dict) -> int:
    channel = _channel_from_config(cfg)
    metric = _metric_from_config(cfg, channel)
    comp = _composition_from_config(cfg, channel)
    if "rate" not in cfg:
        raise ConfigError("config is missing 'rate'")
    query = ExponentQuery(
        float(cfg["rate"]), comp, channel, metric, rho_max=float(cfg.get("rho_max", 64.0))
    )
    start = time.perf_counter()
    result = exponent_form(query, _grid_from_config(cfg))
    elapsed = 1000.0 * (time.perf_counter() - start)
    _emit(_json_text(result.to_json(runtime_ms=None)), cfg.get("output"))
    print(f"exponent computed in {elapsed:.1f} ms", file=sys.stderr)
    return 0


def _sweep_rates(cfg: dict) -> list[float]:
    if "rate_range" not in cfg:
        if "rate" in cfg:
            return [float(cfg["rate"])]
        raise ConfigError("sweep needs 'rate_range' (or a single 'rate')")
    rr = cfg["rate_range"]
    start, stop = float(rr["start"]), float(rr["stop"])
    step = float(rr.get("step", 0.05))
    if stop < start or step <= 0:
        raise ConfigError("rate_range needs start <= stop and step > 0")
    rates = []
    k = 0
    while True:
        r = start + k * step
        if r > stop + 1e-12:
            break
        rates.append(min(r, stop))
        k += 1
    return rates


def cmd_sweep(cfg: dict) -> int:
    channel = _channel_from_config(cfg)
    metric = _metric_from_config(cfg, channel)
    comp = _composition_from_config(cfg, channel)
    rates = _sweep_rates(cfg)
    query = ExponentQuery(
        rates[0], comp, channel, metric, rho_max=float(cfg.get("rho_max", 64.0))
    )
    start = time.perf_counter()
    results = rate_sweep(query, rates, _grid_from_config(cfg))
    elapsed = 1000.0 * (time.perf_counter() - start)
    fmt = cfg.get("format", "csv")
    if fmt == "json":
        payload = [
            dict(res.to_json(runtime_ms=None), rate=rate) for rate, res in zip(rates, results)
        ]
        _emit(_json_text(payload), cfg.get("output"))
    elif fmt == "csv":
        lines = ["rate,exponent,maxmin,gap,rho_star,boundary_flag,infinite"]
        for rate, res in zip(rates, results):
            infinite = "+".join(
                name
                for name, v in (
                    ("exponent", res.expurgated_value),
                    ("maxmin", res.maxmin_value),
                    ("gap", res.gap),
                )
                if v is not None and math.isinf(v)
            )
            lines.append(
                ",".join(
                    (
                        _num(rate),
                        _num(res.expurgated_value),
                        _num(res.maxmin_value),
                        _num(res.gap),
                        _num(res.rho_star),
                        "true" if res.boundary_flag else "false",
                        infinite,
                    )
                )
            )
        _emit("\n".join(lines) + "\n", cfg.get("output"))
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    print(f"sweep of {len(rates)} rates in {elapsed:.1f} ms", file=sys.stderr)
    return 0


def _codebook_from_config(sim: dict, comp: Distribution, rng: np.random.Generator) -> Codebook:
    if "codewords" in sim:
        words = np.asarray(sim["codewords"], dtype=np.int64)
        kx = comp.size
        counts = np.bincount(words[0], minlength=kx)
        return Codebook(words, Distribution(counts / words.shape[1]))
    return sample_code(comp, int(sim["n"]), int(sim["M"]), rng)


def cmd_simulate(cfg: dict) -> int:
    channel = _channel_from_config(cfg)
    metric = _metric_from_config(cfg, channel)
    comp = _composition_from_config(cfg, channel)
    workers = int(cfg.get("workers", 1))
    sim = cfg.get("simulation")
    if not isinstance(sim, dict):
        raise ConfigError("simulate needs a 'simulation' block in the config")
    if "codewords" in sim:
        words = np.asarray(sim["codewords"], dtype=np.int64)
        sim = dict(sim, n=words.shape[1], M=words.shape[0])
    for key in ("n", "M", "trials", "seed"):
        if key not in sim:
            raise ConfigError(f"simulation block is missing '{key}'")
    config = SimConfig(
        n=int(sim["n"]),
        M=int(sim["M"]),
        trials=int(sim["trials"]),
        seed=int(sim["seed"]),
        epsilon=(float(sim["epsilon"]) if sim.get("epsilon") is not None else None),
    )
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    code = _codebook_from_config(sim, comp, rng)
    mode = sim.get("mode", "auto")
    feasible = channel.output_size**code.blocklength <= _ENUM_BUDGET
    if mode == "auto":
        mode = "exact" if feasible else "mc"
    if mode == "exact" and not feasible:
        raise ConfigError(
            "output space exceeds the enumeration budget; set simulation mode to 'mc'"
        )
    if mode == "exact":
        errors = [
            exact_error_probability(code, m, channel, metric, workers=workers)
            for m in range(code.size)
        ]
    elif mode == "mc":
        errors = []
        for m in range(code.size):
            est, _ = monte_carlo_error(
                code, m, channel, metric, config.trials, rng, workers=workers
            )
            errors.append(est)
    else:
        raise ConfigError(f"unknown simulation mode {mode!r}")

    rate = float(cfg["rate"]) if "rate" in cfg else code.rate
    eps = min(config.effective_epsilon(), rate)
    report_gc = check_good_code(
        code,
        eps,
        metric,
        rate,
        floor_resolution=int(cfg.get("resolution", 16)),
        rng=np.random.default_rng(config.seed + 1),
        workers=workers,
    )
    markov = []
    for rho in _MARKOV_RHOS:
        lhs, rhs, holds = markov_bound_check(code, channel, metric, rho, errors)
        markov.append({"rho": rho, "lhs": lhs, "rhs": rhs, "holds": holds})
    report = {
        "config": {
            "n": code.blocklength,
            "M": code.size,
            "trials": config.trials,
            "seed": config.seed,
            "epsilon": eps,
            "rate": rate,
            "resolution": int(cfg.get("resolution", 16)),
            "metric": cfg.get("metric"),
            "channel": channel.matrix.tolist(),
        },
        "per_message_error": {"mode": mode, "values": errors},
        "good_code_report": report_gc.to_json(),
        "expurgated_indices": [int(i) for i in kept_indices(errors)],
        "markov_checks": markov,
        "effective_rate": code.rate,
        "codewords": [" ".join(str(int(s)) for s in w) for w in code.words],
    }
    elapsed = 1000.0 * (time.perf_counter() - start)
    _emit(_json_text(report), cfg.get("output"))
    print(f"simulation finished in {elapsed:.1f} ms", file=sys.stderr)
    return 0


def cmd_verify(level: str, workers: int) -> int:
    results = verify_mod.run_suite(level, workers=workers)
    print(verify_mod.format_results(results))
    for r in results:
        print(f"{r.name}: {r.seconds:.2f}s", file=sys.stderr)
    return 0 if all(r.ok for r in results) else 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gldx",
        description="Error exponents and simulation for stochastic metric decoding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--rate", type=float, help="override the rate (nats)")
        p.add_argument("--resolution", type=int, help="override the grid resolution")
        p.add_argument("--rho-max", dest="rho_max", type=float, help="override the tilt cap")
        p.add_argument("--workers", type=int, help="worker threads (default 1)")
        p.add_argument("--output", help="output file (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), help="output format")

    p_exp = sub.add_parser("exponent", help="compute both exponent forms at one rate")
    common(p_exp)
    p_sweep = sub.add_parser("sweep", help="compute exponents over a rate range")
    common(p_sweep)
    p_sim = sub.add_parser("simulate", help="sample a code and report error statistics")
    common(p_sim)
    p_sim.add_argument("--n", type=int, help="override the blocklength")
    p_sim.add_argument("--m", type=int, help="override the code size M")
    p_sim.add_argument("--trials", type=int, help="override Monte Carlo trials")
    p_sim.add_argument("--seed", type=int, help="override the RNG seed")
    p_sim.add_argument("--epsilon", type=float, help="override the good-code back-off")
    p_ver = sub.add_parser("verify", help="run the self-check suites")
    p_ver.add_argument("--level", choices=("quick", "full"), default="quick")
    p_ver.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.level, args.workers)
        cfg = _load_config(args)
        if args.command == "exponent":
            return cmd_exponent(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_simulate(cfg)
    except InfeasibleGridError as exc:
        print(f"infeasible grid: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        DistributionError,
        MetricError,
        ValueError,
        KeyError,
        TypeError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
