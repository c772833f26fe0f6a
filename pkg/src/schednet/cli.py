"""Command-line runner: simulate, verify, capacity, analyze.

Each subcommand reads a JSON config (``--config``), writes artifacts under
``--out`` and stamps them with the sha256 of the canonical effective config.
Exit codes: 0 success, 1 a verification check failed, 2 bad config or
usage, 3 a module error during the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analysis, capacity, verify
from .errors import ConfigInvalid, SchedNetError
from .model import schedule_space, topology_from_dict
from .sim import SimConfig, run_replicas

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

SIM_KEYS = {"topology", "lambda", "horizon", "seed", "seeds", "weight_fn", "weight_mode",
            "algorithm", "sample_every", "q0", "frozen", "load_targets", "write_traces"}
CAPACITY_KEYS = {"topology", "lambda", "target_load"}
ANALYZE_KEYS = {"topology", "q0", "replicas", "times", "seed", "epsilon", "lambda",
                "weight_fn", "weight_mode", "frozen", "analyses"}
VERIFY_KEYS = {"suite", "seed"}
ANALYSES = ("timescale", "goodpi")


def spec_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _to_plain(obj):
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


class Artifacts:
    """Writes files under one directory and records them in ``manifest.json``."""

    def __init__(self, out: Path | None, digest: str):
        self.out = out
        self.digest = digest
        self.files: dict[str, str] = {}
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, body: str) -> None:
        if self.out is None:
            return
        (self.out / name).write_text(body, encoding="utf-8", newline="")
        self.files[name] = hashlib.sha256(body.encode("utf-8")).hexdigest()

    def json(self, name: str, obj: dict) -> None:
        self.text(name, _dump({"spec_hash": self.digest, **_to_plain(obj)}))

    def close(self) -> None:
        if self.out is not None:
            body = _dump({"spec_hash": self.digest, "files": dict(sorted(self.files.items()))})
            (self.out / "manifest.json").write_text(body, encoding="utf-8")


def load_config(path: str | None, allowed: set[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object")
    extra = set(cfg) - allowed
    if extra:
        raise ConfigInvalid(f"unknown config keys: {sorted(extra)}")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigInvalid(f"missing config keys: {missing}")


# --- simulate ------------------------------------------------------------------

def _seeds(cfg: dict) -> list[int]:
    if "seeds" in cfg:
        seeds = [int(s) for s in cfg["seeds"]]
    else:
        seeds = [int(cfg.get("seed", 0))]
    if not seeds:
        raise ConfigInvalid("at least one seed is required")
    return sorted(set(seeds))


def cmd_simulate(cfg: dict, art: Artifacts) -> int:
    _require(cfg, "topology", "lambda", "horizon")
    topo = topology_from_dict(cfg["topology"])
    direction = [float(v) for v in cfg["lambda"]]
    targets = cfg.get("load_targets")
    if targets is None:
        runs = [("run", direction)]
    else:
        sched = schedule_space(topo)
        runs = [(f"load{t:g}", capacity.scale_to_load(direction, float(t), sched).tolist()) for t in targets]
    q0 = cfg.get("q0")
    seeds = _seeds(cfg)
    horizon = float(cfg["horizon"])
    results = []
    for label, lam in runs:
        base = SimConfig(
            topology=topo,
            lam=tuple(lam),
            horizon=horizon,
            weight_fn=cfg.get("weight_fn", "loglog"),
            weight_mode=cfg.get("weight_mode", "with_qmax"),
            algorithm=cfg.get("algorithm", "randomized"),
            sample_every=float(cfg.get("sample_every", 1.0)),
            q0=None if q0 is None else tuple(float(v) for v in q0),
            frozen=bool(cfg.get("frozen", False)),
        )
        base.validate()
        traces = run_replicas(base, seeds)
        per_seed = []
        for tr in traces:
            if cfg.get("write_traces", True):
                art.text(f"trace_{label}_seed{tr.seed}.csv", tr.to_csv())
            per_seed.append({
                **tr.summary(),
                "qmax_mean_last_half": tr.qmax_time_average(horizon / 2, horizon),
                "final_Q": tr.Q[-1].tolist(),
            })
        last_half = [p["qmax_mean_last_half"] for p in per_seed]
        results.append({"label": label, "lambda": list(lam), "runs": per_seed,
                        "qmax_mean_last_half": float(np.mean(last_half))})
    art.json("summary.json", {"command": "simulate", "results": results})
    for r in results:
        print(f"{r['label']}: lambda={[round(v, 6) for v in r['lambda']]} "
              f"mean Qmax (last half) = {r['qmax_mean_last_half']:.4f} over {len(seeds)} seed(s)")
    return EXIT_OK


# --- verify ----------------------------------------------------------------------

def cmd_verify(cfg: dict, art: Artifacts, suite: str) -> int:
    seed = int(cfg.get("seed", verify.MASTER_SEED))
    try:
        checks = verify.run_suite(suite, seed)
    except KeyError as exc:
        raise ConfigInvalid(str(exc.args[0])) from exc
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    art.json("verify.json", {"command": "verify", "suite": suite, "seed": seed, "passed": ok,
                             "checks": [asdict(c) for c in checks]})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# --- capacity -------------------------------------------------------------------

def cmd_capacity(cfg: dict, art: Artifacts) -> int:
    _require(cfg, "topology", "lambda")
    topo = topology_from_dict(cfg["topology"])
    q = capacity.CapacityQuery.for_topology(topo, cfg["lambda"])
    res = capacity.load_factor(q)
    out = {"command": "capacity", **res.to_dict()}
    if "target_load" in cfg:
        out["scaled_lambda"] = capacity.scale_to_load(q.lam, float(cfg["target_load"]), q.schedules).tolist()
    art.json("capacity.json", out)
    print(_dump(_to_plain(out)), end="")
    return EXIT_OK


# --- analyze --------------------------------------------------------------------

def cmd_analyze(cfg: dict, art: Artifacts) -> int:
    _require(cfg, "topology", "q0")
    topo = topology_from_dict(cfg["topology"])
    q0 = [float(v) for v in cfg["q0"]]
    wanted = cfg.get("analyses", list(ANALYSES))
    unknown = set(wanted) - set(ANALYSES)
    if unknown:
        raise ConfigInvalid(f"unknown analyses: {sorted(unknown)}")
    fn, mode = cfg.get("weight_fn", "loglog"), cfg.get("weight_mode", "with_qmax")
    report: dict = {"command": "analyze"}
    if "goodpi" in wanted:
        from .weights import get_weight_function
        rep = analysis.verify_goodpi(topo, q0, float(cfg.get("epsilon", 0.1)), get_weight_function(fn), mode)
        report["verify_goodpi"] = asdict(rep)
        print(f"goodpi: slack={rep.slack:.6f} envelope={rep.envelope:.6f} "
              f"gibbs_bound_holds={rep.gibbs_bound_holds}")
    if "timescale" in wanted:
        times = [float(t) for t in cfg.get("times", [0, 1, 5, 25, 100])]
        rows = analysis.timescale_report(
            topo, q0, int(cfg.get("replicas", 1000)), times,
            lam=cfg.get("lambda"), frozen=bool(cfg.get("frozen", True)), seed=int(cfg.get("seed", 0)),
            weight_fn=fn, weight_mode=mode,
        )
        report["timescale_report"] = [asdict(r) for r in rows]
        art.text("timescale.csv", analysis.timescale_csv(rows))
        for r in rows:
            print(f"t={r.t:g} tv={r.tv:.4f} stderr={r.stderr:.4f}")
    art.json("analysis.json", report)
    return EXIT_OK


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schednet", description="Randomized scheduling experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "run simulations"), ("verify", "run invariant suites"),
                        ("capacity", "capacity-region load factor"), ("analyze", "mixing and stationarity diagnostics")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON config path", required=name != "verify")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        if name == "verify":
            sp.add_argument("--suite", default="all", choices=verify.SUITES + ("all",))
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    allowed = {"simulate": SIM_KEYS, "verify": VERIFY_KEYS, "capacity": CAPACITY_KEYS,
               "analyze": ANALYZE_KEYS}[args.command]
    try:
        cfg = load_config(args.config, allowed)
        if args.seed is not None:
            cfg["seed"] = args.seed
            cfg.pop("seeds", None)
        if args.command == "verify":
            cfg["suite"] = args.suite
        digest = spec_hash({"command": args.command, **cfg})
        art = Artifacts(Path(args.out) if args.out else None, digest)
        if args.command == "simulate":
            code = cmd_simulate(cfg, art)
        elif args.command == "verify":
            code = cmd_verify(cfg, art, args.suite)
        elif args.command == "capacity":
            code = cmd_capacity(cfg, art)
        else:
            code = cmd_analyze(cfg, art)
        art.close()
        return code
    except (ConfigInvalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchedNetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
