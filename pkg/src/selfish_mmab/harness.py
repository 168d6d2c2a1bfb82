"""Batch runner and command line interface.

A run is described by a `RunConfig` (JSON file plus flag overrides, flags
win). Every (config, seed) pair determines every emitted number; seeds may
run in a process pool and are merged back by run_id.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adversary import ADVERSARIES
from .algo_rsdgt import RsdGT, check_delta
from .algo_sicgt import SicGT
from .algo_statistic import SelfishRobustMMAB
from .env import ConfigError, EnvModel, Sensing
from .metrics import (checkpoints, mean_matrix, pseudo_regret, rsd_regret, rsd_welfare,
                      rsd_welfare_exact, rsd_welfare_mc)
from .sim import Phase, simulate
from .streams import substream

log = logging.getLogger("selfish_mmab")

ALGOS = ("selfish-robust-mmab", "sic-gt", "rsd-gt")
DEFAULT_SENSING = {"selfish-robust-mmab": "statistic", "sic-gt": "full", "rsd-gt": "full"}
ALLOWED_SENSING = {"selfish-robust-mmab": ("statistic", "full"), "sic-gt": ("full",),
                   "rsd-gt": ("full",)}


@dataclass
class RunConfig:
    algo: str = "sic-gt"
    K: int = 5
    M: int = 3
    T: int = 100_000
    means: object = "uniform-gaps:0.9:0.1"
    delta: float = 0.0
    sensing: str | None = None
    adversary: dict | None = None
    seeds: list | None = None
    n_seeds: int = 1
    base_seed: int = 0
    checkpoints: object = "pow2"
    out: str | None = None
    beta: float = 39.0
    workers: int = 1

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        for k in d:
            if k not in names:
                raise ConfigError(k, "unknown configuration field")
        return cls(**d)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return [self.base_seed + i for i in range(self.n_seeds)]

    def sensing_mode(self) -> Sensing:
        return Sensing(self.sensing or DEFAULT_SENSING.get(self.algo, "full"))

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError("algo", f"{self.algo!r} is not one of {', '.join(ALGOS)}")
        for name in ("K", "M", "T"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if self.M > self.K:
            raise ConfigError("M", f"M={self.M} exceeds K={self.K}")
        if self.sensing is not None and self.sensing not in ("full", "statistic", "none"):
            raise ConfigError("sensing", f"unknown sensing {self.sensing!r}")
        if self.sensing_mode().value not in ALLOWED_SENSING[self.algo]:
            raise ConfigError("sensing", f"{self.algo} cannot run under {self.sensing} sensing")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("delta", "must lie in [0, 1)")
        if self.algo == "rsd-gt":
            if self.M >= self.K:
                raise ConfigError("M", "rsd-gt needs M < K for a free communication arm")
            check_delta(self.K, self.M, self.delta)
        elif self.delta:
            raise ConfigError("delta", f"{self.algo} assumes homogeneous means")
        if self.beta <= 0:
            raise ConfigError("beta", "must be positive")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.seeds is None and self.n_seeds < 1:
            raise ConfigError("n_seeds", "must be >= 1")
        if self.adversary is not None:
            kind = self.adversary.get("kind") if isinstance(self.adversary, dict) else None
            if kind not in ADVERSARIES:
                raise ConfigError("adversary", f"unknown kind {kind!r}")
            p = self.adversary.get("player", self.M - 1)
            if not 0 <= p < self.M:
                raise ConfigError("adversary", f"player index {p} out of range")
        try:
            checkpoints(self.T, self.checkpoints)
        except ValueError as e:
            raise ConfigError("checkpoints", str(e)) from None
        self.build_means()

    # ------------------------------------------------------------------
    def build_means(self) -> np.ndarray:
        """Explicit list or matrix, or a generator string.

        "uniform-gaps:top:gap" gives top, top-gap, ...; "random:min_gap"
        draws K means with pairwise gaps >= min_gap from the aux stream.
        With delta > 0 a vector is a base, perturbed per player by
        multipliers drawn from [1-delta, 1+delta].
        """
        m = self.means
        if isinstance(m, str):
            kind, *args = m.split(":")
            try:
                vals = [float(a) for a in args]
            except ValueError:
                raise ConfigError("means", f"bad generator arguments in {m!r}") from None
            if kind == "uniform-gaps" and len(vals) == 2:
                base = vals[0] - vals[1] * np.arange(self.K)
            elif kind == "random" and len(vals) == 1:
                base = self._random_means(vals[0])
            else:
                raise ConfigError("means", f"unknown generator {m!r}")
        else:
            base = np.asarray(m, dtype=float)
        if base.ndim == 1 and base.size != self.K:
            raise ConfigError("means", f"expected {self.K} values, got {base.size}")
        if np.any(base < 0) or np.any(base > 1):
            raise ConfigError("means", "all means must lie in [0, 1]")
        if base.ndim == 1 and self.delta > 0:
            rng = substream(self.base_seed, "aux", 1)
            mult = rng.uniform(1 - self.delta, 1 + self.delta, size=(self.M, self.K))
            base = np.clip(base[None, :] * mult, 0.0, 1.0)
        return base

    def _random_means(self, gap: float) -> np.ndarray:
        if gap * (self.K - 1) >= 1:
            raise ConfigError("means", f"min gap {gap} impossible with K={self.K}")
        rng = substream(self.base_seed, "aux", 0)
        slack = 1 - gap * (self.K - 1)
        cuts = np.sort(rng.uniform(0, slack, self.K))
        return np.sort(cuts + gap * np.arange(self.K))[::-1]

    def model(self) -> EnvModel:
        return EnvModel(self.K, self.M, self.T, self.build_means(), sensing=self.sensing_mode(),
                        delta=self.delta)


def make_players(cfg: RunConfig) -> list:
    def coop():
        if cfg.algo == "sic-gt":
            return SicGT()
        if cfg.algo == "rsd-gt":
            return RsdGT(cfg.delta)
        return SelfishRobustMMAB(beta=cfg.beta)

    players = [coop() for _ in range(cfg.M)]
    if cfg.adversary:
        opts = dict(cfg.adversary)
        kind = opts.pop("kind")
        idx = opts.pop("player", cfg.M - 1)
        cls = ADVERSARIES[kind]
        if kind in ("rank-rigger", "preference-liar") and "delta" not in opts:
            opts["delta"] = cfg.delta
        if kind == "greedy-best-response" and "beta" not in opts:
            opts["beta"] = cfg.beta
        try:
            players[idx] = cls(**opts)
        except TypeError as e:
            raise ConfigError("adversary", str(e)) from None
    return players


# ----------------------------------------------------------------------
# running

def run_one(cfg: RunConfig, seed: int, run_index: int = 0) -> dict:
    model = cfg.model()
    res = simulate(model, make_players(cfg), seed)
    if cfg.algo == "rsd-gt":
        traj = rsd_regret(res, rsd_welfare(mean_matrix(model)), cfg.checkpoints)
    else:
        traj = pseudo_regret(res, cfg.checkpoints)
    pr = res.first_event("punish:")
    rows = []
    for i, t in enumerate(traj.checkpoints):
        phases = "|".join(Phase(int(p)).name.lower() for p in res.phase[t - 1])
        rows.append([f"{run_index:04d}", seed, cfg.algo, cfg.K, cfg.M, cfg.T, int(t),
                     _fmt(traj.cum_regret[i])] + [_fmt(v) for v in traj.per_player[i]]
                    + [pr, phases])
    return {"run_id": f"{run_index:04d}", "seed": seed, "rows": rows,
            "final_regret": float(traj.cum_regret[-1]),
            "rewards": [float(v) for v in traj.per_player[-1]], "punish_round": pr}


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def _run_star(args):
    cfg_dict, seed, i = args
    return run_one(RunConfig.from_dict(cfg_dict), seed, i)


def run_batch(cfg: RunConfig) -> tuple[str, dict]:
    """Run every seed; return (csv text, summary dict)."""
    cfg.validate()
    seeds = cfg.seed_list()
    jobs = [(cfg.to_dict(), s, i) for i, s in enumerate(seeds)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            outs = list(ex.map(_run_star, jobs))
    else:
        outs = [_run_star(j) for j in jobs]
    outs.sort(key=lambda o: o["run_id"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "seed", "algo", "K", "M", "T", "t", "cum_regret"]
               + [f"reward_{j}" for j in range(cfg.M)] + ["punish_round", "phase"])
    for o in outs:
        w.writerows(o["rows"])
    fin = np.array([o["final_regret"] for o in outs])
    rew = np.array([o["rewards"] for o in outs])
    summary = {
        "config": cfg.to_dict(),
        "n_runs": len(outs),
        "final_regret": _stats(fin),
        "rewards": [_stats(rew[:, j]) for j in range(cfg.M)],
        "punish_rate": float(np.mean([o["punish_round"] >= 0 for o in outs])),
    }
    return buf.getvalue(), summary


def _stats(x: np.ndarray) -> dict:
    return {"mean": float(np.mean(x)), "std": float(np.std(x, ddof=1)) if x.size > 1 else 0.0}


def write_outputs(csv_text: str, summary: dict, out: str) -> tuple[str, str]:
    base = out[:-4] if out.endswith(".csv") else out
    d = os.path.dirname(base)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(base + ".csv", "w", encoding="utf-8", newline="") as f:
        f.write(csv_text)
    with open(base + ".json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return base + ".csv", base + ".json"


# ----------------------------------------------------------------------
# CLI

def _parse_means(s: str):
    s = s.strip()
    if s.startswith("["):
        return json.loads(s)
    if ":" in s and not s[0].isdigit():
        return s
    return [float(v) for v in s.split(",")]


def _parse_adversary(s: str):
    if s in ("", "none"):
        return None
    if s.startswith("{"):
        return json.loads(s)
    return {"kind": s}


def config_from_args(ns) -> RunConfig:
    data = {}
    if ns.config:
        with open(ns.config, encoding="utf-8") as f:
            data = json.load(f)
    flags = {
        "algo": ns.algo, "K": ns.K, "M": ns.M, "T": ns.T, "delta": ns.delta,
        "sensing": ns.sensing, "out": ns.out, "beta": ns.beta, "workers": ns.workers,
        "checkpoints": ns.checkpoints, "base_seed": ns.base_seed,
    }
    if ns.means is not None:
        flags["means"] = _parse_means(ns.means)
    if ns.adversary is not None:
        flags["adversary"] = _parse_adversary(ns.adversary)
    if ns.seeds is not None:
        if "," in ns.seeds:
            flags["seeds"] = [int(v) for v in ns.seeds.split(",")]
        else:
            flags["n_seeds"] = int(ns.seeds)
            flags["seeds"] = None
    data.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.from_dict(data)


def _cmd_run(ns) -> int:
    cfg = config_from_args(ns)
    csv_text, summary = run_batch(cfg)
    if cfg.out:
        paths = write_outputs(csv_text, summary, cfg.out)
        print(f"wrote {paths[0]} and {paths[1]}")
        if ns.report:
            from .report import render_report
            for p in render_report(paths[0], os.path.dirname(paths[0]) or "."):
                print(f"wrote {p}")
    else:
        sys.stdout.write(csv_text)
    print(json.dumps({k: summary[k] for k in ("n_runs", "final_regret", "punish_rate")}),
          file=sys.stderr)
    return 0


def _cmd_bench(ns) -> int:
    from .acceptance import run_suite
    only = [int(x) for x in ns.only.split(",")] if ns.only else None
    results = run_suite(only=only, quick=ns.quick)
    return 0 if all(r.passed for r in results) else 1


def _cmd_rsd(ns) -> int:
    path = ns.means_file
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        mu = np.asarray(json.loads(text), dtype=float)
    except json.JSONDecodeError:
        mu = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    if mu.ndim != 2 or mu.shape[0] > mu.shape[1]:
        raise ConfigError("means_file", "need an M x K matrix with M <= K")
    out = {"M": mu.shape[0], "K": mu.shape[1]}
    if mu.shape[0] <= 8:
        ex = rsd_welfare_exact(mu, ns.restrict)
        out["exact"] = {"welfare": ex.welfare, "utilities": ex.utilities.tolist()}
    mc = rsd_welfare_mc(mu, ns.samples, substream(ns.seed, "aux", 2), ns.restrict)
    out["monte_carlo"] = {"welfare": mc.welfare, "stderr": mc.stderr,
                          "utilities": mc.utilities.tolist(), "samples": ns.samples}
    print(json.dumps(out, indent=2))
    return 0


def _cmd_report(ns) -> int:
    from .report import render_report
    for p in render_report(ns.csv, ns.out):
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="selfish-mmab",
                                 description="Decentralized multiplayer bandit simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a seeded batch")
    r.add_argument("--config", help="JSON config file; flags override it")
    r.add_argument("--algo", choices=ALGOS)
    r.add_argument("--K", type=int)
    r.add_argument("--M", type=int)
    r.add_argument("--T", type=int)
    r.add_argument("--means", help="comma list, JSON matrix, uniform-gaps:top:gap or random:gap")
    r.add_argument("--delta", type=float)
    r.add_argument("--sensing", choices=("full", "statistic", "none"))
    r.add_argument("--adversary", help="kind name or JSON object with a 'kind' key")
    r.add_argument("--seeds", help="count, or comma list of seeds")
    r.add_argument("--base-seed", dest="base_seed", type=int)
    r.add_argument("--checkpoints", help="pow2, linear:n or end")
    r.add_argument("--beta", type=float)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", help="output path; .csv and .json are written")
    r.add_argument("--report", action="store_true", help="also render figures next to the CSV")
    r.set_defaults(func=_cmd_run)
    b = sub.add_parser("bench", help="run a check suite")
    b.add_argument("--suite", choices=("acceptance",), default="acceptance")
    b.add_argument("--only", help="comma list of criterion numbers")
    b.add_argument("--quick", action="store_true", help="reduced seed counts")
    b.set_defaults(func=_cmd_bench)
    s = sub.add_parser("rsd-benchmark", help="expected RSD welfare of a mean matrix")
    s.add_argument("--means-file", dest="means_file", required=True)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restrict", action="store_true", help="dictators pick among arms 0..M-1")
    s.set_defaults(func=_cmd_rsd)
    p = sub.add_parser("report", help="render figures from a run CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SELFISH_MMAB_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
