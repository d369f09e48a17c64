"""Experiment runner: single runs, report comparison and benchmark sweeps.

``run`` samples one chain and writes ``samples.csv`` (iter, param_*,
accepted, stage) plus ``report.json`` (diagnostics, config echo, version).
``compare`` prints the relative-gain index of a staged run over a plain run.
``bench`` sweeps injected likelihood cost against worker counts and emits a
plot-ready CSV.  Flags override values from an optional ``key = value``
config file whose keys match the config fields below.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import ChainTrace, EvaluationError
from .delayed import OrderPolicy
from .diagnostics import relative_gain, report_from_trace
from .models import (
    BetaBinomialModel,
    LogisticModel,
    MixtureModel,
    NormalNormalModel,
    QuadratureSpec,
    load_labeled_csv,
    simulate_logistic,
    simulate_mixture,
)
from .prefetch import BranchPolicy
from .sampler import ALGORITHMS, run_chain

MODELS = ("normal-normal", "beta-binomial", "logistic", "mixture")
POLICIES = ("static-half", "observed-rate", "uniform-aware", "approx-ratio", "capped-approx")
ORDER_POLICIES = ("fixed", "by-success-rate", "by-last-value")

# default coefficient vector for the synthetic logistic dataset
LOGISTIC_BETA_TRUE = (1.0, -0.8, 0.6, 0.4, -0.3)


@dataclass
class ExperimentConfig:
    model: str = "normal-normal"
    algo: str = "mh"
    iters: int = 10_000
    burnin: int = 1_000
    seed: int = 1
    workers: int = 1
    # cheap-block data fraction; None picks the per-model default
    # (0.05 logistic, 0.02 mixture)
    split_r: Optional[float] = None
    parts: int = 100
    cost_c: int = 0
    policy: Optional[str] = None
    beta_cap: float = 0.9
    order_policy: str = "fixed"
    refresh_every: int = 100
    thin: int = 1
    quad_nodes: int = 512
    n_obs: int = 1_000
    adapt_burnin: bool = False
    data: Optional[str] = None
    out: str = "."

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if self.iters <= 0:
            raise ValueError("iters must be positive")
        if self.burnin < 0:
            raise ValueError("burnin must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.policy is not None and self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.policy is not None and "prefetch" not in self.algo:
            raise ValueError("branch policies only apply to prefetching algorithms")
        if self.order_policy not in ORDER_POLICIES:
            raise ValueError(
                f"order-policy must be one of {ORDER_POLICIES}, got {self.order_policy!r}"
            )
        if self.order_policy != "fixed" and self.algo in ("mh", "mh+prefetch"):
            raise ValueError("factor ordering only applies to the staged algorithms")
        if not 0.0 < self.beta_cap <= 1.0:
            raise ValueError("beta-cap must lie in (0, 1]")
        if self.split_r is not None and not 0.0 < self.split_r < 1.0:
            raise ValueError("split-r must lie in (0, 1)")


def _build_model(config: ExperimentConfig):
    if config.model == "normal-normal":
        return NormalNormalModel()
    if config.model == "beta-binomial":
        return BetaBinomialModel(parts=config.parts)
    if config.model == "logistic":
        if config.data:
            X, y, _ = load_labeled_csv(config.data)
        else:
            X, y = simulate_logistic(
                config.n_obs, len(LOGISTIC_BETA_TRUE), LOGISTIC_BETA_TRUE, config.seed
            )
        split = 0.05 if config.split_r is None else config.split_r
        return LogisticModel(X, y, cost_c=config.cost_c, split_r=split)
    data = (
        np.loadtxt(config.data)
        if config.data
        else simulate_mixture(config.n_obs, config.seed)
    )
    split = 0.02 if config.split_r is None else config.split_r
    return MixtureModel(
        data, quadrature=QuadratureSpec(nodes=config.quad_nodes), split_frac=split
    )


def _branch_policy(config: ExperimentConfig) -> BranchPolicy:
    if config.policy is None:
        return BranchPolicy("static-half", beta_cap=config.beta_cap)
    return BranchPolicy(config.policy, beta_cap=config.beta_cap)


def _write_samples(path: Path, trace: ChainTrace) -> None:
    dims = trace.states.shape[1] if trace.states.size else 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iter"] + [f"param_{j}" for j in range(dims)] + ["accepted", "stage"]
        )
        for i in range(len(trace)):
            writer.writerow(
                [i]
                + [repr(float(v)) for v in trace.states[i]]
                + [int(trace.accepted[i]), int(trace.stage[i])]
            )


def run_experiment(config: ExperimentConfig) -> tuple[Path, Path]:
    """Run one configured chain; returns (samples path, report path)."""
    config.validate()
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples_path = out_dir / "samples.csv"
    report_path = out_dir / "report.json"

    model = _build_model(config)
    target = model.factorized_target()
    kernel = model.default_kernel()
    init = model.default_init()
    rho_hat_fn = getattr(model, "rho2_hat", None)
    order_policy = OrderPolicy(config.order_policy, config.refresh_every)

    start = time.perf_counter()
    try:
        trace = run_chain(
            target,
            kernel,
            init,
            iters=config.iters,
            burnin=config.burnin,
            seed=config.seed,
            algo=config.algo,
            workers=config.workers,
            policy=_branch_policy(config),
            order_policy=order_policy,
            rho_hat_fn=rho_hat_fn,
            adapt_burnin=config.adapt_burnin,
        )
    except EvaluationError as exc:
        if exc.partial_trace is not None:
            _write_samples(samples_path, exc.partial_trace)
        raise
    wall = time.perf_counter() - start

    _write_samples(samples_path, trace)
    report = report_from_trace(
        trace.states,
        trace.acceptance_rate,
        wall,
        trace.draws_per_round,
        thin=config.thin,
    )
    payload = {
        **report.to_dict(),
        # relative ESS = ESS / post-burn-in iterations
        "relative_ess": report.ess / config.iters,
        "config": asdict(config),
        "version": __version__,
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return samples_path, report_path


def compare_reports(report_da: dict, report_mh: dict) -> float:
    """Relative gain of the first (staged) report over the second (plain)."""
    model_da = report_da.get("config", {}).get("model")
    model_mh = report_mh.get("config", {}).get("model")
    if model_da != model_mh:
        raise ValueError(f"reports compare different models: {model_da} vs {model_mh}")
    return relative_gain(
        report_da["ess"],
        report_da["wall_seconds"],
        report_mh["ess"],
        report_mh["wall_seconds"],
    )


def bench_sweep(config: ExperimentConfig, costs, workers_list, out_csv: Path) -> list[dict]:
    """RG grid over injected cost x workers; failed cells become NaN rows."""
    rows = []
    for cost in costs:
        for workers in workers_list:
            row = {"cost_c": cost, "workers": workers}
            try:
                base = dict(asdict(config))
                base.update(cost_c=cost, workers=workers, out=str(Path(config.out) / f"c{cost}_w{workers}"))
                da_cfg = ExperimentConfig(**{**base, "algo": "da+prefetch", "out": base["out"] + "_da"})
                mh_cfg = ExperimentConfig(**{**base, "algo": "mh+prefetch", "out": base["out"] + "_mh"})
                mh_cfg.order_policy = "fixed"
                _, da_report_path = run_experiment(da_cfg)
                _, mh_report_path = run_experiment(mh_cfg)
                da_report = json.loads(da_report_path.read_text())
                mh_report = json.loads(mh_report_path.read_text())
                row.update(
                    rg=compare_reports(da_report, mh_report),
                    ess_da=da_report["ess"],
                    ess_mh=mh_report["ess"],
                    t_da=da_report["wall_seconds"],
                    t_mh=mh_report["wall_seconds"],
                    draws_da=da_report["draws_per_iteration"],
                    draws_mh=mh_report["draws_per_iteration"],
                )
            except Exception as exc:  # keep sweeping; record the failure
                print(f"bench cell cost_c={cost} workers={workers} failed: {exc}", file=sys.stderr)
                row.update(
                    rg=float("nan"), ess_da=float("nan"), ess_mh=float("nan"),
                    t_da=float("nan"), t_mh=float("nan"),
                    draws_da=float("nan"), draws_mh=float("nan"),
                )
            rows.append(row)
    fieldnames = ["cost_c", "workers", "rg", "ess_da", "ess_mh", "t_da", "t_mh", "draws_da", "draws_mh"]
    with out_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _read_config_file(path: str) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_INT_FIELDS = {"iters", "burnin", "seed", "workers", "parts", "cost_c",
               "refresh_every", "thin", "quad_nodes", "n_obs"}
_FLOAT_FIELDS = {"split_r", "beta_cap"}
_BOOL_FIELDS = {"adapt_burnin"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _INT_FIELDS:
        return int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    if key in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key} expects a boolean, got {value!r}")
    return value


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    env_workers = os.environ.get("DAPMH_WORKERS")
    if env_workers is not None:
        values["workers"] = int(env_workers)
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(file_values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: _coerce(k, v) for k, v in file_values.items()})
    for f in fields(ExperimentConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _coerce(f.name, flag)
    return ExperimentConfig(**values)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags override")
    parser.add_argument("--model", choices=MODELS)
    parser.add_argument("--algo", choices=ALGORITHMS)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--burnin", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--split-r", dest="split_r", type=float)
    parser.add_argument("--parts", type=int)
    parser.add_argument("--cost-c", dest="cost_c", type=int)
    parser.add_argument("--policy", choices=POLICIES)
    parser.add_argument("--beta-cap", dest="beta_cap", type=float)
    parser.add_argument("--order-policy", dest="order_policy", choices=ORDER_POLICIES)
    parser.add_argument("--refresh-every", dest="refresh_every", type=int)
    parser.add_argument("--thin", type=int)
    parser.add_argument("--quad-nodes", dest="quad_nodes", type=int)
    parser.add_argument("--n-obs", dest="n_obs", type=int)
    parser.add_argument(
        "--adapt-burnin", dest="adapt_burnin", action="store_const", const=True,
        help="refit the walk covariance once at the end of burn-in",
    )
    parser.add_argument("--data", help="labelled CSV (logistic) or plain series (mixture)")
    parser.add_argument("--out", help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dapmh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    _add_run_flags(run_p)

    cmp_p = sub.add_parser("compare", help="relative gain of a staged over a plain report")
    cmp_p.add_argument("report_da")
    cmp_p.add_argument("report_mh")

    bench_p = sub.add_parser("bench", help="sweep injected cost x workers")
    _add_run_flags(bench_p)
    bench_p.add_argument("--costs", default="0,100,1000", help="comma-separated cost_c values")
    bench_p.add_argument("--workers-list", default="1,2,4,8", help="comma-separated worker counts")
    bench_p.add_argument("--bench-out", default="bench.csv")

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            config = _config_from_args(args)
            samples, report = run_experiment(config)
            print(f"samples: {samples}")
            print(f"report:  {report}")
            return 0
        if args.command == "compare":
            da = json.loads(Path(args.report_da).read_text())
            mh = json.loads(Path(args.report_mh).read_text())
            rg = compare_reports(da, mh)
            verdict = "gain" if rg > 1.0 else "no gain"
            print(
                f"RG {rg:.4f} | {verdict} | ess {da['ess']:.1f}/{mh['ess']:.1f} "
                f"| wall {da['wall_seconds']:.3f}s/{mh['wall_seconds']:.3f}s"
            )
            return 0
        config = _config_from_args(args)
        costs = [int(c) for c in str(args.costs).split(",") if c != ""]
        workers_list = [int(w) for w in str(args.workers_list).split(",") if w != ""]
        if not costs or not workers_list:
            raise ValueError("bench axes must be nonempty")
        rows = bench_sweep(config, costs, workers_list, Path(args.bench_out))
        print(f"wrote {len(rows)} rows to {args.bench_out}")
        return 0
    except EvaluationError as exc:
        print(f"error: evaluation failed: {exc} (partial samples flushed)", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
