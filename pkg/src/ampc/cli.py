"""Command-line entry point.

Every command reads one JSON run configuration (see ``docs/config.md``),
optionally patched with ``--set dotted.key=value`` overrides, and writes
its artifacts to the configured output directory.  Failures exit non-zero
and leave ``error.json`` behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import Gaussian, InverseProblem, KnownSigma, Uniform, log_posterior
from .config import build_problem, load_config
from .diagnostics import (
    GridPosterior,
    chain_summary,
    feasible_set_measure,
    hellinger_distance,
    histogram_rows,
    kl_divergence,
    post_burn_in,
)
from .errors import AmpcError, ConfigError, RefinementError
from .mcmc import AmpcConfig, Chain, ProposalSpec, run_ampc, run_mh, write_chain_outputs
from .models.base import LedgeredModel
from .regression import fit_prior_surrogate
from .surrogate import PcSurrogate

logger = logging.getLogger("ampc")


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_vector(values, path):
    with open(path, "w") as fh:
        for v in values:
            fh.write(format(float(v), ".17g") + "\n")


def _out_dir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def ledger_report(ledger: dict) -> dict:
    ev = ledger.get("evaluations", {})
    offline = ev.get("offline", 0)
    return {
        **ledger,
        "offline": offline,
        "online": sum(v for k, v in ev.items() if k != "offline"),
    }


def default_start(problem) -> np.ndarray:
    """Prior centre, with ``sigma = 1`` for an unknown noise level."""
    start = []
    for m in problem.prior.marginals:
        if isinstance(m, Uniform):
            start.append(0.5 * (m.low + m.high))
        elif isinstance(m, Gaussian):
            start.append(m.mean)
        else:
            start.append(0.0)
    if problem.hierarchical:
        start.append(0.0)
    return np.array(start, dtype=float)


def _proposal(problem, method) -> ProposalSpec:
    if "proposal_steps" in method:
        steps = method["proposal_steps"]
        if len(steps) != problem.state_dim:
            raise ConfigError(f"proposal_steps needs {problem.state_dim} values", path="method.proposal_steps")
        return ProposalSpec(steps)
    return ProposalSpec.for_problem(problem)


def _start(problem, method):
    if "start" in method:
        if len(method["start"]) != problem.state_dim:
            raise ConfigError(f"start needs {problem.state_dim} values", path="method.start")
        return np.array(method["start"], dtype=float)
    return default_start(problem)


def cmd_generate_data(cfg) -> dict:
    if "synthetic" not in cfg["data"]:
        raise ConfigError("generate-data needs a data.synthetic block", path="data")
    problem, gen = build_problem(cfg)
    out = _out_dir(cfg)
    _write_vector(gen.data, out / "data.csv")
    _dump({"config": cfg, "synthetic": gen.provenance(), "n_d": int(gen.data.size)}, out / "data_provenance.json")
    return {"data": str(out / "data.csv"), "n_d": int(gen.data.size), "sigma_effective": gen.sigma}


def cmd_build_surrogate(cfg) -> dict:
    problem, _ = build_problem(cfg)
    hf = LedgeredModel(problem.model)
    sur = fit_prior_surrogate(hf, problem.prior, cfg["method"]["N"], seed=cfg["seed"])
    out = _out_dir(cfg)
    sur.save(out / "surrogate.json")
    _dump(ledger_report(hf.ledger.snapshot()), out / "ledger.json")
    return {"surrogate": str(out / "surrogate.json"), "terms": len(sur.index_set), **hf.ledger.snapshot()}


def execute(cfg):
    """Run the configured sampler; returns ``(problem, chain, final_surrogate)``."""
    problem, _ = build_problem(cfg)
    method = cfg["method"]
    hf = LedgeredModel(problem.model)
    problem.model = hf
    proposal = _proposal(problem, method)
    start = _start(problem, method)
    kind = method["kind"]
    low = None
    if kind in ("prior_pc", "ampc"):
        if "surrogate_file" in method:
            low = PcSurrogate.load(method["surrogate_file"])
            if low.n_z != problem.n_z or low.n_d != problem.n_d:
                raise ConfigError("surrogate file does not match the model dimensions", path="method.surrogate_file")
        else:
            low = fit_prior_surrogate(hf, problem.prior, method["N"], seed=cfg["seed"])
    if kind == "direct":
        chain = run_mh(problem, proposal, method["n_steps"], start, seed=cfg["seed"])
        final = None
    elif kind == "prior_pc":
        chain = run_mh(problem, proposal, method["n_steps"], start, use_surrogate=True, seed=cfg["seed"], surrogate=low)
        chain.ledger = hf.ledger.snapshot()
        final = low
    else:
        config = AmpcConfig(
            m=method["m"],
            I_max=method["I_max"],
            epsilon=method["epsilon"],
            epsilon0=method["epsilon0"],
            radius=method["radius"],
            rho=method["rho"],
            N=low.order,
            N_C=method["N_C"],
            seed=cfg["seed"],
        )
        chain = run_ampc(problem, config, proposal, start, low=low)
        final = chain.meta["final_surrogate"]
    return problem, chain, final


def _write_summary(chain, cfg, out: Path):
    method = cfg["method"]
    summary = chain_summary(chain, method["burn_in"], bins=method["histogram_bins"])
    with open(out / "histograms.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coordinate", "left", "right", "count"])
        for name, lo, hi, c in histogram_rows(summary):
            w.writerow([name, format(lo, ".17g"), format(hi, ".17g"), c])
    slim = {k: v for k, v in summary.items() if not k.startswith("histograms")}
    _dump(slim, out / "summary.json")
    return slim


def cmd_run(cfg) -> dict:
    out = _out_dir(cfg)
    _dump(cfg, out / "config.json")
    problem, chain, final = execute(cfg)
    write_chain_outputs(chain, out)
    report = ledger_report(chain.ledger)
    _dump(report, out / "ledger.json")
    _write_vector(problem.data, out / "data.csv")
    if final is not None:
        final.save(out / "surrogate.json")
    summary = _write_summary(chain, cfg, out)
    return {
        "output_dir": str(out),
        "n_states": len(chain),
        "acceptance_rate": chain.acceptance_rate,
        "ledger": report,
        "means": summary["means"],
        "refinement_events": len(chain.refinement_events),
    }


def _grid_axes(cfg, problem):
    g = cfg["grid"]
    if problem.n_z > 3:
        raise ConfigError("grid diagnostics need at most 3 parameters", path="grid")
    low = g.get("low", problem.prior.lower.tolist())
    high = g.get("high", problem.prior.upper.tolist())
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
        raise ConfigError("grid bounds are required for unbounded priors", path="grid")
    return [np.linspace(lo, hi, g["nodes"]) for lo, hi in zip(low, high)]


def _grid_problem(cfg, problem):
    """The problem with sigma fixed, for grid quadrature over the parameters only."""
    if problem.hierarchical:
        if "sigma" not in cfg["grid"]:
            raise ConfigError("grid.sigma is required when the noise level is sampled", path="grid.sigma")
        noise = KnownSigma(cfg["grid"]["sigma"])
    else:
        noise = KnownSigma(cfg["grid"].get("sigma", problem.noise.sigma))
    model = problem.model.model if isinstance(problem.model, LedgeredModel) else problem.model
    return InverseProblem(model, problem.prior, problem.data, noise)


def grid_metrics(cfg, problem, surrogate) -> dict:
    gp = _grid_problem(cfg, problem)
    axes = _grid_axes(cfg, problem)
    exact = GridPosterior.from_function(lambda z: log_posterior(gp, z), axes)
    if surrogate is None:
        return {"kl": 0.0, "hellinger": 0.0}
    approx = GridPosterior.from_function(lambda z: log_posterior(gp, z, True, surrogate), axes)
    return {"kl": kl_divergence(approx, exact), "hellinger": hellinger_distance(approx, exact)}


def cmd_compare(cfgs, out_dir) -> dict:
    rows = []
    for cfg in cfgs:
        problem, chain, final = execute(cfg)
        ev = chain.ledger.get("evaluations", {})
        row = {
            "name": cfg["name"],
            "method": cfg["method"]["kind"],
            "n_states": len(chain),
            "acceptance_rate": chain.acceptance_rate,
            "offline": ev.get("offline", 0),
            "online_direct": ev.get("direct", 0),
            "online_ratio": ev.get("ratio", 0),
            "online_indicator": ev.get("indicator", 0),
            "online_refinement": ev.get("refinement", 0),
            "cache_hits": sum(chain.ledger.get("cache_hits", {}).values()),
            "refinement_events": len(chain.refinement_events),
            "kl": None,
            "hellinger": None,
        }
        if "grid" in cfg:
            row.update(grid_metrics(cfg, problem, final))
        rows.append(row)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump({"rows": rows}, out / "compare.json")
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return {"rows": rows, "output_dir": str(out)}


def cmd_diagnose(run_dir, burn_in=None, epsilon=None, n_samples=200) -> dict:
    run_dir = Path(run_dir)
    try:
        cfg = json.loads((run_dir / "config.json").read_text())
    except OSError as exc:
        raise ConfigError(f"{run_dir} does not contain a run (config.json missing)") from exc
    chain = Chain.from_csv(run_dir / "chain.csv")
    if burn_in is not None:
        cfg["method"]["burn_in"] = burn_in
    cfg["output_dir"] = str(run_dir)
    metrics = {"summary": _write_summary(chain, cfg, run_dir)}
    sur_path = run_dir / "surrogate.json"
    surrogate = PcSurrogate.load(sur_path) if sur_path.exists() else None
    problem = None
    if surrogate is not None or "grid" in cfg:
        problem, _ = build_problem(cfg)
        problem.model = LedgeredModel(problem.model)
    if surrogate is not None:
        eps = cfg["method"]["epsilon"] if epsilon is None else epsilon
        kept = post_burn_in(chain.states, cfg["method"]["burn_in"])
        idx = np.unique(np.linspace(0, len(kept) - 1, min(n_samples, len(kept))).astype(int))
        fs = feasible_set_measure(problem, surrogate, eps, kept[idx])
        metrics["feasible_set"] = {
            "epsilon": fs.epsilon,
            "complement_measure": fs.estimate,
            "stderr": fs.stderr,
            "n_samples": fs.n_samples,
        }
        metrics["diagnostic_ledger"] = problem.model.ledger.snapshot()
    if "grid" in cfg:
        metrics["grid"] = grid_metrics(cfg, problem, surrogate)
    _dump(metrics, run_dir / "metrics.json")
    return metrics


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ampc", description="Adaptive multi-fidelity PC surrogates for MH sampling.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("config", help="run configuration (JSON)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--output-dir")
        sp.add_argument("--seed", type=int)
        return sp

    with_config(sub.add_parser("generate-data", help="write synthetic observations"))
    with_config(sub.add_parser("build-surrogate", help="fit a prior PC surrogate"))
    with_config(sub.add_parser("run", help="sample the posterior"))
    cp = sub.add_parser("compare", help="run several configurations and tabulate costs and accuracy")
    cp.add_argument("configs", nargs="+")
    cp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    cp.add_argument("--output-dir", required=True)
    dp = sub.add_parser("diagnose", help="recompute summaries and accuracy metrics for a finished run")
    dp.add_argument("run_dir")
    dp.add_argument("--burn-in", type=float)
    dp.add_argument("--epsilon", type=float)
    dp.add_argument("--n-samples", type=int, default=200)
    return p


def _load(path, args):
    overrides = list(args.overrides)
    if getattr(args, "output_dir", None) and args.command != "compare":
        overrides.append(f"output_dir={json.dumps(str(Path(args.output_dir).resolve()))}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(path, overrides)


def _error_payload(exc) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError) and exc.path:
        payload["path"] = exc.path
    if isinstance(exc, RefinementError) and exc.event:
        payload["event"] = exc.event
    return payload


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_dir = None
    try:
        if args.command == "compare":
            cfgs = [_load(c, args) for c in args.configs]
            out_dir = args.output_dir
            result = cmd_compare(cfgs, out_dir)
        elif args.command == "diagnose":
            out_dir = args.run_dir
            result = cmd_diagnose(args.run_dir, args.burn_in, args.epsilon, args.n_samples)
        else:
            cfg = _load(args.config, args)
            out_dir = cfg["output_dir"]
            handler = {"generate-data": cmd_generate_data, "build-surrogate": cmd_build_surrogate, "run": cmd_run}
            result = handler[args.command](cfg)
    except (AmpcError, OSError, ValueError) as exc:
        payload = _error_payload(exc)
        print(json.dumps(payload), file=sys.stderr)
        if out_dir is not None:
            try:
                Path(out_dir).mkdir(parents=True, exist_ok=True)
                _dump(payload, Path(out_dir) / "error.json")
            except OSError:
                pass
        return 2 if isinstance(exc, ConfigError) else 1
    print(json.dumps(result, default=float, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
