"""Metropolis-Hastings sampling and the adaptive multi-fidelity driver.

Randomness comes from three independent streams spawned from one seed:
proposal increments, accept/reject uniforms, and refinement draws (the
high-fidelity acceptance coin and the local design points).  Keeping the
chain's own draws separate from refinement means that an adaptive run in
which no refinement fires reproduces a plain surrogate MH run exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bayes import InverseProblem, log_posterior_from_output, log_prior
from .errors import AmpcError, InputError, RefinementError
from .models.base import EvaluationLedger, LedgeredModel, ledgered
from .regression import fit_prior_surrogate
from .surrogate import PcSurrogate, build_multifidelity

logger = logging.getLogger(__name__)


@dataclass
class ProposalSpec:
    """Gaussian random walk with per-coordinate step sizes."""

    step_sizes: np.ndarray

    def __post_init__(self):
        self.step_sizes = np.atleast_1d(np.asarray(self.step_sizes, dtype=float))
        if np.any(self.step_sizes < 0):
            raise InputError("proposal step sizes must be non-negative")

    @classmethod
    def for_problem(cls, problem: InverseProblem, bounded_step=0.05, gaussian_step=0.1, noise_step=0.1):
        from .bayes import Uniform

        steps = [bounded_step if isinstance(m, Uniform) else gaussian_step for m in problem.prior.marginals]
        if problem.hierarchical:
            steps.append(noise_step)
        return cls(np.array(steps))

    def log_density(self, to, frm) -> float:
        # Symmetric: the ratio cancels in every acceptance probability.
        return 0.0


@dataclass
class RefinementEvent:
    iteration: int
    center: list
    radius: float
    err: float
    n_points: int
    generation: int
    shrunk: bool


@dataclass
class Chain:
    states: np.ndarray
    log_posteriors: np.ndarray
    accepted: np.ndarray
    names: list
    refinement_events: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    hf_eval_snapshots: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.states.shape[0]

    @property
    def accept_count(self) -> int:
        return int(self.accepted.sum())

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / len(self) if len(self) else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", *self.names, "log_posterior", "accepted"])
            for k in range(len(self)):
                w.writerow(
                    [k + 1, *(_fmt(v) for v in self.states[k]), _fmt(self.log_posteriors[k]), int(self.accepted[k])]
                )

    @classmethod
    def from_csv(cls, path) -> "Chain":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        names = header[1:-2]
        arr = np.array([[float(v) for v in r[1:-1]] for r in body]).reshape(len(body), len(names) + 1)
        acc = np.array([r[-1] == "1" for r in body], dtype=bool)
        return cls(arr[:, :-1], arr[:, -1], acc, names)

    def events_dict(self) -> dict:
        return {
            "refinement_events": [asdict(e) for e in self.refinement_events],
            "iterations": self.iterations,
        }


def _fmt(v):
    return format(float(v), ".17g")


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def state_names(problem: InverseProblem, names=None):
    names = list(names) if names else [f"z{i + 1}" for i in range(problem.n_z)]
    if problem.hierarchical:
        names.append("log_sigma2")
    return names


def mh_accept_prob(log_target_current, log_target_proposed, log_q_forward=0.0, log_q_backward=0.0) -> float:
    """``min(1, exp(dlog target + dlog q))`` evaluated in log space."""
    if log_target_proposed == -math.inf:
        return 0.0
    if log_target_current == -math.inf:
        return 1.0
    delta = log_target_proposed - log_target_current + log_q_backward - log_q_forward
    return 1.0 if delta >= 0 else math.exp(delta)


def posterior_target(problem: InverseProblem, forward):
    """Log posterior as a function of the sampler state for a given forward map."""
    n_z = problem.n_z

    def target(state):
        lp = log_prior(problem, state)
        if lp == -math.inf:
            return -math.inf
        return log_posterior_from_output(problem, state, forward(state[:n_z]), lp)

    return target


def _mh_block(target, x, lx, steps, noise, uniforms):
    n = noise.shape[0]
    states = np.empty((n, x.size))
    lps = np.empty(n)
    acc = np.zeros(n, dtype=bool)
    for k in range(n):
        prop = x + steps * noise[k]
        lprop = target(prop)
        if uniforms[k] < mh_accept_prob(lx, lprop):
            x, lx = prop, lprop
            acc[k] = True
        states[k] = x
        lps[k] = lx
    return states, lps, acc, x, lx


def _check_start(problem, start):
    start = np.asarray(start, dtype=float)
    if start.shape != (problem.state_dim,):
        raise InputError(f"start must have length {problem.state_dim}")
    if log_prior(problem, start) == -math.inf:
        raise InputError(f"start {start.tolist()} is outside the prior support")
    return start


def run_mh(
    problem: InverseProblem,
    proposal: ProposalSpec,
    n_steps: int,
    start,
    use_surrogate=False,
    seed=0,
    surrogate=None,
    names=None,
) -> Chain:
    """Random-walk MH against the exact or surrogate posterior."""
    x = _check_start(problem, start)
    if use_surrogate:
        forward = surrogate if surrogate is not None else problem.surrogate
        if forward is None:
            raise InputError("no surrogate supplied")
        hf = problem.model if isinstance(problem.model, LedgeredModel) else None
    else:
        hf = ledgered(problem.model)
        forward = lambda z: hf.evaluate(z, category="direct")  # noqa: E731
    prop_rng, acc_rng, _ = _streams(seed)
    target = posterior_target(problem, forward)
    lx = target(x)
    steps = proposal.step_sizes
    states, lps, acc, _, _ = _mh_block(
        target, x, lx, steps, prop_rng.standard_normal((n_steps, x.size)), acc_rng.random(n_steps)
    )
    ledger = hf.ledger.snapshot() if hf is not None else EvaluationLedger().snapshot()
    return Chain(
        states,
        lps,
        acc,
        state_names(problem, names),
        ledger=ledger,
        meta={"method": "prior_pc" if use_surrogate else "direct", "seed": seed, "n_steps": n_steps},
    )


def error_indicator(high, low, y) -> float:
    """``max_j |high(y)_j - low(y)_j|``."""
    if isinstance(high, LedgeredModel):
        hv = high.evaluate(y, category="indicator")
    else:
        hv = high.evaluate(y)
    return float(np.max(np.abs(hv - low.evaluate(y))))


@dataclass
class AmpcConfig:
    m: int = 5000
    I_max: int = 10
    epsilon: float = 1e-3
    epsilon0: float = 0.1
    radius: float = 0.1
    rho: float = 0.5
    N: int = 3
    N_C: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.rho <= 1):
            raise InputError("rho must lie in (0, 1]")
        if not (self.epsilon > 0 and (self.epsilon <= self.epsilon0 or math.isinf(self.epsilon))):
            raise InputError("thresholds must satisfy 0 < epsilon <= epsilon0 (or epsilon = inf)")
        if self.m < 2:
            raise InputError("subchain length m must be at least 2")
        if self.N_C > self.N or self.N_C < 0:
            raise InputError("correction order must satisfy 0 <= N_C <= N")
        if self.I_max < 1:
            raise InputError("I_max must be at least 1")
        if not self.radius > 0:
            raise InputError("radius must be positive")


def run_ampc(
    problem: InverseProblem,
    config: AmpcConfig,
    proposal: ProposalSpec,
    start,
    low: PcSurrogate | None = None,
    names=None,
) -> Chain:
    """Adaptive multi-fidelity PC Metropolis-Hastings.

    Each outer iteration runs ``m - 1`` surrogate MH steps, proposes one
    more candidate, decides with the exact posterior where to probe the
    surrogate, refines it there when the sup-norm error exceeds
    ``epsilon``, and finally accepts or rejects the candidate with the
    (possibly refreshed) surrogate.  When ``low`` is omitted a prior PC
    surrogate of order ``config.N`` is fitted first.

    The returned chain has ``I_max * m`` states.  ``iterations`` records
    per-iteration indicator values and acceptance probabilities and
    ``refinement_events`` every surrogate update.
    """
    x = _check_start(problem, start)
    if isinstance(problem.model, LedgeredModel):
        hf = problem.model
    else:
        # Line-6 indicators reuse line-4 evaluations whatever the cost class.
        hf = LedgeredModel(problem.model)
        hf.use_cache = True
    n_z = problem.n_z
    if low is None:
        low = fit_prior_surrogate(hf, problem.prior, config.N, seed=config.seed)
    if config.N_C > low.order:
        raise InputError(f"correction order {config.N_C} exceeds surrogate order {low.order}")
    prop_rng, acc_rng, ref_rng = _streams(config.seed)
    lower, upper = problem.prior.lower, problem.prior.upper
    steps = proposal.step_sizes
    hf_target = posterior_target(problem, lambda z: hf.evaluate(z, category="ratio"))
    d = x.size
    m = config.m
    radius = config.radius
    surrogate = low

    all_states, all_lps, all_acc = [], [], []
    events, iterations, snapshots = [], [], []
    for n in range(1, config.I_max + 1):
        target = posterior_target(problem, surrogate)
        lx = target(x)
        states, lps, acc, x_prev, lx_prev = _mh_block(
            target, x, lx, steps, prop_rng.standard_normal((m - 1, d)), acc_rng.random(m - 1)
        )

        z_star = x_prev + steps * prop_rng.standard_normal(d)
        alpha = mh_accept_prob(hf_target(x_prev), hf_target(z_star))
        y = z_star if ref_rng.random() < alpha else x_prev
        err = error_indicator(hf, surrogate, y[:n_z])

        refined = False
        if err > config.epsilon:
            try:
                mf = build_multifidelity(surrogate, hf, config.N_C, y[:n_z], radius, ref_rng, lower, upper)
            except AmpcError as exc:
                raise RefinementError(
                    f"refinement at iteration {n} around {y[:n_z].tolist()} failed: {exc}",
                    event={"iteration": n, "center": y[:n_z].tolist(), "radius": radius, "err": err},
                ) from exc
            surrogate = mf.merged
            shrunk = err <= config.epsilon0
            events.append(
                RefinementEvent(n, y[:n_z].tolist(), radius, err, mf.n_hf_evaluations, mf.generation, shrunk)
            )
            logger.info("iteration %d: err %.3e > %.1e, refined with R=%.4g", n, err, config.epsilon, radius)
            if shrunk:
                radius *= config.rho
            refined = True

        target = posterior_target(problem, surrogate)
        l_prev, l_star = target(x_prev), target(z_star)
        beta = mh_accept_prob(l_prev, l_star)
        if acc_rng.random() < beta:
            x, lx, took = z_star, l_star, True
        else:
            x, lx, took = x_prev, l_prev, False

        all_states.append(np.vstack([states, x]))
        all_lps.append(np.r_[lps, lx])
        all_acc.append(np.r_[acc, took])
        snapshots.append(hf.ledger.snapshot())
        iterations.append(
            {
                "iteration": n,
                "y": y.tolist(),
                "err": err,
                "alpha": alpha,
                "beta": beta,
                "refined": refined,
                "beta_generation": surrogate.generation,
                "radius_after": radius,
            }
        )

    return Chain(
        np.vstack(all_states),
        np.concatenate(all_lps),
        np.concatenate(all_acc),
        state_names(problem, names),
        refinement_events=events,
        iterations=iterations,
        hf_eval_snapshots=snapshots,
        ledger=hf.ledger.snapshot(),
        meta={
            "method": "ampc",
            "config": asdict(config),
            "initial_surrogate_generation": low.generation,
            "final_surrogate": surrogate,
            "initial_surrogate": low,
        },
    )


def write_chain_outputs(chain: Chain, out_dir):
    """Chain CSV, refinement-event JSON sidecar and ledger JSON."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain.to_csv(out / "chain.csv")
    with open(out / "events.json", "w") as fh:
        json.dump(chain.events_dict(), fh, indent=1)
    with open(out / "ledger.json", "w") as fh:
        json.dump(chain.ledger, fh, indent=1)
