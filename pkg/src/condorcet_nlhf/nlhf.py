"""Tabular KL-regularised preference game and Nash rejection sampling.

For one prompt with preference matrix ``P``, reference policy ``ref``
and regularisation ``tau``, write ``s = pi @ P`` (how strongly ``pi``
beats each response).  The quantities used throughout are

* policy reward   ``Z(pi) = -log sum_y' ref(y') exp(-s(y') / tau)``
* Gibbs opponent  ``g(y') ∝ ref(y') exp(-s(y') / tau)``
* implicit reward ``r'(y) = (P @ g)(y) / tau``

and the policy is trained to maximise ``sum_x w_x [Z_x(pi) - KL(pi_x || ref_x)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import log_softmax, logsumexp, rel_entr, softmax

from .errors import ConvergenceError, InputError, SamplingStarvationError, TrainingError
from .prefcore import TAG_REJECTION, TAG_TRAINING, PreferenceMatrix, check_seed, substream

GIBBS = "gibbs-consistent"
LITERAL = "paper-literal"
RULES = (GIBBS, LITERAL)


@dataclass(frozen=True)
class Prompt:
    weight: float
    preference: PreferenceMatrix
    pi_ref: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return self.preference.p


@dataclass(frozen=True)
class NlhfProblem:
    prompts: tuple
    tau: float

    def __post_init__(self):
        if not (isinstance(self.tau, (int, float)) and math.isfinite(self.tau) and self.tau > 0):
            raise InputError("tau must be a positive finite number")
        prompts = tuple(self.prompts)
        if not prompts:
            raise InputError("a problem needs at least one prompt")
        checked = []
        for k, pr in enumerate(prompts):
            pm = pr.preference if isinstance(pr.preference, PreferenceMatrix) else PreferenceMatrix(pr.preference)
            ref = np.asarray(pr.pi_ref, dtype=float)
            if ref.shape != (pm.n,):
                raise InputError(f"prompt {k}: pi_ref length {ref.size} does not match n={pm.n}")
            if np.any(ref <= 0) or abs(ref.sum() - 1.0) > 1e-9:
                raise InputError(f"prompt {k}: pi_ref must be strictly positive and sum to 1")
            if not pr.weight >= 0:
                raise InputError(f"prompt {k}: weight must be nonnegative")
            checked.append(Prompt(float(pr.weight), pm, ref / ref.sum()))
        total = sum(pr.weight for pr in checked)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"prompt weights must sum to 1, got {total}")
        object.__setattr__(self, "prompts", tuple(checked))

    @classmethod
    def single(cls, p, pi_ref=None, tau: float = 1.0) -> "NlhfProblem":
        pm = p if isinstance(p, PreferenceMatrix) else PreferenceMatrix(p)
        ref = np.full(pm.n, 1.0 / pm.n) if pi_ref is None else np.asarray(pi_ref, dtype=float)
        return cls((Prompt(1.0, pm, ref),), tau)

    @classmethod
    def from_json(cls, data) -> "NlhfProblem":
        try:
            prompts = tuple(Prompt(float(d["weight"]), PreferenceMatrix(np.array(d["p"], dtype=float)),
                                   np.array(d["pi_ref"], dtype=float))
                            for d in data["prompts"])
            tau = float(data["tau"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed problem: {exc}") from exc
        return cls(prompts, tau)

    def to_json(self) -> dict:
        return {"tau": self.tau,
                "prompts": [{"weight": pr.weight, "p": pr.p.tolist(), "pi_ref": pr.pi_ref.tolist()}
                            for pr in self.prompts]}

    def reference_policy(self) -> list:
        return [pr.pi_ref.copy() for pr in self.prompts]


@dataclass(frozen=True)
class TabularPolicy:
    """One logit vector per prompt; probabilities are their softmax."""

    logits: tuple

    def probs(self, x: int = 0) -> np.ndarray:
        return softmax(self.logits[x])

    def distributions(self) -> list:
        return [softmax(l) for l in self.logits]

    @classmethod
    def from_distributions(cls, dists) -> "TabularPolicy":
        return cls(tuple(np.log(np.asarray(d, dtype=float)) for d in dists))

    def to_json(self) -> dict:
        return {"logits": [l.tolist() for l in self.logits],
                "policy": [d.tolist() for d in self.distributions()]}


@dataclass(frozen=True)
class RejectionConfig:
    B1: int = 32
    B2: int = 1
    max_proposals: int = 1_000_000
    rule: str = GIBBS

    def __post_init__(self):
        if self.B1 < 1 or self.B2 < 1:
            raise InputError("batch sizes B1 and B2 must be at least 1")
        if self.max_proposals < self.B2:
            raise InputError("max_proposals must be at least B2")
        if self.rule not in RULES:
            raise InputError(f"rule must be one of {RULES}")


@dataclass(frozen=True)
class RejectionSample:
    samples: np.ndarray
    proposals: int
    p_hat: np.ndarray

    @property
    def accepted(self) -> int:
        return int(self.samples.size)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals


@dataclass
class TrainReport:
    iteration: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    kl: list = field(default_factory=list)
    value: list = field(default_factory=list)

    CSV_FIELDS = ("iter", "objective", "residual", "kl", "value")

    def record(self, it, objective, residual, kl, value):
        self.iteration.append(it)
        self.objective.append(objective)
        self.residual.append(residual)
        self.kl.append(kl)
        self.value.append(value)

    def rows(self):
        return zip(self.iteration, self.objective, self.residual, self.kl, self.value)

    def to_json(self) -> dict:
        return {k: getattr(self, a) for k, a in zip(self.CSV_FIELDS, ("iteration", "objective", "residual", "kl", "value"))}


# --------------------------------------------------------------------------
# helpers


def _dist(pi, x: int) -> np.ndarray:
    if isinstance(pi, TabularPolicy):
        return pi.probs(x)
    if not isinstance(pi, (list, tuple)) or np.ndim(pi[0]) == 0:
        pi = np.asarray(pi, dtype=float)
    if isinstance(pi, np.ndarray) and pi.ndim == 1:
        if x != 0:
            raise InputError("a bare probability vector only describes prompt 0")
        return pi
    return np.asarray(pi[x], dtype=float)


def _dists(problem: NlhfProblem, pi) -> list:
    return [_dist(pi, x) for x in range(len(problem.prompts))]


def _beat_strength(problem, pi, x):
    """``s[y'] = sum_y pi(y) P(y > y')``."""
    return _dist(pi, x) @ problem.prompts[x].p


def kl_divergence(pi, ref) -> float:
    return float(np.sum(rel_entr(pi, ref)))


# --------------------------------------------------------------------------
# exact quantities


def gibbs_log_normalizer(problem: NlhfProblem, pi, x: int = 0) -> float:
    """``log sum_y' ref(y') exp(-s(y') / tau)``, which equals ``-Z``."""
    s = _beat_strength(problem, pi, x)
    return float(logsumexp(np.log(problem.prompts[x].pi_ref) - s / problem.tau))


def policy_reward_Z(problem: NlhfProblem, pi, x: int = 0) -> float:
    return -gibbs_log_normalizer(problem, pi, x)


def _gibbs(pr: Prompt, tau: float, pi: np.ndarray) -> np.ndarray:
    return softmax(np.log(pr.pi_ref) - (pi @ pr.p) / tau)


def _implicit(pr: Prompt, tau: float, pi: np.ndarray) -> np.ndarray:
    return pr.p @ _gibbs(pr, tau, pi) / tau


def _logit_gradient(pr: Prompt, logits: np.ndarray, reward: np.ndarray) -> np.ndarray:
    log_pi = log_softmax(logits)
    pi = np.exp(log_pi)
    h = reward - (log_pi - np.log(pr.pi_ref))
    return pr.weight * pi * (h - pi @ h)


def gibbs_opponent(problem: NlhfProblem, pi, x: int = 0) -> np.ndarray:
    return _gibbs(problem.prompts[x], problem.tau, _dist(pi, x))


def implicit_reward_exact(problem: NlhfProblem, pi, x: int = 0, y=None):
    """``r'(y)``; the whole vector when ``y`` is None."""
    r = _implicit(problem.prompts[x], problem.tau, _dist(pi, x))
    return r if y is None else float(r[y])


def objective(problem: NlhfProblem, pi) -> float:
    total = 0.0
    for x, pr in enumerate(problem.prompts):
        total += pr.weight * (policy_reward_Z(problem, pi, x) - kl_divergence(_dist(pi, x), pr.pi_ref))
    return total


def regularized_preference(problem: NlhfProblem, pi, pi_prime) -> float:
    """``P(pi > pi') - tau KL(pi) + tau KL(pi')``, averaged over prompts."""
    total = 0.0
    for x, pr in enumerate(problem.prompts):
        a, b = _dist(pi, x), _dist(pi_prime, x)
        total += pr.weight * (a @ pr.p @ b - problem.tau * kl_divergence(a, pr.pi_ref)
                              + problem.tau * kl_divergence(b, pr.pi_ref))
    return float(total)


def equilibrium_value(problem: NlhfProblem, pi) -> float:
    """Regularised preference of ``pi`` against its Gibbs best response."""
    opp = [gibbs_opponent(problem, pi, x) for x in range(len(problem.prompts))]
    return regularized_preference(problem, pi, opp)


def policy_gradient(problem: NlhfProblem, logits) -> list:
    """Exact gradient of the objective with respect to per-prompt logits.

    The policy-reward part is ``E_{y~pi}[grad log pi(y) r'(y)]`` and the KL
    part is analytic; through the softmax both reduce to
    ``w * pi * (h - pi.h)`` with ``h = r' - log(pi / ref)``.
    """
    logits = logits.logits if isinstance(logits, TabularPolicy) else logits
    grads = []
    for x, pr in enumerate(problem.prompts):
        pi = softmax(logits[x])
        grads.append(_logit_gradient(pr, logits[x], _implicit(pr, problem.tau, pi)))
    return grads


# --------------------------------------------------------------------------
# rejection sampling


def _estimate_strength(pr: Prompt, dist: np.ndarray, B1: int, rng: np.random.Generator) -> np.ndarray:
    batch = rng.choice(dist.size, size=B1, p=dist)
    return pr.p[batch].mean(axis=0)  # estimate of P(pi > y') for every y'


def _propose(pr: Prompt, tau: float, p_hat: np.ndarray, rule: str, count: int,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    cand = rng.choice(p_hat.size, size=count, p=pr.pi_ref)
    u = rng.random(count)
    with np.errstate(divide="ignore"):
        threshold = -tau * np.log(u)
    ok = p_hat[cand] <= threshold if rule == GIBBS else p_hat[cand] >= threshold
    return cand, ok


def _rejection(pr: Prompt, tau: float, dist: np.ndarray, config: RejectionConfig,
               rng: np.random.Generator) -> RejectionSample:
    p_hat = _estimate_strength(pr, dist, config.B1, rng)
    accepted = []
    proposals = 0
    need = config.B2
    while need > 0 and proposals < config.max_proposals:
        chunk = min(config.max_proposals - proposals, max(64, 2 * need))
        cand, ok = _propose(pr, tau, p_hat, config.rule, chunk, rng)
        hits = np.flatnonzero(ok)
        if hits.size >= need:
            last = hits[need - 1]
            accepted.append(cand[hits[:need]])
            proposals += int(last) + 1
            need = 0
        else:
            accepted.append(cand[hits])
            proposals += chunk
            need -= hits.size
    samples = np.concatenate(accepted) if accepted else np.empty(0, dtype=np.int64)
    if need > 0:
        raise SamplingStarvationError(
            f"accepted {samples.size} of {config.B2} samples after {proposals} proposals",
            proposals=proposals, accepted=int(samples.size))
    return RejectionSample(samples=samples, proposals=proposals, p_hat=p_hat)


def rejection_sample_opponent(problem: NlhfProblem, pi, x: int = 0,
                              config: RejectionConfig = RejectionConfig(), seed: int = 0) -> RejectionSample:
    """Draw ``B2`` opponents by thinning proposals from the reference policy.

    ``B1`` draws from ``pi`` give the estimate ``p_hat(y')`` of how strongly
    ``pi`` beats ``y'``.  A proposal ``y' ~ ref`` with ``u ~ U[0, 1]`` is
    kept when ``p_hat(y') <= -tau log u`` under the gibbs-consistent rule
    (probability ``exp(-p_hat / tau)``, i.e. exact Gibbs samples when
    ``p_hat`` is exact), or when ``p_hat(y') >= -tau log u`` under the
    paper-literal rule.
    """
    rng = substream(check_seed(seed), TAG_REJECTION, x)
    return _rejection(problem.prompts[x], problem.tau, _dist(pi, x), config, rng)


def measure_acceptance(problem: NlhfProblem, pi, proposals: int, x: int = 0,
                       config: RejectionConfig = RejectionConfig(), seed: int = 0) -> float:
    """Fraction of a fixed number of proposals the acceptance rule keeps."""
    if proposals < 1:
        raise InputError("proposals must be positive")
    rng = substream(check_seed(seed), TAG_REJECTION, x)
    pr = problem.prompts[x]
    p_hat = _estimate_strength(pr, _dist(pi, x), config.B1, rng)
    _, ok = _propose(pr, problem.tau, p_hat, config.rule, proposals, rng)
    return float(ok.mean())


def expected_acceptance_rate(problem: NlhfProblem, pi, x: int = 0, rule: str = GIBBS) -> float:
    """Acceptance probability per proposal when ``p_hat`` is exact.

    Gibbs-consistent: ``sum ref(y') exp(-s(y') / tau)``, i.e. ``exp(-Z)``.
    Paper-literal: ``sum ref(y') (1 - exp(-s(y') / tau))``.
    """
    if rule not in RULES:
        raise InputError(f"rule must be one of {RULES}")
    pr = problem.prompts[x]
    keep = np.exp(-_beat_strength(problem, pi, x) / problem.tau)
    rate = pr.pi_ref @ keep
    return float(rate if rule == GIBBS else 1.0 - rate)


def implicit_reward_sampled(problem: NlhfProblem, pi, x: int = 0, y=None,
                            config: RejectionConfig = RejectionConfig(), seed: int = 0):
    rs = rejection_sample_opponent(problem, pi, x, config, seed)
    r = problem.prompts[x].p[:, rs.samples].mean(axis=1) / problem.tau
    return r if y is None else float(r[y])


# --------------------------------------------------------------------------
# fixed-point iterations


def online_ipo_iterate(problem: NlhfProblem, pi) -> list:
    """Self-play step: ``pi_next(y) ∝ ref(y) exp(P(y > pi) / tau)``."""
    out = []
    for x, pr in enumerate(problem.prompts):
        out.append(softmax(np.log(pr.pi_ref) + pr.p @ _dist(pi, x) / problem.tau))
    return out


def nash_md_iterate(problem: NlhfProblem, pi, eta: float) -> list:
    """Mirror-descent step against the geometric mixture of ``pi`` and ``ref``."""
    if not eta > 0:
        raise InputError("eta must be positive")
    out = []
    beta = eta * problem.tau
    for x, pr in enumerate(problem.prompts):
        own = 0.0
        if beta != 1.0:
            with np.errstate(divide="ignore"):
                own = (1.0 - beta) * np.log(_dist(pi, x))
        mix = softmax(own + beta * np.log(pr.pi_ref))
        with np.errstate(divide="ignore"):
            out.append(softmax(np.log(mix) + eta * (pr.p @ mix)))
    return out


def fixed_point_residual(problem: NlhfProblem, pi) -> float:
    nxt = online_ipo_iterate(problem, pi)
    return max(float(np.max(np.abs(_dist(pi, x) - nxt[x]))) for x in range(len(nxt)))


def solve_online_ipo(problem: NlhfProblem, pi0=None, tol: float = 1e-13,
                     max_iter: int = 200_000, damping: float = 1.0) -> list:
    """Iterate the self-play map to its fixed point.

    ``damping < 1`` averages in log space, which keeps the iteration
    contracting for small ``tau`` without moving the fixed point.
    """
    if not 0 < damping <= 1:
        raise InputError("damping must lie in (0, 1]")
    pi = problem.reference_policy() if pi0 is None else [np.asarray(p, dtype=float) for p in _dists(problem, pi0)]
    for it in range(max_iter):
        g = online_ipo_iterate(problem, pi)
        if damping == 1.0:
            new = g
        else:
            new = [softmax((1 - damping) * np.log(a) + damping * np.log(b)) for a, b in zip(pi, g)]
        step = max(float(np.max(np.abs(a - b))) for a, b in zip(new, pi))
        pi = new
        if step < tol:
            return pi
    raise ConvergenceError(f"self-play iteration did not converge in {max_iter} steps",
                           last=pi, iterations=max_iter)


# --------------------------------------------------------------------------
# training


def train_nash_rs(problem: NlhfProblem, init=None, steps: int = 2000, lr: float = 0.1,
                  mode: str = "exact", config: RejectionConfig | None = None,
                  seed: int = 0) -> tuple[TrainReport, TabularPolicy]:
    """Gradient ascent on the logits of a tabular policy.

    ``mode="exact"`` uses :func:`policy_gradient`; ``mode="sampled"``
    replaces the implicit reward by its rejection-sampling estimate, one
    opponent batch per prompt per step.
    """
    if steps < 1:
        raise InputError("steps must be at least 1")
    if not lr > 0:
        raise InputError("learning rate must be positive")
    if mode not in ("exact", "sampled"):
        raise InputError("mode must be 'exact' or 'sampled'")
    config = config or RejectionConfig()
    rng = substream(check_seed(seed), TAG_TRAINING)

    if init is None:
        logits = [np.log(pr.pi_ref) for pr in problem.prompts]
    elif isinstance(init, TabularPolicy):
        logits = [np.array(l, dtype=float) for l in init.logits]
    else:
        logits = [np.array(l, dtype=float) for l in init]
    if len(logits) != len(problem.prompts) or any(l.shape != pr.pi_ref.shape for l, pr in zip(logits, problem.prompts)):
        raise InputError("initial logits do not match the problem's prompts")

    report = TrainReport()

    def log_state(it):
        dists = [softmax(l) for l in logits]
        obj = objective(problem, dists)
        kl = sum(pr.weight * kl_divergence(d, pr.pi_ref) for d, pr in zip(dists, problem.prompts))
        report.record(it, obj, fixed_point_residual(problem, dists), kl, equilibrium_value(problem, dists))
        return obj

    start = log_state(0)
    scale = max(abs(start), 1e-12)
    for it in range(1, steps + 1):
        if mode == "exact":
            grads = policy_gradient(problem, logits)
        else:
            grads = []
            for x, pr in enumerate(problem.prompts):
                pi = softmax(logits[x])
                rs = _rejection(pr, problem.tau, pi, config, rng)
                grads.append(_logit_gradient(pr, logits[x], pr.p[:, rs.samples].mean(axis=1) / problem.tau))
        for l, g in zip(logits, grads):
            l += lr * g
            l -= l.max()
        obj = log_state(it)
        if not math.isfinite(obj) or start - obj > 10 * scale:
            raise TrainingError(f"training diverged at step {it}: objective {obj}", report=report)
    return report, TabularPolicy(tuple(logits))


# --------------------------------------------------------------------------
# single-response reward comparison


def compare_single_response_rewards(a: float, tau: float, pi_ref: Sequence[float] = (0.5, 0.5)) -> dict:
    """Policy reward of each pure response versus the scaled BTL reward, two responses.

    With ``P(y1 > y2) = a`` and mean-zero BTL rewards
    ``r(y1) = -r(y2) = log(a / (1 - a)) / 2``.
    """
    if not 0 < a < 1:
        raise InputError("a must lie strictly inside (0, 1)")
    if not tau > 0:
        raise InputError("tau must be positive")
    r1, r2 = (float(v) for v in pi_ref)
    if r1 <= 0 or r2 <= 0 or abs(r1 + r2 - 1) > 1e-9:
        raise InputError("pi_ref must be a positive two-vector summing to 1")
    z1 = -float(logsumexp([math.log(r1) - 0.5 / tau, math.log(r2) - a / tau]))
    z2 = -float(logsumexp([math.log(r1) - (1 - a) / tau, math.log(r2) - 0.5 / tau]))
    btl = 0.5 * math.log(a / (1 - a))
    return {"a": a, "tau": tau, "Z_y1": z1, "Z_y2": z2, "r_y1_over_tau": btl / tau, "r_y2_over_tau": -btl / tau}


def reward_comparison_grid(tau: float, pi_ref=(0.5, 0.5), grid=None) -> list:
    if grid is None:
        grid = np.linspace(0.01, 0.99, 99)
    return [compare_single_response_rewards(float(a), tau, pi_ref) for a in grid]
