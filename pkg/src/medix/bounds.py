"""Closed-form misclassification bounds and their Monte-Carlo coverage checks.

Three bounds are evaluated for the median-based filter under a Huber mixture
with contamination ``pi``:

* inlier bound, sub-Gaussian InD gradients (theorem form by default, the
  longer form that falls out of the proof via ``form="proof"``),
* outlier bound, given a mean separation ``Delta`` per coordinate,
* inlier bound when only a fourth moment ``mu4`` is known.

Values above 1 are returned unchanged with ``vacuous=True``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import WildSet
from .errors import MedixError
from .filter import FilterConfig, err_rates, medix_filter


@dataclass(frozen=True)
class BoundInputs:
    sigma: float = 1.0
    sigma_out: float = 1.0
    mu4: float = 3.0
    pi: float = 0.5
    m: int = 1000
    d: int = 10
    delta: float = 0.1
    Delta: float = 10.0
    eps_dev: float = 2.0

    @property
    def m_out(self) -> int:
        return math.ceil(self.pi * self.m)

    @property
    def m_in(self) -> int:
        return self.m - self.m_out

    def check(self) -> None:
        if not 0 < self.pi < 1:
            raise MedixError("pi must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise MedixError("delta must lie in (0, 1)")
        if self.sigma < 0 or self.sigma_out <= 0 or self.d < 1:
            raise MedixError("need sigma >= 0, sigma_out > 0 and d >= 1")
        if self.m_in < 1 or self.m_out < 1:
            raise MedixError("need at least one inlier and one outlier")


@dataclass(frozen=True)
class BoundResult:
    value: float
    vacuous: bool
    terms: dict = field(default_factory=dict)

    @property
    def capped(self) -> float:
        return min(1.0, self.value)


def _result(terms: dict) -> BoundResult:
    value = float(sum(terms.values()))
    return BoundResult(value, value > 1.0, terms)


def default_epsilon(sigma: float, d: int, m_in: int) -> float:
    """``sigma * sqrt(2 ln(2 d m_in))``: the tolerance making the tail term ``1/m_in``."""
    if sigma < 0 or d < 1 or m_in < 1:
        raise MedixError("need sigma >= 0, d >= 1, m_in >= 1")
    return sigma * math.sqrt(2.0 * math.log(2.0 * d * m_in))


def _contamination(pi: float) -> float:
    return pi / (2.0 * (1.0 - pi))


def _concentration(delta: float, n: int) -> float:
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def tail_term(inp: BoundInputs) -> float:
    """``2 d exp(-eps^2 / (2 sigma^2))``."""
    if inp.sigma == 0:
        return 0.0
    return 2.0 * inp.d * math.exp(-(inp.eps_dev**2) / (2.0 * inp.sigma**2))


def inlier_bound(inp: BoundInputs, form: str = "statement") -> BoundResult:
    """Bound on the fraction of inliers the filter flags.

    ``form="statement"``: ``1/m_in + 2 sqrt(ln(1/delta) / (2 m_in)) + pi / (2(1 - pi))``.
    ``form="proof"``: ``2 eta + pi / (2(1 - pi))`` with
    ``eta = 2 d exp(-eps^2 / (2 sigma^2)) + sqrt(ln(1/delta) / (2 m_in))``.
    """
    if inp.pi >= 1:
        raise MedixError("pi must be < 1")
    inp.check()
    conc = _concentration(inp.delta, inp.m_in)
    if form == "statement":
        terms = {"tail": 1.0 / inp.m_in, "concentration": 2.0 * conc}
    elif form == "proof":
        if inp.eps_dev <= 0:
            raise MedixError("eps_dev must be positive")
        terms = {"tail": 2.0 * tail_term(inp), "concentration": 2.0 * conc}
    else:
        raise MedixError("form must be 'statement' or 'proof'")
    terms["contamination"] = _contamination(inp.pi)
    return _result(terms)


def outlier_bound(inp: BoundInputs) -> BoundResult:
    """``2 d exp(-(Delta - eps)^2 / (2 sigma_out^2)) + sqrt(ln(1/delta)/(2 m_out)) + (1 - pi)/(2 pi)``."""
    inp.check()
    if inp.eps_dev <= 0:
        raise MedixError("eps_dev must be positive")
    if inp.eps_dev >= inp.Delta:
        raise MedixError("separation violated: eps_dev must be below Delta")
    terms = {
        "separation": 2.0 * inp.d * math.exp(-((inp.Delta - inp.eps_dev) ** 2) / (2.0 * inp.sigma_out**2)),
        "concentration": _concentration(inp.delta, inp.m_out),
        "contamination": (1.0 - inp.pi) / (2.0 * inp.pi),
    }
    return _result(terms)


def inlier_bound_heavy_tail(inp: BoundInputs) -> BoundResult:
    """``2 ((mu4 - sigma^4) / (d (eps^2 - sigma^2)^2) + sqrt(ln(1/delta)/(2 m_in))) + pi/(2(1 - pi))``."""
    inp.check()
    if inp.eps_dev <= inp.sigma:
        raise MedixError("tolerance below noise level: eps_dev must exceed sigma")
    if inp.mu4 < inp.sigma**4:
        raise MedixError("mu4 must be at least sigma^4")
    moment = (inp.mu4 - inp.sigma**4) / (inp.d * (inp.eps_dev**2 - inp.sigma**2) ** 2)
    terms = {
        "moment": 2.0 * moment,
        "concentration": 2.0 * _concentration(inp.delta, inp.m_in),
        "contamination": _contamination(inp.pi),
    }
    return _result(terms)


def student_t_mu4(sigma: float, nu: int) -> float:
    """Fourth moment of a Student-t rescaled to standard deviation ``sigma``."""
    if nu <= 4:
        raise MedixError("fourth moment unbounded")
    return 3.0 * (nu - 2) / (nu - 4) * sigma**4


# --- Monte-Carlo coverage -------------------------------------------------------

BOUND_KINDS = ("inlier", "outlier", "heavy_tail")


@dataclass(frozen=True)
class Scenario:
    pi: float = 0.3
    m: int = 400
    d: int = 20
    sigma: float = 1.0
    Delta: float = 10.0  # absolute per-coordinate separation
    delta: float = 0.1
    tail: str = "gaussian"  # or "student_t"
    nu: int = 8
    eps_dev: float | None = None  # None: default_epsilon (inlier/outlier), 2 sigma (heavy tail)
    k_frac: float = 0.05
    eps_stop_frac: float = 0.1  # eps_stop = eps_stop_frac * sigma
    T: int = 40


@dataclass
class CoverageReport:
    coverage: float
    bound: BoundResult
    records: list[dict]
    threshold: float

    @property
    def passed(self) -> bool:
        return self.coverage >= self.threshold


def coverage_threshold(confidence: float, trials: int) -> float:
    """``confidence`` minus two binomial standard errors."""
    return confidence - 2.0 * math.sqrt(confidence * (1.0 - confidence) / trials)


def scenario_bound(sc: Scenario, kind: str) -> BoundResult:
    if kind not in BOUND_KINDS:
        raise MedixError(f"bound kind must be one of {BOUND_KINDS}")
    m_out = math.ceil(sc.pi * sc.m)
    m_in = sc.m - m_out
    if kind == "heavy_tail":
        eps = sc.eps_dev if sc.eps_dev is not None else 2.0 * sc.sigma
        mu4 = student_t_mu4(sc.sigma, sc.nu) if sc.tail == "student_t" else 3.0 * sc.sigma**4
    else:
        eps = sc.eps_dev if sc.eps_dev is not None else default_epsilon(sc.sigma, sc.d, m_in)
        mu4 = 3.0 * sc.sigma**4
    inp = BoundInputs(
        sigma=sc.sigma, sigma_out=max(sc.sigma, 1e-300), mu4=mu4, pi=sc.pi, m=sc.m, d=sc.d,
        delta=sc.delta, Delta=sc.Delta, eps_dev=eps,
    )
    if kind == "inlier":
        return inlier_bound(inp)
    if kind == "outlier":
        return outlier_bound(inp)
    return inlier_bound_heavy_tail(inp)


def run_trial(sc: Scenario, seed: int) -> dict:
    """One simulated wild set, filtered against the true InD mean."""
    from .synth import simulate_gradient_world

    mu_in = np.zeros(sc.d)
    tail = ("student_t", sc.nu) if sc.tail == "student_t" else "gaussian"
    G, origin = simulate_gradient_world(mu_in, sc.sigma, sc.Delta, sc.pi, sc.m, sc.d, tail, seed)
    cfg = FilterConfig(eps_stop=sc.eps_stop_frac * sc.sigma if sc.sigma > 0 else 1e-12,
                       k=max(1, int(sc.k_frac * sc.m)), T=sc.T)
    wild = WildSet(features=None, origin=origin, gradients=G)
    res = medix_filter(wild, mu_in, cfg)
    return err_rates(res, wild)


def monte_carlo_coverage(sc: Scenario, kind: str, trials: int, seed: int = 0, workers: int = 1) -> CoverageReport:
    """Fraction of trials whose error rate sits at or below ``min(1, bound)``.

    Trial ``t`` uses seed ``seed + t`` so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise MedixError("trials must be at least 1")
    bound = scenario_bound(sc, kind)
    key = "err_out" if kind == "outlier" else "err_in"
    seeds = [seed + t for t in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rates = list(pool.map(lambda s: run_trial(sc, s), seeds))
    else:
        rates = [run_trial(sc, s) for s in seeds]
    records = []
    for t, r in enumerate(rates):
        within = r[key] <= bound.capped
        records.append({"trial": t, "err_in": r["err_in"], "err_out": r["err_out"],
                        "bound": bound.value, "within": int(within)})
    cov = sum(r["within"] for r in records) / trials
    return CoverageReport(cov, bound, records, coverage_threshold(1.0 - sc.delta, trials))


def write_coverage_csv(path, report: CoverageReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "err_in", "err_out", "bound", "within"])
        for r in report.records:
            w.writerow([r["trial"], repr(r["err_in"]), repr(r["err_out"]), repr(r["bound"]), r["within"]])
