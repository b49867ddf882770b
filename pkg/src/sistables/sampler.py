"""Sequential importance sampling of tables with fixed margins.

Each cell is drawn in turn from a step distribution on the interval the
bound engine allows, given the cells already drawn.  The proposal density
of a completed table is the product of the step probabilities; estimators
reweight by ``p/q``.  All weight arithmetic is done in log space.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bounds import BoundEngine, make_engine
from .model import ConstraintSystem, TableVector, compute_margin, is_homozygote_label

DEFAULT_BATCHES = 20


class ProposalKind(enum.Enum):
    UNIFORM = "uniform"
    HYPERGEOMETRIC = "hypergeometric"

    @classmethod
    def parse(cls, value) -> "ProposalKind":
        if isinstance(value, cls):
            return value
        aliases = {"uniform": cls.UNIFORM, "hyper": cls.HYPERGEOMETRIC, "hypergeometric": cls.HYPERGEOMETRIC}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown proposal {value!r}") from None


# ---------------------------------------------------------------------------
# Step distributions


def step_pmf_uniform(l: int, u: int) -> dict[int, Fraction]:
    if l > u:
        raise ValueError(f"empty interval [{l}, {u}]")
    mass = Fraction(1, u - l + 1)
    return {x: mass for x in range(l, u + 1)}


def step_pmf_hypergeometric(l: int, u: int) -> dict[int, Fraction]:
    """``p(x) = C(u, x) C(u, l+u-x) / C(2u, l+u)`` on ``l..u``."""
    if l > u:
        raise ValueError(f"empty interval [{l}, {u}]")
    if l < 0:
        raise ValueError("hypergeometric step needs l >= 0")
    total = math.comb(2 * u, l + u)
    return {x: Fraction(math.comb(u, x) * math.comb(u, l + u - x), total) for x in range(l, u + 1)}


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def step_log_prob(proposal: ProposalKind, l: int, u: int, x: int) -> float:
    """Log of the step probability; deterministic so replays match bit for bit."""
    if l == u:
        return 0.0
    if proposal is ProposalKind.UNIFORM:
        return -math.log(u - l + 1)
    return _log_comb(u, x) + _log_comb(u, l + u - x) - _log_comb(2 * u, l + u)


def step_draw(proposal: ProposalKind, l: int, u: int, rng: np.random.Generator) -> int:
    if l == u:
        return l
    if proposal is ProposalKind.UNIFORM:
        return int(rng.integers(l, u + 1))
    # u good and u bad items, l+u draws: the good count has exactly this pmf
    return int(rng.hypergeometric(u, u, l + u))


# ---------------------------------------------------------------------------
# Targets


class TargetKind(enum.Enum):
    UNIFORM = "uniform"
    HYPERGEOMETRIC = "hypergeometric"
    HARDY_WEINBERG = "hardyWeinberg"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TargetDistribution:
    """Unnormalized target ``p(n)`` on the fiber.

    ``heterozygous`` marks the cells counted in ``h`` for the Hardy-Weinberg
    target.  ``log_weight_fn`` is used for custom targets.
    """

    kind: TargetKind
    heterozygous: tuple[bool, ...] | None = None
    log_weight_fn: Callable[[Sequence[int]], float] | None = None

    @classmethod
    def parse(cls, value, system: ConstraintSystem | None = None) -> "TargetDistribution":
        if isinstance(value, TargetDistribution):
            return value
        name = str(value).lower()
        if name == "uniform":
            return cls(TargetKind.UNIFORM)
        if name in ("hyper", "hypergeometric"):
            return cls(TargetKind.HYPERGEOMETRIC)
        if name in ("hw", "hardyweinberg", "hardy-weinberg"):
            if system is None:
                raise ValueError("the Hardy-Weinberg target needs the system's cell labels")
            return cls.hardy_weinberg(system)
        raise ValueError(f"unknown target {value!r}")

    @classmethod
    def hardy_weinberg(cls, system: ConstraintSystem) -> "TargetDistribution":
        mask = tuple(not is_homozygote_label(lab) for lab in system.cell_labels)
        return cls(TargetKind.HARDY_WEINBERG, heterozygous=mask)

    @classmethod
    def custom(cls, fn: Callable[[Sequence[int]], float]) -> "TargetDistribution":
        return cls(TargetKind.CUSTOM, log_weight_fn=fn)

    def exact_weight(self, counts: Sequence[int]) -> Fraction | None:
        """``p(n)`` as an exact rational for the built-in targets, ``None`` for custom ones."""
        if self.kind is TargetKind.UNIFORM:
            return Fraction(1)
        if self.kind is TargetKind.CUSTOM:
            return None
        den = 1
        for c in counts:
            den *= math.factorial(int(c))
        num = 1
        if self.kind is TargetKind.HARDY_WEINBERG:
            num = 2 ** _heterozygote_count(self, counts)
        return Fraction(num, den)


def _heterozygote_count(target: TargetDistribution, counts) -> int:
    if target.heterozygous is None or len(target.heterozygous) != len(counts):
        raise ValueError("heterozygote mask does not match the table")
    return sum(int(c) for c, het in zip(counts, target.heterozygous) if het)


def target_log_weight(target: TargetDistribution, table) -> float:
    counts = table.counts if isinstance(table, TableVector) else tuple(int(c) for c in table)
    if any(c < 0 for c in counts):
        raise ValueError("table counts must be nonnegative")
    kind = target.kind
    if kind is TargetKind.UNIFORM:
        return 0.0
    if kind is TargetKind.CUSTOM:
        return float(target.log_weight_fn(counts))
    lw = -math.fsum(math.lgamma(c + 1) for c in counts)
    if kind is TargetKind.HARDY_WEINBERG:
        lw += _heterozygote_count(target, counts) * math.log(2)
    return lw


def exact_test_statistic(target: TargetDistribution, observed) -> Callable[[Sequence[int]], int]:
    """``f(n) = 1`` iff ``p(n) <= p(n0)``.

    Built-in targets are compared exactly (integer cross-multiplication), so
    ties such as permuted tables are never split by rounding.
    """
    n0 = observed.counts if isinstance(observed, TableVector) else tuple(int(c) for c in observed)
    w0 = target.exact_weight(n0)
    if w0 is None:
        lw0 = target_log_weight(target, n0)
        return lambda n: int(target_log_weight(target, n) <= lw0)

    def f(n):
        w = target.exact_weight(n)
        return int(w.numerator * w0.denominator <= w0.numerator * w.denominator)

    return f


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class SampledTable:
    """One draw; ``table`` is ``None`` for a dead end."""

    table: TableVector | None
    log_q: float
    valid: bool
    dead_end_at: int | None = None


def sis_sample_one(
    system: ConstraintSystem,
    t: Sequence[int],
    proposal,
    engine: BoundEngine | str,
    rng: np.random.Generator,
) -> SampledTable:
    proposal = ProposalKind.parse(proposal)
    if isinstance(engine, str):
        engine = make_engine(system, engine)
    plan = engine.plan
    residual = tuple(int(v) for v in t)
    counts = []
    log_q = 0.0
    for i in range(system.num_cells):
        iv = engine.interval(i, residual)
        if iv.empty:
            return SampledTable(None, log_q, False, i)
        l, u = iv.int_lower, iv.int_upper
        x = step_draw(proposal, l, u, rng)
        log_q += step_log_prob(proposal, l, u, x)
        counts.append(x)
        residual = plan.advance(residual, i, x)
    valid = not any(residual)
    return SampledTable(TableVector(counts, tuple(int(v) for v in t)) if valid else None, log_q, valid)


def replay_log_q(system: ConstraintSystem, t, table, proposal, engine: BoundEngine | str) -> float | None:
    """Proposal log-density of ``table`` recomputed step by step, ``None`` if unreachable."""
    proposal = ProposalKind.parse(proposal)
    if isinstance(engine, str):
        engine = make_engine(system, engine)
    counts = table.counts if isinstance(table, TableVector) else tuple(table)
    residual = tuple(int(v) for v in t)
    log_q = 0.0
    for i, x in enumerate(counts):
        iv = engine.interval(i, residual)
        if iv.empty or not iv.int_lower <= x <= iv.int_upper:
            return None
        log_q += step_log_prob(proposal, iv.int_lower, iv.int_upper, x)
        residual = engine.plan.advance(residual, i, x)
    return log_q


@dataclass
class SISRun:
    samples: list[SampledTable]
    seed: int | None
    config: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def good_fraction(self) -> float:
        return sum(s.valid for s in self.samples) / self.n if self.samples else 0.0

    def log_q(self) -> np.ndarray:
        return np.array([s.log_q for s in self.samples], dtype=float)

    def valid_mask(self) -> np.ndarray:
        return np.array([s.valid for s in self.samples], dtype=bool)


def _sample_chunk(args):
    system, t, proposal, engine_name, engine_kw, seeds = args
    engine = make_engine(system, engine_name, **engine_kw)
    out = []
    for ss in seeds:
        out.append(sis_sample_one(system, t, proposal, engine, np.random.default_rng(ss)))
    return out, engine.stats()


def run_sis(
    system: ConstraintSystem,
    t: Sequence[int],
    n_samples: int,
    proposal="uniform",
    engine: str = "lp",
    seed: int | None = 0,
    jobs: int = 1,
    engine_kw: dict | None = None,
) -> SISRun:
    """Draw ``n_samples`` tables; sample ``k`` uses the ``k``-th spawned seed stream,
    so the run does not depend on ``jobs``."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    proposal = ProposalKind.parse(proposal)
    engine_kw = dict(engine_kw or {})
    t = tuple(int(v) for v in t)
    streams = np.random.SeedSequence(seed).spawn(n_samples)
    jobs = max(1, min(int(jobs), n_samples))
    if jobs == 1:
        samples, stats = _sample_chunk((system, t, proposal, engine, engine_kw, streams))
        stats = [stats]
    else:
        chunks = [list(c) for c in np.array_split(np.arange(n_samples), jobs)]
        tasks = [(system, t, proposal, engine, engine_kw, [streams[k] for k in c]) for c in chunks]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sample_chunk, tasks))
        samples = [s for part, _ in results for s in part]
        stats = [st for _, st in results]
    config = {
        "proposal": proposal.value,
        "engine": engine,
        "samples": n_samples,
        "margin": list(t),
        "engine_calls": sum(s["calls"] for s in stats),
        "engine_cache_hits": sum(s["cache_hits"] for s in stats),
    }
    run = SISRun(samples, seed, config)
    for s in run.samples:
        if s.valid and compute_margin(system, s.table) != t:
            raise AssertionError("a valid sample violates A n = t")
    return run


# ---------------------------------------------------------------------------
# Estimators


@dataclass(frozen=True)
class EstimateReport:
    value: float
    standard_error: float
    cv_squared: float
    ess: float
    good_fraction: float
    n_samples: int
    all_invalid: bool = False


def _log_weights(run: SISRun, target: TargetDistribution | None) -> np.ndarray:
    """``log(p/q)`` per sample, ``-inf`` for invalid samples."""
    lw = np.full(run.n, -np.inf)
    for k, s in enumerate(run.samples):
        if s.valid:
            lp = 0.0 if target is None else target_log_weight(target, s.table)
            lw[k] = lp - s.log_q
    return lw


def _logsumexp(x: np.ndarray) -> float:
    if x.size == 0 or not np.isfinite(x).any():
        return -np.inf
    m = np.max(x[np.isfinite(x)])
    return float(m + np.log(np.sum(np.exp(x - m))))


def _batches(n: int, batches: int) -> list[np.ndarray]:
    b = max(1, min(batches, n))
    return np.array_split(np.arange(n), b)


def _batch_se(values: list[float]) -> float:
    vals = [v for v in values if np.isfinite(v)]
    if len(vals) < 2:
        return float("nan")
    return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


def _cv2_from_log(lw: np.ndarray) -> float:
    if np.isfinite(lw).sum() < 2:
        raise ValueError("cv² needs at least two valid samples")
    m = np.max(lw[np.isfinite(lw)])
    w = np.exp(lw - m)
    mean = w.mean()
    return float(w.var() / mean**2)


def cv_squared(run: SISRun, target: TargetDistribution | None = None) -> float:
    """Squared coefficient of variation of ``w = p/q`` (population variance),
    with invalid samples entering as zero weights."""
    return _cv2_from_log(_log_weights(run, target))


def effective_sample_size(run: SISRun, target: TargetDistribution | None = None) -> float:
    return run.n / (1.0 + cv_squared(run, target))


def _diagnostics(run, lw):
    try:
        cv2 = _cv2_from_log(lw)
        ess = run.n / (1.0 + cv2)
    except ValueError:
        cv2, ess = float("nan"), float("nan")
    return cv2, ess


def estimate_count(run: SISRun, batches: int = DEFAULT_BATCHES) -> EstimateReport:
    """``(1/N) sum 1{valid}/q``; standard error from equal batches."""
    if run.n == 0:
        raise ValueError("empty run")
    lw = _log_weights(run, None)
    if not np.isfinite(lw).any():
        return EstimateReport(0.0, float("nan"), float("nan"), float("nan"), 0.0, run.n, all_invalid=True)
    value = math.exp(_logsumexp(lw) - math.log(run.n))
    per_batch = []
    for idx in _batches(run.n, batches):
        lse = _logsumexp(lw[idx])
        per_batch.append(math.exp(lse - math.log(len(idx))) if np.isfinite(lse) else 0.0)
    cv2, ess = _diagnostics(run, lw)
    return EstimateReport(value, _batch_se(per_batch), cv2, ess, run.good_fraction, run.n)


def estimate_mu(
    run: SISRun,
    target: TargetDistribution,
    statistic: Callable[[Sequence[int]], float] | None = None,
    observed=None,
    batches: int = DEFAULT_BATCHES,
) -> EstimateReport:
    """Self-normalized ``sum f w / sum w`` over valid samples, ``w = p/q``.

    Without ``statistic`` the exact-test indicator for ``observed`` is used.
    """
    if run.n == 0:
        raise ValueError("empty run")
    if statistic is None:
        if observed is None:
            raise ValueError("need a statistic or an observed table")
        statistic = exact_test_statistic(target, observed)
    lw = _log_weights(run, target)
    if not np.isfinite(lw).any():
        raise ZeroDivisionError("no valid samples: the ratio estimate is undefined")
    fvals = np.array([float(statistic(s.table.counts)) if s.valid else 0.0 for s in run.samples])

    def ratio(idx):
        sub = lw[idx]
        ok = np.isfinite(sub)
        if not ok.any():
            return float("nan")
        m = np.max(sub[ok])
        w = np.where(ok, np.exp(np.where(ok, sub, m) - m), 0.0)
        return float(np.dot(w, fvals[idx]) / w.sum())

    value = ratio(np.arange(run.n))
    per_batch = [ratio(idx) for idx in _batches(run.n, batches)]
    cv2, ess = _diagnostics(run, lw)
    return EstimateReport(value, _batch_se(per_batch), cv2, ess, run.good_fraction, run.n)


def exact_mu(
    tables: Sequence,
    target: TargetDistribution,
    statistic: Callable[[Sequence[int]], float] | None = None,
    observed=None,
) -> Fraction | float:
    """``E_p f`` over an enumerated fiber; exact for the built-in targets."""
    if statistic is None:
        statistic = exact_test_statistic(target, observed)
    counts = [t.counts if isinstance(t, TableVector) else tuple(t) for t in tables]
    if not counts:
        raise ValueError("empty fiber")
    weights = [target.exact_weight(c) for c in counts]
    if all(w is not None for w in weights):
        total = sum(weights, Fraction(0))
        return sum((w * Fraction(statistic(c)) for w, c in zip(weights, counts)), Fraction(0)) / total
    lw = np.array([target_log_weight(target, c) for c in counts])
    w = np.exp(lw - lw.max())
    return float(np.dot(w, [statistic(c) for c in counts]) / w.sum())
