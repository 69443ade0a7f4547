"""Synthetic grouped designs and Monte-Carlo recovery / implication audits."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Optional

import numpy as np

from .engine import Mode, SolverOptions, interpolate, solve_mode
from .model import HomotopyPath, Partition, ProblemInstance, ValidationError
from .oracles import AssumptionError, check_assumptions, signed_support_window
from .preprocess import adaptive_scale


class Method(str, Enum):
    LASSO = "lasso"
    REPLASSO = "replasso"
    ADAPTIVE_LASSO = "adaptive+lasso"
    ADAPTIVE_REPLASSO = "adaptive+replasso"

    @property
    def adaptive(self) -> bool:
        return self.value.startswith("adaptive")

    @property
    def mode(self) -> Mode:
        return Mode.REPLASSO if self.value.endswith("replasso") else Mode.LASSO


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 150
    p: int = 50
    group_size: int = 2
    k: int = 25
    rho: float = 0.5
    sigma: float = 0.2
    beta_magnitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.p, self.group_size) < 1 or self.k < 0:
            raise ValidationError("n, p and group_size must be positive and k nonnegative")
        if self.group_size < 2:
            raise ValidationError("group_size must be at least 2")
        if self.p % self.group_size:
            raise ValidationError(f"p={self.p} is not divisible by group_size={self.group_size}")
        if self.k > self.p // self.group_size:
            raise ValidationError("k may not exceed the number of groups")
        if not 0 <= self.rho < 1:
            raise ValidationError("rho must lie in [0, 1)")
        if self.sigma < 0 or self.beta_magnitude <= 0:
            raise ValidationError("sigma must be >= 0 and beta_magnitude > 0")

    @property
    def partition(self) -> Partition:
        return Partition.contiguous(self.p, self.group_size)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def gen_synthetic(config: SyntheticConfig, rng: Optional[np.random.Generator] = None):
    """Draw ``(instance, partition)`` with unit-norm columns correlated within groups.

    Column ``j`` of group ``g`` is ``sqrt(rho) f_g + sqrt(1 - rho) e_j`` before
    normalisation. ``k`` randomly chosen groups each get one true variable
    of magnitude ``beta_magnitude`` and random sign. The noise is ``y - X beta_star``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    part = config.partition
    n, gsz = config.n, config.group_size
    X = np.empty((n, config.p))
    for g, members in enumerate(part.groups):
        factor = rng.standard_normal(n)
        own = rng.standard_normal((n, gsz))
        X[:, list(members)] = np.sqrt(config.rho) * factor[:, None] + np.sqrt(1 - config.rho) * own
    X /= np.linalg.norm(X, axis=0)
    beta = np.zeros(config.p)
    chosen = rng.choice(part.n_groups, size=config.k, replace=False)
    for g in chosen:
        j = part.groups[g][rng.integers(gsz)]
        beta[j] = config.beta_magnitude * rng.choice([-1.0, 1.0])
    w = config.sigma * rng.standard_normal(n)
    y = X @ beta + w
    return ProblemInstance(X, y, beta, config.sigma), part


@dataclass
class RecoveryCurve:
    method: str
    support_sizes: np.ndarray
    probabilities: np.ndarray
    trials: int
    failures: int = 0

    @property
    def se(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1 - p) / max(self.trials, 1))


def segment_signs(path: HomotopyPath) -> list:
    """Signed support on the interior of every segment, top to bottom."""
    out = []
    for hi, lo, b_hi, b_lo, _, _ in path.segments():
        out.append((hi, lo, np.sign(0.5 * (b_hi + b_lo)).astype(int)))
    return out


def subset_recovery(path: HomotopyPath, true_signs: np.ndarray, max_size: int,
                    criterion: str = "segment", grid: int = 200) -> np.ndarray:
    """Boolean per support size ``1..max_size``: did the path visit an exactly
    ``m``-sparse, sign-correct subset of the true signed support?"""
    if criterion == "segment":
        patterns = [sg for _, _, sg in segment_signs(path)]
    elif criterion == "grid":
        lams = np.geomspace(path.lambdas[0], max(path.lambdas[-1], 1e-6 * path.lambdas[0]), grid)
        patterns = [np.sign(interpolate(path, lam)).astype(int) for lam in lams]
    else:
        raise ValidationError(f"unknown success criterion {criterion!r}")
    hit = np.zeros(max_size, dtype=bool)
    for sg in patterns:
        nz = sg != 0
        m = int(nz.sum())
        if 1 <= m <= max_size and np.all(sg[nz] == true_signs[nz]):
            hit[m - 1] = True
    return hit


def run_method(method: Method, instance: ProblemInstance, partition: Partition, theta: float,
               options: Optional[SolverOptions] = None) -> HomotopyPath:
    method = Method(method)
    if method.adaptive:
        instance = adaptive_scale(instance).instance
    return solve_mode(instance, method.mode, partition, theta, options)


def _curve_trial(args):
    method, config, theta, seed, trial, criterion = args
    inst, part = gen_synthetic(config, trial_rng(seed, trial))
    try:
        path = run_method(method, inst, part, theta)
    except (np.linalg.LinAlgError, ValidationError):
        return None
    return subset_recovery(path, np.sign(inst.beta_star).astype(int), config.k, criterion)


def _workers(n_jobs: Optional[int]) -> int:
    if n_jobs is None:
        n_jobs = int(os.environ.get("REPH_THREADS", "1") or 1)
    return max(1, n_jobs)


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items, chunksize=8))


def recovery_curve(method, config: SyntheticConfig, theta_value: float, trials: int,
                   seed: int, n_jobs: Optional[int] = None, criterion: str = "segment") -> RecoveryCurve:
    """Empirical probability of visiting a sign-correct support subset of each size."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    method = Method(method)
    items = [(method, config, theta_value, seed, t, criterion) for t in range(trials)]
    results = _map(_curve_trial, items, _workers(n_jobs))
    ok = [r for r in results if r is not None]
    hits = np.sum(ok, axis=0) if ok else np.zeros(config.k)
    probs = hits / max(len(ok), 1)
    return RecoveryCurve(method.value, np.arange(1, config.k + 1), probs, len(ok),
                         failures=len(results) - len(ok))


def curves_to_csv(curves) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "support_size", "probability", "trials", "se"])
    for c in curves:
        for m, pr, se in zip(c.support_sizes, c.probabilities, c.se):
            writer.writerow([c.method, int(m), repr(float(pr)), c.trials, repr(float(se))])
    return buf.getvalue()


# --- implication audits -------------------------------------------------------

def first_outside(path: HomotopyPath, support: set) -> float:
    """Largest lambda at which a variable outside ``support`` enters (0 if none does)."""
    for ev in path.events:
        if ev.kind.value == "ADD" and ev.variable not in support:
            return ev.lam
    return 0.0


def support_stays_inside(path: HomotopyPath, support: set, lam_min: float) -> bool:
    """Whether every solution with ``lambda >= lam_min`` is supported inside ``support``."""
    bps = path.breakpoints
    for t in range(len(bps) - 1):
        if bps[t].lam > lam_min and not set(bps[t].active) <= support:
            return False
    return True


def signs_at(path: HomotopyPath, lam: float) -> np.ndarray:
    lam = min(max(lam, path.lambdas[-1]), path.lambdas[0])
    return np.sign(interpolate(path, lam)).astype(int)


@dataclass
class AuditReport:
    """Premise and violation counts of the lasso -> grouped-path implications.

    ``subset``: lasso support inside S for all levels above lambda_min.
    ``signed``: the same plus the exact true signs at lambda_min.
    ``nodrop_subset``: the subset statement for LARS vs its grouped variant.
    ``adaptive_subset``: the subset statement after adaptive scaling.
    """

    trials: int = 0
    failures: int = 0
    subset_premise: int = 0
    subset_violations: int = 0
    signed_premise: int = 0
    signed_violations: int = 0
    nodrop_subset_premise: int = 0
    nodrop_subset_violations: int = 0
    adaptive_subset_premise: int = 0
    adaptive_subset_violations: int = 0
    ordering_violations: int = 0

    def merge(self, other: "AuditReport") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    @property
    def total_violations(self) -> int:
        return (self.subset_violations + self.signed_violations + self.nodrop_subset_violations
                + self.adaptive_subset_violations + self.ordering_violations)

    def as_dict(self) -> dict:
        return asdict(self)


def _lambda_mins(base: HomotopyPath, k: int, extra=()) -> list:
    adds = base.add_events()
    lams = [adds[k].lam if len(adds) > k else base.lambdas[-1]]
    # every segment midpoint probes the implication along the whole path
    lams += [0.5 * (hi + lo) for hi, lo in zip(base.lambdas[:-1], base.lambdas[1:])]
    lams += list(extra)
    return lams


def _support_implications(base, rep, support, lams, report_prefix, rep_obj):
    premise = violations = 0
    for lam in lams:
        if support_stays_inside(base, support, lam):
            premise += 1
            if not support_stays_inside(rep, support, lam):
                violations += 1
    setattr(rep_obj, report_prefix + "_premise", getattr(rep_obj, report_prefix + "_premise") + premise)
    setattr(rep_obj, report_prefix + "_violations",
            getattr(rep_obj, report_prefix + "_violations") + violations)


def audit_instance(instance: ProblemInstance, partition: Partition, theta: float, k: int,
                   rng: Optional[np.random.Generator] = None) -> AuditReport:
    """Check the lasso->grouped-path implication statements on one instance.

    Support-subset implications are probed at the configured ``lambda_min``
    (lambda of the (k+1)-th entry on the base path) and at every base
    segment midpoint. The signed-support implication is also probed at a
    level drawn inside the analytic recovery window when one exists.
    ``ordering_violations`` counts instances where the grouped path lets an
    outside variable in strictly earlier than the base path does.
    """
    rep = AuditReport(trials=1)
    support = set(np.flatnonzero(instance.beta_star).tolist())
    true_signs = np.sign(instance.beta_star).astype(int)
    lasso = solve_mode(instance, Mode.LASSO)
    replasso = solve_mode(instance, Mode.REPLASSO, partition, theta)
    lars = solve_mode(instance, Mode.LARS)
    replars = solve_mode(instance, Mode.REPLARS, partition, theta)
    scaled = adaptive_scale(instance).instance
    a_lasso = solve_mode(scaled, Mode.LASSO)
    a_rep = solve_mode(scaled, Mode.REPLASSO, partition, theta)

    extra = []
    if rng is not None:
        try:
            win = signed_support_window(instance.X, instance.beta_star,
                                        instance.y - instance.X @ instance.beta_star)
            if win.nonempty:
                lo, hi = win.lambda_l * instance.n, min(win.lambda_u * instance.n, lasso.lambdas[0])
                if lo < hi:
                    extra.append(float(rng.uniform(lo, hi)))
        except AssumptionError:
            pass

    lams = _lambda_mins(lasso, k, extra)
    _support_implications(lasso, replasso, support, lams, "subset", rep)
    _support_implications(lars, replars, support, _lambda_mins(lars, k), "nodrop_subset", rep)
    _support_implications(a_lasso, a_rep, support, _lambda_mins(a_lasso, k), "adaptive_subset", rep)
    for lam in lams:
        if support_stays_inside(lasso, support, lam) and np.array_equal(signs_at(lasso, lam), true_signs):
            rep.signed_premise += 1
            if not (support_stays_inside(replasso, support, lam)
                    and np.array_equal(signs_at(replasso, lam), true_signs)):
                rep.signed_violations += 1
    tol = 1e-9 * lasso.lambdas[0]
    for base, grp in ((lasso, replasso), (lars, replars), (a_lasso, a_rep)):
        if first_outside(grp, support) > first_outside(base, support) + tol:
            rep.ordering_violations += 1
    return rep


def _audit_trial(args):
    config, theta, seed, trial = args
    rng = trial_rng(seed, trial)
    inst, part = gen_synthetic(config, rng)
    try:
        return audit_instance(inst, part, theta, config.k, rng)
    except (np.linalg.LinAlgError, ValidationError):
        return AuditReport(trials=1, failures=1)


def implication_audit(config: SyntheticConfig, theta_value: float, trials: int, seed: int,
                      n_jobs: Optional[int] = None) -> AuditReport:
    items = [(config, theta_value, seed, t) for t in range(trials)]
    total = AuditReport()
    for r in _map(_audit_trial, items, _workers(n_jobs)):
        total.merge(r)
    return total


def assumption_audit(config: SyntheticConfig, draws: int, seed: int) -> dict:
    """Fraction of generated instances satisfying each checkable assumption."""
    counts = {"a1": 0, "a3": 0, "a4": 0}
    for t in range(draws):
        inst, part = gen_synthetic(config, trial_rng(seed, t))
        r = check_assumptions(inst.X, inst.beta_star, part)
        counts["a1"] += r.a1_holds
        counts["a3"] += r.a3_holds
        counts["a4"] += r.a4_holds
    return {key: v / draws for key, v in counts.items()}


def gene_fixture(seed: int = 0, n: int = 400, genes: int = 5, size: int = 4, rho: float = 0.6):
    """Binary-outcome design with correlated SNP blocks, two causal SNPs in some genes.

    Returns ``(X, labels, partition)`` with standardised columns.
    """
    rng = np.random.default_rng(seed)
    part = Partition.contiguous(genes * size, size)
    X = np.empty((n, genes * size))
    for members in part.groups:
        f = rng.standard_normal(n)
        X[:, list(members)] = np.sqrt(rho) * f[:, None] + np.sqrt(1 - rho) * rng.standard_normal((n, size))
    X -= X.mean(axis=0)
    X /= X.std(axis=0)
    beta = np.zeros(genes * size)
    beta[[0, 1]] = 1.0
    beta[[4, 5]] = 0.9
    beta[8] = 0.8
    beta[12] = -0.8
    prob = 1.0 / (1.0 + np.exp(-X @ beta))
    labels = (rng.uniform(size=n) < prob).astype(float)
    return X, labels, part
