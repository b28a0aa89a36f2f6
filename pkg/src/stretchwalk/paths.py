"""End-value-conditioned walk trajectories and sliding-slope analysis.

A conditioned walk is built from a conditioned increment multiset (tilted
acceptance sampling for the exceedance case, fixed-sum Gibbs for the
boundary case) followed by a uniformly random permutation, which is the
correct ordering because the conditional law is exchangeable.  Slope
scans then look for windows whose average climb clears a threshold.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .density import PerturbedDensity
from .errors import BadWindow, BudgetExceeded, DomainError
from .ratefn import model_mean
from .sampler import (
    LocalizationEstimate,
    gibbs_fixed_sum,
    tilt_for_mean,
    tilted_table,
)
from .seeding import derive_seed

logger = logging.getLogger(__name__)

_ACCEPT_BATCH = 64


@dataclass(frozen=True)
class EndValueAtLeast:
    total: float


@dataclass(frozen=True)
class EndValueEquals:
    total: float

    rel_tol = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A walk with its increments, partial sums, and conditioning."""

    increments: np.ndarray
    partial_sums: np.ndarray
    conditioning: EndValueAtLeast | EndValueEquals | None
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "increments", np.asarray(self.increments, dtype=float))
        object.__setattr__(self, "partial_sums", np.asarray(self.partial_sums, dtype=float))
        if self.increments.size != self.partial_sums.size or self.increments.size == 0:
            raise DomainError("increments and partial sums must align and be nonempty")
        end = float(self.partial_sums[-1])
        if isinstance(self.conditioning, EndValueAtLeast):
            if end < self.conditioning.total:
                raise DomainError("end value fell below the exceedance target")
        elif isinstance(self.conditioning, EndValueEquals):
            if abs(end - self.conditioning.total) > EndValueEquals.rel_tol * self.conditioning.total:
                raise DomainError("end value drifted from the fixed target")

    @property
    def n(self) -> int:
        return self.increments.size


def simulate_conditioned_path(model: PerturbedDensity, n: int, a: float,
                              conditioning, seed: int,
                              retry_budget: int = 4096,
                              fallback: bool = True) -> Trajectory:
    """Draw one conditioned trajectory; deterministic for a given seed.

    Exceedance conditioning uses acceptance sampling from the law tilted
    to mean a, so a draw is accepted roughly every second try.  If the
    budget runs out the sampler either falls back to a fixed-sum draw at
    the boundary (recording a note) or raises BudgetExceeded.
    """
    if n < 2:
        raise DomainError("a walk needs at least 2 increments")
    if a <= model_mean(model):
        raise DomainError("conditioning level must exceed the mean")
    rng = np.random.default_rng(seed)
    note = ""
    if isinstance(conditioning, EndValueEquals):
        state = gibbs_fixed_sum(model, n, conditioning.total, sweeps=1,
                                seed=derive_seed(seed, 0))
        increments = state[-1].values
    elif isinstance(conditioning, EndValueAtLeast):
        table = tilted_table(model, tilt_for_mean(model, a))
        target = conditioning.total
        increments = None
        for _ in range(max(1, retry_budget // _ACCEPT_BATCH)):
            batch = table.ppf(rng.random((_ACCEPT_BATCH, n)))
            hits = np.flatnonzero(batch.sum(axis=1) > target)
            if hits.size:
                increments = batch[hits[0]]
                break
        if increments is None:
            if not fallback:
                raise BudgetExceeded(
                    f"no acceptance in {retry_budget} tilted draws for end value {target:g}"
                )
            note = "acceptance budget exhausted; fixed-sum boundary draw used"
            logger.warning(note)
            state = gibbs_fixed_sum(model, n, target, sweeps=1,
                                    seed=derive_seed(seed, 1))
            increments = state[-1].values
            conditioning = EndValueEquals(target)
    else:
        raise DomainError("conditioning must be EndValueAtLeast or EndValueEquals")
    increments = rng.permutation(increments)
    return Trajectory(
        increments=increments,
        partial_sums=np.cumsum(increments),
        conditioning=conditioning,
        note=note,
    )


def simulate_free_path(model: PerturbedDensity, n: int, seed: int) -> Trajectory:
    """Unconditioned i.i.d. walk, the baseline for conditioned comparisons."""
    increments = model.sample(n, seed)
    return Trajectory(
        increments=increments,
        partial_sums=np.cumsum(increments),
        conditioning=None,
    )


def sliding_slopes(traj: Trajectory, k: int) -> np.ndarray:
    """All window-average climbs (S[j+k] - S[j]) / k for j = 0..n-k.

    k may equal n, in which case the single slope is the overall mean.
    """
    n = traj.n
    if not 1 <= k <= n:
        raise BadWindow(f"window length {k} outside 1..{n}")
    prefix = np.concatenate([[0.0], traj.partial_sums])
    return (prefix[k:] - prefix[:-k]) / k


@dataclass(frozen=True, eq=False)
class SegmentReport:
    k: int
    alpha: float
    slopes: np.ndarray
    argmax_j: int
    max_slope: float
    a_k_event: bool


def detect_segments(traj: Trajectory, k: int, alpha: float) -> SegmentReport:
    """Scan all sliding windows; ties in the argmax break to the smallest j."""
    slopes = sliding_slopes(traj, k)
    argmax_j = int(np.argmax(slopes))
    max_slope = float(slopes[argmax_j])
    return SegmentReport(
        k=k,
        alpha=alpha,
        slopes=slopes,
        argmax_j=argmax_j,
        max_slope=max_slope,
        a_k_event=max_slope > alpha,
    )


def estimate_p_ak(model: PerturbedDensity, n: int, a: float, k: int, alpha: float,
                  replications: int, seed: int,
                  conditioned: bool = True) -> LocalizationEstimate:
    """Frequency of a window clearing alpha, over independent paths.

    Replication r uses the derived seed for index r, so raising the
    replication count extends the run without changing earlier paths.
    The unconditioned variant serves as the comparison baseline.
    """
    if replications < 1:
        raise DomainError("need at least one replication")
    hits = 0
    for r in range(replications):
        path_seed = derive_seed(seed, r)
        if conditioned:
            traj = simulate_conditioned_path(
                model, n, a, EndValueAtLeast(n * a), seed=path_seed
            )
        else:
            traj = simulate_free_path(model, n, seed=path_seed)
        if detect_segments(traj, k, alpha).a_k_event:
            hits += 1
    p = hits / replications
    se = math.sqrt(p * (1.0 - p) / replications)
    return LocalizationEstimate(
        p_hat=p,
        std_err=se,
        n_eff=float(replications),
        replications=replications,
    )


# -- exports -----------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["j", "increment", "partial_sum"])
    for j, (inc, ps) in enumerate(zip(traj.increments, traj.partial_sums), start=1):
        writer.writerow([j, f"{inc:.17g}", f"{ps:.17g}"])


def write_slopes_csv(slopes: np.ndarray, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["j", "delta"])
    for j, d in enumerate(slopes):
        writer.writerow([j, f"{d:.17g}"])


def segment_report_dict(report: SegmentReport) -> dict:
    return {
        "k": report.k,
        "alpha": report.alpha,
        "argmax_j": report.argmax_j,
        "max_slope": report.max_slope,
        "a_k_event": report.a_k_event,
        "slopes": [float(s) for s in report.slopes],
    }
