"""Gaussian Bayesian networks over motion primitives.

A network is an ordered list of nodes, each a Gaussian over one primitive
magnitude (a driving distance in meters or a turning angle in radians),
conditionally dependent on earlier nodes through linear coefficients: node
i given its parents is N(mean_i + sum_j b_ij (x_j - mean_j), variance_i).
The parking network is a pure chain (each node depends only on its
predecessor), for which the joint precision matrix is tridiagonal and the
per-node parameters can be read back off it in closed form.

Parameter learning is the conjugate normal-Wishart update over recorded
maneuver traces: the posterior is tracked as (v, mu, beta) where v counts
pseudo-observations, mu is the mean estimate and beta the scatter matrix;
updates over trace batches compose exactly, so learning can be iterated as
new traces arrive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .gauss import GaussianParams, sample
from .rng import RngStream


class MotionType(Enum):
    DRIVE = "drive"
    TURN = "turn"


class MotionDirection(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class ModelFormatError(ValueError):
    """Malformed model or trace file."""


class NonChainError(ValueError):
    """A chain-only operation was applied to a non-chain network."""


class ImproperPosteriorError(ValueError):
    """Too little data for a proper posterior covariance."""

    def __init__(self, message: str, extra_traces_needed: int):
        super().__init__(message)
        self.extra_traces_needed = extra_traces_needed


@dataclass(frozen=True)
class GbnNode:
    """One network node; `parents` maps earlier node indices (1-based) to
    their dependence coefficients."""

    index: int
    label: str
    motion_type: MotionType
    motion_direction: MotionDirection
    mean: float
    variance: float
    parents: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.variance <= 0.0:
            raise ValueError(f"node {self.label!r}: variance must be > 0")
        for pi, _ in self.parents:
            if not 1 <= pi < self.index:
                raise ValueError(
                    f"node {self.label!r}: parent {pi} is not topologically earlier"
                )


@dataclass(frozen=True)
class Gbn:
    nodes: tuple[GbnNode, ...]

    def __post_init__(self):
        labels = set()
        for pos, node in enumerate(self.nodes, start=1):
            if node.index != pos:
                raise ValueError(f"node {node.label!r}: index {node.index} != position {pos}")
            if node.label in labels:
                raise ValueError(f"duplicate node label {node.label!r}")
            labels.add(node.label)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def is_chain(self) -> bool:
        for node in self.nodes:
            if node.index == 1:
                if node.parents != ():
                    return False
            elif len(node.parents) != 1 or node.parents[0][0] != node.index - 1:
                return False
        return True

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(node.label for node in self.nodes)

    def means(self) -> np.ndarray:
        return np.array([node.mean for node in self.nodes])

    def variances(self) -> np.ndarray:
        return np.array([node.variance for node in self.nodes])

    def chain_coeffs(self) -> np.ndarray:
        """b_{i+1,i} for i = 1..n-1; chain networks only."""
        if not self.is_chain():
            raise NonChainError("not a chain network")
        return np.array([node.parents[0][1] for node in self.nodes[1:]])


def chain(
    means: Sequence[float],
    variances: Sequence[float],
    coeffs: Sequence[float],
    labels: Optional[Sequence[str]] = None,
    motions: Optional[Sequence[tuple[MotionType, MotionDirection]]] = None,
) -> Gbn:
    """Build a chain network from per-node parameters.

    `coeffs` has length n-1; entry i-1 is the coefficient b_{i+1,i} tying
    node i+1 to node i.  Labels default to x1..xn, motions to forward
    drives.
    """
    n = len(means)
    if len(variances) != n or len(coeffs) != n - 1:
        raise ValueError("parameter lengths do not agree")
    if labels is None:
        labels = [f"x{i}" for i in range(1, n + 1)]
    if motions is None:
        motions = [(MotionType.DRIVE, MotionDirection.FORWARD)] * n
    nodes = []
    for i in range(n):
        parents = () if i == 0 else ((i, float(coeffs[i - 1])),)
        nodes.append(
            GbnNode(
                index=i + 1,
                label=str(labels[i]),
                motion_type=motions[i][0],
                motion_direction=motions[i][1],
                mean=float(means[i]),
                variance=float(variances[i]),
                parents=parents,
            )
        )
    return Gbn(tuple(nodes))


@dataclass(frozen=True)
class Mgd:
    """Multivariate Gaussian as mean vector and precision matrix T."""

    mean: np.ndarray
    precision: np.ndarray

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.precision)

    @property
    def n(self) -> int:
        return len(self.mean)


def precision_recursive(g: Gbn) -> Mgd:
    """Joint distribution of the network, by growing the precision matrix
    one node at a time.

    Appending node i+1 with parent-coefficient vector b and variance s2
    maps T_i to [[T_i + b b^T / s2, -b / s2], [-b^T / s2, 1 / s2]]; the
    base case is the scalar 1 / variance_1.  Works for any topologically
    ordered parent structure, not just chains.
    """
    T = np.array([[1.0 / g.nodes[0].variance]])
    for node in g.nodes[1:]:
        k = node.index - 1
        b = np.zeros(k)
        for pi, coeff in node.parents:
            b[pi - 1] = coeff
        s2 = node.variance
        grown = np.zeros((k + 1, k + 1))
        grown[:k, :k] = T + np.outer(b, b) / s2
        grown[:k, k] = -b / s2
        grown[k, :k] = -b / s2
        grown[k, k] = 1.0 / s2
        T = grown
    return Mgd(g.means(), T)


def precision_chain(g: Gbn) -> Mgd:
    """Tridiagonal closed form of the chain precision matrix:
    T(i,i-1) = -b_i,i-1 / s2_i,  T(i,i) = 1/s2_i + b_i+1,i^2 / s2_i+1,
    T(i,i+1) = -b_i+1,i / s2_i+1, boundary terms dropped."""
    if not g.is_chain():
        raise NonChainError("closed-form precision needs a chain network")
    n = g.n
    s2 = g.variances()
    b = g.chain_coeffs()
    T = np.zeros((n, n))
    for i in range(n):
        T[i, i] = 1.0 / s2[i]
        if i + 1 < n:
            T[i, i] = 1.0 / s2[i] + (b[i] * b[i]) / s2[i + 1]
            T[i, i + 1] = -b[i] / s2[i + 1]
            T[i + 1, i] = -b[i] / s2[i + 1]
    return Mgd(g.means(), T)


# --- Learning ----------------------------------------------------------

_DEFAULT_PRIOR_SCATTER = 1e-9  # near-vacuous SPD prior scatter


@dataclass(frozen=True)
class LearningState:
    """Conjugate posterior state: pseudo-count v, mean mu, scatter beta."""

    v: float
    mu: np.ndarray
    beta: np.ndarray

    @property
    def alpha(self) -> float:
        return self.v - 1.0

    @property
    def n(self) -> int:
        return len(self.mu)

    def _covariance_factor(self) -> float:
        dof = self.alpha - self.n + 1.0
        if dof <= 0.0:
            needed = int(math.floor(self.n - self.alpha)) + 1
            raise ImproperPosteriorError(
                f"improper posterior covariance (alpha - n + 1 = {dof:g} <= 0); "
                f"need at least {needed} more trace(s)",
                extra_traces_needed=needed,
            )
        return (self.v + 1.0) / (self.v * dof)

    def posterior_covariance(self) -> np.ndarray:
        return self._covariance_factor() * self.beta

    def to_mgd(self) -> Mgd:
        return Mgd(self.mu.copy(), np.linalg.inv(self.posterior_covariance()))


def initial_state(first_trace: Sequence[float]) -> LearningState:
    """Weak default prior: v = n + 2 pseudo-observations centered on the
    first recorded trace, with a near-zero SPD scatter so the data dominate
    the covariance from the first batch on."""
    mu = np.asarray(first_trace, dtype=float)
    n = len(mu)
    return LearningState(
        v=float(n + 2), mu=mu, beta=_DEFAULT_PRIOR_SCATTER * np.eye(n)
    )


def state_from_model(g: Gbn, v: Optional[float] = None) -> LearningState:
    """Prior centered on an existing model: beta is scaled from the model's
    covariance so that the state round-trips the model's precision."""
    n = g.n
    if v is None:
        v = float(n + 2)
    if v < 1.0:
        raise ValueError("prior pseudo-count v must be >= 1")
    alpha = v - 1.0
    cov = precision_chain(g).covariance() if g.is_chain() else precision_recursive(g).covariance()
    beta = (v * (alpha - n + 1.0) / (v + 1.0)) * cov
    return LearningState(v=v, mu=g.means(), beta=beta)


def learn_update(state: LearningState, traces: Sequence[Sequence[float]]) -> LearningState:
    """Fold a batch of traces into the posterior.

    mu* = (v mu + M xbar) / (v + M), v* = v + M, and beta picks up the
    batch scatter about its own mean plus the prior/batch mean-shift term
    (v M / (v + M)) (xbar - mu)(xbar - mu)^T.  Updating in two batches is
    exactly equivalent to one combined batch.
    """
    M = len(traces)
    if M == 0:
        return state
    X = np.asarray(traces, dtype=float)
    if X.ndim != 2 or X.shape[1] != state.n:
        raise ValueError(
            f"traces have length {X.shape[-1] if X.ndim else '?'}, expected {state.n}"
        )
    v, mu, beta = state.v, state.mu, state.beta
    xbar = X.mean(axis=0)
    centered = X - xbar
    s = centered.T @ centered
    shift = xbar - mu
    beta_star = beta + s + (v * M / (v + M)) * np.outer(shift, shift)
    mu_star = (v * mu + M * xbar) / (v + M)
    new = LearningState(v=v + M, mu=mu_star, beta=beta_star)
    new._covariance_factor()  # fail fast if still improper
    return new


def extract(
    mgd: Mgd,
    template: Optional[Gbn] = None,
    partial_corr_tol: float = 0.5,
) -> Gbn:
    """Read chain parameters back off a (tridiagonal) precision matrix.

    Inverts the closed form: the last conditional variance is 1/T(n,n),
    then walking backwards b_{i+1,i} = -T(i,i+1) * s2_{i+1} and
    1/s2_i = T(i,i) - b^2_{i+1,i} / s2_{i+1}.  Entries beyond the first
    off-diagonal must be negligible; the partial-correlation gate
    `partial_corr_tol` is deliberately coarse so matrices learned from few
    traces pass (their off-tridiagonal entries are sampling noise of order
    1/sqrt(M)) while structurally non-chain inputs are rejected.  A
    template network supplies labels and motion kinds.
    """
    T = mgd.precision
    n = mgd.n
    for i in range(n):
        for j in range(i + 2, n):
            pc = abs(T[i, j]) / math.sqrt(T[i, i] * T[j, j])
            if pc > partial_corr_tol:
                raise NonChainError(
                    f"precision entry ({i + 1},{j + 1}) too large for a chain "
                    f"(partial correlation {pc:.3g})"
                )
    s2 = np.empty(n)
    b = np.empty(max(n - 1, 0))
    if T[n - 1, n - 1] <= 0.0:
        raise ValueError("non-positive precision diagonal")
    s2[n - 1] = 1.0 / T[n - 1, n - 1]
    for i in range(n - 2, -1, -1):
        b[i] = -T[i, i + 1] * s2[i + 1]
        inv_var = T[i, i] - (b[i] * b[i]) / s2[i + 1]
        if inv_var <= 0.0:
            raise ValueError(
                f"recovered variance for node {i + 1} is not positive; "
                "input is not a consistent chain precision"
            )
        s2[i] = 1.0 / inv_var
    labels = template.labels if template is not None else None
    motions = (
        [(nd.motion_type, nd.motion_direction) for nd in template.nodes]
        if template is not None
        else None
    )
    return chain(list(mgd.mean), list(s2), list(b), labels=labels, motions=motions)


# --- Sampling ----------------------------------------------------------


def sample_commands(
    g: Gbn, rng: RngStream, known: Optional[dict[int, float]] = None
) -> np.ndarray:
    """Ancestral sample of the full command vector.

    Each node draws from N(mean_i + sum_j b_ij (x_j - mean_j), variance_i).
    Entries of `known` (1-based node index -> value) are taken as given
    instead of sampled, so conditioning on already-executed magnitudes is
    the same ancestral pass with the history pinned.
    """
    x = np.empty(g.n)
    for node in g.nodes:
        i = node.index - 1
        if known is not None and node.index in known:
            x[i] = known[node.index]
            continue
        m = node.mean
        for pi, coeff in node.parents:
            m += coeff * (x[pi - 1] - g.nodes[pi - 1].mean)
        x[i] = sample(GaussianParams(m, node.variance), rng)
    return x


# --- File formats ------------------------------------------------------

MODEL_COLUMNS = (
    "motionType",
    "motionDirection",
    "mean",
    "variance",
    "dependenceCoefficient",
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_model(g: Gbn, path) -> None:
    """Model CSV, one row per node in order; the first row's dependence
    coefficient is written as 0 and carries no meaning (no parent)."""
    coeffs = [0.0] + list(g.chain_coeffs()) if g.n > 1 else [0.0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MODEL_COLUMNS)
        for node, coeff in zip(g.nodes, coeffs):
            writer.writerow(
                [
                    node.motion_type.value,
                    node.motion_direction.value,
                    _fmt(node.mean),
                    _fmt(node.variance),
                    _fmt(coeff),
                ]
            )


def _auto_labels(kinds: list[MotionType]) -> list[str]:
    labels = []
    counts = {MotionType.DRIVE: 0, MotionType.TURN: 0}
    for kind in kinds:
        counts[kind] += 1
        prefix = "l" if kind is MotionType.DRIVE else "alpha"
        labels.append(f"{prefix}{counts[kind]}")
    return labels


def load_model(path) -> Gbn:
    """Parse a model CSV into a chain network; labels are synthesized from
    the motion kinds (l1, alpha1, ...)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ModelFormatError(f"{path}: empty model file")
    header = [cell.strip() for cell in rows[0]]
    if header != list(MODEL_COLUMNS):
        raise ModelFormatError(f"{path}: bad header {rows[0]!r}")
    kinds: list[MotionType] = []
    dirs: list[MotionDirection] = []
    means: list[float] = []
    variances: list[float] = []
    coeffs: list[float] = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 5:
            raise ModelFormatError(f"{path}: row {rownum}: expected 5 columns, got {len(row)}")
        try:
            kind = MotionType(row[0].strip())
            direction = MotionDirection(row[1].strip())
            mean = float(row[2])
            variance = float(row[3])
            coeff = float(row[4])
        except ValueError as exc:
            raise ModelFormatError(f"{path}: row {rownum}: {exc}") from None
        if variance <= 0.0:
            raise ModelFormatError(f"{path}: row {rownum}: variance must be > 0")
        kinds.append(kind)
        dirs.append(direction)
        means.append(mean)
        variances.append(variance)
        coeffs.append(coeff)
    if not means:
        raise ModelFormatError(f"{path}: no node rows")
    return chain(
        means,
        variances,
        coeffs[1:],
        labels=_auto_labels(kinds),
        motions=list(zip(kinds, dirs)),
    )


def save_traces(path, labels: Sequence[str], traces: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trace_id", *labels])
        for i, trace in enumerate(traces):
            writer.writerow([i, *(_fmt(v) for v in trace)])


def load_traces(path) -> tuple[tuple[str, ...], list[np.ndarray]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ModelFormatError(f"{path}: empty trace file")
    header = [cell.strip() for cell in rows[0]]
    if not header or header[0] != "trace_id":
        raise ModelFormatError(f"{path}: bad header {rows[0]!r}")
    labels = tuple(header[1:])
    if not labels:
        raise ModelFormatError(f"{path}: header names no nodes")
    traces = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(labels) + 1:
            raise ModelFormatError(
                f"{path}: row {rownum}: expected {len(labels) + 1} columns, got {len(row)}"
            )
        try:
            traces.append(np.array([float(v) for v in row[1:]]))
        except ValueError as exc:
            raise ModelFormatError(f"{path}: row {rownum}: {exc}") from None
    if not traces:
        raise ModelFormatError(f"{path}: no trace rows")
    return labels, traces
