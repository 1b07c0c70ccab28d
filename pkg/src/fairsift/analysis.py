"""Metric-redundancy analysis.

The selection tactic implemented here: correlate metrics across repeated
cross-validation samples (Spearman), turn correlation into dissimilarity
``d = 1 - |rho|``, cluster with average linkage, cut the dendrogram at the
widest stable gap, then score each cluster for intra-cluster agreement and
fold-to-fold sensitivity so uninformative clusters can be pruned.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .harness import MetricSampleMatrix


# --------------------------------------------------------------------------
# Spearman rank correlation
# --------------------------------------------------------------------------

def rank_average(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float | None:
    """Spearman rho with pairwise deletion of undefined entries.

    Entries that are None or non-finite on either side are dropped pairwise;
    fewer than 3 surviving pairs, or a constant survivor vector, gives None.
    """
    pairs = [
        (float(a), float(b))
        for a, b in zip(x, y)
        if a is not None and b is not None
        and math.isfinite(a) and math.isfinite(b)
    ]
    if len(pairs) < 3:
        return None
    xa = np.array([p[0] for p in pairs])
    ya = np.array([p[1] for p in pairs])
    if xa.min() == xa.max() or ya.min() == ya.max():
        return None
    rx = rank_average(xa)
    ry = rank_average(ya)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        return None
    return float(dx @ dy) / denom


PER_CELL_AVERAGE = "per_cell_average"
POOLED = "pooled"


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Spearman matrix over metric ids; NaN marks undefined entries."""

    metric_ids: tuple[str, ...]
    values: np.ndarray
    cells: tuple[tuple[str, str], ...]  # (dataset, model) cells that fed it
    scope: str

    def __post_init__(self):
        self.values.setflags(write=False)

    def get(self, a: str, b: str) -> float | None:
        i = self.metric_ids.index(a)
        j = self.metric_ids.index(b)
        v = self.values[i, j]
        return None if np.isnan(v) else float(v)


def correlation_matrix(
    samples: MetricSampleMatrix, metric_ids, scope: str = PER_CELL_AVERAGE
) -> CorrelationMatrix:
    """Metric-to-metric Spearman over every (dataset, model) cell.

    ``per_cell_average`` correlates the fold samples within each cell, then
    averages the per-cell coefficients (undefined cells are skipped).
    ``pooled`` concatenates all cells first and correlates once.
    """
    if scope not in (PER_CELL_AVERAGE, POOLED):
        raise ValueError(f"unknown correlation scope {scope!r}")
    metric_ids = tuple(metric_ids)
    cells = tuple(
        (ds, model)
        for ds in samples.datasets()
        for model in samples.models()
    )
    if not cells:
        raise ValueError("no samples to correlate")
    series = {
        (ds, model, mid): samples.samples(ds, model, mid)
        for ds, model in cells
        for mid in metric_ids
    }

    k = len(metric_ids)
    out = np.full((k, k), np.nan)
    np.fill_diagonal(out, 1.0)
    for i in range(k):
        for j in range(i + 1, k):
            if scope == POOLED:
                xs, ys = [], []
                for ds, model in cells:
                    xs.extend(series[(ds, model, metric_ids[i])])
                    ys.extend(series[(ds, model, metric_ids[j])])
                rho = spearman(xs, ys)
            else:
                coeffs = [
                    r
                    for ds, model in cells
                    if (
                        r := spearman(
                            series[(ds, model, metric_ids[i])],
                            series[(ds, model, metric_ids[j])],
                        )
                    )
                    is not None
                ]
                rho = float(np.mean(coeffs)) if coeffs else None
            out[i, j] = out[j, i] = np.nan if rho is None else rho
    return CorrelationMatrix(metric_ids=metric_ids, values=out, cells=cells, scope=scope)


# --------------------------------------------------------------------------
# Dissimilarity and average-linkage clustering
# --------------------------------------------------------------------------

def dissimilarity(sim: float | None) -> float:
    """d = 1 - |sim|; an undefined similarity is maximally dissimilar (1)."""
    if sim is None or (isinstance(sim, float) and math.isnan(sim)):
        return 1.0
    if not -1.0 - 1e-9 <= sim <= 1.0 + 1e-9:
        raise ValueError(f"similarity must lie in [-1, 1], got {sim}")
    return max(0.0, 1.0 - abs(sim))


def dissimilarity_matrix(corr: CorrelationMatrix) -> np.ndarray:
    k = len(corr.metric_ids)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = 0.0 if i == j else dissimilarity(
                None if np.isnan(corr.values[i, j]) else float(corr.values[i, j])
            )
    return out


@dataclass(frozen=True)
class Merge:
    """One agglomeration step; node ids follow the usual convention that
    leaves are 0..n-1 and the merge created at step t gets id n+t."""

    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    @property
    def heights(self) -> tuple[float, ...]:
        return tuple(m.height for m in self.merges)


def agglomerate(dismat, labels) -> Dendrogram:
    """Average-linkage (UPGMA) clustering of a symmetric dissimilarity matrix.

    Cluster distances are updated with the size-weighted Lance-Williams rule,
    which keeps each inter-cluster distance equal to the mean pairwise
    dissimilarity between members.  Ties on the minimum distance are broken by
    the lexicographically smallest (node id, node id) pair, which makes the
    merge order deterministic.
    """
    d = np.array(dismat, dtype=float)
    labels = tuple(labels)
    n = d.shape[0]
    if d.shape != (n, n):
        raise ValueError("dissimilarity matrix must be square")
    if len(labels) != n:
        raise ValueError("labels must match matrix size")
    if n < 2:
        raise ValueError("need at least 2 items to cluster")
    if not np.allclose(d, d.T, atol=1e-12):
        raise ValueError("dissimilarity matrix must be symmetric")
    if np.any(np.diag(d) != 0):
        raise ValueError("dissimilarity matrix must have a zero diagonal")

    # active: node id -> (row index into the working matrix, cluster size)
    work = d.copy()
    node_of_row = list(range(n))
    sizes = {i: 1 for i in range(n)}
    active_rows = set(range(n))
    merges: list[Merge] = []

    for step in range(n - 1):
        best = None
        for ri in sorted(active_rows):
            for rj in sorted(active_rows):
                if rj <= ri:
                    continue
                a, b = node_of_row[ri], node_of_row[rj]
                pair = (min(a, b), max(a, b))
                key = (work[ri, rj], pair)
                if best is None or key < best[0]:
                    best = (key, ri, rj)
        (height, pair), ri, rj = best
        a, b = pair
        size_i = sizes[node_of_row[ri]]
        size_j = sizes[node_of_row[rj]]
        new_id = n + step
        new_size = size_i + size_j
        merges.append(Merge(left=a, right=b, height=float(height), size=new_size))

        # Lance-Williams average-linkage update, written into row ri; weights
        # follow the clusters living in the rows, not the node-id order.
        for rk in active_rows:
            if rk in (ri, rj):
                continue
            work[ri, rk] = work[rk, ri] = (
                size_i * work[ri, rk] + size_j * work[rj, rk]
            ) / new_size
        active_rows.remove(rj)
        node_of_row[ri] = new_id
        sizes[new_id] = new_size
    return Dendrogram(leaves=labels, merges=tuple(merges))


@dataclass(frozen=True)
class CutSelection:
    """Chosen cut height plus the stable interval it sits inside."""

    height: float
    gap_low: float
    gap_high: float


CUT_SENTINEL = 1.0  # maximum possible dissimilarity under d = 1 - |rho|


def select_cut(dendrogram: Dendrogram) -> CutSelection:
    """Cut at the midpoint of the widest gap between consecutive merge heights.

    Heights are sorted ascending and followed by a sentinel at 1.0, so a flat
    dendrogram cuts above everything (one cluster).  On ties the highest gap
    wins, which also prefers the sentinel gap.
    """
    if not dendrogram.merges:
        raise ValueError("dendrogram has no merges")
    heights = sorted(dendrogram.heights)
    levels = heights + [max(CUT_SENTINEL, heights[-1])]
    best = 0
    for i in range(len(levels) - 1):
        if levels[i + 1] - levels[i] >= levels[best + 1] - levels[best]:
            best = i
    return CutSelection(
        height=0.5 * (levels[best] + levels[best + 1]),
        gap_low=levels[best],
        gap_high=levels[best + 1],
    )


def extract_clusters(dendrogram: Dendrogram, cut: float) -> tuple[tuple[str, ...], ...]:
    """Partition of the leaves induced by merges strictly below the cut.

    Clusters are ordered by their smallest leaf index, members by leaf index,
    so the numbering is deterministic.
    """
    n = len(dendrogram.leaves)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # every internal node keeps a representative leaf so later merges can be
    # applied even when an earlier one fell above the cut
    node_root = {i: i for i in range(n)}
    for t, merge in enumerate(dendrogram.merges):
        la, lb = node_root[merge.left], node_root[merge.right]
        node_root[n + t] = la
        if merge.height < cut:
            ra, rb = find(la), find(lb)
            if ra != rb:
                parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    ordered = sorted(groups.values(), key=lambda g: min(g))
    return tuple(tuple(dendrogram.leaves[i] for i in sorted(g)) for g in ordered)


# --------------------------------------------------------------------------
# Agreement and disagreement summaries
# --------------------------------------------------------------------------

def agreement_percentage(labels) -> float:
    """Share of the majority label, in percent; an even split scores 50."""
    labels = list(labels)
    if not labels:
        raise ValueError("need at least one label")
    top = max(labels.count(v) for v in set(labels))
    return 100.0 * top / len(labels)


def unfair_percentage(labels) -> float:
    """Share of Unfair labels, in percent."""
    labels = list(labels)
    if not labels:
        raise ValueError("need at least one label")
    return 100.0 * sum(1 for v in labels if v == "Unfair") / len(labels)


# --------------------------------------------------------------------------
# Sensitivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityCell:
    dataset: str
    model: str
    metric_id: str
    median: float | None
    iqr: float | None
    flagged: bool


@dataclass(frozen=True)
class SensitivityReport:
    cells: tuple[SensitivityCell, ...]
    sigma: float
    threshold: float
    d: float

    def metric_insensitive(self, metric_id: str) -> bool:
        """A metric is insensitive iff a minority of its cells are flagged."""
        mine = [c for c in self.cells if c.metric_id == metric_id and c.iqr is not None]
        if not mine:
            return False
        flagged = sum(1 for c in mine if c.flagged)
        return 2 * flagged < len(mine)

    def cluster_insensitive(self, metric_ids) -> bool:
        """A cluster is insensitive iff a majority of its metrics are."""
        metric_ids = list(metric_ids)
        insensitive = sum(1 for m in metric_ids if self.metric_insensitive(m))
        return 2 * insensitive > len(metric_ids)


def sensitivity_table(
    samples: MetricSampleMatrix, d: float = 0.35, expected_samples: int = 25
) -> SensitivityReport:
    """Median and IQR per (dataset, model, metric), flagged when volatile.

    Quantiles use linear interpolation.  A cell is flagged iff its IQR exceeds
    ``d`` times the standard deviation of all IQR values in the run.
    """
    if d <= 0:
        raise ValueError("d must be positive")
    stats = []
    for ds in samples.datasets():
        for model in samples.models():
            for mid in samples.metric_ids():
                values = samples.defined_samples(ds, model, mid)
                if 0 < len(values) < expected_samples:
                    warnings.warn(
                        f"cell ({ds}, {model}, {mid}) has {len(values)} defined "
                        f"samples (expected {expected_samples}); statistics use "
                        f"the available ones"
                    )
                if len(values) == 0:
                    stats.append((ds, model, mid, None, None))
                    continue
                q1, q2, q3 = np.percentile(values, [25, 50, 75])
                stats.append((ds, model, mid, float(q2), float(q3 - q1)))

    iqrs = np.array([s[4] for s in stats if s[4] is not None], dtype=float)
    sigma = float(iqrs.std()) if len(iqrs) else 0.0
    threshold = d * sigma
    cells = tuple(
        SensitivityCell(
            dataset=ds,
            model=model,
            metric_id=mid,
            median=median,
            iqr=iqr,
            flagged=(iqr is not None and iqr > threshold),
        )
        for ds, model, mid, median, iqr in stats
    )
    return SensitivityReport(cells=cells, sigma=sigma, threshold=threshold, d=d)


# --------------------------------------------------------------------------
# Movement after mitigation
# --------------------------------------------------------------------------

TOWARD_IDEAL = "UF"
AWAY_FROM_IDEAL = "FU"
NO_CHANGE = "NC"


@dataclass(frozen=True)
class MovementResult:
    verdicts: dict[str, str]  # metric id -> UF / FU / NC
    excluded: tuple[str, ...]  # metric ids undefined on either side

    @property
    def counts(self) -> dict[str, int]:
        out = {TOWARD_IDEAL: 0, AWAY_FROM_IDEAL: 0, NO_CHANGE: 0}
        for verdict in self.verdicts.values():
            out[verdict] += 1
        return out


def movement_counts(
    baseline_medians: dict,
    mitigated_medians: dict,
    ideals: dict,
    epsilon: float = 0.001,
) -> MovementResult:
    """Classify each metric's move after mitigation.

    delta = |mitigated - ideal| - |baseline - ideal|; below -epsilon the
    metric moved toward its ideal (UF), above +epsilon it moved away (FU),
    otherwise it did not change (NC).
    """
    if set(baseline_medians) != set(mitigated_medians):
        raise ValueError("baseline and mitigated medians must cover the same metrics")
    verdicts: dict[str, str] = {}
    excluded: list[str] = []
    for mid in baseline_medians:
        base, mit = baseline_medians[mid], mitigated_medians[mid]
        if base is None or mit is None:
            excluded.append(mid)
            continue
        delta = abs(mit - ideals[mid]) - abs(base - ideals[mid])
        if delta < -epsilon:
            verdicts[mid] = TOWARD_IDEAL
        elif delta > epsilon:
            verdicts[mid] = AWAY_FROM_IDEAL
        else:
            verdicts[mid] = NO_CHANGE
    return MovementResult(verdicts=verdicts, excluded=tuple(sorted(excluded)))
