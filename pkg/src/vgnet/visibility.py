"""Directed natural visibility graphs for univariate time series.

A series of length n becomes a DAG on nodes 0..n-1: node a sees node b > a
iff the straight segment between (a, y_a) and (b, y_b) passes strictly above
every intermediate point, and every edge points forward in time.  Two
builders share the same edge-set contract: a quadratic running-max sweep and
a divide-and-conquer builder that is O(n log n) on typical inputs.  A cubic
brute-force checker serves as the test oracle.

Every visibility decision compares point-to-point slopes.  Slope comparisons
within floating-point rounding distance of a tie (decimal-quantized data is
full of near-collinear triples) are re-decided in exact rational arithmetic
on the float values, so all code paths agree on one well-defined edge set no
matter which point anchors their arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Below this range length the divide-and-conquer builder scans in plain
# Python; above it, vectorized slope sweeps win despite numpy call overhead.
_DC_NUMPY_CUTOFF = 64

_BRUTE_MAX_N = 2048

# A computed slope carries at most two roundings (subtraction, division),
# so two slopes whose float gap exceeds this relative margin are ordered
# the same way as their exact values; anything closer goes to the exact
# path.  The absolute floor keeps subnormal slopes honest.
_EPS = float(np.finfo(np.float64).eps)
_REL_MARGIN = 8.0 * _EPS
_ABS_MARGIN = 1e-300


def _margin(s1: float, s2: float) -> float:
    return _REL_MARGIN * (abs(s1) + abs(s2)) + _ABS_MARGIN


def _blocks_exact(y, a: int, c: int, b: int) -> bool:
    """Exact test of whether c blocks the pair (a, b).

    Floats are exact rationals p/q with power-of-two q, so cross-multiplying
    the slope inequality by the (positive) denominators decides
    slope(a, c) >= slope(a, b) in integer arithmetic with no rounding.
    """
    pa, qa = float(y[a]).as_integer_ratio()
    pc, qc = float(y[c]).as_integer_ratio()
    pb, qb = float(y[b]).as_integer_ratio()
    lhs = (pc * qa - pa * qc) * qb * (b - a)
    rhs = (pb * qa - pa * qb) * qc * (c - a)
    return lhs >= rhs


def _visible_exact(y, a: int, b: int) -> bool:
    return not any(_blocks_exact(y, a, c, b) for c in range(a + 1, b))


def _int_exact_mode(y: np.ndarray) -> bool:
    """True when float-equal slopes are guaranteed to be exact ties.

    For integer-valued series, distinct slopes are rationals at least
    1/n^2 apart, while slope rounding errors stay below ~5 eps |y|_max;
    with n^2 * |y|_max capped well under 1/(10 eps), distinct slopes can
    never round to the same float, so ties need no exact recheck.
    """
    n = y.size
    if n < 2:
        return True
    ymax = float(np.max(np.abs(y)))
    if not np.isfinite(ymax) or float(n) * n * max(1.0, ymax) > 1e13:
        return False
    return bool(np.all(y == np.floor(y)))


@dataclass(frozen=True, eq=False)
class VisGraph:
    """Immutable visibility graph in compressed (CSR-like) adjacency form.

    Successor and predecessor adjacency describe the same edge set; targets
    are sorted ascending within each node so serialization is canonical.
    """

    n: int
    out_offsets: np.ndarray  # int64, shape (n+1,)
    out_targets: np.ndarray  # int64, shape (num_edges,)
    in_offsets: np.ndarray
    in_targets: np.ndarray
    series_id: int = -1
    _agg_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_edges(self) -> int:
        return int(self.out_targets.size)

    def successors(self, u: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[u]:self.out_offsets[u + 1]]

    def predecessors(self, u: int) -> np.ndarray:
        return self.in_targets[self.in_offsets[u]:self.in_offsets[u + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_offsets)

    def edge_array(self) -> np.ndarray:
        """All edges as an (E, 2) array, sorted lexicographically."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees())
        return np.column_stack([src, self.out_targets])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edge_array()}

    def neighbor_csr(self, direction: str) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency used for message aggregation, cached per direction.

        ``forward`` aggregates from predecessors (earlier points),
        ``reverse`` from successors, ``both`` from their union.  The two
        lists are disjoint (edges always point forward in time).
        """
        if direction in self._agg_cache:
            return self._agg_cache[direction]
        if direction == "forward":
            csr = (self.in_offsets, self.in_targets)
        elif direction == "reverse":
            csr = (self.out_offsets, self.out_targets)
        elif direction == "both":
            nodes = np.concatenate([
                np.repeat(np.arange(self.n, dtype=np.int64), self.in_degrees()),
                np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees()),
            ])
            targets = np.concatenate([self.in_targets, self.out_targets])
            order = np.lexsort((targets, nodes))
            offsets = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(nodes, minlength=self.n), out=offsets[1:])
            csr = (offsets, targets[order])
        else:
            raise ValueError(f"unknown direction {direction!r}")
        self._agg_cache[direction] = csr
        return csr


def visible(values, a: int, b: int) -> bool:
    """Strict visibility test between indices a < b (unit time spacing).

    True iff every intermediate point lies strictly below the segment from
    (a, y_a) to (b, y_b); collinear points block.  Adjacent indices are
    always visible.  Decided by comparing the slope to each intermediate
    against the slope to b, with near-tie comparisons settled exactly.
    """
    y = np.asarray(values, dtype=np.float64)
    n = y.size
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"indices ({a}, {b}) out of range for length {n}")
    if a >= b:
        raise IndexError(f"need a < b, got a={a}, b={b}")
    if not np.isfinite(y[a:b + 1]).all():
        raise ValueError("series contains non-finite values")
    with np.errstate(all="ignore"):
        slope_ab = float((y[b] - y[a]) / (b - a))
        for c in range(a + 1, b):
            s = float((y[c] - y[a]) / (c - a))
            d = slope_ab - s
            u = _margin(slope_ab, s)
            if d > u:
                continue  # certainly below the sightline
            if d < -u or (s == 0.0 and slope_ab == 0.0) \
                    or _blocks_exact(y, a, c, b):
                return False
    return True


def _csr_pair(n: int, src: np.ndarray, dst: np.ndarray):
    """Build sorted out- and in-adjacency CSR from unordered edge arrays."""
    order = np.lexsort((dst, src))
    src_o, dst_o = src[order], dst[order]
    out_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src_o, minlength=n), out=out_offsets[1:])
    order_in = np.lexsort((src_o, dst_o))
    in_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst_o, minlength=n), out=in_offsets[1:])
    return out_offsets, dst_o, in_offsets, src_o[order_in]


def _finish(n: int, srcs: list, dsts: list, series_id: int) -> VisGraph:
    src = np.asarray(srcs, dtype=np.int64)
    dst = np.asarray(dsts, dtype=np.int64)
    oo, ot, io_, it = _csr_pair(n, src, dst)
    return VisGraph(n=n, out_offsets=oo, out_targets=ot,
                    in_offsets=io_, in_targets=it, series_id=series_id)


def _check_series(values) -> np.ndarray:
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.size < 2:
        raise ValueError(f"series too short for a visibility graph (n={y.size})")
    if not np.isfinite(y).all():
        raise ValueError("series contains non-finite values")
    return y


def _filtered_visibility(slopes: np.ndarray,
                         int_exact: bool) -> tuple[np.ndarray, np.ndarray]:
    """Running-max visibility verdicts for one anchored slope vector.

    Returns (visible, uncertain): element k of ``slopes`` is the slope from
    the anchor to its (k+1)-th neighbor; ``uncertain`` marks comparisons
    inside the rounding margin that the caller must settle exactly.  Ties
    of equal floats resolve to "blocked" without a recheck when they are
    provably exact: always for zero slopes (fl(x - y) == 0 iff x == y) and
    for every slope in integer-exact mode.
    """
    m = slopes.size
    vis = np.empty(m, dtype=bool)
    vis[0] = True
    uncertain = np.zeros(m, dtype=bool)
    if m > 1:
        run = np.maximum.accumulate(slopes)[:-1]
        rest = slopes[1:]
        d = rest - run
        u = _REL_MARGIN * (np.abs(rest) + np.abs(run)) + _ABS_MARGIN
        np.greater(d, u, out=vis[1:])
        exact_tie = (rest == run) if int_exact else (rest == run) & (rest == 0.0)
        uncertain[1:] = ~(d > u) & ~(d < -u) & ~exact_tie
    return vis, uncertain


def build_nvg_sweep(values, series_id: int = -1) -> VisGraph:
    """Quadratic builder: per source, a rightward running-max slope scan.

    b is visible from a iff slope(a, b) strictly exceeds every slope(a, c)
    with a < c < b, so one prefix-maximum pass per source finds all edges.
    """
    y = _check_series(values)
    n = y.size
    int_exact = _int_exact_mode(y)
    srcs: list[int] = []
    dsts: list[int] = []
    with np.errstate(all="ignore"):
        for a in range(n - 1):
            slopes = (y[a + 1:] - y[a]) / np.arange(1, n - a, dtype=np.float64)
            vis, uncertain = _filtered_visibility(slopes, int_exact)
            for k in np.flatnonzero(uncertain):
                vis[k] = _visible_exact(y, a, a + 1 + int(k))
            js = np.flatnonzero(vis) + a + 1
            srcs.extend([a] * js.size)
            dsts.extend(js.tolist())
    return _finish(n, srcs, dsts, series_id)


def _pivot_sweeps_py(y, lo: int, hi: int, p: int, int_exact: bool,
                     srcs: list, dsts: list) -> None:
    yp = float(y[p])
    if p < hi:
        srcs.append(p)
        dsts.append(p + 1)
        max_slope = float(y[p + 1]) - yp
        for b in range(p + 2, hi + 1):
            slope = (float(y[b]) - yp) / (b - p)
            d = slope - max_slope
            u = _margin(slope, max_slope)
            if d > u:
                srcs.append(p)
                dsts.append(b)
            elif not d < -u:
                exact_tie = slope == max_slope and (int_exact or slope == 0.0)
                if not exact_tie and _visible_exact(y, p, b):
                    srcs.append(p)
                    dsts.append(b)
            if slope > max_slope:
                max_slope = slope
    if p > lo:
        srcs.append(p - 1)
        dsts.append(p)
        max_slope = float(y[p - 1]) - yp
        for b in range(p - 2, lo - 1, -1):
            slope = (float(y[b]) - yp) / (p - b)
            d = slope - max_slope
            u = _margin(slope, max_slope)
            if d > u:
                srcs.append(b)
                dsts.append(p)
            elif not d < -u:
                exact_tie = slope == max_slope and (int_exact or slope == 0.0)
                if not exact_tie and _visible_exact(y, b, p):
                    srcs.append(b)
                    dsts.append(p)
            if slope > max_slope:
                max_slope = slope


def _pivot_sweeps_np(y, lo: int, hi: int, p: int, int_exact: bool,
                     srcs: list, dsts: list) -> None:
    yp = y[p]
    if p < hi:
        right = y[p + 1:hi + 1]
        slopes = (right - yp) / np.arange(1, right.size + 1, dtype=np.float64)
        vis, uncertain = _filtered_visibility(slopes, int_exact)
        for k in np.flatnonzero(uncertain):
            vis[k] = _visible_exact(y, p, p + 1 + int(k))
        js = np.flatnonzero(vis) + p + 1
        srcs.extend([p] * js.size)
        dsts.extend(js.tolist())
    if p > lo:
        left = y[lo:p][::-1]
        slopes = (left - yp) / np.arange(1, left.size + 1, dtype=np.float64)
        vis, uncertain = _filtered_visibility(slopes, int_exact)
        for k in np.flatnonzero(uncertain):
            vis[k] = _visible_exact(y, p - 1 - int(k), p)
        js = p - 1 - np.flatnonzero(vis)
        srcs.extend(js.tolist())
        dsts.extend([p] * js.size)


def build_nvg_dc(values, series_id: int = -1) -> VisGraph:
    """Divide-and-conquer builder, same edge set as :func:`build_nvg_sweep`.

    On each range, the maximum value (leftmost on ties) is the pivot: no
    edge can cross it, because the segment between nodes on opposite sides
    never rises above max(y_a, y_b) <= y_pivot at the pivot's abscissa and
    so fails the strict criterion.  Two linear slope sweeps collect all
    pivot-incident edges and the two flanks recurse independently.  Average
    O(n log n); degenerate pivot placement (monotone series) costs O(n^2).
    """
    y = _check_series(values)
    n = y.size
    int_exact = _int_exact_mode(y)
    srcs: list[int] = []
    dsts: list[int] = []
    stack = [(0, n - 1)]  # inclusive index ranges
    with np.errstate(all="ignore"):
        while stack:
            lo, hi = stack.pop()
            if lo >= hi:
                continue
            span = hi - lo + 1
            if span <= _DC_NUMPY_CUTOFF:
                p = lo
                best = y[lo]
                for i in range(lo + 1, hi + 1):
                    if y[i] > best:
                        best = y[i]
                        p = i
                _pivot_sweeps_py(y, lo, hi, p, int_exact, srcs, dsts)
            else:
                p = lo + int(np.argmax(y[lo:hi + 1]))
                _pivot_sweeps_np(y, lo, hi, p, int_exact, srcs, dsts)
            stack.append((lo, p - 1))
            stack.append((p + 1, hi))
    return _finish(n, srcs, dsts, series_id)


def brute_oracle(values) -> set[tuple[int, int]]:
    """Ground-truth edge set by direct evaluation of the criterion per pair.

    Cubic; guarded to short series since it exists only to check builders.
    """
    y = _check_series(values)
    n = y.size
    if n > _BRUTE_MAX_N:
        raise ValueError(f"brute_oracle is cubic; refusing n={n} > {_BRUTE_MAX_N}")
    edges: set[tuple[int, int]] = set()
    with np.errstate(all="ignore"):
        for a in range(n - 1):
            slopes = ((y[a + 1:] - y[a]) / np.arange(1, n - a, dtype=np.float64)).tolist()
            edges.add((a, a + 1))
            for k in range(1, len(slopes)):
                s = slopes[k]
                m = max(slopes[:k])
                d = s - m
                u = _margin(s, m)
                if d > u or (not d < -u and not (s == 0.0 and m == 0.0)
                             and _visible_exact(y, a, a + 1 + k)):
                    edges.add((a, a + 1 + k))
    return edges


def degree_distribution(graph: VisGraph) -> dict[int, int]:
    """Histogram of total degree (in + out); counts sum to n."""
    total = graph.in_degrees() + graph.out_degrees()
    degs, counts = np.unique(total, return_counts=True)
    return {int(d): int(c) for d, c in zip(degs, counts)}


# ---------------------------------------------------------------------------
# Corpus text format: one block per graph, concatenable.
#   VG <n> <num_edges> <series_id> <label>
#   i j        (one per edge, i < j, lexicographic order)
# ---------------------------------------------------------------------------

def _graph_block(graph: VisGraph, label) -> str:
    head = f"VG {graph.n} {graph.num_edges} {graph.series_id} {label}\n"
    body = "".join(f"{i} {j}\n" for i, j in graph.edge_array())
    return head + body


def write_graphs(path, graphs_with_labels) -> None:
    """Write (VisGraph, label) pairs in the plain-text corpus format."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for graph, label in graphs_with_labels:
            fh.write(_graph_block(graph, label))


def dump_graphs(graphs_with_labels) -> str:
    return "".join(_graph_block(g, label) for g, label in graphs_with_labels)


def read_graphs(path) -> list[tuple[VisGraph, int]]:
    """Parse a corpus file back into (VisGraph, label) pairs (streaming)."""
    out: list[tuple[VisGraph, int]] = []
    with open(path, "r", encoding="ascii") as fh:
        lines = (ln for ln in (raw.strip() for raw in fh) if ln)
        lineno = 0
        for header in lines:
            lineno += 1
            head = header.split()
            if len(head) != 5 or head[0] != "VG":
                raise ValueError(f"malformed graph header at line {lineno}: {header!r}")
            n, num_edges, series_id, label = (int(x) for x in head[1:])
            src = np.empty(num_edges, dtype=np.int64)
            dst = np.empty(num_edges, dtype=np.int64)
            for k in range(num_edges):
                row = next(lines, None)
                lineno += 1
                if row is None:
                    raise ValueError(f"truncated edge list near line {lineno}")
                i_s, j_s = row.split()
                src[k], dst[k] = int(i_s), int(j_s)
            if num_edges and not np.all(src < dst):
                raise ValueError("corpus edge with i >= j")
            oo, ot, io_, it = _csr_pair(n, src, dst)
            out.append((VisGraph(n=n, out_offsets=oo, out_targets=ot,
                                 in_offsets=io_, in_targets=it,
                                 series_id=series_id), label))
    return out
