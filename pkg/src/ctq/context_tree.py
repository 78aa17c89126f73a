"""
Counted context trees with KT estimation, CTW weighting and CTM maximizing.

Contexts are tuples of past symbols ordered most-recent first, so the
context ``(2, 0)`` means "the previous symbol was 2 and the one before it
was 0".  A node at depth ``d`` is keyed by the length-``d`` prefix of such
a tuple; the root is ``()``.

All probabilities are kept as base-2 logarithms.  Counts are real-valued
so that ``decay_counts`` can shrink them; integer counts are the special
case.  Nodes are created lazily: an untouched subtree has weighted
probability 1, and its maximized probability depends only on its depth
(precomputed in ``ContextTree.empty_log_pm``).

A tree is single-writer: ``update`` and ``decay_counts`` mutate shared path
state and must not run concurrently with anything else on the same tree.
"""

from __future__ import annotations

import copy
import itertools
import math
from collections import deque

import numpy as np

__all__ = [
    "ContextTree", "Model", "kt_probability", "model_prior", "predict",
    "enumerate_models", "new_tree", "update", "ctw_log_prob",
    "ctm_log_prob", "ctm_prune", "decay_counts",
]

_LN2 = math.log(2.0)
_LGAMMA_HALF = math.lgamma(0.5)


def kt_probability(counts, m: int | None = None) -> float:
    """log2 of the Krichevsky-Trofimov block probability of a count vector.

    ``counts`` is a length-``m`` sequence or a ``{symbol: count}`` mapping
    (then ``m`` is required).  Real counts are handled through log-Gamma.
    """
    if isinstance(counts, dict):
        if m is None:
            raise ValueError("m is required for mapping counts")
        values = list(counts.values())
    else:
        values = [float(c) for c in counts]
        m = len(values) if m is None else m
    if any(c < 0 for c in values):
        raise ValueError("counts must be non-negative")
    total = math.fsum(values)
    num = math.fsum(math.lgamma(c + 0.5) - _LGAMMA_HALF for c in values if c > 0)
    den = math.lgamma(m / 2.0 + total) - math.lgamma(m / 2.0)
    return (num - den) / _LN2


def _lse2(a: float, b: float) -> float:
    if a >= b:
        return a + math.log2(1.0 + 2.0 ** (b - a))
    return b + math.log2(1.0 + 2.0 ** (a - b))


class _Node:
    __slots__ = ("depth", "counts", "total", "log_pe", "log_pw", "log_pm",
                 "split", "children", "child_pw", "child_pm")

    def __init__(self, depth: int, empty_pm: float, empty_split: bool):
        self.depth = depth
        self.counts = {}
        self.total = 0.0
        self.log_pe = 0.0
        self.log_pw = 0.0
        self.log_pm = empty_pm
        self.split = empty_split
        self.children = {}
        self.child_pw = 0.0   # sum of present children's log_pw
        self.child_pm = 0.0   # sum over present children of (log_pm - empty log_pm)


class Model:
    """A proper, complete suffix set (most-recent-first tuples)."""

    __slots__ = ("suffixes", "_max_len")

    def __init__(self, suffixes):
        self.suffixes = frozenset(tuple(s) for s in suffixes)
        self._max_len = max((len(s) for s in self.suffixes), default=0)

    def __contains__(self, s):
        return tuple(s) in self.suffixes

    def __iter__(self):
        return iter(sorted(self.suffixes, key=lambda s: (len(s), s)))

    def __len__(self):
        return len(self.suffixes)

    def __eq__(self, other):
        return isinstance(other, Model) and self.suffixes == other.suffixes

    def __hash__(self):
        return hash(self.suffixes)

    def __repr__(self):
        return f"Model({[_label(s) for s in self]})"

    def context_of(self, context) -> tuple:
        """The unique member that is a prefix of ``context`` (most-recent first)."""
        context = tuple(context)
        for k in range(min(self._max_len, len(context)) + 1):
            s = context[:k]
            if s in self.suffixes:
                return s
        raise LookupError(f"context {context} has no suffix in the model")

    def leaves_at_depth(self, D: int) -> int:
        return sum(1 for s in self.suffixes if len(s) == D)

    def is_valid(self, m: int, D: int) -> bool:
        """Proper and complete for alphabet ``m`` and maximal depth ``D``."""
        if not self.suffixes or any(len(s) > D for s in self.suffixes):
            return False
        if any(x < 0 or x >= m for s in self.suffixes for x in s):
            return False
        seen = 0

        def covered(prefix):
            nonlocal seen
            if prefix in self.suffixes:
                seen += 1
                return True
            if len(prefix) == D:
                return False
            return all(covered(prefix + (j,)) for j in range(m))

        # a member reached twice or a member below another member breaks properness
        return covered(()) and seen == len(self.suffixes)


def _label(s) -> str:
    if not s:
        return "-"
    return "".join(map(str, s)) if max(s) < 10 else ".".join(map(str, s))


class ContextTree:
    """Counted suffix tree of depth at most ``depth_max`` over ``m`` symbols."""

    def __init__(self, m: int, depth_max: int, gamma: float = 0.5):
        if int(m) != m or m < 2:
            raise ValueError("alphabet size m must be an integer >= 2")
        if int(depth_max) != depth_max or depth_max < 0:
            raise ValueError("depth must be a non-negative integer")
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in the open interval (0, 1)")
        self.m = int(m)
        self.depth_max = int(depth_max)
        self.gamma = float(gamma)
        self._log_g = math.log2(self.gamma)
        self._log_1g = math.log2(1.0 - self.gamma)
        self._half_m = self.m / 2.0

        # maximized probability and split decision of an untouched node, by depth
        D = self.depth_max
        pm = [0.0] * (D + 1)
        split = [False] * (D + 1)
        for d in range(D - 1, -1, -1):
            keep = self._log_g
            go = self._log_1g + self.m * pm[d + 1]
            split[d] = go > keep
            pm[d] = max(keep, go)
        self.empty_log_pm = tuple(pm)
        self.empty_split = tuple(split)

        self.touches = 0
        self.reset()

    def reset(self):
        self.root = _Node(0, self.empty_log_pm[0], self.empty_split[0])
        self.nodes = {(): self.root}
        self.history = deque([0] * self.depth_max, maxlen=self.depth_max or None)

    def copy(self) -> "ContextTree":
        return copy.deepcopy(self)

    # -- queries -----------------------------------------------------------

    def counts(self, s) -> np.ndarray:
        node = self.nodes.get(tuple(s))
        out = np.zeros(self.m)
        if node is not None:
            for j, c in node.counts.items():
                out[j] = c
        return out

    def context(self) -> tuple:
        """The current length-D context (most-recent first)."""
        return tuple(self.history)

    def ctw_log_prob(self) -> float:
        return self.root.log_pw

    def ctm_log_prob(self) -> float:
        return self.root.log_pm

    def ctm_prune(self) -> Model:
        """The maximizing set; ties between keeping and splitting prune."""
        out = []
        m = self.m

        def walk(node, depth, prefix):
            split = self.empty_split[depth] if node is None else node.split
            if not split:
                out.append(prefix)
                return
            kids = {} if node is None else node.children
            for j in range(m):
                walk(kids.get(j), depth + 1, prefix + (j,))

        walk(self.root, 0, ())
        return Model(out)

    def node_stats(self, s):
        """``(counts dict, total)`` at node ``s``; empty when untouched."""
        node = self.nodes.get(tuple(s))
        if node is None:
            return {}, 0.0
        return node.counts, node.total

    def predict(self, model: Model, context=None) -> np.ndarray:
        """Add-half predictive distribution at the model leaf matching ``context``."""
        if context is None:
            context = self.history
        counts, total = self.node_stats(model.context_of(context))
        p = np.full(self.m, 0.5)
        for j, c in counts.items():
            p[j] += c
        return p / (self._half_m + total)

    # -- mutation ----------------------------------------------------------

    def _context_path(self, context):
        if context is None:
            return tuple(self.history)
        context = tuple(int(c) for c in context)
        if len(context) < self.depth_max:
            raise ValueError(f"context needs {self.depth_max} past symbols")
        return context[: self.depth_max]

    def update(self, symbol: int, context=None):
        """Count ``symbol`` after ``context`` and refresh log-probabilities on its path.

        ``context`` defaults to the tree's own history (padded with zeros at
        start-up), which then advances by ``symbol``.  An explicit context
        leaves the history untouched.
        """
        symbol = int(symbol)
        if not 0 <= symbol < self.m:
            raise ValueError(f"symbol {symbol} outside alphabet of size {self.m}")
        own = context is None
        ctx = self._context_path(context)
        D = self.depth_max

        path = [self.root]
        node = self.root
        nodes = self.nodes
        for d in range(D):
            child = node.children.get(ctx[d])
            if child is None:
                child = _Node(d + 1, self.empty_log_pm[d + 1], self.empty_split[d + 1])
                node.children[ctx[d]] = child
                nodes[ctx[: d + 1]] = child
            path.append(child)
            node = child

        half_m = self._half_m
        log_g, log_1g, m = self._log_g, self._log_1g, self.m
        empty_pm = self.empty_log_pm
        d_pw = d_pm = 0.0
        for d in range(D, -1, -1):
            node = path[d]
            old_pw, old_pm = node.log_pw, node.log_pm
            a = node.counts.get(symbol, 0.0)
            node.log_pe += math.log2((a + 0.5) / (half_m + node.total))
            node.counts[symbol] = a + 1.0
            node.total += 1.0
            if d == D:
                node.log_pw = node.log_pm = node.log_pe
            else:
                node.child_pw += d_pw
                node.child_pm += d_pm
                keep = log_g + node.log_pe
                node.log_pw = _lse2(keep, log_1g + node.child_pw)
                go = log_1g + node.child_pm + m * empty_pm[d + 1]
                node.split = go > keep
                node.log_pm = go if node.split else keep
            d_pw = node.log_pw - old_pw
            d_pm = node.log_pm - old_pm
        self.touches += D + 1

        if own and D:
            self.history.appendleft(symbol)

    def push_history(self, symbol: int):
        """Advance the history without counting (used when an update is skipped)."""
        if self.depth_max:
            self.history.appendleft(int(symbol))

    def extend(self, symbols):
        for s in symbols:
            self.update(s)

    def _refresh(self, node: _Node):
        """Recompute node (and descendants) from counts, bottom-up."""
        for child in node.children.values():
            self._refresh(child)
        node.log_pe = kt_probability(node.counts, self.m) if node.counts else 0.0
        d = node.depth
        if d == self.depth_max:
            node.log_pw = node.log_pm = node.log_pe
            node.split = False
            return
        e = self.empty_log_pm[d + 1]
        node.child_pw = math.fsum(c.log_pw for c in node.children.values())
        node.child_pm = math.fsum(c.log_pm - e for c in node.children.values())
        keep = self._log_g + node.log_pe
        node.log_pw = _lse2(keep, self._log_1g + node.child_pw)
        go = self._log_1g + node.child_pm + self.m * e
        node.split = go > keep
        node.log_pm = go if node.split else keep

    def decay_counts(self, factor: float):
        """Scale every count by ``factor`` and recompute all probabilities."""
        if not 0.0 <= factor <= 1.0:
            raise ValueError("decay factor must lie in [0, 1]")
        if factor == 1.0:
            return
        if factor == 0.0:
            history = self.history
            self.reset()
            self.history = history
            return
        for node in self.nodes.values():
            node.counts = {j: c * factor for j, c in node.counts.items()}
            node.total = math.fsum(node.counts.values())
        self._refresh(self.root)

    # -- serialization -----------------------------------------------------

    def snapshot(self, full: bool = False) -> str:
        """Depth-first text dump, one ``context=... counts=...`` line per node.

        With ``full`` the log-probabilities and split flags are appended,
        which makes the dump a complete state fingerprint.
        """
        lines = []

        def walk(node, prefix):
            c = ",".join(f"{node.counts.get(j, 0.0):.17g}" for j in range(self.m))
            line = f"context={_label(prefix)} counts={c}"
            if full:
                line += (f" pe={node.log_pe:.17g} pw={node.log_pw:.17g}"
                         f" pm={node.log_pm:.17g} split={int(node.split)}")
            lines.append(line)
            for j in sorted(node.children):
                walk(node.children[j], prefix + (j,))

        walk(self.root, ())
        if full:
            lines.append("history=" + ",".join(map(str, self.history)))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------

def new_tree(m: int, D: int, gamma: float = 0.5) -> ContextTree:
    return ContextTree(m, D, gamma)


def update(tree: ContextTree, symbol: int, context=None):
    tree.update(symbol, context)


def ctw_log_prob(tree: ContextTree) -> float:
    return tree.ctw_log_prob()


def ctm_log_prob(tree: ContextTree) -> float:
    return tree.ctm_log_prob()


def ctm_prune(tree: ContextTree) -> Model:
    return tree.ctm_prune()


def decay_counts(tree: ContextTree, factor: float):
    tree.decay_counts(factor)


def predict(tree: ContextTree, model: Model, context=None) -> np.ndarray:
    return tree.predict(model, context)


def model_prior(model: Model, m: int, D: int, gamma: float) -> float:
    """log2 of (1-gamma)^((|S|-1)/(m-1)) * gamma^(|S| - L_D(S))."""
    if not model.is_valid(m, D):
        raise ValueError("model is not proper and complete")
    size = len(model)
    return ((size - 1) / (m - 1)) * math.log2(1.0 - gamma) \
        + (size - model.leaves_at_depth(D)) * math.log2(gamma)


def enumerate_models(m: int, D: int) -> list:
    """Every proper, complete model of depth at most D (small cases only)."""
    if m ** D > 4096:
        raise ValueError("enumeration guarded to m**D <= 4096")

    def sets(depth):
        if depth == D:
            return [((),)]
        out = [((),)]
        for combo in itertools.product(sets(depth + 1), repeat=m):
            out.append(tuple((j,) + s for j, sub in enumerate(combo) for s in sub))
        return out

    return [Model(s) for s in sets(0)]
