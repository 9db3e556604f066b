"""Sketched Kronecker product maintained as a balanced binary tree.

Leaf k holds a base-sketched factor, J[k, 0] = C_k A_k with C_k drawn from
the configured base family. Each level above pairs adjacent nodes left to
right; a paired node holds the tensor-typed sketch of the Kronecker product
of its two children, computed column-pair-wise so the product itself is
never formed. When a level has an odd node count, the rightmost node is
promoted unchanged (order-preserving, so the implied composite sketch is
still a linear map on the full Kronecker ordering). The root is an m x d
sketch of the whole chain, d being the product of the factor column counts.

Updating factor i by a delta B touches exactly the leaf-to-root path:
sketches are linear and the Kronecker product is bilinear, so the leaf
delta C_i B propagates upward with the unchanged sibling matrix supplying
the other argument. With q factors that is ceil(log2 q) + 1 node matrices.

In adaptive mode the structure instead redraws the sketch specs along the
path and recomputes those nodes from the stored factors, so the randomness
seen by an adversary is fresh after every update. This changes the overall
sketching map, which the ``generation`` counter exposes so that callers can
invalidate anything they sketched earlier (for example a label vector).

A tree is single-writer: updates need exclusive access, while any number of
threads may read (root, sketch_vector, queries) between updates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .linalg import (
    MAX_ELEMENTS,
    DimensionError,
    SparseVector,
    as_matrix,
    as_vector,
)
from .sketches import (
    DEFAULT_OSNAP_SPARSITY,
    BaseFamily,
    BaseSketchSpec,
    ConfigurationError,
    TensorFamily,
    TensorSketchSpec,
    apply_base,
    apply_tensor_cols,
    apply_tensor_pair,
    base_columns,
    materialize,
)

SNAPSHOT_MAGIC = b"KTTR1"

_BASE_CODES = {f: i for i, f in enumerate(BaseFamily)}
_TENSOR_CODES = {f: i for i, f in enumerate(TensorFamily)}


@dataclass(frozen=True)
class TreeConfig:
    """Sketch configuration for one tree."""

    c_family: BaseFamily = BaseFamily.COUNT_SKETCH
    t_family: TensorFamily = TensorFamily.TENSOR_SKETCH
    m: int = 64
    eps: float = 0.5
    delta: float = 0.1
    adaptive: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c_family", BaseFamily(self.c_family))
        object.__setattr__(self, "t_family", TensorFamily(self.t_family))
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not (0.0 < self.eps < 1.0 and 0.0 < self.delta < 1.0):
            raise ValueError("eps and delta must lie in (0, 1)")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 bits")


class TensorTree:
    """Sketch of A_1 (x) ... (x) A_q supporting factor updates.

    Factor matrices are stored in full: adaptive refresh re-sketches them
    and the factored low-rank output hands them back to the caller.
    """

    def __init__(self, factors, config: TreeConfig):
        self.config = config
        self.factors = [as_matrix(f) for f in factors]
        if not self.factors:
            raise DimensionError("need at least one factor")
        for f in self.factors:
            if f.size == 0:
                raise DimensionError("factors must be nonempty")
        d = 1
        for f in self.factors:
            d *= f.shape[1]
        if config.m * d > MAX_ELEMENTS:
            raise DimensionError(
                f"root of shape {config.m} x {d} exceeds element limit"
            )
        self._spec_rng = np.random.default_rng(config.seed)
        self._spec_draws = 0
        self.generation = 0
        self.recompute_counter = 0
        self.leaf_specs = [
            self._fresh_leaf_spec(f.shape[0]) for f in self.factors
        ]
        self.node_specs: dict[tuple[int, int], TensorSketchSpec] = {}
        for level in range(1, self._num_levels(self.q)):
            for k in range(-(-self._level_width(level - 1) // 2)):
                if 2 * k + 1 < self._level_width(level - 1):
                    self.node_specs[(level, k)] = self._fresh_node_spec()
        self._rebuild_all()

    # ------------------------------------------------------------------
    # structure helpers

    @property
    def q(self) -> int:
        return len(self.factors)

    @property
    def depth(self) -> int:
        """Number of levels above the leaves, ceil(log2 q)."""
        return self._num_levels(self.q) - 1

    @staticmethod
    def _num_levels(q: int) -> int:
        levels = 1
        width = q
        while width > 1:
            width = (width + 1) // 2
            levels += 1
        return levels

    def _level_width(self, level: int) -> int:
        width = self.q
        for _ in range(level):
            width = (width + 1) // 2
        return width

    @property
    def root(self) -> np.ndarray:
        """Top node, an m x d matrix. Treat as read-only."""
        return self.levels[-1][0]

    @property
    def node_count(self) -> int:
        return sum(len(level) for level in self.levels)

    # ------------------------------------------------------------------
    # spec drawing

    def _next_seed(self) -> int:
        self._spec_draws += 1
        return int(self._spec_rng.integers(0, 1 << 63))

    def _fresh_leaf_spec(self, n: int) -> BaseSketchSpec:
        m = self.config.m
        sparsity = 0
        if self.config.c_family is BaseFamily.OSNAP:
            sparsity = min(DEFAULT_OSNAP_SPARSITY, m)
        return BaseSketchSpec(
            self.config.c_family, n, m, sparsity, self._next_seed()
        )

    def _fresh_node_spec(self) -> TensorSketchSpec:
        m = self.config.m
        return TensorSketchSpec(self.config.t_family, m, m, self._next_seed())

    # ------------------------------------------------------------------
    # construction

    def _rebuild_all(self) -> None:
        levels = [
            [apply_base(spec, f) for spec, f in zip(self.leaf_specs, self.factors)]
        ]
        for level in range(1, self._num_levels(self.q)):
            below = levels[-1]
            nodes = []
            for k in range(-(-len(below) // 2)):
                if 2 * k + 1 < len(below):
                    spec = self.node_specs[(level, k)]
                    nodes.append(apply_tensor_pair(spec, below[2 * k], below[2 * k + 1]))
                else:
                    nodes.append(below[2 * k].copy())
            levels.append(nodes)
        self.levels = levels

    # ------------------------------------------------------------------
    # updates

    def _check_update_args(self, i: int, B) -> np.ndarray:
        if not 0 <= i < self.q:
            raise IndexError(f"factor index {i} out of range [0, {self.q})")
        B = as_matrix(B)
        if B.shape != self.factors[i].shape:
            raise DimensionError(
                f"update shape {B.shape} != factor shape {self.factors[i].shape}"
            )
        return B

    def update(self, i: int, B) -> None:
        """Apply A_i <- A_i + B, propagating the sketched delta to the root.

        Reuses every stored spec; because each node's map is linear in each
        child, adding the sketched delta at each path node keeps the whole
        tree consistent with a from-scratch build on the updated factors.
        """
        B = self._check_update_args(i, B)
        self.factors[i] = self.factors[i] + B
        delta = apply_base(self.leaf_specs[i], B)
        self.levels[0][i] = self.levels[0][i] + delta
        touched = 1
        k = i
        for level in range(1, len(self.levels)):
            parent = k // 2
            spec = self.node_specs.get((level, parent))
            if spec is not None:
                if k % 2 == 0:
                    sibling = self.levels[level - 1][k + 1]
                    delta = apply_tensor_pair(spec, delta, sibling)
                else:
                    sibling = self.levels[level - 1][k - 1]
                    delta = apply_tensor_pair(spec, sibling, delta)
            self.levels[level][parent] = self.levels[level][parent] + delta
            touched += 1
            k = parent
        self.recompute_counter = touched

    def update_adaptive(self, i: int, B) -> None:
        """Apply A_i <- A_i + B with fresh sketches along the path.

        The leaf is recomputed from the full updated factor and every path
        node from its children's current matrices, each under a newly drawn
        spec, so no randomness is reused where the update landed.
        """
        if not self.config.adaptive:
            raise ConfigurationError(
                "update_adaptive requires a tree built with adaptive=True"
            )
        B = self._check_update_args(i, B)
        self.factors[i] = self.factors[i] + B
        self.leaf_specs[i] = self._fresh_leaf_spec(self.factors[i].shape[0])
        self.levels[0][i] = apply_base(self.leaf_specs[i], self.factors[i])
        touched = 1
        k = i
        for level in range(1, len(self.levels)):
            parent = k // 2
            if (level, parent) in self.node_specs:
                spec = self._fresh_node_spec()
                self.node_specs[(level, parent)] = spec
                left = self.levels[level - 1][2 * parent]
                right = self.levels[level - 1][2 * parent + 1]
                self.levels[level][parent] = apply_tensor_pair(spec, left, right)
            else:
                self.levels[level][parent] = self.levels[level - 1][k].copy()
            touched += 1
            k = parent
        self.recompute_counter = touched
        self.generation += 1

    # ------------------------------------------------------------------
    # sketching vectors

    def _dims(self):
        return [f.shape[0] for f in self.factors]

    def sketch_vector(self, b) -> np.ndarray:
        """Image of a long (sparse) vector under the tree's composite sketch.

        Each nonzero index decomposes into per-factor digits (first factor
        most significant); the corresponding base-sketch columns are pushed
        up the tree as matched column pairs, all nonzeros at once, and the
        root columns are summed with their weights.
        """
        if isinstance(b, SparseVector):
            sv = b
        else:
            sv = SparseVector.from_dense(as_vector(b))
        n_dims = self._dims()
        n_total = 1
        for n_i in n_dims:
            n_total *= n_i
        if sv.length != n_total:
            raise DimensionError(
                f"vector length {sv.length} != product of factor rows {n_total}"
            )
        if sv.nnz == 0:
            return np.zeros(self.config.m)
        digits = self._decompose(sv.indices, n_dims)
        mats = [
            base_columns(self.leaf_specs[t], digits[t]) for t in range(self.q)
        ]
        for level in range(1, len(self.levels)):
            merged = []
            for k in range(-(-len(mats) // 2)):
                spec = self.node_specs.get((level, k))
                if spec is not None:
                    merged.append(apply_tensor_cols(spec, mats[2 * k], mats[2 * k + 1]))
                else:
                    merged.append(mats[2 * k])
            mats = merged
        return mats[0] @ sv.values

    @staticmethod
    def _decompose(indices: np.ndarray, dims) -> list[np.ndarray]:
        """Per-factor digit arrays of flat indices, first factor most significant."""
        j = np.ascontiguousarray(indices, dtype=np.int64)
        digits: list[np.ndarray] = [np.empty(0)] * len(dims)
        for t in range(len(dims) - 1, -1, -1):
            digits[t] = j % dims[t]
            j = j // dims[t]
        if np.any(j):
            raise IndexError("flat index out of range")
        return digits

    def materialize_sketch(self) -> np.ndarray:
        """Explicit m x n composite sketching matrix (desk scale only)."""
        mats = [materialize(spec) for spec in self.leaf_specs]
        for level in range(1, len(self.levels)):
            merged = []
            for k in range(-(-len(mats) // 2)):
                spec = self.node_specs.get((level, k))
                if spec is not None:
                    merged.append(apply_tensor_pair(spec, mats[2 * k], mats[2 * k + 1]))
                else:
                    merged.append(mats[2 * k])
            mats = merged
        return mats[0]

    # ------------------------------------------------------------------
    # snapshots: specs and factors only, node matrices are recomputed

    def save(self, path) -> None:
        """Write a KTTR1 snapshot: config, factors, and all sketch specs."""
        cfg = self.config
        parts = [SNAPSHOT_MAGIC]
        parts.append(
            struct.pack(
                "<BBQddBQQQ",
                _BASE_CODES[cfg.c_family],
                _TENSOR_CODES[cfg.t_family],
                cfg.m,
                cfg.eps,
                cfg.delta,
                int(cfg.adaptive),
                cfg.seed,
                self._spec_draws,
                self.q,
            )
        )
        for f in self.factors:
            parts.append(struct.pack("<QQ", f.shape[0], f.shape[1]))
            parts.append(f.astype("<f8").tobytes())
        for spec in self.leaf_specs:
            parts.append(
                struct.pack(
                    "<BQQQQ",
                    _BASE_CODES[spec.family],
                    spec.input_dim,
                    spec.output_dim,
                    spec.sparsity,
                    spec.seed,
                )
            )
        parts.append(struct.pack("<Q", len(self.node_specs)))
        for (level, k) in sorted(self.node_specs):
            spec = self.node_specs[(level, k)]
            parts.append(
                struct.pack(
                    "<QQBQQQ",
                    level,
                    k,
                    _TENSOR_CODES[spec.family],
                    spec.side_dim,
                    spec.output_dim,
                    spec.seed,
                )
            )
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))

    @classmethod
    def load(cls, path) -> "TensorTree":
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
            raise ValueError("not a tree snapshot (bad magic bytes)")
        off = len(SNAPSHOT_MAGIC)

        def take(fmt):
            nonlocal off
            size = struct.calcsize(fmt)
            if off + size > len(raw):
                raise ValueError("truncated tree snapshot")
            vals = struct.unpack_from(fmt, raw, off)
            off += size
            return vals

        cb, tb, m, eps, delta, adaptive, seed, draws, q = take("<BBQddBQQQ")
        base_families = list(BaseFamily)
        tensor_families = list(TensorFamily)
        config = TreeConfig(
            base_families[cb], tensor_families[tb], m, eps, delta, bool(adaptive), seed
        )
        factors = []
        for _ in range(q):
            rows, cols = take("<QQ")
            count = rows * cols
            size = count * 8
            if off + size > len(raw):
                raise ValueError("truncated tree snapshot")
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
            off += size
            factors.append(data.reshape(rows, cols).copy())
        leaf_specs = []
        for _ in range(q):
            fam, n, out_dim, sparsity, sp_seed = take("<BQQQQ")
            leaf_specs.append(
                BaseSketchSpec(base_families[fam], n, out_dim, sparsity, sp_seed)
            )
        (n_nodes,) = take("<Q")
        node_specs = {}
        for _ in range(n_nodes):
            level, k, fam, side, out_dim, sp_seed = take("<QQBQQQ")
            node_specs[(level, k)] = TensorSketchSpec(
                tensor_families[fam], side, out_dim, sp_seed
            )
        tree = cls.__new__(cls)
        tree.config = config
        tree.factors = factors
        tree._spec_rng = np.random.default_rng(config.seed)
        for _ in range(draws):
            tree._spec_rng.integers(0, 1 << 63)
        tree._spec_draws = draws
        tree.generation = 0
        tree.recompute_counter = 0
        tree.leaf_specs = leaf_specs
        tree.node_specs = node_specs
        tree._rebuild_all()
        return tree
