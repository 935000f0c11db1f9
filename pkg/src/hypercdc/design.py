"""Hypercuboid layout of nodes, files and reduce functions.

A network is described by ``P`` node classes; class ``p`` contributes ``r_p``
dimensions of length ``m_p`` to a cuboid lattice.  Every lattice point is a
*node group* of one node per dimension, and owns one batch of ``eta1`` input
files stored at exactly those ``r`` nodes.  Reduce functions are dealt out in
class-dependent quota so that every node group requests the same number of
intermediate values from its peers, which is what makes the coded shuffle
symmetric.

All ids are 1-based: nodes ``1..K``, groups ``1..X``, files ``1..N``,
functions ``1..Q``.  Group indices follow a fixed mixed-radix order with the
first dimension most significant, so every derived labeling is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from math import lcm, prod
from typing import Iterable, Sequence

DESIGN_SCHEMA = "cdc-design/1"


class SpecError(ValueError):
    """A network parameter set violates a construction constraint."""


@dataclass(frozen=True)
class NetworkSpec:
    """Parameters of a hypercuboid computing network.

    ``classes`` holds one ``(r_p, m_p)`` pair per node class: ``r_p``
    dimensions of ``m_p`` nodes each.  ``eta1`` is the number of files per
    node-group batch, ``eta2`` scales the function assignment, ``iv_bytes``
    is the size of one intermediate value and ``file_bytes`` the size of one
    input file.  ``seed`` drives all synthetic data.
    """

    classes: tuple[tuple[int, int], ...]
    eta1: int = 1
    eta2: int = 1
    iv_bytes: int = 16
    file_bytes: int = 64
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple((int(r), int(m)) for r, m in self.classes))
        if not self.classes:
            raise SpecError("at least one node class is required (P >= 1)")
        for p, (r_p, m_p) in enumerate(self.classes, start=1):
            if r_p < 1:
                raise SpecError(f"class {p}: dimension count r_p={r_p} must be >= 1")
            if m_p < 2:
                raise SpecError(
                    f"class {p}: set size m_p={m_p} must be >= 2 "
                    "(a length-1 dimension stores the whole library at one node)"
                )
        if self.r < 2:
            raise SpecError(f"total computation load r={self.r} must be >= 2 for a coded shuffle")
        if self.eta1 < 1:
            raise SpecError(f"eta1={self.eta1} must be a positive integer")
        if self.eta2 < 1:
            raise SpecError(f"eta2={self.eta2} must be a positive integer")
        if self.iv_bytes < 1:
            raise SpecError(f"iv_bytes={self.iv_bytes} must be a positive integer")
        if self.file_bytes < 1:
            raise SpecError(f"file_bytes={self.file_bytes} must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise SpecError(f"seed={self.seed} must fit in an unsigned 64-bit integer")

    @property
    def P(self) -> int:
        return len(self.classes)

    @property
    def r(self) -> int:
        """Computation load: total number of cuboid dimensions."""
        return sum(r_p for r_p, _ in self.classes)

    @property
    def K(self) -> int:
        return sum(r_p * m_p for r_p, m_p in self.classes)

    @property
    def X(self) -> int:
        """Number of node groups (lattice points)."""
        return prod(m_p**r_p for r_p, m_p in self.classes)

    @property
    def Y(self) -> int:
        """Least common multiple of the per-class set sizes minus one."""
        return lcm(*(m_p - 1 for _, m_p in self.classes))

    @property
    def N(self) -> int:
        return self.eta1 * self.X

    @property
    def Q(self) -> int:
        # Integer by construction: (m_p - 1) divides Y for every class.
        return sum(self.eta2 * self.Y * r_p * m_p // (m_p - 1) for r_p, m_p in self.classes)

    def functions_per_node(self, p: int) -> int:
        """Reduce-function quota of a class-``p`` node."""
        m_p = self.classes[p - 1][1]
        return self.eta2 * self.Y // (m_p - 1)


@dataclass(frozen=True)
class Design:
    """A fully realized hypercuboid design.

    Immutable once built; safe to share across concurrent readers.
    """

    spec: NetworkSpec
    K: int
    N: int
    Q: int
    r: int
    X: int
    Y: int
    dim_sizes: tuple[int, ...]
    dim_class: tuple[int, ...]
    node_class: tuple[int, ...]
    node_set: tuple[int, ...]
    node_sets: tuple[tuple[int, ...], ...]
    groups: tuple[tuple[int, ...], ...]
    files_of_group: tuple[tuple[int, ...], ...]
    files_of_node: tuple[tuple[int, ...], ...]
    functions_of_node: tuple[tuple[int, ...], ...]
    _file_sets: tuple[frozenset, ...] = field(repr=False, default=())

    def class_of(self, k: int) -> int:
        return self.node_class[k - 1]

    def dim_of(self, k: int) -> int:
        """Dimension index i with node k in K_i."""
        return self.node_set[k - 1]

    def group(self, alpha: int) -> tuple[int, ...]:
        return self.groups[alpha - 1]

    def batch(self, alpha: int) -> tuple[int, ...]:
        """File batch owned by group ``alpha``."""
        return self.files_of_group[alpha - 1]

    def files_of(self, k: int) -> tuple[int, ...]:
        return self.files_of_node[k - 1]

    def file_set(self, k: int) -> frozenset:
        return self._file_sets[k - 1]

    def functions_of(self, k: int) -> tuple[int, ...]:
        return self.functions_of_node[k - 1]

    def batch_of_file(self, j: int) -> int:
        """Index of the unique group whose batch contains file ``j``."""
        if not 1 <= j <= self.N:
            raise SpecError(f"file id {j} out of range 1..{self.N}")
        return (j - 1) // self.spec.eta1 + 1


def build_design(spec: NetworkSpec) -> Design:
    """Construct the canonical design for ``spec``.

    Nodes are numbered consecutively along dimensions (all of K_1 first,
    then K_2, ...); dimensions follow class order.  Group ``alpha`` sits at
    mixed-radix coordinates ``(c_1..c_r)`` with ``c_1`` most significant,
    its batch is the ``eta1`` files ``(alpha-1)*eta1+1 .. alpha*eta1``, and
    function ids are dealt consecutively in node order.
    """
    dim_sizes: list[int] = []
    dim_class: list[int] = []
    for p, (r_p, m_p) in enumerate(spec.classes, start=1):
        dim_sizes.extend([m_p] * r_p)
        dim_class.extend([p] * r_p)

    node_sets: list[tuple[int, ...]] = []
    node_class: list[int] = []
    node_set: list[int] = []
    next_id = 1
    for i, m in enumerate(dim_sizes, start=1):
        members = tuple(range(next_id, next_id + m))
        node_sets.append(members)
        node_class.extend([dim_class[i - 1]] * m)
        node_set.extend([i] * m)
        next_id += m

    K, N, Q, r, X, Y = spec.K, spec.N, spec.Q, spec.r, spec.X, spec.Y

    # itertools.product enumerates exactly the canonical mixed-radix order.
    groups = tuple(product(*node_sets))
    files_of_group = tuple(
        tuple(range((a - 1) * spec.eta1 + 1, a * spec.eta1 + 1)) for a in range(1, X + 1)
    )

    files_of_node: list[tuple[int, ...]] = []
    for k in range(1, K + 1):
        files: list[int] = []
        for alpha in _groups_containing_node(dim_sizes, node_sets, node_set[k - 1], k):
            files.extend(files_of_group[alpha - 1])
        files_of_node.append(tuple(files))  # batch ids ascend with alpha, so already sorted

    functions_of_node: list[tuple[int, ...]] = []
    next_fn = 1
    for k in range(1, K + 1):
        quota = spec.functions_per_node(node_class[k - 1])
        functions_of_node.append(tuple(range(next_fn, next_fn + quota)))
        next_fn += quota
    assert next_fn - 1 == Q

    return Design(
        spec=spec,
        K=K,
        N=N,
        Q=Q,
        r=r,
        X=X,
        Y=Y,
        dim_sizes=tuple(dim_sizes),
        dim_class=tuple(dim_class),
        node_class=tuple(node_class),
        node_set=tuple(node_set),
        node_sets=tuple(node_sets),
        groups=groups,
        files_of_group=files_of_group,
        files_of_node=tuple(files_of_node),
        functions_of_node=tuple(functions_of_node),
        _file_sets=tuple(frozenset(f) for f in files_of_node),
    )


def _place_values(dim_sizes: Sequence[int]) -> list[int]:
    places = [1] * len(dim_sizes)
    for i in range(len(dim_sizes) - 2, -1, -1):
        places[i] = places[i + 1] * dim_sizes[i + 1]
    return places


def group_index(design: Design, coords: Sequence[int]) -> int:
    """Inverse of :func:`group_coords`: mixed-radix coordinates to group id."""
    if len(coords) != design.r:
        raise SpecError(f"expected {design.r} coordinates, got {len(coords)}")
    places = _place_values(design.dim_sizes)
    alpha = 1
    for i, (c, m, place) in enumerate(zip(coords, design.dim_sizes, places), start=1):
        if not 1 <= c <= m:
            raise SpecError(f"coordinate {i} is {c}, outside 1..{m}")
        alpha += (c - 1) * place
    return alpha


def group_coords(design: Design, alpha: int) -> tuple[int, ...]:
    """Mixed-radix coordinates ``(c_1..c_r)`` of group ``alpha``."""
    if not 1 <= alpha <= design.X:
        raise SpecError(f"group index {alpha} out of range 1..{design.X}")
    rem = alpha - 1
    coords = []
    for place in _place_values(design.dim_sizes):
        c, rem = divmod(rem, place)
        coords.append(c + 1)
    return tuple(coords)


def substitution_set(design: Design, alpha: int, z: int) -> tuple[int, ...]:
    """Groups differing from group ``alpha`` only in node ``z``'s dimension.

    These are the lattice points whose file batches node ``z`` misses but
    every other member of group ``alpha`` stores, so they are exactly the
    batches served to ``z`` through this group's multicasts.
    """
    group = design.group(alpha)
    if z not in group:
        raise SpecError(f"node {z} is not a member of group {alpha} {group}")
    h = design.dim_of(z)
    coords = list(group_coords(design, alpha))
    own = coords[h - 1]
    out = []
    for c in range(1, design.dim_sizes[h - 1] + 1):
        if c == own:
            continue
        coords[h - 1] = c
        out.append(group_index(design, coords))
    return tuple(out)


def _groups_containing_node(dim_sizes, node_sets, h, k) -> Iterable[int]:
    places = _place_values(dim_sizes)
    c_own = node_sets[h - 1].index(k) + 1
    ranges = [range(1, m + 1) if i != h else (c_own,) for i, m in enumerate(dim_sizes, start=1)]
    for coords in product(*ranges):
        yield 1 + sum((c - 1) * place for c, place in zip(coords, places))


def groups_containing(design: Design, k: int) -> tuple[int, ...]:
    """All group indices with node ``k`` as a member, ascending."""
    if not 1 <= k <= design.K:
        raise SpecError(f"node id {k} out of range 1..{design.K}")
    return tuple(_groups_containing_node(design.dim_sizes, design.node_sets, design.dim_of(k), k))


def design_to_json(design: Design) -> dict:
    """Serializable document mirroring the design, tagged ``cdc-design/1``."""
    spec = design.spec
    return {
        "schema": DESIGN_SCHEMA,
        "spec": {
            "classes": [list(c) for c in spec.classes],
            "eta1": spec.eta1,
            "eta2": spec.eta2,
            "iv_bytes": spec.iv_bytes,
            "file_bytes": spec.file_bytes,
            "seed": spec.seed,
        },
        "K": design.K,
        "N": design.N,
        "Q": design.Q,
        "r": design.r,
        "X": design.X,
        "Y": design.Y,
        "node_class": list(design.node_class),
        "node_set": list(design.node_set),
        "node_sets": [list(s) for s in design.node_sets],
        "groups": [list(g) for g in design.groups],
        "files_of_group": [list(b) for b in design.files_of_group],
        "files_of_node": [list(f) for f in design.files_of_node],
        "functions_of_node": [list(w) for w in design.functions_of_node],
    }


def design_from_json(doc: dict) -> Design:
    """Rebuild a design from its JSON document and verify every field.

    The canonical labeling makes the document fully derivable from its spec,
    so the loader reconstructs and cross-checks rather than trusting arrays.
    """
    if doc.get("schema") != DESIGN_SCHEMA:
        raise SpecError(f"unsupported design schema {doc.get('schema')!r}")
    s = doc["spec"]
    spec = NetworkSpec(
        classes=tuple(tuple(c) for c in s["classes"]),
        eta1=s["eta1"],
        eta2=s["eta2"],
        iv_bytes=s["iv_bytes"],
        file_bytes=s["file_bytes"],
        seed=s["seed"],
    )
    design = build_design(spec)
    rebuilt = design_to_json(design)
    for key, value in rebuilt.items():
        if doc.get(key) != value:
            raise SpecError(f"design document field {key!r} is inconsistent with its parameters")
    return design


def save_design(design: Design, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_json(design), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_design(path) -> Design:
    with open(path, encoding="utf-8") as fh:
        return design_from_json(json.load(fh))
