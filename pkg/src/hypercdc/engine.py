"""Map/Reduce execution over synthetic data.

The map and reduce functions are surrogates built from keyed BLAKE2b
digests: an intermediate value is a pure function of the function id and
the file bytes, and a reduce output chains the per-file values in file-id
order.  Any byte that goes missing or gets swapped anywhere in the
pipeline therefore changes the affected outputs with overwhelming
probability, while payload sizes stay exactly as configured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from hashlib import blake2b

from .design import Design

OUTPUT_BYTES = 32


class MissingIVError(LookupError):
    """A reduce ran without every intermediate value it needs."""


def _seed_key(seed: int) -> bytes:
    return seed.to_bytes(8, "little")


def _expand(root: bytes, n: int) -> bytes:
    """Stretch a 64-byte root digest to exactly ``n`` bytes."""
    if n <= len(root):
        return root[:n]
    out = bytearray()
    ctr = 0
    while len(out) < n:
        out += blake2b(root + ctr.to_bytes(4, "little"), digest_size=64).digest()
        ctr += 1
    return bytes(out[:n])


@dataclass(frozen=True)
class FileStore:
    """The ``N`` input files, each exactly ``file_bytes`` long."""

    seed: int
    file_bytes: int
    files: tuple[bytes, ...]
    file_digests: tuple[bytes, ...]

    @classmethod
    def of(cls, seed: int, file_bytes: int, files) -> "FileStore":
        files = tuple(files)
        digests = tuple(
            blake2b(data, key=_seed_key(seed), digest_size=32).digest() for data in files
        )
        return cls(seed=seed, file_bytes=file_bytes, files=files, file_digests=digests)

    def file(self, j: int) -> bytes:
        return self.files[j - 1]


def synthesize_files(design: Design) -> FileStore:
    """Deterministic synthetic library for ``(seed, N, file_bytes)``."""
    spec = design.spec
    key = _seed_key(spec.seed)
    files = []
    for j in range(1, design.N + 1):
        root = blake2b(b"file" + j.to_bytes(8, "little"), key=key, digest_size=64).digest()
        files.append(_expand(root, spec.file_bytes))
    return FileStore.of(spec.seed, spec.file_bytes, files)


def iv_value(store: FileStore, q: int, j: int, iv_bytes: int) -> bytes:
    """Intermediate value of function ``q`` on file ``j``: a keyed digest of
    (q, file bytes) stretched to ``iv_bytes``."""
    root = blake2b(
        b"iv" + q.to_bytes(8, "little") + store.file_digests[j - 1],
        key=_seed_key(store.seed),
        digest_size=64,
    ).digest()
    return _expand(root, iv_bytes)


@dataclass
class IVTable:
    """Association ``(function id, file id) -> iv bytes``."""

    iv_bytes: int
    entries: dict[tuple[int, int], bytes] = field(default_factory=dict)

    @classmethod
    def build(cls, design: Design, store: FileStore) -> "IVTable":
        """All ``Q * N`` values, computed centrally."""
        T = design.spec.iv_bytes
        table = cls(iv_bytes=T)
        for q in range(1, design.Q + 1):
            for j in range(1, design.N + 1):
                table.entries[(q, j)] = iv_value(store, q, j, T)
        return table

    def get_or_compute(self, store: FileStore, q: int, j: int) -> bytes:
        v = self.entries.get((q, j))
        if v is None:
            v = iv_value(store, q, j, self.iv_bytes)
            self.entries[(q, j)] = v
        return v


@dataclass
class NodeState:
    """Per-node view of the pipeline.

    ``local_ivs`` holds every value the node computed in the Map phase,
    ``received_ivs`` what it recovered from the shuffle, and ``outputs``
    its reduce results.
    """

    node: int
    local_ivs: dict[tuple[int, int], bytes] = field(default_factory=dict)
    received_ivs: dict[tuple[int, int], bytes] = field(default_factory=dict)
    outputs: dict[int, bytes] = field(default_factory=dict)


def map_node(design: Design, store: FileStore, k: int, table: IVTable | None = None) -> NodeState:
    """Run the Map phase at node ``k``: all ``Q * |M_k|`` values over its
    locally available files.

    ``table`` is an optional shared memo; nodes mapping the same file
    produce identical values, so a simulation can hand one table to every
    map call and compute each value once.
    """
    T = design.spec.iv_bytes
    state = NodeState(node=k)
    for q in range(1, design.Q + 1):
        for j in design.files_of(k):
            if table is not None:
                state.local_ivs[(q, j)] = table.get_or_compute(store, q, j)
            else:
                state.local_ivs[(q, j)] = iv_value(store, q, j, T)
    return state


def _reduce_digest(seed: int, q: int, ivs) -> bytes:
    h = blake2b(b"reduce" + q.to_bytes(8, "little"), key=_seed_key(seed), digest_size=OUTPUT_BYTES)
    for v in ivs:
        h.update(v)
    return h.digest()


def oracle_outputs(design: Design, store: FileStore) -> dict[int, bytes]:
    """Ground-truth outputs for every function, computed centrally from all
    ``N`` files; the reference the distributed pipeline is judged against."""
    T = design.spec.iv_bytes
    return {
        q: _reduce_digest(
            store.seed, q, (iv_value(store, q, j, T) for j in range(1, design.N + 1))
        )
        for q in range(1, design.Q + 1)
    }


def reduce_node(design: Design, state: NodeState) -> NodeState:
    """Run the Reduce phase at ``state``'s node for its assigned functions.

    Requires every value ``(q, j)`` with ``q`` assigned and ``j`` any file;
    raises :class:`MissingIVError` naming the first absent pair otherwise.
    """
    for q in design.functions_of(state.node):
        ivs = []
        for j in range(1, design.N + 1):
            v = state.local_ivs.get((q, j))
            if v is None:
                v = state.received_ivs.get((q, j))
            if v is None:
                raise MissingIVError(
                    f"node {state.node} cannot reduce function {q}: missing IV (q={q}, j={j})"
                )
            ivs.append(v)
        state.outputs[q] = _reduce_digest(design.spec.seed, q, ivs)
    return state
