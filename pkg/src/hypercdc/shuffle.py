"""Coded multicast shuffle and the uncoded unicast baseline.

Within each node group, every member owes each peer ``z`` the value set
``V(z)``: the values of ``z``'s functions over the file batches that every
member except ``z`` stores.  Each ``V(z)`` is concatenated, zero-padded to a
multiple of ``r - 1``, and split into ``r - 1`` equal segments labeled by the
peers of ``z`` in ascending node-id order.  A member then multicasts the XOR
of its own-labeled segment from each peer's set; recipients reconstruct the
interfering segments from their local values and XOR them off.

Every transcript is emitted in a canonical order (coded messages by
``(group, sender)``, unicasts by ``(recipient, function, file)``), so equal
inputs give byte-identical transcripts regardless of internal scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .design import Design, SpecError, group_coords, groups_containing, substitution_set
from .engine import FileStore, NodeState, iv_value

TRANSCRIPT_SCHEMA = "cdc-transcript/1"


class ShuffleError(RuntimeError):
    """A sender was asked to transmit values it never computed (design bug)."""


class DecodeError(RuntimeError):
    """A recipient recovered inconsistent or incomplete values."""


@dataclass(frozen=True)
class Message:
    """One shuffle transmission.

    For coded messages ``meta`` lists the XORed segment labels as ordered
    ``(requester z, segment owner)`` pairs and ``padding`` records the zero
    bytes appended to each value set before splitting; for unicasts ``meta``
    is the ``(q, j)`` pair carried.
    """

    group: int
    sender: int
    recipients: tuple[int, ...]
    payload: bytes
    kind: str  # "coded" | "unicast"
    meta: tuple
    padding: int = 0


@dataclass(frozen=True)
class Transcript:
    """Canonically ordered shuffle messages plus exact bit totals per kind."""

    messages: tuple[Message, ...]
    coded_bits: int
    unicast_bits: int

    @classmethod
    def of(cls, messages) -> "Transcript":
        messages = tuple(messages)
        coded = sum(len(m.payload) for m in messages if m.kind == "coded")
        unicast = sum(len(m.payload) for m in messages if m.kind == "unicast")
        return cls(messages=messages, coded_bits=coded * 8, unicast_bits=unicast * 8)


def v_set(design: Design, alpha: int, z: int) -> list[tuple[int, int]]:
    """Value ids requested by group member ``z`` and computable by every
    other member of group ``alpha``.

    Ordered by (substitute group, file, function) ascending; always exactly
    ``eta1 * eta2 * Y`` entries.
    """
    ids: list[tuple[int, int]] = []
    functions = design.functions_of(z)
    for beta in substitution_set(design, alpha, z):
        for j in design.batch(beta):
            for q in functions:
                ids.append((q, j))
    return ids


def split_segments(payload: bytes, parts: int) -> tuple[list[bytes], int]:
    """Zero-pad ``payload`` to a multiple of ``parts`` and cut it evenly.

    Returns the segments and the padding length.
    """
    if parts < 1:
        raise SpecError(f"cannot split a payload into {parts} parts")
    seg_len = -(-len(payload) // parts)
    padding = seg_len * parts - len(payload)
    padded = payload + b"\x00" * padding
    return [padded[i * seg_len : (i + 1) * seg_len] for i in range(parts)], padding


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def _padded_v_payload(design, ids, ivs: dict) -> tuple[list[bytes], int]:
    payload = b"".join(ivs[pair] for pair in ids)
    return split_segments(payload, design.r - 1)


def shuffle_coded(design: Design, states: Mapping[int, NodeState]) -> Transcript:
    """Run the coded shuffle: one multicast per (group, member).

    The sender's message XORs, over every peer ``z`` of its group, the
    segment of ``V(z)`` labeled with the sender's id.  Raises
    :class:`ShuffleError` if a sender lacks any value it would transmit.
    """
    local_keys = {k: states[k].local_ivs.keys() for k in states}
    messages = []
    for alpha in range(1, design.X + 1):
        group = design.group(alpha)
        per_z: dict[int, tuple[list[tuple[int, int]], list[bytes], int]] = {}
        for z in group:
            ids = v_set(design, alpha, z)
            donor = next(k for k in group if k != z)
            segments, padding = _padded_v_payload(design, ids, states[donor].local_ivs)
            per_z[z] = (ids, segments, padding)
        for sender in group:
            peers = [z for z in group if z != sender]
            payload = None
            meta = []
            padding = 0
            for z in peers:
                ids, segments, padding = per_z[z]
                if not all(pair in local_keys[sender] for pair in ids):
                    raise ShuffleError(
                        f"node {sender} would transmit values of group {alpha} "
                        f"it did not compute locally"
                    )
                # Segment owners are the peers of z in ascending id order;
                # group tuples ascend with dimension, so no re-sort needed.
                owners = [k for k in group if k != z]
                segment = segments[owners.index(sender)]
                payload = segment if payload is None else _xor(payload, segment)
                meta.append((z, sender))
            messages.append(
                Message(
                    group=alpha,
                    sender=sender,
                    recipients=tuple(peers),
                    payload=payload,
                    kind="coded",
                    meta=tuple(meta),
                    padding=padding,
                )
            )
    messages.sort(key=lambda m: (m.group, m.sender))
    return Transcript.of(messages)


def decode(
    design: Design,
    state: NodeState,
    transcript: Transcript,
    store: FileStore | None = None,
) -> NodeState:
    """Recover every requested value for ``state``'s node from a coded
    transcript.

    For each incoming message the node rebuilds the interfering segments
    from its local values and XORs them off, leaving its own segment.  The
    segments of each group are then reassembled in owner order, stripped of
    padding, and sliced back into values.  When ``store`` is given, every
    recovered value is checked against the map digest and a mismatch raises
    :class:`DecodeError` (this is how transcript corruption surfaces).
    """
    me = state.node
    T = design.spec.iv_bytes
    interferer_cache: dict[int, tuple] = {}

    def interferer(alpha: int, z: int):
        key = (alpha, z)
        if key not in interferer_cache:
            ids = v_set(design, alpha, z)
            interferer_cache[key] = _padded_v_payload(design, ids, state.local_ivs)
        return interferer_cache[key]

    segments_by_group: dict[int, dict[int, bytes]] = {}
    for msg in transcript.messages:
        if msg.kind != "coded" or me not in msg.recipients:
            continue
        alpha = msg.group
        group = design.group(alpha)
        residue = msg.payload
        for z in group:
            if z == me or z == msg.sender:
                continue
            segments, _ = interferer(alpha, z)
            owners = [k for k in group if k != z]
            residue = _xor(residue, segments[owners.index(msg.sender)])
        segments_by_group.setdefault(alpha, {})[msg.sender] = residue

    for alpha in groups_containing(design, me):
        group = design.group(alpha)
        owners = [k for k in group if k != me]
        got = segments_by_group.get(alpha, {})
        missing = [k for k in owners if k not in got]
        if missing:
            raise DecodeError(
                f"node {me} received no message from sender(s) {missing} of group {alpha}"
            )
        ids = v_set(design, alpha, me)
        payload = b"".join(got[k] for k in owners)[: len(ids) * T]
        for idx, (q, j) in enumerate(ids):
            value = payload[idx * T : (idx + 1) * T]
            if store is not None and value != iv_value(store, q, j, T):
                raise DecodeError(
                    f"node {me} decoded a corrupt value for (q={q}, j={j}) in group {alpha}"
                )
            if (q, j) in state.received_ivs:
                raise DecodeError(f"node {me} decoded (q={q}, j={j}) twice")
            state.received_ivs[(q, j)] = value

    wanted = {
        (q, j)
        for q in design.functions_of(me)
        for j in range(1, design.N + 1)
        if j not in design.file_set(me)
    }
    if set(state.received_ivs) != wanted:
        raise DecodeError(
            f"node {me} recovered {len(state.received_ivs)} values, expected {len(wanted)}"
        )
    return state


def shuffle_uncoded(design: Design, states: Mapping[int, NodeState]) -> Transcript:
    """Unicast every requested value, one message per (recipient, q, j).

    The sender is the lowest-id node of the unique group storing the file.
    """
    messages = []
    for z in range(1, design.K + 1):
        local = design.file_set(z)
        for q in design.functions_of(z):
            for j in range(1, design.N + 1):
                if j in local:
                    continue
                beta = design.batch_of_file(j)
                sender = design.group(beta)[0]
                messages.append(
                    Message(
                        group=0,
                        sender=sender,
                        recipients=(z,),
                        payload=states[sender].local_ivs[(q, j)],
                        kind="unicast",
                        meta=(q, j),
                    )
                )
    messages.sort(key=lambda m: (m.recipients[0], m.meta[0], m.meta[1]))
    return Transcript.of(messages)


def transcript_to_json(transcript: Transcript) -> dict:
    """Hex-payload document for golden-file testing; byte-stable because the
    message order is canonical."""
    return {
        "schema": TRANSCRIPT_SCHEMA,
        "coded_bits": transcript.coded_bits,
        "unicast_bits": transcript.unicast_bits,
        "messages": [
            {
                "group": m.group,
                "sender": m.sender,
                "recipients": list(m.recipients),
                "kind": m.kind,
                "meta": [list(entry) for entry in m.meta] if m.kind == "coded" else list(m.meta),
                "padding": m.padding,
                "payload": m.payload.hex(),
            }
            for m in transcript.messages
        ],
    }


def transcript_from_json(doc: dict) -> Transcript:
    if doc.get("schema") != TRANSCRIPT_SCHEMA:
        raise SpecError(f"unsupported transcript schema {doc.get('schema')!r}")
    messages = []
    for m in doc["messages"]:
        meta = m["meta"]
        if m["kind"] == "coded":
            meta = tuple(tuple(entry) for entry in meta)
        else:
            meta = tuple(meta)
        messages.append(
            Message(
                group=m["group"],
                sender=m["sender"],
                recipients=tuple(m["recipients"]),
                payload=bytes.fromhex(m["payload"]),
                kind=m["kind"],
                meta=meta,
                padding=m["padding"],
            )
        )
    transcript = Transcript.of(messages)
    if transcript.coded_bits != doc["coded_bits"] or transcript.unicast_bits != doc["unicast_bits"]:
        raise SpecError("transcript bit totals disagree with message payloads")
    return transcript


def dump_transcript(transcript: Transcript, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(transcript_to_json(transcript), fh, indent=2, sort_keys=True)
        fh.write("\n")
