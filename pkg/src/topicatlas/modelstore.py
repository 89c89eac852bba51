"""Versioned binary container for trained models.

Layout: 4-byte magic, u32 format version, u64 header length, canonical JSON
header (sorted keys, no whitespace), the raw float64 array blocks in the
order the header lists them, and a trailing sha256 over everything before
it.  Canonical JSON plus fixed array order makes saves byte-identical, so
the trailing digest doubles as a model fingerprint.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .artm import TopicModel
from .corpus import Vocabulary
from .errors import CorruptBundleError, VersionMismatchError
from .hierarchy import HierarchicalModel

MAGIC = b"TATL"
FORMAT_VERSION = 1
_DIGEST_BYTES = 32


def canonical_json(obj: object) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(stream: BinaryIO, header: dict, arrays: dict[str, np.ndarray]) -> str:
    """Write a container; returns the hex digest of the payload.

    The header must be JSON-serializable; an ``arrays`` entry is added to it
    recording each block's name and shape in write order.
    """
    full_header = dict(header)
    full_header["arrays"] = [
        {"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()
    ]
    header_bytes = canonical_json(full_header)
    digest = hashlib.sha256()

    def emit(chunk: bytes) -> None:
        digest.update(chunk)
        stream.write(chunk)

    emit(MAGIC)
    emit(struct.pack("<I", FORMAT_VERSION))
    emit(struct.pack("<Q", len(header_bytes)))
    emit(header_bytes)
    for arr in arrays.values():
        emit(np.asfortranarray(arr, dtype=np.float64).tobytes(order="F"))
    stream.write(digest.digest())
    return digest.hexdigest()


def read_container(stream: BinaryIO) -> tuple[dict, dict[str, np.ndarray], str]:
    """Read a container back; returns (header, arrays, hex digest).

    Raises VersionMismatchError on an unknown format version and
    CorruptBundleError on any structural or checksum failure.
    """
    digest = hashlib.sha256()

    def take(n: int, what: str) -> bytes:
        chunk = stream.read(n)
        if len(chunk) != n:
            raise CorruptBundleError(f"truncated while reading {what}")
        digest.update(chunk)
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise CorruptBundleError("bad magic bytes")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
    (header_len,) = struct.unpack("<Q", take(8, "header length"))
    try:
        header = json.loads(take(header_len, "header"))
    except ValueError as exc:
        raise CorruptBundleError(f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or "arrays" not in header:
        raise CorruptBundleError("header missing array directory")
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        n_bytes = 8 * int(np.prod(shape, dtype=np.int64)) if shape else 8
        raw = take(n_bytes, f"array {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=np.float64).reshape(shape, order="F").copy(order="F")
    stored = stream.read(_DIGEST_BYTES)
    if len(stored) != _DIGEST_BYTES:
        raise CorruptBundleError("truncated while reading checksum")
    if stored != digest.digest():
        raise CorruptBundleError("checksum mismatch")
    if stream.read(1):
        raise CorruptBundleError("trailing bytes after checksum")
    return header, arrays, digest.hexdigest()


def level_header(model: TopicModel) -> dict:
    return {
        "vocabulary": list(model.vocabulary.entries),
        "roles": list(model.roles),
        "doc_ids": list(model.doc_ids) if model.doc_ids is not None else None,
    }


def level_arrays(model: TopicModel, prefix: str = "") -> dict[str, np.ndarray]:
    return {
        f"{prefix}word_topic": model.word_topic,
        f"{prefix}topic_doc": model.topic_doc,
        f"{prefix}topic_mass": model.topic_mass,
    }


def level_from_parts(header: dict, arrays: dict[str, np.ndarray], prefix: str = "") -> TopicModel:
    vocab = Vocabulary()
    for token in header["vocabulary"]:
        vocab.add(token)
    doc_ids = header.get("doc_ids")
    return TopicModel(
        word_topic=arrays[f"{prefix}word_topic"],
        topic_doc=arrays[f"{prefix}topic_doc"],
        roles=list(header["roles"]),
        vocabulary=vocab,
        topic_mass=arrays[f"{prefix}topic_mass"],
        doc_ids=list(doc_ids) if doc_ids is not None else None,
    )


def hierarchy_parts(model: HierarchicalModel) -> tuple[dict, dict[str, np.ndarray]]:
    """Header fields and array blocks shared by every hierarchy container."""
    header = {
        "parent": level_header(model.parent_level),
        "child": level_header(model.child_level),
    }
    arrays = level_arrays(model.parent_level, "parent.")
    arrays.update(level_arrays(model.child_level, "child."))
    arrays["child_given_parent"] = model.child_given_parent
    return header, arrays


def hierarchy_from_parts(header: dict, arrays: dict[str, np.ndarray]) -> HierarchicalModel:
    return HierarchicalModel(
        parent_level=level_from_parts(header["parent"], arrays, "parent."),
        child_level=level_from_parts(header["child"], arrays, "child."),
        child_given_parent=arrays["child_given_parent"],
    )


def save_level(model: TopicModel, path: str | Path) -> str:
    header = {"kind": "level", "level": level_header(model)}
    with open(path, "wb") as fh:
        return write_container(fh, header, level_arrays(model))


def load_level(path: str | Path) -> TopicModel:
    with open(path, "rb") as fh:
        header, arrays, _ = read_container(fh)
    if header.get("kind") != "level":
        raise CorruptBundleError(f"expected a level container, found {header.get('kind')!r}")
    return level_from_parts(header["level"], arrays)


def save_hierarchy(model: HierarchicalModel, path: str | Path) -> str:
    parts, arrays = hierarchy_parts(model)
    with open(path, "wb") as fh:
        return write_container(fh, {"kind": "hierarchy", **parts}, arrays)


def load_hierarchy(path: str | Path) -> HierarchicalModel:
    with open(path, "rb") as fh:
        header, arrays, _ = read_container(fh)
    if header.get("kind") != "hierarchy":
        raise CorruptBundleError(f"expected a hierarchy container, found {header.get('kind')!r}")
    return hierarchy_from_parts(header, arrays)


def model_fingerprint(model: HierarchicalModel) -> str:
    """Digest a hierarchy would have on disk, without writing a file."""
    parts, arrays = hierarchy_parts(model)
    sink = io.BytesIO()
    return write_container(sink, {"kind": "hierarchy", **parts}, arrays)


def model_digest(path: str | Path) -> str:
    """Hex digest stored in a container, verified against its contents."""
    with open(path, "rb") as fh:
        _, _, digest = read_container(fh)
    return digest
