"""Binary files for embedding matrices and metric trees.

Embeddings (``NSEM``): magic, u32 version, u32 dim, u64 count, count*dim
little-endian float32 values, then ``count`` length-prefixed UTF-8 ids.

Index (``NSIX``): magic, u32 version, u8 distance tag, u32 leaf_cap,
u64 seed, u64 item count, 32-byte SHA-256 of the embedding values, u64 node
count, then nodes in pre-order.  A leaf is ``u8 0, u32 n, n*u32 items``; an
internal node is ``u8 1, u32 pivot, f64 m1, f64 m2, u8 child mask`` followed
by its present children.
"""

from __future__ import annotations

import functools
import hashlib
import struct
from pathlib import Path

import numpy as np

from ..encoder import EmbeddingMatrix
from .distances import TAGS, Distance, by_tag
from .tree import MetricTree, TreeNode

EMB_MAGIC = b"NSEM"
EMB_VERSION = 1
IDX_MAGIC = b"NSIX"
IDX_VERSION = 1


class FormatError(ValueError):
    pass


def embeddings_to_bytes(emb: EmbeddingMatrix) -> bytes:
    values = np.ascontiguousarray(emb.values, dtype="<f4")
    out = [EMB_MAGIC, struct.pack("<IIQ", EMB_VERSION, emb.dim, len(emb))]
    out.append(values.tobytes())
    for gid in emb.ids:
        raw = str(gid).encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
    return b"".join(out)


def _guarded(read):
    @functools.wraps(read)
    def wrapper(data, *args, **kw):
        try:
            return read(data, *args, **kw)
        except (struct.error, IndexError, UnicodeDecodeError) as exc:
            raise FormatError(f"corrupt file: {exc}") from None
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"corrupt file: {exc}") from None

    return wrapper


@_guarded
def embeddings_from_bytes(data: bytes) -> EmbeddingMatrix:
    if data[:4] != EMB_MAGIC:
        raise FormatError("not an embeddings file (bad magic)")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != EMB_VERSION:
        raise FormatError(f"unsupported embeddings version {version}")
    pos = 4 + struct.calcsize("<IIQ")
    values = np.frombuffer(data, dtype="<f4", count=dim * count, offset=pos).astype(np.float32).reshape(count, dim)
    pos += 4 * dim * count
    ids = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        ids.append(data[pos : pos + n].decode("utf-8"))
        pos += n
    if pos != len(data):
        raise FormatError("embeddings file is truncated or has trailing data")
    return EmbeddingMatrix(values, ids)


def save_embeddings(emb: EmbeddingMatrix, path) -> None:
    Path(path).write_bytes(embeddings_to_bytes(emb))


def load_embeddings(path) -> EmbeddingMatrix:
    return embeddings_from_bytes(Path(path).read_bytes())


def _digest(vectors: np.ndarray) -> bytes:
    return hashlib.sha256(np.ascontiguousarray(vectors, dtype="<f4").tobytes()).digest()


def tree_to_bytes(tree: MetricTree) -> bytes:
    nodes = list(tree.nodes())
    out = [
        IDX_MAGIC,
        struct.pack("<IBIQQ", IDX_VERSION, TAGS[tree.dist.tag], tree.leaf_cap, tree.seed, len(tree)),
        _digest(tree.vectors),
        struct.pack("<Q", len(nodes)),
    ]
    for node in nodes:
        if node.is_leaf:
            out.append(struct.pack("<BI", 0, len(node.items)))
            out.append(np.asarray(node.items, dtype="<u4").tobytes())
        else:
            mask = sum(1 << c for c, ch in enumerate(node.children) if ch is not None)
            out.append(struct.pack("<BIddB", 1, node.pivot, node.m1, node.m2, mask))
    return b"".join(out)


@_guarded
def tree_from_bytes(data: bytes, vectors: np.ndarray, dist: Distance | None = None) -> MetricTree:
    if data[:4] != IDX_MAGIC:
        raise FormatError("not an index file (bad magic)")
    version, tag, leaf_cap, seed, count = struct.unpack_from("<IBIQQ", data, 4)
    if version != IDX_VERSION:
        raise FormatError(f"unsupported index version {version}")
    pos = 4 + struct.calcsize("<IBIQQ")
    digest = data[pos : pos + 32]
    pos += 32
    if count != len(vectors) or digest != _digest(vectors):
        raise FormatError("index was built over different embeddings")
    tag_name = {v: k for k, v in TAGS.items()}[tag]
    if dist is None:
        dist = by_tag(tag_name)
    elif dist.tag != tag_name:
        raise FormatError(f"index uses distance {tag_name}, got {dist.tag}")
    (n_nodes,) = struct.unpack_from("<Q", data, pos)
    pos += 8

    def read_node():
        nonlocal pos
        kind = data[pos]
        if kind == 0:
            _, n = struct.unpack_from("<BI", data, pos)
            pos += 5
            items = np.frombuffer(data, dtype="<u4", count=n, offset=pos).astype(np.intp)
            pos += 4 * n
            return TreeNode(items=items, size=n), 0
        _, pivot, m1, m2, mask = struct.unpack_from("<BIddB", data, pos)
        pos += struct.calcsize("<BIddB")
        return TreeNode(pivot=pivot, m1=m1, m2=m2), mask

    # Rebuild from pre-order with an explicit stack of (node, pending child slots).
    root, mask = read_node()
    made = 1
    stack = [(root, [c for c in range(4) if mask >> c & 1])]
    while stack:
        node, pending = stack[-1]
        if not pending:
            stack.pop()
            continue
        slot = pending.pop(0)
        child, cmask = read_node()
        made += 1
        node.children[slot] = child
        if not child.is_leaf:
            stack.append((child, [c for c in range(4) if cmask >> c & 1]))
    if made != n_nodes or pos != len(data):
        raise FormatError("index file is truncated or has trailing data")
    _fill_sizes(root)
    return MetricTree(vectors, dist, leaf_cap=leaf_cap, seed=seed, root=root)


def _fill_sizes(root: TreeNode) -> None:
    order = []
    stack = [root]
    while stack:
        n = stack.pop()
        order.append(n)
        if not n.is_leaf:
            stack.extend(c for c in n.children if c is not None)
    for n in reversed(order):
        if not n.is_leaf:
            n.size = 1 + sum(c.size for c in n.children if c is not None)


def save_tree(tree: MetricTree, path) -> None:
    Path(path).write_bytes(tree_to_bytes(tree))


def load_tree(path, vectors: np.ndarray, dist: Distance | None = None) -> MetricTree:
    return tree_from_bytes(Path(path).read_bytes(), vectors, dist)
