"""Siamese GIN embedding model and its two fixed prediction heads.

One parameter set embeds every graph: a linear pre-MLP over one-hot labels,
``gin_layers`` GIN layers with identity skips every ``residual_block``
layers, concatenation of all layer outputs per node, a sum-pool, and a
post-MLP.  Distances are then read off the embeddings by :func:`head_sed`
(asymmetric) or :func:`head_ged` (Euclidean).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exact.policy import Mode
from .graph import LabelAlphabet, LabeledGraph
from .nn import autograd as ag

MODEL_MAGIC = b"NSED"
MODEL_VERSION = 1
_MODE_TAGS = {Mode.SED: 0, Mode.GED: 1}


class UnknownLabelError(KeyError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"label {label!r} is not in the model's alphabet")


@dataclass(frozen=True)
class EncoderConfig:
    alphabet_size: int
    gin_layers: int = 8
    hidden_dim: int = 64
    embedding_dim: int = 64
    pre_mlp_layers: int = 1
    mlp_layers: int = 2
    residual_block: int = 2  # 0 disables skip connections
    eps_learnable: bool = True

    def __post_init__(self):
        for name in ("alphabet_size", "gin_layers", "hidden_dim", "embedding_dim", "pre_mlp_layers", "mlp_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.residual_block < 0:
            raise ValueError("residual_block must be >= 0")

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Parameter names and shapes in serialization order."""
        d = self.hidden_dim
        shapes: list[tuple[str, tuple[int, ...]]] = []
        shapes += _mlp_shapes("pre", self.alphabet_size, d, d, self.pre_mlp_layers)
        for i in range(self.gin_layers):
            shapes.append((f"gin{i}.eps", (1, 1)))
            shapes += _mlp_shapes(f"gin{i}", d, d, d, self.mlp_layers)
        shapes += _mlp_shapes("post", self.gin_layers * d, d, self.embedding_dim, self.mlp_layers)
        return shapes


def _mlp_shapes(prefix: str, n_in: int, n_hidden: int, n_out: int, layers: int):
    dims = [n_in] + [n_hidden] * (layers - 1) + [n_out]
    out = []
    for j in range(layers):
        out.append((f"{prefix}.W{j}", (dims[j], dims[j + 1])))
        out.append((f"{prefix}.b{j}", (1, dims[j + 1])))
    return out


def init_params(config: EncoderConfig, rng: np.random.Generator, dtype=np.float32) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, zero GIN epsilons."""
    params = {}
    for name, shape in config.param_shapes():
        if ".W" in name:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    return params


# ---------------------------------------------------------------------------
# batching


@dataclass
class GraphBatch:
    """Several graphs packed into one disjoint union.

    ``src``/``dst`` list every undirected edge in both directions, sorted by
    destination then source, so neighbour sums accumulate in a fixed order.
    """

    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    node_graph: np.ndarray
    counts: np.ndarray
    graph_ids: list
    unknown: list[tuple[int, str]]

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_graphs(self) -> int:
        return len(self.counts)

    @classmethod
    def from_graphs(
        cls,
        graphs: Sequence[LabeledGraph],
        alphabet: LabelAlphabet,
        dtype=np.float64,
        unknown: str = "error",
    ) -> "GraphBatch":
        """Pack ``graphs``; unknown labels raise, or with ``unknown="zero"`` get an all-zero row."""
        counts = np.array([g.node_count for g in graphs], dtype=np.intp)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
        n = int(offsets[-1])
        x = np.zeros((n, len(alphabet)), dtype=dtype)
        flagged: list[tuple[int, str]] = []
        src_parts, dst_parts = [], []
        for gi, g in enumerate(graphs):
            base = offsets[gi]
            for v, label in enumerate(g.labels):
                if label in alphabet:
                    x[base + v, alphabet.id_of(label)] = 1
                elif unknown == "zero":
                    flagged.append((gi, label))
                else:
                    raise UnknownLabelError(label)
            if g.edge_count:
                e = np.array(g.sorted_edges(), dtype=np.intp) + base
                src_parts += [e[:, 0], e[:, 1]]
                dst_parts += [e[:, 1], e[:, 0]]
        if src_parts:
            src = np.concatenate(src_parts)
            dst = np.concatenate(dst_parts)
            order = np.lexsort((src, dst))
            src, dst = src[order], dst[order]
        else:
            src = dst = np.zeros(0, dtype=np.intp)
        node_graph = np.repeat(np.arange(len(graphs), dtype=np.intp), counts)
        return cls(x, src, dst, node_graph, counts, [g.graph_id for g in graphs], flagged)


# ---------------------------------------------------------------------------
# forward pass


def _mlp(h: ag.Tensor, P: dict[str, ag.Tensor], prefix: str, layers: int) -> ag.Tensor:
    for j in range(layers):
        if j:
            h = ag.relu(h)
        h = ag.add(ag.matmul(h, P[f"{prefix}.W{j}"]), P[f"{prefix}.b{j}"])
    return h


def forward(batch: GraphBatch, P: dict[str, ag.Tensor], config: EncoderConfig) -> ag.Tensor:
    """Embed every graph of ``batch``; returns a ``(num_graphs, embedding_dim)`` tensor."""
    if batch.x.shape[1] != config.alphabet_size:
        raise ag.ShapeError(
            f"batch has {batch.x.shape[1]} label columns, model expects {config.alphabet_size}"
        )
    n = batch.num_nodes
    h = _mlp(ag.Tensor(batch.x), P, "pre", config.pre_mlp_layers)
    block_in = h
    layers = []
    for i in range(config.gin_layers):
        agg = ag.segment_sum(ag.gather_rows(h, batch.src), batch.dst, n)
        if config.eps_learnable:
            self_term = ag.scale(h, P[f"gin{i}.eps"], offset=1.0)
        else:
            self_term = h
        h = _mlp(ag.add(self_term, agg), P, f"gin{i}", config.mlp_layers)
        if config.residual_block and (i + 1) % config.residual_block == 0:
            h = ag.add(h, block_in)
            block_in = h
        layers.append(h)
    z = ag.concat_cols(layers)
    pooled = ag.segment_sum(z, batch.node_graph, batch.num_graphs)
    return _mlp(pooled, P, "post", config.mlp_layers)


# ---------------------------------------------------------------------------
# heads


def sed_rows(zq: np.ndarray, zt: np.ndarray) -> np.ndarray:
    """Row-wise ``||max(0, zq - zt)||_2`` in float64 (either side may be a single row)."""
    d = np.maximum(np.asarray(zq, dtype=np.float64) - np.asarray(zt, dtype=np.float64), 0.0)
    return np.sqrt(np.sum(d * d, axis=-1))


def ged_rows(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Row-wise ``||z1 - z2||_2`` in float64."""
    d = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    return np.sqrt(np.sum(d * d, axis=-1))


def _check_pair(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    return a, b


def head_sed(zq, zt) -> float:
    """SED head: zero exactly when ``zq <= zt`` componentwise."""
    return float(sed_rows(*_check_pair(zq, zt)))


def head_ged(z1, z2) -> float:
    """GED head: Euclidean distance between embeddings."""
    return float(ged_rows(*_check_pair(z1, z2)))


HEADS = {Mode.SED: head_sed, Mode.GED: head_ged}


# ---------------------------------------------------------------------------
# model


@dataclass
class EmbeddingMatrix:
    values: np.ndarray  # (count, dim) float32
    ids: list[str]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.ids):
            raise ValueError("embedding rows and ids disagree")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


class Model:
    """Trained (or freshly initialised) encoder plus its label alphabet and head."""

    def __init__(self, config: EncoderConfig, alphabet: LabelAlphabet, params: dict[str, np.ndarray], mode: Mode | str = Mode.SED):
        self.config = config
        self.alphabet = alphabet
        self.mode = Mode(mode)
        expected = dict(config.param_shapes())
        if set(params) != set(expected):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        self.params = {k: np.asarray(v, dtype=np.float32) for k, v in params.items()}

    @classmethod
    def initialize(cls, config: EncoderConfig, alphabet: LabelAlphabet, seed: int = 0, mode: Mode | str = Mode.SED) -> "Model":
        if config.alphabet_size != len(alphabet):
            raise ValueError("alphabet size does not match config")
        return cls(config, alphabet, init_params(config, np.random.default_rng(seed)), mode)

    @property
    def head(self):
        return HEADS[self.mode]

    def tensors(self, dtype=np.float64, requires_grad: bool = False) -> dict[str, ag.Tensor]:
        return {k: ag.Tensor(v.astype(dtype), requires_grad=requires_grad, name=k) for k, v in self.params.items()}

    def embed(self, g: LabeledGraph, unknown: str = "error") -> np.ndarray:
        """Embedding of one graph, computed on its own.

        Evaluated in float64 and rounded to float32, so the result never
        depends on which other graphs are being embedded.
        """
        batch = GraphBatch.from_graphs([g], self.alphabet, np.float64, unknown)
        P = self.tensors(np.float64)
        return forward(batch, P, self.config).value[0].astype(np.float32)

    def embed_many(self, graphs: Iterable[LabeledGraph], unknown: str = "error") -> EmbeddingMatrix:
        graphs = list(graphs)
        P = self.tensors(np.float64)
        rows = np.zeros((len(graphs), self.config.embedding_dim), dtype=np.float32)
        for i, g in enumerate(graphs):
            batch = GraphBatch.from_graphs([g], self.alphabet, np.float64, unknown)
            rows[i] = forward(batch, P, self.config).value[0].astype(np.float32)
        ids = [g.graph_id if g.graph_id is not None else str(i) for i, g in enumerate(graphs)]
        return EmbeddingMatrix(rows, ids)

    def predict(self, gq: LabeledGraph, gt: LabeledGraph, mode: Mode | str | None = None) -> float:
        head = HEADS[Mode(mode)] if mode is not None else self.head
        return head(self.embed(gq), self.embed(gt))

    # -- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        c = self.config
        out = [MODEL_MAGIC, struct.pack("<IB", MODEL_VERSION, _MODE_TAGS[self.mode])]
        out.append(
            struct.pack(
                "<7IB",
                c.alphabet_size, c.gin_layers, c.hidden_dim, c.embedding_dim,
                c.pre_mlp_layers, c.mlp_layers, c.residual_block, int(c.eps_learnable),
            )
        )
        out.append(_pack_strings(self.alphabet.labels))
        flat = np.concatenate([self.params[name].ravel() for name, _ in c.param_shapes()])
        out.append(struct.pack("<Q", flat.size))
        out.append(flat.astype("<f4").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Model":
        try:
            return cls._from_bytes(data)
        except (struct.error, UnicodeDecodeError) as exc:
            raise ValueError(f"corrupt model file: {exc}") from None

    @classmethod
    def _from_bytes(cls, data: bytes) -> "Model":
        if data[:4] != MODEL_MAGIC:
            raise ValueError("not a model file (bad magic)")
        version, tag = struct.unpack_from("<IB", data, 4)
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        mode = {v: k for k, v in _MODE_TAGS.items()}[tag]
        pos = 9
        fields = struct.unpack_from("<7IB", data, pos)
        pos += struct.calcsize("<7IB")
        config = EncoderConfig(*fields[:7], eps_learnable=bool(fields[7]))
        labels, pos = _unpack_strings(data, pos)
        (count,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if len(data) != pos + 4 * count:
            raise ValueError("model file is truncated or has trailing bytes")
        flat = np.frombuffer(data, dtype="<f4", count=count, offset=pos).astype(np.float32)
        params, k = {}, 0
        for name, shape in config.param_shapes():
            size = int(np.prod(shape))
            params[name] = flat[k : k + size].reshape(shape).copy()
            k += size
        if k != count:
            raise ValueError("parameter count does not match configuration")
        return cls(config, LabelAlphabet(labels), params, mode)

    def sidecar(self) -> dict:
        return {
            "format": MODEL_MAGIC.decode(),
            "version": MODEL_VERSION,
            "mode": self.mode.value,
            "config": asdict(self.config),
            "alphabet": list(self.alphabet.labels),
            "param_order": [[name, list(shape)] for name, shape in self.config.param_shapes()],
        }

    def save(self, path) -> None:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        Path(str(path) + ".json").write_text(json.dumps(self.sidecar(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Model":
        return cls.from_bytes(Path(path).read_bytes())


def _pack_strings(items: Sequence[str]) -> bytes:
    out = [struct.pack("<I", len(items))]
    for s in items:
        raw = s.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
    return b"".join(out)


def _unpack_strings(data: bytes, pos: int) -> tuple[list[str], int]:
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    items = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        items.append(data[pos : pos + n].decode("utf-8"))
        pos += n
    return items, pos
