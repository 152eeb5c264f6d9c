"""Model assembly, parameter bookkeeping, and checkpoint serialization.

Parameter order is canonical and derived from the config alone: embedding
table, then per recurrent layer its input kernel, recurrent kernel and bias
(forward direction then backward direction for the bidirectional kind), then
the dense kernel and bias. Parameter counts per layer type:

    embedding            V * E
    lstm layer           4H * (D + H + 1)
    gru layer            3H * (D + H + 1)
    bidirectional layer  2 * 4H * (D + H + 1)
    dense                F * V + V

with D the layer's input width (E for the first layer, previous output width
after that), H the layer width, and F the final feature width (H or 2H).

Checkpoint file format, all integers little-endian:

    magic "CRNF"
    u32 version (currently 1)
    u32 header length, then that many bytes of canonical UTF-8 JSON holding
        {"config": {...}, "vocab": [code points in index order]}
    per parameter in canonical order:
        u32 rank, u32 dims[rank], then IEEE-754 float32 values in row-major
    u32 CRC-32 of the payload (every byte after the version field and before
        this checksum)

Training arithmetic is float64; checkpoints store float32, so values are
rounded once on save and save -> load -> save is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .exceptions import (
    CheckpointFormatError,
    CheckpointIntegrityError,
    ConfigError,
    ShapeError,
)
from .layers import (
    BidirectionalLstm,
    Dense,
    Embedding,
    GruCell,
    LstmCell,
    RecurrentStack,
    glorot_uniform,
)
from .numerics import Rng

KINDS = ("lstm", "gru", "birnn")
PRESETS = {"uni": (1024,), "bi": (512, 256), "quad": (512, 256, 128, 64)}

_MAGIC = b"CRNF"
_VERSION = 1


def preset_widths(name: str, scale: float = 1.0) -> tuple[int, ...]:
    """Layer widths for a named preset, optionally scaled down for tests."""
    if name not in PRESETS:
        valid = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; valid presets: {valid}")
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    return tuple(max(1, round(w * scale)) for w in PRESETS[name])


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    layer_widths: tuple[int, ...]
    vocab_size: int
    batch_size: int
    embed_dim: int = 256
    dropout: float = 0.4
    seq_len: int = 100
    init_seed: int = 0
    unit_forget_bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.layer_widths or any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer_widths must be positive, got {self.layer_widths}")
        for name in ("vocab_size", "batch_size", "embed_dim", "seq_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")


def expected_param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter names and shapes implied by the config."""
    shapes: dict[str, tuple[int, ...]] = {
        "embedding.table": (config.vocab_size, config.embed_dim)
    }
    d = config.embed_dim
    for i, h in enumerate(config.layer_widths):
        if config.kind == "lstm":
            shapes[f"rnn{i}.w_x"] = (d, 4 * h)
            shapes[f"rnn{i}.w_h"] = (h, 4 * h)
            shapes[f"rnn{i}.b"] = (4 * h,)
            d = h
        elif config.kind == "gru":
            shapes[f"rnn{i}.w_x"] = (d, 3 * h)
            shapes[f"rnn{i}.w_h"] = (h, 3 * h)
            shapes[f"rnn{i}.b"] = (3 * h,)
            d = h
        else:
            for direction in ("fwd", "bwd"):
                shapes[f"rnn{i}.{direction}.w_x"] = (d, 4 * h)
                shapes[f"rnn{i}.{direction}.w_h"] = (h, 4 * h)
                shapes[f"rnn{i}.{direction}.b"] = (4 * h,)
            d = 2 * h
    shapes["dense.w"] = (d, config.vocab_size)
    shapes["dense.b"] = (config.vocab_size,)
    return shapes


def expected_param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in expected_param_shapes(config).values())


def _init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    """Glorot-uniform kernels, zero biases, drawn in canonical order.

    LSTM forget-gate bias slices start at 1.0 when unit_forget_bias is set.
    """
    rng = Rng(config.init_seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in expected_param_shapes(config).items():
        if len(shape) == 1:
            b = np.zeros(shape)
            if config.unit_forget_bias and config.kind != "gru" and name != "dense.b":
                h = shape[0] // 4
                b[h : 2 * h] = 1.0
            params[name] = b
        else:
            params[name] = glorot_uniform(rng, shape)
    return params


def _stack_from_params(config: ModelConfig, params: dict[str, np.ndarray]) -> RecurrentStack:
    embedding = Embedding(params["embedding.table"])
    layers = []
    for i in range(len(config.layer_widths)):
        if config.kind == "lstm":
            layers.append(LstmCell(params[f"rnn{i}.w_x"], params[f"rnn{i}.w_h"],
                                   params[f"rnn{i}.b"]))
        elif config.kind == "gru":
            layers.append(GruCell(params[f"rnn{i}.w_x"], params[f"rnn{i}.w_h"],
                                  params[f"rnn{i}.b"]))
        else:
            layers.append(BidirectionalLstm(
                LstmCell(params[f"rnn{i}.fwd.w_x"], params[f"rnn{i}.fwd.w_h"],
                         params[f"rnn{i}.fwd.b"]),
                LstmCell(params[f"rnn{i}.bwd.w_x"], params[f"rnn{i}.bwd.w_h"],
                         params[f"rnn{i}.bwd.b"]),
            ))
    dense = Dense(params["dense.w"], params["dense.b"])
    return RecurrentStack(embedding, layers, config.dropout, dense)


class Model:
    """A configured stack plus its vocabulary."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, stack: RecurrentStack):
        self.config = config
        self.vocab = vocab
        self.stack = stack

    def params(self) -> dict[str, np.ndarray]:
        return self.stack.params()

    def param_count(self) -> int:
        return sum(p.size for p in self.params().values())

    def forward(self, indices: np.ndarray, train: bool = False,
                dropout_rng: Rng | None = None):
        if train and indices.shape[0] != self.config.batch_size:
            raise ShapeError(
                f"training batch is {indices.shape[0]} rows but the model is "
                f"configured for {self.config.batch_size}"
            )
        return self.stack.forward(indices, train=train, dropout_rng=dropout_rng)

    def backward(self, tape, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        return self.stack.backward(tape, dlogits)

    def init_state(self, batch: int = 1):
        return self.stack.init_state(batch)

    def step(self, indices: np.ndarray, state):
        return self.stack.step(indices, state)


def build_model(config: ModelConfig, vocab: Vocabulary) -> Model:
    if vocab.size != config.vocab_size:
        raise ConfigError(
            f"config.vocab_size is {config.vocab_size} but the vocabulary has "
            f"{vocab.size} characters"
        )
    return Model(config, vocab, _stack_from_params(config, _init_params(config)))


def _header_bytes(config: ModelConfig, vocab: Vocabulary) -> bytes:
    header = {
        "config": dataclasses.asdict(config),
        "vocab": [ord(c) for c in vocab.chars],
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(model: Model, path) -> None:
    """Write the checkpoint atomically (temp file + rename)."""
    header = _header_bytes(model.config, model.vocab)
    parts = [struct.pack("<I", len(header)), header]
    for arr in model.params().values():
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    payload = b"".join(parts)
    blob = _MAGIC + struct.pack("<I", _VERSION) + payload + struct.pack(
        "<I", zlib.crc32(payload)
    )
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _scan_structure(blob: bytes) -> list[tuple[int, tuple[int, ...]]]:
    """Walk the length fields; returns (data offset, dims) per parameter.

    Raises CheckpointFormatError, with the offset, on any structural problem.
    """
    n = len(blob)
    if n < 16:
        raise CheckpointFormatError(f"file is {n} bytes, too short for a checkpoint")
    pos = 8
    (header_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if pos + header_len > n - 4:
        raise CheckpointFormatError(f"header of {header_len} bytes overruns the file at offset {pos}")
    pos += header_len
    layout = []
    while pos < n - 4:
        if pos + 4 > n - 4:
            raise CheckpointFormatError(f"truncated parameter block at offset {pos}")
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if rank == 0 or rank > 3:
            raise CheckpointFormatError(f"parameter rank {rank} at offset {pos - 4} is not in 1..3")
        if pos + 4 * rank > n - 4:
            raise CheckpointFormatError(f"truncated dims at offset {pos}")
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims))
        if count == 0 or count > (1 << 32):
            raise CheckpointFormatError(f"implausible dims {dims} at offset {pos}")
        if pos + 4 * count > n - 4:
            raise CheckpointFormatError(f"truncated parameter data at offset {pos}")
        layout.append((pos, dims))
        pos += 4 * count
    if pos != n - 4:
        raise CheckpointFormatError(f"stray bytes before the checksum at offset {pos}")
    return layout


def load_checkpoint(path) -> Model:
    """Read, verify (magic, version, structure, CRC) and rebuild the model."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise CheckpointFormatError("bad magic: not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise CheckpointFormatError(f"unsupported version {version}, expected {_VERSION}")
    layout = _scan_structure(blob)
    payload = blob[8:-4]
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(payload) != stored_crc:
        raise CheckpointIntegrityError("payload CRC-32 mismatch")
    (header_len,) = struct.unpack_from("<I", blob, 8)
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        config = ModelConfig(**header["config"])
        codes = header["vocab"]
        vocab = Vocabulary(tuple(chr(c) for c in codes))
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"malformed header: {exc}") from exc
    if list(vocab.chars) != sorted(vocab.chars) or len(set(codes)) != len(codes):
        raise CheckpointIntegrityError("vocabulary is not sorted and unique")
    if vocab.size != config.vocab_size:
        raise CheckpointIntegrityError(
            f"header vocab has {vocab.size} characters, config says {config.vocab_size}"
        )
    expected = expected_param_shapes(config)
    if len(layout) != len(expected):
        raise CheckpointIntegrityError(
            f"checkpoint holds {len(layout)} parameters, config implies {len(expected)}"
        )
    params = {}
    for (offset, dims), (name, shape) in zip(layout, expected.items()):
        if dims != shape:
            raise CheckpointIntegrityError(
                f"parameter {name} has dims {dims}, expected {shape}"
            )
        count = int(np.prod(dims))
        raw = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        params[name] = raw.astype(np.float64).reshape(shape)
    return Model(config, vocab, _stack_from_params(config, params))


def rebuild_for_generation(model: Model) -> Model:
    """Same parameters, batch size 1, for stepwise sampling.

    Parameters are copied, so generating never perturbs a training model.
    """
    config = dataclasses.replace(model.config, batch_size=1)
    params = {name: p.copy() for name, p in model.params().items()}
    return Model(config, model.vocab, _stack_from_params(config, params))
