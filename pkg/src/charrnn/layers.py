"""Layers with hand-derived forward and backward passes.

Everything operates on batch-major arrays: token indices are [B, L], activations
are [B, L, features]. Recurrent layers scan left to right from a zero state;
the bidirectional wrapper additionally scans right to left over the same input
and concatenates both directions. Backward passes are exact reverse-mode
derivatives of the forward code (backpropagation through time), written out
gate by gate.

Gate layouts are fixed so checkpoints stay readable across versions:
  LSTM kernel columns: (input i, forget f, candidate g, output o), each H wide.
  GRU kernel columns:  (update z, reset r, candidate n), each H wide.

LSTM step:   i,f,o = sigmoid(x W_x + h W_h + b)[gates], g = tanh(...)
             c' = f*c + i*g,  h' = o*tanh(c')
GRU step:    z,r = sigmoid(x W_x + h W_h + b)[gates]
             n = tanh(x Wx_n + (r*h) Wh_n + b_n),  h' = z*h + (1-z)*n
Note the GRU candidate applies the reset gate to h before its recurrent
matmul, and z is a "keep" gate (z = 1 preserves the old state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, VocabularyError
from .numerics import Rng, sigmoid


def glorot_uniform(rng: Rng, shape: tuple[int, int]) -> np.ndarray:
    """Uniform(-l, l) with l = sqrt(6 / (fan_in + fan_out)) from the 2-D shape."""
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(shape, -limit, limit)


class Embedding:
    """Lookup table [V, E]; forward is a row gather, backward a scatter-add."""

    def __init__(self, table: np.ndarray):
        self.table = table

    @classmethod
    def create(cls, rng: Rng, vocab_size: int, embed_dim: int) -> "Embedding":
        return cls(glorot_uniform(rng, (vocab_size, embed_dim)))

    def forward(self, indices: np.ndarray) -> np.ndarray:
        v = self.table.shape[0]
        if indices.size and (indices.min() < 0 or indices.max() >= v):
            bad = int(indices.reshape(-1)[
                np.argmax((indices < 0) | (indices >= v))
            ])
            raise VocabularyError(f"embedding index {bad} out of range [0, {v})")
        return self.table[indices]

    def backward(self, indices: np.ndarray, dout: np.ndarray) -> np.ndarray:
        # d loss / d table[r] is the sum of upstream grads wherever row r occurs
        dtable = np.zeros_like(self.table)
        np.add.at(dtable, indices.reshape(-1), dout.reshape(-1, self.table.shape[1]))
        return dtable

    def params(self):
        return {"table": self.table}


class LstmCell:
    """One LSTM direction: kernels w_x [D, 4H], w_h [H, 4H], bias b [4H]."""

    def __init__(self, w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray):
        self.w_x = w_x
        self.w_h = w_h
        self.b = b

    @classmethod
    def create(cls, rng: Rng, input_dim: int, hidden: int,
               unit_forget_bias: bool = True) -> "LstmCell":
        w_x = glorot_uniform(rng, (input_dim, 4 * hidden))
        w_h = glorot_uniform(rng, (hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        if unit_forget_bias:
            b[hidden : 2 * hidden] = 1.0
        return cls(w_x, w_h, b)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    @property
    def output_size(self) -> int:
        return self.hidden_size

    def init_state(self, batch: int):
        h = self.hidden_size
        return np.zeros((batch, h)), np.zeros((batch, h))

    def _gates(self, a: np.ndarray, c_prev: np.ndarray):
        hs = self.hidden_size
        i = sigmoid(a[:, :hs])
        f = sigmoid(a[:, hs : 2 * hs])
        g = np.tanh(a[:, 2 * hs : 3 * hs])
        o = sigmoid(a[:, 3 * hs :])
        c = f * c_prev + i * g
        return i, f, g, o, c

    def step(self, x: np.ndarray, state):
        h_prev, c_prev = state
        a = x @ self.w_x + h_prev @ self.w_h + self.b
        _, _, _, o, c = self._gates(a, c_prev)
        h = o * np.tanh(c)
        return h, (h, c)

    def forward_seq(self, xs: np.ndarray, train: bool):
        """Scan the whole sequence from a zero state.

        Returns (hs [B, L, H], tape). The tape is None unless train is set.
        The input projection xs @ w_x has no recurrence and is hoisted out of
        the time loop.
        """
        batch, length, _ = xs.shape
        hs_n = self.hidden_size
        ax = xs.reshape(batch * length, -1) @ self.w_x
        ax = ax.reshape(batch, length, 4 * hs_n)
        i_s = np.empty((batch, length, hs_n))
        f_s = np.empty_like(i_s)
        g_s = np.empty_like(i_s)
        o_s = np.empty_like(i_s)
        c_s = np.empty_like(i_s)
        hs = np.empty_like(i_s)
        h = np.zeros((batch, hs_n))
        c = np.zeros((batch, hs_n))
        for t in range(length):
            a = ax[:, t] + h @ self.w_h + self.b
            i, f, g, o, c = self._gates(a, c)
            h = o * np.tanh(c)
            i_s[:, t], f_s[:, t], g_s[:, t], o_s[:, t] = i, f, g, o
            c_s[:, t], hs[:, t] = c, h
        tape = None
        if train:
            tape = {"xs": xs, "i": i_s, "f": f_s, "g": g_s, "o": o_s,
                    "c": c_s, "h": hs}
        return hs, tape

    def backward_seq(self, tape, dhs: np.ndarray):
        """BPTT given d loss / d hs. Returns (dxs, grads)."""
        xs, i_s, f_s, g_s, o_s, c_s, hs = (
            tape["xs"], tape["i"], tape["f"], tape["g"], tape["o"],
            tape["c"], tape["h"],
        )
        batch, length, hs_n = dhs.shape
        zeros = np.zeros((batch, hs_n))
        dw_x = np.zeros_like(self.w_x)
        dw_h = np.zeros_like(self.w_h)
        db = np.zeros_like(self.b)
        dxs = np.empty_like(xs)
        dh_next = zeros
        dc_next = zeros
        for t in range(length - 1, -1, -1):
            i, f, g, o, c = i_s[:, t], f_s[:, t], g_s[:, t], o_s[:, t], c_s[:, t]
            c_prev = c_s[:, t - 1] if t > 0 else zeros
            h_prev = hs[:, t - 1] if t > 0 else zeros
            tc = np.tanh(c)
            dh = dhs[:, t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            dw_x += xs[:, t].T @ da
            dw_h += h_prev.T @ da
            db += da.sum(axis=0)
            dxs[:, t] = da @ self.w_x.T
            dh_next = da @ self.w_h.T
            dc_next = dc * f
        return dxs, {"w_x": dw_x, "w_h": dw_h, "b": db}

    def params(self):
        return {"w_x": self.w_x, "w_h": self.w_h, "b": self.b}


class GruCell:
    """One GRU direction: kernels w_x [D, 3H], w_h [H, 3H], bias b [3H]."""

    def __init__(self, w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray):
        self.w_x = w_x
        self.w_h = w_h
        self.b = b

    @classmethod
    def create(cls, rng: Rng, input_dim: int, hidden: int) -> "GruCell":
        return cls(
            glorot_uniform(rng, (input_dim, 3 * hidden)),
            glorot_uniform(rng, (hidden, 3 * hidden)),
            np.zeros(3 * hidden),
        )

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    @property
    def output_size(self) -> int:
        return self.hidden_size

    def init_state(self, batch: int):
        return np.zeros((batch, self.hidden_size))

    def _step_parts(self, ax: np.ndarray, h_prev: np.ndarray):
        hs = self.hidden_size
        a_zr = ax[:, : 2 * hs] + h_prev @ self.w_h[:, : 2 * hs] + self.b[: 2 * hs]
        z = sigmoid(a_zr[:, :hs])
        r = sigmoid(a_zr[:, hs:])
        rh = r * h_prev
        n = np.tanh(ax[:, 2 * hs :] + rh @ self.w_h[:, 2 * hs :] + self.b[2 * hs :])
        h = z * h_prev + (1.0 - z) * n
        return z, r, rh, n, h

    def step(self, x: np.ndarray, state):
        h_prev = state
        _, _, _, _, h = self._step_parts(x @ self.w_x, h_prev)
        return h, h

    def forward_seq(self, xs: np.ndarray, train: bool):
        batch, length, _ = xs.shape
        hs_n = self.hidden_size
        ax = (xs.reshape(batch * length, -1) @ self.w_x).reshape(batch, length, 3 * hs_n)
        z_s = np.empty((batch, length, hs_n))
        r_s = np.empty_like(z_s)
        rh_s = np.empty_like(z_s)
        n_s = np.empty_like(z_s)
        hs = np.empty_like(z_s)
        h = np.zeros((batch, hs_n))
        for t in range(length):
            z, r, rh, n, h = self._step_parts(ax[:, t], h)
            z_s[:, t], r_s[:, t], rh_s[:, t], n_s[:, t], hs[:, t] = z, r, rh, n, h
        tape = None
        if train:
            tape = {"xs": xs, "z": z_s, "r": r_s, "rh": rh_s, "n": n_s, "h": hs}
        return hs, tape

    def backward_seq(self, tape, dhs: np.ndarray):
        xs, z_s, r_s, rh_s, n_s, hs = (
            tape["xs"], tape["z"], tape["r"], tape["rh"], tape["n"], tape["h"],
        )
        batch, length, hs_n = dhs.shape
        zeros = np.zeros((batch, hs_n))
        w_h_zr = self.w_h[:, : 2 * hs_n]
        w_h_n = self.w_h[:, 2 * hs_n :]
        dw_x = np.zeros_like(self.w_x)
        dw_h = np.zeros_like(self.w_h)
        db = np.zeros_like(self.b)
        dxs = np.empty_like(xs)
        dh_next = zeros
        for t in range(length - 1, -1, -1):
            z, r, rh, n = z_s[:, t], r_s[:, t], rh_s[:, t], n_s[:, t]
            h_prev = hs[:, t - 1] if t > 0 else zeros
            dh = dhs[:, t] + dh_next
            dz = dh * (h_prev - n)
            dn = dh * (1.0 - z)
            da_n = dn * (1.0 - n * n)
            drh = da_n @ w_h_n.T
            dr = drh * h_prev
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            da_zr = np.concatenate([da_z, da_r], axis=1)
            dh_prev = dh * z + drh * r + da_zr @ w_h_zr.T
            da = np.concatenate([da_zr, da_n], axis=1)
            dw_x += xs[:, t].T @ da
            dw_h[:, : 2 * hs_n] += h_prev.T @ da_zr
            dw_h[:, 2 * hs_n :] += rh.T @ da_n
            db += da.sum(axis=0)
            dxs[:, t] = da @ self.w_x.T
            dh_next = dh_prev
        return dxs, {"w_x": dw_x, "w_h": dw_h, "b": db}

    def params(self):
        return {"w_x": self.w_x, "w_h": self.w_h, "b": self.b}


class BidirectionalLstm:
    """Two LSTM cells over the same input, outputs concatenated to width 2H.

    The forward cell scans t = 0..L-1, the backward cell scans t = L-1..0, so
    position t of the output has read the entire sequence. When a target
    stream is the input shifted by one, the backward half therefore sees the
    targets themselves; training converges almost immediately and the layer
    is useless for autoregressive generation. That leakage is inherent to the
    construction and is kept, not patched.

    During single-character generation both cells step on the same length-1
    input and carry their states forward; the backward direction degenerates
    to a second forward scan.
    """

    def __init__(self, fwd: LstmCell, bwd: LstmCell):
        if fwd.hidden_size != bwd.hidden_size:
            raise ConfigError(
                f"direction widths differ: {fwd.hidden_size} vs {bwd.hidden_size}"
            )
        self.fwd = fwd
        self.bwd = bwd

    @classmethod
    def create(cls, rng: Rng, input_dim: int, hidden: int,
               unit_forget_bias: bool = True) -> "BidirectionalLstm":
        return cls(
            LstmCell.create(rng, input_dim, hidden, unit_forget_bias),
            LstmCell.create(rng, input_dim, hidden, unit_forget_bias),
        )

    @property
    def hidden_size(self) -> int:
        return self.fwd.hidden_size

    @property
    def output_size(self) -> int:
        return 2 * self.hidden_size

    def init_state(self, batch: int):
        return self.fwd.init_state(batch), self.bwd.init_state(batch)

    def step(self, x: np.ndarray, state):
        state_f, state_b = state
        hf, state_f = self.fwd.step(x, state_f)
        hb, state_b = self.bwd.step(x, state_b)
        return np.concatenate([hf, hb], axis=1), (state_f, state_b)

    def forward_seq(self, xs: np.ndarray, train: bool):
        hf, tape_f = self.fwd.forward_seq(xs, train)
        hb_rev, tape_b = self.bwd.forward_seq(xs[:, ::-1], train)
        out = np.concatenate([hf, hb_rev[:, ::-1]], axis=2)
        tape = {"f": tape_f, "b": tape_b} if train else None
        return out, tape

    def backward_seq(self, tape, dhs: np.ndarray):
        h = self.hidden_size
        dxs_f, grads_f = self.fwd.backward_seq(tape["f"], dhs[:, :, :h])
        dxs_b_rev, grads_b = self.bwd.backward_seq(
            tape["b"], np.ascontiguousarray(dhs[:, ::-1, h:])
        )
        dxs = dxs_f + dxs_b_rev[:, ::-1]
        grads = {f"fwd.{k}": v for k, v in grads_f.items()}
        grads.update({f"bwd.{k}": v for k, v in grads_b.items()})
        return dxs, grads

    def params(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.params().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.params().items()})
        return out


class Dense:
    """Affine map on the last axis; no activation (the loss owns the softmax)."""

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w
        self.b = b

    @classmethod
    def create(cls, rng: Rng, input_dim: int, output_dim: int) -> "Dense":
        return cls(glorot_uniform(rng, (input_dim, output_dim)), np.zeros(output_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def backward(self, x: np.ndarray, dout: np.ndarray):
        width = self.w.shape[0]
        x2 = x.reshape(-1, width)
        d2 = dout.reshape(-1, self.w.shape[1])
        return dout @ self.w.T, {"w": x2.T @ d2, "b": d2.sum(axis=0)}

    def params(self):
        return {"w": self.w, "b": self.b}


def dropout_forward(x: np.ndarray, rate: float, train: bool, rng: Rng | None):
    """Inverted dropout: zero units with probability rate, scale the rest.

    Eval mode (or rate 0) is an exact identity. Returns (output, mask) where
    mask is None when nothing was dropped.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = (rng.uniform(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask):
    return dout if mask is None else dout * mask


@dataclass
class StackTape:
    """Cached activations from one training-mode forward pass."""

    indices: np.ndarray
    cell_tapes: list
    masks: list
    dense_input: np.ndarray


class RecurrentStack:
    """embedding -> recurrent layers (dropout after each, train only) -> dense."""

    def __init__(self, embedding: Embedding, recurrent: list, dropout_rate: float,
                 dense: Dense):
        self.embedding = embedding
        self.recurrent = recurrent
        self.dropout_rate = dropout_rate
        self.dense = dense

    def forward(self, indices: np.ndarray, train: bool = False,
                dropout_rng: Rng | None = None):
        """Full-sequence forward. Returns (logits [B, L, V], tape or None)."""
        x = self.embedding.forward(indices)
        cell_tapes = []
        masks = []
        for layer in self.recurrent:
            hs, tape = layer.forward_seq(x, train)
            x, mask = dropout_forward(hs, self.dropout_rate, train, dropout_rng)
            cell_tapes.append(tape)
            masks.append(mask)
        logits = self.dense.forward(x)
        if not train:
            return logits, None
        return logits, StackTape(indices, cell_tapes, masks, x)

    def backward(self, tape: StackTape, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every parameter, keyed like params()."""
        if tape is None:
            raise ValueError("backward needs the tape from a training-mode forward")
        grads = {}
        dx, dense_grads = self.dense.backward(tape.dense_input, dlogits)
        for k, v in dense_grads.items():
            grads[f"dense.{k}"] = v
        for i in range(len(self.recurrent) - 1, -1, -1):
            dx = dropout_backward(dx, tape.masks[i])
            dx, layer_grads = self.recurrent[i].backward_seq(tape.cell_tapes[i], dx)
            for k, v in layer_grads.items():
                grads[f"rnn{i}.{k}"] = v
        grads["embedding.table"] = self.embedding.backward(tape.indices, dx)
        return {name: grads[name] for name in self.params()}

    def init_state(self, batch: int):
        return [layer.init_state(batch) for layer in self.recurrent]

    def step(self, indices: np.ndarray, state):
        """Single-character forward for generation: [B] indices -> [B, V] logits."""
        x = self.embedding.forward(indices)
        new_state = []
        for layer, st in zip(self.recurrent, state):
            x, st = layer.step(x, st)
            new_state.append(st)
        return self.dense.forward(x), new_state

    def params(self) -> dict[str, np.ndarray]:
        """Parameters in canonical order: embedding, each layer, dense."""
        out = {"embedding.table": self.embedding.table}
        for i, layer in enumerate(self.recurrent):
            for k, v in layer.params().items():
                out[f"rnn{i}.{k}"] = v
        for k, v in self.dense.params().items():
            out[f"dense.{k}"] = v
        return out
