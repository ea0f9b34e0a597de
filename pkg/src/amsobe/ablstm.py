"""Attention-BLSTM gait feature extractor in plain numpy.

Each of the six channels is split into ``n`` windows of length ``T``. Every
channel runs its own forward and backward LSTM over the windows; per step
the two hidden states are concatenated and squashed by a sigmoid. The six
channel features (``2 n h`` each) are concatenated into ``f_blstm`` of
length ``d = 12 n h``, passed through scaled dot-product attention over the
coordinates of ``f_blstm``, then dropout, a fully connected layer, a
sigmoid, and softmax cross-entropy.

The twelve LSTMs are stored stacked (``W`` has shape ``(6, 2, 4, h, T)``;
axis 1 is direction, axis 2 is the gate in :data:`GATES` order) so forward
and backward passes are vectorized over channels and directions.
:meth:`AblstmNetwork.lstm` exposes a single LSTM as :class:`LstmParams`.

Forward and analytic backward passes are exact; :func:`gradient_check`
compares them against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .signal import GaitSignal, SegmentationError, denoise, segment
from .template import FeatureTemplate, Role

__all__ = [
    "GATES",
    "AblstmNetwork",
    "AttentionParams",
    "ClassifierParams",
    "Dims",
    "LstmParams",
    "LstmState",
    "attention",
    "blstm_channel",
    "classify_loss",
    "concat_features",
    "extract_template",
    "forward",
    "gradient_check",
    "init_network",
    "loss_and_grads",
    "lstm_step",
    "softmax",
    "train",
]

GATES = ("c", "f", "i", "o")
N_CHANNELS = 6


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class Dims:
    h: int
    n: int
    T: int
    n_c: int

    def __post_init__(self):
        for name in ("h", "n", "T", "n_c"):
            if getattr(self, name) < 1:
                raise ValueError(f"dimension {name} must be positive")

    @property
    def d(self) -> int:
        return 12 * self.n * self.h


@dataclass
class LstmParams:
    """One LSTM. ``W[g]`` is ``h x T``, ``U[g]`` is ``h x h``, ``b[g]`` an h-vector."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        h = self.b.shape[-1]
        if self.W.shape[:2] != (4, h) or self.W.ndim != 3:
            raise ValueError(f"W must have shape (4, h, T), got {self.W.shape}")
        if self.U.shape != (4, h, h):
            raise ValueError(f"U must have shape (4, {h}, {h}), got {self.U.shape}")
        if self.b.shape != (4, h):
            raise ValueError(f"b must have shape (4, h), got {self.b.shape}")

    @property
    def h(self) -> int:
        return self.b.shape[-1]

    @property
    def T(self) -> int:
        return self.W.shape[-1]

    @classmethod
    def zeros(cls, h: int, T: int) -> "LstmParams":
        return cls(np.zeros((4, h, T)), np.zeros((4, h, h)), np.zeros((4, h)))

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W, U, b)`` for gate ``name`` in ``c, f, i, o``."""
        g = GATES.index(name)
        return self.W[g], self.U[g], self.b[g]


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "LstmState":
        return cls(np.zeros(size), np.zeros(size))


@dataclass
class AttentionParams:
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    d_k: float | None = None

    def __post_init__(self):
        self.Wq, self.Wk, self.Wv = (np.asarray(w, dtype=np.float64) for w in (self.Wq, self.Wk, self.Wv))
        d = self.Wq.shape[0]
        for w in (self.Wq, self.Wk, self.Wv):
            if w.shape != (d, d):
                raise ValueError("attention weights must be square and of equal size")
        if self.d_k is None:
            self.d_k = float(d)
        if not self.d_k > 0:
            raise ValueError("d_k must be positive")

    @property
    def d(self) -> int:
        return self.Wq.shape[0]


@dataclass
class ClassifierParams:
    W: np.ndarray
    b: np.ndarray
    p: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError("classifier W must be n_c x d and b an n_c-vector")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")

    @property
    def n_c(self) -> int:
        return self.W.shape[0]


# -- single-LSTM reference operations ---------------------------------------


def lstm_step(params: LstmParams, x, prev: LstmState) -> LstmState:
    """One LSTM update; gate pre-activations are ``W x + U h_prev + b``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.T,):
        raise ValueError(f"input must have length {params.T}, got shape {x.shape}")
    if prev.h.shape != (params.h,) or prev.c.shape != (params.h,):
        raise ValueError(f"state must have size {params.h}")
    pre = params.W @ x + params.U @ prev.h + params.b
    c_tilde = np.tanh(pre[0])
    f, i, o = sigmoid(pre[1]), sigmoid(pre[2]), sigmoid(pre[3])
    c = f * prev.c + i * c_tilde
    return LstmState(h=o * np.tanh(c), c=c)


def blstm_channel(
    fwd: LstmParams,
    bwd: LstmParams,
    windows,
    init_fwd: LstmState | None = None,
    init_bwd: LstmState | None = None,
) -> np.ndarray:
    """Per-channel BLSTM feature of length ``2 n h``.

    Step ``t`` contributes ``sigmoid([h_fwd(t); h_bwd(t)])`` where the backward
    LSTM has consumed windows ``n-1 .. t``.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2 or windows.shape[0] == 0:
        raise ValueError("need a non-empty (n, T) array of windows")
    n = windows.shape[0]
    state = init_fwd or LstmState.zeros(fwd.h)
    h_fwd = []
    for t in range(n):
        state = lstm_step(fwd, windows[t], state)
        h_fwd.append(state.h)
    state = init_bwd or LstmState.zeros(bwd.h)
    h_bwd = [None] * n
    for t in reversed(range(n)):
        state = lstm_step(bwd, windows[t], state)
        h_bwd[t] = state.h
    return np.concatenate([sigmoid(np.concatenate([hf, hb])) for hf, hb in zip(h_fwd, h_bwd)])


def concat_features(per_channel: Sequence) -> np.ndarray:
    """Concatenate the six channel features in channel order."""
    parts = [np.asarray(f, dtype=np.float64).reshape(-1) for f in per_channel]
    if len(parts) != N_CHANNELS:
        raise ValueError(f"expected {N_CHANNELS} channel features, got {len(parts)}")
    if len({p.size for p in parts}) != 1:
        raise ValueError(f"channel features differ in length: {[p.size for p in parts]}")
    return np.concatenate(parts)


def _attention_parts(params: AttentionParams, f: np.ndarray):
    q, k, v = params.Wq @ f, params.Wk @ f, params.Wv @ f
    A = softmax(np.outer(q, k) / np.sqrt(params.d_k), axis=1)
    return q, k, v, A


def attention(params: AttentionParams, f_blstm) -> np.ndarray:
    """``softmax(outer(q, k) / sqrt(d_k)) @ v`` with row-wise softmax."""
    f = np.asarray(f_blstm, dtype=np.float64)
    if f.shape != (params.d,):
        raise ValueError(f"feature must have length {params.d}, got shape {f.shape}")
    if not params.d_k > 0:
        raise ValueError("d_k must be positive")
    _, _, v, A = _attention_parts(params, f)
    return A @ v


def _check_label(label, n_c: int) -> np.ndarray:
    y = np.asarray(label, dtype=np.float64)
    if y.shape != (n_c,) or not np.all((y == 0) | (y == 1)) or y.sum() != 1:
        raise ValueError("label must be a one-hot vector of length n_c")
    return y


def _apply_dropout(f_att: np.ndarray, p: float, mask) -> np.ndarray:
    if mask is None:
        return f_att
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != f_att.shape:
        raise ValueError("dropout mask must match the feature shape")
    return f_att * mask / (1.0 - p)


def classify_loss(params: ClassifierParams, f_att, label, dropout_mask=None) -> tuple[np.ndarray, float]:
    """Return ``(y_hat, loss)``; ``dropout_mask`` (keep=1) enables train-time dropout."""
    y = _check_label(label, params.n_c)
    f = _apply_dropout(np.asarray(f_att, dtype=np.float64), params.p, dropout_mask)
    y_hat = sigmoid(params.W @ f + params.b)
    loss = -float(y @ np.log(softmax(y_hat)))
    return y_hat, loss


# -- full network ----------------------------------------------------------------


@dataclass
class AblstmNetwork:
    """Stacked parameters for all twelve LSTMs plus attention and classifier."""

    dims: Dims
    W: np.ndarray  # (6, 2, 4, h, T)
    U: np.ndarray  # (6, 2, 4, h, h)
    b: np.ndarray  # (6, 2, 4, h)
    attention: AttentionParams
    classifier: ClassifierParams
    # initial (h, c) per channel and direction; zeros at inference
    h0: np.ndarray = None
    c0: np.ndarray = None

    def __post_init__(self):
        dm = self.dims
        shapes = {
            "W": (N_CHANNELS, 2, 4, dm.h, dm.T),
            "U": (N_CHANNELS, 2, 4, dm.h, dm.h),
            "b": (N_CHANNELS, 2, 4, dm.h),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        if self.attention.d != dm.d:
            raise ValueError(f"attention size {self.attention.d} != 12*n*h = {dm.d}")
        if self.classifier.W.shape != (dm.n_c, dm.d):
            raise ValueError(f"classifier must be {dm.n_c} x {dm.d}")
        for name in ("h0", "c0"):
            arr = getattr(self, name)
            arr = np.zeros((N_CHANNELS, 2, dm.h)) if arr is None else np.asarray(arr, dtype=np.float64)
            if arr.shape != (N_CHANNELS, 2, dm.h):
                raise ValueError(f"{name} must have shape (6, 2, h)")
            setattr(self, name, arr)

    def lstm(self, channel: int, direction: int) -> LstmParams:
        """View of one LSTM (``direction`` 0 forward, 1 backward)."""
        return LstmParams(self.W[channel, direction], self.U[channel, direction], self.b[channel, direction])

    def parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        """Trainable arrays in a fixed order; the arrays are live references."""
        yield "W", self.W
        yield "U", self.U
        yield "b", self.b
        yield "Wq", self.attention.Wq
        yield "Wk", self.attention.Wk
        yield "Wv", self.attention.Wv
        yield "Wfc", self.classifier.W
        yield "bfc", self.classifier.b

    def copy(self) -> "AblstmNetwork":
        return AblstmNetwork(
            dims=self.dims,
            W=self.W.copy(),
            U=self.U.copy(),
            b=self.b.copy(),
            attention=AttentionParams(
                self.attention.Wq.copy(), self.attention.Wk.copy(), self.attention.Wv.copy(), self.attention.d_k
            ),
            classifier=ClassifierParams(self.classifier.W.copy(), self.classifier.b.copy(), self.classifier.p),
            h0=self.h0.copy(),
            c0=self.c0.copy(),
        )

    def to_dict(self) -> dict:
        dm = self.dims
        return {
            "version": 1,
            "kind": "ablstm-model",
            "dims": {"h": dm.h, "n": dm.n, "T": dm.T, "n_c": dm.n_c},
            "dropout": self.classifier.p,
            "d_k": self.attention.d_k,
            "arrays": {name: arr.tolist() for name, arr in self.parameters()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AblstmNetwork":
        if data.get("kind") != "ablstm-model":
            raise ValueError(f"not a model checkpoint: kind={data.get('kind')!r}")
        dims = Dims(**{k: int(v) for k, v in data["dims"].items()})
        arr = {k: np.asarray(v, dtype=np.float64) for k, v in data["arrays"].items()}
        return cls(
            dims=dims,
            W=arr["W"],
            U=arr["U"],
            b=arr["b"],
            attention=AttentionParams(arr["Wq"], arr["Wk"], arr["Wv"], data.get("d_k")),
            classifier=ClassifierParams(arr["Wfc"], arr["bfc"], float(data.get("dropout", 0.0))),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "AblstmNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_network(
    dims: Dims,
    rng: np.random.Generator,
    *,
    dropout: float = 0.0,
    random_initial_state: bool = False,
) -> AblstmNetwork:
    """Uniform ``(-1/sqrt(h), 1/sqrt(h))`` initialization of every weight and bias."""
    bound = 1.0 / np.sqrt(dims.h)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    h, T, d = dims.h, dims.T, dims.d
    net = AblstmNetwork(
        dims=dims,
        W=u(N_CHANNELS, 2, 4, h, T),
        U=u(N_CHANNELS, 2, 4, h, h),
        b=u(N_CHANNELS, 2, 4, h),
        attention=AttentionParams(u(d, d), u(d, d), u(d, d)),
        classifier=ClassifierParams(u(dims.n_c, d), u(dims.n_c), dropout),
    )
    if random_initial_state:
        net.h0 = rng.standard_normal((N_CHANNELS, 2, h))
        net.c0 = rng.standard_normal((N_CHANNELS, 2, h))
    return net


@dataclass
class ForwardResult:
    f_blstm: np.ndarray
    f_att: np.ndarray
    y_hat: np.ndarray | None = None
    loss: float | None = None
    cache: dict = field(default_factory=dict, repr=False)


def _check_windows(net: AblstmNetwork, windows) -> np.ndarray:
    x = np.asarray(windows, dtype=np.float64)
    dm = net.dims
    if x.shape != (N_CHANNELS, dm.n, dm.T):
        raise ValueError(f"windows must have shape (6, {dm.n}, {dm.T}), got {x.shape}")
    return x


def forward(net: AblstmNetwork, windows, label=None, dropout_mask=None) -> ForwardResult:
    """Run the network on ``(6, n, T)`` windows; computes the loss if ``label`` is given."""
    x = _check_windows(net, windows)
    n, h = net.dims.n, net.dims.h
    # direction 1 reads the windows right to left
    xs = np.stack([x, x[:, ::-1]], axis=1)  # (6, 2, n, T)
    hs, cs = net.h0, net.c0
    steps = []
    H = np.empty((N_CHANNELS, 2, n, h))
    for t in range(n):
        xt = xs[:, :, t]
        pre = (
            np.einsum("cdgjk,cdk->cdgj", net.W, xt)
            + np.einsum("cdgjk,cdk->cdgj", net.U, hs)
            + net.b
        )
        c_tilde = np.tanh(pre[:, :, 0])
        gf, gi, go = sigmoid(pre[:, :, 1]), sigmoid(pre[:, :, 2]), sigmoid(pre[:, :, 3])
        c_new = gf * cs + gi * c_tilde
        tanh_c = np.tanh(c_new)
        h_new = go * tanh_c
        steps.append((xt, hs, cs, c_tilde, gf, gi, go, tanh_c))
        H[:, :, t] = h_new
        hs, cs = h_new, c_new

    # align backward states with window index
    Z = np.concatenate([H[:, 0], H[:, 1, ::-1]], axis=-1)  # (6, n, 2h)
    S = sigmoid(Z)
    f_blstm = S.reshape(-1)

    q, k, v, A = _attention_parts(net.attention, f_blstm)
    f_att = A @ v
    result = ForwardResult(f_blstm, f_att)
    result.cache.update(steps=steps, S=S, q=q, k=k, v=v, A=A)
    if label is not None:
        clf = net.classifier
        y = _check_label(label, clf.n_c)
        f_drop = _apply_dropout(f_att, clf.p, dropout_mask)
        y_hat = sigmoid(clf.W @ f_drop + clf.b)
        sm = softmax(y_hat)
        result.y_hat = y_hat
        result.loss = -float(y @ np.log(sm))
        result.cache.update(y=y, f_drop=f_drop, sm=sm, mask=dropout_mask)
    return result


def loss_and_grads(net: AblstmNetwork, windows, label, dropout_mask=None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients keyed like :meth:`AblstmNetwork.parameters`."""
    res = forward(net, windows, label, dropout_mask)
    cache = res.cache
    clf, att = net.classifier, net.attention
    n, h = net.dims.n, net.dims.h

    # classifier: loss = logsumexp(y_hat) - y . y_hat
    d_yhat = cache["sm"] - cache["y"]
    d_o = d_yhat * res.y_hat * (1.0 - res.y_hat)
    grads = {"Wfc": np.outer(d_o, cache["f_drop"]), "bfc": d_o}
    d_fatt = clf.W.T @ d_o
    if cache["mask"] is not None:
        d_fatt = d_fatt * np.asarray(cache["mask"]) / (1.0 - clf.p)

    # attention: f_att = A v, A = softmax(outer(q, k) / sqrt(d_k))
    q, k, v, A = cache["q"], cache["k"], cache["v"], cache["A"]
    f = res.f_blstm
    dv = A.T @ d_fatt
    dA = np.outer(d_fatt, v)
    dS = A * (dA - np.sum(dA * A, axis=1, keepdims=True)) / np.sqrt(att.d_k)
    dq = dS @ k
    dk = dS.T @ q
    grads["Wq"] = np.outer(dq, f)
    grads["Wk"] = np.outer(dk, f)
    grads["Wv"] = np.outer(dv, f)
    d_f = att.Wq.T @ dq + att.Wk.T @ dk + att.Wv.T @ dv

    # BLSTM output sigmoid
    S = cache["S"]
    dZ = d_f.reshape(S.shape) * S * (1.0 - S)
    dH = np.empty((N_CHANNELS, 2, n, h))
    dH[:, 0] = dZ[..., :h]
    dH[:, 1] = dZ[:, ::-1, h:]

    dW = np.zeros_like(net.W)
    dU = np.zeros_like(net.U)
    db = np.zeros_like(net.b)
    dh_next = np.zeros((N_CHANNELS, 2, h))
    dc_next = np.zeros((N_CHANNELS, 2, h))
    for t in reversed(range(n)):
        xt, h_prev, c_prev, c_tilde, gf, gi, go, tanh_c = cache["steps"][t]
        dh = dH[:, :, t] + dh_next
        d_go = dh * tanh_c
        dc = dc_next + dh * go * (1.0 - tanh_c**2)
        d_pre = np.stack(
            [
                dc * gi * (1.0 - c_tilde**2),
                dc * c_prev * gf * (1.0 - gf),
                dc * c_tilde * gi * (1.0 - gi),
                d_go * go * (1.0 - go),
            ],
            axis=2,
        )  # (6, 2, 4, h)
        dW += np.einsum("cdgj,cdk->cdgjk", d_pre, xt)
        dU += np.einsum("cdgj,cdk->cdgjk", d_pre, h_prev)
        db += d_pre
        dh_next = np.einsum("cdgjk,cdgj->cdk", net.U, d_pre)
        dc_next = dc * gf
    grads.update(W=dW, U=dU, b=db)
    return res.loss, grads


def _head_loss(net: AblstmNetwork, f_blstm: np.ndarray, y: np.ndarray) -> float:
    f_att = attention(net.attention, f_blstm)
    return classify_loss(net.classifier, f_att, y)[1]


def gradient_check(net: AblstmNetwork, windows, label, epsilon: float = 1e-3, *, points: int = 5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every scalar parameter is perturbed. ``points`` selects the 3-point
    stencil ``(f(x+e) - f(x-e)) / 2e`` or the 5-point stencil, whose O(e^4)
    truncation error keeps small gradients resolvable. Relative error is
    ``|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)``.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    if points not in (3, 5):
        raise ValueError("points must be 3 or 5")
    dm = net.dims
    if dm.h > 3 or dm.n > 3 or dm.n_c > 4:
        raise ValueError("gradient check is limited to h <= 3, n <= 3, n_c <= 4")
    if net.classifier.p > 0:
        raise ValueError("disable dropout before checking gradients")
    work = net.copy()
    _, analytic = loss_and_grads(work, windows, label)
    y = _check_label(label, dm.n_c)
    f_blstm = forward(work, windows).f_blstm

    def loss_of(name: str) -> float:
        if name in ("W", "U", "b"):
            return forward(work, windows, y).loss
        # attention and classifier weights do not influence f_blstm
        return _head_loss(work, f_blstm, y)

    offsets = (1.0, -1.0) if points == 3 else (1.0, -1.0, 2.0, -2.0)
    worst = 0.0
    for name, arr in work.parameters():
        flat = arr.reshape(-1)
        g_a = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            f = []
            for k in offsets:
                flat[idx] = orig + k * epsilon
                f.append(loss_of(name))
            flat[idx] = orig
            if points == 3:
                g_fd = (f[0] - f[1]) / (2.0 * epsilon)
            else:
                g_fd = (8.0 * (f[0] - f[1]) - (f[2] - f[3])) / (12.0 * epsilon)
            err = abs(g_a[idx] - g_fd) / max(1e-8, abs(g_a[idx]) + abs(g_fd))
            worst = max(worst, err)
    return worst


def train(
    net: AblstmNetwork,
    inputs: Sequence[np.ndarray],
    labels: Sequence[np.ndarray],
    steps: int = 10,
    learning_rate: float = 0.1,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Full-batch gradient descent on the mean loss; updates ``net`` in place.

    Returns the mean loss before each step plus the final loss
    (``steps + 1`` values). Dropout masks are drawn from ``rng`` when the
    network's dropout rate is positive.
    """
    if len(inputs) != len(labels) or not inputs:
        raise ValueError("need matching, non-empty inputs and labels")
    rng = rng if rng is not None else np.random.default_rng()
    p = net.classifier.p
    history = []
    for _ in range(steps):
        total = 0.0
        acc = {name: np.zeros_like(arr) for name, arr in net.parameters()}
        for x, y in zip(inputs, labels):
            mask = (rng.random(net.dims.d) >= p).astype(float) if p > 0 else None
            loss, grads = loss_and_grads(net, x, y, mask)
            total += loss
            for name in acc:
                acc[name] += grads[name]
        history.append(total / len(inputs))
        for name, arr in net.parameters():
            arr -= learning_rate * acc[name] / len(inputs)
    history.append(float(np.mean([forward(net, x, y).loss for x, y in zip(inputs, labels)])))
    return history


def extract_template(
    net: AblstmNetwork,
    signal: GaitSignal,
    role: Role | str = Role.REFERENCE,
    *,
    denoise_signal: bool = True,
) -> FeatureTemplate:
    """Denoise, segment with the model's window length and return ``f_att``.

    The first ``n`` windows are used; fewer windows is an error.
    """
    if denoise_signal and signal.length >= 2:
        signal = denoise(signal)
    seg = segment(signal, net.dims.T)
    if seg.count < net.dims.n:
        raise SegmentationError(f"signal yields {seg.count} windows, model needs {net.dims.n}")
    return FeatureTemplate(forward(net, seg.windows[:, : net.dims.n]).f_att, Role(role))
