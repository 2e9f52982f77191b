"""Elman network with multiplicative pre-activation noise, trained by stateful
truncated backpropagation through time.

The recurrent step is

    h_t = tanh(W_xh x_t + W_hh h_{t-1} + h_{t-1} * x_nu + b_h)
    y_t = softmax(W_hy h_t + b_y)

where x_nu is redrawn per step from N(0, nu) componentwise, so an inactive
neuron (h near 0) is untouched by the noise.  Plain SGD, per-component
gradient clipping, L1 on the weight matrices but not the biases, and hidden
state carried (gradients cut) across fixed-size windows.

This module is the readable float64/numpy reference; training and bulk
inference dispatch to the numba kernels in ``_kernels``, which are verified
against this implementation in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .langdata import SymbolStream


class NumericalFailure(RuntimeError):
    """Raised when a forward/backward pass produces non-finite values."""


@dataclass
class RnnConfig:
    n_hidden: int = 20
    nu: float = 1.0
    l1: float = 0.0004
    lr: float = 2.5
    clip: float = 0.002
    bptt_steps: int = 25
    epochs: int = 500
    min_epochs: int = 25
    noise_ramp: bool = False
    ramp_end: float = 0.5  # fraction of the epoch budget at which the ramp hits full nu
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_hidden < 1 or self.bptt_steps < 1 or self.epochs < 1:
            raise ValueError("n_hidden, bptt_steps and epochs must be >= 1")
        for name in ("nu", "l1", "lr", "clip"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.ramp_end <= 1.0:
            raise ValueError("ramp_end must be in (0, 1]")


@dataclass
class RnnModel:
    W_xh: np.ndarray  # (n_hidden, n_in)
    W_hh: np.ndarray  # (n_hidden, n_hidden)
    b_h: np.ndarray  # (n_hidden,)
    W_hy: np.ndarray  # (n_out, n_hidden)
    b_y: np.ndarray  # (n_out,)
    config: RnnConfig
    symbols: tuple[str, ...] = ()
    problem: str = ""

    @property
    def n_in(self) -> int:
        return self.W_xh.shape[1]

    @property
    def n_out(self) -> int:
        return self.W_hy.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W_xh.shape[0]

    def weights(self) -> dict[str, np.ndarray]:
        return {
            "W_xh": self.W_xh,
            "W_hh": self.W_hh,
            "b_h": self.b_h,
            "W_hy": self.W_hy,
            "b_y": self.b_y,
        }

    def copy(self) -> "RnnModel":
        return RnnModel(
            self.W_xh.copy(),
            self.W_hh.copy(),
            self.b_h.copy(),
            self.W_hy.copy(),
            self.b_y.copy(),
            replace(self.config),
            self.symbols,
            self.problem,
        )

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.n_hidden)


INIT_SCALE = 0.1  # uniform init range; not specified upstream


def init_model(
    config: RnnConfig,
    n_in: int,
    n_out: int,
    symbols: tuple[str, ...] = (),
    problem: str = "",
) -> RnnModel:
    rng = np.random.default_rng(config.rng_seed)
    h = config.n_hidden

    def u(*shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    return RnnModel(
        W_xh=u(h, n_in),
        W_hh=u(h, h),
        b_h=u(h),
        W_hy=u(n_out, h),
        b_y=u(n_out),
        config=config,
        symbols=tuple(symbols),
        problem=problem,
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def forward_step(
    model: RnnModel,
    h_prev: np.ndarray,
    x: int,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One recurrent step; noise is the x_nu draw, or None for nu=0 inference."""
    if not (0 <= x < model.n_in):
        raise ValueError("input symbol index out of range")
    z = model.W_xh[:, x] + model.W_hh @ h_prev + model.b_h
    if noise is not None:
        z = z + h_prev * noise
    h = np.tanh(z)
    y = softmax(model.W_hy @ h + model.b_y)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(y))):
        raise NumericalFailure("non-finite activation in forward step")
    return h, y


def forward_sequence(
    model: RnnModel,
    h0: np.ndarray,
    stream: SymbolStream,
    noise_on: bool = False,
    rng: np.random.Generator | None = None,
    record: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Run the network over a stream; returns (argmax predictions, h_final, record).

    record, when requested, holds h_t for every position.  Bulk noise-free
    runs go through the compiled kernel.
    """
    if stream.alphabet.size != model.n_in:
        raise ValueError("stream alphabet does not match model input size")
    xs = stream.inputs
    n = len(xs)
    nu = model.config.nu if noise_on else 0.0
    if nu == 0.0:
        preds, h_final, rec = _kernels.run_sequence(
            model.W_xh, model.W_hh, model.b_h, model.W_hy, model.b_y,
            xs, np.asarray(h0, dtype=np.float64), record,
        )
        if preds.min(initial=0) < 0:
            raise NumericalFailure("non-finite activation in forward sequence")
        return preds, h_final, (rec if record else None)
    if rng is None:
        rng = np.random.default_rng(model.config.rng_seed)
    h = np.asarray(h0, dtype=np.float64)
    preds = np.empty(n, dtype=np.int64)
    rec = np.empty((n, model.n_hidden)) if record else None
    for t in range(n):
        draw = nu * rng.standard_normal(model.n_hidden)
        h, y = forward_step(model, h, int(xs[t]), draw)
        preds[t] = int(np.argmax(y))
        if record:
            rec[t] = h
    return preds, h, rec


def accuracy(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean(predictions == targets)) if len(targets) else 1.0


def loss_and_gradients(
    model: RnnModel,
    xs: np.ndarray,
    targets: np.ndarray,
    h_in: np.ndarray,
    noise: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Loss and parameter gradients over one window of at most bptt_steps symbols.

    noise is the full (T, n_hidden) matrix of x_nu draws, treated as constants
    in the backward pass.  Loss is the mean per-symbol cross-entropy plus the
    L1 penalty on the three weight matrices.
    """
    T = len(xs)
    if T > model.config.bptt_steps:
        raise ValueError("window longer than bptt_steps")
    hs = [np.asarray(h_in, dtype=np.float64)]
    ys = []
    for t in range(T):
        draw = noise[t] if noise is not None else None
        h, y = forward_step(model, hs[-1], int(xs[t]), draw)
        hs.append(h)
        ys.append(y)
    ce = -np.mean([np.log(ys[t][targets[t]]) for t in range(T)])
    l1 = model.config.l1
    reg = l1 * (
        np.abs(model.W_xh).sum() + np.abs(model.W_hh).sum() + np.abs(model.W_hy).sum()
    )
    loss = float(ce + reg)
    if not np.isfinite(loss):
        raise NumericalFailure("non-finite loss")

    g = {k: np.zeros_like(v) for k, v in model.weights().items()}
    dh_next = np.zeros(model.n_hidden)
    for t in range(T - 1, -1, -1):
        dy = ys[t].copy()
        dy[targets[t]] -= 1.0
        dy /= T
        g["W_hy"] += np.outer(dy, hs[t + 1])
        g["b_y"] += dy
        dh = model.W_hy.T @ dy + dh_next
        dz = (1.0 - hs[t + 1] ** 2) * dh
        g["W_xh"][:, int(xs[t])] += dz
        g["W_hh"] += np.outer(dz, hs[t])
        g["b_h"] += dz
        dh_next = model.W_hh.T @ dz
        if noise is not None:
            dh_next = dh_next + noise[t] * dz
    for k in ("W_xh", "W_hh", "W_hy"):
        g[k] += l1 * np.sign(model.weights()[k])
    return loss, g, hs[-1]


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    val_acc: float
    val_acc_noisy: float
    nu: float


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)
    converged: bool = False
    failed: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,loss,train_acc,val_acc,val_acc_noisy,nu"]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.loss:.10g},{r.train_acc:.10g},"
                f"{r.val_acc:.10g},{r.val_acc_noisy:.10g},{r.nu:.10g}"
            )
        return "\n".join(lines) + "\n"


def train(
    model: RnnModel,
    train_stream: SymbolStream,
    val_stream: SymbolStream,
    callbacks: list[Callable[[EpochRecord], None]] | None = None,
    stop_check: Callable[[RnnModel], bool] | None = None,
) -> TrainingTrace:
    """Stateful truncated-BPTT SGD training, modifying the model in place.

    One gradient update per consecutive window; per-component gradients are
    clamped to [-clip, clip] before the step.  Validation accuracy uses
    nu = 0; the noise-active accuracy is reported alongside.

    Convergence means 100% noise-free accuracy on both streams: the noisy
    pass is stochastic and fluctuates a fraction of a percent below 1.0 even
    for a fully binarized network, so it is reported but not gated on.
    Training stops early once converged, but never before min_epochs at the
    full noise level, so the network has at least briefly been annealed by
    the noise rather than merely fitting the clean dynamics.  Callers that
    need a specific annealed property (saturation, extractability) should
    demand it through stop_check rather than by raising min_epochs.

    stop_check, when given, must also approve the model before the early
    stop fires.  The noisy dynamics drift in and out of desirable regimes
    (e.g. fully binarized activations), so callers use it to halt at an
    epoch where the property of interest actually holds instead of wherever
    the epoch budget happens to run out.
    """
    cfg = model.config
    # seed-derivation rule: stream [rng_seed, 1] drives all training-time noise
    rng = np.random.default_rng([cfg.rng_seed, 1])
    trace = TrainingTrace()
    n = len(train_stream)
    dummy = np.zeros((1, cfg.n_hidden))
    # the ramp holds nu at zero for the first tenth of the budget (so the
    # clean solution can form undisturbed; rare transitions are lost even
    # under mild noise), reaches full noise at ramp_end, and anneals at
    # full strength for the remainder.  Slower ramps give rarely-exercised
    # transitions more time to harden at each noise level.
    ramp_epochs = max(int(cfg.epochs * cfg.ramp_end), cfg.epochs // 10 + 1) if cfg.noise_ramp else 0
    ramp_start = cfg.epochs // 10 if cfg.noise_ramp else 0
    for epoch in range(1, cfg.epochs + 1):
        if ramp_epochs:
            frac = (epoch - ramp_start) / (ramp_epochs - ramp_start)
            nu = cfg.nu * min(1.0, max(0.0, frac))
        else:
            nu = cfg.nu
        noise = rng.standard_normal((n, cfg.n_hidden)) if nu > 0 else dummy
        loss_sum, n_correct, n_windows, ok = _kernels.train_epoch(
            model.W_xh, model.W_hh, model.b_h, model.W_hy, model.b_y,
            train_stream.inputs, train_stream.targets, noise,
            nu, cfg.bptt_steps, cfg.lr, cfg.clip, cfg.l1,
        )
        if not ok:
            trace.failed = True
            return trace
        train_acc = n_correct / n
        val_preds, _, _ = forward_sequence(model, model.zero_state(), val_stream)
        val_acc = accuracy(val_preds, val_stream.targets)
        if nu > 0:
            val_noise = rng.standard_normal((len(val_stream), cfg.n_hidden))
            noisy_preds = _kernels.run_sequence_noise(
                model.W_xh, model.W_hh, model.b_h, model.W_hy, model.b_y,
                val_stream.inputs, val_noise, nu,
            )
            val_acc_noisy = accuracy(noisy_preds, val_stream.targets)
        else:
            val_acc_noisy = val_acc
        rec = EpochRecord(epoch, loss_sum / max(n_windows, 1), train_acc, val_acc, val_acc_noisy, nu)
        trace.records.append(rec)
        for cb in callbacks or ():
            cb(rec)
        stop_after = min(ramp_epochs + cfg.min_epochs, cfg.epochs)
        if val_acc == 1.0 and nu >= cfg.nu and epoch >= stop_after:
            clean_preds, _, _ = forward_sequence(model, model.zero_state(), train_stream)
            if accuracy(clean_preds, train_stream.targets) == 1.0 and (
                stop_check is None or stop_check(model)
            ):
                trace.converged = True
                break
    return trace


# ---------------------------------------------------------------------------
# Model file format: versioned self-describing text, bit-exact round trip.
# ---------------------------------------------------------------------------

MODEL_FORMAT_HEADER = "# rnn2dfa-model v1"

_CONFIG_FIELDS = (
    ("n_hidden", int),
    ("nu", float),
    ("l1", float),
    ("lr", float),
    ("clip", float),
    ("bptt_steps", int),
    ("epochs", int),
    ("min_epochs", int),
    ("noise_ramp", lambda s: s in ("1", "True", "true")),
    ("ramp_end", float),
    ("rng_seed", int),
)


def model_to_text(model: RnnModel) -> str:
    lines = [MODEL_FORMAT_HEADER]
    lines.append(f"problem {model.problem or '-'}")
    lines.append("symbols " + " ".join(model.symbols))
    for name, _ in _CONFIG_FIELDS:
        value = getattr(model.config, name)
        if isinstance(value, bool):
            value = int(value)
        lines.append(f"config {name} {value!r}")
    for name, mat in model.weights().items():
        arr = np.atleast_2d(mat)
        lines.append(f"matrix {name} {arr.shape[0]} {arr.shape[1]}")
        for row in arr:
            lines.append(" ".join(v.hex() for v in row))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> RnnModel:
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_FORMAT_HEADER:
        raise ValueError("not a rnn2dfa model file (bad or missing header)")
    problem = ""
    symbols: tuple[str, ...] = ()
    cfg_kwargs: dict = {}
    matrices: dict[str, np.ndarray] = {}
    i = 1
    try:
        while i < len(lines):
            line = lines[i]
            i += 1
            if not line.strip():
                continue
            kind, rest = line.split(" ", 1)
            if kind == "problem":
                problem = "" if rest == "-" else rest
            elif kind == "symbols":
                symbols = tuple(rest.split())
            elif kind == "config":
                name, value = rest.split(" ", 1)
                caster = dict(_CONFIG_FIELDS)[name]
                cfg_kwargs[name] = caster(value.strip("'\""))
            elif kind == "matrix":
                name, nr, nc = rest.split()
                nr, nc = int(nr), int(nc)
                rows = []
                for _ in range(nr):
                    rows.append([float.fromhex(v) for v in lines[i].split()])
                    if len(rows[-1]) != nc:
                        raise ValueError(f"matrix {name}: wrong row width")
                    i += 1
                matrices[name] = np.array(rows, dtype=np.float64)
            else:
                raise ValueError(f"unknown record kind {kind!r}")
    except (IndexError, KeyError) as exc:
        raise ValueError(f"truncated or malformed model file: {exc}") from exc
    missing = {"W_xh", "W_hh", "b_h", "W_hy", "b_y"} - set(matrices)
    if missing:
        raise ValueError(f"model file missing matrices: {sorted(missing)}")
    config = RnnConfig(**cfg_kwargs)
    return RnnModel(
        W_xh=matrices["W_xh"],
        W_hh=matrices["W_hh"],
        b_h=matrices["b_h"].ravel(),
        W_hy=matrices["W_hy"],
        b_y=matrices["b_y"].ravel(),
        config=config,
        symbols=symbols,
        problem=problem,
    )


def save_model(model: RnnModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> RnnModel:
    with open(path) as fh:
        return model_from_text(fh.read())
