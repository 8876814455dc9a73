"""Siamese few-shot model over embedded events.

One shared three-layer fully-connected ReLU subnet maps each event vector
into a feature space; the Euclidean distance between two mapped vectors
measures dissimilarity.  Training minimizes the contrastive loss

    L = (1 - y) * D^2 / 2 + y * max(0, m - D)^2 / 2

with y=0 for similar pairs and y=1 for dissimilar ones, pulling similar
pairs together and pushing dissimilar pairs past the margin m.  Gradients
are exact analytic backprop; ReLU takes subgradient 0 at 0, and the
distance gradient is defined as 0 at D=0.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ModelFormatError, TrainingDivergedError
from .pairs import PairDataset
from .seeding import substream

_MAGIC = "provsem-siamese"
_FORMAT_VERSION = 1

_PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass
class SubnetParams:
    """Shared subnet weights; both branches read the same store."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        hidden, input_dim = self.w1.shape
        expect = {
            "b1": (hidden,),
            "w2": (hidden, hidden),
            "b2": (hidden,),
            "w3": (hidden, hidden),
            "b3": (hidden,),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ConfigError("parameter %s has shape %s, expected %s"
                                  % (name, getattr(self, name).shape, shape))
        for name in _PARAM_NAMES:
            if not np.isfinite(getattr(self, name)).all():
                raise ConfigError("parameter %s contains non-finite values" % name)

    @property
    def input_dim(self):
        return self.w1.shape[1]

    @property
    def hidden_dim(self):
        return self.w1.shape[0]

    def arrays(self):
        return [getattr(self, name) for name in _PARAM_NAMES]

    def copy(self):
        return SubnetParams(*(a.copy() for a in self.arrays()))

    @classmethod
    def zeros_like(cls, other):
        return cls(*(np.zeros_like(a) for a in other.arrays()))

    @classmethod
    def initialize(cls, input_dim, hidden_dim, rng):
        """He-style uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""

        def layer(fan_out, fan_in):
            limit = np.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=(fan_out, fan_in))

        return cls(
            w1=layer(hidden_dim, input_dim),
            b1=np.zeros(hidden_dim),
            w2=layer(hidden_dim, hidden_dim),
            b2=np.zeros(hidden_dim),
            w3=layer(hidden_dim, hidden_dim),
            b3=np.zeros(hidden_dim),
        )


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 1.0
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 50
    seed: int = 0
    optimizer: str = "adam"
    hidden_dim: int = 128
    final_activation: str = "relu"

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.hidden_dim < 1:
            raise ConfigError("invalid training sizes")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("optimizer must be 'sgd' or 'adam'")
        if self.final_activation not in ("relu", "linear"):
            raise ConfigError("final_activation must be 'relu' or 'linear'")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        return cls(**raw)


@dataclass
class SiameseModel:
    params: SubnetParams
    margin: float
    final_activation: str = "relu"
    threshold: float = None
    train_meta: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)

    @property
    def input_dim(self):
        return self.params.input_dim


def _forward_cached(params, x, final_activation):
    z1 = x @ params.w1.T + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.w2.T + params.b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ params.w3.T + params.b3
    out = np.maximum(z3, 0.0) if final_activation == "relu" else z3
    return out, (x, z1, h1, z2, h2, z3)


def forward_subnet(params: SubnetParams, x, final_activation: str = "relu"):
    """Map input vectors through the shared subnet; batched or single."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if arr.ndim not in (1, 2) or arr.shape[-1] != params.input_dim:
        raise DataError(
            "input must have %d features, got shape %s" % (params.input_dim, arr.shape)
        )
    out, _ = _forward_cached(params, np.atleast_2d(arr), final_activation)
    return out[0] if single else out


def pair_distance(params: SubnetParams, a, b, final_activation: str = "relu"):
    """Euclidean distance between the subnet outputs of a and b.

    Exactly symmetric because both branches share one parameter store.
    """
    fa = forward_subnet(params, a, final_activation)
    fb = forward_subnet(params, b, final_activation)
    return np.linalg.norm(fa - fb, axis=-1)


def contrastive_loss(distance, y, margin: float):
    """Contrastive loss for distances and binary labels (1 = dissimilar)."""
    d = np.asarray(distance, dtype=np.float64)
    labels = np.asarray(y, dtype=np.float64)
    if margin <= 0:
        raise DataError("margin must be positive")
    if np.any(d < 0):
        raise DataError("distances must be non-negative")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 (similar) or 1 (dissimilar)")
    hinge = np.maximum(margin - d, 0.0)
    return (1.0 - labels) * 0.5 * d**2 + labels * 0.5 * hinge**2


def _backprop_branch(params, cache, g_out, grads, final_activation):
    x, z1, h1, z2, h2, z3 = cache
    gz3 = g_out * (z3 > 0) if final_activation == "relu" else g_out
    grads.w3 += gz3.T @ h2
    grads.b3 += gz3.sum(axis=0)
    gh2 = gz3 @ params.w3
    gz2 = gh2 * (z2 > 0)
    grads.w2 += gz2.T @ h1
    grads.b2 += gz2.sum(axis=0)
    gh1 = gz2 @ params.w2
    gz1 = gh1 * (z1 > 0)
    grads.w1 += gz1.T @ x
    grads.b1 += gz1.sum(axis=0)


def batch_loss_and_gradient(
    params: SubnetParams, a, b, y, margin: float, final_activation: str = "relu"
):
    """Mean contrastive loss over a batch and its exact gradient.

    Both branches accumulate into the same gradient store, mirroring the
    weight sharing of the forward pass.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    labels = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(a) == 0:
        raise DataError("batch must be non-empty")
    if not (len(a) == len(b) == len(labels)):
        raise DataError("batch arrays disagree in length")

    fa, cache_a = _forward_cached(params, a, final_activation)
    fb, cache_b = _forward_cached(params, b, final_activation)
    diff = fa - fb
    d = np.linalg.norm(diff, axis=1)
    losses = contrastive_loss(d, labels, margin)
    mean_loss = float(losses.mean())

    # dL/dD; the dissimilar branch is flat beyond the margin.
    dl_dd = (1.0 - labels) * d - labels * np.maximum(margin - d, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        coef = np.where(d > 0, dl_dd / d, 0.0)
    g_fa = (coef / len(labels))[:, None] * diff

    grads = SubnetParams.zeros_like(params)
    _backprop_branch(params, cache_a, g_fa, grads, final_activation)
    _backprop_branch(params, cache_b, -g_fa, grads, final_activation)
    return mean_loss, grads


def batch_gradient(params, a, b, y, margin, final_activation="relu"):
    """Gradient of the mean batch loss over all shared parameters."""
    return batch_loss_and_gradient(params, a, b, y, margin, final_activation)[1]


class _AdamState:
    def __init__(self, params, lr):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        self.m = SubnetParams.zeros_like(params)
        self.v = SubnetParams.zeros_like(params)

    def step(self, params, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(
            params.arrays(), grads.arrays(), self.m.arrays(), self.v.arrays()
        ):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def train(dataset: PairDataset, cfg: TrainConfig = TrainConfig()):
    """Train a Siamese model on a balanced pair dataset.

    Returns (model, per-epoch mean loss history); deterministic for a
    given (dataset, config).
    """
    dataset.validate()
    input_dim = dataset.a.shape[1]
    init_rng = substream(cfg.seed, "siamese", "init")
    params = SubnetParams.initialize(input_dim, cfg.hidden_dim, init_rng)
    shuffle_rng = substream(cfg.seed, "siamese", "shuffle")

    opt = _AdamState(params, cfg.learning_rate) if cfg.optimizer == "adam" else None
    history = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grads = batch_loss_and_gradient(
                params,
                dataset.a[idx],
                dataset.b[idx],
                dataset.y[idx],
                cfg.margin,
                cfg.final_activation,
            )
            loss_sum += loss * len(idx)
            if opt is not None:
                opt.step(params, grads)
            else:
                for p, g in zip(params.arrays(), grads.arrays()):
                    p -= cfg.learning_rate * g
        epoch_loss = loss_sum / n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(
                "epoch %d produced a non-finite loss; try a smaller learning rate"
                % epoch
            )
        history.append(epoch_loss)

    meta = {
        "margin": cfg.margin,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "optimizer": cfg.optimizer,
        "final_loss": history[-1] if history else None,
        "n_pairs": n,
        "source_tag": dataset.source_tag,
    }
    model = SiameseModel(
        params=params,
        margin=cfg.margin,
        final_activation=cfg.final_activation,
        threshold=None,
        train_meta=meta,
        loss_history=history,
    )
    return model, history


def _kink_clearance(params, a, b, margin, final_activation):
    """Distance of the nearest ReLU/hinge kink from the current point.

    Finite differences are only meaningful where the loss is smooth, so
    configurations whose pre-activations (or pair distances) sit almost
    exactly on a kink are rejected and redrawn.
    """
    clearance = np.inf
    outs = []
    for x in (a, b):
        out, (_, z1, _, z2, _, z3) = _forward_cached(params, np.atleast_2d(x), final_activation)
        clearance = min(clearance, np.abs(z1).min(), np.abs(z2).min())
        if final_activation == "relu":
            clearance = min(clearance, np.abs(z3).min())
        outs.append(out)
    d = np.linalg.norm(outs[0] - outs[1], axis=1)
    return min(clearance, d.min(), np.abs(margin - d).min())


def gradient_check(n_trials: int = 20, seed: int = 0, h: float = 1e-5) -> float:
    """Analytic gradients vs central finite differences on random setups.

    Returns the maximum relative error over all trials; the finite
    difference side only ever evaluates the loss, so it is an independent
    oracle for the backprop code.  Setups landing within 1e-3 of a ReLU
    or hinge kink are redrawn: the loss is not differentiable there and
    a central difference would straddle the corner.
    """
    rng = substream(seed, "gradcheck")
    worst = 0.0
    for trial in range(n_trials):
        for _ in range(100):
            input_dim = int(rng.integers(3, 9))
            hidden = int(rng.integers(4, 11))
            batch = int(rng.integers(2, 7))
            margin = float(rng.uniform(0.5, 2.0))
            final_activation = "relu" if trial % 2 == 0 else "linear"
            params = SubnetParams.initialize(input_dim, hidden, rng)
            for bias in (params.b1, params.b2, params.b3):
                bias += rng.normal(scale=0.2, size=bias.shape)
            a = rng.normal(size=(batch, input_dim))
            b = rng.normal(size=(batch, input_dim))
            y = rng.integers(0, 2, size=batch)
            if _kink_clearance(params, a, b, margin, final_activation) > 1e-3:
                break
        else:
            raise RuntimeError("could not draw a kink-free configuration")

        _, grads = batch_loss_and_gradient(params, a, b, y, margin, final_activation)

        def loss_at(p):
            fa = forward_subnet(p, a, final_activation)
            fb = forward_subnet(p, b, final_activation)
            d = np.linalg.norm(fa - fb, axis=1)
            return float(contrastive_loss(d, y, margin).mean())

        for array, g_array in zip(params.arrays(), grads.arrays()):
            flat = array.reshape(-1)
            g_flat = g_array.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_at(params)
                flat[i] = orig - h
                down = loss_at(params)
                flat[i] = orig
                fd = (up - down) / (2.0 * h)
                denom = max(abs(fd), abs(g_flat[i]), 1e-4)
                worst = max(worst, abs(fd - g_flat[i]) / denom)
    return worst


def save_siamese(model: SiameseModel, path) -> None:
    """Deterministic text serialization with exact float values."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("%s %d\n" % (_MAGIC, _FORMAT_VERSION))
        handle.write("input_dim\t%d\n" % model.params.input_dim)
        handle.write("hidden_dim\t%d\n" % model.params.hidden_dim)
        handle.write("final_activation\t%s\n" % model.final_activation)
        handle.write("margin\t%s\n" % repr(float(model.margin)))
        threshold = "none" if model.threshold is None else repr(float(model.threshold))
        handle.write("threshold\t%s\n" % threshold)
        handle.write("meta\t%s\n" % json.dumps(model.train_meta, sort_keys=True))
        handle.write("history\t%s\n" % json.dumps(model.loss_history))
        for name in _PARAM_NAMES:
            array = getattr(model.params, name)
            handle.write(
                "%s\t%s\t%s\n"
                % (
                    name,
                    "x".join(str(s) for s in array.shape),
                    " ".join(repr(float(v)) for v in array.reshape(-1)),
                )
            )


def load_siamese(path) -> SiameseModel:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ModelFormatError("not a siamese model file: %s" % path)
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ModelFormatError("unreadable model version") from exc
    if version != _FORMAT_VERSION:
        raise ModelFormatError("unsupported siamese format version %d" % version)

    fields = {}
    for line in lines[1:8]:
        try:
            key, value = line.split("\t", 1)
        except ValueError as exc:
            raise ModelFormatError("truncated siamese header") from exc
        fields[key] = value
    needed = {"input_dim", "hidden_dim", "final_activation", "margin", "threshold", "meta", "history"}
    if set(fields) != needed:
        raise ModelFormatError("siamese header incomplete")

    arrays = {}
    for line in lines[8:]:
        if not line:
            continue
        try:
            name, shape_text, values = line.split("\t")
            shape = tuple(int(s) for s in shape_text.split("x"))
            arrays[name] = np.array([float(v) for v in values.split(" ")]).reshape(shape)
        except ValueError as exc:
            raise ModelFormatError("corrupt parameter row: %s" % exc) from exc
    if set(arrays) != set(_PARAM_NAMES):
        raise ModelFormatError("siamese model is missing parameter rows")

    params = SubnetParams(**arrays)
    threshold = None if fields["threshold"] == "none" else float(fields["threshold"])
    return SiameseModel(
        params=params,
        margin=float(fields["margin"]),
        final_activation=fields["final_activation"],
        threshold=threshold,
        train_meta=json.loads(fields["meta"]),
        loss_history=json.loads(fields["history"]),
    )
