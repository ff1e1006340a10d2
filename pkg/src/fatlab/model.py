"""Trainable embedding map and linear classifier head.

Two architectures: a plain linear map, and one hidden tanh layer. Forward,
analytic backward and SGD steps are implemented directly on numpy arrays;
gradients are exact chain-rule, which the finite-difference tests verify.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, TrainingDivergenceError

ARCHITECTURES = ("linear", "one_hidden")


def _uniform_init(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class EmbeddingModel:
    architecture: str
    params: dict                  # name -> float64 array
    input_dim: int
    embedding_dim: int
    hidden_dim: int = 0
    nonlinearity: str = "tanh"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise ValueError(f"parameter {name} has non-finite entries")

    @classmethod
    def create(cls, architecture, input_dim, embedding_dim, hidden_dim=0,
               seed=0):
        rng = np.random.default_rng([seed, 0x11])
        if architecture == "linear":
            params = {
                "w1": _uniform_init(rng, input_dim, (input_dim, embedding_dim)),
                "b1": _uniform_init(rng, input_dim, (embedding_dim,)),
            }
            hidden_dim = 0
        elif architecture == "one_hidden":
            if hidden_dim <= 0:
                raise ValueError("one_hidden needs hidden_dim > 0")
            params = {
                "w1": _uniform_init(rng, input_dim, (input_dim, hidden_dim)),
                "b1": _uniform_init(rng, input_dim, (hidden_dim,)),
                "w2": _uniform_init(rng, hidden_dim, (hidden_dim, embedding_dim)),
                "b2": _uniform_init(rng, hidden_dim, (embedding_dim,)),
            }
        else:
            raise ValueError(f"unknown architecture {architecture!r}")
        return cls(architecture, params, input_dim, embedding_dim, hidden_dim)

    def copy(self):
        return EmbeddingModel(
            self.architecture, {k: v.copy() for k, v in self.params.items()},
            self.input_dim, self.embedding_dim, self.hidden_dim,
            self.nonlinearity)


@dataclass
class ClassifierHead:
    weight: np.ndarray            # (d_emb, C)
    bias: np.ndarray              # (C,)

    @classmethod
    def create(cls, embedding_dim, num_classes, seed=0):
        if num_classes < 2:
            raise ValueError("need at least 2 classes")
        rng = np.random.default_rng([seed, 0x12])
        return cls(_uniform_init(rng, embedding_dim, (embedding_dim, num_classes)),
                   _uniform_init(rng, embedding_dim, (num_classes,)))

    @property
    def num_classes(self):
        return self.weight.shape[1]

    def logits(self, embeddings):
        return np.atleast_2d(embeddings) @ self.weight + self.bias

    def backward(self, embeddings, grad_logits):
        """Returns (param grads dict, gradient w.r.t. embeddings)."""
        e = np.atleast_2d(embeddings)
        g = np.atleast_2d(grad_logits)
        grads = {"weight": e.T @ g, "bias": g.sum(axis=0)}
        return grads, g @ self.weight.T

    def copy(self):
        return ClassifierHead(self.weight.copy(), self.bias.copy())


@dataclass
class GradientBundle:
    """Per-parameter gradients plus the gradient w.r.t. the inputs."""

    params: dict = field(default_factory=dict)
    inputs: np.ndarray = None

    def is_finite(self):
        ok = all(np.all(np.isfinite(g)) for g in self.params.values())
        if self.inputs is not None:
            ok = ok and np.all(np.isfinite(self.inputs))
        return bool(ok)

    def scaled(self, alpha):
        return GradientBundle(
            {k: alpha * v for k, v in self.params.items()},
            None if self.inputs is None else alpha * self.inputs)

    def add(self, other):
        for k, v in other.params.items():
            if k in self.params:
                self.params[k] = self.params[k] + v
            else:
                self.params[k] = v.copy()
        if other.inputs is not None:
            self.inputs = other.inputs if self.inputs is None \
                else self.inputs + other.inputs
        return self


def forward(model, x):
    """Embed a single vector or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f"input dim {xb.shape[1]} != model dim {model.input_dim}")
    p = model.params
    if model.architecture == "linear":
        out = xb @ p["w1"] + p["b1"]
    else:
        h = np.tanh(xb @ p["w1"] + p["b1"])
        out = h @ p["w2"] + p["b2"]
    return out[0] if single else out


def backward(model, x, grad_embeddings):
    """Chain-rule gradients for a batch.

    ``grad_embeddings`` is the upstream gradient on the forward outputs,
    shape (n, d_emb). Returns a GradientBundle whose ``inputs`` entry is the
    gradient w.r.t. x.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=np.float64))
    g = np.atleast_2d(np.asarray(grad_embeddings, dtype=np.float64))
    if g.shape != (xb.shape[0], model.embedding_dim):
        raise DimensionMismatchError(
            f"upstream gradient shape {g.shape} does not match "
            f"({xb.shape[0]}, {model.embedding_dim})")
    p = model.params
    if model.architecture == "linear":
        grads = {"w1": xb.T @ g, "b1": g.sum(axis=0)}
        return GradientBundle(grads, g @ p["w1"].T)
    h = np.tanh(xb @ p["w1"] + p["b1"])
    gh = (g @ p["w2"].T) * (1.0 - h * h)
    grads = {
        "w2": h.T @ g, "b2": g.sum(axis=0),
        "w1": xb.T @ gh, "b1": gh.sum(axis=0),
    }
    return GradientBundle(grads, gh @ p["w1"].T)


def sgd_step(model, grads, lr):
    """In-place theta <- theta - lr * g. Raises on non-finite gradients."""
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    if not grads.is_finite():
        raise TrainingDivergenceError("non-finite gradients in sgd_step")
    for name, g in grads.params.items():
        model.params[name] -= lr * g
    return model


def head_sgd_step(head, grads, lr):
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise TrainingDivergenceError("non-finite gradients in head step")
    head.weight -= lr * grads["weight"]
    head.bias -= lr * grads["bias"]
    return head
