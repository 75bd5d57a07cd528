"""
Small differentiable core: fully-connected ReLU networks with exact
reverse-mode gradients, Adam, tanh-Gaussian and categorical heads, and a
binary checkpoint format.

Everything is float64. A network's forward pass returns a tape; the matching
backward pass consumes it, so several forward passes can be in flight at once.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .pamdp import ContractViolation

logger = logging.getLogger(__name__)

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

CHECKPOINT_FORMAT = 'maple-checkpoint'
CHECKPOINT_VERSION = 1

# Open ActivationPatterns recorders; see Network.forward
_recorders: List[list] = []


class ActivationPatterns:
    """Collects the ReLU on/off pattern of every forward pass run inside the block"""

    def __enter__(self):
        self.patterns = []
        _recorders.append(self.patterns)
        return self

    def __exit__(self, *exc):
        _recorders.remove(self.patterns)
        return False

    def signature(self) -> np.ndarray:
        if not self.patterns:
            return np.zeros(0, dtype=bool)
        return np.concatenate(self.patterns)


@dataclass
class Tape:
    """Activations recorded by Network.forward"""

    inputs: List[np.ndarray]
    preactivations: List[np.ndarray]
    squeeze: bool


class Network:
    """Multilayer perceptron: ReLU on hidden layers, linear output"""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator = None, final_scale: float = 1.0):
        if len(sizes) < 2:
            raise ContractViolation(f"A network needs input and output sizes, got {list(sizes)}")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.weights[-1] *= final_scale
        self.biases[-1] *= final_scale

    @classmethod
    def from_params(cls, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> 'Network':
        weights = [np.array(w, dtype=np.float64) for w in weights]
        sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights]
        net = cls.__new__(cls)
        net.sizes = tuple(sizes)
        net.weights = weights
        net.biases = [np.array(b, dtype=np.float64) for b in biases]
        return net

    def __repr__(self):
        return f"Network({'-'.join(str(s) for s in self.sizes)})"

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    @property
    def params(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...); references, not copies"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> 'Network':
        return Network.from_params([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_params(self, params: Sequence[np.ndarray]) -> None:
        for target, source in zip(self.params, params):
            if target.shape != np.shape(source):
                raise ContractViolation(f"Parameter shape {np.shape(source)} does not match {target.shape}")
            target[...] = source

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Tape]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ContractViolation(f"{self!r} expects input width {self.input_dim}, got shape {x.shape}")
        inputs, preactivations = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            a = h @ w + b
            preactivations.append(a)
            h = a if i == last else np.maximum(a, 0.0)
        if _recorders:
            pattern = np.concatenate([(a > 0.0).ravel() for a in preactivations[:-1]] or [np.zeros(0, dtype=bool)])
            for recorder in _recorders:
                recorder.append(pattern)
        out = h[0] if squeeze else h
        return out, Tape(inputs, preactivations, squeeze)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, tape: Tape, dout: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Reverse-mode pass for the loss adjoint dout = dL/d(output).

        Returns:
            Gradients in the order of `params`, and dL/d(input)
        """
        g = np.asarray(dout, dtype=np.float64)
        if tape.squeeze:
            g = g[None, :]
        grads_w, grads_b = [], []
        for i in reversed(range(len(self.weights))):
            grads_w.append(tape.inputs[i].T @ g)
            grads_b.append(g.sum(axis=0))
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (tape.preactivations[i - 1] > 0.0)
        grads = []
        for gw, gb in zip(reversed(grads_w), reversed(grads_b)):
            grads.extend((gw, gb))
        dx = g[0] if tape.squeeze else g
        return grads, dx


# Optimization

@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], **kwargs) -> 'AdamState':
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, lr: float) -> List[np.ndarray]:
    """One bias-corrected Adam update; returns new parameter arrays and advances state"""
    if len(params) != len(grads):
        raise ContractViolation(f"{len(grads)} gradients for {len(params)} parameters")
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise ContractViolation(f"Gradient shape {np.shape(g)} does not match parameter {np.shape(p)}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


class Adam:
    """In-place Adam over a fixed list of parameter arrays"""

    def __init__(self, params: Sequence[np.ndarray], lr: float):
        self.params = list(params)
        self.lr = lr
        self.state = AdamState.zeros_like(self.params)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        for target, value in zip(self.params, adam_step(self.params, grads, self.state, self.lr)):
            target[...] = value

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {'t': np.array([float(self.state.t)])}
        for i, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            arrays[f'm{i}'] = m
            arrays[f'v{i}'] = v
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        self.state.t = int(arrays['t'][0])
        for i in range(len(self.params)):
            self.state.m[i] = arrays[f'm{i}'].copy()
            self.state.v[i] = arrays[f'v{i}'].copy()


def polyak_update(target: Sequence[np.ndarray], online: Sequence[np.ndarray], tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place"""
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


# Tanh-Gaussian head

def split_gaussian(raw: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a head output into (mean, clamped log std, clamp mask)"""
    mean = raw[..., :dim]
    raw_log_std = raw[..., dim:2 * dim]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    mask = ((raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)).astype(np.float64)
    return mean, log_std, mask


def log1m_tanh_sq(z: np.ndarray) -> np.ndarray:
    """log(1 - tanh(z)^2), stable for large |z|"""
    return 2.0 * (math.log(2.0) - z - np.logaddexp(0.0, -2.0 * z))


def tanh_gaussian_sample(mean: np.ndarray, log_std: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reparameterized sample x = tanh(mean + std * noise) and its log-density

    Returns:
        (x, log_prob) with log_prob summed over the last axis
    """
    std = np.exp(log_std)
    z = mean + std * noise
    x = np.tanh(z)
    log_prob = np.sum(-0.5 * noise ** 2 - log_std - HALF_LOG_TWO_PI - log1m_tanh_sq(z), axis=-1)
    return x, log_prob


def tanh_gaussian_logprob(mean: np.ndarray, log_std: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Log-density of x under tanh(Normal(mean, exp(log_std)))

    Raises:
        ContractViolation: If any component of x lies outside (-1, 1)
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) >= 1.0):
        raise ContractViolation("tanh-Gaussian support is the open interval (-1, 1)")
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = np.arctanh(x)
    normalized = (z - mean) * np.exp(-log_std)
    return np.sum(-0.5 * normalized ** 2 - log_std - HALF_LOG_TWO_PI - np.log1p(-x * x), axis=-1)


# Categorical head

def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    log_p = log_softmax(logits)
    return -np.sum(np.exp(log_p) * log_p, axis=-1)


def sample_categorical(probs: np.ndarray, uniform: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one category per row"""
    cdf = np.cumsum(np.atleast_2d(probs), axis=-1)
    cdf[:, -1] = 1.0
    choice = np.sum(cdf <= np.atleast_1d(uniform)[:, None], axis=-1)
    return np.minimum(choice, cdf.shape[1] - 1)


# Checkpoints

def save_arrays(path, arrays: Dict[str, np.ndarray], meta: dict = None) -> Path:
    """
    Write named float64 arrays as one JSON manifest line followed by raw
    little-endian bytes in manifest order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'meta': meta or {},
        'arrays': [{'name': name, 'shape': list(np.shape(a))} for name, a in arrays.items()],
    }
    with open(path, 'wb') as handle:
        handle.write(json.dumps(manifest, sort_keys=True).encode('utf-8') + b'\n')
        for array in arrays.values():
            handle.write(np.ascontiguousarray(array, dtype='<f8').tobytes())
    logger.debug(f"Saved {len(arrays)} arrays to {path}")
    return path


def load_arrays(path) -> Tuple[Dict[str, np.ndarray], dict]:
    with open(path, 'rb') as handle:
        header = handle.readline()
        payload = handle.read()
    try:
        manifest = json.loads(header.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ContractViolation(f"{path} is not a checkpoint: unreadable manifest")
    if manifest.get('format') != CHECKPOINT_FORMAT:
        raise ContractViolation(f"{path} is not a checkpoint: format {manifest.get('format')!r}")
    arrays, offset = {}, 0
    for entry in manifest['arrays']:
        shape = tuple(entry['shape'])
        count = int(np.prod(shape)) if shape else 1
        chunk = payload[offset:offset + 8 * count]
        if len(chunk) != 8 * count:
            raise ContractViolation(f"{path} is truncated at array {entry['name']!r}")
        arrays[entry['name']] = np.frombuffer(chunk, dtype='<f8').reshape(shape).astype(np.float64)
        offset += 8 * count
    return arrays, manifest.get('meta', {})
