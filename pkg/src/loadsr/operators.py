"""Predefined operator library: guarded value maps and exact partial derivatives.

Every operator is total over finite inputs -- guards (absolute values,
clamps, epsilon floors) keep outputs finite so downstream rewards stay
well defined. Value and derivative callables are vectorized and accept
scalars or numpy arrays.

Guard conventions (fixed):
  * ``exp_clamped(u) = exp(clip(u, -20, 20))``, derivative 0 outside the clamp.
  * ``log_safe(u) = ln(|u| + eps)``; ``sqrt_safe(u) = sqrt(|u|)``.
  * ``div_safe(u, v) = u / (sgn(v) * max(|v|, eps))`` with ``sgn(0) = +1``.
  * Kink-point derivatives use a fixed subgradient choice: ``relu'(0) = 0``,
    ``log_safe'(0) = 0``, ``sqrt_safe'(0) = 0``.

``tan`` is registered but not in the default set: its poles make the
epsilon guard a poor fit. Enable it explicitly via ``build_library``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError

GUARD_EPSILON = 1e-6
EXP_CLAMP = 20.0


@dataclass(frozen=True)
class OperatorDescriptor:
    """One library entry: value map, derivative map, and render token."""

    id: int
    name: str
    arity: int  # 1 or 2
    value: Callable = field(repr=False)
    deriv: Callable = field(repr=False)  # unary: g'(u); binary: (d/du, d/dv)
    token: str = ""  # string used in rendered expressions
    guard_epsilon: float | None = None


def _sign_pos(v):
    # sign with sign(0) = +1
    return np.where(v >= 0.0, 1.0, -1.0)


def _identity(eps):
    # returns its input uncopied and a scalar derivative; numpy broadcasting
    # makes both safe wherever array results are expected
    return (lambda u: u,
            lambda u: 1.0)


def _sin(eps):
    return (np.sin, np.cos)


def _cos(eps):
    return (np.cos, lambda u: -np.sin(u))


def _tanh(eps):
    return (np.tanh, lambda u: 1.0 - np.tanh(u) ** 2)


def _sigmoid_value(u):
    # overflow-free: exp argument is always <= 0
    z = np.exp(-np.abs(u))
    return np.where(u >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def _sigmoid(eps):
    def deriv(u):
        s = _sigmoid_value(u)
        return s * (1.0 - s)

    return (_sigmoid_value, deriv)


def _exp_clamped(eps):
    def value(u):
        return np.exp(np.clip(u, -EXP_CLAMP, EXP_CLAMP))

    def deriv(u):
        return np.where(np.abs(u) <= EXP_CLAMP, value(u), 0.0)

    return (value, deriv)


def _log_safe(eps):
    def value(u):
        return np.log(np.abs(u) + eps)

    def deriv(u):
        # np.sign(0) = 0, so the derivative at the |.| kink is 0
        return np.sign(u) / (np.abs(u) + eps)

    return (value, deriv)


def _sqrt_safe(eps):
    def value(u):
        return np.sqrt(np.abs(u))

    def deriv(u):
        root = np.sqrt(np.abs(u))
        safe = np.where(root > 0.0, root, 1.0)
        return np.where(root > 0.0, np.sign(u) / (2.0 * safe), 0.0)

    return (value, deriv)


def _relu(eps):
    return (lambda u: np.maximum(u, 0.0),
            lambda u: np.where(u > 0.0, 1.0, 0.0))


def _tan_safe(eps):
    def value(u):
        c = np.cos(u)
        return np.sin(u) / (_sign_pos(c) * np.maximum(np.abs(c), eps))

    def deriv(u):
        c = np.cos(u)
        guarded = np.abs(c) < eps
        safe = np.where(guarded, 1.0, c)
        # inside the pole guard the denominator is constant, so d/du sin(u)/D
        return np.where(guarded, c / (_sign_pos(c) * eps), 1.0 / safe**2)

    return (value, deriv)


def _add(eps):
    return (lambda u, v: u + v,
            lambda u, v: (1.0, 1.0))


def _sub(eps):
    return (lambda u, v: u - v,
            lambda u, v: (1.0, -1.0))


def _mul(eps):
    return (lambda u, v: u * v,
            lambda u, v: (v, u))


def _div_safe(eps):
    def value(u, v):
        return u / (_sign_pos(v) * np.maximum(np.abs(v), eps))

    def deriv(u, v):
        denom = _sign_pos(v) * np.maximum(np.abs(v), eps)
        smooth = np.abs(v) >= eps
        vsafe = np.where(smooth, v, 1.0)
        return (1.0 / denom, np.where(smooth, -u / vsafe**2, 0.0))

    return (value, deriv)


# name -> (arity, factory(eps) -> (value, deriv), render token, uses guard)
_REGISTRY = {
    "identity": (1, _identity, "", False),
    "sin": (1, _sin, "sin", False),
    "cos": (1, _cos, "cos", False),
    "tanh": (1, _tanh, "tanh", False),
    "sigmoid": (1, _sigmoid, "sigmoid", False),
    "exp_clamped": (1, _exp_clamped, "exp", True),
    "log_safe": (1, _log_safe, "log", True),
    "sqrt_safe": (1, _sqrt_safe, "sqrt", True),
    "relu": (1, _relu, "relu", False),
    "tan_safe": (1, _tan_safe, "tan", True),
    "add": (2, _add, "+", False),
    "sub": (2, _sub, "-", False),
    "mul": (2, _mul, "*", False),
    "div_safe": (2, _div_safe, "/", True),
}

DEFAULT_UNARY = ("identity", "sin", "cos", "tanh", "sigmoid",
                 "exp_clamped", "log_safe", "sqrt_safe", "relu")
DEFAULT_BINARY = ("add", "sub", "mul", "div_safe")


@dataclass(frozen=True)
class OperatorLibrary:
    """Immutable operator set the policy samples from.

    Ids are dense 0..K-1 within each arity class; the library must not
    change once a search starts because policy dimensions depend on it.
    """

    unary: tuple[OperatorDescriptor, ...]
    binary: tuple[OperatorDescriptor, ...]
    n_variables: int
    guard_epsilon: float = GUARD_EPSILON

    def __post_init__(self):
        if self.n_variables < 1:
            raise ConfigError("library needs at least one input variable")
        if not self.unary or not any(op.name == "identity" for op in self.unary):
            raise ConfigError("unary operator list must be nonempty and contain 'identity'")
        if not self.binary or not any(op.name == "add" for op in self.binary):
            raise ConfigError("binary operator list must be nonempty and contain 'add'")
        for ops in (self.unary, self.binary):
            if [op.id for op in ops] != list(range(len(ops))):
                raise ConfigError("operator ids must be dense 0..K-1 within each arity class")
            if len({op.name for op in ops}) != len(ops):
                raise ConfigError("duplicate operator name in library")

    def describe(self) -> dict:
        """Manifest form: ordered operator names plus sizing."""
        return {
            "unary": [op.name for op in self.unary],
            "binary": [op.name for op in self.binary],
            "variables": self.n_variables,
            "guard_epsilon": self.guard_epsilon,
        }


def _make_descriptor(name: str, op_id: int, eps: float) -> OperatorDescriptor:
    try:
        arity, factory, token, guarded = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(f"unknown operator {name!r}; known operators: {known}") from None
    value, deriv = factory(eps)
    return OperatorDescriptor(
        id=op_id, name=name, arity=arity, value=value, deriv=deriv,
        token=token, guard_epsilon=eps if guarded else None,
    )


def build_library(unary: tuple[str, ...] | list[str],
                  binary: tuple[str, ...] | list[str],
                  n_variables: int,
                  guard_epsilon: float = GUARD_EPSILON) -> OperatorLibrary:
    """Assemble a library from operator names, with dense per-class ids."""
    if guard_epsilon <= 0:
        raise ConfigError("guard_epsilon must be positive")
    unary_ops = tuple(_make_descriptor(n, i, guard_epsilon) for i, n in enumerate(unary))
    binary_ops = tuple(_make_descriptor(n, i, guard_epsilon) for i, n in enumerate(binary))
    for op in unary_ops:
        if op.arity != 1:
            raise ConfigError(f"{op.name!r} is not a unary operator")
    for op in binary_ops:
        if op.arity != 2:
            raise ConfigError(f"{op.name!r} is not a binary operator")
    return OperatorLibrary(unary_ops, binary_ops, n_variables, guard_epsilon)


def default_library(n_variables: int, guard_epsilon: float = GUARD_EPSILON) -> OperatorLibrary:
    """The standard 9-unary / 4-binary library over ``n_variables`` inputs."""
    return build_library(DEFAULT_UNARY, DEFAULT_BINARY, n_variables, guard_epsilon)


def _as_finite_array(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite {what} passed to operator")
    return arr


def apply_unary(op: OperatorDescriptor, u):
    """Evaluate a unary operator; scalars in, scalar out."""
    if op.arity != 1:
        raise ConfigError(f"{op.name!r} is not unary")
    arr = _as_finite_array(u, "input")
    out = op.value(arr)
    return float(out) if arr.ndim == 0 else out


def apply_binary(op: OperatorDescriptor, u, v):
    """Evaluate a binary operator; scalars in, scalar out."""
    if op.arity != 2:
        raise ConfigError(f"{op.name!r} is not binary")
    ua = _as_finite_array(u, "left input")
    va = _as_finite_array(v, "right input")
    out = op.value(ua, va)
    return float(out) if ua.ndim == 0 and va.ndim == 0 else out


def _match_shape(out, like: np.ndarray):
    if like.ndim == 0:
        return float(out)
    if np.ndim(out) == 0:
        return np.broadcast_to(np.float64(out), like.shape)
    return out


def d_unary(op: OperatorDescriptor, u):
    """Exact derivative dg/du of a unary operator."""
    if op.arity != 1:
        raise ConfigError(f"{op.name!r} is not unary")
    arr = _as_finite_array(u, "input")
    return _match_shape(op.deriv(arr), arr)


def d_binary(op: OperatorDescriptor, u, v):
    """Exact partials (d/du, d/dv) of a binary operator."""
    if op.arity != 2:
        raise ConfigError(f"{op.name!r} is not binary")
    ua = _as_finite_array(u, "left input")
    va = _as_finite_array(v, "right input")
    du, dv = op.deriv(ua, va)
    if ua.ndim == 0 and va.ndim == 0:
        return float(du), float(dv)
    return _match_shape(du, ua), _match_shape(dv, va)
