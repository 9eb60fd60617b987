"""Fixed-shape trainable expression trees.

A template fixes the tree shape as a function of depth alone: operator
layers alternate unary / binary starting with a unary root, every unary
node has one child, every binary node has two, and the layer below the
last operator layer holds the leaves. Nodes are indexed by in-order
position; sampled operator assignments and coefficient vectors both
follow that order.

Node arithmetic:
  * unary node:  ``a * g(b * child) + c``            (3 coefficients)
  * binary node: ``a * ((b * left) o (c * right)) + d`` (4 coefficients)
  * leaf: the raw selected input variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateEvaluationError, DomainError
from .operators import OperatorDescriptor, OperatorLibrary

UNARY, BINARY, LEAF = 0, 1, 2
_KIND_NAMES = {UNARY: "unary", BINARY: "binary", LEAF: "leaf"}

COEFF_FORMAT = "#.6g"

# coefficient init ranges: multiplicative near 1, additive near 0
_MULT_RANGE = (0.9, 1.1)
_ADD_RANGE = (-0.1, 0.1)


def format_number(x: float) -> str:
    """Render a coefficient to 6 significant digits (trailing zeros kept)."""
    return format(float(x), COEFF_FORMAT)


@dataclass(frozen=True)
class TreeTemplate:
    """Shape of the tree for a given depth; shared and immutable."""

    depth: int
    n_variables: int
    kinds: tuple[int, ...]                 # per in-order position
    children: tuple[tuple[int, ...], ...]  # in-order indices, () at leaves
    postorder: tuple[int, ...]             # children always precede parents
    root: int
    coeff_slices: tuple[tuple[int, int] | None, ...]
    n_coefficients: int

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @property
    def n_unary(self) -> int:
        return sum(1 for k in self.kinds if k == UNARY)

    @property
    def n_binary(self) -> int:
        return sum(1 for k in self.kinds if k == BINARY)

    @property
    def n_leaves(self) -> int:
        return sum(1 for k in self.kinds if k == LEAF)

    def choice_count(self, position: int, library: OperatorLibrary) -> int:
        """Size of the admissible choice set at one in-order position."""
        kind = self.kinds[position]
        if kind == UNARY:
            return len(library.unary)
        if kind == BINARY:
            return len(library.binary)
        return library.n_variables


class _Node:
    __slots__ = ("kind", "children", "index")

    def __init__(self, kind, children):
        self.kind = kind
        self.children = children
        self.index = -1


def build_template(depth: int, n_variables: int) -> TreeTemplate:
    """Build the deterministic alternating template for a given depth."""
    if depth < 1:
        raise ConfigError(f"tree depth must be >= 1, got {depth}")
    if n_variables < 1:
        raise ConfigError(f"need at least one input variable, got {n_variables}")

    def grow(layer: int) -> _Node:
        if layer > depth:
            return _Node(LEAF, ())
        if layer % 2 == 1:
            return _Node(UNARY, (grow(layer + 1),))
        return _Node(BINARY, (grow(layer + 1), grow(layer + 1)))

    root = grow(1)

    inorder: list[_Node] = []

    def walk_inorder(node: _Node):
        if node.kind == BINARY:
            walk_inorder(node.children[0])
            node.index = len(inorder)
            inorder.append(node)
            walk_inorder(node.children[1])
        elif node.kind == UNARY:
            walk_inorder(node.children[0])
            node.index = len(inorder)
            inorder.append(node)
        else:
            node.index = len(inorder)
            inorder.append(node)

    walk_inorder(root)

    postorder: list[int] = []

    def walk_postorder(node: _Node):
        for child in node.children:
            walk_postorder(child)
        postorder.append(node.index)

    walk_postorder(root)

    slices: list[tuple[int, int] | None] = []
    offset = 0
    for node in inorder:
        if node.kind == LEAF:
            slices.append(None)
        else:
            width = 3 if node.kind == UNARY else 4
            slices.append((offset, offset + width))
            offset += width

    return TreeTemplate(
        depth=depth,
        n_variables=n_variables,
        kinds=tuple(n.kind for n in inorder),
        children=tuple(tuple(c.index for c in n.children) for n in inorder),
        postorder=tuple(postorder),
        root=root.index,
        coeff_slices=tuple(slices),
        n_coefficients=offset,
    )


@dataclass
class Prediction:
    """Model output on a sample matrix, plus the degeneracy flag."""

    values: np.ndarray
    degenerate: bool
    node_values: list[np.ndarray] | None = None


@dataclass
class ExpressionTree:
    """A template with operators bound and (once initialized) coefficients."""

    template: TreeTemplate
    library: OperatorLibrary
    assignment: tuple[int, ...]
    ops: tuple[OperatorDescriptor | None, ...]
    coefficients: np.ndarray | None = None
    _program: list = field(default_factory=list, repr=False)

    def copy(self) -> "ExpressionTree":
        coeffs = None if self.coefficients is None else self.coefficients.copy()
        return ExpressionTree(self.template, self.library, self.assignment,
                              self.ops, coeffs, self._program)


def assign_operators(template: TreeTemplate, library: OperatorLibrary,
                     action) -> ExpressionTree:
    """Bind a sampled operator assignment to the template."""
    action = tuple(int(a) for a in action)
    if len(action) != template.n_nodes:
        raise ConfigError(
            f"action length {len(action)} does not match template node count {template.n_nodes}")
    if library.n_variables != template.n_variables:
        raise ConfigError("library variable count does not match template")

    ops: list[OperatorDescriptor | None] = []
    for pos, choice in enumerate(action):
        kind = template.kinds[pos]
        limit = template.choice_count(pos, library)
        if not 0 <= choice < limit:
            raise ConfigError(
                f"invalid action: choice {choice} out of range [0, {limit}) "
                f"at {_KIND_NAMES[kind]} position {pos}")
        if kind == UNARY:
            ops.append(library.unary[choice])
        elif kind == BINARY:
            ops.append(library.binary[choice])
        else:
            ops.append(None)

    tree = ExpressionTree(template, library, action, tuple(ops))
    tree._program = _compile(tree)
    return tree


def _compile(tree: ExpressionTree) -> list:
    """Flatten the tree into a postorder step list for the hot loops."""
    program = []
    t = tree.template
    for idx in t.postorder:
        kind = t.kinds[idx]
        if kind == LEAF:
            program.append((LEAF, idx, tree.assignment[idx], None, None, None))
        else:
            op = tree.ops[idx]
            start = t.coeff_slices[idx][0]
            program.append((kind, idx, start, op.value, op.deriv, t.children[idx]))
    return program


def draw_coefficients(template: TreeTemplate, rng: np.random.Generator) -> np.ndarray:
    """Fresh coefficient vector: multiplicative ~ U[0.9, 1.1], additive ~ U[-0.1, 0.1]."""
    w = np.empty(template.n_coefficients)
    for pos, kind in enumerate(template.kinds):
        if kind == LEAF:
            continue
        start, stop = template.coeff_slices[pos]
        n_mult = stop - start - 1  # trailing slot is the additive bias
        w[start:start + n_mult] = rng.uniform(*_MULT_RANGE, size=n_mult)
        w[stop - 1] = rng.uniform(*_ADD_RANGE)
    return w


def init_params(tree: ExpressionTree, seed) -> ExpressionTree:
    """Seeded coefficient initialization; see draw_coefficients for ranges."""
    tree.coefficients = draw_coefficients(tree.template, np.random.default_rng(seed))
    return tree


def _require_ready(tree: ExpressionTree):
    if tree.coefficients is None:
        raise ConfigError("tree coefficients not initialized; call init_params first")


def _check_inputs(tree: ExpressionTree, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != tree.template.n_variables:
        raise ConfigError(
            f"X must have shape (n, {tree.template.n_variables}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("non-finite values in X")
    return X


def evaluate(tree: ExpressionTree, X, retain: bool = False) -> Prediction:
    """Bottom-up evaluation; non-finite intermediates set the degenerate flag."""
    _require_ready(tree)
    X = _check_inputs(tree, X)
    n = X.shape[0]
    w = tree.coefficients
    values: list = [None] * tree.template.n_nodes

    with np.errstate(all="ignore"):
        for kind, idx, aux, value_fn, _, children in tree._program:
            if kind == LEAF:
                values[idx] = X[:, aux]
                continue
            if kind == UNARY:
                arg = w[aux + 1] * values[children[0]]
                if not np.isfinite(arg).all():
                    return Prediction(np.full(n, np.nan), True)
                out = w[aux] * value_fn(arg) + w[aux + 2]
            else:
                u = w[aux + 1] * values[children[0]]
                v = w[aux + 2] * values[children[1]]
                if not (np.isfinite(u).all() and np.isfinite(v).all()):
                    return Prediction(np.full(n, np.nan), True)
                out = w[aux] * value_fn(u, v) + w[aux + 3]
            values[idx] = out

    root_value = values[tree.template.root]
    if not np.isfinite(root_value).all():
        return Prediction(np.full(n, np.nan), True)
    return Prediction(root_value, False, values if retain else None)


def loss_and_gradients(tree: ExpressionTree, X, y) -> tuple[float, np.ndarray]:
    """MSE and its exact gradient w.r.t. the coefficient vector.

    Raises DegenerateEvaluationError when the forward pass produces a
    non-finite intermediate; callers treat that as a zero-reward signal.
    """
    _require_ready(tree)
    X = _check_inputs(tree, X)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ConfigError(f"y must have shape ({X.shape[0]},), got {y.shape}")
    n = X.shape[0]
    w = tree.coefficients
    program = tree._program

    values: list = [None] * tree.template.n_nodes
    cache: list = [None] * tree.template.n_nodes

    with np.errstate(all="ignore"):
        for kind, idx, aux, value_fn, _, children in program:
            if kind == LEAF:
                values[idx] = X[:, aux]
                continue
            if kind == UNARY:
                z = values[children[0]]
                arg = w[aux + 1] * z
                if not np.isfinite(arg).all():
                    raise DegenerateEvaluationError(f"non-finite value at node {idx}")
                g = value_fn(arg)
                values[idx] = w[aux] * g + w[aux + 2]
                cache[idx] = (z, arg, g)
            else:
                left, right = values[children[0]], values[children[1]]
                u = w[aux + 1] * left
                v = w[aux + 2] * right
                if not (np.isfinite(u).all() and np.isfinite(v).all()):
                    raise DegenerateEvaluationError(f"non-finite value at node {idx}")
                m = value_fn(u, v)
                values[idx] = w[aux] * m + w[aux + 3]
                cache[idx] = (left, right, u, v, m)

        root = tree.template.root
        y_hat = values[root]
        if not np.isfinite(y_hat).all():
            raise DegenerateEvaluationError("non-finite prediction at root")

        residual = y_hat - y
        mse = float((residual * residual).sum()) / n
        grad = np.zeros_like(w)
        adjoint: list = [None] * tree.template.n_nodes
        adjoint[root] = (2.0 / n) * residual

        for kind, idx, aux, _, deriv_fn, children in reversed(program):
            if kind == LEAF:
                continue
            adj = adjoint[idx]
            if kind == UNARY:
                z, arg, g = cache[idx]
                gprime = deriv_fn(arg)
                a_gp = w[aux] * gprime
                grad[aux] = (adj * g).sum()
                grad[aux + 1] = (adj * (a_gp * z)).sum()
                grad[aux + 2] = adj.sum()
                adjoint[children[0]] = adj * (a_gp * w[aux + 1])
            else:
                left, right, u, v, m = cache[idx]
                du, dv = deriv_fn(u, v)
                a_du = w[aux] * du
                a_dv = w[aux] * dv
                grad[aux] = (adj * m).sum()
                grad[aux + 1] = (adj * (a_du * left)).sum()
                grad[aux + 2] = (adj * (a_dv * right)).sum()
                grad[aux + 3] = adj.sum()
                adjoint[children[0]] = adj * (a_du * w[aux + 1])
                adjoint[children[1]] = adj * (a_dv * w[aux + 2])

    if not (np.isfinite(mse) and np.isfinite(grad).all()):
        raise DegenerateEvaluationError("non-finite loss or gradient")
    return mse, grad


def render(tree: ExpressionTree) -> str:
    """Fully parenthesized infix string; coefficients at 6 significant digits.

    Grammar (consumed by ``loadsr.parsing.parse_expression``)::

        expr   := number "*" "(" inner ")" " + " number
        inner  := uop "(" number "*" arg ")"                       -- unary
                | "(" number "*" arg ") " bop " (" number "*" arg ")"  -- binary
        arg    := expr | leaf
        leaf   := "x" <digits>

    The identity operator renders with an empty name token.
    """
    _require_ready(tree)
    t = tree.template
    w = tree.coefficients

    def emit(idx: int) -> str:
        kind = t.kinds[idx]
        if kind == LEAF:
            return f"x{tree.assignment[idx]}"
        start = t.coeff_slices[idx][0]
        if kind == UNARY:
            inner = (f"{tree.ops[idx].token}("
                     f"{format_number(w[start + 1])}*{emit(t.children[idx][0])})")
            return f"{format_number(w[start])}*({inner}) + {format_number(w[start + 2])}"
        left, right = t.children[idx]
        inner = (f"({format_number(w[start + 1])}*{emit(left)}) "
                 f"{tree.ops[idx].token} "
                 f"({format_number(w[start + 2])}*{emit(right)})")
        return f"{format_number(w[start])}*({inner}) + {format_number(w[start + 3])}"

    return emit(t.root)
