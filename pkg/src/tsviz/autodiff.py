"""Define-by-run reverse-mode differentiation over the kernels in :mod:`tsviz.tensor`.

A :class:`Graph` is built afresh for every forward pass.  Each op method
computes its value eagerly, appends a :class:`Node` and returns it; calling
:meth:`Graph.backward` on a scalar node walks the list in reverse.

>>> g = Graph()
>>> x = g.const(np.zeros(1))
>>> y = g.sum(g.sigmoid(x))
>>> float(g.backward(y)[x.id][0])
0.25
"""
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError


class Parameter:
    """A named trainable tensor with its momentum buffer."""

    def __init__(self, name, value):
        self.name = name
        self.value = T.as_tensor(value).copy()
        self.momentum = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


@dataclass(eq=False)
class Node:
    id: int
    op: str
    inputs: tuple
    value: np.ndarray
    ctx: dict = field(default_factory=dict)
    grad: np.ndarray = None

    @property
    def shape(self):
        return self.value.shape


class Graph:
    """Append-only record of one forward computation."""

    def __init__(self):
        self.nodes = []
        self.params = {}    # parameter name -> node

    def _add(self, op, inputs, value, **ctx):
        node = Node(len(self.nodes), op, tuple(n.id for n in inputs), value, ctx)
        self.nodes.append(node)
        return node

    # leaves

    def param(self, p):
        """Leaf node for parameter ``p``; repeated calls return the same node."""
        node = self.params.get(p.name)
        if node is None:
            node = self._add("param", (), p.value, name=p.name)
            self.params[p.name] = node
        return node

    def const(self, x):
        """Leaf that never receives an adjoint."""
        return self._add("const", (), T.as_tensor(x))

    def variable(self, x):
        """Non-parameter leaf whose adjoint is wanted (e.g. an input image)."""
        return self._add("variable", (), T.as_tensor(x))

    # ops

    def conv2d(self, x, k, b, padding="same"):
        return self._add("conv2d", (x, k, b), T.conv2d(x.value, k.value, b.value, padding),
                         padding=padding)

    def maxpool2x2(self, x):
        out, idx = T.maxpool2x2(x.value)
        return self._add("maxpool2x2", (x,), out, idx=idx)

    def upsample2x(self, x):
        return self._add("upsample2x", (x,), T.upsample2x(x.value))

    def concat_channels(self, a, b):
        return self._add("concat", (a, b), T.concat_channels(a.value, b.value))

    def dense(self, x, w, b):
        return self._add("dense", (x, w, b), T.dense(x.value, w.value, b.value))

    def relu(self, x):
        return self._add("relu", (x,), T.relu(x.value))

    def sigmoid(self, x):
        return self._add("sigmoid", (x,), T.sigmoid(x.value))

    def flatten(self, x):
        return self.reshape(x, (-1,))

    def reshape(self, x, shape):
        return self._add("reshape", (x,), x.value.reshape(shape))

    def add(self, a, b):
        if a.shape != b.shape:
            raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ", axis="shape")
        return self._add("add", (a, b), a.value + b.value)

    def sub(self, a, b):
        if a.shape != b.shape:
            raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ", axis="shape")
        return self._add("sub", (a, b), a.value - b.value)

    def mul(self, a, b):
        if a.shape != b.shape:
            raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ", axis="shape")
        return self._add("mul", (a, b), a.value * b.value)

    def scale(self, x, c):
        return self._add("scale", (x,), x.value * float(c), c=float(c))

    def sum(self, x):
        return self._add("sum", (x,), np.array(x.value.sum()))

    def pick(self, x, index):
        """Scalar node holding ``x[index]``."""
        return self._add("pick", (x,), np.array(x.value[index]), index=index)

    def softmax_cross_entropy(self, logits, label):
        """Fused ``-log softmax(logits)[label]``; stores the probabilities in ctx."""
        if logits.value.ndim != 1:
            raise DimensionError("softmax_cross_entropy expects a logit vector", axis="rank")
        if not 0 <= label < logits.value.shape[0]:
            raise DimensionError(f"label {label} outside [0, {logits.value.shape[0]})", axis="class")
        logp = T.log_softmax(logits.value)
        prob = np.exp(logp)
        loss = -max(logp[label], np.log(1e-300))
        return self._add("softmax_ce", (logits,), np.array(loss), prob=prob, label=label)

    def add_n(self, nodes):
        out = nodes[0]
        for n in nodes[1:]:
            out = self.add(out, n)
        return out

    # reverse pass

    def backward(self, root):
        """Propagate adjoints from scalar ``root``; returns {node id: adjoint}.

        Adjoints are recomputed from scratch on every call, so calling twice
        yields identical results.
        """
        if root.value.size != 1 or root.value.ndim > 1:
            raise ContractError(f"backward root must be scalar, got shape {root.value.shape}")
        for n in self.nodes:
            n.grad = None
        root.grad = np.ones_like(root.value)
        for node in reversed(self.nodes[:root.id + 1]):
            g = node.grad
            if g is None or not node.inputs:
                continue
            ins = [self.nodes[i] for i in node.inputs]
            for inp, gi in zip(ins, _VJP[node.op](node, ins, g)):
                if gi is None or inp.op == "const":
                    continue
                if inp.grad is None:
                    inp.grad = gi
                else:
                    inp.grad = inp.grad + gi
        return {n.id: n.grad for n in self.nodes if n.grad is not None}

    def activation_pattern(self):
        """Which side of every kink this pass sits on: relu signs and max-pool winners."""
        pattern = []
        for n in self.nodes:
            if n.op == "relu":
                pattern.append(self.nodes[n.inputs[0]].value > 0)
            elif n.op == "maxpool2x2":
                pattern.append(n.ctx["idx"])
        return pattern

    def kink_margin(self):
        """Smallest |relu input| and smallest gap between a max-pool winner and runner-up."""
        relu_m = pool_m = np.inf
        for n in self.nodes:
            if n.op == "relu":
                relu_m = min(relu_m, float(np.abs(self.nodes[n.inputs[0]].value).min()))
            elif n.op == "maxpool2x2":
                x = self.nodes[n.inputs[0]].value
                h, w, c = x.shape
                win = np.sort(x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3)
                              .reshape(-1, 4), axis=1)
                pool_m = min(pool_m, float((win[:, 3] - win[:, 2]).min()))
        return relu_m, pool_m

    def param_grads(self):
        """Adjoints of parameter leaves after :meth:`backward` (zeros if unreached)."""
        return {name: (n.grad if n.grad is not None else np.zeros_like(n.value))
                for name, n in self.params.items()}


def _vjp_conv(node, ins, g):
    x, k, _ = ins
    return T.conv2d_backward(g, x.value, k.value, node.ctx["padding"], need_input=x.op != "const")


def _vjp_dense(node, ins, g):
    x, w, _ = ins
    return g @ w.value.T, np.outer(x.value, g), g


def _vjp_softmax_ce(node, ins, g):
    p = node.ctx["prob"].copy()
    p[node.ctx["label"]] -= 1.0
    return (g * p,)


def _vjp_pick(node, ins, g):
    out = np.zeros_like(ins[0].value)
    out[node.ctx["index"]] = g
    return (out,)


_VJP = {
    "conv2d": _vjp_conv,
    "maxpool2x2": lambda n, ins, g: (T.maxpool2x2_backward(g, n.ctx["idx"]),),
    "upsample2x": lambda n, ins, g: (T.upsample2x_backward(g),),
    "concat": lambda n, ins, g: (g[:, :, :ins[0].shape[2]], g[:, :, ins[0].shape[2]:]),
    "dense": _vjp_dense,
    "relu": lambda n, ins, g: (g * (ins[0].value > 0),),
    "sigmoid": lambda n, ins, g: (g * n.value * (1.0 - n.value),),
    "reshape": lambda n, ins, g: (g.reshape(ins[0].shape),),
    "add": lambda n, ins, g: (g, g),
    "sub": lambda n, ins, g: (g, -g),
    "mul": lambda n, ins, g: (g * ins[1].value, g * ins[0].value),
    "scale": lambda n, ins, g: (g * n.ctx["c"],),
    "sum": lambda n, ins, g: (np.broadcast_to(g, ins[0].shape).copy(),),
    "pick": _vjp_pick,
    "softmax_ce": _vjp_softmax_ce,
}


def backward(graph, root):
    """Functional form of :meth:`Graph.backward`."""
    return graph.backward(root)
