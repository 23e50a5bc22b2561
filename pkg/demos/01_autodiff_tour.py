"""
Reverse-mode gradients by hand and by machine
=============================================

Build a tiny graph, pull adjoints out of it, and compare them with central
finite differences.  Runs in a second.
"""
import numpy as np

from tsviz import Graph, Parameter
from tsviz.gradcheck import gradcheck_fn

rng = np.random.default_rng(0)

# A parameter is a named array plus a momentum buffer; the graph only reads it.
w = Parameter("w", rng.normal(size=(3, 3, 1, 2)))
b = Parameter("b", np.zeros(2))
image = rng.random((6, 6, 1))


def loss():
    g = Graph()
    h = g.relu(g.conv2d(g.const(image), g.param(w), g.param(b)))
    h = g.maxpool2x2(h)
    return g, g.sum(g.mul(h, h))


g, root = loss()
g.backward(root)
print("loss", float(root.value))
print("dL/db", g.param_grads()["b"])

# Central differences agree entry by entry.  Entries whose +-h probe crosses a
# relu or max-pool kink are skipped and counted.
report = gradcheck_fn(loss, [w, b], step=1e-5, tolerance=1e-6)
print(report.format())

# sigmoid'(0) = 1/4
g = Graph()
x = g.variable(np.zeros(1))
print("sigmoid slope at 0:", g.backward(g.sum(g.sigmoid(x)))[x.id][0])
