"""Explanation heatmaps.

``heatmap_from_reconstruction`` turns the decoder output ``V`` into a map of
each pixel's Euclidean distance from black.  ``gradient_saliency`` and
``gradcam`` are the two post-hoc baselines; both explain a classifier given
either as a :class:`~tsviz.network.TeacherStudentModel` (its Teacher branch by
default) or as a callable ``fn(graph, x_node) -> {"logits": node, "features": node}``.
"""
import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .autodiff import Graph
from .errors import ParameterError
from .imageio import write_pgm
from .network import TeacherStudentModel, classifier, forward

METHODS = ("proposed", "gradient", "gradcam")


@dataclass
class Heatmap:
    values: np.ndarray
    normalized: bool = False
    method: str = "proposed"

    @property
    def shape(self):
        return self.values.shape


def heatmap_from_reconstruction(V):
    """Per-pixel L2 norm of the three channels of ``V``."""
    V = np.asarray(V, dtype=np.float64)
    return Heatmap(np.sqrt(np.sum(V * V, axis=2)), normalized=False, method="proposed")


def normalize(h):
    """Min-max rescale to [0, 1]; a constant map becomes all zeros."""
    v = h.values if isinstance(h, Heatmap) else np.asarray(h, dtype=np.float64)
    method = h.method if isinstance(h, Heatmap) else "proposed"
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros_like(v, dtype=np.float64)
    else:
        out = (v - lo) / (hi - lo)
    return Heatmap(out, normalized=True, method=method)


def threshold_mask(h, t=0.9):
    """Boolean mask of pixels strictly above ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"threshold must lie in [0, 1], got {t}")
    v = h.values if isinstance(h, Heatmap) else np.asarray(h)
    return v > t


def _resolve(clf, branch):
    if isinstance(clf, TeacherStudentModel):
        model = clf

        def run(g, x):
            if branch == "teacher":
                out = classifier(g, model, "teacher", x)
            else:
                out = classifier(g, model, "student", x)
            return {"logits": out["logits"], "features": out["skips"][-1]}
        return run
    return clf


def gradient_saliency(clf, image, cls, branch="teacher"):
    """Channel-wise L2 norm of d(logit[cls]) / d(image), min-max normalized."""
    g = Graph()
    x = g.variable(image)
    out = _resolve(clf, branch)(g, x)
    g.backward(g.pick(out["logits"], int(cls)))
    grad = x.grad if x.grad is not None else np.zeros_like(x.value)
    h = np.sqrt(np.sum(grad * grad, axis=2))
    return normalize(Heatmap(h, method="gradient"))


def gradcam_map(features, grads):
    """relu(sum_k mean(grads_k) * features_k) on the feature map grid."""
    weights = grads.mean(axis=(0, 1))
    return np.maximum(np.tensordot(features, weights, axes=([2], [0])), 0.0)


def bilinear_resize(m, shape):
    """Bilinear interpolation with pixel-centre alignment and edge clamping."""
    zoom = (shape[0] / m.shape[0], shape[1] / m.shape[1])
    out = ndimage.zoom(m, zoom, order=1, mode="nearest", grid_mode=True)
    return out[:shape[0], :shape[1]]


def gradcam(clf, image, cls, branch="teacher"):
    """Grad-CAM on the last convolution block's pre-pool activation."""
    g = Graph()
    x = g.const(image)
    out = _resolve(clf, branch)(g, x)
    A = out["features"]
    g.backward(g.pick(out["logits"], int(cls)))
    dA = A.grad if A.grad is not None else np.zeros_like(A.value)
    cam = gradcam_map(A.value, dA)
    cam = bilinear_resize(cam, np.asarray(image).shape[:2])
    return normalize(Heatmap(cam, method="gradcam"))


def proposed_heatmap(model, image):
    """Normalized distance-from-black map of the decoder output for ``image``.

    Also returns the forward outputs, whose ``V`` is the exact tensor the
    Student consumed.
    """
    out = forward(model, image)
    return normalize(heatmap_from_reconstruction(out.V)), out


def explain(model, image, method, cls=None, branch="teacher"):
    """Normalized heatmap of ``method`` for ``image``.

    ``cls`` defaults to the Teacher's predicted class.
    """
    if method == "proposed":
        return proposed_heatmap(model, image)[0]
    if cls is None:
        g = Graph()
        cls = int(np.argmax(classifier(g, model, branch, g.const(image))["logits"].value))
    if method == "gradient":
        return gradient_saliency(model, image, cls, branch)
    if method == "gradcam":
        return gradcam(model, image, cls, branch)
    raise ParameterError(f"unknown method {method!r}; choose from {METHODS}")


def write_heatmap_pgm(h, path):
    v = h.values if h.normalized else normalize(h).values
    write_pgm(v, path)


def write_heatmap_csv(h, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in h.values:
            w.writerow([repr(float(v)) for v in row])


def read_heatmap_csv(path, method="proposed", normalized=True):
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh)]
    return Heatmap(np.array(rows), normalized=normalized, method=method)


__all__ = [
    "Heatmap", "METHODS", "heatmap_from_reconstruction", "normalize", "threshold_mask",
    "gradient_saliency", "gradcam", "gradcam_map", "bilinear_resize", "proposed_heatmap",
    "explain", "write_heatmap_pgm", "write_heatmap_csv", "read_heatmap_csv",
]
