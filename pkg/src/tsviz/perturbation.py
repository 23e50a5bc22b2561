"""Perturbation curves, AOPC, heatmap cluster statistics and localization IoU.

Pixels are erased in descending heatmap bins of width 1/10: step ``j`` in
1..10 erases pixels with value in ``((10-j)/10, (11-j)/10]`` and step 11
erases the zero-valued pixels.  Erasing a pixel stamps a 3x3 black square
centred on it (clipped at the border), and erasure accumulates across steps.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .network import classify
from .tensor import softmax

NUM_STEPS = 11
NUM_BINS = 10
HIST_BINS = 100
STAMP = 3


@dataclass
class PerturbationResult:
    curve: list            # [(j, f(X^j))] for j = 0..11
    aopc: float
    image_id: str = ""
    method: str = ""
    erased: list = field(default_factory=list, repr=False)   # per-step region sizes

    @property
    def f(self):
        return np.array([v for _, v in self.curve])


def bin_region(values, j):
    """Pixels erased at step ``j`` (1..11)."""
    if j < NUM_STEPS:
        upper = (NUM_BINS + 1 - j) / NUM_BINS
        lower = (NUM_BINS - j) / NUM_BINS
        return (values > lower) & (values <= upper)
    return values == 0


def erase(image, region, size=STAMP):
    """Copy of ``image`` with a black ``size`` x ``size`` square on every region pixel."""
    out = np.array(image, dtype=np.float64, copy=True)
    h, w = region.shape
    r = size // 2
    # dilate the region by the stamp footprint, clipped at the borders
    covered = np.zeros_like(region)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ys = slice(max(dy, 0), h + min(dy, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            covered[yd, xd] |= region[ys, xs]
    out[covered] = 0.0
    return out


def perturb_image(image, heatmap, f, image_id="", method=None):
    """Run the cumulative erasure experiment for one image.

    ``f`` maps an image to the classifier's probability for the reference
    class of the unperturbed image.
    """
    values = heatmap.values if hasattr(heatmap, "values") else np.asarray(heatmap)
    if method is None:
        method = getattr(heatmap, "method", "")
    X = np.asarray(image, dtype=np.float64)
    f0 = float(f(X))
    curve = [(0, f0)]
    sizes = []
    total = 0.0
    for j in range(1, NUM_STEPS + 1):
        region = bin_region(values, j)
        sizes.append(int(region.sum()))
        X = erase(X, region)
        fj = float(f(X))
        curve.append((j, fj))
        total += f0 - fj
    return PerturbationResult(curve, total / NUM_STEPS, image_id, method, sizes)


def aopc_from_curve(curve):
    f = np.array([v for _, v in curve])
    return float(np.mean(f[0] - f[1:]))


def mean_aopc(results):
    if not results:
        raise ParameterError("mean_aopc needs at least one result")
    return float(np.mean([r.aopc for r in results]))


def mean_curve(results):
    """Pointwise mean of f over images; returns an array of length 12."""
    if not results:
        raise ParameterError("mean_curve needs at least one result")
    return np.mean([r.f for r in results], axis=0)


def probability_fn(model, image, mode="argmax", label=None, branch="teacher"):
    """Closure ``X -> P(class | X)`` for the reference class of ``image``.

    ``mode='argmax'`` uses the classifier's own decision on ``image``;
    ``mode='label'`` uses the supplied ground-truth ``label``.
    """
    if mode == "argmax":
        cls = int(np.argmax(classify(model, image, branch)))
    elif mode == "label":
        if label is None:
            raise ParameterError("mode='label' needs a label")
        cls = int(label)
    else:
        raise ParameterError(f"unknown f-class mode {mode!r}")

    def f(X):
        return float(softmax(classify(model, X, branch))[cls])
    f.cls = cls
    return f


@dataclass
class ClusterStats:
    C1: float
    C2: float
    C3: float
    histogram: np.ndarray

    def __iter__(self):
        return iter((self.C1, self.C2, self.C3, self.histogram))


def cluster_stats(heatmaps):
    """Population fractions at 0, in (0.2, 0.3] and in (0.9, 1], plus a 100-bin histogram."""
    vals = np.concatenate([np.ravel(h.values if hasattr(h, "values") else h) for h in heatmaps])
    n = vals.size
    c1 = np.count_nonzero(vals == 0) / n
    c2 = np.count_nonzero((vals > 0.2) & (vals <= 0.3)) / n
    c3 = np.count_nonzero((vals > 0.9) & (vals <= 1.0)) / n
    hist, _ = np.histogram(vals, bins=HIST_BINS, range=(0.0, 1.0))
    return ClusterStats(c1, c2, c3, hist)


def localization_iou(mask, truth):
    mask = np.asarray(mask, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if mask.shape != truth.shape:
        raise ParameterError(f"mask shapes differ: {mask.shape} vs {truth.shape}")
    union = np.count_nonzero(mask | truth)
    if union == 0:
        return 1.0
    return np.count_nonzero(mask & truth) / union


@dataclass
class MethodComparison:
    method: str
    curve: np.ndarray
    aopc: float
    clusters: ClusterStats
    iou: float = float("nan")
    results: list = field(default_factory=list, repr=False)


def compare_method(method, results, heatmaps, ious=()):
    return MethodComparison(method, mean_curve(results), mean_aopc(results),
                            cluster_stats(heatmaps), float(np.mean(ious)) if len(ious) else float("nan"),
                            list(results))


# CSV outputs

def write_curve_csv(comparison, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "mean_f"])
        for j, v in enumerate(comparison.curve):
            w.writerow([j, repr(float(v))])


def write_aopc_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "method", "aopc"] + [f"f{j}" for j in range(NUM_STEPS + 1)])
        for r in results:
            w.writerow([r.image_id, r.method, repr(r.aopc)] + [repr(v) for _, v in r.curve])


def write_clusters_csv(comparison, path):
    c = comparison.clusters
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C1", "C2", "C3"])
        w.writerow([repr(c.C1), repr(c.C2), repr(c.C3)])
        w.writerow([])
        w.writerow(["bin_lo", "bin_hi", "count"])
        edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
        for i, n in enumerate(c.histogram):
            w.writerow([repr(edges[i]), repr(edges[i + 1]), int(n)])


SUMMARY_FIELDS = ["method", "mean_aopc", "mean_iou", "C1", "C2", "C3"]


def summary_rows(comparisons):
    return [{"method": c.method, "mean_aopc": c.aopc, "mean_iou": c.iou,
             "C1": c.clusters.C1, "C2": c.clusters.C2, "C3": c.clusters.C3} for c in comparisons]


def write_summary_csv(comparisons, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in summary_rows(comparisons):
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def format_summary(comparisons):
    lines = [f"{'method':<10} {'AOPC':>7} {'IoU':>7} {'C1':>6} {'C2':>6} {'C3':>6}"]
    for r in summary_rows(comparisons):
        lines.append(f"{r['method']:<10} {r['mean_aopc']:7.3f} {r['mean_iou']:7.3f} "
                     f"{r['C1']:6.3f} {r['C2']:6.3f} {r['C3']:6.3f}")
    return "\n".join(lines)
