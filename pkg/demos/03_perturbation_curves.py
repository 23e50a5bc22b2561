"""
Erase by heatmap bins and watch the classifier lose confidence
==============================================================

Algorithm: erase pixels bin by bin from the hottest tenth of the heatmap down
to the zero pixels, each with a 3x3 black stamp, and record the Teacher's
probability for its original decision.  The area over that curve (AOPC)
rewards heatmaps that put the evidence first.
"""
import numpy as np

from tsviz import TeacherStudentModel, TrainConfig, explain, generate, train
from tsviz.perturbation import compare_method, format_summary, perturb_image, probability_fn
from tsviz.perturbation import localization_iou
from tsviz.viz import threshold_mask

data = generate(num_classes=4, per_class=48, seed=1)
model = TeacherStudentModel(seed=1)
train(model, data, TrainConfig(learning_rate=3e-3, epochs=8, clip_norm=2.0), log=print)

samples = data.validation[:24]
comparisons = []
for method in ("proposed", "gradient", "gradcam"):
    results, maps, ious = [], [], []
    for s in samples:
        h = explain(model, s.image, method)
        results.append(perturb_image(s.image, h, probability_fn(model, s.image), s.id, method))
        maps.append(h)
        if s.label:
            ious.append(localization_iou(threshold_mask(h), s.lesion_mask))
    comparisons.append(compare_method(method, results, maps, ious))

print(format_summary(comparisons))

# the mean curves: f(X^j) for j = 0..11
for c in comparisons:
    print(f"{c.method:<9}", np.round(c.curve, 3))
