"""
Train a small Teacher/Student network and look at what it reconstructs
======================================================================

Generates synthetic leaves, trains for a few epochs and writes the three
kinds of heatmap for a handful of validation images as PGM files.  Takes a
few minutes on one core; pass a larger epoch count for sharper maps.
"""
import os
import sys

import numpy as np

from tsviz import NetworkConfig, TeacherStudentModel, TrainConfig, explain, generate, train
from tsviz.imageio import write_pgm, write_ppm
from tsviz.viz import threshold_mask

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 8
out = "demo_out"
os.makedirs(out, exist_ok=True)

# 4 classes (healthy + 3 lesion types), 32x32, black background
data = generate(num_classes=4, per_class=48, seed=0)
print(len(data.train), "train /", len(data.validation), "validation")

model = TeacherStudentModel(NetworkConfig(), seed=0)
cfg = TrainConfig(learning_rate=3e-3, epochs=epochs, clip_norm=2.0)
report = train(model, data, cfg, log=print)
report.to_csv(os.path.join(out, "train.csv"))

# The proposed heatmap is the distance-from-black of the decoder output V,
# i.e. of the image the Student actually classifies.
for s in data.validation[:6]:
    write_ppm(s.image, os.path.join(out, f"{s.id}.ppm"))
    for method in ("proposed", "gradient", "gradcam"):
        h = explain(model, s.image, method)
        write_pgm(h.values, os.path.join(out, f"{s.id}.{method}.pgm"))
        write_pgm(threshold_mask(h).astype(float), os.path.join(out, f"{s.id}.{method}.mask.pgm"))
    print(s.id, "lesion pixels", int(s.lesion_mask.sum()))

print("wrote images to", out)
