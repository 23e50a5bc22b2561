"""Teacher / Decoder / Student network and its multitask loss.

The Teacher is a small VGG-style classifier (``len(channels)`` blocks of two
3x3 convolutions followed by 2x2 max pooling, then two hidden dense layers and
a softmax head).  The decoder mirrors it: two reversed dense layers (the first
one receives the Teacher's first dense activation as an additive skip), one
deconvolution block per encoder block, and two refinement convolutions that
squeeze the signal to 2 channels and expand it back to a 3-channel sigmoid
image ``V``.  The Student has the Teacher's layer plan and classifies ``V``.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .autodiff import Graph, Parameter
from .errors import DimensionError, ParameterError

BRANCHES = ("teacher", "decoder", "student")


@dataclass
class NetworkConfig:
    image_size: int = 32
    channels: list = field(default_factory=lambda: [16, 32, 64])
    fc_width: int = 64
    num_classes: int = 4
    alpha: float = 0.4

    def __post_init__(self):
        self.channels = [int(c) for c in self.channels]
        if not self.channels:
            raise ParameterError("channels must list at least one block")
        if self.image_size % (2 ** len(self.channels)):
            raise ParameterError(
                f"image_size {self.image_size} is not divisible by 2**{len(self.channels)}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.num_classes < 2:
            raise ParameterError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def bottleneck(self):
        """Spatial side and depth of the deepest pooled feature map."""
        return self.image_size // 2 ** len(self.channels), self.channels[-1]

    def to_dict(self):
        return asdict(self)


def _classifier_shapes(cfg, prefix):
    shapes = {}
    cin = 3
    for i, c in enumerate(cfg.channels):
        for j in range(2):
            shapes[f"{prefix}/block{i}/conv{j}/w"] = (3, 3, cin, c)
            shapes[f"{prefix}/block{i}/conv{j}/b"] = (c,)
            cin = c
    side, depth = cfg.bottleneck
    flat = side * side * depth
    shapes[f"{prefix}/fc1/w"] = (flat, cfg.fc_width)
    shapes[f"{prefix}/fc1/b"] = (cfg.fc_width,)
    shapes[f"{prefix}/fc2/w"] = (cfg.fc_width, cfg.fc_width)
    shapes[f"{prefix}/fc2/b"] = (cfg.fc_width,)
    shapes[f"{prefix}/logits/w"] = (cfg.fc_width, cfg.num_classes)
    shapes[f"{prefix}/logits/b"] = (cfg.num_classes,)
    return shapes


def _decoder_shapes(cfg):
    side, depth = cfg.bottleneck
    shapes = {
        "decoder/rfc1/w": (cfg.fc_width, cfg.fc_width),
        "decoder/rfc1/b": (cfg.fc_width,),
        "decoder/rfc2/w": (cfg.fc_width, side * side * depth),
        "decoder/rfc2/b": (side * side * depth,),
    }
    z = depth
    for i in reversed(range(len(cfg.channels))):
        z1 = cfg.channels[i]
        p = f"decoder/deconv{i}"
        shapes[f"{p}/conv0/w"] = (3, 3, z, z1)
        shapes[f"{p}/conv0/b"] = (z1,)
        shapes[f"{p}/conv1/w"] = (3, 3, 2 * z1, z1)
        shapes[f"{p}/conv1/b"] = (z1,)
        shapes[f"{p}/conv2/w"] = (3, 3, z1, z1)
        shapes[f"{p}/conv2/b"] = (z1,)
        z = z1
    shapes["decoder/squeeze/w"] = (3, 3, z, 2)
    shapes["decoder/squeeze/b"] = (2,)
    shapes["decoder/expand/w"] = (3, 3, 2, 3)
    shapes["decoder/expand/b"] = (3,)
    return shapes


def parameter_shapes(cfg):
    """Ordered mapping of parameter name to shape for ``cfg``."""
    shapes = _classifier_shapes(cfg, "teacher")
    shapes.update(_decoder_shapes(cfg))
    shapes.update(_classifier_shapes(cfg, "student"))
    return shapes


def _fans(shape):
    if len(shape) == 4:
        recept = shape[0] * shape[1]
        return recept * shape[2], recept * shape[3]
    return shape


def init_weights(rng, shape, scheme="glorot"):
    """Uniform weights; ``glorot`` scales by fan-in + fan-out, ``he`` by fan-in only."""
    fan_in, fan_out = _fans(shape)
    if scheme == "glorot":
        limit = np.sqrt(6.0 / (fan_in + fan_out))
    elif scheme == "he":
        limit = np.sqrt(6.0 / fan_in)
    else:
        raise ParameterError(f"unknown init scheme {scheme!r}")
    return rng.uniform(-limit, limit, size=shape)


class TeacherStudentModel:
    """Parameters for the three branches plus the config that shaped them."""

    def __init__(self, config=None, seed=0, init="he"):
        self.config = config if config is not None else NetworkConfig()
        rng = np.random.default_rng(seed)
        self.params = {}
        for name, shape in parameter_shapes(self.config).items():
            value = np.zeros(shape) if name.endswith("/b") else init_weights(rng, shape, init)
            self.params[name] = Parameter(name, value)

    def branch(self, name):
        """Parameters belonging to ``teacher``, ``decoder`` or ``student``."""
        if name not in BRANCHES:
            raise ValueError(f"unknown branch {name!r}")
        return {k: p for k, p in self.params.items() if k.startswith(name + "/")}

    @property
    def teacher_params(self):
        return self.branch("teacher")

    @property
    def decoder_params(self):
        return self.branch("decoder")

    @property
    def student_params(self):
        return self.branch("student")

    def state(self):
        return {k: p.value for k, p in self.params.items()}

    def copy(self):
        other = TeacherStudentModel.__new__(TeacherStudentModel)
        other.config = NetworkConfig(**self.config.to_dict())
        other.params = {k: Parameter(k, p.value) for k, p in self.params.items()}
        return other

    def num_parameters(self):
        return sum(p.value.size for p in self.params.values())


@dataclass
class ForwardOutputs:
    """Values of one forward pass; ``nodes`` keeps the graph handles."""
    YT: np.ndarray
    YS: np.ndarray
    V: np.ndarray
    teacher_skips: list
    teacher_fc1: np.ndarray
    teacher_logits: np.ndarray
    student_logits: np.ndarray
    graph: Graph = None
    nodes: dict = None


def classifier(g, model, prefix, x):
    """VGG-style classifier on image node ``x``.

    Returns a dict with the ``logits`` node, the pre-pool ``skips`` of every
    block and the ``fc1`` / ``fc2`` activation nodes.
    """
    P = model.params
    skips = []
    h = x
    for i in range(len(model.config.channels)):
        for j in range(2):
            base = f"{prefix}/block{i}/conv{j}"
            h = g.relu(g.conv2d(h, g.param(P[base + "/w"]), g.param(P[base + "/b"])))
        skips.append(h)
        h = g.maxpool2x2(h)
    h = g.flatten(h)
    fc1 = g.relu(g.dense(h, g.param(P[f"{prefix}/fc1/w"]), g.param(P[f"{prefix}/fc1/b"])))
    fc2 = g.relu(g.dense(fc1, g.param(P[f"{prefix}/fc2/w"]), g.param(P[f"{prefix}/fc2/b"])))
    logits = g.dense(fc2, g.param(P[f"{prefix}/logits/w"]), g.param(P[f"{prefix}/logits/b"]))
    return {"logits": logits, "skips": skips, "fc1": fc1, "fc2": fc2}


def deconv_block(g, model, prefix, x, skip):
    """Upsample, convolve to the skip's depth, concatenate, two more convolutions."""
    P = model.params

    def conv(h, name):
        return g.relu(g.conv2d(h, g.param(P[f"{prefix}/{name}/w"]), g.param(P[f"{prefix}/{name}/b"])))

    h = conv(g.upsample2x(x), "conv0")
    if h.shape != skip.shape:
        raise DimensionError(f"{prefix}: upsampled {h.shape} vs skip {skip.shape}", axis=prefix)
    h = g.concat_channels(h, skip)
    h = conv(h, "conv1")
    return conv(h, "conv2")


def decoder(g, model, fc1, fc2, skips):
    """Reconstruct a sigmoid image ``V`` from Teacher features."""
    P = model.params
    side, depth = model.config.bottleneck
    h = g.relu(g.dense(fc2, g.param(P["decoder/rfc1/w"]), g.param(P["decoder/rfc1/b"])))
    h = g.add(h, fc1)
    h = g.relu(g.dense(h, g.param(P["decoder/rfc2/w"]), g.param(P["decoder/rfc2/b"])))
    h = g.reshape(h, (side, side, depth))
    for i in reversed(range(len(model.config.channels))):
        h = deconv_block(g, model, f"decoder/deconv{i}", h, skips[i])
    h = g.relu(g.conv2d(h, g.param(P["decoder/squeeze/w"]), g.param(P["decoder/squeeze/b"])))
    return g.sigmoid(g.conv2d(h, g.param(P["decoder/expand/w"]), g.param(P["decoder/expand/b"])))


def _check_image(model, image):
    s = model.config.image_size
    image = T.as_tensor(image)
    if image.shape != (s, s, 3):
        raise DimensionError(f"input: image shape {image.shape} != ({s}, {s}, 3)", axis="input")
    return image


def build(g, model, image, input_grad=False):
    """Add the full forward pass for one image to graph ``g``; returns its nodes."""
    image = _check_image(model, image)
    x = g.variable(image) if input_grad else g.const(image)
    t = classifier(g, model, "teacher", x)
    V = decoder(g, model, t["fc1"], t["fc2"], t["skips"])
    s = classifier(g, model, "student", V)
    return {"x": x, "teacher": t, "V": V, "student": s}


def forward(model, image, graph=None):
    """Run Teacher, decoder and Student on one image."""
    g = graph if graph is not None else Graph()
    n = build(g, model, image)
    return ForwardOutputs(
        YT=T.softmax(n["teacher"]["logits"].value),
        YS=T.softmax(n["student"]["logits"].value),
        V=n["V"].value,
        teacher_skips=[s.value for s in n["teacher"]["skips"]],
        teacher_fc1=n["teacher"]["fc1"].value,
        teacher_logits=n["teacher"]["logits"].value,
        student_logits=n["student"]["logits"].value,
        graph=g,
        nodes=n,
    )


def classify(model, image, branch="teacher"):
    """Logits of a single classifier branch; skips the decoder for the Teacher."""
    g = Graph()
    if branch == "teacher":
        return classifier(g, model, "teacher", g.const(_check_image(model, image)))["logits"].value
    if branch == "student":
        return forward(model, image, g).student_logits
    raise ValueError(f"unknown classifier branch {branch!r}")


def multitask_loss(YT, YS, label, alpha):
    """Weighted cross-entropy of both heads for one sample: (loss, lossT, lossS)."""
    loss_t = -np.log(max(YT[label], 1e-300))
    loss_s = -np.log(max(YS[label], 1e-300))
    return alpha * loss_t + (1.0 - alpha) * loss_s, loss_t, loss_s


def batch_loss_graph(model, images, labels, alpha=None, graph=None):
    """Graph for the mean multitask loss over a batch.

    Returns ``(graph, loss_node, lossT_node, lossS_node, per_sample)`` where
    ``per_sample`` lists the built node dicts.
    """
    if len(images) != len(labels) or not len(images):
        raise DimensionError("batch: need equal, nonzero numbers of images and labels", axis="batch")
    a = model.config.alpha if alpha is None else alpha
    g = graph if graph is not None else Graph()
    lt, ls, per = [], [], []
    for img, lab in zip(images, labels):
        n = build(g, model, img)
        lt.append(g.softmax_cross_entropy(n["teacher"]["logits"], int(lab)))
        ls.append(g.softmax_cross_entropy(n["student"]["logits"], int(lab)))
        per.append(n)
    inv = 1.0 / len(images)
    loss_t = g.scale(g.add_n(lt), inv)
    loss_s = g.scale(g.add_n(ls), inv)
    loss = g.add(g.scale(loss_t, a), g.scale(loss_s, 1.0 - a))
    return g, loss, loss_t, loss_s, per
