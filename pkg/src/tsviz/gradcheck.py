"""Compare analytic adjoints with central finite differences."""
from dataclasses import dataclass, field

import numpy as np

from .network import batch_loss_graph


@dataclass
class ParamCheck:
    name: str
    max_rel_error: float
    max_abs_error: float
    entries: int
    passed: bool
    kinks: int = 0


@dataclass
class GradcheckReport:
    step: float
    tolerance: float
    params: list = field(default_factory=list)

    @property
    def passed(self):
        return all(p.passed for p in self.params)

    @property
    def failures(self):
        return [p for p in self.params if not p.passed]

    @property
    def max_rel_error(self):
        return max((p.max_rel_error for p in self.params), default=0.0)

    def format(self):
        lines = [f"{'parameter':<34} {'entries':>7} {'kinks':>5} {'max rel':>10} {'max abs':>10}  status"]
        for p in self.params:
            lines.append(f"{p.name:<34} {p.entries:7d} {p.kinks:5d} {p.max_rel_error:10.2e} "
                         f"{p.max_abs_error:10.2e}  {'ok' if p.passed else 'FAIL'}")
        lines.append(f"{'PASS' if self.passed else 'FAIL'}: step {self.step:g}, "
                     f"tolerance {self.tolerance:g}, worst {self.max_rel_error:.2e}")
        return "\n".join(lines)


def _candidates(analytic, max_entries, rng):
    """Probe order: all entries, or the largest adjoints first and then random ones."""
    flat = np.abs(analytic).ravel()
    if max_entries is None or flat.size <= max_entries:
        return np.arange(flat.size)
    k = max_entries // 2
    top = np.argsort(-flat, kind="stable")[:k]
    rest = np.setdiff1d(np.arange(flat.size), top)
    return np.concatenate([top, rng.permutation(rest)])


def _same_pattern(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def gradcheck_fn(loss_fn, params, step=1e-5, tolerance=1e-5, atol=1e-10,
                 max_entries=None, seed=0, kink_guard=True, max_tries=None):
    """Check ``loss_fn`` against its adjoints for every parameter in ``params``.

    ``loss_fn()`` must build a fresh graph and return ``(graph, scalar_node)``.
    Entry-wise relative error is ``|a - n| / max(|a|, |n|)``; entries where
    both magnitudes are below ``atol`` are compared absolutely against ``atol``.

    ``max_entries`` caps the entries probed per parameter.  With
    ``kink_guard`` an entry whose +step or -step evaluation flips a relu sign
    or a max-pool winner is not differentiable on that interval; it is skipped
    and counted in ``ParamCheck.kinks``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    g, root = loss_fn()
    g.backward(root)
    grads = g.param_grads()
    base = g.activation_pattern() if kink_guard else None
    report = GradcheckReport(step, tolerance)
    for p in params:
        analytic = grads.get(p.name, np.zeros_like(p.value)).reshape(-1)
        flat = p.value.reshape(-1)     # view into the live parameter
        want = flat.size if max_entries is None else min(max_entries, flat.size)
        limit = max_tries if max_tries is not None else 20 * want
        a, n, kinks = [], [], 0
        for tries, i in enumerate(_candidates(analytic, max_entries, rng)):
            if len(a) == want or tries >= limit:
                break
            old = flat[i]
            flat[i] = old + step
            g_up, r_up = loss_fn()
            flat[i] = old - step
            g_dn, r_dn = loss_fn()
            flat[i] = old
            if kink_guard and not (_same_pattern(base, g_up.activation_pattern())
                                   and _same_pattern(base, g_dn.activation_pattern())):
                kinks += 1
                continue
            a.append(analytic[i])
            n.append((float(r_up.value) - float(r_dn.value)) / (2.0 * step))
        a, n = np.array(a), np.array(n)
        err = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        tiny = scale < atol
        rel = np.where(tiny, 0.0, err / np.where(tiny, 1.0, scale))
        ok = len(a) > 0 and bool(np.all(np.where(tiny, err <= atol, rel < tolerance)))
        report.params.append(ParamCheck(p.name, float(rel.max(initial=0.0)),
                                        float(err.max(initial=0.0)), len(a), ok, kinks))
    return report


def gradcheck(model, batch, step=1e-5, tolerance=1e-5, max_entries=None, seed=0, atol=1e-10,
              kink_guard=True):
    """Finite-difference check of the multitask loss for every model parameter.

    ``batch`` is a sequence of ``(image, label)`` pairs.
    """
    images = [np.asarray(im, dtype=np.float64) for im, _ in batch]
    labels = [int(lab) for _, lab in batch]

    def loss_fn():
        g, loss, *_ = batch_loss_graph(model, images, labels)
        return g, loss

    return gradcheck_fn(loss_fn, list(model.params.values()), step, tolerance, atol,
                        max_entries, seed, kink_guard)
