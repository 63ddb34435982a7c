"""Central finite-difference checks of BPTT gradients."""

from dataclasses import dataclass

import numpy as np

KINK_MARGIN = 1e-4


@dataclass
class GradCheckResult:
    worst_rel: float
    worst_name: str
    checked: int
    skipped: int


def _float_view(a):
    return a.view(np.float64) if np.iscomplexobj(a) else a


def near_kink(cell, batch, h0=None, margin=KINK_MARGIN):
    """True if any modReLU pre-activation sits within ``margin`` of a kink.

    The kinks are ``|z| + b = 0`` and ``z = 0``; a central difference that
    straddles one is meaningless.
    """
    if getattr(cell, "kind", "") != "eurnn":
        return False
    x = np.asarray(batch.inputs, dtype=np.float64)
    _, _, _, zs, _ = cell._forward(x, h0, "numpy", keep=False)
    r = np.abs(zs)
    return bool(np.any(np.abs(r + cell.b) < margin) or np.any(r < margin))


def check_gradients(cell, batch, loss="ce", h=1e-6, floor=1e-6, h0=None):
    """Compare every analytic gradient entry against a central difference.

    Relative error is ``|fd - an| / max(|fd|, |an|, floor)``. Entries whose
    perturbation moves a modReLU pre-activation across a kink are skipped.
    """
    _, grads = cell.forward_backward(batch, loss, h0)
    worst, worst_name, checked, skipped = 0.0, "", 0, 0
    for name, p in cell.params().items():
        view = _float_view(p)
        gv = _float_view(np.ascontiguousarray(grads.params[name]))
        for idx in np.ndindex(view.shape):
            orig = view[idx]
            view[idx] = orig + h
            lp = cell.forward_backward(batch, loss, h0)[0]
            kink = near_kink(cell, batch, h0)
            view[idx] = orig - h
            lm = cell.forward_backward(batch, loss, h0)[0]
            kink = kink or near_kink(cell, batch, h0)
            view[idx] = orig
            if kink:
                skipped += 1
                continue
            fd = (lp - lm) / (2 * h)
            an = gv[idx]
            rel = abs(fd - an) / max(abs(fd), abs(an), floor)
            checked += 1
            if rel > worst:
                worst, worst_name = rel, f"{name}{list(idx)}"
    return GradCheckResult(worst, worst_name, checked, skipped)
