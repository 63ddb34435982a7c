"""Fused numba kernels for whole-sequence EURNN forward and BPTT.

Same arithmetic as the numpy path in ``cell.EurnnCell`` (layer kernels
``y = v1*x + v2*x[perm]``, diagonal phase, modReLU), but one pass per
(time, batch row) instead of one numpy call per operation. Layer
activations are recomputed from the stored hidden state during the backward
pass, and angle gradients are accumulated per coordinate, then reduced to
per-pair values once at the end.
"""

import numpy as np
import numba as nb


@nb.njit(cache=True, inline="always")
def _modulus(z):
    return np.sqrt(z.real * z.real + z.imag * z.imag)


@nb.njit(cache=True)
def forward(ux, h0, v1, v2, perm, phases, b, hs, zs):
    steps, bsz, n = ux.shape
    n_layers = v1.shape[0]
    bufs = np.empty((2, n), np.complex128)
    for t in range(steps):
        for bi in range(bsz):
            src = h0[bi] if t == 0 else hs[t - 1, bi]
            for k in range(n):
                bufs[0, k] = src[k]
            cur = 0
            for l in range(n_layers - 1, -1, -1):
                x = bufs[cur]
                y = bufs[1 - cur]
                for k in range(n):
                    y[k] = v1[l, k] * x[k] + v2[l, k] * x[perm[l, k]]
                cur = 1 - cur
            for k in range(n):
                z = ux[t, bi, k] + phases[k] * bufs[cur, k]
                zs[t, bi, k] = z
                r = _modulus(z)
                s = r + b[k]
                hs[t, bi, k] = z * (s / r) if (s > 0.0 and r > 0.0) else 0.0j


@nb.njit(cache=True)
def backward(h0, hs, zs, dfeat, v1, v2, perm, inv, phases, b,
             g, dzs, r_acc, q_acc, dw_acc, db_acc, norms):
    """Reverse-time sweep. ``g`` enters as zeros and leaves holding dC/dh0.

    ``dfeat`` (T, B, 2n) is the output head's gradient w.r.t. [Re h; Im h].
    """
    steps, bsz, n = hs.shape
    n_layers = v1.shape[0]
    # acts[l] is the input of layer l, acts[n_layers] the diagonal's input
    acts = np.empty((n_layers + 1, n), np.complex128)
    cots = np.empty((2, n), np.complex128)
    for t in range(steps - 1, -1, -1):
        nsq = 0.0
        for bi in range(bsz):
            for k in range(n):
                gk = g[bi, k] + (dfeat[t, bi, k] + 1j * dfeat[t, bi, n + k])
                g[bi, k] = gk
                nsq += gk.real * gk.real + gk.imag * gk.imag
        norms[t + 1] = np.sqrt(nsq)

        for bi in range(bsz):
            src = h0[bi] if t == 0 else hs[t - 1, bi]
            for k in range(n):
                acts[n_layers - 1, k] = src[k]
            for l in range(n_layers - 1, -1, -1):
                x = acts[l]
                y = acts[l - 1] if l >= 1 else acts[n_layers]
                for k in range(n):
                    y[k] = v1[l, k] * x[k] + v2[l, k] * x[perm[l, k]]

            for k in range(n):
                z = zs[t, bi, k]
                r = _modulus(z)
                s = r + b[k]
                if s > 0.0 and r > 0.0:
                    u = z / r
                    gu = np.conj(u) * g[bi, k]
                    dz = u * (gu.real + 1j * (s / r) * gu.imag)
                    db_acc[k] += gu.real
                else:
                    dz = 0.0j
                dzs[t, bi, k] = dz
                dw_acc[k] -= (np.conj(dz) * phases[k] * acts[n_layers, k]).imag
                cots[0, k] = np.conj(phases[k]) * dz

            cur = 0
            for l in range(n_layers):
                out = acts[l - 1] if l >= 1 else acts[n_layers]
                cot = cots[cur]
                nxt = cots[1 - cur]
                for k in range(n):
                    r_acc[l, k] += np.conj(cot[perm[l, k]]) * out[k]
                    q_acc[l, k] += np.conj(cot[k]) * out[k]
                for k in range(n):
                    m = inv[l, k]
                    nxt[k] = np.conj(v1[l, k]) * cot[k] + np.conj(v2[l, m]) * cot[m]
                cur = 1 - cur
            for k in range(n):
                g[bi, k] = cots[cur, k]

    nsq = 0.0
    for bi in range(bsz):
        for k in range(n):
            nsq += g[bi, k].real ** 2 + g[bi, k].imag ** 2
    norms[0] = np.sqrt(nsq)


def stack_kernels(cw):
    v1 = np.stack([k.v1 for k in cw.kernels])
    v2 = np.stack([k.v2 for k in cw.kernels])
    perm = np.stack([k.perm.forward for k in cw.kernels]).astype(np.int64)
    inv = np.stack([k.perm.inverse for k in cw.kernels]).astype(np.int64)
    return v1, v2, perm, inv
