"""Independent reference implementations shared by the test modules."""

import numpy as np


def ssim_reference(x, y, size=11, sigma=1.5):
    """Naive per-pixel windowed-statistics SSIM with symmetric padding,
    channel-averaged. Deliberately slow and independent of the library's
    separable-filter implementation."""
    pad = size // 2
    r = np.arange(size) - pad
    k1 = np.exp(-r * r / (2 * sigma * sigma))
    kernel = np.outer(k1, k1)
    kernel /= kernel.sum()
    h, w, c = x.shape
    out = np.zeros((h, w))
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    for ch in range(c):
        xp = np.pad(x[:, :, ch], pad, mode="symmetric")
        yp = np.pad(y[:, :, ch], pad, mode="symmetric")
        for i in range(h):
            for j in range(w):
                wx = xp[i:i + size, j:j + size]
                wy = yp[i:i + size, j:j + size]
                mx = (kernel * wx).sum()
                my = (kernel * wy).sum()
                vx = (kernel * wx * wx).sum() - mx * mx
                vy = (kernel * wy * wy).sum() - my * my
                cxy = (kernel * wx * wy).sum() - mx * my
                out[i, j] += (((2 * mx * my + c1) * (2 * cxy + c2))
                              / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return out / c
