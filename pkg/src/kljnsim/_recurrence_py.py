"""Pure-numpy fallback for the recurrence kernel (same contract as the .pyx)."""


def recurrence_scan(p, qu, x0, out):
    """Fill out[k] = p @ out[k-1] + qu[k-1], with out[0] = x0.

    p: (m, m); qu: (t-1, m); x0: (m,); out: (t, m), time-major.
    """
    out[0] = x0
    x = x0
    for k in range(1, out.shape[0]):
        x = p @ x + qu[k - 1]
        out[k] = x
