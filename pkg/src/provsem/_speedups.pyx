# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop for embedding training.

Mirrors provsem._embed_pure.train_epoch step for step: per-step dot
products read the pre-step output rows, updates are applied afterwards,
and duplicate indices accumulate.  Only the floating-point summation
order differs from the NumPy version, so outputs agree to rounding.
"""

from libc.math cimport exp, log
from libc.stdlib cimport free, malloc

cdef double MAX_LOGIT = 30.0


def train_epoch(
    double[:, ::1] vin,
    double[:, ::1] vout,
    int[::1] step_targets,
    int[::1] ctx_indices,
    long long[::1] ctx_offsets,
    long long[::1] sent_ranges,
    long long[::1] order,
    int[:, ::1] negatives,
    double lr0,
    double min_lr,
    long long step_base,
    long long total_steps,
):
    cdef Py_ssize_t dim = vin.shape[1]
    cdef Py_ssize_t n_sent = order.shape[0]
    cdef Py_ssize_t k = negatives.shape[1]
    cdef Py_ssize_t si, step, c, d, m, n_rows, n_ctx, j
    cdef long long s, t = step_base
    cdef double lr, x, f, g, label, inv_ctx
    cdef double total_loss = 0.0

    cdef double *h = <double *> malloc(dim * sizeof(double))
    cdef double *gh = <double *> malloc(dim * sizeof(double))
    cdef double *gs = <double *> malloc((k + 1) * sizeof(double))
    cdef Py_ssize_t *rows = <Py_ssize_t *> malloc((k + 1) * sizeof(Py_ssize_t))
    if h == NULL or gh == NULL or gs == NULL or rows == NULL:
        free(h); free(gh); free(gs); free(rows)
        raise MemoryError()

    try:
        for si in range(n_sent):
            s = order[si]
            for step in range(sent_ranges[s], sent_ranges[s + 1]):
                lr = lr0 * (1.0 - <double> t / <double> total_steps)
                if lr < min_lr:
                    lr = min_lr
                t += 1

                n_ctx = ctx_offsets[step + 1] - ctx_offsets[step]
                inv_ctx = 1.0 / <double> n_ctx
                for d in range(dim):
                    h[d] = 0.0
                for c in range(n_ctx):
                    j = ctx_indices[ctx_offsets[step] + c]
                    for d in range(dim):
                        h[d] += vin[j, d]
                for d in range(dim):
                    h[d] *= inv_ctx

                rows[0] = step_targets[step]
                n_rows = 1
                for m in range(k):
                    if negatives[step, m] != step_targets[step]:
                        rows[n_rows] = negatives[step, m]
                        n_rows += 1

                # First pass against the pre-step rows: logits, loss, and
                # the context gradient.
                for d in range(dim):
                    gh[d] = 0.0
                for m in range(n_rows):
                    label = 1.0 if m == 0 else 0.0
                    x = 0.0
                    for d in range(dim):
                        x += h[d] * vout[rows[m], d]
                    if x > MAX_LOGIT:
                        x = MAX_LOGIT
                    elif x < -MAX_LOGIT:
                        x = -MAX_LOGIT
                    f = 1.0 / (1.0 + exp(-x))
                    if label > 0.5:
                        total_loss -= log(f)
                    else:
                        total_loss -= log(1.0 - f)
                    g = (label - f) * lr
                    gs[m] = g
                    for d in range(dim):
                        gh[d] += g * vout[rows[m], d]

                # Second pass applies the updates; duplicates accumulate.
                for m in range(n_rows):
                    for d in range(dim):
                        vout[rows[m], d] += gs[m] * h[d]
                for c in range(n_ctx):
                    j = ctx_indices[ctx_offsets[step] + c]
                    for d in range(dim):
                        vin[j, d] += gh[d] * inv_ctx
    finally:
        free(h)
        free(gh)
        free(gs)
        free(rows)

    return total_loss
