"""Pure NumPy fallback for the embedding-training inner loop.

This is the reference semantics for provsem._speedups.train_epoch: one
negative-sampling update per (sentence, target) step, with all dot
products of a step taken against the pre-step output rows and duplicate
indices accumulating.  The compiled kernel performs the same operations
in the same order; results agree to floating-point rounding.
"""

import numpy as np

#: Logit clamp; keeps exp/log well away from overflow in both kernels.
MAX_LOGIT = 30.0


def train_epoch(
    vin,
    vout,
    step_targets,
    ctx_indices,
    ctx_offsets,
    sent_ranges,
    order,
    negatives,
    lr0,
    min_lr,
    step_base,
    total_steps,
):
    """Run one epoch of negative-sampling updates in place.

    Sentences are visited in `order`; steps within a sentence stay
    sequential.  Negative target ids are pre-drawn per step so that both
    kernel implementations consume identical randomness.  Returns the
    summed loss over all steps.
    """
    total_loss = 0.0
    t = step_base
    for s in order:
        for step in range(sent_ranges[s], sent_ranges[s + 1]):
            lr = lr0 * (1.0 - t / total_steps)
            if lr < min_lr:
                lr = min_lr
            t += 1

            target = step_targets[step]
            ctx = ctx_indices[ctx_offsets[step] : ctx_offsets[step + 1]]
            n_ctx = len(ctx)
            h = vin[ctx].sum(axis=0) / n_ctx

            rows = [target] + [j for j in negatives[step] if j != target]
            rows = np.asarray(rows, dtype=np.int64)
            labels = np.zeros(len(rows))
            labels[0] = 1.0

            snapshot = vout[rows]
            x = np.clip(snapshot @ h, -MAX_LOGIT, MAX_LOGIT)
            f = 1.0 / (1.0 + np.exp(-x))
            total_loss += float(-(np.log(np.where(labels > 0.5, f, 1.0 - f))).sum())

            g = (labels - f) * lr
            gh = g @ snapshot
            np.add.at(vout, rows, g[:, None] * h[None, :])
            np.add.at(vin, ctx, gh / n_ctx)
    return total_loss
