"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

The Monte Carlo loops draw normals in blocks but consume them in the same
order as the compiled loop, so hit counts and draw counts agree exactly.
Only the generator state after the call differs (blocks overshoot).
"""
import numpy as np

BLOCK = 1 << 16


def pair_trials(generator, mix, threshold, trials):
    m00, m01 = float(mix[0, 0]), float(mix[0, 1])
    m10, m11 = float(mix[1, 0]), float(mix[1, 1])
    done = hits = draws = 0
    while done < trials:
        z = generator.standard_normal((BLOCK, 2))
        x = m00 * z[:, 0] + m01 * z[:, 1]
        y = m10 * z[:, 0] + m11 * z[:, 1]
        events = np.flatnonzero((x >= threshold) | (y >= threshold))
        events = events[: trials - done]
        done += events.size
        hits += int(np.count_nonzero((x[events] >= threshold) & (y[events] >= threshold)))
        draws += int(events[-1]) + 1 if done == trials and events.size else BLOCK
    return hits, draws


def triple_trials(generator, mix, threshold, accepted_target, max_trials):
    m = np.asarray(mix, dtype=np.float64)
    accepted = hits = n_trials = draws = 0
    au = av = aw = -1
    while accepted < accepted_target and n_trials < max_trials:
        z = generator.standard_normal((BLOCK, 3))
        xs = [m[a, 0] * z[:, 0] + m[a, 1] * z[:, 1] + m[a, 2] * z[:, 2] for a in range(3)]
        cu, cv, cw = (x >= threshold for x in xs)
        consumed = BLOCK
        for row in np.flatnonzero(cu | cv | cw):
            step = draws + int(row)
            if au < 0 and cu[row]:
                au = step
            if av < 0 and cv[row]:
                av = step
            if aw < 0 and cw[row]:
                aw = step
            if au >= 0 or av >= 0:
                n_trials += 1
                if au == av:
                    accepted += 1
                    if aw == au:
                        hits += 1
                au = av = aw = -1
                if accepted >= accepted_target or n_trials >= max_trials:
                    consumed = int(row) + 1
                    break
        draws += consumed
    return accepted, hits, n_trials, draws


def first_capture(dirs, pts, threshold, out, offset):
    if pts.shape[1] != dirs.shape[1]:
        raise ValueError("dimension mismatch")
    todo = np.flatnonzero(out < 0)
    if todo.size and dirs.shape[0]:
        hit = (pts[todo] @ dirs.T) >= threshold
        caught = hit.any(axis=1)
        out[todo[caught]] = offset + hit[caught].argmax(axis=1)
    return int(np.count_nonzero(out < 0))
