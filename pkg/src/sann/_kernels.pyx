# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_pykernels`` with the same
signature and, for the Monte Carlo loops, the same output for the same
``numpy.random.Generator`` state: both consume standard normals from the
generator in the same order and combine them with the same floating
point operations.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal


cdef bitgen_t* _bitgen(object generator) except NULL:
    capsule = generator.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a BitGenerator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def pair_trials(object generator, double[:, ::1] mix, double threshold,
                int64_t trials):
    """Run ``trials`` capture events for two correlated projections.

    Each draw is ``x = mix @ z`` with ``z`` two fresh standard normals. A
    draw is an event when either coordinate reaches ``threshold``; a hit is
    an event where both do. Returns ``(hits, draws)``.
    """
    cdef bitgen_t* rng = _bitgen(generator)
    cdef double m00 = mix[0, 0], m01 = mix[0, 1]
    cdef double m10 = mix[1, 0], m11 = mix[1, 1]
    cdef double z0, z1, x, y
    cdef int64_t done = 0, hits = 0, draws = 0
    with generator.bit_generator.lock, nogil:
        while done < trials:
            z0 = random_standard_normal(rng)
            z1 = random_standard_normal(rng)
            draws += 1
            x = m00 * z0 + m01 * z1
            y = m10 * z0 + m11 * z1
            if x >= threshold or y >= threshold:
                done += 1
                if x >= threshold and y >= threshold:
                    hits += 1
    return hits, draws


def triple_trials(object generator, double[:, ::1] mix, double threshold,
                  int64_t accepted_target, int64_t max_trials):
    """Simulate the cap-carving process on three points u, v, w.

    One trial runs the carving until u or v is assigned; the trial is accepted
    when both are assigned by that same cap (otherwise they are separated
    for good) and scores a hit when w was carved by it too. Returns
    ``(accepted, hits, trials, draws)``.
    """
    cdef bitgen_t* rng = _bitgen(generator)
    cdef double m[3][3]
    cdef int a, b
    for a in range(3):
        for b in range(3):
            m[a][b] = mix[a, b]
    cdef double z0, z1, z2, xu, xv, xw
    cdef int64_t accepted = 0, hits = 0, n_trials = 0, draws = 0
    cdef int64_t au, av, aw
    with generator.bit_generator.lock, nogil:
        while accepted < accepted_target and n_trials < max_trials:
            au = -1
            av = -1
            aw = -1
            while au < 0 and av < 0:
                z0 = random_standard_normal(rng)
                z1 = random_standard_normal(rng)
                z2 = random_standard_normal(rng)
                xu = m[0][0] * z0 + m[0][1] * z1 + m[0][2] * z2
                xv = m[1][0] * z0 + m[1][1] * z1 + m[1][2] * z2
                xw = m[2][0] * z0 + m[2][1] * z1 + m[2][2] * z2
                if au < 0 and xu >= threshold:
                    au = draws
                if av < 0 and xv >= threshold:
                    av = draws
                if aw < 0 and xw >= threshold:
                    aw = draws
                draws += 1
            n_trials += 1
            if au == av:
                accepted += 1
                if aw == au:
                    hits += 1
    return accepted, hits, n_trials, draws


def first_capture(const double[:, ::1] dirs, const double[:, ::1] pts,
                  double threshold, int64_t[::1] out, int64_t offset):
    """For rows of ``pts`` with ``out < 0``, record the first direction whose
    inner product reaches ``threshold`` as ``offset + row``.

    Returns the number of points still uncaptured.
    """
    cdef Py_ssize_t n_dirs = dirs.shape[0], n_pts = pts.shape[0]
    cdef Py_ssize_t dim = dirs.shape[1]
    cdef Py_ssize_t i, r, k
    cdef double acc
    cdef int64_t left = 0
    if pts.shape[1] != dim:
        raise ValueError("dimension mismatch")
    with nogil:
        for i in range(n_pts):
            if out[i] >= 0:
                continue
            for r in range(n_dirs):
                acc = 0.0
                for k in range(dim):
                    acc = acc + dirs[r, k] * pts[i, k]
                if acc >= threshold:
                    out[i] = offset + r
                    break
            if out[i] < 0:
                left += 1
    return left
