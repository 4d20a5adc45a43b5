# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled step kernel; mirrors ``_pykernel.Kernel`` operation for operation."""
import numpy as np

cdef double FIRE_EPS = 1e-9


cdef class Kernel:
    cdef public int n, m, n_grp, rlen, crefr
    cdef public double dt, leak, lat, delta
    cdef double[::1] act, new, net, gain, exc_w, in_w, thr, acc
    cdef int[::1] exc_ptr, exc_idx, comp_ptr, comp_idx, blk_ptr, blk_idx
    cdef int[::1] mem_ptr, mem_idx, in_ptr, in_idx, child_ptr, child_idx, grp
    cdef int[::1] refr, fired, has_held, waiting
    cdef unsigned char[::1] held

    def __init__(self, c):
        self.n = c.n
        self.m = c.m
        self.n_grp = c.n_grp
        self.rlen = c.rlen
        self.crefr = c.crefr
        self.dt = c.dt
        self.leak = c.leak
        self.lat = c.lat
        self.delta = c.delta
        self.act = np.array(c.act, dtype=np.float64)
        self.new = np.zeros(c.n, dtype=np.float64)
        self.net = np.zeros(c.n, dtype=np.float64)
        self.gain = np.array(c.gain, dtype=np.float64)
        self.exc_ptr = np.array(c.exc_ptr, dtype=np.intc)
        self.exc_idx = np.array(c.exc_idx, dtype=np.intc)
        self.exc_w = np.array(c.exc_w, dtype=np.float64)
        self.comp_ptr = np.array(c.comp_ptr, dtype=np.intc)
        self.comp_idx = np.array(c.comp_idx, dtype=np.intc)
        self.blk_ptr = np.array(c.blk_ptr, dtype=np.intc)
        self.blk_idx = np.array(c.blk_idx, dtype=np.intc)
        self.mem_ptr = np.array(c.mem_ptr, dtype=np.intc)
        self.mem_idx = np.array(c.mem_idx, dtype=np.intc)
        self.in_ptr = np.array(c.in_ptr, dtype=np.intc)
        self.in_idx = np.array(c.in_idx, dtype=np.intc)
        self.in_w = np.array(c.in_w, dtype=np.float64)
        self.child_ptr = np.array(c.child_ptr, dtype=np.intc)
        self.child_idx = np.array(c.child_idx, dtype=np.intc)
        self.grp = np.array(c.grp, dtype=np.intc)
        self.thr = np.array(c.thr, dtype=np.float64)
        self.acc = np.array(c.acc, dtype=np.float64)
        self.refr = np.array(c.refr, dtype=np.intc)
        self.held = np.array(c.held, dtype=np.uint8)
        self.fired = np.zeros(max(c.m, 1), dtype=np.intc)
        self.has_held = np.zeros(max(c.n_grp, 1), dtype=np.intc)
        self.waiting = np.zeros(max(c.n_grp, 1), dtype=np.intc)

    cdef void _step(self, const double[::1] ext) noexcept nogil:
        cdef int i, p, k
        cdef double s, mx, v, a
        cdef bint blocked
        for i in range(self.n):
            s = 0.0
            for p in range(self.exc_ptr[i], self.exc_ptr[i + 1]):
                s += self.exc_w[p] * self.act[self.exc_idx[p]]
            s = (s + ext[i]) * self.gain[i]
            self.net[i] = s
            mx = 0.0
            for p in range(self.comp_ptr[i], self.comp_ptr[i + 1]):
                v = self.act[self.comp_idx[p]]
                if v > mx:
                    mx = v
            blocked = False
            for p in range(self.blk_ptr[i], self.blk_ptr[i + 1]):
                k = self.blk_idx[p]
                if self.refr[k] > 0 or self.held[k]:
                    blocked = True
                    break
            if blocked:
                v = 0.0
            else:
                a = self.act[i]
                v = a + self.dt * (s - self.leak * a - self.lat * mx)
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
            self.new[i] = v
        for i in range(self.n):
            self.act[i] = self.new[i]

    cdef void _step_inhibitors(self) noexcept nogil:
        cdef int k, p, c, g, nf = 0
        cdef double s
        for k in range(self.m):
            if self.refr[k] > 0:
                self.refr[k] -= 1
                continue
            if self.held[k]:
                continue
            s = 0.0
            for p in range(self.in_ptr[k], self.in_ptr[k + 1]):
                s += self.in_w[p] * self.act[self.in_idx[p]]
            self.acc[k] += self.delta * s
            if self.acc[k] >= self.thr[k] - FIRE_EPS:
                self.acc[k] = 0.0
                self.refr[k] = self.rlen
                self.held[k] = 1
                self.fired[nf] = k
                nf += 1
        for p in range(nf):
            k = self.fired[p]
            for c in range(self.child_ptr[k], self.child_ptr[k + 1]):
                g = self.child_idx[c]
                self.acc[g] = 0.0
                self.refr[g] = self.crefr
                self.held[g] = 0
        for g in range(self.n_grp):
            self.has_held[g] = 0
            self.waiting[g] = 0
        for k in range(self.m):
            g = self.grp[k]
            if self.held[k]:
                self.has_held[g] = 1
            else:
                for p in range(self.mem_ptr[k], self.mem_ptr[k + 1]):
                    if self.net[self.mem_idx[p]] > 0.0:
                        self.waiting[g] = 1
                        break
        for k in range(self.m):
            g = self.grp[k]
            if self.has_held[g] and not self.waiting[g]:
                self.held[k] = 0

    def step(self, ext):
        cdef double[::1] e = np.ascontiguousarray(ext, dtype=np.float64)
        self._step(e)

    def step_inhibitors(self):
        self._step_inhibitors()

    def run(self, drive, double[:, ::1] out):
        cdef double[:, ::1] d = np.ascontiguousarray(drive, dtype=np.float64)
        cdef int t, i
        cdef int n_steps = d.shape[0]
        with nogil:
            for t in range(n_steps):
                self._step(d[t])
                self._step_inhibitors()
                for i in range(self.n):
                    out[t, i] = self.act[i]

    def state(self):
        return (np.array(self.act, dtype=np.float64), np.array(self.net, dtype=np.float64),
                np.array(self.acc, dtype=np.float64), np.array(self.refr, dtype=np.int64),
                np.array(self.held, dtype=np.uint8))
