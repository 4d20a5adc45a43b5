"""Pure-Python step kernel.

Reference implementation and fallback for the compiled ``_ckernel``. Both
evaluate the same floating-point expressions in the same order, so traces
agree bit for bit across backends.
"""
import numpy as np

FIRE_EPS = 1e-9


class Kernel:
    def __init__(self, c):
        self.n = c.n
        self.m = c.m
        self.act = [float(x) for x in c.act]
        self.net = [0.0] * c.n
        self.gain = [float(x) for x in c.gain]
        self.exc_ptr = c.exc_ptr.tolist()
        self.exc_idx = c.exc_idx.tolist()
        self.exc_w = c.exc_w.tolist()
        self.comp_ptr = c.comp_ptr.tolist()
        self.comp_idx = c.comp_idx.tolist()
        self.blk_ptr = c.blk_ptr.tolist()
        self.blk_idx = c.blk_idx.tolist()
        self.mem_ptr = c.mem_ptr.tolist()
        self.mem_idx = c.mem_idx.tolist()
        self.in_ptr = c.in_ptr.tolist()
        self.in_idx = c.in_idx.tolist()
        self.in_w = c.in_w.tolist()
        self.child_ptr = c.child_ptr.tolist()
        self.child_idx = c.child_idx.tolist()
        self.grp = c.grp.tolist()
        self.n_grp = c.n_grp
        self.thr = c.thr.tolist()
        self.acc = [float(x) for x in c.acc]
        self.refr = [int(x) for x in c.refr]
        self.held = [int(x) for x in c.held]
        self.dt = c.dt
        self.leak = c.leak
        self.lat = c.lat
        self.delta = c.delta
        self.rlen = c.rlen
        self.crefr = c.crefr

    def step(self, ext):
        act, net = self.act, self.net
        new = [0.0] * self.n
        dt, leak, lat = self.dt, self.leak, self.lat
        refr, held = self.refr, self.held
        for i in range(self.n):
            s = 0.0
            for p in range(self.exc_ptr[i], self.exc_ptr[i + 1]):
                s += self.exc_w[p] * act[self.exc_idx[p]]
            s = (s + ext[i]) * self.gain[i]
            net[i] = s
            mx = 0.0
            for p in range(self.comp_ptr[i], self.comp_ptr[i + 1]):
                v = act[self.comp_idx[p]]
                if v > mx:
                    mx = v
            blocked = False
            for p in range(self.blk_ptr[i], self.blk_ptr[i + 1]):
                k = self.blk_idx[p]
                if refr[k] > 0 or held[k]:
                    blocked = True
                    break
            if blocked:
                v = 0.0
            else:
                a = act[i]
                v = a + dt * (s - leak * a - lat * mx)
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
            new[i] = v
        self.act = new

    def step_inhibitors(self):
        act, acc, refr, held = self.act, self.acc, self.refr, self.held
        fired = []
        for k in range(self.m):
            if refr[k] > 0:
                refr[k] -= 1
                continue
            if held[k]:
                continue
            s = 0.0
            for p in range(self.in_ptr[k], self.in_ptr[k + 1]):
                s += self.in_w[p] * act[self.in_idx[p]]
            acc[k] += self.delta * s
            if acc[k] >= self.thr[k] - FIRE_EPS:
                acc[k] = 0.0
                refr[k] = self.rlen
                held[k] = 1
                fired.append(k)
        for k in fired:
            for p in range(self.child_ptr[k], self.child_ptr[k + 1]):
                c = self.child_idx[p]
                acc[c] = 0.0
                refr[c] = self.crefr
                held[c] = 0
        # a group is released once no driven member is still waiting for its turn
        has_held = [0] * self.n_grp
        waiting = [0] * self.n_grp
        net = self.net
        for k in range(self.m):
            g = self.grp[k]
            if held[k]:
                has_held[g] = 1
            else:
                for p in range(self.mem_ptr[k], self.mem_ptr[k + 1]):
                    if net[self.mem_idx[p]] > 0.0:
                        waiting[g] = 1
                        break
        for k in range(self.m):
            g = self.grp[k]
            if has_held[g] and not waiting[g]:
                held[k] = 0

    def run(self, drive, out):
        n_steps = drive.shape[0]
        for t in range(n_steps):
            self.step(drive[t].tolist())
            self.step_inhibitors()
            out[t, :] = self.act

    def state(self):
        return (np.array(self.act, dtype=np.float64), np.array(self.net, dtype=np.float64),
                np.array(self.acc, dtype=np.float64), np.array(self.refr, dtype=np.int64),
                np.array(self.held, dtype=np.uint8))
