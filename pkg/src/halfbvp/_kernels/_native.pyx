# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: expression bytecode VM and the half-line DOPRI5 loop.

Arithmetic is written in the same order as the pure-Python path so both
backends produce the same trajectories up to libm differences.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, sqrt, fabs, pow, floor, isfinite, INFINITY
from libc.stdlib cimport malloc, free

from .. import exprlang as el
from ..numerics.ode import Trajectory

cnp.import_array()

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_POW = 6
    OP_NEG = 7
    OP_SIN = 8
    OP_COS = 9
    OP_EXP = 10
    OP_LOG = 11
    OP_SQRT = 12
    OP_ABS = 13
    OP_POSPART = 14
    OP_NEGPART = 15
    OP_MIN = 16
    OP_MAX = 17
    OP_JGT = 18
    OP_JMP = 19


# error codes returned alongside the failing pc
cdef enum:
    E_OK = 0
    E_DIV = 1
    E_POWNEG = 2
    E_POWZERO = 3
    E_LOG = 4
    E_SQRT = 5
    E_NONFINITE = 6


_MESSAGES = {
    1: "division by zero",
    2: "negative base with non-integer exponent",
    3: "zero raised to a negative power",
    4: "log of non-positive value",
    5: "sqrt of negative value",
    6: "non-finite result",
}


cdef struct VM:
    const long long* code
    int n
    const double* consts
    double* stack


cdef int vm_run(VM* vm, const double* args, double* out, int* bad_pc) noexcept nogil:
    cdef int pc = 0
    cdef int sp = -1
    cdef long long op, a, b, c
    cdef double x, y, r
    cdef double* st = vm.stack
    while pc < vm.n:
        op = vm.code[4 * pc]
        a = vm.code[4 * pc + 1]
        b = vm.code[4 * pc + 2]
        c = vm.code[4 * pc + 3]
        if op == OP_CONST:
            sp += 1
            st[sp] = vm.consts[a]
        elif op == OP_VAR:
            sp += 1
            st[sp] = args[a]
        elif op == OP_NEG:
            st[sp] = -st[sp]
        elif op == OP_JGT:
            if args[a] > vm.consts[b]:
                pc = <int>c
                continue
        elif op == OP_JMP:
            pc = <int>a
            continue
        elif op <= OP_POW or op == OP_MIN or op == OP_MAX:
            y = st[sp]
            sp -= 1
            x = st[sp]
            if op == OP_ADD:
                r = x + y
            elif op == OP_SUB:
                r = x - y
            elif op == OP_MUL:
                r = x * y
            elif op == OP_DIV:
                if y == 0.0:
                    bad_pc[0] = pc
                    return E_DIV
                r = x / y
            elif op == OP_POW:
                if x < 0.0 and y != floor(y):
                    bad_pc[0] = pc
                    return E_POWNEG
                if x == 0.0 and y < 0.0:
                    bad_pc[0] = pc
                    return E_POWZERO
                r = pow(x, y)
            elif op == OP_MIN:
                r = x if x <= y else y
            else:
                r = x if x >= y else y
            if not isfinite(r):
                bad_pc[0] = pc
                return E_NONFINITE
            st[sp] = r
        else:
            x = st[sp]
            if op == OP_SIN:
                r = sin(x)
            elif op == OP_COS:
                r = cos(x)
            elif op == OP_EXP:
                r = exp(x)
            elif op == OP_LOG:
                if x <= 0.0:
                    bad_pc[0] = pc
                    return E_LOG
                r = log(x)
            elif op == OP_SQRT:
                if x < 0.0:
                    bad_pc[0] = pc
                    return E_SQRT
                r = sqrt(x)
            elif op == OP_ABS:
                r = fabs(x)
            elif op == OP_POSPART:
                r = x if x > 0.0 else 0.0
            else:
                r = -x if x < 0.0 else 0.0
            if not isfinite(r):
                bad_pc[0] = pc
                return E_NONFINITE
            st[sp] = r
        pc += 1
    out[0] = st[sp]
    if not isfinite(out[0]):
        bad_pc[0] = vm.n - 1
        return E_NONFINITE
    return E_OK


cdef class _CompiledProgram:
    cdef object prog
    cdef cnp.ndarray code
    cdef cnp.ndarray consts
    cdef double* stack
    cdef VM vm

    def __cinit__(self, prog):
        self.prog = prog
        self.code = np.ascontiguousarray(prog.code, dtype=np.int64)
        self.consts = np.ascontiguousarray(prog.consts, dtype=np.float64)
        self.stack = <double*>malloc(sizeof(double) * (prog.stack_size + 1))
        self.vm.code = <const long long*>cnp.PyArray_DATA(self.code)
        self.vm.n = <int>self.code.shape[0]
        self.vm.consts = <const double*>cnp.PyArray_DATA(self.consts)
        self.vm.stack = self.stack

    def __dealloc__(self):
        if self.stack != NULL:
            free(self.stack)

    cdef raise_error(self, int code, int pc):
        raise el.ExprDomainError(_MESSAGES.get(code, "evaluation error"), self.prog.describe(pc))


def eval_program(prog, args):
    """Evaluate a compiled expression program at one argument vector."""
    cdef _CompiledProgram cp = _CompiledProgram(prog)
    cdef double[::1] a = np.ascontiguousarray(args, dtype=np.float64)
    cdef double out = 0.0
    cdef int pc = 0
    cdef int code
    if a.shape[0] < len(prog.argnames):
        raise el.UnboundVariableError(prog.argnames[a.shape[0]])
    code = vm_run(&cp.vm, &a[0] if a.shape[0] > 0 else NULL, &out, &pc)
    if code != E_OK:
        cp.raise_error(code, pc)
    return out


# ------------------------------------------------------------ DOPRI5 loop

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799, D4 = -10690763975.0 / 1880347072
cdef double D5 = 701980252875.0 / 199316789632, D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 5.0


cdef struct HL:
    VM* p
    VM* f
    double u0
    double rate
    int has_env
    long nfev
    int err_code
    int err_pc
    int err_which  # 0 = p, 1 = f


cdef int hl_rhs(HL* s, double t, const double* y, double* dy) noexcept nogil:
    cdef double pv, fv, uu
    cdef double args[2]
    cdef int pc = 0
    cdef int code
    s.nfev += 1
    args[0] = t
    code = vm_run(s.p, args, &pv, &pc)
    if code != E_OK:
        s.err_code = code
        s.err_pc = pc
        s.err_which = 0
        return 1
    uu = y[0] if y[0] > 0.0 else 0.0
    args[1] = uu
    code = vm_run(s.f, args, &fv, &pc)
    if code != E_OK:
        s.err_code = code
        s.err_pc = pc
        s.err_which = 1
        return 1
    dy[0] = y[1] / pv
    dy[1] = -fv
    dy[2] = 1.0 / pv
    return 0


cdef inline double ev_value(HL* s, int j, const double* y) noexcept nogil:
    if j == 0:
        return y[0]
    return y[0] - s.u0 * exp(s.rate * y[2])


cdef inline void interp(double r[5][3], double theta, double* out) noexcept nogil:
    cdef double th1 = 1.0 - theta
    cdef int i
    for i in range(3):
        out[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])))


cdef inline double norm_err(const double* e, const double* y0, const double* y1, double tol) noexcept nogil:
    cdef double m = 0.0, sc, v
    cdef int i
    for i in range(3):
        sc = tol + tol * (fabs(y0[i]) if fabs(y0[i]) >= fabs(y1[i]) else fabs(y1[i]))
        v = fabs(e[i]) / sc
        if v > m or i == 0:
            m = v
    return m


cdef double locate(HL* s, int j, double r[5][3], double t, double h, double g0, double t_tol) noexcept nogil:
    cdef double lo = t, hi = t + h, glo = g0, mid, gm
    cdef double ym[3]
    while hi - lo > t_tol:
        mid = 0.5 * (lo + hi)
        interp(r, (mid - t) / h, ym)
        gm = ev_value(s, j, ym)
        if gm == 0.0:
            return mid
        if (gm < 0.0) == (glo < 0.0):
            lo = mid
            glo = gm
        else:
            hi = mid
    return hi


def integrate_halfline_system(p, f, double t0, double u0, double t_end, double tol,
                              t_eval, envelope_rate=None, long max_steps=1_000_000):
    """Native twin of ``_pure.integrate_halfline_system`` (same contract)."""
    if not t0 < t_end:
        raise ValueError("solve_ivp requires t0 < t_end")
    cdef double[::1] te = np.ascontiguousarray(t_eval, dtype=np.float64)
    cdef Py_ssize_t m = te.shape[0]
    if m == 0 or np.any(np.diff(np.asarray(te)) <= 0) or te[0] < t0 or te[m - 1] > t_end:
        raise ValueError("t_eval must be strictly increasing inside [t0, t_end]")
    pprog = el.compile_program(p, ("t",))
    fprog = el.compile_program(f, ("t", "u"))
    cdef _CompiledProgram cp = _CompiledProgram(pprog)
    cdef _CompiledProgram cf = _CompiledProgram(fprog)
    cdef HL s
    s.p = &cp.vm
    s.f = &cf.vm
    s.u0 = u0
    s.has_env = 0 if envelope_rate is None else 1
    s.rate = 0.0 if envelope_rate is None else float(envelope_rate)
    s.nfev = 0
    s.err_code = 0
    cdef int n_ev = 1 + s.has_env

    out_t_arr = np.empty(m + 1)
    out_y_arr = np.empty((m + 1, 3))
    cdef double[::1] out_t = out_t_arr
    cdef double[:, ::1] out_y = out_y_arr
    cdef Py_ssize_t nout = 0, ie = 0
    ev_kind = []
    ev_time = []

    cdef double span = t_end - t0
    cdef double t_tol = 1e-10 * span
    cdef double y[3]
    cdef double y_new[3]
    cdef double ytmp[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double k5[3]
    cdef double k6[3]
    cdef double k7[3]
    cdef double ev[3]
    cdef double r[5][3]
    cdef double ev_vals[2]
    cdef double new_vals[2]
    cdef double hit_t[2]
    cdef int hit_j[2]
    cdef int nhits
    cdef double t, h, t_new, err, fac, stop_at, g0, g1, d0, d1, d2, h0, h1, sc, tstop
    cdef int have_stop, i, j, last_rejected = 0, failed = 0
    cdef long naccept = 0, nreject = 0
    status = "completed"
    message = ""

    y[0] = u0
    y[1] = 0.0
    y[2] = 0.0
    while ie < m and te[ie] <= t0:
        out_t[nout] = te[ie]
        for i in range(3):
            out_y[nout, i] = y[i]
        nout += 1
        ie += 1

    with nogil:
        for j in range(n_ev):
            ev_vals[j] = ev_value(&s, j, y)
        failed = hl_rhs(&s, t0, y, k1)
        if not failed:
            # starting step, same heuristic as the pure path
            d0 = 0.0
            d1 = 0.0
            for i in range(3):
                sc = tol + tol * fabs(y[i])
                if i == 0 or fabs(y[i]) / sc > d0:
                    d0 = fabs(y[i]) / sc
                if i == 0 or fabs(k1[i]) / sc > d1:
                    d1 = fabs(k1[i]) / sc
            if d0 < 1e-5 or d1 < 1e-5:
                h0 = 1e-6
            else:
                h0 = 0.01 * d0 / d1
            if h0 > span:
                h0 = span
            for i in range(3):
                ytmp[i] = y[i] + h0 * k1[i]
            failed = hl_rhs(&s, t0 + h0, ytmp, k2)
        if not failed:
            d2 = 0.0
            for i in range(3):
                sc = tol + tol * fabs(y[i])
                if i == 0 or fabs(k2[i] - k1[i]) / sc > d2:
                    d2 = fabs(k2[i] - k1[i]) / sc
            d2 = d2 / h0
            if (d1 if d1 >= d2 else d2) <= 1e-15:
                h1 = 1e-6 if 1e-6 >= h0 * 1e-3 else h0 * 1e-3
            else:
                h1 = pow(0.01 / (d1 if d1 >= d2 else d2), 0.2)
            h = 100.0 * h0
            if h1 < h:
                h = h1
            if span < h:
                h = span
        t = t0

        while not failed and t < t_end:
            if naccept + nreject >= max_steps:
                failed = 2
                break
            if h < 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                failed = 3
                break
            if t + h > t_end or t_end - (t + h) < 1e-12 * span:
                h = t_end - t
            for i in range(3):
                ytmp[i] = y[i] + h * A21 * k1[i]
            if hl_rhs(&s, t + C2 * h, ytmp, k2):
                failed = 1
                break
            for i in range(3):
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            if hl_rhs(&s, t + C3 * h, ytmp, k3):
                failed = 1
                break
            for i in range(3):
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            if hl_rhs(&s, t + C4 * h, ytmp, k4):
                failed = 1
                break
            for i in range(3):
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            if hl_rhs(&s, t + C5 * h, ytmp, k5):
                failed = 1
                break
            for i in range(3):
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            if hl_rhs(&s, t + h, ytmp, k6):
                failed = 1
                break
            for i in range(3):
                y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
            if hl_rhs(&s, t + h, y_new, k7):
                failed = 1
                break
            for i in range(3):
                ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            err = norm_err(ev, y, y_new, tol)
            for i in range(3):
                if not (isfinite(y_new[i]) and isfinite(ev[i])):
                    err = INFINITY

            if err > 1.0:
                nreject += 1
                if not isfinite(err):
                    fac = FAC_MIN
                else:
                    fac = SAFETY * pow(err, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                h *= (fac if fac < 1.0 else 1.0)
                last_rejected = 1
                continue

            naccept += 1
            t_new = t + h if t + h < t_end else t_end
            for i in range(3):
                r[0][i] = y[i]
                r[1][i] = y_new[i] - y[i]
                r[2][i] = h * k1[i] - r[1][i]
                r[3][i] = r[1][i] - h * k7[i] - r[2][i]
                r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])

            have_stop = 0
            stop_at = 0.0
            nhits = 0
            for j in range(n_ev):
                new_vals[j] = ev_value(&s, j, y_new)
            for j in range(n_ev):
                g0 = ev_vals[j]
                g1 = new_vals[j]
                if (g0 < 0.0 and 0.0 < g1) or (g0 > 0.0 and 0.0 > g1) or (g1 == 0.0 and g0 != 0.0):
                    hit_t[nhits] = locate(&s, j, r, t, h, g0, t_tol)
                    hit_j[nhits] = j
                    nhits += 1
            if nhits == 2 and (hit_t[1] < hit_t[0] or (hit_t[1] == hit_t[0] and hit_j[1] < hit_j[0])):
                hit_t[0], hit_t[1] = hit_t[1], hit_t[0]
                hit_j[0], hit_j[1] = hit_j[1], hit_j[0]
            for i in range(nhits):
                if have_stop and hit_t[i] > stop_at:
                    break
                with gil:
                    ev_kind.append("hit_zero" if hit_j[i] == 0 else "envelope_crossing")
                    ev_time.append(hit_t[i])
                if hit_j[i] == 0:
                    have_stop = 1
                    stop_at = hit_t[i]
            for j in range(n_ev):
                ev_vals[j] = new_vals[j]

            tstop = stop_at if have_stop else t_new
            while ie < m and te[ie] <= tstop:
                out_t[nout] = te[ie]
                interp(r, (te[ie] - t) / h, ytmp)
                for i in range(3):
                    out_y[nout, i] = ytmp[i]
                nout += 1
                ie += 1
            if have_stop:
                out_t[nout] = stop_at
                interp(r, (stop_at - t) / h, ytmp)
                for i in range(3):
                    out_y[nout, i] = ytmp[i]
                nout += 1
                break

            t = t_new
            for i in range(3):
                y[i] = y_new[i]
                k1[i] = k7[i]
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * pow(err, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
                if fac > FAC_MAX:
                    fac = FAC_MAX
            if last_rejected and fac > 1.0:
                fac = 1.0
            last_rejected = 0
            h *= fac

    if failed == 1:
        prog = pprog if s.err_which == 0 else fprog
        raise el.ExprDomainError(_MESSAGES.get(s.err_code, "evaluation error"), prog.describe(s.err_pc))
    if failed == 2:
        status, message = "step_failure", "maximum number of steps exceeded"
    elif failed == 3:
        status, message = "step_failure", f"step size underflow at t={t!r}"
    elif "hit_zero" in ev_kind:
        status = "event_stop"
    nodes = out_t_arr[:nout].copy()
    states = out_y_arr[:nout].copy()
    if nodes.size > 1 and nodes[-1] <= nodes[-2]:
        nodes, states = nodes[:-1], states[:-1]
    return Trajectory(nodes, states, list(zip(ev_kind, ev_time)), status, message,
                      int(s.nfev), int(naccept), int(nreject))
