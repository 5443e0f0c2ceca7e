"""Compiled inner loops shared by the public step operations and the
trajectory runners.

State layout
------------
A 2x2 operator is four complex scalars in row-major order (gg, ge, eg, ee).
The APD supersystem is a flat complex128[12]: rho0 = [0:4], rho1 = [4:8],
rho2 = [8:12].  A voltage grid is complex128[n, 4] on uniform nodes.

All schemes are first-order explicit (Euler with jump / diffusion splitting).
Kernels consume pre-drawn noise arrays so that random-stream accounting stays
in numpy; each returns an error code (0 = ok) instead of raising.

Error codes: 1 = nonpositive total trace, 2 = event buffer full,
3 = record jump with empty rho1, 4 = noise buffer exhausted,
5 = boundary-mass guard violated.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# aux slot indices for the APD kernels
APD_NEXT_RESET = 0
APD_LOG_WEIGHT = 1
APD_COUNT = 2
APD_MAX_P_DEAD = 3
APD_REC_IDX = 4
APD_SUM_P = 5           # integrated predicted intensity sum_k E[dN_k]

# aux slot indices for the homodyne grid kernel
HOM_V_TRUE = 0
HOM_LOG_WEIGHT = 1
HOM_MAX_STEP_RATIO = 2
HOM_MAX_BOUNDARY = 3
HOM_CLIPPED = 4

RENORM_THRESHOLD = 1e-6


@njit(cache=True)
def lind(g, c, cc, e, om, gam):
    """Master-equation generator on one operator (gg, ge, eg, ee)."""
    dg = -1j * (om / 2.0) * (cc - c) + gam * e
    dc = -1j * (om / 2.0) * (e - g) - 0.5 * gam * c
    dcc = -1j * (om / 2.0) * (g - e) - 0.5 * gam * cc
    de = -1j * (om / 2.0) * (c - cc) - gam * e
    return dg, dc, dcc, de


# ---------------------------------------------------------------------------
# APD supersystem filter
# ---------------------------------------------------------------------------

@njit(cache=True)
def apd_drift(rho, om, gam, eta, gr, gdk, dt):
    """One Euler drift substep of the three-component supersystem, in place.

    rho0 loses the detected fraction of recycled emissions and dark-count
    weight; both reappear as sources in rho1; rho1 drains at the avalanche
    response rate; rho2 evolves freely.
    """
    g0, c0, cc0, e0 = rho[0], rho[1], rho[2], rho[3]
    g1, c1, cc1, e1 = rho[4], rho[5], rho[6], rho[7]
    g2, c2, cc2, e2 = rho[8], rho[9], rho[10], rho[11]
    dg0, dc0, dcc0, de0 = lind(g0, c0, cc0, e0, om, gam)
    dg1, dc1, dcc1, de1 = lind(g1, c1, cc1, e1, om, gam)
    dg2, dc2, dcc2, de2 = lind(g2, c2, cc2, e2, om, gam)
    jump0 = e0  # J rho0 = sigma rho0 sigma^dag = rho0_ee |g><g|
    rho[0] = g0 + dt * (dg0 - gdk * g0 - eta * gam * jump0)
    rho[1] = c0 + dt * (dc0 - gdk * c0)
    rho[2] = cc0 + dt * (dcc0 - gdk * cc0)
    rho[3] = e0 + dt * (de0 - gdk * e0)
    rho[4] = g1 + dt * (dg1 - gr * g1 + eta * gam * jump0 + gdk * g0)
    rho[5] = c1 + dt * (dc1 - gr * c1 + gdk * c0)
    rho[6] = cc1 + dt * (dcc1 - gr * cc1 + gdk * cc0)
    rho[7] = e1 + dt * (de1 - gr * e1 + gdk * e0)
    rho[8] = g2 + dt * dg2
    rho[9] = c2 + dt * dc2
    rho[10] = cc2 + dt * dcc2
    rho[11] = e2 + dt * de2


@njit(cache=True)
def apd_traces(rho):
    tr0 = rho[0].real + rho[3].real
    tr1 = rho[4].real + rho[7].real
    tr2 = rho[8].real + rho[11].real
    return tr0, tr1, tr2


@njit(cache=True)
def apd_jump(rho):
    """Avalanche registration: (rho0, rho1, rho2) -> (0, 0, rho2 + rho1)."""
    for j in range(4):
        rho[8 + j] = rho[8 + j] + rho[4 + j]
        rho[j] = 0.0j
        rho[4 + j] = 0.0j


@njit(cache=True)
def apd_reset(rho):
    """Dead-time expiry: (rho0, rho1, rho2) -> (rho0 + rho2, rho1, 0)."""
    for j in range(4):
        rho[j] = rho[j] + rho[8 + j]
        rho[8 + j] = 0.0j


@njit(cache=True)
def apd_conditional_bloch(rho):
    """Bloch vector and purity of (rho0+rho1+rho2)/tr."""
    g = rho[0] + rho[4] + rho[8]
    c = rho[1] + rho[5] + rho[9]
    cc = rho[2] + rho[6] + rho[10]
    e = rho[3] + rho[7] + rho[11]
    tr = g.real + e.real
    x = (c + cc).real / tr
    y = (-1j * (cc - c)).real / tr
    z = (e.real - g.real) / tr
    pur = 0.5 * (1.0 + x * x + y * y + z * z)
    return x, y, z, pur, tr


@njit(cache=True)
def apd_filter_chunk(rho, aux, om, gam, eta, gr, tdd, gdk, dt,
                     step0, n_steps, stride, first_row,
                     uniforms, rec_times, use_record,
                     samples, events, renorm_thresh):
    """Advance the filter by n_steps fixed steps starting at global index step0.

    Resets (and, in record-driven mode, recorded avalanche times) are exact-time
    events: the step containing one is split and each drifted substep draws one
    uniform for the jump Bernoulli.  Samples are written at global steps
    divisible by stride, into row (step+1)//stride - first_row.
    Returns (uniforms consumed, events appended, error code).
    """
    next_reset = aux[APD_NEXT_RESET]
    logw = aux[APD_LOG_WEIGHT]
    count = aux[APD_COUNT]
    max_p_dead = aux[APD_MAX_P_DEAD]
    irec = int(aux[APD_REC_IDX])
    sum_p = aux[APD_SUM_P]
    iu = 0
    ie = 0
    err = 0
    eps = 1e-9 * dt
    for k in range(n_steps):
        gidx = step0 + k
        t = gidx * dt
        t_end = (gidx + 1) * dt
        while t < t_end - eps:
            t_res = next_reset if not np.isnan(next_reset) else np.inf
            t_rec = rec_times[irec] if (use_record and irec < rec_times.size) else np.inf
            target = min(t_end, t_res, t_rec)
            dt_sub = target - t
            jumped = False
            if dt_sub > eps:
                tr0, tr1, tr2 = apd_traces(rho)
                tot = tr0 + tr1 + tr2
                if tot <= 0.0:
                    err = 1
                    break
                p = gr * dt_sub * tr1 / tot
                if p < 0.0:
                    p = 0.0
                elif p > 1.0:
                    p = 1.0
                sum_p += p
                if not np.isnan(next_reset) and p > max_p_dead:
                    max_p_dead = p
                if not use_record:
                    if iu >= uniforms.size:
                        err = 4
                        break
                    u = uniforms[iu]
                    iu += 1
                    if u < p:
                        jumped = True
                if jumped:
                    # d N = 1: jump replaces the drift over this substep
                    apd_jump(rho)
                    count += 1.0
                    if ie >= events.size:
                        err = 2
                        break
                    events[ie] = target
                    ie += 1
                    if tdd > 0.0:
                        next_reset = target + tdd
                    else:
                        apd_reset(rho)
                else:
                    apd_drift(rho, om, gam, eta, gr, gdk, dt_sub)
            t = target
            if not jumped:
                if target == t_res:
                    apd_reset(rho)
                    next_reset = np.nan
                elif target == t_rec:
                    tr0, tr1, tr2 = apd_traces(rho)
                    if tr1 <= 0.0:
                        err = 3
                        break
                    apd_jump(rho)
                    count += 1.0
                    if ie >= events.size:
                        err = 2
                        break
                    events[ie] = target
                    ie += 1
                    irec += 1
                    if tdd > 0.0:
                        next_reset = target + tdd
                    else:
                        apd_reset(rho)
        if err != 0:
            break
        tr0, tr1, tr2 = apd_traces(rho)
        tot = tr0 + tr1 + tr2
        if tot <= 0.0:
            err = 1
            break
        if tot < renorm_thresh:
            logw += np.log(tot)
            for j in range(12):
                rho[j] = rho[j] / tot
        if (gidx + 1) % stride == 0:
            row = (gidx + 1) // stride - first_row
            x, y, z, pur, _ = apd_conditional_bloch(rho)
            samples[row, 0] = x
            samples[row, 1] = y
            samples[row, 2] = z
            samples[row, 3] = pur
            samples[row, 4] = count
    aux[APD_NEXT_RESET] = next_reset
    aux[APD_LOG_WEIGHT] = logw
    aux[APD_COUNT] = count
    aux[APD_MAX_P_DEAD] = max_p_dead
    aux[APD_REC_IDX] = irec
    aux[APD_SUM_P] = sum_p
    return iu, ie, err


# ---------------------------------------------------------------------------
# APD truth generator: ideal direct-detection jumps + explicit detector states
# ---------------------------------------------------------------------------

@njit(cache=True)
def truth_no_jump(psi, om, gam, dt):
    """First-order no-emission evolution of a pure state, renormalized."""
    cg, ce = psi[0], psi[1]
    cg2 = cg + dt * (-1j * (om / 2.0) * ce)
    ce2 = ce + dt * (-1j * (om / 2.0) * cg - 0.5 * gam * ce)
    norm = np.sqrt(abs(cg2) ** 2 + abs(ce2) ** 2)
    psi[0] = cg2 / norm
    psi[1] = ce2 / norm


@njit(cache=True)
def apd_truth_chunk(psi, aux, om, gam, eta, gr, tdd, gdk, dt,
                    step0, n_steps, stride, first_row,
                    uniforms, samples, events):
    """Hidden-reality generator: the atom follows ideal direct-detection
    quantum jumps; emissions trigger the 0->1 detector transition with
    probability eta; 1->2 fires at rate gr and is the recorded avalanche;
    2->0 after exactly tdd.  One uniform per substep decides the (first-order
    exclusive) outcome.  aux reuses the APD slot layout with
    aux[APD_COUNT] = detector state.
    """
    next_reset = aux[APD_NEXT_RESET]
    det = int(aux[APD_COUNT])
    iu = 0
    ie = 0
    err = 0
    eps = 1e-9 * dt
    for k in range(n_steps):
        gidx = step0 + k
        t = gidx * dt
        t_end = (gidx + 1) * dt
        while t < t_end - eps:
            t_res = next_reset if not np.isnan(next_reset) else np.inf
            target = min(t_end, t_res)
            dt_sub = target - t
            if dt_sub > eps:
                if iu >= uniforms.size:
                    err = 4
                    break
                u = uniforms[iu]
                iu += 1
                p_emit = gam * abs(psi[1]) ** 2 * dt_sub
                emitted = False
                if det == 0:
                    if u < p_emit * eta:
                        emitted = True
                        det = 1
                    elif u < p_emit:
                        emitted = True
                    elif u < p_emit + gdk * dt_sub:
                        det = 1
                elif det == 1:
                    if u < gr * dt_sub:
                        det = 2
                        if ie >= events.size:
                            err = 2
                            break
                        events[ie] = target
                        ie += 1
                        if tdd > 0.0:
                            next_reset = target + tdd
                        else:
                            det = 0
                    elif u < gr * dt_sub + p_emit:
                        emitted = True
                else:
                    if u < p_emit:
                        emitted = True
                if emitted:
                    psi[0] = 1.0 + 0.0j  # collapse to |g>, global phase dropped
                    psi[1] = 0.0j
                else:
                    truth_no_jump(psi, om, gam, dt_sub)
            t = target
            if t == t_res and det == 2:
                det = 0
                next_reset = np.nan
            elif t == t_res:
                next_reset = np.nan
        if err != 0:
            break
        if (gidx + 1) % stride == 0:
            row = (gidx + 1) // stride - first_row
            cg, ce = psi[0], psi[1]
            rho_ge = cg * np.conj(ce)
            samples[row, 0] = 2.0 * rho_ge.real
            samples[row, 1] = -2.0 * rho_ge.imag
            samples[row, 2] = 2.0 * abs(ce) ** 2 - 1.0
            samples[row, 3] = 1.0
            samples[row, 4] = ie  # events so far this chunk; driver accumulates
    aux[APD_NEXT_RESET] = next_reset
    aux[APD_COUNT] = det
    return iu, ie, err


# ---------------------------------------------------------------------------
# Ideal homodyne stochastic master equation
# ---------------------------------------------------------------------------

@njit(cache=True)
def sme_step(rho, om, gam, eta, ephi, dt, dw):
    """One Euler step of the ideal homodyne SME, in place.

    rho += dt L rho + sqrt(eta gam) dw H[e^{-i phi} sigma] rho, with
    ephi = e^{-i phi}.  Trace is preserved identically.
    """
    g, c, cc, e = rho[0], rho[1], rho[2], rho[3]
    dg, dc, dcc, de = lind(g, c, cc, e, om, gam)
    cphi = np.conj(ephi)
    mg = ephi * cc + cphi * c
    mc = ephi * e
    mcc = cphi * e
    trm = mg.real  # Tr[A rho + rho A^dag] (real for Hermitian rho)
    amp = np.sqrt(eta * gam) * dw
    rho[0] = g + dt * dg + amp * (mg - trm * g)
    rho[1] = c + dt * dc + amp * (mc - trm * c)
    rho[2] = cc + dt * dcc + amp * (mcc - trm * cc)
    rho[3] = e + dt * de + amp * (0.0 - trm * e)


@njit(cache=True)
def sme_chunk(rho, om, gam, eta, ephi, dt, step0, n_steps, stride, first_row,
              dws, samples):
    """Ideal-SME trajectory chunk; sample rows are (x, y, z, purity, j_mean)
    with j the normalized homodyne current eta sqrt(gam) x_phi + sqrt(eta) dw/dt
    averaged over the stride window."""
    jacc = 0.0
    for k in range(n_steps):
        gidx = step0 + k
        xphi = 2.0 * (ephi * rho[2]).real
        jacc += eta * np.sqrt(gam) * xphi + np.sqrt(eta) * dws[k] / dt
        sme_step(rho, om, gam, eta, ephi, dt, dws[k])
        if (gidx + 1) % stride == 0:
            row = (gidx + 1) // stride - first_row
            tr = rho[0].real + rho[3].real
            x = (rho[1] + rho[2]).real / tr
            y = (-1j * (rho[2] - rho[1])).real / tr
            z = (rho[3].real - rho[0].real) / tr
            samples[row, 0] = x
            samples[row, 1] = y
            samples[row, 2] = z
            samples[row, 3] = 0.5 * (1.0 + x * x + y * y + z * z)
            samples[row, 4] = jacc / stride
            jacc = 0.0
    return 0


# ---------------------------------------------------------------------------
# Voltage-grid superoperator Fokker-Planck filter
# ---------------------------------------------------------------------------

@njit(cache=True)
def grid_det_step(vals, out, v, dv, dt, om, gam_atom, gam, diff, csig, ephi):
    """Deterministic part of the grid equation, conservative flux form.

    out = vals + dt [ L vals + d_v(gam v vals + s[vals] + diff d_v vals) ]
    with s[rho] = csig (e^{-i phi} sigma rho + e^{i phi} rho sigma^dag) and
    zero-flux boundaries, so the node sum is conserved identically.
    """
    n = vals.shape[0]
    cphi = np.conj(ephi)
    flg = 0.0j
    flc = 0.0j
    flcc = 0.0j
    fle = 0.0j
    for i in range(n):
        if i < n - 1:
            vm = 0.5 * (v[i] + v[i + 1])
            mg = 0.5 * (vals[i, 0] + vals[i + 1, 0])
            mc = 0.5 * (vals[i, 1] + vals[i + 1, 1])
            mcc = 0.5 * (vals[i, 2] + vals[i + 1, 2])
            me = 0.5 * (vals[i, 3] + vals[i + 1, 3])
            sg = csig * (ephi * mcc + cphi * mc)
            sc = csig * ephi * me
            scc = csig * cphi * me
            frg = -(gam * vm * mg + sg + diff * (vals[i + 1, 0] - vals[i, 0]) / dv)
            frc = -(gam * vm * mc + sc + diff * (vals[i + 1, 1] - vals[i, 1]) / dv)
            frcc = -(gam * vm * mcc + scc + diff * (vals[i + 1, 2] - vals[i, 2]) / dv)
            fre = -(gam * vm * me + diff * (vals[i + 1, 3] - vals[i, 3]) / dv)
        else:
            frg = 0.0j
            frc = 0.0j
            frcc = 0.0j
            fre = 0.0j
        g, c, cc, e = vals[i, 0], vals[i, 1], vals[i, 2], vals[i, 3]
        dg, dc, dcc, de = lind(g, c, cc, e, om, gam_atom)
        out[i, 0] = g + dt * (dg - (frg - flg) / dv)
        out[i, 1] = c + dt * (dc - (frc - flc) / dv)
        out[i, 2] = cc + dt * (dcc - (frcc - flcc) / dv)
        out[i, 3] = e + dt * (de - (fre - fle) / dv)
        flg = frg
        flc = frc
        flcc = frcc
        fle = fre


@njit(cache=True)
def grid_stats(vals, v):
    """Node-sum trace and trace-weighted mean voltage."""
    tot = 0.0
    vsum = 0.0
    for i in range(vals.shape[0]):
        tr = vals[i, 0].real + vals[i, 3].real
        tot += tr
        vsum += v[i] * tr
    if tot <= 0.0:
        return tot, 0.0
    return tot, vsum / tot


@njit(cache=True)
def grid_meas_update(vals, v, kfac, vbar, clip_abs):
    """Apply the linear conditioning factor 1 + kfac (v - vbar) per node,
    zeroing nodes whose trace undershoots -clip_abs.  Returns clipped mass."""
    clipped = 0.0
    for i in range(vals.shape[0]):
        f = 1.0 + kfac * (v[i] - vbar)
        vals[i, 0] *= f
        vals[i, 1] *= f
        vals[i, 2] *= f
        vals[i, 3] *= f
        tr = vals[i, 0].real + vals[i, 3].real
        if tr < -clip_abs:
            clipped += -tr
            vals[i, 0] = 0.0j
            vals[i, 1] = 0.0j
            vals[i, 2] = 0.0j
            vals[i, 3] = 0.0j
    return clipped


@njit(cache=True)
def grid_meas_update_exp(vals, v, kfac, kvar, vbar):
    """Ito-exponential (exact-Bayes) form of the conditioning update:
    rho(v) *= exp(kfac (v - vbar) - kvar (v - vbar)^2), renormalized to the
    pre-update node sum.  Agrees with the linear form to O(dt) and keeps
    every node positive, so large per-step innovations cannot destabilize
    the far tail.  Returns nothing; trace is conserved by construction."""
    n = vals.shape[0]
    pre = 0.0
    post = 0.0
    for i in range(n):
        tr = vals[i, 0].real + vals[i, 3].real
        pre += tr
        d = v[i] - vbar
        f = np.exp(kfac * d - kvar * d * d)
        vals[i, 0] *= f
        vals[i, 1] *= f
        vals[i, 2] *= f
        vals[i, 3] *= f
        post += vals[i, 0].real + vals[i, 3].real
    scale = pre / post
    for i in range(n):
        vals[i, 0] *= scale
        vals[i, 1] *= scale
        vals[i, 2] *= scale
        vals[i, 3] *= scale


@njit(cache=True)
def grid_marginal(vals, dv):
    """Trapezoid-integrated normalized marginal: (x, y, z, purity, trace)."""
    n = vals.shape[0]
    sg = 0.0j
    sc = 0.0j
    scc = 0.0j
    se = 0.0j
    for i in range(n):
        w = 0.5 if (i == 0 or i == n - 1) else 1.0
        sg += w * vals[i, 0]
        sc += w * vals[i, 1]
        scc += w * vals[i, 2]
        se += w * vals[i, 3]
    tr = sg.real + se.real
    x = (sc + scc).real / tr
    y = (-1j * (scc - sc)).real / tr
    z = (se.real - sg.real) / tr
    pur = 0.5 * (1.0 + x * x + y * y + z * z)
    return x, y, z, pur, tr * dv


MODE_SELF_CONSISTENT = 0
MODE_RECORD = 1
MODE_TRUTH = 2
MODE_DETERMINISTIC = 3


@njit(cache=True)
def homodyne_chunk(vals, buf, v, aux, truth, om, gam_atom, eta, gam, noise_n,
                   ephi, dt, step0, n_steps, stride, first_row, mode,
                   noise1, noise2, rec, samples, tsamples,
                   renorm_thresh, clip_rel, boundary_limit, exp_form):
    """Advance the grid filter by n_steps steps.

    mode 0: self-consistent (noise1 = dW_J); the implied record sample
            vbar + dW_J/(sqrt(gam) dt) is stride-averaged into the output.
    mode 1: record-driven (rec = per-step dimensionless output voltages).
    mode 2: truth-driven (noise1 = dW_xi drives both the hidden ideal SME
            state `truth` and the circuit voltage aux[HOM_V_TRUE]; noise2 =
            dW_J forms the record); truth Bloch samples go to tsamples.
    mode 3: deterministic evolution only.
    exp_form selects the Ito-exponential conditioning factor instead of the
    linear one (same equation to O(dt), stable for large innovations).
    Sample rows are (x, y, z, purity, v_out stride mean).
    """
    n = vals.shape[0]
    dv = v[1] - v[0]
    diff = gam / (2.0 * noise_n)
    csig = np.sqrt(gam * gam_atom * eta / noise_n)
    sqg = np.sqrt(gam)
    vtrue = aux[HOM_V_TRUE]
    logw = aux[HOM_LOG_WEIGHT]
    max_ratio = aux[HOM_MAX_STEP_RATIO]
    max_boundary = aux[HOM_MAX_BOUNDARY]
    clipped_tot = aux[HOM_CLIPPED]
    err = 0
    vacc = 0.0
    cur = vals
    oth = buf
    for k in range(n_steps):
        gidx = step0 + k
        tot0, _ = grid_stats(cur, v)
        if tot0 <= 0.0:
            err = 1
            break
        grid_det_step(cur, oth, v, dv, dt, om, gam_atom, gam, diff, csig, ephi)
        tmp = cur
        cur = oth
        oth = tmp
        vrec = 0.0
        if mode != MODE_DETERMINISTIC:
            tot, vbar = grid_stats(cur, v)
            if tot <= 0.0:
                err = 1
                break
            if mode == MODE_SELF_CONSISTENT:
                dwj = noise1[k]
                kfac = sqg * dwj
                vrec = vbar + dwj / (sqg * dt)
            elif mode == MODE_RECORD:
                vrec = rec[k]
                kfac = gam * dt * (vrec - vbar)
            else:
                dwxi = noise1[k]
                dwj = noise2[k]
                xphi = 2.0 * (ephi * truth[2]).real
                sme_step(truth, om, gam_atom, eta, ephi, dt, dwxi)
                vtrue += (-gam * vtrue - csig * xphi) * dt \
                    - np.sqrt(gam / noise_n) * dwxi
                vrec = vtrue + dwj / (sqg * dt)
                kfac = gam * dt * (vrec - vbar)
            if exp_form:
                grid_meas_update_exp(cur, v, kfac, 0.5 * gam * dt, vbar)
            else:
                clipped_tot += grid_meas_update(cur, v, kfac, vbar,
                                                clip_rel * tot)
        vacc += vrec
        tot1, _ = grid_stats(cur, v)
        if tot1 <= 0.0:
            err = 1
            break
        ratio = abs(tot1 / tot0 - 1.0)
        if ratio > max_ratio:
            max_ratio = ratio
        btr = (cur[0, 0].real + cur[0, 3].real
               + cur[n - 1, 0].real + cur[n - 1, 3].real)
        bratio = btr / tot1
        if bratio > max_boundary:
            max_boundary = bratio
        if bratio > boundary_limit:
            err = 5
            break
        if tot1 * dv < renorm_thresh:
            logw += np.log(tot1 * dv)
            scale = 1.0 / (tot1 * dv)
            for i in range(n):
                cur[i, 0] *= scale
                cur[i, 1] *= scale
                cur[i, 2] *= scale
                cur[i, 3] *= scale
        if (gidx + 1) % stride == 0:
            row = (gidx + 1) // stride - first_row
            x, y, z, pur, _ = grid_marginal(cur, dv)
            samples[row, 0] = x
            samples[row, 1] = y
            samples[row, 2] = z
            samples[row, 3] = pur
            samples[row, 4] = vacc / stride
            vacc = 0.0
            if mode == MODE_TRUTH:
                ttr = truth[0].real + truth[3].real
                tsamples[row, 0] = (truth[1] + truth[2]).real / ttr
                tsamples[row, 1] = (-1j * (truth[2] - truth[1])).real / ttr
                tsamples[row, 2] = (truth[3].real - truth[0].real) / ttr
    if cur is not vals:
        for i in range(n):
            vals[i, 0] = cur[i, 0]
            vals[i, 1] = cur[i, 1]
            vals[i, 2] = cur[i, 2]
            vals[i, 3] = cur[i, 3]
    aux[HOM_V_TRUE] = vtrue
    aux[HOM_LOG_WEIGHT] = logw
    aux[HOM_MAX_STEP_RATIO] = max_ratio
    aux[HOM_MAX_BOUNDARY] = max_boundary
    aux[HOM_CLIPPED] = clipped_tot
    return err
