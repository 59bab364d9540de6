"""Numba kernels for hard-sphere operator assembly and the bilinear collision term.

Conventions used throughout:
  * collision kernel |(v-u).omega| with omega restricted to a half sphere,
    so the angular integral of |z.omega| is pi*|z| and
    nu(v) = pi * int |v-u| mu(u) du;
  * Grad kernels consistent with that normalization:
      k1(v,u) = pi*(2pi)^{-3/2} |v-u| exp(-(|v|^2+|u|^2)/4)
      k2(v,u) = sqrt(2/pi) |v-u|^{-1} exp(-|v-u|^2/8 - (|v|^2-|u|^2)^2/(8|v-u|^2))
    (the k2 constant is pinned by the null-space identity K sqrt_mu = nu sqrt_mu,
    verified against a high-resolution radial quadrature);
  * the bilinear term works on ratio fields r = f/sqrt_mu, so that the exact
    energy identity mu(v')mu(u') = mu(v)mu(u) can be factored out analytically.
    Gamma(sqrt_mu, sqrt_mu) then vanishes to round-off instead of carrying an
    O(h^2) interpolation defect.
"""

import math

import numpy as np
from numba import njit

# mean of 1/|r| over a unit cube centered at the origin, times side^2 gives the
# cell-averaged gain kernel singularity
CUBE_INV_R_MEAN = 2.380077363979553

C1_LOSS = math.pi * (2.0 * math.pi) ** (-1.5)
C2_GAIN = math.sqrt(2.0 / math.pi)


@njit(cache=True)
def nu_hs_kernel(v, h3):
    n = v.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        for j in range(n):
            dx = vi0 - v[j, 0]
            dy = vi1 - v[j, 1]
            dz = vi2 - v[j, 2]
            s = math.sqrt(dx * dx + dy * dy + dz * dz)
            vsq = v[j, 0] ** 2 + v[j, 1] ** 2 + v[j, 2] ** 2
            acc += s * math.exp(-0.5 * vsq)
        out[i] = math.pi * h3 * (2.0 * math.pi) ** (-1.5) * acc
    return out


@njit(cache=True)
def assemble_K_kernel(v, vsq, h):
    """Dense symmetric Nystrom discretization of Grad's K = K2 - K1."""
    n = v.shape[0]
    h3 = h * h * h
    K = np.empty((n, n))
    for i in range(n):
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        qi = vsq[i]
        for j in range(i, n):
            if i == j:
                # regularized cell average of the 1/s singularity; the
                # direction-dependent exponent is replaced by its angular mean
                r = math.sqrt(qi)
                if r > 1e-12:
                    ang = math.sqrt(math.pi / 2.0) * math.erf(r / math.sqrt(2.0)) / r
                else:
                    ang = 1.0
                K[i, i] = h3 * C2_GAIN * (CUBE_INV_R_MEAN / h) * ang
                continue
            dx = vi0 - v[j, 0]
            dy = vi1 - v[j, 1]
            dz = vi2 - v[j, 2]
            s2 = dx * dx + dy * dy + dz * dz
            s = math.sqrt(s2)
            qj = vsq[j]
            k1 = C1_LOSS * s * math.exp(-0.25 * (qi + qj))
            d = qi - qj
            k2 = C2_GAIN / s * math.exp(-0.125 * s2 - d * d / (8.0 * s2))
            val = h3 * (k2 - k1)
            K[i, j] = val
            K[j, i] = val
    return K


@njit(cache=True, inline="always")
def _trilerp(F, x, y, z, vmax, inv_h, n):
    """Trilinear interpolation of a nodal field; zero outside the grid."""
    cx = (x + vmax) * inv_h - 0.5
    cy = (y + vmax) * inv_h - 0.5
    cz = (z + vmax) * inv_h - 0.5
    ix = int(math.floor(cx))
    iy = int(math.floor(cy))
    iz = int(math.floor(cz))
    fx = cx - ix
    fy = cy - iy
    fz = cz - iz
    acc = 0.0
    for a in range(2):
        ia = ix + a
        if ia < 0 or ia >= n:
            continue
        wa = fx if a == 1 else 1.0 - fx
        for b in range(2):
            ib = iy + b
            if ib < 0 or ib >= n:
                continue
            wb = fy if b == 1 else 1.0 - fy
            for c in range(2):
                ic = iz + c
                if ic < 0 or ic >= n:
                    continue
                wc = fz if c == 1 else 1.0 - fz
                acc += wa * wb * wc * F[(ia * n + ib) * n + ic]
    return acc


@njit(cache=True)
def gamma_apply_kernel(v, h, vmax, n, rf, rg, mu, sqmu, om, omw):
    """Bilinear collision term Gamma(f,g) from ratio fields rf = f/sqrt_mu,
    rg = g/sqrt_mu.

    Gain and loss use the same half-sphere product quadrature; pre- and
    post-collision Maxwellian factors cancel exactly, so only the ratios are
    interpolated (trilinear, zero outside the grid).
    """
    N = v.shape[0]
    M = om.shape[0]
    h3 = h * h * h
    inv_h = 1.0 / h
    out = np.zeros(N)
    for i in range(N):
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        rfi = rf[i]
        rgi = rg[i]
        for j in range(i + 1, N):
            zx = vi0 - v[j, 0]
            zy = vi1 - v[j, 1]
            zz = vi2 - v[j, 2]
            loss_nodal = rfi * rg[j] + rgi * rf[j]
            acc = 0.0
            bsum = 0.0
            for m in range(M):
                o0, o1, o2 = om[m, 0], om[m, 1], om[m, 2]
                alpha = zx * o0 + zy * o1 + zz * o2
                b = abs(alpha) * omw[m]
                if b == 0.0:
                    continue
                bsum += b
                vpx = vi0 - alpha * o0
                vpy = vi1 - alpha * o1
                vpz = vi2 - alpha * o2
                upx = v[j, 0] + alpha * o0
                upy = v[j, 1] + alpha * o1
                upz = v[j, 2] + alpha * o2
                rfv = _trilerp(rf, vpx, vpy, vpz, vmax, inv_h, n)
                rgu = _trilerp(rg, upx, upy, upz, vmax, inv_h, n)
                rgv = _trilerp(rg, vpx, vpy, vpz, vmax, inv_h, n)
                rfu = _trilerp(rf, upx, upy, upz, vmax, inv_h, n)
                acc += b * (rfv * rgu + rgv * rfu)
            # mu(v')mu(u') = mu(v)mu(u) exactly; the bracket is invariant
            # under swapping (i, j)
            val = h3 * mu[i] * mu[j] * (acc - bsum * loss_nodal)
            out[i] += val / (2.0 * sqmu[i])
            out[j] += val / (2.0 * sqmu[j])
    return out


@njit(cache=True)
def gamma_pairs_kernel(v, h, vmax, n, R, mu, sqmu, om, omw):
    """All pairwise Gamma(e_a, e_b) for a small basis, R[a] = e_a/sqrt_mu.

    Returns out[p] = Gamma(e_a, e_b) with p enumerating pairs a <= b in
    lexicographic order. The interpolation stencils at the post-collision
    points are computed once per (node pair, angle) and shared by every basis
    pair, which is the dominant cost.
    """
    nb = R.shape[0]
    np_pairs = nb * (nb + 1) // 2
    N = v.shape[0]
    M = om.shape[0]
    h3 = h * h * h
    inv_h = 1.0 / h
    out = np.zeros((np_pairs, N))
    rv = np.empty(nb)
    ru = np.empty(nb)
    gain = np.empty(np_pairs)
    for i in range(N):
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        for j in range(i + 1, N):
            zx = vi0 - v[j, 0]
            zy = vi1 - v[j, 1]
            zz = vi2 - v[j, 2]
            for p in range(np_pairs):
                gain[p] = 0.0
            bsum = 0.0
            for m in range(M):
                o0, o1, o2 = om[m, 0], om[m, 1], om[m, 2]
                alpha = zx * o0 + zy * o1 + zz * o2
                b = abs(alpha) * omw[m]
                if b == 0.0:
                    continue
                bsum += b
                vpx = vi0 - alpha * o0
                vpy = vi1 - alpha * o1
                vpz = vi2 - alpha * o2
                upx = v[j, 0] + alpha * o0
                upy = v[j, 1] + alpha * o1
                upz = v[j, 2] + alpha * o2
                for a in range(nb):
                    rv[a] = _trilerp(R[a], vpx, vpy, vpz, vmax, inv_h, n)
                    ru[a] = _trilerp(R[a], upx, upy, upz, vmax, inv_h, n)
                p = 0
                for a in range(nb):
                    for bidx in range(a, nb):
                        gain[p] += b * (rv[a] * ru[bidx] + rv[bidx] * ru[a])
                        p += 1
            pref = h3 * mu[i] * mu[j]
            wi = 1.0 / (2.0 * sqmu[i])
            wj = 1.0 / (2.0 * sqmu[j])
            p = 0
            for a in range(nb):
                for bidx in range(a, nb):
                    loss = bsum * (R[a, i] * R[bidx, j] + R[bidx, i] * R[a, j])
                    val = pref * (gain[p] - loss)
                    out[p, i] += val * wi
                    out[p, j] += val * wj
                    p += 1
    return out


@njit(cache=True)
def gamma_matrix_kernel(v, h, vmax, n, rf, mu, sqmu, om, omw):
    """Matrix Mt with (Mt @ g)(v_i) = Gamma(f, g)(v_i), rf = f/sqrt_mu nodal.

    Same quadrature as gamma_apply_kernel so the two agree to round-off; g
    enters linearly through its ratio g/sqrt_mu, whose interpolation stencils
    are scattered into the matrix columns.
    """
    N = v.shape[0]
    M = om.shape[0]
    h3 = h * h * h
    inv_h = 1.0 / h
    Mt = np.zeros((N, N))
    for i in range(N):
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        pref_i = h3 * mu[i] / (2.0 * sqmu[i])
        for j in range(N):
            if j == i:
                continue
            zx = vi0 - v[j, 0]
            zy = vi1 - v[j, 1]
            zz = vi2 - v[j, 2]
            pref = pref_i * mu[j]
            bsum = 0.0
            for m in range(M):
                o0, o1, o2 = om[m, 0], om[m, 1], om[m, 2]
                alpha = zx * o0 + zy * o1 + zz * o2
                b = abs(alpha) * omw[m]
                if b == 0.0:
                    continue
                bsum += b
                vpx = vi0 - alpha * o0
                vpy = vi1 - alpha * o1
                vpz = vi2 - alpha * o2
                upx = v[j, 0] + alpha * o0
                upy = v[j, 1] + alpha * o1
                upz = v[j, 2] + alpha * o2
                rfv = _trilerp(rf, vpx, vpy, vpz, vmax, inv_h, n)
                rfu = _trilerp(rf, upx, upy, upz, vmax, inv_h, n)
                # gain: pref*b*(rfv * rg(u') + rfu * rg(v')); scatter the
                # trilinear stencils of rg(u') and rg(v') into columns
                for (px, py, pz, cf) in ((upx, upy, upz, pref * b * rfv),
                                         (vpx, vpy, vpz, pref * b * rfu)):
                    if cf == 0.0:
                        continue
                    cx = (px + vmax) * inv_h - 0.5
                    cy = (py + vmax) * inv_h - 0.5
                    cz = (pz + vmax) * inv_h - 0.5
                    ix = int(math.floor(cx))
                    iy = int(math.floor(cy))
                    iz = int(math.floor(cz))
                    fx = cx - ix
                    fy = cy - iy
                    fz = cz - iz
                    for a in range(2):
                        ia = ix + a
                        if ia < 0 or ia >= n:
                            continue
                        wa = fx if a == 1 else 1.0 - fx
                        for bb in range(2):
                            ib = iy + bb
                            if ib < 0 or ib >= n:
                                continue
                            wb = fy if bb == 1 else 1.0 - fy
                            for cc in range(2):
                                ic = iz + cc
                                if ic < 0 or ic >= n:
                                    continue
                                wc = fz if cc == 1 else 1.0 - fz
                                k = (ia * n + ib) * n + ic
                                Mt[i, k] += cf * wa * wb * wc / sqmu[k]
            # loss: -pref*bsum*(rf_i * rg_j + rg_i * rf_j)
            Mt[i, j] -= pref * bsum * rf[i] / sqmu[j]
            Mt[i, i] -= pref * bsum * rf[j] / sqmu[i]
    return Mt
