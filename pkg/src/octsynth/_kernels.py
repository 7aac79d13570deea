"""Compiled photon random-walk kernels.

The per-photon uniform stream reproduces streams.derive_seed /
streams.uniforms exactly: key = derive(seed_root, sample_id, column, photon),
variate i = splitmix64_finalizer(key + i * GOLDEN_GAMMA).  Results therefore
do not depend on thread count or column scheduling; every write is column
local.

Photons are injected at the stack surface moving straight down; the launch
itself crosses no interface (the first layer of a corneal stack is the air
propagation gap, so there is no specular deduction at injection).

Column counter layout (float64):
  0 launched  1 detected  2 escaped_top  3 absorbed
  4 transmitted_bottom  5 roulette_loss  6 roulette_gain
"""

import math

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_DERIVE_INIT = U64(0x6A09E667F3BCC909)

NUM_COUNTERS = 7
(LAUNCHED, DETECTED, ESCAPED, ABSORBED, TRANSMITTED,
 ROULETTE_LOSS, ROULETTE_GAIN) = range(NUM_COUNTERS)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _derive_step(h, p):
    return _mix64(h ^ _mix64(p + _GAMMA))


@njit(cache=True, inline="always")
def _photon_key(seed_root, sample_id, column_id, photon_index):
    h = _DERIVE_INIT
    h = _derive_step(h, seed_root)
    h = _derive_step(h, sample_id)
    h = _derive_step(h, column_id)
    h = _derive_step(h, photon_index)
    return h


@njit(cache=True, inline="always")
def _unit(key, counter):
    z = _mix64(key + counter * _GAMMA)
    return (np.float64(z >> U64(11)) + 0.5) * 2.0**-53


@njit(cache=True)
def _trace_column(thickness, n_arr, mua, mus, g_arr, n_above, n_below,
                  photons, bins, roulette_threshold, roulette_m,
                  cos_accept, aperture_radius, max_events,
                  seed_root, sample_id, column_id, r, counters):
    layers = thickness.shape[0]
    zb = np.empty(layers + 1, dtype=np.float64)
    zb[0] = 0.0
    for i in range(layers):
        zb[i + 1] = zb[i] + thickness[i]
    depth = zb[layers]
    pitch = depth / bins

    for ph in range(photons):
        key = _photon_key(seed_root, sample_id, column_id, U64(ph))
        counter = U64(0)
        x = 0.0
        y = 0.0
        z = 0.0
        ux = 0.0
        uy = 0.0
        uz = 1.0
        w = 1.0
        layer = 0
        gpath = 0.0
        counters[LAUNCHED] += 1.0
        events = 0

        while True:
            events += 1
            if events > max_events:
                counters[ROULETTE_LOSS] += w  # backstop; unreachable in practice
                break

            mu_t = mua[layer] + mus[layer]
            if uz > 0.0:
                db = (zb[layer + 1] - z) / uz
            elif uz < 0.0:
                db = (zb[layer] - z) / uz
            else:
                db = math.inf
            if mu_t > 0.0:
                counter += U64(1)
                step = -math.log(_unit(key, counter)) / mu_t
            else:
                step = math.inf  # vacuum-like layer: ballistic transit

            if step < db:
                # interaction inside the layer: absorb, scatter, roulette
                x += ux * step
                y += uy * step
                z += uz * step
                gpath += step
                deposit = w * (mua[layer] / mu_t)
                counters[ABSORBED] += deposit
                w -= deposit
                if w <= 0.0:
                    break
                if mus[layer] > 0.0:
                    g = g_arr[layer]
                    counter += U64(1)
                    u = _unit(key, counter)
                    if g != 0.0:
                        tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
                        ct = (1.0 + g * g - tmp * tmp) / (2.0 * g)
                        if ct > 1.0:
                            ct = 1.0
                        elif ct < -1.0:
                            ct = -1.0
                    else:
                        ct = 2.0 * u - 1.0
                    st = math.sqrt(max(0.0, 1.0 - ct * ct))
                    counter += U64(1)
                    phi = 2.0 * math.pi * _unit(key, counter)
                    cp = math.cos(phi)
                    sp = math.sin(phi)
                    if abs(uz) > 0.99999:
                        nux = st * cp
                        nuy = st * sp
                        nuz = ct if uz >= 0.0 else -ct
                    else:
                        den = math.sqrt(1.0 - uz * uz)
                        nux = st * (ux * uz * cp - uy * sp) / den + ux * ct
                        nuy = st * (uy * uz * cp + ux * sp) / den + uy * ct
                        nuz = -den * st * cp + uz * ct
                    norm = math.sqrt(nux * nux + nuy * nuy + nuz * nuz)
                    ux = nux / norm
                    uy = nuy / norm
                    uz = nuz / norm
                if w < roulette_threshold:
                    counter += U64(1)
                    if _unit(key, counter) < roulette_m:
                        counters[ROULETTE_GAIN] += w * (1.0 / roulette_m - 1.0)
                        w /= roulette_m
                    else:
                        counters[ROULETTE_LOSS] += w
                        break
            else:
                if db == math.inf:
                    counters[ROULETTE_LOSS] += w  # horizontal in vacuum; backstop
                    break
                # advance to the boundary and resolve reflection/refraction
                x += ux * db
                y += uy * db
                gpath += db
                going_up = uz < 0.0
                z = zb[layer] if going_up else zb[layer + 1]
                n1 = n_arr[layer]
                if going_up:
                    n2 = n_above if layer == 0 else n_arr[layer - 1]
                else:
                    n2 = n_below if layer == layers - 1 else n_arr[layer + 1]

                ci = abs(uz)
                reflect = False
                if n1 == n2:
                    rf = 0.0
                else:
                    sin_t2 = (n1 / n2) * (n1 / n2) * (1.0 - ci * ci)
                    if sin_t2 >= 1.0:
                        reflect = True  # total internal reflection
                        rf = 1.0
                    else:
                        ct2 = math.sqrt(1.0 - sin_t2)
                        rs = (n1 * ci - n2 * ct2) / (n1 * ci + n2 * ct2)
                        rp = (n1 * ct2 - n2 * ci) / (n1 * ct2 + n2 * ci)
                        rf = 0.5 * (rs * rs + rp * rp)
                if not reflect and rf > 0.0:
                    counter += U64(1)
                    reflect = _unit(key, counter) < rf

                if reflect:
                    uz = -uz
                else:
                    if n1 != n2:
                        ratio = n1 / n2
                        ct2 = math.sqrt(max(0.0, 1.0 - ratio * ratio * (1.0 - ci * ci)))
                        nux = ux * ratio
                        nuy = uy * ratio
                        nuz = ct2 if uz > 0.0 else -ct2
                        norm = math.sqrt(nux * nux + nuy * nuy + nuz * nuz)
                        ux = nux / norm
                        uy = nuy / norm
                        uz = nuz / norm
                    if going_up and layer == 0:
                        # exits through the top surface; detection gate:
                        # exit cone around the launch axis plus a lateral aperture.
                        if -uz >= cos_accept and math.sqrt(x * x + y * y) <= aperture_radius:
                            # round-trip convention: half the total path, with the
                            # index-weighted mean cancelling to the geometric mean depth
                            z_det = 0.5 * gpath
                            if z_det < depth:
                                ib = int(z_det / pitch)
                                if ib >= bins:
                                    ib = bins - 1
                                r[ib] += w
                                counters[DETECTED] += w
                            else:
                                counters[ESCAPED] += w
                        else:
                            counters[ESCAPED] += w
                        break
                    elif (not going_up) and layer == layers - 1:
                        counters[TRANSMITTED] += w
                        break
                    else:
                        layer = layer - 1 if going_up else layer + 1


@njit(cache=True, parallel=True)
def run_bscan(thickness, n_arr, mua, mus, g_arr, n_above, n_below,
              photons, bins, roulette_threshold, roulette_m,
              cos_accept, aperture_radius, max_events,
              seed_root, sample_id, column_offset, out_r, out_counters):
    """Trace all columns of a B-scan; out_r is (W, bins), out_counters (W, 7)."""
    width = thickness.shape[0]
    for col in prange(width):
        _trace_column(
            thickness[col], n_arr, mua, mus, g_arr, n_above, n_below,
            photons, bins, roulette_threshold, roulette_m,
            cos_accept, aperture_radius, max_events,
            seed_root, sample_id, column_offset + U64(col),
            out_r[col], out_counters[col],
        )


def warmup() -> None:
    """Force JIT compilation (cached on disk) with a minimal tracing call."""
    thickness = np.array([[0.01]], dtype=np.float64)
    ones = np.ones(1, dtype=np.float64)
    zeros = np.zeros(1, dtype=np.float64)
    out_r = np.zeros((1, 4), dtype=np.float64)
    out_c = np.zeros((1, NUM_COUNTERS), dtype=np.float64)
    run_bscan(thickness, ones, zeros, zeros, zeros, 1.0, 1.0,
              1, 4, 1e-4, 0.1, math.cos(math.radians(5.0)), 0.05,
              1_000_000, U64(0), U64(0), U64(0), out_r, out_c)
