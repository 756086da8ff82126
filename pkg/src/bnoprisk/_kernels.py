"""Hot loops of the swap-descent generator.

Every kernel exists twice: a loop version compiled with numba and a
vectorized numpy version. ``bnoprisk._accel.NUMBA_ENABLED`` picks which one the
public API binds to; both are importable so tests and the benchmark can compare
them directly.
"""

import numpy as np

from bnoprisk._accel import NUMBA_ENABLED, njit

# ---------------------------------------------------------------------------
# lagged product sums  S[i, j, t] = sum_{s < L-t} x[i, s] * x[j, s + t]
# ---------------------------------------------------------------------------


def lagged_products_numpy(x, length, max_lag):
    n = x.shape[0]
    out = np.empty((n, n, max_lag + 1))
    w = x[:, :length]
    for t in range(max_lag + 1):
        out[:, :, t] = w[:, : length - t] @ w[:, t:length].T
    return out


@njit
def _lagged_products_loop(x, length, max_lag):
    n = x.shape[0]
    out = np.zeros((n, n, max_lag + 1))
    for i in range(n):
        for j in range(n):
            for t in range(max_lag + 1):
                acc = 0.0
                for s in range(length - t):
                    acc += x[i, s] * x[j, s + t]
                out[i, j, t] = acc
    return out


# ---------------------------------------------------------------------------
# objective contribution of one pair
# ---------------------------------------------------------------------------


@njit
def _pair_objective_loop(prod, rowsum, target, i, j, length, max_lag):
    mi = rowsum[i] / length
    mj = rowsum[j] / length
    cov = prod[i, j, 0] / length - mi * mj
    acc = 0.0
    for t in range(1, max_lag + 1):
        c = (prod[i, j, t] / (length - t) - mi * mj) / cov
        d = c - target[i, j, t]
        acc += d * d
    return acc


def _pair_objective_numpy(prod, rowsum, target, i, j, length, max_lag):
    mi = rowsum[i] / length
    mj = rowsum[j] / length
    cov = prod[i, j, 0] / length - mi * mj
    t = np.arange(1, max_lag + 1)
    c = (prod[i, j, 1:] / (length - t) - mi * mj) / cov
    d = c - target[i, j, 1:]
    return float(d @ d)


@njit
def _all_pair_objectives_loop(prod, rowsum, target, length, max_lag):
    n = prod.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = _pair_objective_loop(prod, rowsum, target, i, j, length, max_lag)
    return out


def _all_pair_objectives_numpy(prod, rowsum, target, length, max_lag):
    mean = rowsum / length
    mm = np.outer(mean, mean)
    cov = prod[:, :, 0] / length - mm
    t = np.arange(1, max_lag + 1)
    c = (prod[:, :, 1:] / (length - t) - mm[:, :, None]) / cov[:, :, None]
    d = c - target[:, :, 1:]
    return np.einsum("ijt,ijt->ij", d, d)


# ---------------------------------------------------------------------------
# swap descent
# ---------------------------------------------------------------------------


@njit
def _touched_products(x, r, a, b, length, max_lag, out):
    """Sum of the product terms that involve row ``r`` at positions a or b.

    ``out[j, 0, t]`` collects terms of S[r, j, t] and ``out[j, 1, t]`` those of
    S[j, r, t]. For ``j == r`` both slots hold the same (deduplicated) total.
    """
    n = x.shape[0]
    for j in range(n):
        for t in range(max_lag + 1):
            lim = length - t
            if j == r:
                acc = 0.0
                c0 = a
                c1 = b
                c2 = a - t
                c3 = b - t
                if 0 <= c0 < lim:
                    acc += x[r, c0] * x[r, c0 + t]
                if 0 <= c1 < lim and c1 != c0:
                    acc += x[r, c1] * x[r, c1 + t]
                if 0 <= c2 < lim and c2 != c0 and c2 != c1:
                    acc += x[r, c2] * x[r, c2 + t]
                if 0 <= c3 < lim and c3 != c0 and c3 != c1 and c3 != c2:
                    acc += x[r, c3] * x[r, c3 + t]
                out[j, 0, t] = acc
                out[j, 1, t] = acc
            else:
                fwd = 0.0
                if 0 <= a < lim:
                    fwd += x[r, a] * x[j, a + t]
                if 0 <= b < lim:
                    fwd += x[r, b] * x[j, b + t]
                bwd = 0.0
                if t <= a < length:
                    bwd += x[j, a - t] * x[r, a]
                if t <= b < length:
                    bwd += x[j, b - t] * x[r, b]
                out[j, 0, t] = fwd
                out[j, 1, t] = bwd


@njit
def _descent_chunk_loop(
    x, prod, rowsum, pair_obj, target, length, max_lag,
    rows, pos_a, pos_b, stall, plateau_window, trace_every, start_iter,
    trace_iter, trace_val, trace_len,
):
    n = x.shape[0]
    before = np.empty((n, 2, max_lag + 1))
    after = np.empty((n, 2, max_lag + 1))
    saved_row = np.empty((n, max_lag + 1))
    saved_col = np.empty((n, max_lag + 1))
    saved_obj_row = np.empty(n)
    saved_obj_col = np.empty(n)
    current = pair_obj.sum()
    accepted = 0
    done = 0
    for k in range(rows.shape[0]):
        r = rows[k]
        a = pos_a[k]
        b = pos_b[k]
        done += 1
        improved = False
        if a < length or b < length:
            _touched_products(x, r, a, b, length, max_lag, before)
            for j in range(n):
                for t in range(max_lag + 1):
                    saved_row[j, t] = prod[r, j, t]
                    saved_col[j, t] = prod[j, r, t]
                saved_obj_row[j] = pair_obj[r, j]
                saved_obj_col[j] = pair_obj[j, r]
            saved_sum = rowsum[r]

            va = x[r, a]
            vb = x[r, b]
            x[r, a] = vb
            x[r, b] = va
            if a < length:
                rowsum[r] += vb - va
            if b < length:
                rowsum[r] += va - vb

            _touched_products(x, r, a, b, length, max_lag, after)
            for j in range(n):
                for t in range(max_lag + 1):
                    if j == r:
                        prod[r, r, t] += after[j, 0, t] - before[j, 0, t]
                    else:
                        prod[r, j, t] += after[j, 0, t] - before[j, 0, t]
                        prod[j, r, t] += after[j, 1, t] - before[j, 1, t]
            for j in range(n):
                pair_obj[r, j] = _pair_objective_loop(prod, rowsum, target, r, j, length, max_lag)
                if j != r:
                    pair_obj[j, r] = _pair_objective_loop(prod, rowsum, target, j, r, length, max_lag)
            candidate = pair_obj.sum()
            if candidate < current:
                current = candidate
                improved = True
                accepted += 1
            else:
                x[r, a] = va
                x[r, b] = vb
                rowsum[r] = saved_sum
                for j in range(n):
                    for t in range(max_lag + 1):
                        prod[r, j, t] = saved_row[j, t]
                        prod[j, r, t] = saved_col[j, t]
                    pair_obj[r, j] = saved_obj_row[j]
                    pair_obj[j, r] = saved_obj_col[j]
        if improved:
            stall = 0
        else:
            stall += 1
        it = start_iter + done
        if it % trace_every == 0 and trace_len < trace_iter.shape[0]:
            trace_iter[trace_len] = it
            trace_val[trace_len] = current
            trace_len += 1
        if stall >= plateau_window:
            break
    return done, accepted, stall, trace_len


def _descent_chunk_numpy(
    x, prod, rowsum, pair_obj, target, length, max_lag,
    rows, pos_a, pos_b, stall, plateau_window, trace_every, start_iter,
    trace_iter, trace_val, trace_len,
):
    n = x.shape[0]
    lags = np.arange(max_lag + 1)
    current = float(pair_obj.sum())
    accepted = 0
    done = 0
    others = [np.array([j for j in range(n) if j != r], dtype=np.int64) for r in range(n)]
    for r, a, b in zip(rows.tolist(), pos_a.tolist(), pos_b.tolist()):
        done += 1
        improved = False
        if a < length or b < length:
            saved_row = prod[r].copy()
            saved_col = prod[:, r].copy()
            saved_obj_row = pair_obj[r].copy()
            saved_obj_col = pair_obj[:, r].copy()
            saved_sum = rowsum[r]
            va, vb = x[r, a], x[r, b]

            new_row = x[r].copy()
            new_row[a], new_row[b] = vb, va
            delta_row = np.zeros(x.shape[1])
            delta_row[a] = vb - va
            delta_row[b] = va - vb
            delta_row[length:] = 0.0
            rowsum[r] += delta_row.sum()

            # cross terms are linear in the changed row
            oth = others[r]
            for p in (a, b):
                if p >= length or delta_row[p] == 0.0:
                    continue
                d = delta_row[p]
                fwd_ok = lags[p + lags < length]
                prod[r, oth[:, None], fwd_ok[None, :]] += d * x[oth[:, None], p + fwd_ok[None, :]]
                bwd_ok = lags[lags <= p]
                prod[oth[:, None], r, bwd_ok[None, :]] += d * x[oth[:, None], p - bwd_ok[None, :]]

            # autocorrelation: recompute only the touched terms
            old = x[r]
            s_all = np.stack([np.full(max_lag + 1, a), np.full(max_lag + 1, b), a - lags, b - lags])
            valid = (s_all >= 0) & (s_all < (length - lags)[None, :])
            s_idx = np.where(valid, s_all, 0)
            for q in range(1, 4):
                for p in range(q):
                    valid[q] &= s_all[q] != s_all[p]
            old_terms = old[s_idx] * old[s_idx + lags[None, :]]
            new_terms = new_row[s_idx] * new_row[s_idx + lags[None, :]]
            prod[r, r] += np.where(valid, new_terms - old_terms, 0.0).sum(axis=0)
            x[r, a], x[r, b] = vb, va

            mean = rowsum / length
            t = lags[1:]
            cov_r = prod[r, :, 0] / length - mean[r] * mean
            c_r = (prod[r, :, 1:] / (length - t) - (mean[r] * mean)[:, None]) / cov_r[:, None]
            new_obj_row = (((c_r - target[r, :, 1:]) ** 2).sum(axis=1))
            cov_c = prod[:, r, 0] / length - mean * mean[r]
            c_c = (prod[:, r, 1:] / (length - t) - (mean * mean[r])[:, None]) / cov_c[:, None]
            new_obj_col = (((c_c - target[:, r, 1:]) ** 2).sum(axis=1))
            pair_obj[r] = new_obj_row
            pair_obj[:, r] = new_obj_col
            candidate = float(pair_obj.sum())
            if candidate < current:
                current = candidate
                improved = True
                accepted += 1
            else:
                x[r, a], x[r, b] = va, vb
                rowsum[r] = saved_sum
                prod[r] = saved_row
                prod[:, r] = saved_col
                pair_obj[r] = saved_obj_row
                pair_obj[:, r] = saved_obj_col
        stall = 0 if improved else stall + 1
        it = start_iter + done
        if it % trace_every == 0 and trace_len < trace_iter.shape[0]:
            trace_iter[trace_len] = it
            trace_val[trace_len] = current
            trace_len += 1
        if stall >= plateau_window:
            break
    return done, accepted, stall, trace_len


if NUMBA_ENABLED:
    lagged_products = _lagged_products_loop
    all_pair_objectives = _all_pair_objectives_loop
    descent_chunk = _descent_chunk_loop
else:
    lagged_products = lagged_products_numpy
    all_pair_objectives = _all_pair_objectives_numpy
    descent_chunk = _descent_chunk_numpy
