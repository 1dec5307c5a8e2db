"""Pure-Python sweep kernels (fallback for the compiled ``_ckernels``).

Both implementations share one contract so that a seeded run gives the same
partition under either backend:

* ``z`` holds labels ``0..L-1`` (not necessarily in order of appearance) and
  ``counts[k]`` the size of cluster ``k``; both are updated in place.
* When a cluster empties, the highest label is moved into its slot.
* Element ``order[t]`` is resampled with the pre-drawn uniform ``u[t]`` by
  inverting the cumulative weights ``[existing clusters..., new cluster]``.

The return value is the new number of clusters ``L``.
"""
import math

LOG_2PI = math.log(2.0 * math.pi)


def prior_sweep(z, counts, n_clusters, order, u, a, w_new):
    zl = z.tolist()
    cl = counts.tolist()
    L = int(n_clusters)
    m = len(zl)
    for t in range(len(order)):
        i = int(order[t])
        c = zl[i]
        cl[c] -= 1
        if cl[c] == 0:
            last = L - 1
            if c != last:
                for j in range(m):
                    if zl[j] == last:
                        zl[j] = c
                cl[c] = cl[last]
            cl[last] = 0
            L -= 1
        total = 0.0
        for k in range(L):
            total += cl[k] - a
        total += w_new
        target = u[t] * total
        acc = 0.0
        chosen = L
        for k in range(L):
            acc += cl[k] - a
            if target < acc:
                chosen = k
                break
        if chosen == L:
            cl[L] = 0
            L += 1
        zl[i] = chosen
        cl[chosen] += 1
    z[:] = zl
    counts[:] = cl
    return L


def gauss_sweep(x, z, counts, sums, n_clusters, order, u, a, w_new, phi, phi0, mu0):
    m, dim = x.shape
    xl = x.tolist()
    zl = z.tolist()
    cl = counts.tolist()
    sl = sums.tolist()
    mu0l = mu0.tolist()
    L = int(n_clusters)
    log_w_new = math.log(w_new)
    var0 = 1.0 / phi0 + 1.0 / phi
    lw = [0.0] * (m + 1)
    for t in range(len(order)):
        i = int(order[t])
        xi = xl[i]
        c = zl[i]
        cl[c] -= 1
        sc = sl[c]
        for d in range(dim):
            sc[d] -= xi[d]
        if cl[c] == 0:
            last = L - 1
            if c != last:
                for j in range(m):
                    if zl[j] == last:
                        zl[j] = c
                cl[c] = cl[last]
                sl[c] = sl[last]
                sl[last] = sc
            cl[last] = 0
            for d in range(dim):
                sl[last][d] = 0.0
            L -= 1
        top = -math.inf
        for k in range(L):
            n = cl[k]
            prec = phi0 + n * phi
            var = 1.0 / phi + 1.0 / prec
            sk = sl[k]
            d2 = 0.0
            for d in range(dim):
                diff = xi[d] - (phi0 * mu0l[d] + phi * sk[d]) / prec
                d2 += diff * diff
            v = math.log(n - a) - 0.5 * dim * (LOG_2PI + math.log(var)) - 0.5 * d2 / var
            lw[k] = v
            if v > top:
                top = v
        d2 = 0.0
        for d in range(dim):
            diff = xi[d] - mu0l[d]
            d2 += diff * diff
        v = log_w_new - 0.5 * dim * (LOG_2PI + math.log(var0)) - 0.5 * d2 / var0
        lw[L] = v
        if v > top:
            top = v
        total = 0.0
        for k in range(L + 1):
            lw[k] = math.exp(lw[k] - top)
            total += lw[k]
        target = u[t] * total
        acc = 0.0
        chosen = L
        for k in range(L):
            acc += lw[k]
            if target < acc:
                chosen = k
                break
        if chosen == L:
            cl[L] = 0
            for d in range(dim):
                sl[L][d] = 0.0
            L += 1
        zl[i] = chosen
        cl[chosen] += 1
        sk = sl[chosen]
        for d in range(dim):
            sk[d] += xi[d]
    z[:] = zl
    counts[:] = cl
    sums[:, :] = sl
    return L
