"""Independent scalar reference implementations used only by tests.

Everything here is deliberately written with plain Python loops and the
math module so the implementations under test cannot share code paths
with their oracles.
"""

import math


def scalar_fourier_features(q, dim, bands):
    """Band-major sin/cos features over the three axes, first `dim` kept."""
    feats = []
    for j in range(bands):
        freq = math.pi * (2.0**j)
        for axis in range(3):
            feats.append(math.sin(freq * q[axis]))
            feats.append(math.cos(freq * q[axis]))
    return feats[:dim]


def scalar_bilinear(plane, u, v):
    """plane: nested lists (A, B, C); u, v normalized in [0, 1] pre-clamp."""
    a = len(plane)
    b = len(plane[0])
    c = len(plane[0][0])
    uu = min(max(u * (a - 1), 0.0), float(a - 1))
    vv = min(max(v * (b - 1), 0.0), float(b - 1))
    u0 = min(int(math.floor(uu)), a - 2)
    v0 = min(int(math.floor(vv)), b - 2)
    wu = uu - u0
    wv = vv - v0
    out = []
    for ch in range(c):
        top = plane[u0][v0][ch] * (1 - wv) + plane[u0][v0 + 1][ch] * wv
        bot = plane[u0 + 1][v0][ch] * (1 - wv) + plane[u0 + 1][v0 + 1][ch] * wv
        out.append(top * (1 - wu) + bot * wu)
    return out


_PLANE_AXES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


def scalar_gather(planes, w_weight, w_offset, query, pe_dim, pe_bands):
    """planes/w_weight/w_offset: dicts of nested lists; query: 3 floats."""
    q = [min(max(component, 0.0), 1.0) for component in query]
    pe = scalar_fourier_features(q, pe_dim, pe_bands)
    channels = len(planes["xy"][0][0])
    total = [0.0] * channels
    for name in ("xy", "xz", "yz"):
        ww = w_weight[name]
        wo = w_offset[name]
        k_points = len(ww)
        logits = [sum(ww[k][d] * pe[d] for d in range(pe_dim)) for k in range(k_points)]
        peak = max(logits)
        exps = [math.exp(l - peak) for l in logits]
        norm = sum(exps)
        weights = [e / norm for e in exps]
        ax = _PLANE_AXES[name]
        for k in range(k_points):
            du = sum(wo[k][0][d] * pe[d] for d in range(pe_dim))
            dv = sum(wo[k][1][d] * pe[d] for d in range(pe_dim))
            sample = scalar_bilinear(planes[name], q[ax[0]] + du, q[ax[1]] + dv)
            for ch in range(channels):
                total[ch] += weights[k] * sample[ch]
    return total


def iou_counts(pred, gt):
    """Binary occupied IoU plus per-class (intersection, union) counts."""
    inter = union = 0
    per_class = {}
    x_dim = len(pred)
    y_dim = len(pred[0])
    z_dim = len(pred[0][0])
    for x in range(x_dim):
        for y in range(y_dim):
            for z in range(z_dim):
                p = pred[x][y][z]
                g = gt[x][y][z]
                if p != 0 or g != 0:
                    union += 1
                    if p != 0 and g != 0:
                        inter += 1
                for c in {p, g}:
                    if c == 0:
                        continue
                    ci, cu = per_class.get(c, (0, 0))
                    cu += 1
                    if p == g == c:
                        ci += 1
                    per_class[c] = (ci, cu)
    return inter, union, per_class


def scalar_frechet_1d(mu_a, var_a, mu_b, var_b):
    return (mu_a - mu_b) ** 2 + (math.sqrt(var_a) - math.sqrt(var_b)) ** 2


def poly3_kernel(x, y, dim):
    dot = sum(xi * yi for xi, yi in zip(x, y))
    return (dot / dim + 1.0) ** 3


def scalar_mmd2_unbiased(xs, ys, dim):
    m = len(xs)
    n = len(ys)
    kxx = sum(
        poly3_kernel(xs[i], xs[j], dim)
        for i in range(m)
        for j in range(m)
        if i != j
    ) / (m * (m - 1))
    kyy = sum(
        poly3_kernel(ys[i], ys[j], dim)
        for i in range(n)
        for j in range(n)
        if i != j
    ) / (n * (n - 1))
    kxy = sum(poly3_kernel(xs[i], ys[j], dim) for i in range(m) for j in range(n)) / (m * n)
    return kxx + kyy - 2.0 * kxy


def scalar_inception_score(rows):
    n = len(rows)
    c = len(rows[0])
    marginal = [sum(rows[i][j] for i in range(n)) / n for j in range(c)]
    total = 0.0
    for row in rows:
        kl = 0.0
        for j in range(c):
            if row[j] > 0:
                kl += row[j] * math.log(row[j] / marginal[j])
        total += kl
    return math.exp(total / n)


def scalar_precision_recall(real, gen, k):
    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    def knn_radius(points, idx):
        ds = sorted(dist(points[idx], p) for j, p in enumerate(points) if j != idx)
        return ds[k - 1]

    real_radii = [knn_radius(real, i) for i in range(len(real))]
    gen_radii = [knn_radius(gen, i) for i in range(len(gen))]
    covered_gen = sum(
        1
        for g in gen
        if any(dist(g, real[i]) <= real_radii[i] for i in range(len(real)))
    )
    covered_real = sum(
        1
        for r in real
        if any(dist(r, gen[i]) <= gen_radii[i] for i in range(len(gen)))
    )
    precision = covered_gen / len(gen)
    recall = covered_real / len(real)
    if precision + recall == 0:
        f_score = 0.0
    else:
        f_score = 2 * precision * recall / (precision + recall)
    return precision, recall, f_score
