"""Enumerate the facet classes of the (3,2,2) local polytope exactly.

Works in correlator coordinates: a point of the polytope is the 26-vector of
products of +-1 outcomes (6 marginal, 12 two-body, 8 three-body correlators);
the 64 deterministic strategies are the vertices.  Facets are explored by a
ridge-pivot walk: from a known facet, sample a ridge (a facet of the facet,
found with a small float LP), then rotate exactly (integer/Fraction
arithmetic) around the ridge to the unique adjacent facet.  The boundary
graph of a polytope is connected, so the walk reaches every facet class.

Facets are grouped into equivalence classes under the 3072-element relabeling
group (party permutations, setting swaps, outcome flips).

Certification per class: integer validity over all 64 vertices, affine rank
25 of the tight vertex set (facet property), pairwise inequality of canonical
forms.  Global completeness: orbit sizes must sum to the published facet
count 53856 of this polytope.

Output: tools/output/facet_classes.json
"""

from __future__ import annotations

import itertools
import json
import pathlib
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

OUT = pathlib.Path(__file__).parent / "output"

TOTAL_FACETS = 53856  # published facet count of the (3,2,2) local polytope

# coordinate order: flatten (tA, tB, tC) over {0,1,2}^3, slot 0 = constant
TRIPLES = list(itertools.product(range(3), repeat=3))


def vertices() -> np.ndarray:
    """64 deterministic boxes as rows of correlator 27-vectors (slot 0 = 1)."""
    verts = []
    spins = [(1, 1), (1, -1), (-1, 1), (-1, -1)]  # (-1)**a for settings 0,1
    for sa, sb, sc in itertools.product(spins, repeat=3):
        v = []
        for ta, tb, tc in TRIPLES:
            term = 1
            if ta:
                term *= sa[ta - 1]
            if tb:
                term *= sb[tb - 1]
            if tc:
                term *= sc[tc - 1]
            v.append(term)
        verts.append(v)
    return np.array(verts, dtype=np.int64)


def build_group() -> tuple[np.ndarray, np.ndarray]:
    """All 3072 signed permutations of the 27 correlator coordinates."""

    def compose(e1, e2):
        p1, s1 = e1
        p2, s2 = e2
        return tuple(p1[p2]), tuple(s1[p2] * s2)

    idx = {t: i for i, t in enumerate(TRIPLES)}

    def perm_from_map(fn):
        perm = np.zeros(27, dtype=np.int64)
        sign = np.ones(27, dtype=np.int64)
        for t in TRIPLES:
            src, sg = fn(t)
            perm[idx[t]] = idx[src]
            sign[idx[t]] = sg
        return tuple(perm), tuple(sign)

    gens = []
    # party swaps (A<->B), (B<->C)
    gens.append(perm_from_map(lambda t: ((t[1], t[0], t[2]), 1)))
    gens.append(perm_from_map(lambda t: ((t[0], t[2], t[1]), 1)))
    # setting swap on each party
    swap = {0: 0, 1: 2, 2: 1}
    gens.append(perm_from_map(lambda t: ((swap[t[0]], t[1], t[2]), 1)))
    gens.append(perm_from_map(lambda t: ((t[0], swap[t[1]], t[2]), 1)))
    gens.append(perm_from_map(lambda t: ((t[0], t[1], swap[t[2]]), 1)))
    # outcome flip per party per setting
    for party in range(3):
        for setting in (1, 2):
            def flip(t, party=party, setting=setting):
                return t, (-1 if t[party] == setting else 1)
            gens.append(perm_from_map(flip))

    identity = (tuple(range(27)), tuple([1] * 27))
    seen = {identity}
    frontier = [identity]
    while frontier:
        new = []
        for e in frontier:
            e_arr = (np.array(e[0]), np.array(e[1]))
            for g in gens:
                g_arr = (np.array(g[0]), np.array(g[1]))
                c = compose(e_arr, g_arr)
                if c not in seen:
                    seen.add(c)
                    new.append(c)
        frontier = new
    perms = np.array([e[0] for e in seen], dtype=np.int64)
    signs = np.array([e[1] for e in seen], dtype=np.int64)
    return perms, signs


class Canonicalizer:
    def __init__(self):
        self.perms, self.signs = build_group()
        assert len(self.perms) == 3072, len(self.perms)

    def images(self, w: np.ndarray) -> np.ndarray:
        return w[self.perms] * self.signs

    def canonical(self, w: np.ndarray) -> tuple[int, ...]:
        imgs = self.images(w)
        order = np.lexsort(imgs.T[::-1])
        return tuple(int(v) for v in imgs[order[0]])

    def orbit_size(self, w: np.ndarray) -> int:
        imgs = self.images(w)
        stab = int((imgs == w).all(axis=1).sum())
        return len(self.perms) // stab


def exact_nullspace_2d(rows: np.ndarray) -> list[np.ndarray]:
    """Integer basis of the nullspace of an integer matrix (expected dim 2).

    Fraction-free Gauss elimination over Fractions, then clear denominators.
    Rows are pre-reduced to an independent subset chosen by float QR.
    """
    if len(rows) > 25:
        from scipy.linalg import qr

        _, r, piv = qr(rows.T.astype(float), mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        rank = int((diag > 1e-8 * diag[0]).sum())
        rows = rows[np.sort(piv[:rank])]
    m = [[Fraction(int(x)) for x in row] for row in rows]
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(m)):
            if m[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            vec[pc] = -m[ri][fc]
        lcm = 1
        for x in vec:
            lcm = lcm * x.denominator // np.gcd(lcm, x.denominator)
        ints = np.array([int(x * lcm) for x in vec], dtype=np.int64)
        g = np.gcd.reduce(np.abs(ints[ints != 0])) if ints.any() else 1
        basis.append(ints // g)
    return basis


def certify_facet(V: np.ndarray, g: np.ndarray, h: int) -> bool:
    vals = V[:, 1:] @ g
    if vals.max() != h:
        return False
    tight = V[vals == h]
    if len(tight) < 26:
        return False
    diffs = (tight[1:, 1:] - tight[0, 1:]).astype(float)
    return np.linalg.matrix_rank(diffs, tol=1e-8) == 25


def sample_ridge(tight: np.ndarray, rng) -> np.ndarray | None:
    """Random ridge of the facet conv(tight): returns the tight subset rows.

    Float LP inside the facet's affine hull; the caller re-certifies exactly.
    """
    pts = tight[:, 1:].astype(float)
    center = pts.mean(axis=0)
    M = pts - center
    # orthonormal basis of the facet's direction space (dim 25)
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    rank = (s > 1e-8).sum()
    basis = vt[:rank]
    C = M @ basis.T
    c = rng.standard_normal(rank)
    res = linprog(
        -c,
        A_ub=C,
        b_ub=np.ones(len(C)),
        bounds=[(None, None)] * rank,
        method="highs",
    )
    if res.status != 0:
        return None
    active = C @ res.x >= 1 - 1e-7
    sub = tight[active]
    if len(sub) < 25:
        return None
    diffs = (sub[1:, 1:] - sub[0, 1:]).astype(float)
    if np.linalg.matrix_rank(diffs, tol=1e-8) != 24:
        return None
    return sub


def pivot_across(V: np.ndarray, g: np.ndarray, h: int, ridge: np.ndarray):
    """Exact rotation around a ridge to the unique adjacent facet."""
    # pencil of hyperplanes through the ridge: nullspace of [v, -1] rows
    rows = np.column_stack([ridge[:, 1:], -np.ones(len(ridge), dtype=np.int64)])
    basis = exact_nullspace_2d(rows)
    if len(basis) != 2:
        return None
    gh = np.concatenate([g, [h]])
    # pick a pencil member independent of (g, h): some 2x2 minor nonzero
    u = None
    k = int(np.flatnonzero(gh)[0])
    for cand in basis:
        if np.any(cand * gh[k] != gh * cand[k]):
            u = cand
            break
    if u is None:
        return None
    uvec, u0 = u[:26], u[26]
    a = V[:, 1:] @ g - h  # <= 0 for all vertices
    b = V[:, 1:] @ uvec - u0
    # orient u so the facet's own vertices (a == 0) off the ridge have b < 0
    on_facet = a == 0
    off_ridge = on_facet & (b != 0)
    if not off_ridge.any():
        return None
    if b[off_ridge].max() > 0:
        if b[off_ridge].min() < 0:
            return None  # ridge sample was not a true ridge
        uvec, u0, b = -uvec, -u0, -b
    # rotate: g' = g + lam*u, h' = h + lam*u0 with lam = min over b>0 of -a/b
    mask = b > 0
    if not mask.any():
        return None
    lams = [Fraction(int(-a[i]), int(b[i])) for i in np.where(mask)[0]]
    lam = min(lams)
    num, den = lam.numerator, lam.denominator
    g2 = den * g + num * uvec
    h2 = den * h + num * u0
    ints = np.concatenate([g2, [h2]])
    gg = np.gcd.reduce(np.abs(ints[ints != 0]))
    g2, h2 = g2 // gg, int(h2 // gg)
    if not certify_facet(V, g2, h2):
        return None
    return g2, h2


def inequality_to_w(g: np.ndarray, h: int) -> np.ndarray:
    """Pack g.E <= h as the 27-vector (h, -g): the '>= 0' form."""
    w = np.empty(27, dtype=np.int64)
    w[0] = h
    w[1:] = -g
    return w


def main():
    rng = np.random.default_rng(20240811)
    V = vertices()
    canon = Canonicalizer()
    classes: dict[tuple, dict] = {}
    pool: list[tuple[np.ndarray, int]] = []

    def register(g, h):
        g = np.asarray(g, dtype=np.int64)
        assert certify_facet(V, g, int(h)), "registered non-facet"
        w = inequality_to_w(g, int(h))
        key = canon.canonical(w)
        if key in classes:
            return False
        orbit = canon.orbit_size(w)
        vals = V[:, 1:] @ g
        classes[key] = {
            "canonical": list(key),
            "orbit": orbit,
            "local_bound": int(h),
            "tight_vertices": int((vals == h).sum()),
            "l1": int(np.abs(g).sum()),
        }
        pool.append((g, int(h)))
        return True

    def seed(pairs, h):
        g = np.zeros(26, dtype=np.int64)
        for t, v in pairs:
            g[TRIPLES.index(t) - 1] = v
        register(g, h)

    # positivity: -8 p(000|000) <= 0, i.e. -(sum of lower terms) <= 1
    seed([(t, -1) for t in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0),
                            (1, 0, 1), (0, 1, 1), (1, 1, 1)]], 1)
    # CHSH lifted by conditioning on outcome 0 of party C at setting 0
    # (the marginal AB form is valid but lies on a lower-dimensional face)
    seed(
        [((1, 1, 0), 1), ((1, 2, 0), 1), ((2, 1, 0), 1), ((2, 2, 0), -1),
         ((1, 1, 1), 1), ((1, 2, 1), 1), ((2, 1, 1), 1), ((2, 2, 1), -1),
         ((0, 0, 1), -2)],
        2,
    )
    # Mermin
    seed([((1, 1, 2), 1), ((1, 2, 1), 1), ((2, 1, 1), 1), ((2, 2, 2), -1)], 2)
    # cyclic guess-your-neighbor's-input: sum of 4 win probabilities <= 1
    seed(
        [((1, 1, 0), 1), ((1, 2, 0), 1), ((2, 1, 0), -1), ((2, 2, 0), -1),
         ((1, 0, 1), 1), ((1, 0, 2), -1), ((2, 0, 1), 1), ((2, 0, 2), -1),
         ((0, 1, 1), 1), ((0, 1, 2), 1), ((0, 2, 1), -1), ((0, 2, 2), -1),
         ((1, 1, 1), 1), ((1, 2, 2), 1), ((2, 1, 2), 1), ((2, 2, 1), 1)],
        4,
    )

    def orbit_total():
        return sum(c["orbit"] for c in classes.values())

    # neighbor exploration: walk from the canonical representative of every
    # class (neighbors of one orientation cover all neighbor classes up to
    # symmetry); ridge samples are cached per class by tight-vertex set
    seen_ridges: dict[tuple, set] = {}
    budget: dict[tuple, int] = {}
    rounds = 0
    while orbit_total() != TOTAL_FACETS and rounds < 500:
        rounds += 1
        found = False
        for key in list(classes.keys()):
            w = np.array(classes[key]["canonical"], dtype=np.int64)
            gi, hi = -w[1:], int(w[0])
            vals = V[:, 1:] @ gi
            tight = V[vals == hi]
            cache = seen_ridges.setdefault(key, set())
            tries = budget.setdefault(key, 150)
            hits = 0
            attempts = 0
            while hits < tries and attempts < 4 * tries:
                attempts += 1
                ridge = sample_ridge(tight, rng)
                if ridge is None:
                    continue
                hits += 1
                rid = tuple(sorted(map(tuple, ridge[:, 1:].tolist())))
                rid = hash(rid)
                if rid in cache:
                    continue
                cache.add(rid)
                out = pivot_across(V, gi, hi, ridge)
                if out is None:
                    continue
                if register(*out):
                    found = True
            budget[key] = 40  # later rounds only top up with fresh samples
        if not found:
            # stalled: raise sampling effort everywhere
            for key in budget:
                budget[key] = min(2 * budget[key] + 100, 3000)
        print(
            f"round {rounds}: classes={len(classes)} "
            f"orbit_total={orbit_total()} / {TOTAL_FACETS}"
        )
        OUT.mkdir(exist_ok=True)
        with open(OUT / "facet_classes_partial.json", "w") as fh:
            json.dump(sorted(classes.values(), key=lambda c: c["canonical"]), fh)
        if orbit_total() == TOTAL_FACETS:
            break

    total = orbit_total()
    print(f"finished: {len(classes)} classes, {total} facets")
    assert total == TOTAL_FACETS, "facet orbits do not cover the polytope"

    OUT.mkdir(exist_ok=True)
    out = sorted(classes.values(), key=lambda c: (c["l1"], c["local_bound"], c["canonical"]))
    with open(OUT / "facet_classes.json", "w") as fh:
        json.dump(out, fh, indent=1)
    print("wrote", OUT / "facet_classes.json")


if __name__ == "__main__":
    main()
