"""Pure-Python permutation kernels.

This module is the reference implementation of the hot loops used by the
permutation-group engine.  A compiled twin (``ssgtree._speedups``) exposes
the same functions; ``ssgtree.kernels`` picks one at import time.  Both
backends must stay behaviourally identical — the parity tests in
``tests/test_kernels.py`` enforce that.

Permutations are tuples of ints over the points ``0..n-1``; ``p[i]`` is the
image of ``i``.  Products compose right-to-left: ``compose(p, q)`` applies
``q`` first.

A *flat level* is the frozen form of one stabilizer-chain level:

    (basepoint, edge_code, blob, ngens)

where ``edge_code`` is an ``array('i')`` over points (-1 = outside orbit,
-2 = basepoint, else ``(tree_gen_index << 1) | polarity``) and ``blob`` is
an ``array('i')`` holding the tree generators and their inverses
contiguously: slot ``(i << 1) | pol`` starts at offset ``((i << 1) | pol) *
degree``.  Walking ``edge_code`` from a point always moves one step closer
to the basepoint.
"""

BACKEND = "python"


def compose(p, q):
    """Product p∘q (apply q first)."""
    return tuple(p[x] for x in q)


def invert(p):
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def is_identity(p):
    return all(i == x for i, x in enumerate(p))


def perm_power(p, k):
    """p**k for any integer k, by binary powering."""
    n = len(p)
    if k < 0:
        p = invert(p)
        k = -k
    result = tuple(range(n))
    base = p
    while k:
        if k & 1:
            result = compose(base, result)
        base = compose(base, base)
        k >>= 1
    return result


def sift(perm, levels):
    """Divide perm through a frozen chain; returns the residue.

    The residue is the identity iff perm is a member of the chain's group.
    ``levels`` is a sequence of flat levels ordered by base position.
    """
    r = list(perm)
    n = len(r)
    for basepoint, edge_code, blob, _ngens in levels:
        beta = r[basepoint]
        if beta == basepoint:
            continue
        if edge_code[beta] == -1:
            break
        x = beta
        while x != basepoint:
            code = edge_code[x]
            off = code * n
            x = blob[off + x]
            r = [blob[off + y] for y in r]
    return tuple(r)


def trace(beta, basepoint, edge_code, blob, degree):
    """Walk product T with T(beta) == basepoint, as a permutation."""
    r = list(range(degree))
    x = beta
    while x != basepoint:
        code = edge_code[x]
        off = code * degree
        x = blob[off + x]
        r = [blob[off + y] for y in r]
    return tuple(r)


def bfs_closure(gens, limit, want_elements=False):
    """Close a generator list under products.

    Returns ``(complete, count, elements)``; ``elements`` is None unless
    requested.  Stops early (complete=False) once more than ``limit``
    distinct elements are seen.  Deterministic: breadth-first over the
    generators in the given order.
    """
    if not gens:
        ident = ()
        return True, 1, [ident] if want_elements else None
    n = len(gens[0])
    from array import array

    ident = tuple(range(n))
    seen = {array("H", ident).tobytes()}
    frontier = [ident]
    elems = [ident] if want_elements else None
    count = 1
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = tuple(g[x] for x in p)
                key = array("H", q).tobytes()
                if key not in seen:
                    seen.add(key)
                    count += 1
                    if count > limit:
                        return False, count, elems
                    nxt.append(q)
                    if want_elements:
                        elems.append(q)
        frontier = nxt
    return True, count, elems


def enumerate_elements(levels, transversals, limit, member_levels=None):
    """Enumerate chain elements as products of transversal representatives.

    ``transversals`` is a list (one entry per level) of lists of coset
    representatives u with u(basepoint) = point, in a fixed deterministic
    order.  When ``member_levels`` is given only elements sifting to the
    identity through that second chain are kept.  Returns
    ``(complete, elements)``; stops once ``limit`` kept elements would be
    exceeded.
    """
    n = len(transversals[0][0]) if transversals and transversals[0] else 0
    ident = tuple(range(n))
    out = []
    stack = [(0, ident)]
    while stack:
        depth, partial = stack.pop()
        if depth == len(transversals):
            if member_levels is not None and not is_identity(
                sift(partial, member_levels)
            ):
                continue
            if len(out) >= limit:
                return False, out
            out.append(partial)
            continue
        reps = transversals[depth]
        for u in reversed(reps):
            stack.append((depth + 1, compose(partial, u)))
    return True, out
