"""Tree automorphisms presented by finite wreath recursions.

An automorphism of the d-regular rooted tree is written as a word over the
generators of a :class:`RecursionSystem`; every generator carries a root
permutation and d section words.  Products compose right-to-left:
``g*h`` applies ``h`` first, so sections obey

    (g*h)|_v = g|_{h(v)} * h|_v

Letters are 1-based (1..d); vertices are tuples of letters; the empty tuple
is the root.  Leaf indexing at level n is big-endian lexicographic:
``index = sum((letter_j - 1) * d**(n-j))``.
"""

import json
import re

from . import kernels

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_TOKEN_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?$")


class RecursionFileError(ValueError):
    """Malformed recursion document; carries a human-readable location."""

    def __init__(self, message, location):
        super().__init__(f"{location}: {message}")
        self.location = location


class MixedSystemError(ValueError):
    """Raised when combining elements of different recursion systems."""


# ---------------------------------------------------------------------------
# words


def reduce_word(letters):
    """Freely reduce a word: merge adjacent runs of one generator.

    No rewriting beyond cancellation is attempted; genuine equality testing
    is the job of :func:`equal`.
    """
    out = []
    for name, exp in letters:
        if exp == 0:
            continue
        if out and out[-1][0] == name:
            merged = out[-1][1] + exp
            out.pop()
            if merged:
                out.append((name, merged))
        else:
            out.append((name, exp))
    return tuple(out)


def invert_word(word):
    return tuple((name, -exp) for name, exp in reversed(word))


def word_to_str(word):
    if not word:
        return "e"
    parts = []
    for name, exp in word:
        parts.append(name if exp == 1 else f"{name}^{exp}")
    return " ".join(parts)


def str_to_word(text, location="word"):
    text = text.strip()
    if text == "e" or text == "":
        return ()
    letters = []
    for tok in text.split():
        if tok == "e":
            continue
        m = _TOKEN_RE.match(tok)
        if not m:
            raise RecursionFileError(f"bad word token {tok!r}", location)
        name, exp = m.group(1), m.group(2)
        letters.append((name, 1 if exp is None else int(exp)))
        if exp is not None and int(exp) == 0:
            raise RecursionFileError(f"zero exponent in token {tok!r}", location)
    return reduce_word(letters)


def word_length(word):
    return sum(abs(exp) for _, exp in word)


# ---------------------------------------------------------------------------
# root permutations (1-based image tuples)


def perm_compose_1b(p, q):
    """p∘q on letters 1..d (q applied first)."""
    return tuple(p[x - 1] for x in q)


def perm_invert_1b(p):
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x - 1] = i + 1
    return tuple(out)


def perm_identity_1b(d):
    return tuple(range(1, d + 1))


def sigma_cycle(d):
    """The fixed reference cycle (1 2 ... d)."""
    return tuple(list(range(2, d + 1)) + [1])


def sigma_exponent(perm):
    """Return e with perm == sigma^e, or None if perm is not a sigma power."""
    d = len(perm)
    e = perm[0] - 1
    sig = sigma_cycle(d)
    q = perm_identity_1b(d)
    for _ in range(e):
        q = perm_compose_1b(sig, q)
    return e if q == perm else None


class RecursionSystem:
    """A finite wreath-recursion presentation.

    Immutable after construction; extension produces a new system that
    shares generator names with the original (see :meth:`extend`).  Section
    and leaf-permutation caches are internal and never cross systems.
    """

    def __init__(self, alphabet_size, generators):
        """generators: ordered list of (name, perm_1based, sections)."""
        d = alphabet_size
        if not isinstance(d, int) or d < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {d!r}")
        if not generators:
            raise ValueError("a recursion system needs at least one generator")
        self.degree = d
        self.gen_names = []
        self._gens = {}
        for name, perm, sections in generators:
            if not _NAME_RE.match(name):
                raise ValueError(f"bad generator name {name!r}")
            if name in self._gens:
                raise ValueError(f"duplicate generator name {name!r}")
            perm = tuple(perm)
            if sorted(perm) != list(range(1, d + 1)):
                raise ValueError(f"generator {name!r}: perm {perm} is not a bijection of 1..{d}")
            sections = tuple(reduce_word(tuple(w)) for w in sections)
            if len(sections) != d:
                raise ValueError(f"generator {name!r}: expected {d} sections, got {len(sections)}")
            self.gen_names.append(name)
            self._gens[name] = (perm, sections)
        for name in self.gen_names:
            _, sections = self._gens[name]
            for i, w in enumerate(sections):
                for ref, _ in w:
                    if ref not in self._gens:
                        raise ValueError(
                            f"generator {name!r}, section {i + 1}: unknown name {ref!r}"
                        )
        # caches; keyed by canonical words, semantically invisible
        self._step_cache = {}
        self._root_perm_cache = {}
        self._leaf_cache = {}

    # -- basic accessors ---------------------------------------------------

    def gen_perm(self, name):
        return self._gens[name][0]

    def gen_sections(self, name):
        return self._gens[name][1]

    def element(self, word):
        return Element(self, word)

    def identity(self):
        return Element(self, ())

    def generator(self, name):
        if name not in self._gens:
            raise KeyError(name)
        return Element(self, ((name, 1),))

    def extend(self, new_generators):
        """Return a new system with extra generators appended.

        Existing words remain valid in the extension, which is how
        ``x_star``-style constructions lift elements without rewriting.
        """
        gens = [(n, self._gens[n][0], self._gens[n][1]) for n in self.gen_names]
        return RecursionSystem(self.degree, gens + list(new_generators))

    def fresh_name(self, stem):
        i = 0
        while f"{stem}{i}" in self._gens:
            i += 1
        return f"{stem}{i}"

    # -- single recursion step ----------------------------------------------

    def _letter_step(self, name, sign, letter):
        """Image and section of one generator letter at one alphabet letter."""
        key = (name, sign, letter)
        hit = self._step_cache.get(key)
        if hit is not None:
            return hit
        perm, sections = self._gens[name]
        if sign > 0:
            img = perm[letter - 1]
            sec = sections[letter - 1]
        else:
            img = perm_invert_1b(perm)[letter - 1]
            # (g^-1)|_x = (g|_{g^-1(x)})^-1
            sec = invert_word(sections[img - 1])
        self._step_cache[key] = (img, sec)
        return img, sec

    def word_letter_action(self, word, letter):
        """Image letter and section word of ``word`` at a level-1 vertex."""
        if not 1 <= letter <= self.degree:
            raise ValueError(f"letter {letter} out of range 1..{self.degree}")
        key = (word, letter)
        hit = self._step_cache.get(key)
        if hit is not None:
            return hit
        v = letter
        parts = []
        for name, exp in reversed(word):
            sign = 1 if exp > 0 else -1
            for _ in range(abs(exp)):
                img, sec = self._letter_step(name, sign, v)
                parts.append(sec)
                v = img
        section = reduce_word([lt for w in reversed(parts) for lt in w])
        self._step_cache[key] = (v, section)
        return v, section

    def word_root_perm(self, word):
        key = word
        hit = self._root_perm_cache.get(key)
        if hit is not None:
            return hit
        acc = perm_identity_1b(self.degree)
        for name, exp in word:
            p = self.gen_perm(name)
            if exp < 0:
                p = perm_invert_1b(p)
            step = p
            for _ in range(abs(exp) - 1):
                step = perm_compose_1b(step, p)
            acc = perm_compose_1b(acc, step)
        self._root_perm_cache[key] = acc
        return acc

    # -- leaf permutations ---------------------------------------------------

    def gen_leaf_perm(self, name, n):
        """0-based permutation of the d**n leaves induced by one generator."""
        key = (name, n)
        hit = self._leaf_cache.get(key)
        if hit is not None:
            return hit
        d = self.degree
        if n == 0:
            out = (0,)
        else:
            perm, sections = self._gens[name]
            m = d ** (n - 1)
            img = [0] * (d**n)
            for x in range(1, d + 1):
                block = self.word_leaf_perm(sections[x - 1], n - 1)
                src = (x - 1) * m
                dst = (perm[x - 1] - 1) * m
                for j in range(m):
                    img[src + j] = dst + block[j]
            out = tuple(img)
        self._leaf_cache[key] = out
        return out

    def word_leaf_perm(self, word, n):
        key = (word, n)
        hit = self._leaf_cache.get(key)
        if hit is not None:
            return hit
        acc = kernels.identity(self.degree**n)
        for name, exp in word:
            g = self.gen_leaf_perm(name, n)
            acc = kernels.compose(acc, g if exp == 1 else kernels.perm_power(g, exp))
        self._leaf_cache[key] = acc
        return acc


class Element:
    """A tree automorphism given as a word over a recursion system.

    Immutable; safe to share across tasks.  All recursion caches live on the
    system and only memoize canonical-word results.
    """

    __slots__ = ("system", "word")

    def __init__(self, system, word):
        self.system = system
        self.word = reduce_word(word)
        for name, _ in self.word:
            if name not in system._gens:
                raise KeyError(f"word references unknown generator {name!r}")

    def __repr__(self):
        return f"<Element {word_to_str(self.word)}>"

    def __mul__(self, other):
        if other.system is not self.system:
            raise MixedSystemError("cannot multiply elements of different systems")
        return Element(self.system, self.word + other.word)

    def inverse(self):
        return Element(self.system, invert_word(self.word))

    def is_trivial_word(self):
        return not self.word

    def root_perm(self):
        return self.system.word_root_perm(self.word)

    def section(self, vertex):
        w = self.word
        for letter in vertex:
            _, w = self.system.word_letter_action(w, letter)
        return Element(self.system, w)

    def act(self, vertex):
        out = []
        w = self.word
        for letter in vertex:
            img, w = self.system.word_letter_action(w, letter)
            out.append(img)
        return tuple(out)

    def leaf_perm(self, n):
        return self.system.word_leaf_perm(self.word, n)

    def portrait(self, depth):
        return portrait(self, depth)

    def in_system(self, system):
        """Reinterpret this word in an extension of its system."""
        return Element(system, self.word)


def multiply(g, h):
    return g * h


def invert(g):
    return g.inverse()


def section(g, vertex):
    return g.section(vertex)


def act(g, vertex):
    return g.act(vertex)


# ---------------------------------------------------------------------------
# portraits


class Portrait:
    """Root-permutation labels for every vertex of level < depth.

    A depth-0 portrait is the empty labelling (just the unlabelled root).
    """

    def __init__(self, degree, depth, labels):
        self.degree = degree
        self.depth = depth
        self.labels = dict(labels)

    def label(self, vertex):
        return self.labels[tuple(vertex)]

    def to_leaf_perm(self):
        """The induced permutation of the d**depth leaves (0-based)."""

        def build(vertex, n):
            if n == 0:
                return (0,)
            d = self.degree
            m = d ** (n - 1)
            pi = self.labels[vertex]
            img = [0] * (d**n)
            for x in range(1, d + 1):
                block = build(vertex + (x,), n - 1)
                src = (x - 1) * m
                dst = (pi[x - 1] - 1) * m
                for j in range(m):
                    img[src + j] = dst + block[j]
            return tuple(img)

        return build((), self.depth)

    @classmethod
    def from_leaf_perm(cls, perm, degree, depth):
        """Recover the portrait of a level-``depth`` tree automorphism.

        Raises ValueError if ``perm`` does not respect the block structure
        (i.e. is not induced by a tree automorphism).
        """
        labels = {}

        def split(vertex, perm, n):
            if n == 0:
                return
            d = degree
            m = len(perm) // d
            pi = []
            for x in range(d):
                block = perm[x * m : (x + 1) * m]
                y = block[0] // m
                if any(b // m != y for b in block):
                    raise ValueError(
                        f"permutation does not respect blocks below vertex {vertex}"
                    )
                pi.append(y + 1)
                split(vertex + (x + 1,), tuple(b - y * m for b in block), n - 1)
            if sorted(pi) != list(range(1, d + 1)):
                raise ValueError(f"block action at vertex {vertex} is not a bijection")
            labels[vertex] = tuple(pi)

        split((), tuple(perm), depth)
        return cls(degree, depth, labels)


def portrait(g, depth):
    if depth < 0:
        raise ValueError("portrait depth must be >= 0")
    labels = {}
    queue = [((), g.word)]
    for _ in range(depth):
        nxt = []
        for vertex, w in queue:
            labels[vertex] = g.system.word_root_perm(w)
            for x in range(1, g.system.degree + 1):
                _, sec = g.system.word_letter_action(w, x)
                nxt.append((vertex + (x,), sec))
        queue = nxt
    return Portrait(g.system.degree, depth, labels)


# ---------------------------------------------------------------------------
# equality by coinductive pair closure


class EqualityResult:
    """Outcome of the budgeted equality test.

    ``kind`` is "equal", "distinct" or "unknown".  For "distinct" the
    ``witness`` vertex v satisfies: the section of g*h^-1 at v has a
    nontrivial root permutation, so the leaf actions of g and h differ at
    level |v|+1.  For "equal" the explored pair set is closed: every
    explored word had a trivial root permutation and all of its sections
    stayed inside the set.
    """

    def __init__(self, kind, witness=None, explored=0):
        self.kind = kind
        self.witness = witness
        self.explored = explored

    def __bool__(self):
        return self.kind == "equal"

    def __repr__(self):
        if self.kind == "distinct":
            return f"<Distinct at {self.witness}>"
        return f"<{self.kind.capitalize()} ({self.explored} pairs)>"


DEFAULT_EQUAL_BUDGET = 10_000


def equal(g, h, budget=DEFAULT_EQUAL_BUDGET):
    """Budgeted exact equality of two elements of one system.

    Works on the single element g*h^-1 (halving the state space) and
    explores its section closure breadth-first.  "unknown" is a value, not
    an error: termination is only guaranteed for contracting systems.
    """
    if g.system is not h.system:
        raise MixedSystemError("cannot compare elements of different systems")
    system = g.system
    u = reduce_word(g.word + invert_word(h.word))
    seen = {u}
    queue = [(u, ())]
    explored = 0
    while queue:
        nxt = []
        for w, path in queue:
            explored += 1
            if system.word_root_perm(w) != perm_identity_1b(system.degree):
                return EqualityResult("distinct", witness=path, explored=explored)
            for x in range(1, system.degree + 1):
                _, sec = system.word_letter_action(w, x)
                if sec not in seen:
                    if len(seen) >= budget:
                        return EqualityResult("unknown", explored=explored)
                    seen.add(sec)
                    nxt.append((sec, path + (x,)))
        queue = nxt
    return EqualityResult("equal", explored=explored)


class Overflow:
    """Sentinel for a section closure exceeding its budget."""

    def __init__(self, partial):
        self.partial = partial

    def __repr__(self):
        return f"<Overflow ({len(self.partial)} words)>"


def section_closure(system, words, budget, with_provenance=False):
    """Close a set of words under taking sections at all letters.

    Returns the closed set of canonical words, or :class:`Overflow` once
    more than ``budget`` distinct words appear.  With provenance, returns
    (closure, origin) where origin maps each word to (seed word, vertex).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    seeds = [reduce_word(tuple(w)) for w in words]
    closure = set()
    origin = {}
    queue = []
    for w in seeds:
        if w not in closure:
            closure.add(w)
            origin[w] = (w, ())
            queue.append(w)
    while queue:
        w = queue.pop(0)
        seed, path = origin[w]
        for x in range(1, system.degree + 1):
            _, sec = system.word_letter_action(w, x)
            if sec not in closure:
                if len(closure) >= budget:
                    result = Overflow(closure)
                    return (result, origin) if with_provenance else result
                closure.add(sec)
                origin[sec] = (seed, path + (x,))
                queue.append(sec)
    return (closure, origin) if with_provenance else closure


# ---------------------------------------------------------------------------
# recursion file format


def parse_system(text):
    """Parse the recursion file format (see :func:`serialize_system`).

    The document is JSON with fields ``alphabet_size`` and ``generators``
    (ordered records ``{name, perm, sections}``); a section is a word of
    space-separated ``name``/``name^k`` tokens with ``e`` the empty word.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecursionFileError(f"invalid JSON: {exc}", "document") from exc
    if not isinstance(doc, dict):
        raise RecursionFileError("top level must be an object", "document")
    if "alphabet_size" not in doc:
        raise RecursionFileError("missing field 'alphabet_size'", "document")
    d = doc["alphabet_size"]
    if not isinstance(d, int) or d < 2:
        raise RecursionFileError("alphabet_size must be an integer >= 2", "alphabet_size")
    gens = doc.get("generators")
    if not isinstance(gens, list) or not gens:
        raise RecursionFileError("'generators' must be a non-empty list", "generators")
    parsed = []
    for idx, rec in enumerate(gens):
        loc = f"generators[{idx}]"
        if not isinstance(rec, dict):
            raise RecursionFileError("generator record must be an object", loc)
        for field in ("name", "perm", "sections"):
            if field not in rec:
                raise RecursionFileError(f"missing field {field!r}", loc)
        name = rec["name"]
        if not isinstance(name, str) or not _NAME_RE.match(name):
            raise RecursionFileError(f"bad generator name {name!r}", loc)
        perm = rec["perm"]
        if (
            not isinstance(perm, list)
            or len(perm) != d
            or sorted(perm) != list(range(1, d + 1))
        ):
            raise RecursionFileError(
                f"perm must be a 1-based image list of length {d} forming a bijection",
                f"{loc}.perm",
            )
        sections = rec["sections"]
        if not isinstance(sections, list) or len(sections) != d:
            raise RecursionFileError(f"expected {d} sections", f"{loc}.sections")
        words = []
        for j, s in enumerate(sections):
            if not isinstance(s, str):
                raise RecursionFileError("section must be a string", f"{loc}.sections[{j}]")
            words.append(str_to_word(s, f"{loc}.sections[{j}]"))
        parsed.append((name, tuple(perm), tuple(words)))
    names = {n for n, _, _ in parsed}
    for idx, (name, _, sections) in enumerate(parsed):
        for j, w in enumerate(sections):
            for ref, _ in w:
                if ref not in names:
                    raise RecursionFileError(
                        f"unknown generator {ref!r}", f"generators[{idx}].sections[{j}]"
                    )
    try:
        return RecursionSystem(d, parsed)
    except ValueError as exc:
        raise RecursionFileError(str(exc), "document") from exc


def serialize_system(system):
    """Emit the recursion file for a system, fields in fixed order."""
    doc = {
        "alphabet_size": system.degree,
        "generators": [
            {
                "name": name,
                "perm": list(system.gen_perm(name)),
                "sections": [word_to_str(w) for w in system.gen_sections(name)],
            }
            for name in system.gen_names
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
