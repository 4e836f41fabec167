"""Pure-Python union-find, the fallback for the compiled kernel.

Roots are always the smallest id in their set so that class partitions are
deterministic regardless of union order.
"""

__all__ = ["UnionFind"]


class UnionFind:
    __slots__ = ("_parent",)

    def __init__(self):
        self._parent = []

    def __len__(self):
        return len(self._parent)

    def make(self) -> int:
        p = self._parent
        p.append(len(p))
        return len(p) - 1

    def find(self, x: int) -> int:
        p = self._parent
        while p[x] != x:
            p[x] = p[p[x]]  # path halving
            x = p[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra
        return ra

    def canon(self, ids: tuple) -> tuple:
        """Canonicalize a tuple of ids in one call."""
        find = self.find
        return tuple(find(i) for i in ids)
