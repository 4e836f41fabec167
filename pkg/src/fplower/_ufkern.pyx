# cython: language_level=3
"""Compiled union-find kernel; API-identical twin of `_ufpy.UnionFind`.

Roots are always the smallest id in their set so that class partitions are
deterministic regardless of union order.
"""

from libc.stdlib cimport free, malloc, realloc

__all__ = ["UnionFind"]


cdef class UnionFind:
    cdef long long* _parent
    cdef Py_ssize_t _size
    cdef Py_ssize_t _cap

    def __cinit__(self):
        self._cap = 256
        self._size = 0
        self._parent = <long long*> malloc(self._cap * sizeof(long long))
        if self._parent == NULL:
            raise MemoryError()

    def __dealloc__(self):
        if self._parent != NULL:
            free(self._parent)

    def __len__(self):
        return self._size

    cdef inline long long _find(self, long long x):
        cdef long long* p = self._parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def make(self):
        if self._size == self._cap:
            self._cap *= 2
            self._parent = <long long*> realloc(self._parent, self._cap * sizeof(long long))
            if self._parent == NULL:
                raise MemoryError()
        self._parent[self._size] = self._size
        self._size += 1
        return self._size - 1

    def find(self, x):
        cdef long long i = x
        if i < 0 or i >= self._size:
            raise IndexError(x)
        return self._find(i)

    def union(self, a, b):
        cdef long long ra = self._find(a)
        cdef long long rb = self._find(b)
        if ra == rb:
            return ra
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra
        return ra

    def canon(self, tuple ids):
        cdef Py_ssize_t n = len(ids)
        cdef Py_ssize_t i
        out = []
        for i in range(n):
            out.append(self._find(<long long> ids[i]))
        return tuple(out)
