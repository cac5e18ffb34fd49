"""Prefix overlap and a radix-tree index of pending prompts.

The index answers one question quickly: which pending query shares the
longest prefix with a probe (the cached prompt), with ties broken uniformly
at random.  ``scan_best`` is the brute-force equivalent and is kept as the
reference the index is tested against.
"""

from __future__ import annotations

import random
from typing import Iterable, Mapping, Sequence


def overlap(x: Sequence[int], y: Sequence[int]) -> int:
    """Length of the longest common prefix of ``x`` and ``y``."""
    n = min(len(x), len(y))
    i = 0
    while i < n and x[i] == y[i]:
        i += 1
    return i


def scan_best(prompts: Mapping[int, Sequence[int]], probe: Sequence[int]) -> tuple[int, list[int]]:
    """Linear scan: max overlap with ``probe`` and every id attaining it."""
    if not prompts:
        raise ValueError("no pending prompts")
    best = -1
    winners: list[int] = []
    for qid, prompt in prompts.items():
        ov = overlap(prompt, probe)
        if ov > best:
            best, winners = ov, [qid]
        elif ov == best:
            winners.append(qid)
    return best, winners


class _Node:
    __slots__ = ("edge", "children", "terminal", "count")

    def __init__(self, edge: tuple = ()):
        self.edge = edge
        self.children: dict[int, _Node] = {}
        self.terminal: dict[int, None] = {}  # ids whose prompt ends exactly here
        self.count = 0  # ids in this subtree

    def shape(self):
        kids = tuple(self.children[t].shape() for t in sorted(self.children))
        return (self.edge, tuple(sorted(self.terminal)), self.count, kids)


class RadixIndex:
    """Compressed trie over pending prompts, keyed by query id.

    Identical prompts are allowed (several ids may end at one node).
    After any sequence of inserts and removals the tree is normalized: no
    empty subtrees and no non-root node that is a pure pass-through.
    """

    def __init__(self, items: Iterable[tuple[int, Sequence[int]]] = ()):
        self.root = _Node()
        self._prompts: dict[int, tuple] = {}
        for qid, prompt in items:
            self.insert(qid, prompt)

    def __len__(self) -> int:
        return len(self._prompts)

    def __contains__(self, qid: int) -> bool:
        return qid in self._prompts

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadixIndex):
            return NotImplemented
        return self.root.shape() == other.root.shape()

    def prompts(self) -> dict[int, tuple]:
        return dict(self._prompts)

    def insert(self, qid: int, prompt: Sequence[int]) -> None:
        if qid in self._prompts:
            raise KeyError(f"id {qid} already indexed")
        prompt = tuple(prompt)
        self._prompts[qid] = prompt
        node = self.root
        node.count += 1
        i = 0
        while i < len(prompt):
            child = node.children.get(prompt[i])
            if child is None:
                leaf = _Node(prompt[i:])
                leaf.terminal[qid] = None
                leaf.count = 1
                node.children[prompt[i]] = leaf
                return
            j = overlap(child.edge, prompt[i:])
            if j < len(child.edge):
                # split the edge at j
                mid = _Node(child.edge[:j])
                child.edge = child.edge[j:]
                mid.children[child.edge[0]] = child
                mid.count = child.count
                node.children[prompt[i]] = mid
                child = mid
            child.count += 1
            node = child
            i += j
        node.terminal[qid] = None

    def remove(self, qid: int) -> None:
        try:
            prompt = self._prompts.pop(qid)
        except KeyError:
            raise KeyError(f"id {qid} not indexed") from None
        path = [self.root]
        node = self.root
        i = 0
        while i < len(prompt):
            node = node.children[prompt[i]]
            path.append(node)
            i += len(node.edge)
        del node.terminal[qid]
        for n in path:
            n.count -= 1
        for depth in range(len(path) - 1, 0, -1):
            n, parent = path[depth], path[depth - 1]
            if n.count == 0:
                del parent.children[n.edge[0]]
            elif not n.terminal and len(n.children) == 1:
                (only,) = n.children.values()
                only.edge = n.edge + only.edge
                parent.children[n.edge[0]] = only

    def best_match(self, probe: Sequence[int], rng: random.Random) -> tuple[int, int]:
        """Pending id with the longest overlap with ``probe`` and that overlap.

        Every id in the winning subtree has the same overlap, so a uniform
        draw over the subtree's ids is a uniform draw over the argmax set.
        """
        if not self._prompts:
            raise LookupError("best_match on an empty index")
        node = self.root
        depth = 0
        while depth < len(probe):
            child = node.children.get(probe[depth])
            if child is None:
                break
            j = overlap(child.edge, probe[depth:])
            node = child
            depth += j
            if j < len(child.edge):
                break
        r = rng.randrange(node.count)
        while True:
            if r < len(node.terminal):
                for qid in node.terminal:
                    if r == 0:
                        return qid, depth
                    r -= 1
            r -= len(node.terminal)
            for child in node.children.values():
                if r < child.count:
                    node = child
                    break
                r -= child.count
