"""Hypernym graph loading, traversal, and structural statistics.

Lexicon file format: UTF-8, one synset per line, four tab-separated fields:

    synset_id TAB parent_ids (comma-separated, empty for the root)
              TAB lemmas (comma-separated) TAB gloss

Nouns with several hypernyms keep the full list, but the graph is reduced to
a tree for traversal: the first-listed hypernym is the unique parent, which
makes depth, siblings, and minimal subtrees well defined. Edge counts and
densities are still taken over the full hypernym edge set so that multi-parent
structure stays visible in the statistics.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InputError, ValidationError
from .matcher import LemmaIndex
from .textnorm import normalize_lemma, normalize_text

UndirectedEdge = frozenset


class LexiconFormatError(ValidationError):
    pass


class CycleDetected(ValidationError):
    pass


class DanglingHypernym(ValidationError):
    pass


class MultipleRoots(ValidationError):
    pass


class UnknownSynset(ValidationError):
    pass


class DegenerateGraph(ValidationError):
    pass


class UncoveredNode(ValidationError):
    pass


class EmptyGraph(ValidationError):
    pass


@dataclass(frozen=True)
class Synset:
    """One word sense: id, synonym lemmas, definition, and parent ids."""

    synset_id: str
    lemmas: tuple[str, ...]
    gloss: str
    hypernym_ids: tuple[str, ...]


@dataclass(frozen=True)
class ReferenceClass:
    """A class of the reference benchmark: id plus lemma set."""

    synset_id: str
    lemmas: frozenset[str]


class SynsetGraph:
    """Immutable hypernym graph with a unique root.

    Tree queries (depth, children, siblings, leaves, minimal subtrees) use
    the first-listed hypernym as the unique parent. `edge_pairs` exposes the
    full child->parent edge set including secondary hypernyms.
    """

    def __init__(self, synsets: Iterable[Synset]):
        self._nodes: dict[str, Synset] = {}
        for synset in synsets:
            if synset.synset_id in self._nodes:
                raise LexiconFormatError(f"duplicate synset id: {synset.synset_id}")
            if not synset.lemmas:
                raise LexiconFormatError(f"synset {synset.synset_id} has no lemmas")
            if not synset.gloss.strip():
                raise LexiconFormatError(f"synset {synset.synset_id} has an empty gloss")
            self._nodes[synset.synset_id] = synset

        for synset in self._nodes.values():
            for hypernym in synset.hypernym_ids:
                if hypernym not in self._nodes:
                    raise DanglingHypernym(
                        f"synset {synset.synset_id} references unknown hypernym {hypernym}"
                    )

        roots = sorted(sid for sid, s in self._nodes.items() if not s.hypernym_ids)
        if len(roots) > 1:
            raise MultipleRoots(f"expected one root, found {len(roots)}: {roots[:5]}")
        if not roots:
            raise CycleDetected("no root found; every synset has a hypernym")
        self.root_id = roots[0]

        self._parent: dict[str, str | None] = {
            sid: (s.hypernym_ids[0] if s.hypernym_ids else None)
            for sid, s in self._nodes.items()
        }
        self._depth = self._compute_depths()
        children: dict[str, list[str]] = {sid: [] for sid in self._nodes}
        for sid, parent in self._parent.items():
            if parent is not None:
                children[parent].append(sid)
        self._children = {sid: tuple(sorted(kids)) for sid, kids in children.items()}

    def _compute_depths(self) -> dict[str, int]:
        depths: dict[str, int] = {self.root_id: 0}
        for start in self._nodes:
            if start in depths:
                continue
            chain = []
            sid: str | None = start
            while sid is not None and sid not in depths:
                if sid in chain:
                    raise CycleDetected(f"hypernym cycle through {sid}")
                chain.append(sid)
                sid = self._parent[sid]
            base = depths[sid] if sid is not None else 0
            for offset, node in enumerate(reversed(chain), 1):
                depths[node] = base + offset
        return depths

    # -- basic queries -------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, synset_id: str) -> bool:
        return synset_id in self._nodes

    def synset(self, synset_id: str) -> Synset:
        try:
            return self._nodes[synset_id]
        except KeyError:
            raise UnknownSynset(synset_id) from None

    def synset_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._nodes))

    def parent(self, synset_id: str) -> str | None:
        self.synset(synset_id)
        return self._parent[synset_id]

    def children(self, synset_id: str) -> tuple[str, ...]:
        self.synset(synset_id)
        return self._children[synset_id]

    def depth(self, synset_id: str) -> int:
        """Parent edges on the unique path to the root; depth(root) == 0."""
        self.synset(synset_id)
        return self._depth[synset_id]

    def root_path(self, synset_id: str) -> tuple[str, ...]:
        """Path from the synset up to and including the root."""
        self.synset(synset_id)
        path = [synset_id]
        while (parent := self._parent[path[-1]]) is not None:
            path.append(parent)
        return tuple(path)

    def leaves(self) -> frozenset[str]:
        return frozenset(sid for sid, kids in self._children.items() if not kids)

    def sibling_count(self, synset_id: str) -> int:
        parent = self.parent(synset_id)
        if parent is None:
            return 0
        return len(self._children[parent]) - 1

    # -- edge-level views ----------------------------------------------

    def edge_pairs(self) -> tuple[tuple[str, str], ...]:
        """All child->parent edges, including secondary hypernyms."""
        return tuple(
            (sid, hypernym)
            for sid in sorted(self._nodes)
            for hypernym in self._nodes[sid].hypernym_ids
        )

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(s.hypernym_ids) for s in self._nodes.values())

    # -- subtrees --------------------------------------------------------

    def minimal_subtree(self, targets: Iterable[str]) -> "SynsetGraph":
        """Smallest connected subgraph containing the targets and the root:
        the union of the targets' root paths, edges restricted to it."""
        keep: set[str] = set()
        for target in targets:
            keep.update(self.root_path(target))
        if not keep:
            keep = {self.root_id}
        subsynsets = [
            replace(
                self._nodes[sid],
                hypernym_ids=tuple(h for h in self._nodes[sid].hypernym_ids if h in keep),
            )
            for sid in sorted(keep)
        ]
        return SynsetGraph(subsynsets)


def load_lexicon(path: Path | str) -> tuple[SynsetGraph, LemmaIndex]:
    """Parse a lexicon file into a graph plus its lemma index."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"lexicon file not found: {path}")
    synsets: list[Synset] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise LexiconFormatError(
                    f"{path.name}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
                )
            synset_id, parents_field, lemmas_field, gloss = fields
            if not synset_id:
                raise LexiconFormatError(f"{path.name}:{lineno}: empty synset id")
            parents = tuple(p.strip() for p in parents_field.split(",") if p.strip())
            lemmas = tuple(
                dict.fromkeys(
                    normalized
                    for raw in lemmas_field.split(",")
                    if (normalized := normalize_lemma(raw))
                )
            )
            if not lemmas:
                raise LexiconFormatError(f"{path.name}:{lineno}: no usable lemmas")
            if not gloss.strip():
                raise LexiconFormatError(f"{path.name}:{lineno}: empty gloss")
            synsets.append(
                Synset(
                    synset_id=synset_id,
                    lemmas=lemmas,
                    gloss=normalize_text(gloss),
                    hypernym_ids=parents,
                )
            )
    graph = SynsetGraph(synsets)
    return graph, LemmaIndex.from_graph(graph)


def load_reference(path: Path | str) -> list[ReferenceClass]:
    """Reference class list: one line per class, `synset_id TAB lemma,lemma,...`."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"reference file not found: {path}")
    classes: list[ReferenceClass] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise LexiconFormatError(
                    f"{path.name}:{lineno}: expected 2 tab-separated fields, got {len(fields)}"
                )
            synset_id, lemmas_field = fields
            lemmas = frozenset(
                normalized
                for raw in lemmas_field.split(",")
                if (normalized := normalize_lemma(raw))
            )
            if not lemmas:
                raise LexiconFormatError(f"{path.name}:{lineno}: no usable lemmas")
            classes.append(ReferenceClass(synset_id=synset_id, lemmas=lemmas))
    return classes


# -- graph statistics ----------------------------------------------------


def density_from_counts(node_count: int, edge_count: int) -> float:
    """Directed density: edge_count / (n * (n - 1))."""
    if node_count < 2:
        raise DegenerateGraph(f"density needs at least 2 nodes, got {node_count}")
    return edge_count / (node_count * (node_count - 1))


def density(graph: SynsetGraph) -> float:
    return density_from_counts(graph.node_count, graph.edge_count)


def _undirected_view(graph_or_edges) -> tuple[list[str], set[UndirectedEdge]]:
    """Normalize a SynsetGraph or an iterable of (u, v) pairs to an
    undirected simple graph; self-loops and mirrored duplicates collapse."""
    if isinstance(graph_or_edges, SynsetGraph):
        nodes = list(graph_or_edges.synset_ids())
        raw = graph_or_edges.edge_pairs()
    else:
        raw = list(graph_or_edges)
        nodes = sorted({endpoint for pair in raw for endpoint in pair})
    edges = {frozenset(pair) for pair in raw if pair[0] != pair[1]}
    return nodes, edges


def modularity(graph_or_edges, partition: Mapping[str, int]) -> float:
    """Newman modularity Q = sum_c (e_c/m - (d_c/2m)^2) over the undirected view."""
    nodes, edges = _undirected_view(graph_or_edges)
    if not nodes:
        raise EmptyGraph("modularity of an empty graph is undefined")
    for node in nodes:
        if node not in partition:
            raise UncoveredNode(f"partition does not cover node {node}")
    m = len(edges)
    if m == 0:
        raise EmptyGraph("modularity needs at least one edge")
    intra: dict[int, int] = {}
    degree_sum: dict[int, int] = {}
    for edge in edges:
        u, v = sorted(edge)
        cu, cv = partition[u], partition[v]
        degree_sum[cu] = degree_sum.get(cu, 0) + 1
        degree_sum[cv] = degree_sum.get(cv, 0) + 1
        if cu == cv:
            intra[cu] = intra.get(cu, 0) + 1
    communities = set(partition[node] for node in nodes)
    return sum(
        intra.get(c, 0) / m - (degree_sum.get(c, 0) / (2 * m)) ** 2 for c in communities
    )


def find_communities(graph_or_edges) -> dict[str, int]:
    """Deterministic greedy modularity maximization.

    Agglomerative: repeatedly merge the connected community pair with the best
    positive delta-Q; ties break by lowest community id. Community ids in the
    result are renumbered 0..k-1 by smallest member.
    """
    nodes, edges = _undirected_view(graph_or_edges)
    if not nodes:
        raise EmptyGraph("cannot partition an empty graph")
    community_of = {node: idx for idx, node in enumerate(sorted(nodes))}
    members: dict[int, set[str]] = {idx: {node} for node, idx in community_of.items()}
    m = len(edges)
    if m > 0:
        degree: dict[int, int] = {idx: 0 for idx in members}
        between: dict[tuple[int, int], int] = {}
        for edge in edges:
            u, v = sorted(edge)
            cu, cv = community_of[u], community_of[v]
            degree[cu] += 1
            degree[cv] += 1
            key = (min(cu, cv), max(cu, cv))
            between[key] = between.get(key, 0) + 1

        while between:
            best_pair = None
            best_gain = 0.0
            for (a, b), weight in between.items():
                gain = weight / m - 2 * (degree[a] / (2 * m)) * (degree[b] / (2 * m))
                if best_pair is None or gain > best_gain or (
                    gain == best_gain and (a, b) < best_pair
                ):
                    best_pair = (a, b)
                    best_gain = gain
            if best_gain <= 0.0:
                break
            low, high = best_pair
            members[low] |= members.pop(high)
            degree[low] += degree.pop(high)
            merged: dict[tuple[int, int], int] = {}
            for (a, b), weight in between.items():
                a = low if a == high else a
                b = low if b == high else b
                if a == b:
                    continue
                key = (min(a, b), max(a, b))
                merged[key] = merged.get(key, 0) + weight
            between = merged
            for node in members[low]:
                community_of[node] = low

    renumber = {
        old: new
        for new, old in enumerate(sorted(members, key=lambda c: min(members[c])))
    }
    return {node: renumber[community] for node, community in community_of.items()}


def sibling_count(graph: SynsetGraph, synset_id: str) -> int:
    return graph.sibling_count(synset_id)


def _jaccard(a: set, b: set) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def parent_overlap(classes_a: Iterable[str], classes_b: Iterable[str], graph: SynsetGraph) -> float:
    """Jaccard overlap between the immediate-parent sets of two class lists."""
    def parents(classes: Iterable[str]) -> set[str]:
        out = set()
        for synset_id in classes:
            parent = graph.parent(synset_id)
            if parent is not None:
                out.add(parent)
        return out

    return _jaccard(parents(classes_a), parents(classes_b))


@dataclass(frozen=True)
class SubtreeStats:
    """Structural summary of the minimal subtree spanned by a class list.

    Depth statistics are taken over the class synsets themselves; node and
    edge counts describe the whole subtree (all hypernym edges inside it).
    The overlap fields compare against a second class list and are None when
    no counterpart was given.
    """

    node_count: int
    edge_count: int
    min_depth: int
    median_depth: int
    max_depth: int
    density: float
    modularity: float
    synset_overlap: float | None = None
    parent_overlap: float | None = None


def subtree_stats(
    graph: SynsetGraph,
    targets: Iterable[str],
    other_targets: Iterable[str] | None = None,
) -> SubtreeStats:
    targets = sorted(set(targets))
    if not targets:
        raise DegenerateGraph("need at least one target synset")
    subtree = graph.minimal_subtree(targets)
    depths = sorted(subtree.depth(t) for t in targets)
    q = modularity(subtree, find_communities(subtree))
    overlap = None
    p_overlap = None
    if other_targets is not None:
        other = sorted(set(other_targets))
        overlap = _jaccard(set(targets), set(other))
        p_overlap = parent_overlap(targets, other, graph)
    return SubtreeStats(
        node_count=subtree.node_count,
        edge_count=subtree.edge_count,
        min_depth=depths[0],
        median_depth=int(statistics.median_low(depths)),
        max_depth=depths[-1],
        density=density(subtree),
        modularity=q,
        synset_overlap=overlap,
        parent_overlap=p_overlap,
    )


def dataset_pair_stats(
    graph: SynsetGraph, targets_a: Iterable[str], targets_b: Iterable[str]
) -> tuple[SubtreeStats, SubtreeStats]:
    """Subtree stats for two class lists with their mutual overlaps filled in."""
    targets_a = list(targets_a)
    targets_b = list(targets_b)
    return (
        subtree_stats(graph, targets_a, other_targets=targets_b),
        subtree_stats(graph, targets_b, other_targets=targets_a),
    )
