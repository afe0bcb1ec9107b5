"""Follow, friends and retweet graphs and their modularity communities."""

from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .ingest import Affiliation, DatasetBundle


class GraphKind(str, enum.Enum):
    FOLLOW = "follow"
    FRIENDS = "friends"
    RETWEET = "retweet"


def _weighted_digraph(nodes: Iterable[str], pairs: Iterable[tuple[str, str]], kind: GraphKind) -> nx.DiGraph:
    g = nx.DiGraph(kind=kind)
    g.add_nodes_from(sorted(nodes))
    counts = Counter((a, b) for a, b in pairs if a != b)
    for (a, b), w in sorted(counts.items()):
        g.add_edge(a, b, weight=w)
    return g


def build_graph(bundle: DatasetBundle, kind: GraphKind | str) -> nx.DiGraph:
    """Directed social graph of one kind.

    ``follow_edges`` hold (follower, followee) pairs and ``retweet_edges``
    (retweeter, original author) pairs.  Edges point the way content flows:

    * follow:  followee -> follower
    * friends: follower -> followee
    * retweet: original author -> retweeter

    Self-loops are dropped and repeated pairs become one edge whose
    ``weight`` is the multiplicity.
    """
    kind = GraphKind(kind)
    nodes = set(bundle.users)
    if kind is GraphKind.FOLLOW:
        pairs = [(followee, follower) for follower, followee in bundle.follow_edges]
    elif kind is GraphKind.FRIENDS:
        pairs = list(bundle.follow_edges)
    else:
        pairs = [(author, rt) for rt, author in bundle.retweet_edges]
    nodes.update(x for p in pairs for x in p)
    return _weighted_digraph(nodes, pairs, kind)


def symmetrize(g: nx.DiGraph) -> nx.Graph:
    """Undirected view with reciprocal edge weights summed."""
    u = nx.Graph()
    u.add_nodes_from(g.nodes)
    for a, b, w in g.edges(data="weight", default=1):
        if u.has_edge(a, b):
            u[a][b]["weight"] += w
        else:
            u.add_edge(a, b, weight=w)
    return u


def modularity(g: nx.Graph, communities: Iterable[Iterable], resolution: float = 1.0) -> float:
    return nx.community.modularity(g, [set(c) for c in communities], weight="weight",
                                   resolution=resolution)


@dataclass
class CommunityPartition:
    assignment: dict[str, int]
    modularity_q: float
    level_q: list[float] = field(default_factory=list)

    def communities(self) -> list[set[str]]:
        groups: dict[int, set[str]] = {}
        for node, c in self.assignment.items():
            groups.setdefault(c, set()).add(node)
        return [groups[c] for c in sorted(groups)]


def _relabel_by_size(parts: list[set]) -> dict:
    # largest community first; ties broken by smallest member
    order = sorted(parts, key=lambda c: (-len(c), min(c)))
    return {node: i for i, comm in enumerate(order) for node in comm}


class _Louvain:
    """Louvain on an index-based weighted adjacency.

    ``adj[i]`` maps neighbour -> weight with self-loops excluded; ``k`` holds
    weighted degrees of the original graph, carried up through aggregation.
    """

    def __init__(self, adj: list[dict[int, float]], k: list[float], resolution: float, n_perturb: int = 20):
        self.adj = adj
        self.n_perturb = n_perturb
        self.k = k
        self.m2 = float(sum(k))
        self.gamma = resolution

    def quality(self, comm: list[int]) -> float:
        inside: dict[int, float] = {}
        tot: dict[int, float] = {}
        for i, nbrs in enumerate(self.adj):
            tot[comm[i]] = tot.get(comm[i], 0.0) + self.k[i]
            for j, w in nbrs.items():
                if comm[j] == comm[i]:
                    inside[comm[i]] = inside.get(comm[i], 0.0) + w
        return sum(inside.get(c, 0.0) / self.m2 - self.gamma * (t / self.m2) ** 2 for c, t in tot.items())

    def move_nodes(self, adj, k, comm, rng, allow_isolate=False) -> bool:
        """Greedy single-node moves until no move improves modularity."""
        n = len(adj)
        tot: dict[int, float] = {}
        for i in range(n):
            tot[comm[i]] = tot.get(comm[i], 0.0) + k[i]
        free = max(comm) + 1
        moved_any = False
        improved = True
        while improved:
            improved = False
            for i in rng.permutation(n):
                ci, ki = comm[i], k[i]
                links: dict[int, float] = {}
                for j, w in adj[i].items():
                    links[comm[j]] = links.get(comm[j], 0.0) + w
                tot[ci] -= ki
                best_c = ci
                best_gain = links.get(ci, 0.0) - self.gamma * tot[ci] * ki / self.m2
                for c in sorted(links):
                    gain = links[c] - self.gamma * tot[c] * ki / self.m2
                    if gain > best_gain + 1e-12:
                        best_c, best_gain = c, gain
                if allow_isolate and best_gain < -1e-12:
                    best_c, best_gain = free, 0.0
                    free += 1
                tot[best_c] = tot.get(best_c, 0.0) + ki
                if best_c != ci:
                    comm[i] = best_c
                    improved = moved_any = True
        return moved_any

    def merge_communities(self, comm: list[int]) -> bool:
        """Merge the community pair with the largest positive gain, repeatedly."""
        merged = False
        while True:
            tot: dict[int, float] = {}
            between: dict[tuple[int, int], float] = {}
            for i, nbrs in enumerate(self.adj):
                tot[comm[i]] = tot.get(comm[i], 0.0) + self.k[i]
                for j, w in nbrs.items():
                    a, b = comm[i], comm[j]
                    if a < b:
                        between[(a, b)] = between.get((a, b), 0.0) + w
            best, best_gain = None, 1e-12
            for (a, b), w in sorted(between.items()):
                gain = w - self.gamma * tot[a] * tot[b] / self.m2
                if gain > best_gain:
                    best, best_gain = (a, b), gain
            if best is None:
                return merged
            a, b = best
            comm[:] = [a if c == b else c for c in comm]
            merged = True

    def run(self, rng) -> tuple[list[int], list[float]]:
        n = len(self.adj)
        membership = list(range(n))
        adj, k = self.adj, list(self.k)
        level_q: list[float] = []
        while True:
            comm = list(range(len(adj)))
            if not self.move_nodes(adj, k, comm, rng):
                break
            labels = {c: i for i, c in enumerate(sorted(set(comm)))}
            comm = [labels[c] for c in comm]
            membership = [comm[c] for c in membership]
            level_q.append(self.quality(membership))
            new_adj: list[dict[int, float]] = [{} for _ in labels]
            new_k = [0.0] * len(labels)
            for i, nbrs in enumerate(adj):
                new_k[comm[i]] += k[i]
                for j, w in nbrs.items():
                    if comm[i] != comm[j]:
                        d = new_adj[comm[i]]
                        d[comm[j]] = d.get(comm[j], 0.0) + w
            adj, k = new_adj, new_k
        self.refine(membership, rng, level_q)
        if not level_q:
            level_q.append(self.quality(membership))
        # perturbation: alternately isolate a few nodes or force-merge two
        # adjacent communities, re-refine, keep strict improvements
        for step in range(self.n_perturb):
            cand = list(membership)
            if step % 2 == 0:
                free = max(cand) + 1
                picks = rng.choice(n, size=max(1, n // 10), replace=False)
                for off, i in enumerate(sorted(picks)):
                    cand[i] = free + off
            else:
                pairs = sorted({(cand[i], cand[j]) for i in range(n) for j in self.adj[i] if cand[i] < cand[j]})
                if not pairs:
                    continue
                a, b = pairs[rng.integers(len(pairs))]
                cand = [a if c == b else c for c in cand]
            self.refine(cand, rng)
            q = self.quality(cand)
            if q > level_q[-1] + 1e-12:
                membership = cand
                level_q.append(q)
        return membership, level_q

    def refine(self, comm: list[int], rng, level_q: list[float] | None = None) -> None:
        """Single-node moves on the original graph alternated with pairwise merges."""
        changed = True
        while changed:
            changed = self.move_nodes(self.adj, self.k, comm, rng, allow_isolate=True)
            changed = self.merge_communities(comm) or changed
            if changed and level_q is not None:
                level_q.append(self.quality(comm))


def detect_communities(
    g: nx.Graph | nx.DiGraph,
    seed: int = 0,
    resolution: float = 1.0,
    n_starts: int = 8,
) -> CommunityPartition:
    """Louvain modularity communities on the symmetrized weighted graph.

    Each of ``n_starts`` runs uses its own node order drawn from ``seed``.
    After the multi-level passes a run refines the partition on the original
    graph (single-node moves, pairwise community merges) and then tries
    random perturbations, keeping only those that raise modularity.  The run
    with the highest modularity wins.  Community ids are
    0, 1, ... by decreasing size.  ``level_q`` is the modularity after each
    pass of the winning run.
    """
    if g.number_of_nodes() == 0:
        raise ValueError("graph has no nodes")
    u = symmetrize(g) if g.is_directed() else g
    nodes = sorted(u.nodes)
    if u.size(weight="weight") == 0:
        return CommunityPartition(_relabel_by_size([{n} for n in nodes]), 0.0, [0.0])
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[dict[int, float]] = [{} for _ in nodes]
    k = [0.0] * len(nodes)
    for a, b, w in u.edges(data="weight", default=1):
        i, j = index[a], index[b]
        k[i] += w
        k[j] += w
        if i != j:
            adj[i][j] = adj[i].get(j, 0.0) + w
            adj[j][i] = adj[j].get(i, 0.0) + w
    algo = _Louvain(adj, k, resolution)
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_starts):
        membership, level_q = algo.run(np.random.default_rng(child))
        if best is None or level_q[-1] > best[1][-1] + 1e-12:
            best = (membership, level_q)
    membership, level_q = best
    groups: dict[int, set] = {}
    for i, c in enumerate(membership):
        groups.setdefault(c, set()).add(nodes[i])
    parts = list(groups.values())
    return CommunityPartition(_relabel_by_size(parts), modularity(u, parts, resolution), level_q)


def affiliation_fractions(
    partition: CommunityPartition,
    affiliations: Mapping[str, Affiliation],
) -> list[dict]:
    """Per-community fractions of ProBJP, Other and Unknown members.

    Rows come largest community first; fractions are exact.
    """
    rows = []
    for cid, members in enumerate(partition.communities()):
        c = Counter(affiliations.get(n, Affiliation.UNKNOWN) for n in members)
        n = len(members)
        rows.append({
            "community": cid + 1,
            "size": n,
            "frac_pro_bjp": Fraction(c[Affiliation.PRO_BJP], n),
            "frac_other": Fraction(c[Affiliation.OTHER], n),
            "frac_unknown": Fraction(c[Affiliation.UNKNOWN], n),
        })
    rows.sort(key=lambda r: (-r["size"], r["community"]))
    return rows


def write_fractions_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["community", "size", "pro_bjp", "other", "unknown"])
        for r in rows:
            w.writerow([r["community"], r["size"], f"{float(r['frac_pro_bjp']):.3f}",
                        f"{float(r['frac_other']):.3f}", f"{float(r['frac_unknown']):.3f}"])


def export_graph(
    prefix: str | Path,
    g: nx.DiGraph,
    partition: CommunityPartition | None = None,
    affiliations: Mapping[str, Affiliation] | None = None,
) -> tuple[Path, Path]:
    """Write ``<prefix>_edges.csv`` and ``<prefix>_nodes.csv`` for external viewers."""
    prefix = Path(prefix)
    edges_path = prefix.with_name(prefix.name + "_edges.csv")
    nodes_path = prefix.with_name(prefix.name + "_nodes.csv")
    affiliations = affiliations or {}
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target", "weight"])
        for a, b, wt in sorted(g.edges(data="weight", default=1)):
            w.writerow([a, b, wt])
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "affiliation", "community", "degree"])
        for n in sorted(g.nodes):
            comm = "" if partition is None else partition.assignment.get(n, "")
            w.writerow([n, affiliations.get(n, Affiliation.UNKNOWN).value, comm, g.degree(n)])
    return edges_path, nodes_path
