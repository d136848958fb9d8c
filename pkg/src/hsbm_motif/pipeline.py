"""Recursive detect-embed-cluster-test loop over a graph.

Each round embeds the current subgraph, splits it into communities with the
seeded subspace sweep, re-embeds every community at a lower dimension, fills
the pairwise two-sample dissimilarity matrix, groups communities into motifs,
and recurses on one representative per motif.  Errors inside a branch mark
that node degenerate instead of aborting the run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .clustering import estimate_num_subgraphs, seeded_subspace_cluster
from .embedding import Embedding, ase, project_to_sphere, select_dimension
from .graph import (
    SparseGraph,
    VertexPartition,
    block_density,
    induced_subgraph,
)
from .motifs import (
    DissimilarityMatrix,
    KernelConfig,
    MotifAssignment,
    cluster_motifs,
    dissimilarity_matrix,
)
from .seeding import derive_rng


class PipelineError(ValueError):
    """Raised for invalid pipeline configurations."""


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for one hierarchy-detection run.

    ``top_dim`` (D) is the embedding dimension at the root, ``sub_dim`` (d)
    the dimension used for community re-embeds and every deeper level;
    either may be ``"auto"`` for scree-based selection.  ``n_subgraphs`` (R)
    is the community count per round, or ``"auto"`` for the seed-overlap
    estimate.  Recursion stops when a subgraph has at most
    ``min_cluster_size`` vertices (default: 100x the embedding dimension of
    the node) or at ``max_depth``.
    """

    top_dim: int | str = "auto"
    sub_dim: int | str = "auto"
    n_subgraphs: int | str = "auto"
    n_motifs: int | None = None
    motif_height: float | None = None
    kernel: KernelConfig = field(default_factory=KernelConfig)
    n_bootstrap: int = 0
    mode: Literal["exact", "linear"] = "exact"
    sphere_projection: bool = False
    align: bool = True
    min_cluster_size: int | None = None
    max_depth: int = 4
    n_mc: int = 5
    max_scree: int = 50
    motif_source: Literal["statistic", "pvalue"] = "statistic"
    linkage: Literal["average", "complete", "single"] = "average"
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        for name in ("top_dim", "sub_dim", "n_subgraphs"):
            value = getattr(self, name)
            if isinstance(value, str):
                if value != "auto":
                    raise PipelineError(f"{name} must be an int or 'auto', got {value!r}")
            elif value < 1:
                raise PipelineError(f"{name} must be positive, got {value}")
        if self.max_depth < 1:
            raise PipelineError("max_depth must be >= 1")
        if self.min_cluster_size is not None:
            if self.min_cluster_size < 1:
                raise PipelineError("min_cluster_size must be positive")
            if isinstance(self.sub_dim, int) and self.min_cluster_size < 2 * self.sub_dim:
                raise PipelineError(
                    "min_cluster_size must be at least twice the recursion dimension"
                )
        if self.n_bootstrap < 0:
            raise PipelineError("n_bootstrap must be >= 0")
        if self.n_mc < 1:
            raise PipelineError("n_mc must be >= 1")
        if (
            isinstance(self.top_dim, int)
            and isinstance(self.sub_dim, int)
            and self.sub_dim > self.top_dim
        ):
            warnings.warn(
                "recursion dimension exceeds the top-level dimension; deeper "
                "levels are expected to embed into fewer dimensions"
            )


@dataclass(eq=False)
class HierarchyNode:
    """One subgraph in the recovered hierarchy.

    ``vertex_indices`` index into the root graph.  When the node was split,
    ``children`` partition its vertex set, ``motifs`` groups the children,
    and ``dissimilarity`` holds the pairwise statistics between them.  A
    node that is not its motif's representative carries the representative's
    child index in ``structure_from`` instead of its own subtree.
    """

    vertex_indices: np.ndarray
    graph: SparseGraph
    depth: int
    path: tuple[int, ...] = ()
    dim_used: int | None = None
    eigenvalues: np.ndarray | None = None
    children: list["HierarchyNode"] = field(default_factory=list)
    child_partition: VertexPartition | None = None
    motifs: MotifAssignment | None = None
    dissimilarity: DissimilarityMatrix | None = None
    block_matrix: np.ndarray | None = None
    block_weights: np.ndarray | None = None
    is_representative: bool = True
    structure_from: int | None = None
    error: str | None = None

    @property
    def n_vertices(self) -> int:
        return int(self.vertex_indices.size)

    @property
    def degenerate(self) -> bool:
        return self.error is not None

    def leaves(self) -> list["HierarchyNode"]:
        if not self.children:
            return [self]
        out: list[HierarchyNode] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def representative_subgraph(
    children: list[HierarchyNode], motifs: MotifAssignment
) -> dict[int, int]:
    """Child index chosen to represent each motif: the largest member,
    ties toward the lowest child index.  Returns ``{motif: child index}``."""
    if motifs.labels.size != len(children):
        raise PipelineError("motif assignment does not match the child list")
    chosen: dict[int, int] = {}
    for motif in range(motifs.n_motifs):
        members = motifs.members(motif)
        if members.size == 0:
            raise PipelineError(f"motif {motif} has no members")
        sizes = np.array([children[int(c)].n_vertices for c in members])
        chosen[motif] = int(members[int(np.argmax(sizes))])
    return chosen


def estimate_block_matrix(
    g: SparseGraph, part: VertexPartition
) -> tuple[np.ndarray, np.ndarray]:
    """Block connection probabilities and mixture weights under a partition."""
    p_hat = block_density(g, part)
    pi_hat = part.sizes() / part.n_vertices
    return p_hat, pi_hat


def compare_blocks(
    p_a: np.ndarray,
    pi_a: np.ndarray,
    p_b: np.ndarray,
    pi_b: np.ndarray,
) -> tuple[float, float]:
    """Frobenius distance between block matrices and Euclidean distance
    between weight vectors; the smaller operands are zero-padded when block
    counts differ."""
    ka, kb = p_a.shape[0], p_b.shape[0]
    k = max(ka, kb)

    def pad_matrix(p: np.ndarray) -> np.ndarray:
        out = np.zeros((k, k))
        out[: p.shape[0], : p.shape[1]] = p
        return out

    def pad_vector(v: np.ndarray) -> np.ndarray:
        out = np.zeros(k)
        out[: v.size] = v
        return out

    d_p = float(np.linalg.norm(pad_matrix(p_a) - pad_matrix(p_b)))
    d_pi = float(np.linalg.norm(pad_vector(pi_a) - pad_vector(pi_b)))
    return d_p, d_pi


def _resolve_dim(cfg: PipelineConfig, g: SparseGraph, depth: int) -> int:
    wanted = cfg.top_dim if depth == 0 else cfg.sub_dim
    n = g.n_vertices
    if wanted == "auto":
        max_dim = min(cfg.max_scree, n - 1)
        if max_dim < 1:
            raise PipelineError(f"subgraph too small to embed: n={n}")
        return select_dimension(g, max_dim)
    return min(int(wanted), n - 1)


def _stop_threshold(cfg: PipelineConfig, dim: int) -> int:
    if cfg.min_cluster_size is not None:
        return cfg.min_cluster_size
    return 100 * dim


def _embed(cfg: PipelineConfig, g: SparseGraph, dim: int) -> Embedding:
    emb = ase(g, dim)
    if cfg.sphere_projection:
        emb = project_to_sphere(emb)
    return emb


def detect_hierarchy(g: SparseGraph, cfg: PipelineConfig) -> HierarchyNode:
    """Recover the hierarchical community structure of ``g``.

    The caller is expected to pass a connected graph (extract the largest
    connected component first if necessary).  Per node: embed; cluster the
    rows into subgraphs; re-embed every subgraph at the recursion dimension;
    fill the pairwise dissimilarity matrix; group subgraphs into motifs;
    recurse on the largest subgraph of each motif.  Any stage failure marks
    only that node degenerate (with the node path in the message).

    The run is a deterministic function of the graph and ``cfg.seed``.
    """
    return _detect_node(g, np.arange(g.n_vertices, dtype=np.int64), cfg, depth=0, path=())


def _detect_node(
    root_graph: SparseGraph,
    vertex_indices: np.ndarray,
    cfg: PipelineConfig,
    depth: int,
    path: tuple[int, ...],
) -> HierarchyNode:
    sub = (
        root_graph
        if vertex_indices.size == root_graph.n_vertices and depth == 0
        else induced_subgraph(root_graph, vertex_indices)
    )
    node = HierarchyNode(vertex_indices=vertex_indices, graph=sub, depth=depth, path=path)
    try:
        dim = _resolve_dim(cfg, sub, depth)
    except Exception as exc:  # tiny or pathological subgraph: keep the leaf
        node.error = f"node {'/'.join(map(str, path)) or 'root'}: {exc}"
        return node
    if sub.n_vertices <= _stop_threshold(cfg, dim) or depth >= cfg.max_depth:
        return node
    try:
        _split_node(root_graph, node, cfg, dim)
    except Exception as exc:
        node.error = f"node {'/'.join(map(str, path)) or 'root'}: {exc}"
        node.children = []
    return node


def _split_node(
    root_graph: SparseGraph, node: HierarchyNode, cfg: PipelineConfig, dim: int
) -> None:
    sub = node.graph
    path_key = "/".join(map(str, node.path))
    emb = _embed(cfg, sub, dim)
    node.dim_used = dim
    node.eigenvalues = emb.eigenvalues

    if cfg.n_subgraphs == "auto":
        est = estimate_num_subgraphs(
            emb.positions,
            d_hat=max(dim, 2),
            n_mc=cfg.n_mc,
            rng=derive_rng(cfg.seed, "count", path_key),
        )
        r = est.n_subgraphs
    else:
        r = min(int(cfg.n_subgraphs), sub.n_vertices)
    if r < 2:
        return  # nothing to split

    part, _ = seeded_subspace_cluster(
        emb.positions, r, derive_rng(cfg.seed, "cluster", path_key)
    )
    if not part.is_proper():
        # drop empty clusters; keep labels contiguous
        occupied = np.flatnonzero(part.sizes() > 0)
        remap = {int(old): new for new, old in enumerate(occupied)}
        part = VertexPartition(
            labels=np.array([remap[int(l)] for l in part.labels]),
            n_clusters=len(occupied),
        )
        if part.n_clusters < 2:
            return
    node.child_partition = part
    node.block_matrix, node.block_weights = estimate_block_matrix(sub, part)

    child_indices = [node.vertex_indices[part.members(c)] for c in range(part.n_clusters)]
    sub_dim = _child_dim(cfg, root_graph, child_indices)
    child_embs = []
    for c, idx in enumerate(child_indices):
        child_graph = induced_subgraph(root_graph, idx)
        child_embs.append(_embed(cfg, child_graph, min(sub_dim, child_graph.n_vertices - 1)))
    usable = min(e.dim for e in child_embs)
    child_mats = [e.positions[:, :usable] for e in child_embs]

    node.dissimilarity = dissimilarity_matrix(
        child_mats,
        kernel=cfg.kernel,
        mode=cfg.mode,
        n_boot=cfg.n_bootstrap,
        rng=derive_rng(cfg.seed, "test", path_key),
        align=cfg.align,
        threads=cfg.threads,
    )
    node.motifs = cluster_motifs(
        node.dissimilarity,
        source=cfg.motif_source,
        linkage=cfg.linkage,
        n_motifs=cfg.n_motifs,
        height=cfg.motif_height,
    )
    reps = representative_subgraph_indices(child_indices, node.motifs)

    children: list[HierarchyNode] = []
    for c, idx in enumerate(child_indices):
        child_path = node.path + (c,)
        if c in reps.values():
            child = _detect_node(root_graph, idx, cfg, node.depth + 1, child_path)
            child.is_representative = True
        else:
            child = HierarchyNode(
                vertex_indices=idx,
                graph=induced_subgraph(root_graph, idx),
                depth=node.depth + 1,
                path=child_path,
                is_representative=False,
                structure_from=reps[int(node.motifs.labels[c])],
            )
        children.append(child)
    node.children = children


def representative_subgraph_indices(
    child_indices: list[np.ndarray], motifs: MotifAssignment
) -> dict[int, int]:
    """Like :func:`representative_subgraph` but over raw index arrays."""
    chosen: dict[int, int] = {}
    for motif in range(motifs.n_motifs):
        members = motifs.members(motif)
        if members.size == 0:
            raise PipelineError(f"motif {motif} has no members")
        sizes = np.array([child_indices[int(c)].size for c in members])
        chosen[motif] = int(members[int(np.argmax(sizes))])
    return chosen


def _child_dim(
    cfg: PipelineConfig, root_graph: SparseGraph, child_indices: list[np.ndarray]
) -> int:
    if cfg.sub_dim != "auto":
        return int(cfg.sub_dim)
    # children must share an embedding dimension for the pairwise tests;
    # take the largest per-child estimate so none is under-embedded
    dims = []
    for idx in child_indices:
        child = induced_subgraph(root_graph, idx)
        max_dim = min(cfg.max_scree, child.n_vertices - 1)
        if max_dim < 1:
            dims.append(1)
            continue
        dims.append(select_dimension(child, max_dim))
    return max(dims)


# ---------------------------------------------------------------------------
# Report serialization.
# ---------------------------------------------------------------------------


def hierarchy_report(root: HierarchyNode, cfg: PipelineConfig) -> dict:
    """JSON-ready tree mirroring the hierarchy; vertex lists are referenced
    by node path against the sidecar assignment table."""

    def node_dict(node: HierarchyNode) -> dict:
        out: dict = {
            "path": "/".join(map(str, node.path)),
            "depth": node.depth,
            "n_vertices": node.n_vertices,
            "is_representative": node.is_representative,
        }
        if node.structure_from is not None:
            out["structure_from"] = node.structure_from
        if node.dim_used is not None:
            out["dim_used"] = node.dim_used
            out["eigenvalues"] = [float(v) for v in node.eigenvalues]
        if node.error is not None:
            out["error"] = node.error
        if node.motifs is not None:
            out["motif_labels"] = [int(l) for l in node.motifs.labels]
            out["motif_dendrogram"] = node.motifs.merges
        if node.dissimilarity is not None:
            out["dissimilarity"] = node.dissimilarity.statistics.tolist()
            if node.dissimilarity.p_values is not None:
                out["p_values"] = node.dissimilarity.p_values.tolist()
            out["bandwidths"] = node.dissimilarity.bandwidths.tolist()
        if node.block_matrix is not None:
            out["block_matrix"] = [
                [None if np.isnan(v) else float(v) for v in row]
                for row in node.block_matrix
            ]
            out["block_weights"] = [float(v) for v in node.block_weights]
        if node.children:
            out["children"] = [node_dict(c) for c in node.children]
        return out

    return {
        "config": config_dict(cfg),
        "seed": cfg.seed,
        "tree": node_dict(root),
    }


def config_dict(cfg: PipelineConfig) -> dict:
    out = {
        "top_dim": cfg.top_dim,
        "sub_dim": cfg.sub_dim,
        "n_subgraphs": cfg.n_subgraphs,
        "n_motifs": cfg.n_motifs,
        "motif_height": cfg.motif_height,
        "bandwidth": cfg.kernel.bandwidth,
        "n_bootstrap": cfg.n_bootstrap,
        "mode": cfg.mode,
        "sphere_projection": cfg.sphere_projection,
        "align": cfg.align,
        "min_cluster_size": cfg.min_cluster_size,
        "max_depth": cfg.max_depth,
        "n_mc": cfg.n_mc,
        "max_scree": cfg.max_scree,
        "motif_source": cfg.motif_source,
        "linkage": cfg.linkage,
        "seed": cfg.seed,
        "threads": cfg.threads,
    }
    return out


def config_from_dict(data: dict) -> PipelineConfig:
    kwargs = dict(data)
    bandwidth = kwargs.pop("bandwidth", "median")
    kwargs["kernel"] = KernelConfig(bandwidth=bandwidth)
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(kwargs) - known
    if unknown:
        raise PipelineError(f"unknown pipeline config keys: {sorted(unknown)}")
    return PipelineConfig(**kwargs)


def vertex_assignments(root: HierarchyNode) -> list[tuple[str, str]]:
    """(vertex id, deepest node path) rows for the sidecar CSV."""
    ids = root.graph.ids_for(root.vertex_indices)
    id_of = {int(v): ids[k] for k, v in enumerate(root.vertex_indices)}
    deepest: dict[int, str] = {int(v): "" for v in root.vertex_indices}
    for node in root.walk():
        key = "/".join(map(str, node.path))
        for v in node.vertex_indices:
            deepest[int(v)] = key
    return [(id_of[v], deepest[v]) for v in sorted(deepest)]
