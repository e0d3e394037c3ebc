"""Stiffness/mass pencils for the graph approximations.

The stiffness matrix is the conductance Laplacian
L = sum over edges of (1/resistance) (e_u - e_v)(e_u - e_v)^T and the
mass matrix is the diagonal of lumped vertex masses, so the generalized
eigenproblem L u = lambda M u discretizes the quadratic form paired with
the measure.  Dirichlet conditions are imposed by deleting rows and
columns, which is the exact form restriction.

``assemble_decoupled`` produces the two bracketing families used by the
counting-function sandwich: splitting every coupling corner of the
level-j blocks into a cell copy and a line copy (free "Neumann" split,
which enlarges the form domain and can only raise counting functions),
or grounding all of V_j (restriction, which can only lower them).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import AssemblyError, EmptyPencilError, LevelError
from .geometry import GraphApprox, enumerate_words, vertex_set_v, word_rank


@dataclass(frozen=True)
class Boundary:
    """Boundary-condition tag carried by a pencil."""
    kind: str                       # neumann | dirichlet_v0 | dirichlet_vm |
                                    # neumann_split | dirichlet_split
    level: Optional[int] = None     # constraint/decouple level where applicable
    component: Optional[str] = None # component label for decoupled pencils

    def describe(self) -> str:
        out = self.kind
        if self.level is not None:
            out += f"(j={self.level})"
        if self.component is not None:
            out += f"[{self.component}]"
        return out


@dataclass(eq=False)
class Pencil:
    """Symmetric stiffness matrix L with diagonal mass vector."""

    L: sp.csr_matrix
    mass: np.ndarray
    boundary: Boundary
    vertex_map: np.ndarray          # pencil index -> graph vertex id

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def scaled(self, c: float) -> "Pencil":
        """Same stiffness with mass multiplied by c (eigenvalues scale by 1/c)."""
        return Pencil(self.L, c * self.mass, self.boundary, self.vertex_map)

    def dump_coordinate(self) -> tuple[str, str]:
        """(matrix, mass) texts: symmetric ``row col value`` triplets in row
        order plus one mass value per line, for cross-checks with external
        tools."""
        coo = self.L.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [
            f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}"
            for i in order
        ]
        mass_lines = [f"{v:.17g}" for v in self.mass]
        return "\n".join(lines) + "\n", "\n".join(mass_lines) + "\n"


def _laplacian_from_edges(edge_iter, n: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for u, v, r in edge_iter:
        if r <= 0.0:
            raise AssemblyError(f"edge ({u},{v}) has nonpositive resistance {r!r}")
        c = 1.0 / r
        rows += [u, v, u, v]
        cols += [u, v, v, u]
        vals += [c, c, -c, -c]
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    L.sort_indices()
    return L


def assemble_neumann(g: GraphApprox) -> Pencil:
    """Full conductance Laplacian with the lumped masses (free boundary)."""
    n = g.n_vertices
    L = _laplacian_from_edges(((e.u, e.v, e.resistance) for e in g.edges), n)
    mass = g.masses
    if np.any(mass <= 0.0):
        raise AssemblyError("every vertex must carry positive mass")
    return Pencil(L, mass, Boundary("neumann"), np.arange(n))


def _restrict(p: Pencil, keep: np.ndarray, boundary: Boundary) -> Pencil:
    if keep.size == 0:
        raise EmptyPencilError(
            f"boundary condition {boundary.describe()} constrains every vertex"
        )
    L = p.L[keep][:, keep].tocsr()
    L.sort_indices()
    return Pencil(L, p.mass[keep], boundary, p.vertex_map[keep])


def apply_dirichlet(p: Pencil, g: GraphApprox, where: str, level: Optional[int] = None) -> Pencil:
    """Zero conditions on V_0 (``where="v0"``) or on V_j union V_0 (``where="vm"``).

    Rows and columns of constrained vertices are deleted.  The result may
    decouple into several components; that is intended for the bracketing
    construction.
    """
    if where == "v0":
        constrained = set(vertex_set_v(g, 0))
        boundary = Boundary("dirichlet_v0")
    elif where == "vm":
        if level is None:
            raise LevelError("where='vm' needs a level")
        constrained = set(vertex_set_v(g, level)) | set(vertex_set_v(g, 0))
        boundary = Boundary("dirichlet_vm", level=level)
    else:
        raise LevelError(f"unknown constraint set {where!r}")
    graph_ids = set(p.vertex_map.tolist())
    pos = {vid: i for i, vid in enumerate(p.vertex_map.tolist())}
    drop = {pos[v] for v in constrained if v in graph_ids}
    keep = np.array(sorted(set(range(p.n)) - drop), dtype=np.int64)
    return _restrict(p, keep, boundary)


def _block_vertices(g: GraphApprox, w: str) -> list[int]:
    """All graph vertices belonging to the level-|w| block w.

    Corners of all cells prefixed by w, plus interior nodes of bridges of
    level > |w| whose address is prefixed by w.
    """
    j = len(w)
    ids = []
    for suffix in enumerate_words(g.m - j):
        base = 3 * word_rank(w + suffix)
        ids.extend((base, base + 1, base + 2))
    for lp in g.line_paths:
        if lp.level > j and lp.word.startswith(w):
            ids.extend(lp.nodes[1:-1])
    return sorted(ids)


def assemble_decoupled(g: GraphApprox, j: int, kind: str) -> list[Pencil]:
    """Component pencils of the level-j decoupled forms.

    ``kind="neumann_split"``: every block corner that ends a bridge of
    level <= j is duplicated; the cell copy keeps the cell mass share plus
    any interior bridge share, the line copy keeps the bridge share.  One
    pencil per level-j block and one free-free path pencil per split-off
    bridge.  Total mass is conserved.

    ``kind="dirichlet_split"``: principal submatrix of the full Laplacian
    after grounding V_j (which contains V_0); one pencil per connected
    component.  Components with no remaining vertex (single cells at
    j = m, bridges at s = 1) are dropped.
    """
    if not (0 <= j <= g.m):
        raise LevelError(f"decouple level {j} outside 0..{g.m}")

    if kind == "neumann_split":
        if j == 0:
            return [assemble_neumann(g)]
        pencils = []
        for w in enumerate_words(j):
            vids = _block_vertices(g, w)
            index = {vid: i for i, vid in enumerate(vids)}
            sub_edges = []
            for e in g.edges:
                if e.u in index and e.v in index and (e.kind == "cell" or e.level > j):
                    sub_edges.append((index[e.u], index[e.v], e.resistance))
            L = _laplacian_from_edges(sub_edges, len(vids))
            varr = np.array(vids, dtype=np.int64)
            mass = g.mass_cell[varr].copy()
            # line shares stay with the block only for bridges interior to it;
            # line_level == 0 covers interior line nodes and the bridge-free V_0 corners
            internal = (g.line_level[varr] > j) | (g.line_level[varr] == 0)
            mass[internal] += g.mass_line[varr][internal]
            pencils.append(
                Pencil(L, mass, Boundary("neumann_split", j, f"block:{w}"),
                       varr)
            )
        for lp in g.line_paths:
            if lp.level > j:
                continue
            nn = len(lp.nodes)
            seg = lp.resistance / g.s
            L = _laplacian_from_edges(
                ((i, i + 1, seg) for i in range(nn - 1)), nn
            )
            mass = np.full(nn, lp.mass / g.s)
            mass[0] = mass[-1] = lp.mass / (2 * g.s)
            label = f"edge:{lp.word or '-'}@{lp.edge}"
            pencils.append(
                Pencil(L, mass, Boundary("neumann_split", j, label),
                       np.array(lp.nodes, dtype=np.int64))
            )
        return pencils

    if kind == "dirichlet_split":
        full = assemble_neumann(g)
        constrained = set(vertex_set_v(g, j)) | set(vertex_set_v(g, 0))
        keep = np.array(sorted(set(range(g.n_vertices)) - constrained), dtype=np.int64)
        if keep.size == 0:
            return []
        L = full.L[keep][:, keep].tocsr()
        ncomp, labels = connected_components(L, directed=False)
        pencils = []
        for c in range(ncomp):
            idx = np.nonzero(labels == c)[0]
            Lc = L[idx][:, idx].tocsr()
            Lc.sort_indices()
            pencils.append(
                Pencil(
                    Lc,
                    full.mass[keep][idx],
                    Boundary("dirichlet_split", j, f"component:{c}"),
                    keep[idx],
                )
            )
        return pencils

    raise LevelError(f"unknown decoupling kind {kind!r}")
