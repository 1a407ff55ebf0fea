"""Discretised manifolds and their spectra.

Builders for the reference instances (circle, interval, icosphere, flat
torus), an OFF loader, cotangent stiffness with lumped mass, a deflated
inverse power iteration for the first non-trivial eigenvalue, edge-path
diameters and the oscillation quotient diagnostic.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.sparse.linalg import cg

from eigenbound.errors import (
    ConfigError,
    DegenerateTriangle,
    DisconnectedMesh,
    ModelTooShort,
    NoConvergence,
    NonManifoldMesh,
    ParseError,
    ProblemError,
)
from eigenbound.model import ModelEigenSolution

log = logging.getLogger(__name__)

_MIN_NODES = 8
_MAX_SUBDIVISIONS = 7

# Triangles with area below this fraction of the mean area are rejected.
_DEGENERATE_AREA = 1e-14

# Above this vertex count the pair branch of the oscillation quotient samples
# source vertices instead of using every pair.
_MAX_PAIR_SOURCES = 2000

# Source rows per distance block; bounds the dense block in memory.
_DISTANCE_CHUNK = 256


@dataclass(frozen=True)
class AnalyticMetadata:
    """Known geometry of a built-in instance: dimension, Ricci lower bound over (n-1),
    diameter and, where known, the exact first eigenvalue."""

    n: int
    kappa_lower: float
    diameter: float
    lambda1_exact: float | None = None


@dataclass(frozen=True, eq=False)
class Graph1D:
    """Chain of nodes on a circle (``closed``) or an interval.

    ``length`` is the circumference of a circle or the length of an interval.
    """

    positions: np.ndarray
    closed: bool
    length: float
    metadata: AnalyticMetadata | None = None
    name: str = "graph"

    @property
    def vertex_count(self) -> int:
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle mesh in R^3.

    ``periods`` marks a mesh that is periodic in x and y (a flat torus): edge
    vectors then follow the minimum-image convention.
    ``radius`` marks a mesh inscribed in the sphere of that radius about the
    origin; pair distances are then great-circle arcs.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    metadata: AnalyticMetadata | None = None
    name: str = "mesh"
    periods: tuple[float, float] | None = None
    radius: float | None = None

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


Manifold = TriangleMesh | Graph1D


@dataclass(frozen=True)
class SpectralConfig:
    """Settings for :func:`first_nontrivial_eigenvalue`."""

    tol: float = 1e-8
    max_iterations: int = 500
    seed: int = 0
    inner_rtol_factor: float = 1e-3

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigError(f"tol={self.tol} must be positive")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations={self.max_iterations} must be at least 1")
        if not 0 < self.inner_rtol_factor <= 1:
            raise ConfigError(f"inner_rtol_factor={self.inner_rtol_factor} must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    lambda1: float
    residual: float
    iterations: int
    grid_size: int
    vector: np.ndarray


@dataclass(frozen=True)
class OscillationReport:
    """Maximum of the oscillation quotient over vertex pairs and over the diagonal.

    ``argmax`` is the maximising vertex pair, or ``"diagonal"`` when the
    diagonal branch wins.  ``diagonal_argmax`` indexes a triangle (meshes) or
    an edge (graphs).
    """

    max_q: float
    argmax: tuple[int, int] | str
    pair_max: float
    pair_argmax: tuple[int, int]
    diagonal_max: float
    diagonal_argmax: int
    sampled: bool
    sources: int
    seed: int
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise ProblemError(f"{name}={value!r} must be positive")


def _check_nodes(**counts: int) -> None:
    for name, count in counts.items():
        if count < _MIN_NODES:
            raise ProblemError(f"{name}={count} must be at least {_MIN_NODES}")


def build_circle(length: float, nodes: int) -> Graph1D:
    """Uniform closed chain of *nodes* points on a circle of circumference *length*."""
    _check_positive(length=length)
    _check_nodes(nodes=nodes)
    metadata = AnalyticMetadata(n=1, kappa_lower=0.0, diameter=length / 2.0, lambda1_exact=(2.0 * math.pi / length) ** 2)
    return Graph1D(
        positions=np.arange(nodes) * (length / nodes),
        closed=True,
        length=length,
        metadata=metadata,
        name=f"circle(L={length:g}, N={nodes})",
    )


def build_interval(diameter: float, nodes: int) -> Graph1D:
    """Uniform open chain of *nodes* points on [0, diameter]."""
    _check_positive(diameter=diameter)
    _check_nodes(nodes=nodes)
    metadata = AnalyticMetadata(n=1, kappa_lower=0.0, diameter=diameter, lambda1_exact=math.pi**2 / diameter**2)
    return Graph1D(
        positions=np.linspace(0.0, diameter, nodes),
        closed=False,
        length=diameter,
        metadata=metadata,
        name=f"interval(D={diameter:g}, N={nodes})",
    )


def _icosahedron() -> tuple[list[np.ndarray], list[tuple[int, int, int]]]:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    corners = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    vertices = [np.array(c, dtype=float) / math.sqrt(1.0 + t * t) for c in corners]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    return vertices, faces


def _subdivide(vertices: list[np.ndarray], faces: list[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
    """Split every face into four, pushing the new edge midpoints to the unit sphere."""
    midpoints: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoints:
            point = vertices[a] + vertices[b]
            vertices.append(point / np.linalg.norm(point))
            midpoints[key] = len(vertices) - 1
        return midpoints[key]

    refined = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        refined.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return refined


def build_icosphere(radius: float, subdivisions: int) -> TriangleMesh:
    """Icosahedron refined *subdivisions* times and projected to a sphere of *radius*.

    The result has 10 * 4^k + 2 vertices and 20 * 4^k triangles.
    """
    _check_positive(radius=radius)
    if not 0 <= subdivisions <= _MAX_SUBDIVISIONS:
        raise ProblemError(f"subdivisions={subdivisions} must lie in [0, {_MAX_SUBDIVISIONS}]")
    vertices, faces = _icosahedron()
    for _ in range(subdivisions):
        faces = _subdivide(vertices, faces)
    metadata = AnalyticMetadata(
        n=2, kappa_lower=1.0 / radius**2, diameter=math.pi * radius, lambda1_exact=2.0 / radius**2
    )
    return TriangleMesh(
        vertices=radius * np.array(vertices),
        triangles=np.array(faces, dtype=np.int64),
        metadata=metadata,
        name=f"icosphere(r={radius:g}, subdiv={subdivisions})",
        radius=radius,
    )


def build_flat_torus(a: float, b: float, n_a: int, n_b: int) -> TriangleMesh:
    """Periodic n_a x n_b grid on the rectangle [0, a) x [0, b), two triangles per cell.

    Vertex (i, j) sits at (i a / n_a, j b / n_b, 0) with index ``i * n_b + j``.
    """
    _check_positive(a=a, b=b)
    _check_nodes(n_a=n_a, n_b=n_b)
    i, j = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
    vertices = np.column_stack([(i * (a / n_a)).ravel(), (j * (b / n_b)).ravel(), np.zeros(i.size)])

    def index(di: int, dj: int) -> np.ndarray:
        return (((i + di) % n_a) * n_b + (j + dj) % n_b).ravel()

    v00, v10, v11, v01 = index(0, 0), index(1, 0), index(1, 1), index(0, 1)
    triangles = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    metadata = AnalyticMetadata(
        n=2,
        kappa_lower=0.0,
        diameter=math.hypot(a, b) / 2.0,
        lambda1_exact=min((2.0 * math.pi / a) ** 2, (2.0 * math.pi / b) ** 2),
    )
    return TriangleMesh(
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        metadata=metadata,
        name=f"torus(a={a:g}, b={b:g}, {n_a}x{n_b})",
        periods=(a, b),
    )


# ---------------------------------------------------------------------------
# OFF files
# ---------------------------------------------------------------------------

def _off_tokens(text: str):
    """Yield ``(line_number, fields)`` for every non-empty, non-comment line."""
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].split()
        if content:
            yield number, content


def _validate_triangles(vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Enforce that every edge borders exactly two triangles and the mesh is connected."""
    if np.any(triangles[:, 0] == triangles[:, 1]) or np.any(triangles[:, 1] == triangles[:, 2]) or np.any(
        triangles[:, 0] == triangles[:, 2]
    ):
        raise DegenerateTriangle("a triangle repeats a vertex index")

    half_edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    edges, counts = np.unique(half_edges, axis=0, return_counts=True)
    bad = counts != 2
    if np.any(bad):
        first = edges[bad][0]
        raise NonManifoldMesh(
            f"{int(bad.sum())} edges do not border exactly two triangles; "
            f"edge ({first[0]}, {first[1]}) borders {counts[bad][0]}"
        )

    count = len(vertices)
    adjacency = sparse.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(count, count))
    components, _ = connected_components(adjacency, directed=False)
    if components > 1:
        raise DisconnectedMesh(f"mesh has {components} connected components")


def load_mesh_off(path: str | Path) -> TriangleMesh:
    """Read an ASCII OFF file of triangles.

    Raises:
        ParseError: On malformed content, with the offending line number.
        NonManifoldMesh: If an edge does not border exactly two triangles.
        DisconnectedMesh: If the mesh has more than one component.
    """
    path = Path(path)
    lines = list(_off_tokens(path.read_text()))
    if not lines or lines[0][1][0] != "OFF":
        raise ParseError("missing OFF header", line=lines[0][0] if lines else 1)

    header_line, header = lines[0]
    rest = lines[1:]
    counts = header[1:]
    if not counts:
        if not rest:
            raise ParseError("missing vertex/face counts", line=header_line)
        header_line, counts = rest[0]
        rest = rest[1:]
    try:
        vertex_count, face_count = int(counts[0]), int(counts[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"bad counts line {' '.join(counts)!r}", line=header_line) from exc
    if len(rest) < vertex_count + face_count:
        raise ParseError(
            f"expected {vertex_count} vertices and {face_count} faces, found {len(rest)} data lines",
            line=rest[-1][0] if rest else header_line,
        )

    vertices = np.empty((vertex_count, 3))
    for k, (number, fields) in enumerate(rest[:vertex_count]):
        if len(fields) < 3:
            raise ParseError(f"vertex needs 3 coordinates, got {len(fields)}", line=number)
        try:
            vertices[k] = [float(v) for v in fields[:3]]
        except ValueError as exc:
            raise ParseError(f"bad vertex {' '.join(fields)!r}", line=number) from exc
        if not np.all(np.isfinite(vertices[k])):
            raise ParseError(f"non-finite vertex coordinate in {' '.join(fields[:3])!r}", line=number)

    triangles = np.empty((face_count, 3), dtype=np.int64)
    for k, (number, fields) in enumerate(rest[vertex_count : vertex_count + face_count]):
        try:
            values = [int(v) for v in fields]
        except ValueError as exc:
            raise ParseError(f"bad face {' '.join(fields)!r}", line=number) from exc
        if values[0] != 3:
            raise ParseError(f"only triangles are supported, got a face of arity {values[0]}", line=number)
        if len(values) < 4:
            raise ParseError(f"triangle needs 3 vertex indices, got {len(values) - 1}", line=number)
        face = values[1:4]
        if min(face) < 0 or max(face) >= vertex_count:
            raise ParseError(f"face index out of range 0..{vertex_count - 1}: {face}", line=number)
        triangles[k] = face

    _validate_triangles(vertices, triangles)
    log.info("Loaded %s: %d vertices, %d triangles", path, vertex_count, face_count)
    return TriangleMesh(vertices=vertices, triangles=triangles, name=path.name)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _wrap(vectors: np.ndarray, periods: tuple[float, float] | None) -> np.ndarray:
    """Apply the minimum-image convention in x and y."""
    if periods is None:
        return vectors
    wrapped = vectors.copy()
    for axis, period in enumerate(periods):
        wrapped[..., axis] -= period * np.round(wrapped[..., axis] / period)
    return wrapped


def _triangle_edges(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """Edge vectors v1 - v0 and v2 - v0 of every triangle."""
    corners = mesh.vertices[mesh.triangles]
    e1 = _wrap(corners[:, 1] - corners[:, 0], mesh.periods)
    e2 = _wrap(corners[:, 2] - corners[:, 0], mesh.periods)
    return e1, e2


def mesh_edges(mesh: Manifold) -> tuple[np.ndarray, np.ndarray]:
    """Unique edges as an (m, 2) index array together with their lengths."""
    if isinstance(mesh, Graph1D):
        count = mesh.vertex_count
        edges = np.column_stack([np.arange(count - 1), np.arange(1, count)])
        lengths = np.diff(mesh.positions)
        if mesh.closed:
            edges = np.vstack([edges, [count - 1, 0]])
            lengths = np.append(lengths, mesh.length - (mesh.positions[-1] - mesh.positions[0]))
        return edges, lengths

    tri = mesh.triangles
    edges = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
    vectors = _wrap(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], mesh.periods)
    return edges, np.linalg.norm(vectors, axis=1)


def mean_edge_length(mesh: Manifold) -> float:
    return float(np.mean(mesh_edges(mesh)[1]))


def assemble_laplacian(mesh: Manifold) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Assemble the stiffness matrix K and the lumped diagonal mass.

    For triangle meshes K carries the cotangent weights
    ``w_ij = (cot alpha_ij + cot beta_ij) / 2`` with ``K = diag(W 1) - W``; each
    vertex receives a third of the area of its triangles.  For chains the
    weights are inverse edge lengths and each node receives half of its
    incident lengths.  K is positive semi-definite with zero row sums.

    Raises:
        DegenerateTriangle: If a triangle's area is below 1e-14 of the mean.
    """
    count = mesh.vertex_count
    if isinstance(mesh, Graph1D):
        edges, lengths = mesh_edges(mesh)
        rows, cols, weights = edges[:, 0], edges[:, 1], 1.0 / lengths
        mass = np.zeros(count)
        np.add.at(mass, rows, 0.5 * lengths)
        np.add.at(mass, cols, 0.5 * lengths)
    else:
        e1, e2 = _triangle_edges(mesh)
        double_area = np.linalg.norm(np.cross(e1, e2), axis=1)
        mean = double_area.mean()
        if np.any(double_area < _DEGENERATE_AREA * mean):
            worst = int(np.argmin(double_area))
            raise DegenerateTriangle(
                f"triangle {worst} {mesh.triangles[worst].tolist()} has area {0.5 * double_area[worst]:.3g}"
            )
        e3 = e2 - e1
        # Cotangent of the angle at each corner, paired with the opposite edge.
        cot0 = np.einsum("ij,ij->i", e1, e2) / double_area
        cot1 = np.einsum("ij,ij->i", -e1, e3) / double_area
        cot2 = np.einsum("ij,ij->i", e2, e3) / double_area
        tri = mesh.triangles
        rows = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
        cols = np.concatenate([tri[:, 2], tri[:, 0], tri[:, 1]])
        weights = 0.5 * np.concatenate([cot0, cot1, cot2])
        mass = np.zeros(count)
        for corner in range(3):
            np.add.at(mass, tri[:, corner], double_area / 6.0)

    off = sparse.coo_matrix((weights, (rows, cols)), shape=(count, count)).tocsr()
    off = off + off.T
    stiffness = sparse.diags(np.asarray(off.sum(axis=1)).ravel()) - off
    return stiffness.tocsr(), mass


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

def _deflate(v: np.ndarray, mass: np.ndarray, total: float) -> np.ndarray:
    """Remove the constant component of *v* in the mass inner product."""
    return v - (mass @ v) / total


def first_nontrivial_eigenvalue(
    stiffness: sparse.spmatrix,
    mass: np.ndarray,
    tol: float | None = None,
    config: SpectralConfig | None = None,
) -> SpectralEstimate:
    """Smallest positive eigenvalue of K v = lambda M v by deflated inverse iteration.

    Every step solves K w = M v by conjugate gradients, projects the constants
    out of w in the mass inner product and M-normalises it.  Iteration stops
    when ``||K v - lambda M v|| / ||M v|| <= tol * lambda``.

    Args:
        stiffness: Symmetric positive semi-definite stiffness with constant null space.
        mass: Positive lumped mass per vertex.
        tol: Overrides ``config.tol`` when given.
        config: Iteration settings; defaults to ``SpectralConfig()``.

    Raises:
        NoConvergence: If the residual is still above tolerance after
            ``config.max_iterations`` steps.
    """
    config = config or SpectralConfig()
    tol = config.tol if tol is None else tol
    count = len(mass)
    total = float(mass.sum())
    rng = np.random.default_rng(config.seed)

    v = _deflate(rng.standard_normal(count), mass, total)
    v /= math.sqrt(v @ (mass * v))
    lam = float(v @ (stiffness @ v))
    residual = math.inf
    for iteration in range(1, config.max_iterations + 1):
        w, info = cg(
            stiffness,
            mass * v,
            x0=v / max(lam, 1e-300),
            rtol=tol * config.inner_rtol_factor,
            atol=0.0,
            maxiter=10 * count,
        )
        if info > 0:
            log.warning("CG did not converge in %d iterations at outer step %d", info, iteration)
        w = _deflate(w, mass, total)
        v = w / math.sqrt(w @ (mass * w))
        kv = stiffness @ v
        lam = float(v @ kv)
        mv = mass * v
        residual = float(np.linalg.norm(kv - lam * mv) / np.linalg.norm(mv))
        log.debug("Inverse iteration %d: lambda=%.15g residual=%.3g", iteration, lam, residual)
        if residual <= tol * lam:
            log.info("lambda1=%.15g after %d iterations (residual %.3g)", lam, iteration, residual)
            return SpectralEstimate(lambda1=lam, residual=residual, iterations=iteration, grid_size=count, vector=v)

    raise NoConvergence(
        f"inverse iteration stopped after {config.max_iterations} steps with residual {residual:.3g}",
        residual=residual,
    )


# ---------------------------------------------------------------------------
# Distances and the oscillation quotient
# ---------------------------------------------------------------------------

def _edge_graph(mesh: Manifold) -> sparse.csr_matrix:
    edges, lengths = mesh_edges(mesh)
    count = mesh.vertex_count
    return sparse.coo_matrix((lengths, (edges[:, 0], edges[:, 1])), shape=(count, count)).tocsr()


def _distances(graph: sparse.csr_matrix, sources: np.ndarray):
    """Yield ``(sources_chunk, distance_block)`` along mesh edges."""
    for start in range(0, len(sources), _DISTANCE_CHUNK):
        chunk = sources[start : start + _DISTANCE_CHUNK]
        yield chunk, dijkstra(graph, directed=False, indices=chunk)


def _arc_distances(mesh: TriangleMesh, sources: np.ndarray):
    """Yield ``(sources_chunk, distance_block)`` of great-circle distances."""
    unit = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    for start in range(0, len(sources), _DISTANCE_CHUNK):
        chunk = sources[start : start + _DISTANCE_CHUNK]
        yield chunk, mesh.radius * np.arccos(np.clip(unit[chunk] @ unit.T, -1.0, 1.0))


def uses_arc_distances(mesh: Manifold) -> bool:
    """True when pair distances on *mesh* are geodesic arcs rather than edge paths."""
    return isinstance(mesh, TriangleMesh) and mesh.radius is not None


def graph_diameter(mesh: Manifold) -> float:
    """Largest shortest-path distance along edges, over all vertex pairs.

    Paths are confined to edges, so on curved or diagonal meshes this
    overestimates the geodesic diameter.
    """
    graph = _edge_graph(mesh)
    diameter = 0.0
    for _, block in _distances(graph, np.arange(mesh.vertex_count)):
        diameter = max(diameter, float(block.max()))
    return diameter


def _gradient_norms(mesh: Manifold, eigenvector: np.ndarray) -> np.ndarray:
    """Per-element gradient norms of the piecewise-linear interpolant."""
    if isinstance(mesh, Graph1D):
        edges, lengths = mesh_edges(mesh)
        return np.abs(eigenvector[edges[:, 1]] - eigenvector[edges[:, 0]]) / lengths
    e1, e2 = _triangle_edges(mesh)
    values = eigenvector[mesh.triangles]
    differences = np.column_stack([values[:, 1] - values[:, 0], values[:, 2] - values[:, 0]])
    frames = np.stack([e1, e2], axis=1)
    gram = frames @ frames.transpose(0, 2, 1)
    coefficients = np.linalg.solve(gram, differences[..., None])
    gradients = (frames.transpose(0, 2, 1) @ coefficients)[..., 0]
    return np.linalg.norm(gradients, axis=1)


def oscillation_quotient_max(
    mesh: Manifold,
    eigenvector: np.ndarray,
    model: ModelEigenSolution,
    distances: np.ndarray | None = None,
    seed: int = 0,
) -> OscillationReport:
    """Maximise Q(x, y) = (phi(y) - phi(x)) / Phi(d(x, y)/2) over vertex pairs.

    Distances are great-circle arcs on a sphere mesh and edge paths
    otherwise, unless a full matrix *distances* is supplied.  With more than 2000 vertices, 2000 source vertices are drawn
    with *seed*.  The diagonal branch is approximated per element by
    ``2 |grad phi| / Phi'(0)``.

    Raises:
        ModelTooShort: If some half-distance lies beyond the model profile.
    """
    count = mesh.vertex_count
    sampled = distances is None and count > _MAX_PAIR_SOURCES
    if sampled:
        sources = np.sort(np.random.default_rng(seed).choice(count, size=_MAX_PAIR_SOURCES, replace=False))
    else:
        sources = np.arange(count)

    if distances is not None:
        blocks = [(sources, np.asarray(distances)[sources])]
    elif uses_arc_distances(mesh):
        blocks = _arc_distances(mesh, sources)
    else:
        blocks = _distances(_edge_graph(mesh), sources)

    reach = float(model.grid[-1]) * (1.0 + 1e-12)
    best, best_pair = -math.inf, (0, 0)
    for chunk, block in blocks:
        half = 0.5 * block
        if half.max() > reach:
            raise ModelTooShort(
                f"half-distance {half.max():.6g} exceeds the model profile length {model.grid[-1]:.6g}; "
                "build the model on a diameter at least the graph diameter"
            )
        profile = np.interp(half, model.grid, model.phi)
        rise = eigenvector[None, :] - eigenvector[chunk][:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = np.where(block > 0, rise / profile, -np.inf)
        flat = int(np.argmax(quotient))
        row, col = divmod(flat, count)
        if quotient[row, col] > best:
            best, best_pair = float(quotient[row, col]), (int(chunk[row]), int(col))

    gradients = _gradient_norms(mesh, eigenvector)
    diagonal = 2.0 * gradients / float(model.dphi[0])
    diagonal_index = int(np.argmax(diagonal))
    diagonal_max = float(diagonal[diagonal_index])

    winner_is_pair = best >= diagonal_max
    log.info("Oscillation quotient: pair max %.9g at %s, diagonal max %.9g", best, best_pair, diagonal_max)
    return OscillationReport(
        max_q=best if winner_is_pair else diagonal_max,
        argmax=best_pair if winner_is_pair else "diagonal",
        pair_max=best,
        pair_argmax=best_pair,
        diagonal_max=diagonal_max,
        diagonal_argmax=diagonal_index,
        sampled=sampled,
        sources=len(sources),
        seed=seed,
    )
